//! Parser for the Lean 4 surface subset.
//!
//! Accepts `theorem`/`lemma` declarations in binder-list form, statements
//! built from quantifiers, propositional connectives, comparisons, and linear
//! arithmetic, plus bounded-quantifier sugar (`\u{2200} n \u{2265} 5, ...`). Chained
//! top-level arrows in the statement are lifted into hypotheses: named
//! `(h : P) \u{2192} ...` antecedents keep their name, bare antecedents become
//! anonymous hypotheses `a0, a1, ...`. Subterms outside the structured grammar
//! are captured as opaque-raw terms as long as their delimiters balance.

use serde::{Deserialize, Serialize};

use crate::lex::{lex, strip_comments, LexError, Span, Sym, Tok, Token};
use crate::statement::{
    Binder, BinderMode, Hypothesis, ProofScript, Provenance, TheoremStatement,
};
use crate::term::{BinOp, QuantBinder, QuantKind, RawTerm, Term};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    /// Input is lexically fine but outside the supported subset.
    #[error("unsupported syntax at {span}: {detail}")]
    SyntaxUnsupported { span: Span, detail: String },
    /// Input is structurally broken (unbalanced delimiters, missing pieces).
    #[error("malformed syntax at {span}: {detail}")]
    SyntaxMalformed { span: Span, detail: String },
    #[error("duplicate name `{name}`")]
    DuplicateName { name: String },
}

impl From<LexError> for ParseError {
    fn from(e: LexError) -> Self {
        match e {
            LexError::UnterminatedComment(span) => ParseError::SyntaxMalformed {
                span,
                detail: "unterminated block comment".into(),
            },
            LexError::NumOverflow(span) => ParseError::SyntaxUnsupported {
                span,
                detail: "numeric literal out of range".into(),
            },
        }
    }
}

fn unsupported(span: Span, detail: &str) -> ParseError {
    ParseError::SyntaxUnsupported {
        span,
        detail: detail.into(),
    }
}

fn malformed(span: Span, detail: &str) -> ParseError {
    ParseError::SyntaxMalformed {
        span,
        detail: detail.into(),
    }
}

/// One skipped declaration from a corpus parse. `span` is the 1-based
/// inclusive line range in the source file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub file: String,
    pub span: (usize, usize),
    pub reason: String,
}

/// Result of parsing a whole corpus file: every declaration either parses or
/// is recorded as skipped.
#[derive(Debug, Clone, Default)]
pub struct CorpusParse {
    pub theorems: Vec<TheoremStatement>,
    pub skips: Vec<SkipRecord>,
}

/// Expression nesting limit; deeper input degrades to an opaque fragment or
/// an error instead of unbounded recursion.
const MAX_EXPR_DEPTH: u32 = 256;

const PREC_IMP: u8 = 10;
const PREC_OR: u8 = 20;
const PREC_AND: u8 = 25;
const PREC_NOT: u8 = 30;
const PREC_REL: u8 = 40;
const PREC_ADD: u8 = 50;
const PREC_MUL: u8 = 55;
const PREC_NEG: u8 = 60;
const PREC_APP: u8 = 90;

fn infix_op(sym: &Sym) -> Option<(BinOp, u8, Assoc)> {
    use Assoc::*;
    Some(match sym {
        Sym::Imp => (BinOp::Imp, PREC_IMP, Right),
        Sym::Or => (BinOp::Or, PREC_OR, Right),
        Sym::And => (BinOp::And, PREC_AND, Right),
        Sym::Eq => (BinOp::Eq, PREC_REL, None_),
        Sym::Ne => (BinOp::Ne, PREC_REL, None_),
        Sym::Le => (BinOp::Le, PREC_REL, None_),
        Sym::Lt => (BinOp::Lt, PREC_REL, None_),
        Sym::Ge => (BinOp::Ge, PREC_REL, None_),
        Sym::Gt => (BinOp::Gt, PREC_REL, None_),
        Sym::Plus => (BinOp::Add, PREC_ADD, Left),
        Sym::Minus => (BinOp::Sub, PREC_ADD, Left),
        Sym::Star => (BinOp::Mul, PREC_MUL, Left),
        _ => return None,
    })
}

#[derive(Clone, Copy, PartialEq)]
enum Assoc {
    Left,
    Right,
    None_,
}

struct P<'a> {
    src: &'a str,
    toks: &'a [Token],
    pos: usize,
    end: usize,
    depth: u32,
}

impl<'a> P<'a> {
    fn new(src: &'a str, toks: &'a [Token], lo: usize, hi: usize) -> Self {
        P {
            src,
            toks,
            pos: lo,
            end: hi,
            depth: 0,
        }
    }

    fn peek(&self) -> Option<&'a Token> {
        if self.pos < self.end {
            Some(&self.toks[self.pos])
        } else {
            None
        }
    }

    fn bump(&mut self) -> Option<&'a Token> {
        let t = self.peek();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn at_sym(&self, s: &Sym) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Sym(x), .. }) if x == s)
    }

    fn eat_sym(&mut self, s: &Sym) -> bool {
        if self.at_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &Sym, what: &str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(malformed(self.here(), what))
        }
    }

    fn here(&self) -> Span {
        match self.peek() {
            Some(t) => t.span,
            None => {
                let end = self
                    .toks
                    .get(self.end.saturating_sub(1))
                    .map(|t| t.span.end)
                    .unwrap_or(self.src.len());
                Span::new(end, end)
            }
        }
    }

    fn slice_of(&self, lo: usize, hi: usize) -> &'a str {
        if lo >= hi {
            return "";
        }
        let a = self.toks[lo].span.start;
        let b = self.toks[hi - 1].span.end;
        &self.src[a..b]
    }

    /// Token index of the close matching the open bracket at `open_idx`.
    fn matching(&self, open_idx: usize) -> Result<usize, ParseError> {
        let mut depth = 0i32;
        for i in open_idx..self.end {
            if let Tok::Sym(s) = &self.toks[i].tok {
                match s {
                    Sym::LParen | Sym::LBrace | Sym::LBracket | Sym::LAngle => depth += 1,
                    Sym::RParen | Sym::RBrace | Sym::RBracket | Sym::RAngle => {
                        depth -= 1;
                        if depth == 0 {
                            return Ok(i);
                        }
                        if depth < 0 {
                            return Err(malformed(
                                self.toks[i].span,
                                "unbalanced close delimiter",
                            ));
                        }
                    }
                    _ => {}
                }
            }
        }
        Err(malformed(
            self.toks[open_idx].span,
            "unclosed delimiter",
        ))
    }

    /// Indices in `lo..hi` where `sym` occurs at bracket depth 0.
    fn top_level_positions(&self, lo: usize, hi: usize, sym: &Sym) -> Vec<usize> {
        let mut depth = 0i32;
        let mut out = Vec::new();
        for i in lo..hi {
            if let Tok::Sym(s) = &self.toks[i].tok {
                match s {
                    Sym::LParen | Sym::LBrace | Sym::LBracket | Sym::LAngle => depth += 1,
                    Sym::RParen | Sym::RBrace | Sym::RBracket | Sym::RAngle => depth -= 1,
                    s if s == sym && depth == 0 => out.push(i),
                    _ => {}
                }
            }
        }
        out
    }

    /// Parses the token range `lo..hi` as one expression, falling back to an
    /// opaque-raw capture when the structured grammar fails but delimiters
    /// balance.
    fn range_expr_or_raw(&self, lo: usize, hi: usize) -> Result<Term, ParseError> {
        if lo >= hi {
            return Err(malformed(self.here(), "expected a term"));
        }
        let mut sub = P::new(self.src, self.toks, lo, hi);
        sub.depth = self.depth;
        match sub.parse_expr(0) {
            Ok(t) if sub.pos == hi => Ok(t),
            _ => {
                let mut depth = 0i32;
                for i in lo..hi {
                    if let Tok::Sym(s) = &self.toks[i].tok {
                        match s {
                            Sym::LParen | Sym::LBrace | Sym::LBracket | Sym::LAngle => depth += 1,
                            Sym::RParen | Sym::RBrace | Sym::RBracket | Sym::RAngle => depth -= 1,
                            _ => {}
                        }
                        if depth < 0 {
                            return Err(malformed(
                                self.toks[i].span,
                                "unbalanced delimiters in opaque fragment",
                            ));
                        }
                    }
                }
                if depth != 0 {
                    return Err(malformed(
                        self.toks[lo].span,
                        "unbalanced delimiters in opaque fragment",
                    ));
                }
                Ok(Term::Raw(RawTerm::new(self.slice_of(lo, hi))))
            }
        }
    }

    /// Splits `lo..hi` on top-level `\u{2192}` and parses each segment, keeping the
    /// arrow skeleton even when segments are opaque. Returns the segments in
    /// order; the last is the consequent.
    fn parse_arrow_segments(
        &self,
        lo: usize,
        hi: usize,
    ) -> Result<Vec<(Option<String>, Term)>, ParseError> {
        // A quantifier body extends maximally right, so arrows past the
        // first unparenthesized quantifier are inside it, not antecedents.
        let mut limit = hi;
        let mut depth = 0i32;
        for i in lo..hi {
            if let Tok::Sym(s) = &self.toks[i].tok {
                match s {
                    Sym::LParen | Sym::LBrace | Sym::LBracket | Sym::LAngle => depth += 1,
                    Sym::RParen | Sym::RBrace | Sym::RBracket | Sym::RAngle => depth -= 1,
                    Sym::Forall | Sym::Exists if depth == 0 => {
                        limit = i;
                        break;
                    }
                    _ => {}
                }
            }
        }
        let cuts = self.top_level_positions(lo, limit, &Sym::Imp);
        let mut bounds = Vec::with_capacity(cuts.len() + 1);
        let mut start = lo;
        for c in &cuts {
            bounds.push((start, *c));
            start = c + 1;
        }
        bounds.push((start, hi));
        let last = bounds.len() - 1;
        let mut out = Vec::new();
        for (i, (a, b)) in bounds.into_iter().enumerate() {
            // An antecedent of the exact shape `(name : ty)` is a named
            // hypothesis binder, not a parenthesized proposition.
            if i < last {
                if let Some(named) = self.try_named_antecedent(a, b)? {
                    out.push((Some(named.0), named.1));
                    continue;
                }
            }
            out.push((None, self.range_expr_or_raw(a, b)?));
        }
        Ok(out)
    }

    fn try_named_antecedent(
        &self,
        lo: usize,
        hi: usize,
    ) -> Result<Option<(String, Term)>, ParseError> {
        if hi - lo < 4 {
            return Ok(None);
        }
        let is_open = matches!(self.toks[lo].tok, Tok::Sym(Sym::LParen));
        let name = match &self.toks[lo + 1].tok {
            Tok::Ident(n) => n.clone(),
            _ => return Ok(None),
        };
        let has_colon = matches!(self.toks[lo + 2].tok, Tok::Sym(Sym::Colon));
        if !(is_open && has_colon) {
            return Ok(None);
        }
        let close = self.matching(lo)?;
        if close != hi - 1 {
            return Ok(None);
        }
        let ty = self.range_expr_or_raw(lo + 3, close)?;
        Ok(Some((name, ty)))
    }

    fn parse_expr(&mut self, min_prec: u8) -> Result<Term, ParseError> {
        if self.depth >= MAX_EXPR_DEPTH {
            return Err(unsupported(self.here(), "expression nesting too deep"));
        }
        self.depth += 1;
        let out = self.parse_expr_inner(min_prec);
        self.depth -= 1;
        out
    }

    fn parse_expr_inner(&mut self, min_prec: u8) -> Result<Term, ParseError> {
        let mut lhs = self.parse_prefix(min_prec)?;
        loop {
            let Some(tok) = self.peek() else { break };
            match &tok.tok {
                Tok::Sym(sym) => {
                    if let Some((op, prec, assoc)) = infix_op(sym) {
                        if prec < min_prec {
                            break;
                        }
                        self.bump();
                        let rhs_min = match assoc {
                            Assoc::Right => prec,
                            Assoc::Left | Assoc::None_ => prec + 1,
                        };
                        let rhs = self.parse_expr(rhs_min)?;
                        if assoc == Assoc::None_ {
                            if let Some(Token { tok: Tok::Sym(s2), span }) = self.peek() {
                                if infix_op(s2).is_some_and(|(_, p2, _)| p2 == prec) {
                                    return Err(unsupported(
                                        *span,
                                        "chained comparison",
                                    ));
                                }
                            }
                        }
                        lhs = Term::bin(op, lhs, rhs);
                        continue;
                    }
                    if matches!(sym, Sym::LParen) && PREC_APP >= min_prec {
                        let arg = self.parse_atom()?;
                        lhs = push_arg(lhs, arg);
                        continue;
                    }
                    break;
                }
                Tok::Ident(_) | Tok::Num(_) => {
                    if PREC_APP < min_prec {
                        break;
                    }
                    let arg = self.parse_atom()?;
                    lhs = push_arg(lhs, arg);
                }
            }
        }
        Ok(lhs)
    }

    fn parse_prefix(&mut self, _min_prec: u8) -> Result<Term, ParseError> {
        let Some(tok) = self.peek() else {
            return Err(malformed(self.here(), "expected a term"));
        };
        match &tok.tok {
            Tok::Sym(Sym::Not) => {
                self.bump();
                Ok(Term::not(self.parse_expr(PREC_NOT)?))
            }
            Tok::Sym(Sym::Minus) => {
                self.bump();
                Ok(Term::Neg(Box::new(self.parse_expr(PREC_NEG)?)))
            }
            Tok::Sym(Sym::Forall) => {
                self.bump();
                self.parse_quantifier(QuantKind::Forall)
            }
            Tok::Sym(Sym::Exists) => {
                self.bump();
                self.parse_quantifier(QuantKind::Exists)
            }
            _ => self.parse_atom(),
        }
    }

    fn parse_atom(&mut self) -> Result<Term, ParseError> {
        let Some(tok) = self.peek() else {
            return Err(malformed(self.here(), "expected a term"));
        };
        match &tok.tok {
            Tok::Ident(name) => {
                let name = name.clone();
                self.bump();
                Ok(Term::Ident(name))
            }
            Tok::Num(n) => {
                let n = *n;
                self.bump();
                Ok(Term::Num(n))
            }
            Tok::Sym(Sym::LParen) => {
                let open = self.pos;
                let close = self.matching(open)?;
                let inner = self.range_expr_or_raw(open + 1, close)?;
                self.pos = close + 1;
                Ok(inner)
            }
            Tok::Sym(s) => Err(unsupported(
                tok.span,
                &format!("token `{}` outside the supported grammar", s.text()),
            )),
        }
    }

    fn parse_quantifier(&mut self, kind: QuantKind) -> Result<Term, ParseError> {
        let binders = self.parse_quant_binders()?;
        self.expect_sym(&Sym::Comma, "expected `,` after quantifier binders")?;
        let body = self.parse_expr(0)?;
        Ok(Term::Quant {
            kind,
            binders,
            body: Box::new(body),
        })
    }

    fn parse_quant_binders(&mut self) -> Result<Vec<QuantBinder>, ParseError> {
        let mut binders: Vec<QuantBinder> = Vec::new();
        loop {
            match self.peek().map(|t| &t.tok) {
                Some(Tok::Sym(Sym::Comma)) => break,
                Some(Tok::Sym(Sym::LParen)) => {
                    let open = self.pos;
                    let close = self.matching(open)?;
                    let colons = self.top_level_positions(open + 1, close, &Sym::Colon);
                    let colon = *colons.first().ok_or_else(|| {
                        malformed(self.toks[open].span, "binder group missing `:`")
                    })?;
                    let names = self.collect_names(open + 1, colon)?;
                    let ty = self.range_expr_or_raw(colon + 1, close)?;
                    for n in names {
                        binders.push(QuantBinder::typed(&n, ty.clone()));
                    }
                    self.pos = close + 1;
                }
                Some(Tok::Ident(name)) => {
                    let name = name.clone();
                    self.bump();
                    match self.peek().map(|t| &t.tok) {
                        // `\u{2203} x : T, ...`: the type runs to the comma and
                        // covers every name collected so far in this group.
                        Some(Tok::Sym(Sym::Colon)) => {
                            self.bump();
                            let comma = self
                                .top_level_positions(self.pos, self.end, &Sym::Comma)
                                .first()
                                .copied()
                                .ok_or_else(|| {
                                    malformed(self.here(), "expected `,` after binder type")
                                })?;
                            let ty = self.range_expr_or_raw(self.pos, comma)?;
                            self.pos = comma;
                            let untyped_tail: Vec<usize> = binders
                                .iter()
                                .enumerate()
                                .rev()
                                .take_while(|(_, b)| b.ty.is_none() && b.bound.is_none())
                                .map(|(i, _)| i)
                                .collect();
                            for i in untyped_tail {
                                binders[i].ty = Some(Box::new(ty.clone()));
                            }
                            binders.push(QuantBinder::typed(&name, ty));
                        }
                        // Bounded sugar `\u{2200} n \u{2265} 5, ...`.
                        Some(Tok::Sym(s))
                            if matches!(s, Sym::Ge | Sym::Gt | Sym::Le | Sym::Lt) =>
                        {
                            let op = infix_op(s).expect("relational sym").0;
                            self.bump();
                            let bound = self.parse_expr(PREC_REL + 1)?;
                            binders.push(QuantBinder {
                                name,
                                ty: None,
                                bound: Some((op, Box::new(bound))),
                            });
                        }
                        _ => binders.push(QuantBinder::plain(&name)),
                    }
                }
                _ => {
                    return Err(malformed(
                        self.here(),
                        "expected a quantifier binder",
                    ))
                }
            }
        }
        if binders.is_empty() {
            return Err(malformed(self.here(), "quantifier with no binders"));
        }
        Ok(binders)
    }

    fn collect_names(&self, lo: usize, hi: usize) -> Result<Vec<String>, ParseError> {
        let mut names = Vec::new();
        for i in lo..hi {
            match &self.toks[i].tok {
                Tok::Ident(n) => names.push(n.clone()),
                _ => {
                    return Err(unsupported(
                        self.toks[i].span,
                        "binder names must be identifiers",
                    ))
                }
            }
        }
        if names.is_empty() {
            return Err(malformed(self.here(), "binder group with no names"));
        }
        Ok(names)
    }
}

fn push_arg(head: Term, arg: Term) -> Term {
    match head {
        Term::App { head, mut args } => {
            args.push(arg);
            Term::App { head, args }
        }
        other => Term::app(other, vec![arg]),
    }
}

/// Sorts and sort-valued type formers used to tell value binders from
/// hypotheses when a binder group's type is syntactically ambiguous.
const SORT_NAMES: &[&str] = &[
    "\u{2115}", "\u{2124}", "\u{211a}", "\u{211d}", "\u{2102}", "Nat", "Int", "Rat", "Real",
    "Prop", "Bool", "Type", "Sort", "String", "Char",
];

const TYPE_FORMERS: &[&str] = &[
    "Set", "Fin", "Finset", "List", "Vector", "Multiset", "Array", "Option", "Matrix",
    "Polynomial", "Subtype",
];

fn type_like(ty: &Term) -> bool {
    match ty {
        Term::Ident(n) => SORT_NAMES.contains(&n.as_str()),
        Term::App { head, .. } => match head.as_ref() {
            Term::Ident(n) => SORT_NAMES.contains(&n.as_str()) || TYPE_FORMERS.contains(&n.as_str()),
            _ => false,
        },
        Term::Bin {
            op: BinOp::Imp,
            lhs,
            rhs,
        } => type_like(lhs) && type_like(rhs),
        Term::Raw(raw) => raw
            .idents
            .first()
            .is_some_and(|n| SORT_NAMES.contains(&n.as_str()) || TYPE_FORMERS.contains(&n.as_str())),
        _ => false,
    }
}

/// Decides whether a binder group reads as a hypothesis: never for sort-like
/// types, otherwise for prop-shaped types, types referencing an earlier
/// hypothesis, or groups whose names all follow the hypothesis convention.
pub(crate) fn classify_hypothesis(names: &[String], ty: &Term, earlier_hyps: &[String]) -> bool {
    !type_like(ty)
        && (ty.is_prop_shaped()
            || ty.free_vars().iter().any(|v| earlier_hyps.contains(v))
            || names.iter().all(|n| hyp_like_name(n)))
}

/// Naming convention for hypotheses: `h`-prefixed names, or the `a<digits>`
/// names the parser itself assigns to anonymous antecedents.
fn hyp_like_name(name: &str) -> bool {
    let mut cs = name.chars();
    match cs.next() {
        Some('h') => true,
        Some('a') => {
            let rest: String = cs.collect();
            !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit())
        }
        _ => false,
    }
}

struct RawGroup {
    mode: BinderMode,
    names: Vec<String>,
    ty: Term,
}

/// Parses a single theorem declaration.
pub fn parse_theorem(src: &str) -> Result<TheoremStatement, ParseError> {
    let stripped = strip_comments(src)?;
    let toks = lex(&stripped)?;
    let end = toks.len();
    let mut p = P::new(&stripped, &toks, 0, end);

    match p.bump().map(|t| &t.tok) {
        Some(Tok::Ident(kw)) if kw == "theorem" || kw == "lemma" => {}
        _ => {
            return Err(unsupported(
                Span::new(0, 0),
                "expected a `theorem` declaration",
            ))
        }
    }
    let name = match p.bump() {
        Some(Token {
            tok: Tok::Ident(n), ..
        }) => n.clone(),
        _ => return Err(malformed(p.here(), "expected theorem name")),
    };

    // Signature binder groups up to the statement colon.
    let mut groups: Vec<RawGroup> = Vec::new();
    let mut inst_counter = 0usize;
    loop {
        let Some(tok) = p.peek() else {
            return Err(malformed(p.here(), "expected `:` before statement"));
        };
        match &tok.tok {
            Tok::Sym(Sym::Colon) => {
                p.bump();
                break;
            }
            Tok::Sym(open @ (Sym::LParen | Sym::LBrace | Sym::LBracket)) => {
                let mode = match open {
                    Sym::LParen => BinderMode::Explicit,
                    Sym::LBrace => BinderMode::Implicit,
                    _ => BinderMode::Instance,
                };
                let open_idx = p.pos;
                let close = p.matching(open_idx)?;
                if !p
                    .top_level_positions(open_idx + 1, close, &Sym::ColonEq)
                    .is_empty()
                {
                    return Err(unsupported(
                        toks[open_idx].span,
                        "binder default values",
                    ));
                }
                let colons = p.top_level_positions(open_idx + 1, close, &Sym::Colon);
                match colons.first() {
                    Some(&colon) => {
                        let names = p.collect_names(open_idx + 1, colon)?;
                        let ty = p.range_expr_or_raw(colon + 1, close)?;
                        groups.push(RawGroup { mode, names, ty });
                    }
                    None if mode == BinderMode::Instance => {
                        let ty = p.range_expr_or_raw(open_idx + 1, close)?;
                        groups.push(RawGroup {
                            mode,
                            names: vec![format!("inst{inst_counter}")],
                            ty,
                        });
                        inst_counter += 1;
                    }
                    None => {
                        return Err(malformed(
                            toks[open_idx].span,
                            "binder group missing `:`",
                        ))
                    }
                }
                p.pos = close + 1;
            }
            _ => {
                return Err(unsupported(
                    tok.span,
                    "expected a binder group or `:`",
                ))
            }
        }
    }

    // Statement runs to the top-level `:=`, or to the end if there is no proof.
    let assign = p
        .top_level_positions(p.pos, end, &Sym::ColonEq)
        .first()
        .copied();
    let stmt_end = assign.unwrap_or(end);
    if p.pos >= stmt_end {
        return Err(malformed(p.here(), "missing statement"));
    }
    let segments = p.parse_arrow_segments(p.pos, stmt_end)?;

    // Proof text comes from the original source so author formatting survives.
    let proof = match assign {
        Some(a) => {
            let from = toks[a].span.end;
            let until = toks
                .last()
                .map(|t| t.span.end)
                .unwrap_or(stripped.len());
            let text = &src[from..until.min(src.len())];
            if text.trim().is_empty() {
                None
            } else {
                Some(ProofScript::new(text))
            }
        }
        None => None,
    };

    assemble_statement(name, groups, segments, proof)
}

fn assemble_statement(
    name: String,
    groups: Vec<RawGroup>,
    mut segments: Vec<(Option<String>, Term)>,
    proof: Option<ProofScript>,
) -> Result<TheoremStatement, ParseError> {
    let conclusion = segments.pop().expect("at least one segment").1;

    let mut binders: Vec<Binder> = Vec::new();
    let mut hypotheses: Vec<Hypothesis> = Vec::new();
    let mut hyp_names: Vec<String> = Vec::new();

    for g in groups {
        let is_hyp =
            g.mode == BinderMode::Explicit && classify_hypothesis(&g.names, &g.ty, &hyp_names);
        if is_hyp {
            for n in g.names {
                hyp_names.push(n.clone());
                hypotheses.push(Hypothesis {
                    name: n,
                    prop: g.ty.clone(),
                    index: hypotheses.len(),
                });
            }
        } else {
            for n in g.names {
                binders.push(Binder {
                    name: n,
                    ty: g.ty.clone(),
                    mode: g.mode,
                });
            }
        }
    }

    let mut used: Vec<String> = binders.iter().map(|b| b.name.clone()).collect();
    used.extend(hyp_names.iter().cloned());
    let mut anon = 0usize;
    for (seg_name, prop) in segments {
        let n = match seg_name {
            Some(n) => n,
            None => {
                let mut candidate = format!("a{anon}");
                while used.contains(&candidate) {
                    anon += 1;
                    candidate = format!("a{anon}");
                }
                anon += 1;
                candidate
            }
        };
        used.push(n.clone());
        // A sort-like antecedent is a value binder in disguise; classifying
        // it the same way as signature groups keeps reparse stable.
        if classify_hypothesis(std::slice::from_ref(&n), &prop, &hyp_names) {
            hyp_names.push(n.clone());
            hypotheses.push(Hypothesis {
                name: n,
                prop,
                index: hypotheses.len(),
            });
        } else {
            binders.push(Binder {
                name: n,
                ty: prop,
                mode: BinderMode::Explicit,
            });
        }
    }

    let mut seen = std::collections::BTreeSet::new();
    for n in &used {
        if !seen.insert(n.clone()) {
            return Err(ParseError::DuplicateName { name: n.clone() });
        }
    }

    let stmt = TheoremStatement {
        name,
        binders,
        hypotheses,
        conclusion,
        proof,
        provenance: Provenance::library(),
    };
    let violations = stmt.scope_violations();
    if !violations.is_empty() {
        return Err(unsupported(
            Span::new(0, 0),
            &format!(
                "name referenced before its binding: {}",
                violations.join(", ")
            ),
        ));
    }
    Ok(stmt)
}

/// Parses a standalone term (used for proof-state goals and tests).
pub fn parse_term(src: &str) -> Result<Term, ParseError> {
    let stripped = strip_comments(src)?;
    let toks = lex(&stripped)?;
    let p = P::new(&stripped, &toks, 0, toks.len());
    p.range_expr_or_raw(0, toks.len())
}

const DECL_KEYWORDS: &[&str] = &[
    "theorem",
    "lemma",
    "example",
    "def",
    "abbrev",
    "instance",
    "structure",
    "inductive",
    "class",
    "import",
    "open",
    "namespace",
    "section",
    "end",
    "variable",
    "variables",
    "attribute",
    "set_option",
    "noncomputable",
    "private",
    "protected",
    "universe",
    "axiom",
    "constant",
    "macro",
    "syntax",
    "notation",
    "deriving",
    "mutual",
];

fn decl_keyword(line: &str) -> Option<&str> {
    let trimmed = line.trim_start();
    if trimmed.len() != line.len() {
        // Indented lines continue the previous declaration.
        return None;
    }
    if line.starts_with("@[") {
        return Some("@");
    }
    let word: String = line
        .chars()
        .take_while(|c| c.is_alphanumeric() || *c == '_')
        .collect();
    DECL_KEYWORDS
        .iter()
        .find(|k| **k == word)
        .copied()
}

/// Parses a corpus file into theorems plus skip records for everything else.
/// Duplicate theorem names keep the first occurrence and skip the rest.
pub fn parse_corpus(src: &str, file: &str) -> CorpusParse {
    let stripped = match strip_comments(src) {
        Ok(s) => s,
        Err(e) => {
            return CorpusParse {
                theorems: Vec::new(),
                skips: vec![SkipRecord {
                    file: file.to_string(),
                    span: (1, src.lines().count().max(1)),
                    reason: e.to_string(),
                }],
            }
        }
    };

    let lines: Vec<&str> = src.lines().collect();
    let stripped_lines: Vec<&str> = stripped.lines().collect();
    let mut chunks: Vec<(usize, usize, &str)> = Vec::new();
    let mut current: Option<(usize, &str)> = None;
    for (i, line) in stripped_lines.iter().enumerate() {
        if let Some(kw) = decl_keyword(line) {
            if let Some((start, k)) = current.take() {
                chunks.push((start, i, k));
            }
            current = Some((i, kw));
        }
    }
    if let Some((start, k)) = current.take() {
        chunks.push((start, stripped_lines.len(), k));
    }

    let mut out = CorpusParse::default();
    let mut seen_names = std::collections::BTreeSet::new();
    for (start, end, kw) in chunks {
        let span = (start + 1, end.min(lines.len()).max(start + 1));
        if kw != "theorem" && kw != "lemma" {
            out.skips.push(SkipRecord {
                file: file.to_string(),
                span,
                reason: format!("unsupported declaration kind `{kw}`"),
            });
            continue;
        }
        let text = lines[start..end.min(lines.len())].join("\n");
        match parse_theorem(&text) {
            Ok(t) => {
                if seen_names.insert(t.name.clone()) {
                    out.theorems.push(t);
                } else {
                    out.skips.push(SkipRecord {
                        file: file.to_string(),
                        span,
                        reason: format!("duplicate theorem name `{}`", t.name),
                    });
                }
            }
            Err(e) => out.skips.push(SkipRecord {
                file: file.to_string(),
                span,
                reason: e.to_string(),
            }),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> Term {
        Term::ident(s)
    }

    #[test]
    fn parses_schema_theorem_with_arrow_lifting() {
        let t = parse_theorem(
            "theorem original_version (x : X) : H\u{2081} x \u{2192} H\u{2082} x \u{2192} C x := by\n  exact demo",
        )
        .unwrap();
        assert_eq!(t.name, "original_version");
        assert_eq!(t.binders.len(), 1);
        assert_eq!(t.binders[0].name, "x");
        assert_eq!(t.binders[0].ty, v("X"));
        assert_eq!(t.hypotheses.len(), 2);
        assert_eq!(t.hypotheses[0].name, "a0");
        assert_eq!(t.hypotheses[0].prop, Term::app(v("H\u{2081}"), vec![v("x")]));
        assert_eq!(t.hypotheses[1].name, "a1");
        assert_eq!(t.conclusion, Term::app(v("C"), vec![v("x")]));
        assert!(t.indices_consistent());
    }

    #[test]
    fn named_pi_antecedent_keeps_its_name() {
        let t = parse_theorem("theorem t : (h : P) \u{2192} Q := by\n  sorry").unwrap();
        assert_eq!(t.hypotheses.len(), 1);
        assert_eq!(t.hypotheses[0].name, "h");
        assert_eq!(t.hypotheses[0].prop, v("P"));
        assert_eq!(t.conclusion, v("Q"));
    }

    #[test]
    fn parses_appendix_style_sequence_theorem() {
        let src = "theorem aimeII_2001_p3_g4_extracted_54\n    (x : \u{2115} \u{2192} \u{2124})\n    (h\u{2081} : \u{2200} n \u{2265} 5, x n = x (n - 1) - x (n - 2) + x (n - 3) - x (n - 4))\n    (h\u{2082} : x 10 = -267)\n    (h\u{2083} : x 11 = 211)\n    (h\u{2084} : x 12 = 375)\n    (h\u{2085} : x 13 \u{2260} 420) :\n    x 14 \u{2260} 523 := by\n  sorry";
        let t = parse_theorem(src).unwrap();
        assert_eq!(t.binders.len(), 1);
        assert_eq!(
            t.binders[0].ty,
            Term::bin(BinOp::Imp, v("\u{2115}"), v("\u{2124}"))
        );
        assert_eq!(t.hypotheses.len(), 5);
        let h1 = &t.hypotheses[0];
        match &h1.prop {
            Term::Quant { kind, binders, .. } => {
                assert_eq!(*kind, QuantKind::Forall);
                assert_eq!(binders.len(), 1);
                assert_eq!(binders[0].name, "n");
                assert!(binders[0].bound.is_some());
            }
            other => panic!("expected bounded forall, got {other:?}"),
        }
        assert_eq!(
            t.hypotheses[1].prop,
            Term::bin(
                BinOp::Eq,
                Term::app(v("x"), vec![Term::Num(10)]),
                Term::Neg(Box::new(Term::Num(267))),
            )
        );
        assert_eq!(
            t.conclusion,
            Term::bin(
                BinOp::Ne,
                Term::app(v("x"), vec![Term::Num(14)]),
                Term::Num(523),
            )
        );
    }

    #[test]
    fn function_typed_binder_is_not_a_hypothesis() {
        let t = parse_theorem("theorem t (f : \u{2115} \u{2192} \u{2115}) (h : f 0 = 1) : f 0 \u{2265} 1 := by\n  omega")
            .unwrap();
        assert_eq!(t.binders.len(), 1);
        assert_eq!(t.hypotheses.len(), 1);
    }

    #[test]
    fn untyped_exists_binder_with_shared_type() {
        let t = parse_term("\u{2203} a b : \u{2115}, a + b = 3").unwrap();
        match t {
            Term::Quant { binders, .. } => {
                assert_eq!(binders.len(), 2);
                assert!(binders.iter().all(|b| b.ty.as_deref() == Some(&v("\u{2115}"))));
            }
            other => panic!("expected exists, got {other:?}"),
        }
    }

    #[test]
    fn opaque_raw_fallback_within_balanced_parens() {
        let t = parse_theorem(
            "theorem t (s : Set \u{2115}) : (\u{2211} i in s, f i) = 3 := by\n  simp",
        )
        .unwrap();
        match &t.conclusion {
            Term::Bin { op: BinOp::Eq, lhs, .. } => match lhs.as_ref() {
                Term::Raw(raw) => {
                    assert!(raw.text.contains("\u{2211}"));
                    assert!(raw.idents.iter().any(|i| i == "f"));
                }
                other => panic!("expected raw capture, got {other:?}"),
            },
            other => panic!("expected equality, got {other:?}"),
        }
    }

    #[test]
    fn unbalanced_input_is_malformed_not_raw() {
        let err = parse_theorem("theorem t : (a \u{2227} b := by\n  sorry").unwrap_err();
        assert!(matches!(err, ParseError::SyntaxMalformed { .. }), "{err}");
    }

    #[test]
    fn type_like_antecedent_becomes_a_binder() {
        let t = parse_theorem("theorem t : \u{2115} \u{2192} 0 = 0 := by\n  sorry").unwrap();
        assert_eq!(t.binders.len(), 1);
        assert!(t.hypotheses.is_empty());
        let again = parse_theorem(&crate::print::print_theorem(&t)).unwrap();
        assert_eq!(again, t);

        let named =
            parse_theorem("theorem t2 : (n : \u{2115}) \u{2192} n = n := by\n  sorry").unwrap();
        assert_eq!(named.binders.len(), 1);
        assert_eq!(named.binders[0].name, "n");
        let again = parse_theorem(&crate::print::print_theorem(&named)).unwrap();
        assert_eq!(again, named);
    }

    #[test]
    fn pathological_nesting_terminates() {
        let parens = format!("{}0 = 0{}", "(".repeat(100_000), ")".repeat(100_000));
        assert!(parse_term(&parens).is_ok());
        let negs = format!("{}x = 1", "\u{ac} ".repeat(100_000));
        assert!(parse_term(&negs).is_ok());
        let arrows = format!("0 = 0{}", " \u{2192} 0 = 0".repeat(100_000));
        assert!(parse_term(&arrows).is_ok());

        // Moderate nesting stays fully structural.
        let ok = format!("{}a = 1{}", "(".repeat(50), ")".repeat(50));
        assert_eq!(parse_term(&ok).unwrap(), Term::bin(BinOp::Eq, v("a"), Term::Num(1)));
    }

    #[test]
    fn duplicate_hypothesis_name_is_rejected() {
        let err =
            parse_theorem("theorem t (h : P) (h : Q) : R := by\n  sorry").unwrap_err();
        assert_eq!(
            err,
            ParseError::DuplicateName { name: "h".into() }
        );
    }

    #[test]
    fn use_before_bind_is_rejected() {
        let err = parse_theorem(
            "theorem t (h\u{2082} : Q h\u{2081}) (h\u{2081} : P) : R := by\n  sorry",
        )
        .unwrap_err();
        assert!(matches!(err, ParseError::SyntaxUnsupported { .. }), "{err}");
    }

    #[test]
    fn proof_text_is_dedented_with_relative_indent() {
        let t = parse_theorem(
            "theorem t : True := by\n  have h : True := by\n    trivial\n  exact h",
        )
        .unwrap();
        let proof = t.proof.unwrap();
        assert_eq!(
            proof.text,
            "by\n  have h : True := by\n    trivial\n  exact h"
        );
    }

    #[test]
    fn corpus_parse_skips_non_theorems_with_reasons() {
        let src = "import Mathlib\n\ndef f (n : \u{2115}) : \u{2115} := n + 1\n\ntheorem good : True := by\n  trivial\n\ntheorem 3bad : := by\n";
        let parsed = parse_corpus(src, "demo.lean");
        assert_eq!(parsed.theorems.len(), 1);
        assert_eq!(parsed.theorems[0].name, "good");
        assert_eq!(parsed.skips.len(), 3);
        assert!(parsed.skips[0].reason.contains("import"));
        assert!(parsed.skips[1].reason.contains("def"));
        assert_eq!(parsed.skips[0].file, "demo.lean");
    }

    #[test]
    fn corpus_duplicate_names_keep_first() {
        let src = "theorem t : True := by\n  trivial\n\ntheorem t : False \u{2192} False := by\n  intro h\n  exact h\n";
        let parsed = parse_corpus(src, "dup.lean");
        assert_eq!(parsed.theorems.len(), 1);
        assert_eq!(parsed.skips.len(), 1);
        assert!(parsed.skips[0].reason.contains("duplicate"));
    }

    #[test]
    fn statement_without_proof_parses() {
        let t = parse_theorem("theorem t (n : \u{2115}) : n + 0 = n").unwrap();
        assert!(t.proof.is_none());
    }

    #[test]
    fn arrow_inside_quantifier_conclusion_is_not_an_antecedent() {
        let t = parse_theorem(
            "theorem t : \u{2203} x : X, H\u{2082} x \u{2192} C x := by sorry",
        )
        .unwrap();
        assert!(t.hypotheses.is_empty());
        assert!(matches!(t.conclusion, Term::Quant { .. }));

        // Arrows before the quantifier still split off hypotheses, and a
        // parenthesized quantifier can itself be an antecedent.
        let t = parse_theorem(
            "theorem t (n : \u{2115}) : n > 0 \u{2192} \u{2200} k, k < n \u{2192} k + 1 \u{2264} n := by sorry",
        )
        .unwrap();
        assert_eq!(t.hypotheses.len(), 1);
        assert!(matches!(t.conclusion, Term::Quant { .. }));

        let t = parse_theorem(
            "theorem t (n : \u{2115}) : (\u{2200} k, k < n) \u{2192} n = 0 := by sorry",
        )
        .unwrap();
        assert_eq!(t.hypotheses.len(), 1);
    }

    #[test]
    fn lambda_fragment_becomes_raw() {
        let t = parse_term("(fun i => i + 1)").unwrap();
        match t {
            Term::Raw(raw) => assert_eq!(raw.text, "fun i => i + 1"),
            other => panic!("expected raw, got {other:?}"),
        }
    }

    #[test]
    fn chained_comparison_becomes_opaque_at_capture_boundary() {
        // The structured grammar rejects `1 < 2 < 3`, but a balanced top-level
        // statement falls back to an opaque capture rather than failing.
        let t = parse_theorem("theorem t : 1 < 2 < 3 := by\n  sorry").unwrap();
        assert!(matches!(t.conclusion, Term::Raw(_)));
        match parse_term("1 < 2 < 3").unwrap() {
            Term::Raw(raw) => assert_eq!(raw.text, "1 < 2 < 3"),
            other => panic!("expected raw, got {other:?}"),
        }
        assert!(parse_term("").is_err());
    }
}
