//! Ground checker for a decidable fragment: linear integer arithmetic over
//! \u{2124} and \u{2115} with \u{2227} \u{2228} \u{ac} \u{2192} and bounded quantifier enumeration.
//!
//! Three-valued by construction: a universally quantified subterm whose range
//! is truncated at the bound can be refuted by a found counterexample but
//! never confirmed, so it evaluates to Unknown and the check fails with a
//! "bound exceeded" diagnostic. The checker rejects anything outside the
//! fragment; it never claims success it cannot decide.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::lex::{is_identifier, scan_identifiers};
use crate::parse::parse_theorem;
use crate::statement::ExistentialProblem;
use crate::term::{BinOp, QuantBinder, QuantKind, Term};
use crate::verify::{
    CheckerBackend, Diagnostic, ProofJob, Status, VerificationResult,
};

pub const DEFAULT_BOUND: u64 = 100;

/// Instance-evaluation budget across all quantifiers in one check; nested
/// enumeration stops with Unknown once exhausted.
const EVAL_BUDGET: u64 = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sort {
    Nat,
    Int,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tri {
    True,
    False,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ToyError {
    #[error("outside fragment: {0}")]
    OutsideFragment(String),
    #[error("arithmetic overflow")]
    Overflow,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WitnessError {
    #[error("empty witness")]
    Empty,
    #[error("unparseable witness item `{0}`")]
    BadItem(String),
    #[error("witness mixes named and positional assignments")]
    Mixed,
    #[error("witness names unknown binder `{0}`")]
    UnknownName(String),
    #[error("witness missing a value for binder `{0}`")]
    Missing(String),
    #[error("witness has {got} values for {want} binders")]
    Arity { got: usize, want: usize },
}

/// A candidate assignment of integers to existential binders, either
/// positional or named.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundWitness {
    items: Vec<(Option<String>, i64)>,
}

impl GroundWitness {
    pub fn positional(values: &[i64]) -> Self {
        GroundWitness {
            items: values.iter().map(|v| (None, *v)).collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Parses witness text: `2`, `2, 3`, `x = 2, y = 3`, `n := 4`, optionally
    /// wrapped in `( )`, `\u{27e8} \u{27e9}`, or `{ }`.
    pub fn parse(text: &str) -> Result<Self, WitnessError> {
        let mut s = text.trim();
        loop {
            let stripped = strip_wrap(s, '(', ')')
                .or_else(|| strip_wrap(s, '\u{27e8}', '\u{27e9}'))
                .or_else(|| strip_wrap(s, '{', '}'));
            match stripped {
                Some(inner) => s = inner.trim(),
                None => break,
            }
        }
        if s.is_empty() {
            return Err(WitnessError::Empty);
        }
        let mut items = Vec::new();
        for raw in split_top_commas(s) {
            let raw = raw.trim();
            if raw.is_empty() {
                return Err(WitnessError::BadItem(raw.to_string()));
            }
            if let Some((name, value)) = raw.split_once(":=").or_else(|| raw.split_once('=')) {
                let name = name.trim();
                let value = value.trim();
                if !is_identifier(name) {
                    return Err(WitnessError::BadItem(raw.to_string()));
                }
                let v: i64 = value
                    .parse()
                    .map_err(|_| WitnessError::BadItem(raw.to_string()))?;
                items.push((Some(name.to_string()), v));
            } else {
                let v: i64 = raw
                    .parse()
                    .map_err(|_| WitnessError::BadItem(raw.to_string()))?;
                items.push((None, v));
            }
        }
        let named = items.iter().filter(|(n, _)| n.is_some()).count();
        if named != 0 && named != items.len() {
            return Err(WitnessError::Mixed);
        }
        Ok(GroundWitness { items })
    }

    /// Resolves the witness against the problem's binders into an evaluation
    /// environment, by name or by position.
    pub fn resolve(&self, binders: &[QuantBinder]) -> Result<BTreeMap<String, i64>, WitnessError> {
        if self.items.iter().any(|(n, _)| n.is_some()) {
            let names: Vec<&str> = binders.iter().map(|b| b.name.as_str()).collect();
            let mut env = BTreeMap::new();
            for (name, v) in &self.items {
                let name = name.as_deref().expect("all named");
                if !names.contains(&name) {
                    return Err(WitnessError::UnknownName(name.to_string()));
                }
                env.insert(name.to_string(), *v);
            }
            for b in binders {
                if !env.contains_key(&b.name) {
                    return Err(WitnessError::Missing(b.name.clone()));
                }
            }
            Ok(env)
        } else {
            if self.items.len() != binders.len() {
                return Err(WitnessError::Arity {
                    got: self.items.len(),
                    want: binders.len(),
                });
            }
            Ok(binders
                .iter()
                .zip(&self.items)
                .map(|(b, (_, v))| (b.name.clone(), *v))
                .collect())
        }
    }
}

fn strip_wrap(s: &str, open: char, close: char) -> Option<&str> {
    let s = s.trim();
    if s.starts_with(open) && s.ends_with(close) && s.len() > open.len_utf8() {
        let inner = &s[open.len_utf8()..s.len() - close.len_utf8()];
        // Only strip when the pair actually wraps the whole text.
        let mut depth = 0i32;
        for (i, c) in inner.char_indices() {
            if c == open {
                depth += 1;
            } else if c == close {
                depth -= 1;
                if depth < 0 && i < inner.len() - close.len_utf8() {
                    return None;
                }
            }
        }
        Some(inner)
    } else {
        None
    }
}

fn split_top_commas(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0usize;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '[' | '{' | '\u{27e8}' => depth += 1,
            ')' | ']' | '}' | '\u{27e9}' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out
}

/// Sort of the problem's binders: all-\u{2115}, all-\u{2124} (untyped defaults to \u{2124}),
/// anything else is outside the fragment.
pub fn binder_sort(binders: &[QuantBinder]) -> Result<Sort, ToyError> {
    let mut sorts = Vec::new();
    for b in binders {
        let s = match b.ty.as_deref() {
            None => Sort::Int,
            Some(Term::Ident(n)) if n == "\u{2115}" || n == "Nat" => Sort::Nat,
            Some(Term::Ident(n)) if n == "\u{2124}" || n == "Int" => Sort::Int,
            Some(other) => {
                return Err(ToyError::OutsideFragment(format!(
                    "binder `{}` has non-scalar type `{}`",
                    b.name,
                    crate::print::print_term(other)
                )))
            }
        };
        sorts.push(s);
    }
    match (sorts.contains(&Sort::Nat), sorts.contains(&Sort::Int)) {
        (true, true) => Err(ToyError::OutsideFragment(
            "mixed \u{2115}/\u{2124} binders".into(),
        )),
        (true, false) => Ok(Sort::Nat),
        _ => Ok(Sort::Int),
    }
}

enum Val {
    Int(i128),
    Bool(Tri),
}

struct Evaluator {
    sort: Sort,
    bound: u64,
    budget: u64,
}

impl Evaluator {
    fn consume(&mut self) -> bool {
        if self.budget == 0 {
            return false;
        }
        self.budget -= 1;
        true
    }

    fn eval(&mut self, t: &Term, env: &BTreeMap<String, i128>) -> Result<Val, ToyError> {
        match t {
            Term::Ident(n) if n == "True" => Ok(Val::Bool(Tri::True)),
            Term::Ident(n) if n == "False" => Ok(Val::Bool(Tri::False)),
            Term::Ident(n) => env
                .get(n)
                .map(|v| Val::Int(*v))
                .ok_or_else(|| ToyError::OutsideFragment(format!("unknown identifier `{n}`"))),
            Term::Num(n) => Ok(Val::Int(i128::from(*n))),
            Term::Neg(inner) => match self.eval(inner, env)? {
                Val::Int(v) => {
                    if self.sort == Sort::Nat {
                        return Err(ToyError::OutsideFragment(
                            "negation of a natural number".into(),
                        ));
                    }
                    v.checked_neg().map(Val::Int).ok_or(ToyError::Overflow)
                }
                Val::Bool(_) => Err(ToyError::OutsideFragment(
                    "arithmetic negation of a proposition".into(),
                )),
            },
            Term::Not(inner) => match self.eval(inner, env)? {
                Val::Bool(b) => Ok(Val::Bool(match b {
                    Tri::True => Tri::False,
                    Tri::False => Tri::True,
                    Tri::Unknown => Tri::Unknown,
                })),
                Val::Int(_) => Err(ToyError::OutsideFragment(
                    "logical negation of a number".into(),
                )),
            },
            Term::App { .. } => Err(ToyError::OutsideFragment(
                "function application".into(),
            )),
            Term::Raw(raw) => Err(ToyError::OutsideFragment(format!(
                "opaque fragment `{}`",
                raw.text
            ))),
            Term::Bin { op, lhs, rhs } => self.eval_bin(*op, lhs, rhs, env),
            Term::Quant {
                kind,
                binders,
                body,
            } => self.eval_quant(*kind, binders, body, env),
        }
    }

    fn eval_bin(
        &mut self,
        op: BinOp,
        lhs: &Term,
        rhs: &Term,
        env: &BTreeMap<String, i128>,
    ) -> Result<Val, ToyError> {
        if op.is_connective() {
            let l = self.eval_bool(lhs, env)?;
            // Short-circuit keeps budget use down but stays three-valued
            // correct: the undetermined side still decides Unknown cases.
            let v = match (op, l) {
                (BinOp::And, Tri::False) => Tri::False,
                (BinOp::Or, Tri::True) => Tri::True,
                (BinOp::Imp, Tri::False) => Tri::True,
                (_, l) => {
                    let r = self.eval_bool(rhs, env)?;
                    match (op, l, r) {
                        (BinOp::And, Tri::True, r) => r,
                        (BinOp::And, Tri::Unknown, Tri::False) => Tri::False,
                        (BinOp::And, Tri::Unknown, _) => Tri::Unknown,
                        (BinOp::Or, Tri::False, r) => r,
                        (BinOp::Or, Tri::Unknown, Tri::True) => Tri::True,
                        (BinOp::Or, Tri::Unknown, _) => Tri::Unknown,
                        (BinOp::Imp, Tri::True, r) => r,
                        (BinOp::Imp, Tri::Unknown, Tri::True) => Tri::True,
                        (BinOp::Imp, Tri::Unknown, _) => Tri::Unknown,
                        _ => unreachable!("connective cases covered"),
                    }
                }
            };
            return Ok(Val::Bool(v));
        }
        let l = self.eval_int(lhs, env)?;
        let r = self.eval_int(rhs, env)?;
        if op.is_comparison() {
            let b = match op {
                BinOp::Eq => l == r,
                BinOp::Ne => l != r,
                BinOp::Le => l <= r,
                BinOp::Lt => l < r,
                BinOp::Ge => l >= r,
                BinOp::Gt => l > r,
                _ => unreachable!(),
            };
            return Ok(Val::Bool(if b { Tri::True } else { Tri::False }));
        }
        let v = match op {
            BinOp::Add => l.checked_add(r),
            BinOp::Sub => {
                if self.sort == Sort::Nat {
                    // Truncated subtraction, as in Lean's \u{2115}.
                    Some(l.checked_sub(r).unwrap_or(0).max(0))
                } else {
                    l.checked_sub(r)
                }
            }
            BinOp::Mul => l.checked_mul(r),
            _ => unreachable!("arithmetic cases covered"),
        };
        v.map(Val::Int).ok_or(ToyError::Overflow)
    }

    fn eval_bool(&mut self, t: &Term, env: &BTreeMap<String, i128>) -> Result<Tri, ToyError> {
        match self.eval(t, env)? {
            Val::Bool(b) => Ok(b),
            Val::Int(_) => Err(ToyError::OutsideFragment(
                "number where a proposition was expected".into(),
            )),
        }
    }

    fn eval_int(&mut self, t: &Term, env: &BTreeMap<String, i128>) -> Result<i128, ToyError> {
        match self.eval(t, env)? {
            Val::Int(v) => Ok(v),
            Val::Bool(_) => Err(ToyError::OutsideFragment(
                "proposition where a number was expected".into(),
            )),
        }
    }

    fn eval_quant(
        &mut self,
        kind: QuantKind,
        binders: &[QuantBinder],
        body: &Term,
        env: &BTreeMap<String, i128>,
    ) -> Result<Val, ToyError> {
        let Some((first, rest)) = binders.split_first() else {
            return self.eval(body, env);
        };
        let inner = |this: &mut Self, env: &BTreeMap<String, i128>| -> Result<Tri, ToyError> {
            if rest.is_empty() {
                this.eval_bool(body, env)
            } else {
                match this.eval_quant(kind, rest, body, env)? {
                    Val::Bool(b) => Ok(b),
                    Val::Int(_) => Err(ToyError::OutsideFragment(
                        "quantifier over a numeric body".into(),
                    )),
                }
            }
        };

        if let Some(ty) = first.ty.as_deref() {
            let sort_ok = matches!(
                ty,
                Term::Ident(n) if n == "\u{2115}" || n == "Nat" || n == "\u{2124}" || n == "Int"
            );
            if !sort_ok {
                return Err(ToyError::OutsideFragment(format!(
                    "quantifier binder `{}` has non-scalar type",
                    first.name
                )));
            }
        }
        let var_sort = match first.ty.as_deref() {
            Some(Term::Ident(n)) if n == "\u{2115}" || n == "Nat" => Sort::Nat,
            Some(Term::Ident(n)) if n == "\u{2124}" || n == "Int" => Sort::Int,
            _ => self.sort,
        };

        let b = i128::from(self.bound as i64);
        let (mut lo, mut hi, mut truncated) = match var_sort {
            Sort::Nat => (0i128, b, true),
            Sort::Int => (-b, b, true),
        };
        if let Some((op, bound_expr)) = &first.bound {
            let v = self.eval_int(bound_expr, env)?;
            match op {
                BinOp::Ge => lo = lo.max(v),
                BinOp::Gt => lo = lo.max(v.checked_add(1).ok_or(ToyError::Overflow)?),
                BinOp::Le => {
                    if v <= hi {
                        hi = v;
                        // A one-sided upper bound closes the range for \u{2115}.
                        truncated = var_sort != Sort::Nat;
                    }
                }
                BinOp::Lt => {
                    let v1 = v.checked_sub(1).ok_or(ToyError::Overflow)?;
                    if v1 <= hi {
                        hi = v1;
                        truncated = var_sort != Sort::Nat;
                    }
                }
                _ => {
                    return Err(ToyError::OutsideFragment(
                        "unsupported binder bound".into(),
                    ))
                }
            }
        }

        if lo > hi {
            // Every enumerable instance holds vacuously and the unenumerated
            // tail is what truncation tracks; an empty *true* domain only
            // happens for closed finite ranges.
            return Ok(Val::Bool(match kind {
                QuantKind::Forall => {
                    if truncated {
                        Tri::Unknown
                    } else {
                        Tri::True
                    }
                }
                QuantKind::Exists => {
                    if truncated {
                        Tri::Unknown
                    } else {
                        Tri::False
                    }
                }
            }));
        }

        if !body.mentions(&first.name)
            && !rest.iter().any(|r| {
                r.bound
                    .as_ref()
                    .is_some_and(|(_, e)| e.mentions(&first.name))
            })
        {
            // Variable unused: truth is independent of the range.
            let mut env2 = env.clone();
            env2.insert(first.name.clone(), lo);
            return Ok(Val::Bool(inner(self, &env2)?));
        }

        let mut saw_unknown = false;
        let mut v = lo;
        loop {
            if v > hi {
                break;
            }
            if !self.consume() {
                return Ok(Val::Bool(Tri::Unknown));
            }
            let mut env2 = env.clone();
            env2.insert(first.name.clone(), v);
            match inner(self, &env2)? {
                Tri::True => {
                    if kind == QuantKind::Exists {
                        return Ok(Val::Bool(Tri::True));
                    }
                }
                Tri::False => {
                    if kind == QuantKind::Forall {
                        return Ok(Val::Bool(Tri::False));
                    }
                }
                Tri::Unknown => saw_unknown = true,
            }
            v += 1;
        }
        Ok(Val::Bool(if truncated || saw_unknown {
            Tri::Unknown
        } else {
            match kind {
                QuantKind::Forall => Tri::True,
                QuantKind::Exists => Tri::False,
            }
        }))
    }
}

/// Outcome of a ground check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ToyVerdict {
    Verified,
    Refuted,
    /// Could not be confirmed within the bound.
    BoundExceeded,
    /// Input left the decidable fragment; reason attached.
    Fragment(String),
}

/// Checks a witness against an existential problem by substituting values and
/// evaluating the ground body up to `bound`.
pub fn toy_check(problem: &ExistentialProblem, witness: &GroundWitness, bound: u64) -> ToyVerdict {
    let sort = match binder_sort(&problem.binders) {
        Ok(s) => s,
        Err(e) => return ToyVerdict::Fragment(e.to_string()),
    };
    let env = match witness.resolve(&problem.binders) {
        Ok(env) => env,
        Err(e) => return ToyVerdict::Fragment(e.to_string()),
    };
    if sort == Sort::Nat && env.values().any(|v| *v < 0) {
        // A negative value is not a \u{2115} inhabitant, so it cannot witness.
        return ToyVerdict::Refuted;
    }
    let mut body = problem.body.clone();
    for (name, v) in &env {
        body = body.substitute(name, &int_literal(*v));
    }
    let mut ev = Evaluator {
        sort,
        bound,
        budget: EVAL_BUDGET,
    };
    match ev.eval(&body, &BTreeMap::new()) {
        Ok(Val::Bool(Tri::True)) => ToyVerdict::Verified,
        Ok(Val::Bool(Tri::False)) => ToyVerdict::Refuted,
        Ok(Val::Bool(Tri::Unknown)) => ToyVerdict::BoundExceeded,
        Ok(Val::Int(_)) => ToyVerdict::Fragment("statement evaluates to a number".into()),
        Err(e) => ToyVerdict::Fragment(e.to_string()),
    }
}

fn int_literal(v: i64) -> Term {
    if v < 0 {
        Term::Neg(Box::new(Term::Num(v.unsigned_abs())))
    } else {
        Term::Num(v as u64)
    }
}

/// Extracts a positional witness from a tactic proof: the first `use a, b`
/// line or the leading integer components of `exact \u{27e8}...\u{27e9}` /
/// `refine \u{27e8}...\u{27e9}`.
pub fn witness_from_proof(proof: &str, arity: usize) -> Option<GroundWitness> {
    if arity == 0 {
        return Some(GroundWitness::positional(&[]));
    }
    for line in proof.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("use ") {
            let vals = leading_ints(rest, arity)?;
            return Some(GroundWitness::positional(&vals));
        }
        for prefix in ["exact ", "refine "] {
            if let Some(rest) = line.strip_prefix(prefix) {
                let rest = rest.trim();
                if let Some(inner) = rest
                    .strip_prefix('\u{27e8}')
                    .and_then(|r| r.rfind('\u{27e9}').map(|i| &r[..i]))
                {
                    if let Some(vals) = leading_ints(inner, arity) {
                        return Some(GroundWitness::positional(&vals));
                    }
                }
            }
        }
    }
    None
}

/// Takes the first `arity` comma-separated items if they all parse as ints.
fn leading_ints(s: &str, arity: usize) -> Option<Vec<i64>> {
    let mut out = Vec::new();
    for item in split_top_commas(s) {
        if out.len() == arity {
            break;
        }
        let item = item.trim();
        match item.parse::<i64>() {
            Ok(v) => out.push(v),
            Err(_) => break,
        }
    }
    if out.len() == arity {
        Some(out)
    } else {
        None
    }
}

/// Existential reading of a parsed theorem statement: a top-level `\u{2203}`
/// conclusion contributes binders; anything else is a closed body.
pub fn existential_view(conclusion: &Term) -> (Vec<QuantBinder>, Term) {
    match conclusion {
        Term::Quant {
            kind: QuantKind::Exists,
            binders,
            body,
        } => (binders.clone(), body.as_ref().clone()),
        other => (Vec::new(), other.clone()),
    }
}

/// Offline checker backend over the toy fragment. Statements must parse in
/// the surface subset; proofs supply witnesses through `use`/`exact \u{27e8}\u{2026}\u{27e9}`.
pub struct ToyBackend {
    pub bound: u64,
}

impl Default for ToyBackend {
    fn default() -> Self {
        ToyBackend {
            bound: DEFAULT_BOUND,
        }
    }
}

impl ToyBackend {
    fn check_inner(&self, job: &ProofJob) -> (Status, Vec<Diagnostic>) {
        let sorry = scan_identifiers(&job.proof).iter().any(|t| t == "sorry");
        if sorry {
            return (
                Status::Failed,
                vec![Diagnostic::error("proof contains sorry")],
            );
        }
        let stmt = match parse_theorem(&job.statement) {
            Ok(s) => s,
            Err(e) => {
                return (
                    Status::Failed,
                    vec![Diagnostic::error(&format!("statement does not parse: {e}"))],
                )
            }
        };
        let (binders, body) = existential_view(&stmt.conclusion);
        let problem = ExistentialProblem {
            name: stmt.name.clone(),
            binders,
            body,
            provenance: stmt.provenance.clone(),
        };
        let witness = match witness_from_proof(&job.proof, problem.binders.len()) {
            Some(w) => w,
            None => {
                return (
                    Status::Failed,
                    vec![Diagnostic::error(
                        "no ground witness found in proof (expected `use ...` or `exact \u{27e8}...\u{27e9}`)",
                    )],
                )
            }
        };
        let mut diags = unused_hypothesis_warnings(&stmt, &job.proof);
        match toy_check(&problem, &witness, self.bound) {
            ToyVerdict::Verified => (Status::Verified, diags),
            ToyVerdict::Refuted => {
                diags.push(Diagnostic::error("witness refuted by ground evaluation"));
                (Status::Failed, diags)
            }
            ToyVerdict::BoundExceeded => {
                diags.push(Diagnostic::error("bound exceeded"));
                (Status::Failed, diags)
            }
            ToyVerdict::Fragment(reason) => {
                diags.push(Diagnostic::error(&reason));
                (Status::Failed, diags)
            }
        }
    }
}

/// Lexical stand-in for the unused-variable linter real checkers run: warns
/// about hypotheses whose names never appear in the proof.
fn unused_hypothesis_warnings(
    stmt: &crate::statement::TheoremStatement,
    proof: &str,
) -> Vec<Diagnostic> {
    let mentioned = scan_identifiers(proof);
    stmt.hypotheses
        .iter()
        .filter(|h| !mentioned.contains(&h.name))
        .map(|h| Diagnostic::warning(&format!("unused variable `{}`", h.name)))
        .collect()
}

impl CheckerBackend for ToyBackend {
    fn check(&self, job: &ProofJob) -> VerificationResult {
        let start = Instant::now();
        let (status, diagnostics) = self.check_inner(job);
        VerificationResult {
            id: job.id.clone(),
            status,
            diagnostics,
            elapsed_s: start.elapsed().as_secs_f64(),
            contains_sorry: false,
        }
        .normalized(&job.proof)
    }
}
