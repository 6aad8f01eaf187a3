//! The term AST for the Lean 4 surface subset.
//!
//! Terms cover quantifiers, propositional connectives, comparisons, linear
//! arithmetic, application, and an opaque-raw escape hatch for fragments the
//! structured grammar does not model. Opaque fragments remember which
//! identifiers they mention so scope checks stay sound.

use std::collections::BTreeSet;

use crate::lex::scan_identifiers;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Imp,
    Or,
    And,
    Eq,
    Ne,
    Le,
    Lt,
    Ge,
    Gt,
    Add,
    Sub,
    Mul,
}

impl BinOp {
    pub fn glyph(self) -> &'static str {
        match self {
            BinOp::Imp => "\u{2192}",
            BinOp::Or => "\u{2228}",
            BinOp::And => "\u{2227}",
            BinOp::Eq => "=",
            BinOp::Ne => "\u{2260}",
            BinOp::Le => "\u{2264}",
            BinOp::Lt => "<",
            BinOp::Ge => "\u{2265}",
            BinOp::Gt => ">",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Le | BinOp::Lt | BinOp::Ge | BinOp::Gt
        )
    }

    pub fn is_connective(self) -> bool {
        matches!(self, BinOp::Imp | BinOp::Or | BinOp::And)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuantKind {
    Forall,
    Exists,
}

impl QuantKind {
    pub fn glyph(self) -> &'static str {
        match self {
            QuantKind::Forall => "\u{2200}",
            QuantKind::Exists => "\u{2203}",
        }
    }
}

/// One bound name inside a quantifier. `bound` carries the relational sugar of
/// forms like `\u{2200} n \u{2265} 5, P n`, which desugars to an implication but is kept
/// structured so the printer can reproduce the sugar exactly.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QuantBinder {
    pub name: String,
    pub ty: Option<Box<Term>>,
    pub bound: Option<(BinOp, Box<Term>)>,
}

impl QuantBinder {
    pub fn plain(name: &str) -> Self {
        QuantBinder {
            name: name.to_string(),
            ty: None,
            bound: None,
        }
    }

    pub fn typed(name: &str, ty: Term) -> Self {
        QuantBinder {
            name: name.to_string(),
            ty: Some(Box::new(ty)),
            bound: None,
        }
    }
}

/// Opaque fragment that parsed lexically but not structurally. The identifier
/// list is what a token-boundary scan of the text found; free-variable queries
/// treat all of them as potentially free.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RawTerm {
    /// Original text with whitespace runs collapsed to single spaces.
    pub text: String,
    pub idents: Vec<String>,
}

impl RawTerm {
    pub fn new(text: &str) -> Self {
        let text = text.split_whitespace().collect::<Vec<_>>().join(" ");
        let idents = scan_identifiers(&text);
        RawTerm { text, idents }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Ident(String),
    Num(u64),
    App {
        head: Box<Term>,
        args: Vec<Term>,
    },
    Not(Box<Term>),
    /// Prefix minus; `-267` parses as `Neg(Num(267))`.
    Neg(Box<Term>),
    Bin {
        op: BinOp,
        lhs: Box<Term>,
        rhs: Box<Term>,
    },
    Quant {
        kind: QuantKind,
        binders: Vec<QuantBinder>,
        body: Box<Term>,
    },
    Raw(RawTerm),
}

impl Term {
    pub fn ident(name: &str) -> Term {
        Term::Ident(name.to_string())
    }

    pub fn app(head: Term, args: Vec<Term>) -> Term {
        Term::App {
            head: Box::new(head),
            args,
        }
    }

    pub fn bin(op: BinOp, lhs: Term, rhs: Term) -> Term {
        Term::Bin {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn not(t: Term) -> Term {
        Term::Not(Box::new(t))
    }

    pub fn exists(binders: Vec<QuantBinder>, body: Term) -> Term {
        Term::Quant {
            kind: QuantKind::Exists,
            binders,
            body: Box::new(body),
        }
    }

    pub fn forall(binders: Vec<QuantBinder>, body: Term) -> Term {
        Term::Quant {
            kind: QuantKind::Forall,
            binders,
            body: Box::new(body),
        }
    }

    /// Right-folds `terms` with `op`, matching Lean's right associativity for
    /// the connectives. Panics on an empty slice.
    pub fn fold_right(op: BinOp, terms: Vec<Term>) -> Term {
        let mut it = terms.into_iter().rev();
        let mut acc = it.next().expect("fold_right needs at least one term");
        for t in it {
            acc = Term::bin(op, t, acc);
        }
        acc
    }

    /// Free identifiers of the term. Binder type annotations live in a separate
    /// namespace (sorts like `\u{2115}` are not term variables), so they do not
    /// contribute; relational bounds and bodies do.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.free_vars_into(&mut BTreeSet::new(), &mut out);
        out
    }

    fn free_vars_into(&self, bound: &mut BTreeSet<String>, out: &mut BTreeSet<String>) {
        match self {
            Term::Ident(name) => {
                if !bound.contains(name) {
                    out.insert(name.clone());
                }
            }
            Term::Num(_) => {}
            Term::App { head, args } => {
                head.free_vars_into(bound, out);
                for a in args {
                    a.free_vars_into(bound, out);
                }
            }
            Term::Not(t) | Term::Neg(t) => t.free_vars_into(bound, out),
            Term::Bin { lhs, rhs, .. } => {
                lhs.free_vars_into(bound, out);
                rhs.free_vars_into(bound, out);
            }
            Term::Quant { binders, body, .. } => {
                let mut added = Vec::new();
                for b in binders {
                    if let Some((_, t)) = &b.bound {
                        t.free_vars_into(bound, out);
                    }
                    if bound.insert(b.name.clone()) {
                        added.push(b.name.clone());
                    }
                }
                body.free_vars_into(bound, out);
                for name in added {
                    bound.remove(&name);
                }
            }
            Term::Raw(raw) => {
                for id in &raw.idents {
                    if !bound.contains(id) {
                        out.insert(id.clone());
                    }
                }
            }
        }
    }

    /// True when `name` occurs free in the term.
    pub fn mentions(&self, name: &str) -> bool {
        self.free_vars().contains(name)
    }

    /// Capture-aware substitution of a closed term for a free identifier.
    /// `replacement` must be closed (a literal or constant); this is all the
    /// ground evaluator needs, and it sidesteps alpha-renaming entirely.
    pub fn substitute(&self, name: &str, replacement: &Term) -> Term {
        match self {
            Term::Ident(n) if n == name => replacement.clone(),
            Term::Ident(_) | Term::Num(_) => self.clone(),
            Term::App { head, args } => Term::App {
                head: Box::new(head.substitute(name, replacement)),
                args: args.iter().map(|a| a.substitute(name, replacement)).collect(),
            },
            Term::Not(t) => Term::Not(Box::new(t.substitute(name, replacement))),
            Term::Neg(t) => Term::Neg(Box::new(t.substitute(name, replacement))),
            Term::Bin { op, lhs, rhs } => Term::Bin {
                op: *op,
                lhs: Box::new(lhs.substitute(name, replacement)),
                rhs: Box::new(rhs.substitute(name, replacement)),
            },
            Term::Quant {
                kind,
                binders,
                body,
            } => {
                let shadowed = binders.iter().any(|b| b.name == name);
                let binders = binders
                    .iter()
                    .map(|b| QuantBinder {
                        name: b.name.clone(),
                        ty: b.ty.clone(),
                        bound: b.bound.as_ref().map(|(op, t)| {
                            (*op, Box::new(t.substitute(name, replacement)))
                        }),
                    })
                    .collect();
                Term::Quant {
                    kind: *kind,
                    binders,
                    body: if shadowed {
                        body.clone()
                    } else {
                        Box::new(body.substitute(name, replacement))
                    },
                }
            }
            Term::Raw(_) => self.clone(),
        }
    }

    /// Negation with the relational double-negation cleanup: `\u{ac}(a \u{2260} b)`
    /// becomes `a = b` and `\u{ac}(a = b)` becomes `a \u{2260} b`; everything else gets a
    /// plain negation node.
    pub fn negated(&self) -> Term {
        match self {
            Term::Bin {
                op: BinOp::Ne,
                lhs,
                rhs,
            } => Term::Bin {
                op: BinOp::Eq,
                lhs: lhs.clone(),
                rhs: rhs.clone(),
            },
            Term::Bin {
                op: BinOp::Eq,
                lhs,
                rhs,
            } => Term::Bin {
                op: BinOp::Ne,
                lhs: lhs.clone(),
                rhs: rhs.clone(),
            },
            other => Term::not(other.clone()),
        }
    }

    /// True for terms that read as propositions rather than data: quantifiers,
    /// connectives, comparisons, negation, and the literal `True`/`False`.
    pub fn is_prop_shaped(&self) -> bool {
        match self {
            Term::Quant { .. } | Term::Not(_) => true,
            Term::Bin { op, .. } => op.is_connective() || op.is_comparison(),
            Term::Ident(n) => n == "True" || n == "False",
            Term::Raw(raw) => raw
                .idents
                .iter()
                .any(|i| i == "True" || i == "False")
                || raw.text.contains(['\u{2200}', '\u{2203}', '\u{ac}', '\u{2227}', '\u{2228}'])
                || raw.text.contains(['=', '\u{2260}', '\u{2264}', '\u{2265}', '<', '>']),
            _ => false,
        }
    }
}
