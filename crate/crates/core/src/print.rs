//! Canonical pretty-printer for the surface subset.
//!
//! The printer is the inverse of the parser on its image: `parse(print(t))`
//! is structurally equal to `t`, and printing is a fixpoint (printing the
//! reparse of printed text reproduces the bytes). Parenthesization is
//! precedence-minimal except that quantifiers appearing as a left operand are
//! always wrapped, matching how Lean requires them.

use std::fmt::Write;

use crate::statement::{BinderMode, ExistentialProblem, ProofScript, TheoremStatement};
use crate::term::{BinOp, QuantBinder, Term};

fn op_prec(op: BinOp) -> u8 {
    match op {
        BinOp::Imp => 10,
        BinOp::Or => 20,
        BinOp::And => 25,
        BinOp::Eq | BinOp::Ne | BinOp::Le | BinOp::Lt | BinOp::Ge | BinOp::Gt => 40,
        BinOp::Add | BinOp::Sub => 50,
        BinOp::Mul => 55,
    }
}

fn assoc_right(op: BinOp) -> bool {
    matches!(op, BinOp::Imp | BinOp::Or | BinOp::And)
}

fn term_prec(t: &Term) -> u8 {
    match t {
        Term::Ident(_) | Term::Num(_) => 100,
        Term::App { .. } => 90,
        Term::Neg(_) => 60,
        Term::Bin { op, .. } => op_prec(*op),
        Term::Not(_) => 30,
        Term::Quant { .. } => 5,
        Term::Raw(raw) => {
            if raw.text.contains(' ') {
                0
            } else {
                100
            }
        }
    }
}

/// Renders `t` with minimal parentheses.
pub fn print_term(t: &Term) -> String {
    let mut s = String::new();
    write_term(&mut s, t, 0);
    s
}

fn write_term(out: &mut String, t: &Term, min_prec: u8) {
    let needs_parens = term_prec(t) < min_prec;
    if needs_parens {
        out.push('(');
    }
    match t {
        Term::Ident(n) => out.push_str(n),
        Term::Num(n) => {
            let _ = write!(out, "{n}");
        }
        Term::App { head, args } => {
            write_term(out, head, 91);
            for a in args {
                out.push(' ');
                write_arg(out, a);
            }
        }
        Term::Not(inner) => {
            out.push('\u{ac}');
            out.push(' ');
            write_term(out, inner, 30);
        }
        Term::Neg(inner) => {
            out.push('-');
            write_term(out, inner, 61);
        }
        Term::Bin { op, lhs, rhs } => {
            let p = op_prec(*op);
            let (lmin, rmin) = if assoc_right(*op) {
                (p + 1, p)
            } else if op.is_comparison() {
                (p + 1, p + 1)
            } else {
                (p, p + 1)
            };
            write_term(out, lhs, lmin);
            let _ = write!(out, " {} ", op.glyph());
            // A quantifier as the right operand extends to the end of the
            // enclosing group, so it never needs its own parentheses there.
            if matches!(rhs.as_ref(), Term::Quant { .. }) && assoc_right(*op) {
                write_term(out, rhs, 0);
            } else {
                write_term(out, rhs, rmin);
            }
        }
        Term::Quant {
            kind,
            binders,
            body,
        } => {
            out.push_str(kind.glyph());
            out.push(' ');
            write_quant_binders(out, binders);
            out.push_str(", ");
            write_term(out, body, 0);
        }
        Term::Raw(raw) => out.push_str(&raw.text),
    }
    if needs_parens {
        out.push(')');
    }
}

fn write_arg(out: &mut String, a: &Term) {
    match a {
        Term::Ident(n) => out.push_str(n),
        Term::Num(n) => {
            let _ = write!(out, "{n}");
        }
        other => {
            out.push('(');
            write_term(out, other, 0);
            out.push(')');
        }
    }
}

fn atomic_type(t: &Term) -> bool {
    matches!(t, Term::Ident(_) | Term::Num(_))
}

fn write_quant_binders(out: &mut String, binders: &[QuantBinder]) {
    // A single binder with an atomic type prints unparenthesized (`\u{2203} x : X,`);
    // anything structured gets the parenthesized form Lean requires for
    // grouping (`\u{2203} (x : \u{2115} \u{2192} \u{2124}),`).
    let bare_typed = binders.len() == 1
        && binders[0].bound.is_none()
        && binders[0].ty.as_deref().is_some_and(atomic_type);
    for (i, b) in binders.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        match (&b.ty, &b.bound) {
            (None, None) => out.push_str(&b.name),
            (None, Some((op, bound))) => {
                out.push_str(&b.name);
                let _ = write!(out, " {} ", op.glyph());
                write_term(out, bound, 41);
            }
            (Some(ty), None) => {
                if bare_typed {
                    out.push_str(&b.name);
                    out.push_str(" : ");
                    write_term(out, ty, 0);
                } else {
                    out.push('(');
                    out.push_str(&b.name);
                    out.push_str(" : ");
                    write_term(out, ty, 0);
                    out.push(')');
                }
            }
            (Some(_), Some(_)) => {
                unreachable!("binder cannot carry both a type and a relational bound")
            }
        }
    }
}

fn write_signature(out: &mut String, t: &TheoremStatement) {
    out.push_str("theorem ");
    out.push_str(&t.name);
    for b in &t.binders {
        out.push(' ');
        let (open, close) = match b.mode {
            BinderMode::Explicit => ('(', ')'),
            BinderMode::Implicit => ('{', '}'),
            BinderMode::Instance => ('[', ']'),
        };
        out.push(open);
        out.push_str(&b.name);
        out.push_str(" : ");
        write_term(out, &b.ty, 0);
        out.push(close);
    }
    for h in &t.hypotheses {
        out.push(' ');
        out.push('(');
        out.push_str(&h.name);
        out.push_str(" : ");
        write_term(out, &h.prop, 0);
        out.push(')');
    }
    out.push_str(" : ");
    write_term(out, &t.conclusion, 0);
}

fn write_proof(out: &mut String, proof: &ProofScript) {
    out.push_str(" := ");
    out.push_str(&proof.text);
}

/// Renders the signature without the theorem name: the deduplication key for
/// extracted theorems, which differ only in their generated names.
pub(crate) fn signature_key(t: &TheoremStatement) -> String {
    let mut out = String::new();
    write_signature(&mut out, t);
    let prefix_len = "theorem ".len() + t.name.len();
    out[prefix_len..].to_string()
}

/// Renders a theorem signature up to and including `:= by`, the form proof
/// jobs carry as their statement.
pub fn print_statement_header(t: &TheoremStatement) -> String {
    let mut out = String::new();
    write_signature(&mut out, t);
    out.push_str(" := by");
    out
}

/// Renders a full theorem declaration. Statements without a proof end at the
/// conclusion.
pub fn print_theorem(t: &TheoremStatement) -> String {
    let mut out = String::new();
    write_signature(&mut out, t);
    if let Some(p) = &t.proof {
        write_proof(&mut out, p);
    }
    out
}

/// Renders an existential problem with the `by sorry` placeholder proof.
pub fn print_problem(p: &ExistentialProblem) -> String {
    format!("{} sorry", print_problem_header(p))
}

/// Renders an existential problem up to and including `:= by`, the form the
/// prover prompt embeds.
pub fn print_problem_header(p: &ExistentialProblem) -> String {
    let mut out = String::new();
    out.push_str("theorem ");
    out.push_str(&p.name);
    out.push_str(" : ");
    out.push_str(&print_term(&p.as_term()));
    out.push_str(" := by");
    out
}
