//! Structured theorem statements: binder lists, named hypotheses, conclusions,
//! and the existential problems produced by mutation.

use std::collections::BTreeSet;

use crate::term::{QuantBinder, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinderMode {
    /// `(x : T)`
    Explicit,
    /// `{x : T}`
    Implicit,
    /// `[inst : T]` or anonymous `[T]`
    Instance,
}

/// A value binder from the theorem signature, e.g. `(x : \u{2115} \u{2192} \u{2124})`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binder {
    pub name: String,
    pub ty: Term,
    pub mode: BinderMode,
}

/// A named hypothesis. `index` is its 0-based position among hypotheses, the
/// position mutation drop indices refer to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypothesis {
    pub name: String,
    pub prop: Term,
    pub index: usize,
}

/// Proof script in normal form. Tactic proofs normalize to `by <tac>` for
/// one-liners and `by\n  <tac>\n  ...` otherwise, with the body's relative
/// indentation preserved; term-mode proofs are stored dedented as-is.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofScript {
    pub text: String,
}

impl ProofScript {
    pub fn new(raw: &str) -> Self {
        let trimmed = raw.trim_start();
        let is_by = trimmed == "by"
            || trimmed.starts_with("by ")
            || trimmed.starts_with("by\t")
            || trimmed.starts_with("by\n")
            || trimmed.starts_with("by\r\n");
        if !is_by {
            return ProofScript { text: dedent(raw) };
        }
        let after = &trimmed[2..];
        let mut lines = after.lines();
        let first = lines.next().unwrap_or("").trim().to_string();
        let rest_block = dedent(&lines.collect::<Vec<_>>().join("\n"));
        let body = match (first.is_empty(), rest_block.is_empty()) {
            (true, true) => String::new(),
            (true, false) => rest_block,
            (false, true) => first,
            (false, false) => format!("{first}\n{rest_block}"),
        };
        ProofScript {
            text: Self::from_body(&body),
        }
    }

    fn from_body(body: &str) -> String {
        if body.is_empty() {
            return "by".to_string();
        }
        if !body.contains('\n') {
            return format!("by {body}");
        }
        let mut out = String::from("by");
        for line in body.lines() {
            out.push('\n');
            if !line.is_empty() {
                out.push_str("  ");
                out.push_str(line);
            }
        }
        out
    }

    /// Builds a script directly from a tactic body (no `by` prefix).
    pub fn from_tactics(body: &str) -> Self {
        ProofScript {
            text: Self::from_body(&dedent(body)),
        }
    }

    pub fn is_tactic(&self) -> bool {
        self.text == "by" || self.text.starts_with("by ") || self.text.starts_with("by\n")
    }

    /// The tactic body with the `by` keyword and normal-form indent removed.
    pub fn body(&self) -> String {
        if !self.is_tactic() {
            return self.text.clone();
        }
        dedent(self.text.strip_prefix("by").unwrap_or(&self.text))
    }

    /// Token-boundary scan for the `sorry` placeholder.
    pub fn contains_sorry(&self) -> bool {
        crate::lex::scan_identifiers(&self.text)
            .iter()
            .any(|t| t == "sorry")
    }
}

/// Removes the common leading-space indent of all nonempty lines and trims
/// trailing whitespace per line. Tabs are treated as single columns.
pub fn dedent(text: &str) -> String {
    let lines: Vec<&str> = text.lines().collect();
    let indent = lines
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    let mut out: Vec<String> = lines
        .iter()
        .map(|l| {
            if l.trim().is_empty() {
                String::new()
            } else {
                l[indent.min(l.len() - l.trim_start().len())..]
                    .trim_end()
                    .to_string()
            }
        })
        .collect();
    while out.last().is_some_and(|l| l.is_empty()) {
        out.pop();
    }
    while out.first().is_some_and(|l| l.is_empty()) {
        out.remove(0);
    }
    out.join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceTag {
    /// Came from a source file as-is.
    Library,
    /// Extracted from a proof; carries the 0-based step index.
    Extracted { step: usize },
    /// Built programmatically (tests, the simulator, fixtures).
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub source: SourceTag,
    /// Names of hypotheses removed by redundancy pruning, in removal order.
    pub removed_hypotheses: Vec<String>,
}

impl Provenance {
    pub fn library() -> Self {
        Provenance {
            source: SourceTag::Library,
            removed_hypotheses: Vec::new(),
        }
    }

    pub fn extracted(step: usize) -> Self {
        Provenance {
            source: SourceTag::Extracted { step },
            removed_hypotheses: Vec::new(),
        }
    }

    pub fn synthetic() -> Self {
        Provenance {
            source: SourceTag::Synthetic,
            removed_hypotheses: Vec::new(),
        }
    }
}

/// A universally quantified theorem in binder-list form:
/// `theorem name (binders...) (hyps...) : conclusion := proof`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TheoremStatement {
    pub name: String,
    pub binders: Vec<Binder>,
    pub hypotheses: Vec<Hypothesis>,
    pub conclusion: Term,
    pub proof: Option<ProofScript>,
    pub provenance: Provenance,
}

impl TheoremStatement {
    /// Names bound by the signature, in binding order: value binders first,
    /// then hypothesis names.
    pub fn bound_names(&self) -> Vec<String> {
        self.binders
            .iter()
            .map(|b| b.name.clone())
            .chain(self.hypotheses.iter().map(|h| h.name.clone()))
            .collect()
    }

    /// Identifiers the statement mentions that are not bound by its own
    /// signature: the ambient constants (library names, predicates).
    pub fn ambient_names(&self) -> BTreeSet<String> {
        let bound: BTreeSet<String> = self.bound_names().into_iter().collect();
        let mut out = BTreeSet::new();
        for h in &self.hypotheses {
            out.extend(h.prop.free_vars());
        }
        out.extend(self.conclusion.free_vars());
        out.retain(|n| !bound.contains(n));
        out
    }

    /// For each hypothesis index, the indices of later hypotheses whose
    /// propositions mention its name. Nonempty means dropping it would orphan
    /// a reference.
    pub fn hypothesis_dependents(&self, index: usize) -> Vec<usize> {
        let Some(h) = self.hypotheses.get(index) else {
            return Vec::new();
        };
        self.hypotheses
            .iter()
            .filter(|other| other.index > index && other.prop.mentions(&h.name))
            .map(|other| other.index)
            .collect()
    }

    /// Checks well-scopedness: every hypothesis proposition and the conclusion
    /// may reference only earlier-bound local names or ambient constants.
    /// Returns the names that violate this (referenced before their binding).
    pub fn scope_violations(&self) -> Vec<String> {
        let all_local: BTreeSet<String> = self.bound_names().into_iter().collect();
        let mut seen: BTreeSet<String> =
            self.binders.iter().map(|b| b.name.clone()).collect();
        let mut bad = BTreeSet::new();
        for h in &self.hypotheses {
            for v in h.prop.free_vars() {
                if all_local.contains(&v) && !seen.contains(&v) {
                    bad.insert(v);
                }
            }
            seen.insert(h.name.clone());
        }
        for v in self.conclusion.free_vars() {
            if all_local.contains(&v) && !seen.contains(&v) {
                bad.insert(v);
            }
        }
        bad.into_iter().collect()
    }

    /// Validates the index invariant: hypothesis `index` fields are contiguous
    /// and match position.
    pub fn indices_consistent(&self) -> bool {
        self.hypotheses.iter().enumerate().all(|(i, h)| h.index == i)
    }
}

/// An existentially quantified problem: `theorem name : \u{2203} binders, body := by sorry`.
/// Produced by mutation; the body references only the existential binders and
/// ambient constants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExistentialProblem {
    pub name: String,
    pub binders: Vec<QuantBinder>,
    pub body: Term,
    pub provenance: Provenance,
}

impl ExistentialProblem {
    /// The full statement as a term: `\u{2203} binders, body`, or the bare body
    /// when the seed theorem had no binders to close over.
    pub fn as_term(&self) -> Term {
        if self.binders.is_empty() {
            self.body.clone()
        } else {
            Term::exists(self.binders.clone(), self.body.clone())
        }
    }

    /// Free variables of the body not captured by the existential binders and
    /// not in `ambient`. Nonempty means a local name leaked out of scope.
    pub fn unbound_vars(&self, ambient: &BTreeSet<String>) -> Vec<String> {
        let bound: BTreeSet<String> =
            self.binders.iter().map(|b| b.name.clone()).collect();
        self.as_term()
            .free_vars()
            .into_iter()
            .filter(|v| !bound.contains(v) && !ambient.contains(v))
            .collect()
    }
}
