//! Hypothesis-dropping mutation: turns a provable universally quantified
//! theorem into an existential counterexample problem by removing one
//! necessary hypothesis, plus the companion problem asserting the dropped
//! hypothesis fails.
//!
//! From `\u{2200} x, H\u{2081} \u{2192} H\u{2082} \u{2192} C`, dropping `H\u{2081}` yields the mutated problem
//! `\u{2203} x, H\u{2082} \u{229b} C` (where `\u{229b}` is conjunction or implication) and the dropped
//! problem `\u{2203} x, \u{ac} H\u{2081}`. Disequality hypotheses normalize on negation:
//! `\u{ac}(a \u{2260} b)` becomes `a = b`.

use serde::{Deserialize, Serialize};

use crate::print::print_problem;
use crate::statement::{ExistentialProblem, Provenance, SourceTag, TheoremStatement};
use crate::term::{QuantBinder, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CombinationForm {
    /// Remaining hypotheses and conclusion joined with `\u{2227}`.
    #[default]
    Conjunction,
    /// Remaining hypotheses chained into the conclusion with `\u{2192}`.
    Implication,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MutationError {
    #[error("theorem `{name}` has no hypotheses to drop")]
    NoHypotheses { name: String },
    #[error("drop index {index} out of range for {len} hypotheses")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("hypothesis {index} has dependent references at indices {dependents:?}")]
    DependentHypothesis {
        index: usize,
        dependents: Vec<usize>,
    },
    #[error("mutation would leak local names out of scope: {names:?}")]
    ScopeLeak { names: Vec<String> },
}

/// One mutation: the counterexample problem and its dropped-hypothesis
/// companion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutationOutcome {
    pub mutated: ExistentialProblem,
    pub dropped: ExistentialProblem,
    pub drop_index: usize,
    pub form: CombinationForm,
}

/// Serialized line format for mutation output files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationRecord {
    pub seed: String,
    pub drop_index: usize,
    pub form: CombinationForm,
    pub mutated_name: String,
    pub mutated_lean: String,
    pub dropped_name: String,
    pub dropped_lean: String,
    pub provenance: RecordProvenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordProvenance {
    pub source: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pruned: Vec<String>,
}

impl RecordProvenance {
    fn from_statement(p: &Provenance) -> Self {
        let source = match &p.source {
            SourceTag::Library => "library".to_string(),
            SourceTag::Extracted { step } => format!("extracted:{step}"),
            SourceTag::Synthetic => "synthetic".to_string(),
        };
        RecordProvenance {
            source,
            pruned: p.removed_hypotheses.clone(),
        }
    }
}

/// Hypothesis indices that can be dropped without orphaning a reference:
/// no later hypothesis and not the conclusion mentions their name.
pub fn droppable_hypotheses(t: &TheoremStatement) -> Vec<usize> {
    t.hypotheses
        .iter()
        .filter(|h| {
            t.hypothesis_dependents(h.index).is_empty() && !t.conclusion.mentions(&h.name)
        })
        .map(|h| h.index)
        .collect()
}

/// Derives the mutated/dropped theorem names from the seed name.
///
/// Seeds named `{base}[_g{i}]_extracted_{k}` map to `{base}_mut_{k}_drop{j}`
/// and `{base}_{k}_drop{j}`; the extraction generation tag `_g{i}` is
/// stripped. The schema seed `original_version` keeps its canonical pairing
/// `mutated_version`/`dropped_hypothesis`. Everything else gets the plain
/// `{seed}_mut_drop{j}`/`{seed}_drop{j}` suffixes.
pub fn mutation_names(seed: &str, drop_index: usize) -> (String, String) {
    if seed == "original_version" {
        return ("mutated_version".into(), "dropped_hypothesis".into());
    }
    if let Some((prefix, k)) = seed.rsplit_once("_extracted_") {
        if !k.is_empty() && k.chars().all(|c| c.is_ascii_digit()) {
            let base = match prefix.rsplit_once("_g") {
                Some((b, gen)) if !gen.is_empty() && gen.chars().all(|c| c.is_ascii_digit()) => b,
                _ => prefix,
            };
            return (
                format!("{base}_mut_{k}_drop{drop_index}"),
                format!("{base}_{k}_drop{drop_index}"),
            );
        }
    }
    (
        format!("{seed}_mut_drop{drop_index}"),
        format!("{seed}_drop{drop_index}"),
    )
}

fn existential_binders(t: &TheoremStatement) -> Vec<QuantBinder> {
    t.binders
        .iter()
        .map(|b| QuantBinder::typed(&b.name, b.ty.clone()))
        .collect()
}

/// Drops the hypothesis at `drop_index`, producing the mutated existential
/// problem and the dropped-hypothesis problem. Fails when the hypothesis is
/// load-bearing for scope (later references) rather than for truth.
pub fn mutate(
    t: &TheoremStatement,
    drop_index: usize,
    form: CombinationForm,
) -> Result<MutationOutcome, MutationError> {
    if t.hypotheses.is_empty() {
        return Err(MutationError::NoHypotheses {
            name: t.name.clone(),
        });
    }
    if drop_index >= t.hypotheses.len() {
        return Err(MutationError::IndexOutOfRange {
            index: drop_index,
            len: t.hypotheses.len(),
        });
    }
    let dependents = t.hypothesis_dependents(drop_index);
    if !dependents.is_empty() || t.conclusion.mentions(&t.hypotheses[drop_index].name) {
        let mut dependents = dependents;
        if t.conclusion.mentions(&t.hypotheses[drop_index].name) {
            dependents.push(t.hypotheses.len());
        }
        return Err(MutationError::DependentHypothesis {
            index: drop_index,
            dependents,
        });
    }

    let (mutated_name, dropped_name) = mutation_names(&t.name, drop_index);
    let binders = existential_binders(t);

    let mut parts: Vec<Term> = t
        .hypotheses
        .iter()
        .filter(|h| h.index != drop_index)
        .map(|h| h.prop.clone())
        .collect();
    parts.push(t.conclusion.clone());
    let body = match form {
        CombinationForm::Conjunction => Term::fold_right(crate::term::BinOp::And, parts),
        CombinationForm::Implication => Term::fold_right(crate::term::BinOp::Imp, parts),
    };

    let mutated = ExistentialProblem {
        name: mutated_name,
        binders: binders.clone(),
        body,
        provenance: t.provenance.clone(),
    };
    let dropped = ExistentialProblem {
        name: dropped_name,
        binders,
        body: t.hypotheses[drop_index].prop.negated(),
        provenance: t.provenance.clone(),
    };

    let ambient = t.ambient_names();
    let mut leaked = mutated.unbound_vars(&ambient);
    leaked.extend(dropped.unbound_vars(&ambient));
    if !leaked.is_empty() {
        leaked.sort();
        leaked.dedup();
        return Err(MutationError::ScopeLeak { names: leaked });
    }

    Ok(MutationOutcome {
        mutated,
        dropped,
        drop_index,
        form,
    })
}

/// Applies every droppable mutation of `t` in hypothesis order, skipping
/// indices that would orphan references.
pub fn mutate_all(t: &TheoremStatement, form: CombinationForm) -> Vec<MutationOutcome> {
    droppable_hypotheses(t)
        .into_iter()
        .filter_map(|i| mutate(t, i, form).ok())
        .collect()
}

/// Builds the serialized record for one mutation outcome.
pub fn mutation_record(seed: &TheoremStatement, outcome: &MutationOutcome) -> MutationRecord {
    MutationRecord {
        seed: seed.name.clone(),
        drop_index: outcome.drop_index,
        form: outcome.form,
        mutated_name: outcome.mutated.name.clone(),
        mutated_lean: print_problem(&outcome.mutated),
        dropped_name: outcome.dropped.name.clone(),
        dropped_lean: print_problem(&outcome.dropped),
        provenance: RecordProvenance::from_statement(&seed.provenance),
    }
}

/// Judges which hypotheses a proof does not need.
pub trait UsageOracle {
    fn unused_hypotheses(&self, t: &TheoremStatement) -> Result<Vec<usize>, OracleError>;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("usage oracle unavailable: {0}")]
    Unavailable(String),
    #[error("usage oracle backend failed: {0}")]
    Backend(String),
}

/// Conservative lexical oracle: a hypothesis counts as unused only if its
/// name occurs nowhere in the proof script. Without a proof it reports
/// nothing removable.
pub struct StructuralUsage;

impl UsageOracle for StructuralUsage {
    fn unused_hypotheses(&self, t: &TheoremStatement) -> Result<Vec<usize>, OracleError> {
        let Some(proof) = &t.proof else {
            return Ok(Vec::new());
        };
        let mentioned = crate::lex::scan_identifiers(&proof.text);
        Ok(t.hypotheses
            .iter()
            .filter(|h| !mentioned.contains(&h.name))
            .map(|h| h.index)
            .collect())
    }
}

/// Removes hypotheses the oracle reports unused, keeping any with dependent
/// references (the oracle may not see type-level uses). Removed names are
/// recorded in the provenance; indices are reassigned contiguously.
pub fn prune_redundant(
    t: &TheoremStatement,
    oracle: &dyn UsageOracle,
) -> Result<TheoremStatement, OracleError> {
    let unused = oracle.unused_hypotheses(t)?;
    let mut out = t.clone();
    let mut removed = Vec::new();
    for &i in unused.iter().rev() {
        if i >= out.hypotheses.len() {
            continue;
        }
        let name = out.hypotheses[i].name.clone();
        let safe = out.hypothesis_dependents(i).is_empty() && !out.conclusion.mentions(&name);
        if safe {
            out.hypotheses.remove(i);
            removed.push(name);
        }
    }
    removed.reverse();
    for (i, h) in out.hypotheses.iter_mut().enumerate() {
        h.index = i;
    }
    out.provenance.removed_hypotheses.extend(removed);
    Ok(out)
}
