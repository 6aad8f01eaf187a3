//! Seed extraction: splitting tactic proofs into steps and reconstructing
//! standalone theorems from the declarative ones.
//!
//! A `have h : G := ...` or `suffices h : G ...` step at the top level of a
//! proof carries its goal explicitly, so it can be replayed as a new theorem
//! under the seed's signature. Procedural steps (`rw`, `simp`, `linarith`,
//! anonymous `have : ...`) carry no goal; they become theorems only when a
//! recorded proof state supplies the before/after goals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lex::{lex, Sym, Tok, Token};
use crate::parse::{classify_hypothesis, parse_term, parse_corpus, SkipRecord};
use crate::print::signature_key;
use crate::statement::{
    Binder, BinderMode, Hypothesis, ProofScript, Provenance, TheoremStatement,
};
use crate::term::Term;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProofStep {
    /// Named `have`/`suffices` with a parsed goal. `established` lists the
    /// named goals proved by earlier declarative steps, in order.
    Declarative {
        index: usize,
        name: String,
        goal: Term,
        established: Vec<(String, Term)>,
        /// The step's own sub-proof, when it had a `:= by ...` block.
        sub_proof: Option<ProofScript>,
        text: String,
    },
    /// Everything else: goal-free tactics.
    Procedural { index: usize, text: String },
}

impl ProofStep {
    pub fn index(&self) -> usize {
        match self {
            ProofStep::Declarative { index, .. } | ProofStep::Procedural { index, .. } => *index,
        }
    }

    pub fn text(&self) -> &str {
        match self {
            ProofStep::Declarative { text, .. } | ProofStep::Procedural { text, .. } => text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SplitError {
    #[error("proof is not in tactic mode")]
    NotTactic,
}

/// Recorded prover state for one proof step, the external format that lets
/// procedural steps become theorems.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateRecord {
    pub proof_id: String,
    pub step_index: usize,
    pub before_goal: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub after_goal: Option<String>,
    pub context: Vec<ContextEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextEntry {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
}

/// Splits a tactic proof into top-level steps. Lines at the body's base
/// indent start steps, deeper lines continue them, and top-level `;`
/// separators split within a line (`<;>` combinators stay intact).
pub fn split_proof(proof: &ProofScript) -> Result<Vec<ProofStep>, SplitError> {
    if !proof.is_tactic() {
        return Err(SplitError::NotTactic);
    }
    let body = proof.body();
    let mut blocks: Vec<String> = Vec::new();
    for line in body.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let is_continuation = line.starts_with(' ') || line.starts_with('\t');
        match blocks.last_mut() {
            Some(last) if is_continuation => {
                last.push('\n');
                last.push_str(line);
            }
            _ => blocks.push(line.to_string()),
        }
    }

    let mut texts: Vec<String> = Vec::new();
    for block in blocks {
        for piece in split_semicolons(&block) {
            if !piece.trim().is_empty() {
                texts.push(piece);
            }
        }
    }

    let mut steps = Vec::new();
    let mut established: Vec<(String, Term)> = Vec::new();
    for (index, text) in texts.into_iter().enumerate() {
        match classify_step(&text) {
            Some((name, goal, sub_proof)) => {
                steps.push(ProofStep::Declarative {
                    index,
                    name: name.clone(),
                    goal: goal.clone(),
                    established: established.clone(),
                    sub_proof,
                    text,
                });
                established.push((name, goal));
            }
            None => steps.push(ProofStep::Procedural { index, text }),
        }
    }
    Ok(steps)
}

/// Splits on `;` at bracket depth 0, preserving `<;>` sequencing combinators.
fn split_semicolons(block: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0usize;
    let chars: Vec<(usize, char)> = block.char_indices().collect();
    for (pos, &(i, c)) in chars.iter().enumerate() {
        match c {
            '(' | '[' | '{' | '\u{27e8}' => depth += 1,
            ')' | ']' | '}' | '\u{27e9}' => depth -= 1,
            ';' if depth == 0 => {
                let prev = pos.checked_sub(1).map(|p| chars[p].1);
                let next = chars.get(pos + 1).map(|&(_, c)| c);
                if prev == Some('<') && next == Some('>') {
                    continue;
                }
                out.push(block[start..i].trim().to_string());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(block[start..].trim_start().trim_end().to_string());
    out
}

/// Recognizes `have <name> : <goal> := ...` and `suffices <name> : <goal> ...`.
/// Returns the name, parsed goal, and the `have`'s own sub-proof if present.
fn classify_step(text: &str) -> Option<(String, Term, Option<ProofScript>)> {
    let toks = lex(text).ok()?;
    if toks.len() < 4 {
        return None;
    }
    let keyword = match &toks[0].tok {
        Tok::Ident(k) if k == "have" || k == "suffices" => k.clone(),
        _ => return None,
    };
    let name = match &toks[1].tok {
        Tok::Ident(n) => n.clone(),
        _ => return None,
    };
    if !matches!(&toks[2].tok, Tok::Sym(Sym::Colon)) {
        return None;
    }
    let goal_start = 3usize;
    let goal_end = if keyword == "have" {
        top_level_sym(&toks, goal_start, &Sym::ColonEq)?
    } else {
        top_level_marker(&toks, goal_start).unwrap_or(toks.len())
    };
    if goal_end <= goal_start {
        return None;
    }
    let goal_src = slice_tokens(text, &toks, goal_start, goal_end);
    let goal = parse_term(goal_src).ok()?;
    let sub_proof = if keyword == "have" && goal_end + 1 < toks.len() {
        let from = toks[goal_end].span.end;
        let sub = &text[from..];
        if sub.trim().is_empty() {
            None
        } else {
            Some(ProofScript::new(sub))
        }
    } else {
        None
    };
    Some((name, goal, sub_proof))
}

fn top_level_sym(toks: &[Token], from: usize, sym: &Sym) -> Option<usize> {
    let mut depth = 0i32;
    for (i, t) in toks.iter().enumerate().skip(from) {
        if let Tok::Sym(s) = &t.tok {
            match s {
                Sym::LParen | Sym::LBrace | Sym::LBracket | Sym::LAngle => depth += 1,
                Sym::RParen | Sym::RBrace | Sym::RBracket | Sym::RAngle => depth -= 1,
                s if s == sym && depth == 0 => return Some(i),
                _ => {}
            }
        }
    }
    None
}

/// Finds the `by`/`from` continuation keyword of a `suffices` step.
fn top_level_marker(toks: &[Token], from: usize) -> Option<usize> {
    let mut depth = 0i32;
    for (i, t) in toks.iter().enumerate().skip(from) {
        match &t.tok {
            Tok::Sym(s) => match s {
                Sym::LParen | Sym::LBrace | Sym::LBracket | Sym::LAngle => depth += 1,
                Sym::RParen | Sym::RBrace | Sym::RBracket | Sym::RAngle => depth -= 1,
                _ => {}
            },
            Tok::Ident(k) if depth == 0 && (k == "by" || k == "from") => return Some(i),
            _ => {}
        }
    }
    None
}

fn slice_tokens<'a>(src: &'a str, toks: &[Token], lo: usize, hi: usize) -> &'a str {
    &src[toks[lo].span.start..toks[hi - 1].span.end]
}

fn fnv1a64(s: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("step {index} is procedural and no recorded state was supplied")]
    MissingState { index: usize },
    #[error("recorded state for step {index} does not parse: {detail}")]
    BadState { index: usize, detail: String },
}

/// Reconstructs a standalone theorem from one proof step of `seed`.
///
/// Declarative steps keep the seed's signature and add those earlier
/// established facts the goal transitively mentions; the recorded state path
/// rebuilds the signature from the state's context instead. `generation`
/// becomes the `_g{k}_` tag in the derived name.
pub fn step_to_theorem(
    seed: &TheoremStatement,
    step: &ProofStep,
    generation: usize,
    state: Option<&StateRecord>,
) -> Result<TheoremStatement, ExtractError> {
    match step {
        ProofStep::Declarative {
            goal,
            established,
            sub_proof,
            index,
            ..
        } => {
            let mut hypotheses = seed.hypotheses.clone();
            for (name, fact) in needed_facts(goal, established) {
                hypotheses.push(Hypothesis {
                    name,
                    prop: fact,
                    index: hypotheses.len(),
                });
            }
            let mut t = TheoremStatement {
                name: String::new(),
                binders: seed.binders.clone(),
                hypotheses,
                conclusion: goal.clone(),
                proof: sub_proof.clone(),
                provenance: Provenance::extracted(*index),
            };
            t.name = derived_name(seed, &t, generation);
            Ok(t)
        }
        ProofStep::Procedural { index, .. } => {
            let state = state.ok_or(ExtractError::MissingState { index: *index })?;
            let conclusion = parse_term(&state.before_goal).map_err(|e| {
                ExtractError::BadState {
                    index: *index,
                    detail: e.to_string(),
                }
            })?;
            let mut binders = Vec::new();
            let mut hypotheses: Vec<Hypothesis> = Vec::new();
            let mut hyp_names: Vec<String> = Vec::new();
            for entry in &state.context {
                let ty = parse_term(&entry.ty).map_err(|e| ExtractError::BadState {
                    index: *index,
                    detail: format!("context entry `{}`: {e}", entry.name),
                })?;
                let names = vec![entry.name.clone()];
                if classify_hypothesis(&names, &ty, &hyp_names) {
                    hyp_names.push(entry.name.clone());
                    hypotheses.push(Hypothesis {
                        name: entry.name.clone(),
                        prop: ty,
                        index: hypotheses.len(),
                    });
                } else {
                    binders.push(Binder {
                        name: entry.name.clone(),
                        ty,
                        mode: BinderMode::Explicit,
                    });
                }
            }
            if let Some(after) = &state.after_goal {
                if !after.trim().is_empty() && after.trim() != "True" {
                    let after_term =
                        parse_term(after).map_err(|e| ExtractError::BadState {
                            index: *index,
                            detail: format!("after goal: {e}"),
                        })?;
                    hypotheses.push(Hypothesis {
                        name: "h_after".into(),
                        prop: after_term,
                        index: hypotheses.len(),
                    });
                }
            }
            let mut t = TheoremStatement {
                name: String::new(),
                binders,
                hypotheses,
                conclusion,
                proof: None,
                provenance: Provenance::extracted(*index),
            };
            t.name = derived_name(seed, &t, generation);
            Ok(t)
        }
    }
}

/// Earlier established facts the goal needs, transitively: a fact is included
/// when the goal or an already included fact mentions its name.
fn needed_facts(goal: &Term, established: &[(String, Term)]) -> Vec<(String, Term)> {
    let mut needed: Vec<bool> = vec![false; established.len()];
    let mut frontier: Vec<Term> = vec![goal.clone()];
    while let Some(t) = frontier.pop() {
        let fv = t.free_vars();
        for (i, (name, fact)) in established.iter().enumerate() {
            if !needed[i] && fv.contains(name) {
                needed[i] = true;
                frontier.push(fact.clone());
            }
        }
    }
    established
        .iter()
        .zip(needed)
        .filter(|(_, n)| *n)
        .map(|((name, fact), _)| (name.clone(), fact.clone()))
        .collect()
}

fn derived_name(seed: &TheoremStatement, extracted: &TheoremStatement, generation: usize) -> String {
    let id = fnv1a64(&signature_key(extracted)) % 100;
    format!("{}_g{}_extracted_{}", seed.name, generation, id)
}

/// The result of extracting across a corpus: new theorems in deterministic
/// file/theorem/step order, plus skip records for whatever did not parse.
#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub theorems: Vec<TheoremStatement>,
    pub skips: Vec<SkipRecord>,
}

/// Extracts seed theorems from every proof in the given corpus files.
/// Declarative steps always extract; procedural steps extract only when
/// `states` holds a matching `(proof_id, step_index)` record. Duplicate
/// statements (same signature modulo name) keep the first occurrence, so
/// re-running over already extracted output adds nothing.
pub fn extract_corpus(
    files: &[(String, String)],
    states: &[StateRecord],
    generation: usize,
) -> Extraction {
    let state_map: BTreeMap<(String, usize), &StateRecord> = states
        .iter()
        .map(|s| ((s.proof_id.clone(), s.step_index), s))
        .collect();

    let mut out = Extraction::default();
    let mut seen_keys: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    let mut used_names: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();

    for (file, content) in files {
        let parsed = parse_corpus(content, file);
        out.skips.extend(parsed.skips);
        for seed in &parsed.theorems {
            let Some(proof) = &seed.proof else { continue };
            let Ok(steps) = split_proof(proof) else {
                continue;
            };
            for step in &steps {
                let state = state_map.get(&(seed.name.clone(), step.index())).copied();
                let built = match step {
                    ProofStep::Declarative { .. } => step_to_theorem(seed, step, generation, None),
                    ProofStep::Procedural { .. } if state.is_some() => {
                        step_to_theorem(seed, step, generation, state)
                    }
                    ProofStep::Procedural { .. } => continue,
                };
                let Ok(mut t) = built else { continue };
                let key = signature_key(&t);
                if !seen_keys.insert(key) {
                    continue;
                }
                // Distinct statements can collide on the 2-digit id; bump by
                // hundreds until free so names stay unique and deterministic.
                while !used_names.insert(t.name.clone()) {
                    t.name = bump_name(&t.name);
                }
                out.theorems.push(t);
            }
        }
    }
    out
}

fn bump_name(name: &str) -> String {
    match name.rsplit_once('_') {
        Some((head, id)) => match id.parse::<u64>() {
            Ok(n) => format!("{head}_{}", n + 100),
            Err(_) => format!("{name}_0"),
        },
        None => format!("{name}_0"),
    }
}
