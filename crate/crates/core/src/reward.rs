//! Multi-reward computation and weighted SFT dataset assembly.
//!
//! A candidate counterexample earns r = r_M + r_H, where r_M = \u{3b1} when its
//! proof of the mutated problem verifies and r_H = 1 - \u{3b1} when its proof of
//! the dropped-hypothesis theorem verifies. Setting \u{3b1} = 1 recovers
//! single-reward training; \u{3b1} below 1 keeps a dense signal flowing from the
//! easier dropped-hypothesis proof.

use serde::{Deserialize, Serialize};

pub const DEFAULT_ALPHA: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub alpha: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            alpha: DEFAULT_ALPHA,
        }
    }
}

impl RewardConfig {
    pub fn new(alpha: f64) -> Result<Self, RewardError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(RewardError::BadAlpha(alpha));
        }
        Ok(RewardConfig { alpha })
    }

    pub fn single_reward() -> Self {
        RewardConfig { alpha: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RewardError {
    #[error("alpha must lie in [0, 1], got {0}")]
    BadAlpha(f64),
}

/// Verification outcomes and the weights they induce for one candidate.
/// Invariant: r_m = \u{3b1}[v_m], r_h = (1-\u{3b1})[v_h], r = r_m + r_h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub problem_id: String,
    pub v_m: bool,
    pub v_h: bool,
    pub r_m: f64,
    pub r_h: f64,
    pub r: f64,
}

pub fn compute_reward(problem_id: &str, v_m: bool, v_h: bool, cfg: &RewardConfig) -> RewardRecord {
    let r_m = if v_m { cfg.alpha } else { 0.0 };
    let r_h = if v_h { 1.0 - cfg.alpha } else { 0.0 };
    RewardRecord {
        problem_id: problem_id.to_string(),
        v_m,
        v_h,
        r_m,
        r_h,
        r: r_m + r_h,
    }
}

/// One candidate's worth of generation artifacts, ready for weighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub problem_id: String,
    /// Mutated problem text \u{2133}.
    pub problem: String,
    /// Dropped-hypothesis theorem text \u{210b}.
    pub dropped: String,
    /// Extracted witness x.
    pub witness: String,
    /// Full proposer completion, reasoning included.
    pub response: String,
    pub proof_m: Option<String>,
    pub proof_h: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExampleKind {
    #[serde(rename = "counterexample-SFT")]
    CounterexampleSft,
    #[serde(rename = "proof-SFT")]
    ProofSft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProofRole {
    Mutated,
    DroppedHypothesis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleProvenance {
    pub problem_id: String,
    /// Which theorem the completion proves; absent for counterexample examples.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub role: Option<ProofRole>,
    /// Target statement for dropped-hypothesis proofs, whose prompt payload
    /// still carries the mutated problem.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target: Option<String>,
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub zero_weight: bool,
}

/// One SFT record. Weight never exceeds 1; proof examples exist only for
/// verified proofs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedExample {
    pub kind: ExampleKind,
    pub problem: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<String>,
    pub completion: String,
    pub weight: f64,
    pub alpha: f64,
    pub provenance: ExampleProvenance,
}

/// The counterexample-generation dataset: one example per candidate,
/// weighted by its total reward. Zero-weight examples stay in, flagged, so
/// downstream trainers choose their own filtering.
pub fn build_counterexample_sft(
    candidates: &[Candidate],
    rewards: &[RewardRecord],
    cfg: &RewardConfig,
) -> Vec<WeightedExample> {
    assert_eq!(candidates.len(), rewards.len(), "one reward per candidate");
    candidates
        .iter()
        .zip(rewards)
        .map(|(c, rec)| {
            assert_eq!(c.problem_id, rec.problem_id, "candidate/reward pairing");
            WeightedExample {
                kind: ExampleKind::CounterexampleSft,
                problem: c.problem.clone(),
                witness: None,
                completion: c.response.clone(),
                weight: rec.r,
                alpha: cfg.alpha,
                provenance: ExampleProvenance {
                    problem_id: c.problem_id.clone(),
                    role: None,
                    target: None,
                    zero_weight: rec.r == 0.0,
                },
            }
        })
        .collect()
}

/// The proof-generation dataset: verified mutated-problem proofs at weight
/// \u{3b1}, verified dropped-hypothesis proofs at weight 1 - \u{3b1}, everything
/// else excluded. Both carry the (problem, witness) prompt payload.
pub fn build_proof_sft(
    candidates: &[Candidate],
    rewards: &[RewardRecord],
    cfg: &RewardConfig,
) -> Vec<WeightedExample> {
    assert_eq!(candidates.len(), rewards.len(), "one reward per candidate");
    let mut out = Vec::new();
    for (c, rec) in candidates.iter().zip(rewards) {
        assert_eq!(c.problem_id, rec.problem_id, "candidate/reward pairing");
        if rec.v_m {
            let proof = c
                .proof_m
                .as_ref()
                .expect("verified mutated-problem proof has text");
            out.push(WeightedExample {
                kind: ExampleKind::ProofSft,
                problem: c.problem.clone(),
                witness: Some(c.witness.clone()),
                completion: proof.clone(),
                weight: rec.r_m,
                alpha: cfg.alpha,
                provenance: ExampleProvenance {
                    problem_id: c.problem_id.clone(),
                    role: Some(ProofRole::Mutated),
                    target: None,
                    zero_weight: false,
                },
            });
        }
        if rec.v_h {
            let proof = c
                .proof_h
                .as_ref()
                .expect("verified dropped-hypothesis proof has text");
            out.push(WeightedExample {
                kind: ExampleKind::ProofSft,
                problem: c.problem.clone(),
                witness: Some(c.witness.clone()),
                completion: proof.clone(),
                weight: rec.r_h,
                alpha: cfg.alpha,
                provenance: ExampleProvenance {
                    problem_id: c.problem_id.clone(),
                    role: Some(ProofRole::DroppedHypothesis),
                    target: Some(c.dropped.clone()),
                    zero_weight: false,
                },
            });
        }
    }
    out
}

/// Summary statistics over verified proof lengths, emitted so an external
/// trainer can regulate length without this crate doing any optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofLengthStats {
    pub count: usize,
    pub mean_chars: f64,
    pub max_chars: usize,
}

pub fn proof_length_stats(examples: &[WeightedExample]) -> ProofLengthStats {
    let lens: Vec<usize> = examples
        .iter()
        .filter(|e| e.kind == ExampleKind::ProofSft)
        .map(|e| e.completion.chars().count())
        .collect();
    let count = lens.len();
    let mean_chars = if count == 0 {
        0.0
    } else {
        lens.iter().sum::<usize>() as f64 / count as f64
    };
    ProofLengthStats {
        count,
        mean_chars,
        max_chars: lens.into_iter().max().unwrap_or(0),
    }
}
