//! pass@k computation, solved-count tables, and curve emission.
//!
//! pass@k uses the unbiased estimator 1 - C(n-c, k)/C(n, k) over n attempts
//! with c successes, computed in exact rational arithmetic. Because the paper
//! trail for "solved" counts could mean either the estimator mean or a
//! literal any-of-k draw, reports carry both: the estimator mean and a
//! solved count over a seeded random k-subset of each problem's attempts.

use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_KS: [usize; 3] = [1, 4, 9];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("k = {k} exceeds attempt count n = {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("k must be at least 1")]
    KZero,
    #[error("successes c = {c} exceed attempts n = {n}")]
    CTooLarge { c: usize, n: usize },
    #[error("binomial overflow at n = {0}; supported up to n = 62")]
    Overflow(usize),
}

/// C(n, k) in u128; exact for n up to 62.
fn binomial(n: usize, k: usize) -> Result<u128, EvalError> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc
            .checked_mul((n - i) as u128)
            .ok_or(EvalError::Overflow(n))?;
        // Divides exactly: acc holds C(n, i+1) * (i+1)! / (i+1)! stepwise.
        acc /= (i + 1) as u128;
    }
    Ok(acc)
}

/// Unbiased pass@k as an exact rational: 1 - C(n-c, k)/C(n, k).
pub fn pass_at_k_exact(n: usize, c: usize, k: usize) -> Result<Ratio<u128>, EvalError> {
    if k == 0 {
        return Err(EvalError::KZero);
    }
    if k > n {
        return Err(EvalError::KTooLarge { k, n });
    }
    if c > n {
        return Err(EvalError::CTooLarge { c, n });
    }
    let miss = binomial(n - c, k)?;
    let total = binomial(n, k)?;
    Ok(Ratio::one() - Ratio::new(miss, total))
}

pub fn pass_at_k(n: usize, c: usize, k: usize) -> Result<f64, EvalError> {
    Ok(pass_at_k_exact(n, c, k)?
        .to_f64()
        .expect("ratio fits in f64"))
}

/// Attempts for one problem; an attempt succeeds iff its proof of the
/// mutated problem verified.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemAttempts {
    pub problem_id: String,
    pub outcomes: Vec<bool>,
    /// Attempts lost before verification (for example the proposal carried no
    /// extractable answer), which reduce n rather than count as failures.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub losses: Vec<String>,
}

impl ProblemAttempts {
    pub fn n(&self) -> usize {
        self.outcomes.len()
    }

    pub fn c(&self) -> usize {
        self.outcomes.iter().filter(|o| **o).count()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptMatrix {
    pub problems: Vec<ProblemAttempts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KReport {
    pub k: usize,
    /// Mean unbiased estimator over problems with n \u{2265} k.
    pub mean_pass: f64,
    /// Problems with at least one success in a seeded k-subset of attempts.
    pub solved: usize,
    /// Problems that had enough attempts to score at this k.
    pub scored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub problems: usize,
    pub seed: u64,
    pub per_k: Vec<KReport>,
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Scores a matrix at each k: estimator means plus seeded-subset solved
/// counts. Problems with fewer than k attempts are skipped at that k and
/// reflected in `scored`.
pub fn score_matrix(matrix: &AttemptMatrix, ks: &[usize], seed: u64) -> BenchmarkReport {
    let mut per_k = Vec::new();
    for &k in ks {
        let mut sum = Ratio::<u128>::zero();
        let mut scored = 0usize;
        let mut solved = 0usize;
        for p in &matrix.problems {
            let (n, c) = (p.n(), p.c());
            if k > n {
                continue;
            }
            scored += 1;
            sum += pass_at_k_exact(n, c, k).expect("validated above");
            // Stable per-problem stream: reordering problems in the matrix
            // does not change any problem's drawn subset.
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(p.problem_id.as_bytes()) ^ (k as u64));
            let picked = rand::seq::index::sample(&mut rng, n, k);
            if picked.iter().any(|i| p.outcomes[i]) {
                solved += 1;
            }
        }
        let mean_pass = if scored == 0 {
            0.0
        } else {
            (sum / Ratio::from_integer(scored as u128))
                .to_f64()
                .expect("mean fits in f64")
        };
        per_k.push(KReport {
            k,
            mean_pass,
            solved,
            scored,
        });
    }
    BenchmarkReport {
        problems: matrix.problems.len(),
        seed,
        per_k,
    }
}

/// Renders the report as an aligned text table.
pub fn render_table(report: &BenchmarkReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>6}  {:>10}  {:>8}  {:>8}\n",
        "k", "mean pass", "solved", "scored"
    ));
    for row in &report.per_k {
        out.push_str(&format!(
            "{:>6}  {:>10.4}  {:>8}  {:>8}\n",
            row.k, row.mean_pass, row.solved, row.scored
        ));
    }
    out.push_str(&format!("problems: {}\n", report.problems));
    out
}

/// One evaluation point on the training curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub pass1: f64,
    pub pass4: f64,
    pub pass9: f64,
}

/// CSV with schema `iteration,pass1,pass4,pass9`, one row per point.
pub fn emit_curves(points: &[CurvePoint]) -> String {
    let mut out = String::from("iteration,pass1,pass4,pass9\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.iteration, p.pass1, p.pass4, p.pass9
        ));
    }
    out
}
