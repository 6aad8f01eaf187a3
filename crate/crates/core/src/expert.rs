//! Expert-iteration orchestration: batched propose/prove/verify rounds,
//! reward computation, weighted dataset emission, and the external
//! fine-tune hook.
//!
//! A run directory is the unit of resumability. `run.json` freezes the
//! config, `split.json` the holdout membership, and each `iter_<k>/` holds
//! the two SFT datasets plus `report.json`, which doubles as the iteration's
//! commit marker: a crash before it lands replays the whole iteration, and
//! the verification checkpoint inside the iteration resumes at problem
//! granularity. Mock clients are re-resolved per iteration so a resumed run
//! reproduces an uninterrupted one byte for byte.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::Digest as _;

use crate::evaluation::{score_matrix, AttemptMatrix, BenchmarkReport, ProblemAttempts};
use crate::generator::{
    propose, prove, resolve_client, GeneratorClient, GeneratorConfig, GeneratorError, Role,
    TranscriptWriter,
};
use crate::reward::{
    build_counterexample_sft, build_proof_sft, compute_reward, proof_length_stats, Candidate,
    ProofLengthStats, RewardConfig,
};
use crate::verify::{run_batch, CheckerBackend, Limits, PoolError, ProofJob};
use crate::verify::wire::shell_split;

pub const DEFAULT_HOLDOUT: usize = 3000;
pub const DEFAULT_ITERATIONS: usize = 56;
pub const DEFAULT_BATCH_SIZE: usize = 10_000;

/// One mutation problem as the loop consumes it: the existential
/// counterexample problem and its dropped-hypothesis companion, as text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopProblem {
    pub id: String,
    pub mutated: String,
    pub dropped: String,
}

#[derive(Debug, thiserror::Error)]
pub enum LoopError {
    #[error("io at {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("holdout {holdout} must be smaller than the dataset ({size} problems)")]
    HoldoutTooLarge { holdout: usize, size: usize },
    #[error(
        "single-pass schedule needs {needed} problems ({iterations} iterations x batch {batch}), training set has {available}"
    )]
    SinglePassExceeded {
        iterations: usize,
        batch: usize,
        needed: usize,
        available: usize,
    },
    #[error("run directory already initialized with a different config or dataset")]
    ConfigMismatch,
    #[error("dataset `{path}`: {detail}")]
    BadDataset { path: String, detail: String },
    #[error("invalid run config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error("fine-tune hook failed at iteration {iteration}: {detail}")]
    HookFailed { iteration: usize, detail: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LoopError + '_ {
    move |source| LoopError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Where the run lives on disk, not part of its identity: manifests
    /// carry the dataset hash instead, so a rerun elsewhere is comparable
    /// byte for byte.
    #[serde(skip)]
    pub dataset: PathBuf,
    #[serde(skip)]
    pub run_dir: PathBuf,
    pub holdout: usize,
    pub iterations: usize,
    pub batch_size: usize,
    pub alpha: f64,
    pub n_propose: usize,
    pub n_prove: usize,
    pub seed: u64,
    pub proposer: GeneratorConfig,
    pub prover: GeneratorConfig,
    /// Invoked as `<cmd> --ce <path> --proof <path> --iter <k>` after each
    /// iteration's datasets land.
    pub fine_tune_hook: Option<String>,
    pub hook_fail_fast: bool,
    /// Every training instance is consumed exactly once; requires
    /// iterations x batch_size to fit in the training split.
    pub single_pass: bool,
    pub parallelism: usize,
    /// Prover prompt preamble (the `{header}` slot).
    pub preamble: String,
    pub timeout_s: f64,
    /// Complete this many iterations, then stop without writing the final
    /// manifest; a later run resumes. None runs to completion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_after: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: PathBuf::new(),
            run_dir: PathBuf::new(),
            holdout: DEFAULT_HOLDOUT,
            iterations: DEFAULT_ITERATIONS,
            batch_size: DEFAULT_BATCH_SIZE,
            alpha: crate::reward::DEFAULT_ALPHA,
            n_propose: 1,
            n_prove: 1,
            seed: 0,
            proposer: GeneratorConfig::new(Role::Proposer, ""),
            prover: GeneratorConfig::new(Role::Prover, ""),
            fine_tune_hook: None,
            hook_fail_fast: false,
            single_pass: true,
            parallelism: 4,
            preamble: String::new(),
            timeout_s: crate::verify::DEFAULT_TIMEOUT_S,
            stop_after: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), LoopError> {
        RewardConfig::new(self.alpha).map_err(|e| LoopError::BadConfig(e.to_string()))?;
        self.proposer
            .validate()
            .map_err(|e| LoopError::BadConfig(e.to_string()))?;
        self.prover
            .validate()
            .map_err(|e| LoopError::BadConfig(e.to_string()))?;
        for (name, v) in [
            ("iterations", self.iterations),
            ("batch_size", self.batch_size),
            ("n_propose", self.n_propose),
            ("n_prove", self.n_prove),
            ("parallelism", self.parallelism),
        ] {
            if v == 0 {
                return Err(LoopError::BadConfig(format!("{name} must be positive")));
            }
        }
        if !(self.timeout_s > 0.0) {
            return Err(LoopError::BadConfig("timeout_s must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    /// Candidates whose boxed answer extracted.
    pub proposed: usize,
    pub v_m: usize,
    pub v_h: usize,
    pub both: usize,
    pub neither: usize,
    /// Per-problem failures isolated this iteration (endpoint or extraction).
    pub errors: usize,
    pub reward_mass: f64,
    pub ce_sft: String,
    pub proof_sft: String,
    pub proof_lengths: ProofLengthStats,
    pub hook: String,
    /// Measured, not persisted: reports must be byte-stable across reruns.
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub dataset_sha256: String,
    pub problems: usize,
    pub train: usize,
    pub validation: usize,
    pub iterations: Vec<IterationReport>,
    pub completed: bool,
}

/// Reads a mutation-record JSONL dataset into loop problems. Records keep
/// their file order; the first record wins an id collision.
pub fn load_problems(path: &Path) -> Result<Vec<LoopProblem>, LoopError> {
    #[derive(Deserialize)]
    struct Record {
        mutated_name: String,
        mutated_lean: String,
        dropped_lean: String,
    }
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut problems: Vec<LoopProblem> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(line).map_err(|e| LoopError::BadDataset {
            path: path.display().to_string(),
            detail: format!("line {}: {e}", lineno + 1),
        })?;
        if seen.insert(rec.mutated_name.clone()) {
            problems.push(LoopProblem {
                id: rec.mutated_name,
                mutated: rec.mutated_lean,
                dropped: rec.dropped_lean,
            });
        }
    }
    if problems.is_empty() {
        return Err(LoopError::BadDataset {
            path: path.display().to_string(),
            detail: "no mutation records".into(),
        });
    }
    Ok(problems)
}

/// Statement text up to and including `:= by`, the form proof jobs carry.
pub fn statement_header(text: &str) -> Result<String, LoopError> {
    match text.find(":= by") {
        Some(idx) => Ok(text[..idx + ":= by".len()].to_string()),
        None => Err(LoopError::BadDataset {
            path: String::new(),
            detail: format!("statement has no `:= by`: {text}"),
        }),
    }
}

/// Deterministic seeded split into (train, validation).
pub fn split_dataset(
    problems: &[LoopProblem],
    holdout: usize,
    seed: u64,
) -> Result<(Vec<LoopProblem>, Vec<LoopProblem>), LoopError> {
    if holdout >= problems.len() {
        return Err(LoopError::HoldoutTooLarge {
            holdout,
            size: problems.len(),
        });
    }
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut order: Vec<usize> = (0..problems.len()).collect();
    order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    let validation = order[..holdout]
        .iter()
        .map(|i| problems[*i].clone())
        .collect();
    let train = order[holdout..]
        .iter()
        .map(|i| problems[*i].clone())
        .collect();
    Ok((train, validation))
}

/// Runs `f` over items on a bounded worker pool, results in input order.
fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let n = items.len();
    if n == 0 {
        return Vec::new();
    }
    let mut slots: Vec<Option<R>> = Vec::with_capacity(n);
    slots.resize_with(n, || None);
    let slots = Mutex::new(slots);
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1).min(n) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = f(i, &items[i]);
                slots.lock().expect("slot lock")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("slot lock")
        .into_iter()
        .map(|s| s.expect("worker filled slot"))
        .collect()
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), LoopError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

fn to_jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        out.extend_from_slice(&serde_json::to_vec(item).expect("serializable record"));
        out.push(b'\n');
    }
    out
}

#[derive(Debug, Clone, Serialize)]
struct ErrorRecord<'a> {
    problem_id: &'a str,
    stage: &'a str,
    detail: String,
}

/// Everything generated for one candidate before rewards are computed.
struct Attempted {
    candidate_id: String,
    problem: String,
    dropped: String,
    witness: String,
    response: String,
    m_proofs: Vec<Option<String>>,
    h_proofs: Vec<Option<String>>,
}

struct GenerationOutput {
    attempted: Vec<Attempted>,
    errors: Vec<(String, &'static str, String)>,
    proposed: usize,
}

/// Propose then prove for every problem in the batch. Per-problem failures
/// are isolated into error records; the batch never aborts on one.
fn generate_batch(
    batch: &[LoopProblem],
    proposer: &dyn GeneratorClient,
    prover: &dyn GeneratorClient,
    cfg: &RunConfig,
    n_propose: usize,
    n_prove: usize,
    prove_dropped: bool,
    transcripts: Option<&TranscriptWriter>,
) -> GenerationOutput {
    struct PerProblem {
        attempted: Vec<Attempted>,
        errors: Vec<(String, &'static str, String)>,
        proposed: usize,
    }

    let per_problem = parallel_map(batch, cfg.parallelism, |_, problem| {
        let mut out = PerProblem {
            attempted: Vec::new(),
            errors: Vec::new(),
            proposed: 0,
        };
        let candidates = match propose(proposer, &problem.id, &problem.mutated, &cfg.proposer, n_propose)
        {
            Ok(c) => c,
            Err(e) => {
                out.errors.push((problem.id.clone(), "propose", e.to_string()));
                return out;
            }
        };
        let m_header = match statement_header(&problem.mutated) {
            Ok(h) => h,
            Err(e) => {
                out.errors.push((problem.id.clone(), "dataset", e.to_string()));
                return out;
            }
        };
        let h_header = match statement_header(&problem.dropped) {
            Ok(h) => h,
            Err(e) => {
                out.errors.push((problem.id.clone(), "dataset", e.to_string()));
                return out;
            }
        };
        for (j, cand) in candidates.iter().enumerate() {
            if let Some(t) = transcripts {
                let _ = t.record(&problem.id, Role::Proposer, &cand.response);
            }
            let Some(witness) = &cand.witness else {
                out.errors.push((
                    problem.id.clone(),
                    "extract",
                    "no boxed answer in proposal".into(),
                ));
                continue;
            };
            out.proposed += 1;
            let candidate_id = if n_propose == 1 {
                problem.id.clone()
            } else {
                format!("{}#p{j}", problem.id)
            };
            let mut attempt = Attempted {
                candidate_id: candidate_id.clone(),
                problem: problem.mutated.clone(),
                dropped: problem.dropped.clone(),
                witness: witness.clone(),
                response: cand.response.clone(),
                m_proofs: Vec::new(),
                h_proofs: Vec::new(),
            };
            let mut prove_into = |header: &str, slot: &mut Vec<Option<String>>| {
                match prove(prover, &problem.id, header, witness, &cfg.preamble, &cfg.prover, n_prove)
                {
                    Ok(proofs) => {
                        for p in proofs {
                            if let Some(t) = transcripts {
                                let _ = t.record(&problem.id, Role::Prover, &p.response);
                            }
                            slot.push(p.proof);
                        }
                        true
                    }
                    Err(e) => {
                        out.errors
                            .push((candidate_id.clone(), "prove", e.to_string()));
                        false
                    }
                }
            };
            let ok = prove_into(&m_header, &mut attempt.m_proofs);
            if ok && prove_dropped {
                prove_into(&h_header, &mut attempt.h_proofs);
            }
            out.attempted.push(attempt);
        }
        out
    });

    let mut merged = GenerationOutput {
        attempted: Vec::new(),
        errors: Vec::new(),
        proposed: 0,
    };
    for p in per_problem {
        merged.attempted.extend(p.attempted);
        merged.errors.extend(p.errors);
        merged.proposed += p.proposed;
    }
    merged
}

fn limits(cfg: &RunConfig) -> Limits {
    Limits {
        timeout_s: cfg.timeout_s,
        ..Default::default()
    }
}

/// Runs one Algorithm 1 iteration over a batch. Datasets land in
/// `iter_<k>/`; the returned report is not yet written (the caller commits
/// it after the fine-tune hook).
pub fn run_iteration(
    cfg: &RunConfig,
    iteration: usize,
    batch: &[LoopProblem],
    backend: &dyn CheckerBackend,
) -> Result<IterationReport, LoopError> {
    assert!(!batch.is_empty(), "iteration batch must be nonempty");
    let start = std::time::Instant::now();
    let iter_dir = cfg.run_dir.join(format!("iter_{iteration}"));
    std::fs::create_dir_all(&iter_dir).map_err(io_err(&iter_dir))?;

    let proposer = resolve_client(&cfg.proposer.endpoint)?;
    let prover = resolve_client(&cfg.prover.endpoint)?;
    let transcripts = TranscriptWriter::create(
        &cfg.run_dir
            .join("transcripts")
            .join(format!("iter_{iteration}.jsonl")),
    )
    .map_err(io_err(&cfg.run_dir.join("transcripts")))?;

    let generated = generate_batch(
        batch,
        proposer.as_ref(),
        prover.as_ref(),
        cfg,
        cfg.n_propose,
        cfg.n_prove,
        true,
        Some(&transcripts),
    );

    let mut jobs = Vec::new();
    for a in &generated.attempted {
        let m_header = statement_header(&a.problem)?;
        let h_header = statement_header(&a.dropped)?;
        for (role, header, proofs) in
            [("M", &m_header, &a.m_proofs), ("H", &h_header, &a.h_proofs)]
        {
            for (i, proof) in proofs.iter().enumerate() {
                if let Some(p) = proof {
                    jobs.push(ProofJob {
                        id: format!("{}::{role}::{i}", a.candidate_id),
                        statement: header.clone(),
                        proof: p.clone(),
                        limits: limits(cfg),
                    });
                }
            }
        }
    }
    let checkpoint = iter_dir.join("verify.jsonl");
    let results = run_batch(&jobs, backend, cfg.parallelism, Some(&checkpoint))?;
    let verified: std::collections::BTreeMap<&str, bool> = jobs
        .iter()
        .zip(&results)
        .map(|(j, r)| (j.id.as_str(), r.is_verified()))
        .collect();

    let reward_cfg = RewardConfig { alpha: cfg.alpha };
    let mut candidates = Vec::new();
    let mut rewards = Vec::new();
    let (mut v_m_count, mut v_h_count, mut both, mut neither) = (0, 0, 0, 0);
    let mut mass = 0.0;
    for a in &generated.attempted {
        let first_verified = |role: &str, proofs: &[Option<String>]| -> Option<String> {
            proofs.iter().enumerate().find_map(|(i, p)| {
                let id = format!("{}::{role}::{i}", a.candidate_id);
                match (p, verified.get(id.as_str())) {
                    (Some(text), Some(true)) => Some(text.clone()),
                    _ => None,
                }
            })
        };
        let proof_m = first_verified("M", &a.m_proofs);
        let proof_h = first_verified("H", &a.h_proofs);
        let (vm, vh) = (proof_m.is_some(), proof_h.is_some());
        v_m_count += usize::from(vm);
        v_h_count += usize::from(vh);
        both += usize::from(vm && vh);
        neither += usize::from(!vm && !vh);
        let record = compute_reward(&a.candidate_id, vm, vh, &reward_cfg);
        mass += record.r;
        candidates.push(Candidate {
            problem_id: a.candidate_id.clone(),
            problem: a.problem.clone(),
            dropped: a.dropped.clone(),
            witness: a.witness.clone(),
            response: a.response.clone(),
            proof_m,
            proof_h,
        });
        rewards.push(record);
    }

    let ce = build_counterexample_sft(&candidates, &rewards, &reward_cfg);
    let proof = build_proof_sft(&candidates, &rewards, &reward_cfg);
    let ce_path = iter_dir.join("ce_sft.jsonl");
    let proof_path = iter_dir.join("proof_sft.jsonl");
    write_atomic(&ce_path, &to_jsonl(&ce))?;
    write_atomic(&proof_path, &to_jsonl(&proof))?;
    let error_records: Vec<ErrorRecord> = generated
        .errors
        .iter()
        .map(|(id, stage, detail)| ErrorRecord {
            problem_id: id,
            stage,
            detail: detail.clone(),
        })
        .collect();
    write_atomic(&iter_dir.join("errors.jsonl"), &to_jsonl(&error_records))?;

    Ok(IterationReport {
        iteration,
        proposed: generated.proposed,
        v_m: v_m_count,
        v_h: v_h_count,
        both,
        neither,
        errors: generated.errors.len(),
        reward_mass: mass,
        ce_sft: format!("iter_{iteration}/ce_sft.jsonl"),
        proof_sft: format!("iter_{iteration}/proof_sft.jsonl"),
        proof_lengths: proof_length_stats(&proof),
        hook: String::new(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn invoke_hook(cmd: &str, run_dir: &Path, report: &IterationReport) -> String {
    let mut argv = shell_split(cmd);
    if argv.is_empty() {
        return "spawn error: empty hook command".into();
    }
    let program = argv.remove(0);
    let status = std::process::Command::new(&program)
        .args(&argv)
        .arg("--ce")
        .arg(run_dir.join(&report.ce_sft))
        .arg("--proof")
        .arg(run_dir.join(&report.proof_sft))
        .arg("--iter")
        .arg(report.iteration.to_string())
        .status();
    match status {
        Ok(s) if s.success() => "ok".into(),
        Ok(s) => format!("exit {}", s.code().unwrap_or(-1)),
        Err(e) => format!("spawn error: {e}"),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitManifest {
    seed: u64,
    holdout: usize,
    train: Vec<String>,
    validation: Vec<String>,
}

fn json_pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable manifest");
    bytes.push(b'\n');
    bytes
}

/// Checks a frozen manifest file: first run writes it, later runs must
/// produce identical bytes or the resume is rejected.
fn freeze_file(path: &Path, bytes: &[u8]) -> Result<(), LoopError> {
    if path.exists() {
        let existing = std::fs::read(path).map_err(io_err(path))?;
        if existing != bytes {
            return Err(LoopError::ConfigMismatch);
        }
        return Ok(());
    }
    write_atomic(path, bytes)
}

/// Runs (or resumes) the full training schedule. Completed iterations are
/// read back from their reports; the final manifest is written only when
/// every iteration has committed.
pub fn run_training(
    cfg: &RunConfig,
    backend: &dyn CheckerBackend,
) -> Result<RunManifest, LoopError> {
    cfg.validate()?;
    let problems = load_problems(&cfg.dataset)?;
    let dataset_bytes = std::fs::read(&cfg.dataset).map_err(io_err(&cfg.dataset))?;
    let dataset_sha256 = format!("{:x}", sha2::Sha256::digest(&dataset_bytes));

    let (train, validation) = split_dataset(&problems, cfg.holdout, cfg.seed)?;
    if cfg.single_pass && cfg.iterations * cfg.batch_size > train.len() {
        return Err(LoopError::SinglePassExceeded {
            iterations: cfg.iterations,
            batch: cfg.batch_size,
            needed: cfg.iterations * cfg.batch_size,
            available: train.len(),
        });
    }

    std::fs::create_dir_all(&cfg.run_dir).map_err(io_err(&cfg.run_dir))?;
    let mut frozen_cfg = cfg.clone();
    // The stop point is operational, not part of the run's identity.
    frozen_cfg.stop_after = None;
    #[derive(Serialize)]
    struct RunHeader<'a> {
        config: &'a RunConfig,
        dataset_sha256: &'a str,
        problems: usize,
    }
    freeze_file(
        &cfg.run_dir.join("run.json"),
        &json_pretty(&RunHeader {
            config: &frozen_cfg,
            dataset_sha256: &dataset_sha256,
            problems: problems.len(),
        }),
    )?;
    freeze_file(
        &cfg.run_dir.join("split.json"),
        &json_pretty(&SplitManifest {
            seed: cfg.seed,
            holdout: cfg.holdout,
            train: train.iter().map(|p| p.id.clone()).collect(),
            validation: validation.iter().map(|p| p.id.clone()).collect(),
        }),
    )?;

    let mut reports: Vec<IterationReport> = Vec::new();
    let mut fresh = 0usize;
    for k in 0..cfg.iterations {
        let report_path = cfg.run_dir.join(format!("iter_{k}")).join("report.json");
        if report_path.exists() {
            let text = std::fs::read_to_string(&report_path).map_err(io_err(&report_path))?;
            let report: IterationReport =
                serde_json::from_str(&text).map_err(|e| LoopError::BadDataset {
                    path: report_path.display().to_string(),
                    detail: e.to_string(),
                })?;
            reports.push(report);
            continue;
        }
        if let Some(stop) = cfg.stop_after {
            if fresh >= stop {
                break;
            }
        }
        let lo = k * cfg.batch_size;
        let hi = (lo + cfg.batch_size).min(train.len());
        let batch = &train[lo..hi];
        let mut report = run_iteration(cfg, k, batch, backend)?;
        report.hook = match &cfg.fine_tune_hook {
            Some(cmd) => {
                let outcome = invoke_hook(cmd, &cfg.run_dir, &report);
                if outcome != "ok" && cfg.hook_fail_fast {
                    return Err(LoopError::HookFailed {
                        iteration: k,
                        detail: outcome,
                    });
                }
                outcome
            }
            None => "skipped: datasets emitted, no hook".into(),
        };
        tracing::info!(
            iteration = k,
            proposed = report.proposed,
            v_m = report.v_m,
            v_h = report.v_h,
            reward_mass = report.reward_mass,
            wall_time_s = report.wall_time_s,
            "iteration committed"
        );
        write_atomic(&report_path, &json_pretty(&report))?;
        reports.push(report);
        fresh += 1;
    }

    let completed = reports.len() == cfg.iterations;
    let manifest = RunManifest {
        config: frozen_cfg,
        dataset_sha256,
        problems: problems.len(),
        train: train.len(),
        validation: validation.len(),
        iterations: reports,
        completed,
    };
    if completed {
        write_atomic(&cfg.run_dir.join("manifest.json"), &json_pretty(&manifest))?;
    }
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub proposer: GeneratorConfig,
    pub prover: GeneratorConfig,
    pub n_propose: usize,
    pub n_prove: usize,
    pub ks: Vec<usize>,
    pub seed: u64,
    pub parallelism: usize,
    pub preamble: String,
    pub timeout_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcripts: Option<PathBuf>,
}

impl EvalConfig {
    pub fn new(proposer: GeneratorConfig, prover: GeneratorConfig) -> Self {
        EvalConfig {
            proposer,
            prover,
            n_propose: 3,
            n_prove: 3,
            ks: crate::evaluation::DEFAULT_KS.to_vec(),
            seed: 0,
            parallelism: 4,
            preamble: String::new(),
            timeout_s: crate::verify::DEFAULT_TIMEOUT_S,
            transcripts: None,
        }
    }
}

/// Benchmark evaluation: n_propose x n_prove attempts per problem, success
/// iff the mutated-problem proof verifies. Extraction failures shrink a
/// problem's attempt count and are recorded as losses.
pub fn evaluate_benchmark(
    cfg: &EvalConfig,
    problems: &[LoopProblem],
    backend: &dyn CheckerBackend,
) -> Result<(AttemptMatrix, BenchmarkReport), LoopError> {
    let proposer = resolve_client(&cfg.proposer.endpoint)?;
    let prover = resolve_client(&cfg.prover.endpoint)?;
    let transcripts = match &cfg.transcripts {
        Some(path) => Some(TranscriptWriter::create(path).map_err(io_err(path))?),
        None => None,
    };

    let run_cfg = RunConfig {
        dataset: PathBuf::new(),
        run_dir: PathBuf::new(),
        holdout: 0,
        iterations: 1,
        batch_size: problems.len().max(1),
        alpha: crate::reward::DEFAULT_ALPHA,
        n_propose: cfg.n_propose,
        n_prove: cfg.n_prove,
        seed: cfg.seed,
        proposer: cfg.proposer.clone(),
        prover: cfg.prover.clone(),
        fine_tune_hook: None,
        hook_fail_fast: false,
        single_pass: false,
        parallelism: cfg.parallelism,
        preamble: cfg.preamble.clone(),
        timeout_s: cfg.timeout_s,
        stop_after: None,
    };
    let generated = generate_batch(
        problems,
        proposer.as_ref(),
        prover.as_ref(),
        &run_cfg,
        cfg.n_propose,
        cfg.n_prove,
        false,
        transcripts.as_ref(),
    );

    let mut jobs = Vec::new();
    for a in &generated.attempted {
        let header = statement_header(&a.problem)?;
        for (i, proof) in a.m_proofs.iter().enumerate() {
            if let Some(p) = proof {
                jobs.push(ProofJob {
                    id: format!("{}::M::{i}", a.candidate_id),
                    statement: header.clone(),
                    proof: p.clone(),
                    limits: Limits {
                        timeout_s: cfg.timeout_s,
                        ..Default::default()
                    },
                });
            }
        }
    }
    let results = run_batch(&jobs, backend, cfg.parallelism, None)?;
    let verified: std::collections::BTreeMap<&str, bool> = jobs
        .iter()
        .zip(&results)
        .map(|(j, r)| (j.id.as_str(), r.is_verified()))
        .collect();

    let mut matrix = AttemptMatrix::default();
    for p in problems {
        let mut outcomes = Vec::new();
        let mut losses: Vec<String> = generated
            .errors
            .iter()
            .filter(|(id, _, _)| id == &p.id || id.starts_with(&format!("{}#", p.id)))
            .map(|(_, stage, detail)| format!("{stage}: {detail}"))
            .collect();
        for a in generated
            .attempted
            .iter()
            .filter(|a| a.candidate_id == p.id || a.candidate_id.starts_with(&format!("{}#", p.id)))
        {
            for (i, proof) in a.m_proofs.iter().enumerate() {
                match proof {
                    Some(_) => {
                        let id = format!("{}::M::{i}", a.candidate_id);
                        outcomes.push(*verified.get(id.as_str()).unwrap_or(&false));
                    }
                    None => losses.push("prove: empty proof extraction".into()),
                }
            }
        }
        matrix.problems.push(ProblemAttempts {
            problem_id: p.id.clone(),
            outcomes,
            losses,
        });
    }
    let report = score_matrix(&matrix, &cfg.ks, cfg.seed);
    Ok((matrix, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problems(n: usize) -> Vec<LoopProblem> {
        (0..n)
            .map(|i| LoopProblem {
                id: format!("p{i}"),
                mutated: format!("theorem p{i} : \u{2203} n : \u{2115}, n = {i} := by sorry"),
                dropped: format!("theorem p{i}_d : \u{2203} n : \u{2115}, n \u{2260} {i} := by sorry"),
            })
            .collect()
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let ps = problems(10);
        let (t1, v1) = split_dataset(&ps, 3, 7).unwrap();
        let (t2, v2) = split_dataset(&ps, 3, 7).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(v1, v2);
        assert_eq!(t1.len(), 7);
        assert_eq!(v1.len(), 3);
        for v in &v1 {
            assert!(!t1.contains(v));
        }
        let (t3, _) = split_dataset(&ps, 3, 8).unwrap();
        assert_ne!(t1, t3, "different seeds change the split");
    }

    #[test]
    fn zero_holdout_gives_empty_validation() {
        let ps = problems(4);
        let (train, validation) = split_dataset(&ps, 0, 0).unwrap();
        assert_eq!(train.len(), 4);
        assert!(validation.is_empty());
    }

    #[test]
    fn oversized_holdout_is_rejected() {
        let ps = problems(5);
        assert!(matches!(
            split_dataset(&ps, 5, 0),
            Err(LoopError::HoldoutTooLarge { .. })
        ));
    }

    #[test]
    fn paper_scale_split_arithmetic() {
        // 575,039 problems with a 3,000 holdout leave 572,039 for training.
        // Checked on the id arithmetic rather than materialized problems.
        let total: usize = 575_039;
        let holdout: usize = 3_000;
        assert_eq!(total - holdout, 572_039);
        let ps = problems(1000);
        let (train, validation) = split_dataset(&ps, 30, 42).unwrap();
        assert_eq!(train.len() + validation.len(), 1000);
    }

    #[test]
    fn statement_header_extraction() {
        assert_eq!(
            statement_header("theorem t : X := by sorry").unwrap(),
            "theorem t : X := by"
        );
        assert!(statement_header("theorem t : X").is_err());
    }

    #[test]
    fn parallel_map_preserves_order() {
        let items: Vec<usize> = (0..100).collect();
        let out = parallel_map(&items, 8, |i, x| {
            std::thread::sleep(std::time::Duration::from_micros((100 - i as u64) * 3));
            x * 2
        });
        assert_eq!(out, items.iter().map(|x| x * 2).collect::<Vec<_>>());
        assert!(parallel_map(&[] as &[usize], 4, |_, x| *x).is_empty());
    }

    #[test]
    fn load_problems_rejects_garbage_and_dedups() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.jsonl");
        std::fs::write(
            &path,
            concat!(
                r#"{"mutated_name":"a","mutated_lean":"theorem a : T := by sorry","dropped_lean":"theorem a_d : U := by sorry"}"#,
                "\n",
                r#"{"mutated_name":"a","mutated_lean":"dup","dropped_lean":"dup"}"#,
                "\n",
            ),
        )
        .unwrap();
        let ps = load_problems(&path).unwrap();
        assert_eq!(ps.len(), 1);
        assert_eq!(ps[0].mutated, "theorem a : T := by sorry");

        std::fs::write(&path, "not json\n").unwrap();
        assert!(matches!(
            load_problems(&path),
            Err(LoopError::BadDataset { .. })
        ));
        std::fs::write(&path, "").unwrap();
        assert!(load_problems(&path).is_err());
    }

    #[test]
    fn config_validation_catches_zeroes_and_bad_alpha() {
        let cfg = RunConfig {
            dataset: PathBuf::from("x"),
            run_dir: PathBuf::from("y"),
            holdout: 0,
            iterations: 1,
            batch_size: 1,
            alpha: 0.8,
            n_propose: 1,
            n_prove: 1,
            seed: 0,
            proposer: GeneratorConfig::new(Role::Proposer, "mock:a"),
            prover: GeneratorConfig::new(Role::Prover, "mock:a"),
            fine_tune_hook: None,
            hook_fail_fast: false,
            single_pass: true,
            parallelism: 1,
            preamble: String::new(),
            timeout_s: 60.0,
            stop_after: None,
        };
        assert!(cfg.validate().is_ok());
        assert!(RunConfig { alpha: 1.5, ..cfg.clone() }.validate().is_err());
        assert!(RunConfig { iterations: 0, ..cfg.clone() }.validate().is_err());
        assert!(RunConfig { timeout_s: 0.0, ..cfg.clone() }.validate().is_err());
        assert!(RunConfig { n_prove: 0, ..cfg }.validate().is_err());
    }
}
