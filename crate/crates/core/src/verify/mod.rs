//! Proof verification: job/result types, pluggable checker backends, and a
//! bounded-parallel job pool with checkpoint resume.

pub mod toy;
pub mod wire;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::mpsc;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub const DEFAULT_TIMEOUT_S: f64 = 60.0;
pub const DEFAULT_MEMORY_BYTES: u64 = 8 * 1024 * 1024 * 1024;

/// Resource limits for one verification. Only the timeout crosses the wire
/// protocol; the memory bound applies to backends that manage their own
/// processes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub timeout_s: f64,
    pub memory_bytes: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            timeout_s: DEFAULT_TIMEOUT_S,
            memory_bytes: DEFAULT_MEMORY_BYTES,
        }
    }
}

/// One proof to check. `statement` is the declaration text ending at `:= by`;
/// `proof` is the tactic body without the `by` keyword.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofJob {
    pub id: String,
    pub statement: String,
    pub proof: String,
    #[serde(default)]
    pub limits: Limits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Verified,
    Failed,
    Timeout,
    ResourceExhausted,
    ProtocolError,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    pub fn error(message: &str) -> Self {
        Diagnostic {
            severity: Severity::Error,
            message: message.to_string(),
        }
    }

    pub fn warning(message: &str) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            message: message.to_string(),
        }
    }

    pub fn info(message: &str) -> Self {
        Diagnostic {
            severity: Severity::Info,
            message: message.to_string(),
        }
    }

    /// Infers severity from a conventional `error:`/`warning:` prefix.
    pub fn from_message(message: &str) -> Self {
        let lower = message.trim_start().to_lowercase();
        if lower.starts_with("error") {
            Diagnostic::error(message)
        } else if lower.starts_with("warning") {
            Diagnostic::warning(message)
        } else {
            Diagnostic::info(message)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub id: String,
    pub status: Status,
    pub diagnostics: Vec<Diagnostic>,
    pub elapsed_s: f64,
    pub contains_sorry: bool,
}

impl VerificationResult {
    pub fn is_verified(&self) -> bool {
        self.status == Status::Verified
    }

    /// Enforces the result invariant: a verified result carries no
    /// error-severity diagnostics and no `sorry`. Violations downgrade to
    /// failed with a note, so a misbehaving backend cannot report false
    /// successes.
    pub fn normalized(mut self, proof_text: &str) -> Self {
        let sorry = crate::lex::scan_identifiers(proof_text)
            .iter()
            .any(|t| t == "sorry");
        self.contains_sorry = self.contains_sorry || sorry;
        if self.status == Status::Verified {
            let has_error = self
                .diagnostics
                .iter()
                .any(|d| d.severity == Severity::Error);
            if has_error || self.contains_sorry {
                self.status = Status::Failed;
                self.diagnostics.push(Diagnostic::info(
                    "downgraded: verified status conflicted with error diagnostics or sorry",
                ));
            }
        }
        self
    }
}

/// A proof checker. Implementations never panic outward; failures surface as
/// statuses on the result.
pub trait CheckerBackend: Sync {
    fn check(&self, job: &ProofJob) -> VerificationResult;
}

#[derive(Debug, thiserror::Error)]
pub enum PoolError {
    #[error("duplicate job id `{0}` in batch")]
    DuplicateId(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
}

/// Runs `jobs` against `backend` with at most `parallelism` workers.
///
/// Results come back in input order, one per job. With a checkpoint path,
/// completed results are appended as JSONL and already checkpointed ids are
/// not re-run; a truncated trailing line from a crash is ignored.
pub fn run_batch(
    jobs: &[ProofJob],
    backend: &dyn CheckerBackend,
    parallelism: usize,
    checkpoint: Option<&Path>,
) -> Result<Vec<VerificationResult>, PoolError> {
    let mut seen = std::collections::BTreeSet::new();
    for j in jobs {
        if !seen.insert(&j.id) {
            return Err(PoolError::DuplicateId(j.id.clone()));
        }
    }

    let mut done: BTreeMap<String, VerificationResult> = BTreeMap::new();
    if let Some(path) = checkpoint {
        if path.exists() {
            let text = std::fs::read_to_string(path)?;
            for line in text.lines() {
                if let Ok(r) = serde_json::from_str::<VerificationResult>(line) {
                    done.insert(r.id.clone(), r);
                }
            }
        }
    }

    let pending: Vec<&ProofJob> = jobs.iter().filter(|j| !done.contains_key(&j.id)).collect();
    let mut checkpoint_file = match checkpoint {
        Some(path) => Some(
            std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)?,
        ),
        None => None,
    };

    if !pending.is_empty() {
        let queue: Mutex<std::collections::VecDeque<&ProofJob>> =
            Mutex::new(pending.iter().copied().collect());
        let (tx, rx) = mpsc::channel::<VerificationResult>();
        let workers = parallelism.max(1).min(pending.len());
        std::thread::scope(|scope| -> Result<(), PoolError> {
            for _ in 0..workers {
                let tx = tx.clone();
                let queue = &queue;
                scope.spawn(move || loop {
                    let job = match queue.lock().expect("job queue lock").pop_front() {
                        Some(j) => j,
                        None => break,
                    };
                    let result = catch_unwind(AssertUnwindSafe(|| backend.check(job)))
                        .unwrap_or_else(|_| VerificationResult {
                            id: job.id.clone(),
                            status: Status::ProtocolError,
                            diagnostics: vec![Diagnostic::error("backend panicked")],
                            elapsed_s: 0.0,
                            contains_sorry: false,
                        })
                        .normalized(&job.proof);
                    if tx.send(result).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            for result in rx {
                if let Some(file) = checkpoint_file.as_mut() {
                    let line = serde_json::to_string(&result).expect("result serializes");
                    writeln!(file, "{line}")?;
                    file.flush()?;
                }
                done.insert(result.id.clone(), result);
            }
            Ok(())
        })?;
    }

    Ok(jobs
        .iter()
        .map(|j| {
            done.get(&j.id)
                .cloned()
                .expect("every job answered exactly once")
        })
        .collect())
}
