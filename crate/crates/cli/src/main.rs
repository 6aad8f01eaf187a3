//! `cexmut`: one binary over the whole pipeline. Subcommands extract seed
//! theorems, mutate them into counterexample problems, run the
//! expert-iteration loop, score benchmarks, run the reward-dynamics
//! simulator, and verify proof jobs.
//!
//! Every subcommand writes a `cli_manifest.json` recording the command,
//! seed, crate version, and sha256 of each input. Timestamps live only
//! there; all other outputs are byte-stable given the same inputs and seed.
//!
//! Exit codes: 0 success, 1 when `--strict` and per-item failures were
//! recorded (or the run aborted mid-flight), 2 for configuration errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand, ValueEnum};
use cexmut::{
    compare_settings, emit_curves, evaluate_benchmark, load_problems, mutate_all, mutation_record,
    parse_corpus, print_theorem, prune_redundant, render_table, run_batch, run_training, simulate,
    CheckerBackend, CheckerUsage, CombinationForm, EvalConfig, GeneratorConfig, LoopError,
    ProofJob, Role, RunConfig, SimConfig, Status, StructuralUsage, SubprocessBackend, TcpBackend,
    ToyBackend, UsageOracle,
};
use serde::Serialize;
use sha2::Digest as _;

/// Configuration mistakes exit 2; everything else that aborts exits 1.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_error<T>(msg: impl Into<String>) -> anyhow::Result<T> {
    Err(ConfigError(msg.into()).into())
}

#[derive(Parser)]
#[command(
    name = "cexmut",
    version,
    about = "Synthesize counterexample problems from Lean theorems and run the multi-reward expert-iteration workflow"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// Seed for every stochastic choice; recorded in each output manifest
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for generation and verification pools
    #[arg(long, global = true, default_value_t = 4)]
    parallelism: usize,
    /// Log filter: off, error, warn, info, debug, trace
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    /// Exit 1 if any per-item failure (skip, loss, protocol error) occurred
    #[arg(long, global = true)]
    strict: bool,
    /// Write errors to stderr as one JSON object per line
    #[arg(long, global = true)]
    json_errors: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Harvest new seed theorems from Lean proof files
    Extract(ExtractArgs),
    /// Mutate seed theorems into existential counterexample problems
    Mutate(MutateArgs),
    /// Run the expert-iteration training loop over a mutated dataset
    Iterate(IterateArgs),
    /// Score a benchmark with proposalsxproofs attempts per problem
    Evaluate(EvaluateArgs),
    /// Reward-dynamics simulator (single run or paired comparison)
    Simulate(SimulateArgs),
    /// Verify a file of proof jobs against a checker backend
    Check(CheckArgs),
}

#[derive(Args)]
struct ExtractArgs {
    /// Lean source files to harvest from
    #[arg(long = "in", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    /// Proof-state JSONL enabling procedural-step extraction
    #[arg(long)]
    states: Option<PathBuf>,
    /// Extraction generation recorded in the `_g<k>_` name tag [default: 1]
    #[arg(long, default_value_t = 1)]
    generation: usize,
    /// Output .lean file; skip records land beside it as .skips.jsonl
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    /// Join remaining hypotheses and conclusion with a conjunction
    Conj,
    /// Chain remaining hypotheses into the conclusion with implications
    Imp,
}

#[derive(Clone, Copy, ValueEnum)]
enum PruneArg {
    /// Keep every hypothesis
    None,
    /// Drop hypotheses whose names never appear in the seed's proof
    Lexical,
    /// Ask the verifier backend for unused-variable diagnostics
    Checker,
}

#[derive(Args)]
struct MutateArgs {
    /// Seed theorem file (.lean)
    #[arg(long = "in")]
    input: PathBuf,
    /// Mutation records as JSONL; a .lean listing is written beside it
    #[arg(long)]
    out: PathBuf,
    /// Override the companion .lean output path
    #[arg(long)]
    lean_out: Option<PathBuf>,
    /// Body form for the mutated problem [default: conj]
    #[arg(long, value_enum, default_value_t = FormArg::Conj)]
    form: FormArg,
    /// Redundant-hypothesis pruning before mutation [default: none]
    #[arg(long, value_enum, default_value_t = PruneArg::None)]
    prune: PruneArg,
}

#[derive(Args)]
struct IterateArgs {
    /// Mutation-record JSONL dataset (output of `mutate`)
    #[arg(long)]
    dataset: PathBuf,
    /// Run directory; resumes if it already holds committed iterations
    #[arg(long)]
    run_dir: PathBuf,
    /// JSON file with a run config; flags below override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mock generator script serving both roles (overrides endpoints)
    #[arg(long)]
    mock: Option<PathBuf>,
    /// Multi-reward weight on the mutated problem [default: 0.8]
    #[arg(long)]
    alpha: Option<f64>,
    /// Training iterations [default: 56]
    #[arg(long)]
    iterations: Option<usize>,
    /// Problems consumed per iteration [default: 10000]
    #[arg(long)]
    batch_size: Option<usize>,
    /// Validation problems held out of training [default: 3000]
    #[arg(long)]
    holdout: Option<usize>,
    /// Counterexample proposals per problem [default: 1]
    #[arg(long)]
    n_propose: Option<usize>,
    /// Proof attempts per proposal and target [default: 1]
    #[arg(long)]
    n_prove: Option<usize>,
    /// Sampling temperature for both roles [default: 0.9]
    #[arg(long)]
    temperature: Option<f64>,
    /// Max completion tokens for both roles [default: 4096]
    #[arg(long)]
    max_tokens: Option<u32>,
    /// Per-proof verification timeout in seconds [default: 60]
    #[arg(long)]
    timeout_s: Option<f64>,
    /// Fine-tune hook run as `<cmd> --ce <p> --proof <p> --iter <k>`
    #[arg(long)]
    hook: Option<String>,
    /// Abort the run when the hook exits nonzero
    #[arg(long)]
    hook_fail_fast: bool,
    /// Complete this many fresh iterations, then stop (resumable)
    #[arg(long)]
    stop_after: Option<usize>,
    /// Allow iterations x batch-size to exceed the training set
    #[arg(long)]
    no_single_pass: bool,
    /// Prover prompt preamble (imports/open lines)
    #[arg(long)]
    preamble: Option<String>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Mutation-record JSONL benchmark
    #[arg(long)]
    dataset: PathBuf,
    /// Output directory for report.json and attempts.jsonl
    #[arg(long)]
    out_dir: PathBuf,
    /// Mock generator script serving both roles (overrides endpoints)
    #[arg(long)]
    mock: Option<PathBuf>,
    /// Counterexample proposals per problem [default: 3]
    #[arg(long, default_value_t = 3)]
    n_propose: usize,
    /// Proof attempts per proposal [default: 3]
    #[arg(long, default_value_t = 3)]
    n_prove: usize,
    /// pass@k values, comma separated [default: 1,4,9]
    #[arg(long, default_value = "1,4,9")]
    ks: String,
    /// Sampling temperature for both roles [default: 0.9]
    #[arg(long)]
    temperature: Option<f64>,
    /// Max completion tokens for both roles [default: 4096]
    #[arg(long)]
    max_tokens: Option<u32>,
    /// Per-proof verification timeout in seconds [default: 60]
    #[arg(long)]
    timeout_s: Option<f64>,
    /// Prover prompt preamble (imports/open lines)
    #[arg(long)]
    preamble: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Two labeled settings `label:alpha`, e.g. `--compare single:1.0 multi:0.8`
    #[arg(long, num_args = 2)]
    compare: Option<Vec<String>>,
    /// Paired runs for `--compare` [default: 20]
    #[arg(long, default_value_t = 20)]
    runs: usize,
    /// Reward weight for a single run [default: 0.8]
    #[arg(long)]
    alpha: Option<f64>,
    /// Training iterations per run [default: 48]
    #[arg(long)]
    iterations: Option<usize>,
    /// Training problems per run [default: 200]
    #[arg(long)]
    problems: Option<usize>,
    /// Learning-rate scale [default: 2]
    #[arg(long)]
    eta: Option<f64>,
    /// Output directory for curves and reports
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    /// VERIFIER_CMD subprocess, else VERIFIER_ADDR socket, else toy
    Auto,
    /// Built-in ground evaluator over linear integer arithmetic
    Toy,
}

#[derive(Args)]
struct CheckArgs {
    /// Proof jobs JSONL: {id, statement, proof, limits?}
    #[arg(long)]
    jobs: PathBuf,
    /// Verification results JSONL
    #[arg(long)]
    out: PathBuf,
    /// Checker backend [default: auto]
    #[arg(long, value_enum, default_value_t = BackendArg::Auto)]
    backend: BackendArg,
    /// Quantifier enumeration bound for the toy backend [default: 100]
    #[arg(long)]
    bound: Option<u64>,
    /// Override every job's timeout in seconds [default: 60]
    #[arg(long)]
    timeout_s: Option<f64>,
    /// Checkpoint file for resumable verification
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Serialize)]
struct CliManifest {
    command: String,
    argv: Vec<String>,
    seed: u64,
    versions: BTreeMap<String, String>,
    /// sha256 per input path.
    inputs: BTreeMap<String, String>,
    /// The only place a timestamp appears in any output.
    timestamp_unix_s: u64,
    config: serde_json::Value,
}

fn write_cli_manifest(
    dir: &Path,
    command: &str,
    seed: u64,
    inputs: &[&Path],
    config: serde_json::Value,
) -> anyhow::Result<()> {
    let mut hashes = BTreeMap::new();
    for path in inputs {
        let bytes =
            std::fs::read(path).with_context(|| format!("hashing input {}", path.display()))?;
        hashes.insert(
            path.display().to_string(),
            format!("{:x}", sha2::Sha256::digest(&bytes)),
        );
    }
    let manifest = CliManifest {
        command: command.to_string(),
        argv: std::env::args().collect(),
        seed,
        versions: BTreeMap::from([(
            "cexmut".to_string(),
            env!("CARGO_PKG_VERSION").to_string(),
        )]),
        inputs: hashes,
        timestamp_unix_s: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        config,
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join("cli_manifest.json");
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn resolve_backend(kind: BackendArg, bound: Option<u64>) -> anyhow::Result<Box<dyn CheckerBackend>> {
    if matches!(kind, BackendArg::Auto) {
        if let Ok(cmd) = std::env::var("VERIFIER_CMD") {
            return match SubprocessBackend::new(&cmd) {
                Ok(b) => Ok(Box::new(b)),
                Err(e) => config_error(format!("VERIFIER_CMD: {e}")),
            };
        }
        if let Ok(addr) = std::env::var("VERIFIER_ADDR") {
            return Ok(Box::new(TcpBackend::new(&addr)));
        }
    }
    let mut toy = ToyBackend::default();
    if let Some(b) = bound {
        toy.bound = b;
    }
    Ok(Box::new(toy))
}

/// Endpoint for one generator role: `--mock` wins, then the role's env var.
fn resolve_endpoint(mock: Option<&Path>, var: &str, existing: &str) -> anyhow::Result<String> {
    if let Some(path) = mock {
        return Ok(format!("mock:{}", path.display()));
    }
    if !existing.is_empty() {
        return Ok(existing.to_string());
    }
    match std::env::var(var) {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => config_error(format!(
            "no generator endpoint: pass --mock or set {var}"
        )),
    }
}

fn read_to_string(path: &Path) -> anyhow::Result<String> {
    match std::fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) => config_error(format!("reading {}: {e}", path.display())),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn jsonl<T: Serialize>(items: &[T]) -> anyhow::Result<Vec<u8>> {
    let mut out = Vec::new();
    for item in items {
        out.extend_from_slice(&serde_json::to_vec(item)?);
        out.push(b'\n');
    }
    Ok(out)
}

/// Outcome of one subcommand: how many per-item failures to weigh
/// under `--strict`.
struct Outcome {
    item_failures: usize,
}

fn run_extract(args: &ExtractArgs, global: &Global) -> anyhow::Result<Outcome> {
    let mut files = Vec::new();
    for path in &args.inputs {
        files.push((path.display().to_string(), read_to_string(path)?));
    }
    let states = match &args.states {
        Some(path) => read_to_string(path)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| anyhow::anyhow!("states: {e}")))
            .collect::<anyhow::Result<Vec<_>>>()?,
        None => Vec::new(),
    };

    let extraction = cexmut::extract_corpus(&files, &states, args.generation);
    let mut lean = String::new();
    for t in &extraction.theorems {
        lean.push_str(&print_theorem(t));
        lean.push_str("\n\n");
    }
    write_file(&args.out, lean.trim_end_matches('\n').as_bytes())?;
    write_file(
        &args.out.with_extension("skips.jsonl"),
        &jsonl(&extraction.skips)?,
    )?;

    let dir = args.out.parent().unwrap_or(Path::new(".")).to_path_buf();
    let inputs: Vec<&Path> = args.inputs.iter().map(|p| p.as_path()).collect();
    write_cli_manifest(
        &dir,
        "extract",
        global.seed,
        &inputs,
        serde_json::json!({"generation": args.generation, "states": args.states}),
    )?;
    println!(
        "extracted {} theorems ({} skipped) -> {}",
        extraction.theorems.len(),
        extraction.skips.len(),
        args.out.display()
    );
    Ok(Outcome {
        item_failures: extraction.skips.len(),
    })
}

fn run_mutate(args: &MutateArgs, global: &Global) -> anyhow::Result<Outcome> {
    let src = read_to_string(&args.input)?;
    let parsed = parse_corpus(&src, &args.input.display().to_string());
    let form = match args.form {
        FormArg::Conj => CombinationForm::Conjunction,
        FormArg::Imp => CombinationForm::Implication,
    };

    let backend;
    let lexical = StructuralUsage;
    let oracle: Option<&dyn UsageOracle> = match args.prune {
        PruneArg::None => None,
        PruneArg::Lexical => Some(&lexical),
        PruneArg::Checker => {
            backend = resolve_backend(BackendArg::Auto, None)?;
            let leaked: &'static dyn CheckerBackend = Box::leak(backend);
            let usage = Box::new(CheckerUsage { backend: leaked });
            Some(Box::leak(usage))
        }
    };

    let mut records = Vec::new();
    let mut prune_misses = 0usize;
    for t in &parsed.theorems {
        let seed = match oracle {
            Some(o) => match prune_redundant(t, o) {
                Ok(pruned) => pruned,
                Err(e) => {
                    tracing::warn!(theorem = %t.name, error = %e, "pruning skipped");
                    prune_misses += 1;
                    t.clone()
                }
            },
            None => t.clone(),
        };
        for outcome in mutate_all(&seed, form) {
            records.push(mutation_record(&seed, &outcome));
        }
    }

    write_file(&args.out, &jsonl(&records)?)?;
    let lean_out = args
        .lean_out
        .clone()
        .unwrap_or_else(|| args.out.with_extension("lean"));
    let mut lean = String::new();
    for r in &records {
        lean.push_str(&r.mutated_lean);
        lean.push_str("\n\n");
        lean.push_str(&r.dropped_lean);
        lean.push_str("\n\n");
    }
    write_file(&lean_out, lean.trim_end_matches('\n').as_bytes())?;
    write_file(&args.out.with_extension("skips.jsonl"), &jsonl(&parsed.skips)?)?;

    let dir = args.out.parent().unwrap_or(Path::new(".")).to_path_buf();
    write_cli_manifest(
        &dir,
        "mutate",
        global.seed,
        &[args.input.as_path()],
        serde_json::json!({
            "form": match form {
                CombinationForm::Conjunction => "conj",
                CombinationForm::Implication => "imp",
            },
            "prune": match args.prune {
                PruneArg::None => "none",
                PruneArg::Lexical => "lexical",
                PruneArg::Checker => "checker",
            },
        }),
    )?;
    println!(
        "mutated {} seeds into {} problems ({} parse skips) -> {}",
        parsed.theorems.len(),
        records.len(),
        parsed.skips.len(),
        args.out.display()
    );
    Ok(Outcome {
        item_failures: parsed.skips.len() + prune_misses,
    })
}

fn build_run_config(args: &IterateArgs, global: &Global) -> anyhow::Result<RunConfig> {
    let mut cfg: RunConfig = match &args.config {
        Some(path) => match serde_json::from_str(&read_to_string(path)?) {
            Ok(c) => c,
            Err(e) => return config_error(format!("config {}: {e}", path.display())),
        },
        None => RunConfig::default(),
    };
    cfg.dataset = args.dataset.clone();
    cfg.run_dir = args.run_dir.clone();
    cfg.seed = global.seed;
    cfg.parallelism = global.parallelism;
    if let Some(v) = args.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = args.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.holdout {
        cfg.holdout = v;
    }
    if let Some(v) = args.n_propose {
        cfg.n_propose = v;
    }
    if let Some(v) = args.n_prove {
        cfg.n_prove = v;
    }
    if let Some(v) = args.timeout_s {
        cfg.timeout_s = v;
    }
    if let Some(v) = &args.hook {
        cfg.fine_tune_hook = Some(v.clone());
    }
    if args.hook_fail_fast {
        cfg.hook_fail_fast = true;
    }
    if args.stop_after.is_some() {
        cfg.stop_after = args.stop_after;
    }
    if args.no_single_pass {
        cfg.single_pass = false;
    }
    if let Some(v) = &args.preamble {
        cfg.preamble = v.clone();
    }
    if let Some(t) = args.temperature {
        cfg.proposer.temperature = t;
        cfg.prover.temperature = t;
    }
    if let Some(m) = args.max_tokens {
        cfg.proposer.max_tokens = m;
        cfg.prover.max_tokens = m;
    }
    cfg.proposer.endpoint =
        resolve_endpoint(args.mock.as_deref(), "PROPOSER_ADDR", &cfg.proposer.endpoint)?;
    cfg.prover.endpoint =
        resolve_endpoint(args.mock.as_deref(), "PROVER_ADDR", &cfg.prover.endpoint)?;
    Ok(cfg)
}

fn loop_error(e: LoopError) -> anyhow::Error {
    match e {
        LoopError::BadConfig(_)
        | LoopError::HoldoutTooLarge { .. }
        | LoopError::SinglePassExceeded { .. }
        | LoopError::ConfigMismatch
        | LoopError::BadDataset { .. } => ConfigError(e.to_string()).into(),
        other => anyhow::anyhow!(other),
    }
}

fn run_iterate(args: &IterateArgs, global: &Global) -> anyhow::Result<Outcome> {
    let cfg = build_run_config(args, global)?;
    let backend = resolve_backend(BackendArg::Auto, None)?;
    let manifest = run_training(&cfg, backend.as_ref()).map_err(loop_error)?;

    write_cli_manifest(
        &cfg.run_dir,
        "iterate",
        global.seed,
        &[cfg.dataset.as_path()],
        serde_json::to_value(&cfg)?,
    )?;
    let errors: usize = manifest.iterations.iter().map(|r| r.errors).sum();
    let mass: f64 = manifest.iterations.iter().map(|r| r.reward_mass).sum();
    println!(
        "{} of {} iterations committed in {} (reward mass {mass:.2}, {errors} item errors)",
        manifest.iterations.len(),
        cfg.iterations,
        cfg.run_dir.display()
    );
    for report in &manifest.iterations {
        println!(
            "  iter {}: proposed {}, v_M {}, v_H {}, both {}, hook {}",
            report.iteration, report.proposed, report.v_m, report.v_h, report.both, report.hook
        );
    }
    Ok(Outcome {
        item_failures: errors,
    })
}

fn run_evaluate(args: &EvaluateArgs, global: &Global) -> anyhow::Result<Outcome> {
    let problems = load_problems(&args.dataset).map_err(loop_error)?;
    let mut ks = Vec::new();
    for part in args.ks.split(',') {
        match part.trim().parse::<usize>() {
            Ok(k) if k > 0 => ks.push(k),
            _ => return config_error(format!("bad k value `{part}` in --ks")),
        }
    }

    let proposer_endpoint = resolve_endpoint(args.mock.as_deref(), "PROPOSER_ADDR", "")?;
    let prover_endpoint = resolve_endpoint(args.mock.as_deref(), "PROVER_ADDR", "")?;
    let mut cfg = EvalConfig::new(
        GeneratorConfig::new(Role::Proposer, &proposer_endpoint),
        GeneratorConfig::new(Role::Prover, &prover_endpoint),
    );
    cfg.n_propose = args.n_propose;
    cfg.n_prove = args.n_prove;
    cfg.ks = ks;
    cfg.seed = global.seed;
    cfg.parallelism = global.parallelism;
    if let Some(t) = args.temperature {
        cfg.proposer.temperature = t;
        cfg.prover.temperature = t;
    }
    if let Some(m) = args.max_tokens {
        cfg.proposer.max_tokens = m;
        cfg.prover.max_tokens = m;
    }
    if let Some(t) = args.timeout_s {
        cfg.timeout_s = t;
    }
    if let Some(p) = &args.preamble {
        cfg.preamble = p.clone();
    }
    cfg.transcripts = Some(args.out_dir.join("transcripts.jsonl"));

    let backend = resolve_backend(BackendArg::Auto, None)?;
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let (matrix, report) = evaluate_benchmark(&cfg, &problems, backend.as_ref()).map_err(loop_error)?;

    let mut report_bytes = serde_json::to_vec_pretty(&report)?;
    report_bytes.push(b'\n');
    write_file(&args.out_dir.join("report.json"), &report_bytes)?;
    write_file(&args.out_dir.join("attempts.jsonl"), &jsonl(&matrix.problems)?)?;
    write_cli_manifest(
        &args.out_dir,
        "evaluate",
        global.seed,
        &[args.dataset.as_path()],
        serde_json::to_value(&cfg)?,
    )?;
    print!("{}", render_table(&report));

    let losses: usize = matrix.problems.iter().map(|p| p.losses.len()).sum();
    Ok(Outcome {
        item_failures: losses,
    })
}

fn parse_compare_setting(s: &str) -> anyhow::Result<(String, f64)> {
    let Some((label, alpha)) = s.rsplit_once(':') else {
        return config_error(format!("--compare wants `label:alpha`, got `{s}`"));
    };
    match alpha.parse::<f64>() {
        Ok(a) if (0.0..=1.0).contains(&a) => Ok((label.to_string(), a)),
        _ => config_error(format!("bad alpha in `{s}`")),
    }
}

fn run_simulate(args: &SimulateArgs, global: &Global) -> anyhow::Result<Outcome> {
    let mut base = SimConfig::default();
    base.seed = global.seed;
    if let Some(v) = args.iterations {
        base.iterations = v;
    }
    if let Some(v) = args.problems {
        base.problems = v;
    }
    if let Some(v) = args.eta {
        base.eta = v;
    }
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    match &args.compare {
        Some(settings) => {
            if args.runs == 0 {
                return config_error("--runs must be positive");
            }
            let (label_a, alpha_a) = parse_compare_setting(&settings[0])?;
            let (label_b, alpha_b) = parse_compare_setting(&settings[1])?;
            let mut cfg_a = base.clone();
            cfg_a.alpha = alpha_a;
            let mut cfg_b = base.clone();
            cfg_b.alpha = alpha_b;
            let comparison = compare_settings(&cfg_a, &cfg_b, args.runs);

            let mut bytes = serde_json::to_vec_pretty(&comparison)?;
            bytes.push(b'\n');
            write_file(&args.out_dir.join("comparison.json"), &bytes)?;
            for (label, curves) in [(&label_a, &comparison.curves_a), (&label_b, &comparison.curves_b)]
            {
                for (r, c) in curves.iter().enumerate() {
                    write_file(
                        &args.out_dir.join(format!("curves_{label}_run{r}.csv")),
                        emit_curves(&c.points).as_bytes(),
                    )?;
                }
            }
            println!(
                "{label_a} (alpha={alpha_a}) vs {label_b} (alpha={alpha_b}) over {} paired runs",
                args.runs
            );
            println!(
                "  win rate {:.2}  final pass@1 {:.4} vs {:.4}  mean t90 {:.1} vs {:.1}",
                comparison.win_rate_a,
                comparison.mean_final_a,
                comparison.mean_final_b,
                comparison.mean_t90_a,
                comparison.mean_t90_b
            );
        }
        None => {
            if let Some(a) = args.alpha {
                base.alpha = a;
            }
            let curves = simulate(&base);
            let mut bytes = serde_json::to_vec_pretty(&curves)?;
            bytes.push(b'\n');
            write_file(&args.out_dir.join("sim.json"), &bytes)?;
            write_file(
                &args.out_dir.join("curves.csv"),
                emit_curves(&curves.points).as_bytes(),
            )?;
            let last = curves.points.last();
            println!(
                "alpha={} final pass@1 {:.4} over {} iterations",
                base.alpha,
                last.map_or(0.0, |p| p.pass1),
                base.iterations
            );
        }
    }
    write_cli_manifest(
        &args.out_dir,
        "simulate",
        global.seed,
        &[],
        serde_json::to_value(&base)?,
    )?;
    Ok(Outcome { item_failures: 0 })
}

fn run_check(args: &CheckArgs, global: &Global) -> anyhow::Result<Outcome> {
    let mut jobs: Vec<ProofJob> = Vec::new();
    for (lineno, line) in read_to_string(&args.jobs)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(job) => jobs.push(job),
            Err(e) => {
                return config_error(format!(
                    "{} line {}: {e}",
                    args.jobs.display(),
                    lineno + 1
                ))
            }
        }
    }
    if let Some(t) = args.timeout_s {
        for job in &mut jobs {
            job.limits.timeout_s = t;
        }
    }

    let backend = resolve_backend(args.backend, args.bound)?;
    let results = run_batch(
        &jobs,
        backend.as_ref(),
        global.parallelism,
        args.checkpoint.as_deref(),
    )?;
    write_file(&args.out, &jsonl(&results)?)?;

    let count = |s: Status| results.iter().filter(|r| r.status == s).count();
    let protocol_errors = count(Status::ProtocolError);
    println!(
        "{} jobs: {} verified, {} failed, {} timeout, {} resource-exhausted, {} protocol-error",
        results.len(),
        count(Status::Verified),
        count(Status::Failed),
        count(Status::Timeout),
        count(Status::ResourceExhausted),
        protocol_errors
    );
    let dir = args.out.parent().unwrap_or(Path::new(".")).to_path_buf();
    write_cli_manifest(
        &dir,
        "check",
        global.seed,
        &[args.jobs.as_path()],
        serde_json::json!({"bound": args.bound, "timeout_s": args.timeout_s}),
    )?;
    Ok(Outcome {
        item_failures: protocol_errors,
    })
}

fn main() {
    let cli = Cli::parse();
    let filter = tracing_subscriber::EnvFilter::try_new(&cli.global.log_level)
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();

    let result = match &cli.command {
        Command::Extract(args) => run_extract(args, &cli.global),
        Command::Mutate(args) => run_mutate(args, &cli.global),
        Command::Iterate(args) => run_iterate(args, &cli.global),
        Command::Evaluate(args) => run_evaluate(args, &cli.global),
        Command::Simulate(args) => run_simulate(args, &cli.global),
        Command::Check(args) => run_check(args, &cli.global),
    };

    let code = match result {
        Ok(outcome) => {
            if cli.global.strict && outcome.item_failures > 0 {
                eprintln!(
                    "strict mode: {} per-item failures recorded",
                    outcome.item_failures
                );
                1
            } else {
                0
            }
        }
        Err(e) => {
            let config = e.is::<ConfigError>();
            if cli.global.json_errors {
                let payload = serde_json::json!({
                    "error": e.to_string(),
                    "kind": if config { "config" } else { "run" },
                });
                eprintln!("{payload}");
            } else {
                eprintln!("cexmut: {e:#}");
            }
            if config {
                2
            } else {
                1
            }
        }
    };
    std::process::exit(code);
}
