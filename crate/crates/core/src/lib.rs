//! Synthesis of counterexample problems from provable Lean 4 theorems.
//!
//! The pipeline: parse theorems in a supported surface subset, mutate them by
//! dropping necessary hypotheses into existential counterexample problems,
//! hand those problems to pluggable generator endpoints for candidate
//! witnesses and proofs, verify the proofs through a wire protocol or a
//! built-in toy checker, and score the results with a multi-reward scheme
//! that feeds weighted fine-tuning datasets and pass@k evaluation.

pub mod evaluation;
pub mod expert;
pub mod extract;
pub mod generator;
pub mod lex;
pub mod mutate;
pub mod parse;
pub mod print;
pub mod reward;
pub mod sim;
pub mod statement;
pub mod term;
pub mod verify;

pub use evaluation::{
    emit_curves, pass_at_k, pass_at_k_exact, render_table, score_matrix, AttemptMatrix,
    BenchmarkReport, CurvePoint, EvalError, KReport, ProblemAttempts, DEFAULT_KS,
};
pub use expert::{
    evaluate_benchmark, load_problems, run_iteration, run_training, split_dataset, EvalConfig,
    IterationReport, LoopError, LoopProblem, RunConfig, RunManifest,
};
pub use extract::{
    extract_corpus, split_proof, step_to_theorem, ContextEntry, ExtractError, Extraction,
    ProofStep, SplitError, StateRecord,
};
pub use generator::{
    build_proposer_prompt, build_prover_prompt, extract_boxed, extract_proof, propose, prove,
    resolve_client, CounterexampleCandidate, GeneratorClient, GeneratorConfig, GeneratorError,
    HttpClient, MockScript, ProofCandidate, Role, TranscriptWriter, DEFAULT_MAX_TOKENS,
    DEFAULT_TEMPERATURE,
};
pub use mutate::{
    droppable_hypotheses, mutate, mutate_all, mutation_record, prune_redundant,
    CombinationForm, MutationError, MutationOutcome, MutationRecord, OracleError,
    StructuralUsage, UsageOracle,
};
pub use parse::{parse_corpus, parse_term, parse_theorem, CorpusParse, ParseError, SkipRecord};
pub use print::{
    print_problem, print_problem_header, print_statement_header, print_term, print_theorem,
};
pub use reward::{
    build_counterexample_sft, build_proof_sft, compute_reward, Candidate, ExampleKind,
    ProofRole, RewardConfig, RewardRecord, WeightedExample, DEFAULT_ALPHA,
};
pub use sim::{
    compare_settings, iterations_to_90, simulate, Comparison, DifficultyDist, SimConfig,
    SimCurves,
};
pub use statement::{
    Binder, BinderMode, ExistentialProblem, Hypothesis, ProofScript, Provenance, SourceTag,
    TheoremStatement,
};
pub use term::{BinOp, QuantBinder, QuantKind, RawTerm, Term};
pub use verify::toy::{toy_check, GroundWitness, ToyBackend, ToyVerdict, DEFAULT_BOUND};
pub use verify::wire::{
    decode_response, encode_request, CheckerUsage, SubprocessBackend, TcpBackend,
};
pub use verify::{
    run_batch, CheckerBackend, Diagnostic, Limits, PoolError, ProofJob, Severity, Status,
    VerificationResult, DEFAULT_MEMORY_BYTES, DEFAULT_TIMEOUT_S,
};
