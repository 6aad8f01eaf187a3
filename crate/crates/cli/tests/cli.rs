//! End-to-end tests of the `cexmut` binary: exit codes, output files,
//! manifests, and the offline mock/toy pipeline.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cexmut"));
    for var in ["PROPOSER_ADDR", "PROVER_ADDR", "VERIFIER_CMD", "VERIFIER_ADDR"] {
        cmd.env_remove(var);
    }
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SEEDS: &str = "theorem cli_demo (n : \u{2115}) (h\u{2081} : n > 2) (h\u{2082} : n < 9) : n + 1 > 3 := by
  omega

theorem cli_closed : \u{2203} n : \u{2115}, n * n = 49 := by
  use 7
";

fn write_seeds(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("seeds.lean");
    std::fs::write(&path, SEEDS).unwrap();
    path
}

fn mutate_seeds(dir: &Path) -> std::path::PathBuf {
    let seeds = write_seeds(dir);
    let out = dir.join("problems.jsonl");
    let result = run(bin()
        .args(["mutate", "--in"])
        .arg(&seeds)
        .arg("--out")
        .arg(&out));
    assert!(result.status.success(), "mutate failed: {}", stderr(&result));
    out
}

fn script_line(id: &str, role: &str, response: &str) -> String {
    serde_json::json!({"problem_id": id, "role": role, "response": response}).to_string()
}

/// Responses for the two `cli_demo` mutations: a witness that satisfies the
/// mutated problem and a refutation of the dropped hypothesis.
fn write_script(dir: &Path) -> std::path::PathBuf {
    let lines = [
        script_line("cli_demo_mut_drop0", "proposer", "\\boxed{n = 3}"),
        script_line("cli_demo_mut_drop0", "prover", "use 3"),
        script_line("cli_demo_mut_drop0", "prover", "use 0"),
        script_line("cli_demo_mut_drop1", "proposer", "\\boxed{n = 3}"),
        script_line("cli_demo_mut_drop1", "prover", "use 3"),
        script_line("cli_demo_mut_drop1", "prover", "use 9"),
    ];
    let path = dir.join("script.jsonl");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    path
}

#[test]
fn help_documents_the_defaults() {
    let top = run(bin().arg("--help"));
    assert!(top.status.success());
    let text = stdout(&top);
    for sub in ["extract", "mutate", "iterate", "evaluate", "simulate", "check"] {
        assert!(text.contains(sub), "top help misses `{sub}`");
    }

    let iterate = stdout(&run(bin().args(["iterate", "--help"])));
    for needle in ["0.8", "56", "10000", "3000", "60", "0.9", "4096"] {
        assert!(iterate.contains(needle), "iterate help misses `{needle}`");
    }
    let evaluate = stdout(&run(bin().args(["evaluate", "--help"])));
    assert!(evaluate.contains("1,4,9"));
}

#[test]
fn mutate_writes_records_manifest_and_companion_lean() {
    let dir = tempfile::tempdir().unwrap();
    let out = mutate_seeds(dir.path());

    let records: Vec<serde_json::Value> = std::fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 2, "one record per droppable hypothesis");
    for r in &records {
        assert_eq!(r["seed"], "cli_demo");
        assert!(r["mutated_lean"].as_str().unwrap().contains('\u{2203}'));
        assert!(r["mutated_lean"].as_str().unwrap().contains('\u{2227}'));
        assert!(r["dropped_lean"].as_str().unwrap().contains('\u{00ac}'));
    }

    let lean = std::fs::read_to_string(out.with_extension("lean")).unwrap();
    assert!(lean.contains("cli_demo_mut_drop0"));
    assert!(lean.contains("cli_demo_drop1"));

    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("cli_manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"], "mutate");
    let hash = manifest["inputs"][dir.path().join("seeds.lean").display().to_string()]
        .as_str()
        .unwrap();
    assert_eq!(hash.len(), 64, "sha256 hex digest");
}

#[test]
fn mutate_implication_form_changes_the_body() {
    let dir = tempfile::tempdir().unwrap();
    let seeds = write_seeds(dir.path());
    let out = dir.path().join("imp.jsonl");
    let result = run(bin()
        .args(["mutate", "--form", "imp", "--in"])
        .arg(&seeds)
        .arg("--out")
        .arg(&out));
    assert!(result.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    let mutated = first["mutated_lean"].as_str().unwrap();
    assert!(mutated.contains('\u{2192}'), "implication body: {mutated}");
    assert!(!mutated.contains('\u{2227}'));
}

#[test]
fn mutate_strict_flags_parse_skips() {
    let dir = tempfile::tempdir().unwrap();
    let seeds = dir.path().join("seeds.lean");
    std::fs::write(
        &seeds,
        format!("{SEEDS}\ntheorem broken : this is (not valid := by\n  sorry\n"),
    )
    .unwrap();

    let lax = run(bin()
        .args(["mutate", "--in"])
        .arg(&seeds)
        .arg("--out")
        .arg(dir.path().join("a.jsonl")));
    assert!(lax.status.success(), "skips alone do not fail a lax run");
    let skips = std::fs::read_to_string(dir.path().join("a.skips.jsonl")).unwrap();
    assert!(!skips.trim().is_empty());

    let strict = run(bin()
        .args(["mutate", "--strict", "--in"])
        .arg(&seeds)
        .arg("--out")
        .arg(dir.path().join("b.jsonl")));
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn iterate_with_mock_completes_then_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = mutate_seeds(dir.path());
    let script = write_script(dir.path());
    let run_dir = dir.path().join("run");

    let mut cmd = bin();
    cmd.args(["iterate", "--iterations", "1", "--batch-size", "2", "--holdout", "0"])
        .args(["--timeout-s", "5", "--dataset"])
        .arg(&dataset)
        .arg("--run-dir")
        .arg(&run_dir)
        .arg("--mock")
        .arg(&script);
    let first = run(&mut cmd);
    assert!(first.status.success(), "iterate failed: {}", stderr(&first));

    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(run_dir.join("manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["completed"], true);
    assert_eq!(manifest["iterations"][0]["v_m"], 2);
    assert_eq!(manifest["iterations"][0]["v_h"], 2);

    let ce = std::fs::read_to_string(run_dir.join("iter_0").join("ce_sft.jsonl")).unwrap();
    assert_eq!(ce.lines().count(), 2);
    for line in ce.lines() {
        let record: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(record["weight"], 1.0, "both targets verified");
    }
    let before = std::fs::read_to_string(run_dir.join("manifest.json")).unwrap();

    let mut again = bin();
    again
        .args(["iterate", "--iterations", "1", "--batch-size", "2", "--holdout", "0"])
        .args(["--timeout-s", "5", "--dataset"])
        .arg(&dataset)
        .arg("--run-dir")
        .arg(&run_dir)
        .arg("--mock")
        .arg(&script);
    let second = run(&mut again);
    assert!(second.status.success(), "resume failed: {}", stderr(&second));
    let after = std::fs::read_to_string(run_dir.join("manifest.json")).unwrap();
    assert_eq!(before, after, "resume over a finished run changes nothing");
}

#[test]
fn iterate_without_an_endpoint_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = mutate_seeds(dir.path());
    let result = run(bin()
        .args(["iterate", "--json-errors", "--dataset"])
        .arg(&dataset)
        .arg("--run-dir")
        .arg(dir.path().join("run")));
    assert_eq!(result.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_str(stderr(&result).trim()).unwrap();
    assert_eq!(err["kind"], "config");
    assert!(err["error"].as_str().unwrap().contains("PROPOSER_ADDR"));
}

#[test]
fn iterate_rejects_a_changed_config_on_resume() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = mutate_seeds(dir.path());
    let script = write_script(dir.path());
    let run_dir = dir.path().join("run");

    let base = |alpha: &str| {
        let mut cmd = bin();
        cmd.args(["iterate", "--iterations", "1", "--batch-size", "2", "--holdout", "0"])
            .args(["--alpha", alpha, "--dataset"])
            .arg(&dataset)
            .arg("--run-dir")
            .arg(&run_dir)
            .arg("--mock")
            .arg(&script);
        cmd
    };
    assert!(run(&mut base("0.8")).status.success());
    let changed = run(&mut base("0.5"));
    assert_eq!(changed.status.code(), Some(2));
    assert!(stderr(&changed).contains("config"));
}

#[test]
fn evaluate_writes_report_and_prints_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = mutate_seeds(dir.path());
    let script = write_script(dir.path());
    let out_dir = dir.path().join("eval");

    let result = run(bin()
        .args(["evaluate", "--n-propose", "1", "--n-prove", "1", "--ks", "1", "--dataset"])
        .arg(&dataset)
        .arg("--out-dir")
        .arg(&out_dir)
        .arg("--mock")
        .arg(&script));
    assert!(result.status.success(), "evaluate failed: {}", stderr(&result));
    assert!(stdout(&result).contains("mean pass"));

    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["problems"], 2);
    let attempts = std::fs::read_to_string(out_dir.join("attempts.jsonl")).unwrap();
    assert_eq!(attempts.lines().count(), 2);
}

#[test]
fn evaluate_rejects_malformed_ks() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = mutate_seeds(dir.path());
    let result = run(bin()
        .args(["evaluate", "--ks", "1,x", "--dataset"])
        .arg(&dataset)
        .arg("--out-dir")
        .arg(dir.path().join("eval"))
        .arg("--mock")
        .arg(dir.path().join("script.jsonl")));
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn simulate_compare_and_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let cmp_dir = dir.path().join("cmp");
    let result = run(bin()
        .args(["simulate", "--iterations", "6", "--problems", "20", "--runs", "2"])
        .args(["--compare", "single:1.0", "multi:0.8", "--out-dir"])
        .arg(&cmp_dir));
    assert!(result.status.success(), "compare failed: {}", stderr(&result));
    let cmp: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(cmp_dir.join("comparison.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(cmp["runs"], 2);
    assert!(cmp_dir.join("curves_multi_run0.csv").exists());

    let single_dir = dir.path().join("single");
    let single = run(bin()
        .args(["simulate", "--alpha", "0.8", "--iterations", "6", "--problems", "20"])
        .arg("--out-dir")
        .arg(&single_dir));
    assert!(single.status.success());
    let csv = std::fs::read_to_string(single_dir.join("curves.csv")).unwrap();
    assert!(csv.starts_with("iteration,pass1,pass4,pass9"));
}

#[test]
fn check_runs_jobs_against_the_toy_backend() {
    let dir = tempfile::tempdir().unwrap();
    let jobs = dir.path().join("jobs.jsonl");
    let good = "theorem a : \u{2203} n : \u{2115}, n + 1 = 4 := by sorry";
    let bad = "theorem b : \u{2203} n : \u{2115}, n = n + 1 := by sorry";
    std::fs::write(
        &jobs,
        [
            serde_json::json!({"id": "ok", "statement": good, "proof": "use 3"}).to_string(),
            serde_json::json!({"id": "no", "statement": bad, "proof": "use 5"}).to_string(),
        ]
        .join("\n"),
    )
    .unwrap();

    let out = dir.path().join("results.jsonl");
    let result = run(bin()
        .args(["check", "--jobs"])
        .arg(&jobs)
        .arg("--out")
        .arg(&out));
    assert!(result.status.success(), "check failed: {}", stderr(&result));
    assert!(stdout(&result).contains("1 verified"));

    let lines: Vec<serde_json::Value> = std::fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines[0]["id"], "ok");
    assert_eq!(lines[0]["status"], "verified");
    assert_eq!(lines[1]["status"], "failed");
}

#[test]
fn extract_harvests_declarative_steps() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("proofs.lean");
    std::fs::write(
        &src,
        "theorem host (n : \u{2115}) (h : n > 1) : n + 1 > 2 := by
  have key : n \u{2265} 2 := by omega
  omega
",
    )
    .unwrap();
    let out = dir.path().join("seeds.lean");
    let result = run(bin()
        .args(["extract", "--in"])
        .arg(&src)
        .arg("--out")
        .arg(&out));
    assert!(result.status.success(), "extract failed: {}", stderr(&result));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("_g1_extracted_"), "extracted name tag: {text}");
    assert!(text.contains('\u{2265}'));
}
