//! Shared offline-loop fixture: synthetic toy problems, a scripted mock
//! generator covering five outcome classes, and byte-level run comparison.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use cexmut::{GeneratorConfig, LoopProblem, Role, RunConfig};

pub fn problem(i: usize) -> LoopProblem {
    LoopProblem {
        id: format!("p{i:03}"),
        mutated: format!("theorem p{i:03} : \u{2203} n : \u{2115}, n = {i} := by sorry"),
        dropped: format!(
            "theorem p{i:03}_drop : \u{2203} n : \u{2115}, n \u{2260} {i} := by sorry"
        ),
    }
}

pub fn script_line(id: &str, role: &str, response: &str) -> String {
    serde_json::json!({"problem_id": id, "role": role, "response": response}).to_string()
}

/// Five outcome classes by index: both proofs verify, only the mutated
/// problem's, only the dropped hypothesis's, neither, and a proposal whose
/// answer does not extract.
pub fn write_fixture(dir: &Path, n: usize) -> (PathBuf, PathBuf) {
    let dataset = dir.join("dataset.jsonl");
    let script = dir.join("script.jsonl");
    let mut ds = String::new();
    let mut sc = String::new();
    for i in 0..n {
        let p = problem(i);
        ds.push_str(
            &serde_json::json!({
                "mutated_name": p.id,
                "mutated_lean": p.mutated,
                "dropped_lean": p.dropped,
            })
            .to_string(),
        );
        ds.push('\n');
        let class = i % 5;
        if class == 4 {
            sc.push_str(&script_line(&p.id, "proposer", "No example comes to mind."));
            sc.push('\n');
            continue;
        }
        let boxed = format!("Take n = {i}.\n\\boxed{{n = {i}}}");
        let (m_tac, h_tac) = match class {
            0 => (format!("use {i}"), format!("use {}", i + 1)),
            1 => (format!("use {i}"), format!("use {i}")),
            2 => (format!("use {}", i + 1), format!("use {}", i + 1)),
            _ => (format!("use {}", i + 1), format!("use {i}")),
        };
        for line in [
            script_line(&p.id, "proposer", &boxed),
            script_line(&p.id, "prover", &m_tac),
            script_line(&p.id, "prover", &h_tac),
        ] {
            sc.push_str(&line);
            sc.push('\n');
        }
    }
    std::fs::write(&dataset, ds).unwrap();
    std::fs::write(&script, sc).unwrap();
    (dataset, script)
}

pub fn base_config(dataset: &Path, script: &Path, run_dir: &Path) -> RunConfig {
    let endpoint = format!("mock:{}", script.display());
    RunConfig {
        dataset: dataset.to_path_buf(),
        run_dir: run_dir.to_path_buf(),
        holdout: 2,
        iterations: 4,
        batch_size: 2,
        alpha: 0.8,
        n_propose: 1,
        n_prove: 1,
        seed: 11,
        proposer: GeneratorConfig::new(Role::Proposer, &endpoint),
        prover: GeneratorConfig::new(Role::Prover, &endpoint),
        fine_tune_hook: None,
        hook_fail_fast: false,
        single_pass: true,
        parallelism: 2,
        preamble: String::new(),
        timeout_s: 10.0,
        stop_after: None,
    }
}

pub fn manifest_files(run_dir: &Path, iterations: usize) -> Vec<PathBuf> {
    let mut files = vec![
        run_dir.join("run.json"),
        run_dir.join("split.json"),
        run_dir.join("manifest.json"),
    ];
    for k in 0..iterations {
        let d = run_dir.join(format!("iter_{k}"));
        for name in ["report.json", "ce_sft.jsonl", "proof_sft.jsonl", "errors.jsonl"] {
            files.push(d.join(name));
        }
    }
    files
}

pub fn assert_runs_identical(a: &Path, b: &Path, iterations: usize) {
    for (fa, fb) in manifest_files(a, iterations)
        .into_iter()
        .zip(manifest_files(b, iterations))
    {
        let ba = std::fs::read(&fa).unwrap_or_else(|_| panic!("missing {}", fa.display()));
        let bb = std::fs::read(&fb).unwrap_or_else(|_| panic!("missing {}", fb.display()));
        assert_eq!(ba, bb, "{} differs from {}", fa.display(), fb.display());
    }
}

pub fn jsonl_values(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}
