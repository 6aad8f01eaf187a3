//! Offline expert-iteration runs against scripted mock generators and the
//! built-in toy checker: outcome accounting, byte-identical reruns,
//! stop/resume convergence, checkpoint reuse, hooks, and 3x3 evaluation.

mod common;

use common::{
    assert_runs_identical, base_config, jsonl_values, problem, script_line, write_fixture,
};

use cexmut::{
    evaluate_benchmark, run_training, EvalConfig, GeneratorConfig, LoopError, Role, RunConfig,
    ToyBackend,
};

#[test]
fn full_run_accounts_for_every_outcome_class() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, script) = write_fixture(dir.path(), 10);
    let cfg = base_config(&dataset, &script, &dir.path().join("run"));
    let manifest = run_training(&cfg, &ToyBackend::default()).unwrap();

    assert!(manifest.completed);
    assert_eq!(manifest.iterations.len(), 4);
    assert_eq!(manifest.train, 8);
    assert_eq!(manifest.validation, 2);

    let mut ce_weights = Vec::new();
    let mut proof_lines = 0;
    for report in &manifest.iterations {
        assert_eq!(
            report.proposed + report.errors,
            cfg.batch_size,
            "every batch problem either proposed or recorded an error"
        );
        assert!(report.both <= report.v_m.min(report.v_h));
        for v in jsonl_values(&cfg.run_dir.join(&report.ce_sft)) {
            ce_weights.push(v["weight"].as_f64().unwrap());
        }
        proof_lines += jsonl_values(&cfg.run_dir.join(&report.proof_sft)).len();
        let expected_mass: f64 = jsonl_values(&cfg.run_dir.join(&report.ce_sft))
            .iter()
            .map(|v| v["weight"].as_f64().unwrap())
            .sum();
        assert!((report.reward_mass - expected_mass).abs() < 1e-9);
    }
    let allowed = [0.0, 0.2, 0.8, 1.0];
    for w in &ce_weights {
        assert!(
            allowed.iter().any(|a| (w - a).abs() < 1e-9),
            "unexpected weight {w}"
        );
    }
    let verified_total: usize = manifest.iterations.iter().map(|r| r.v_m + r.v_h).sum();
    assert_eq!(proof_lines, verified_total, "one proof-SFT example per verified proof");
    assert!(cfg.run_dir.join("transcripts").join("iter_0.jsonl").exists());
}

#[test]
fn rerun_and_resume_converge_to_identical_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, script) = write_fixture(dir.path(), 10);

    let cfg_a = base_config(&dataset, &script, &dir.path().join("run_a"));
    run_training(&cfg_a, &ToyBackend::default()).unwrap();

    let cfg_b = base_config(&dataset, &script, &dir.path().join("run_b"));
    run_training(&cfg_b, &ToyBackend::default()).unwrap();
    assert_runs_identical(&cfg_a.run_dir, &cfg_b.run_dir, 4);

    // Interrupted run: two iterations, stop, then resume to completion.
    let mut cfg_c = base_config(&dataset, &script, &dir.path().join("run_c"));
    cfg_c.stop_after = Some(2);
    let partial = run_training(&cfg_c, &ToyBackend::default()).unwrap();
    assert!(!partial.completed);
    assert_eq!(partial.iterations.len(), 2);
    assert!(!cfg_c.run_dir.join("manifest.json").exists());

    cfg_c.stop_after = None;
    let resumed = run_training(&cfg_c, &ToyBackend::default()).unwrap();
    assert!(resumed.completed);
    assert_runs_identical(&cfg_a.run_dir, &cfg_c.run_dir, 4);
}

#[test]
fn partial_verification_checkpoint_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, script) = write_fixture(dir.path(), 10);

    let cfg_a = base_config(&dataset, &script, &dir.path().join("run_a"));
    run_training(&cfg_a, &ToyBackend::default()).unwrap();

    // Simulate a crash that left two verified results behind in iteration 0.
    let cfg_b = base_config(&dataset, &script, &dir.path().join("run_b"));
    let checkpoint_a = std::fs::read_to_string(cfg_a.run_dir.join("iter_0/verify.jsonl")).unwrap();
    let head: String = checkpoint_a.lines().take(2).fold(String::new(), |mut s, l| {
        s.push_str(l);
        s.push('\n');
        s
    });
    std::fs::create_dir_all(cfg_b.run_dir.join("iter_0")).unwrap();
    std::fs::write(cfg_b.run_dir.join("iter_0/verify.jsonl"), head).unwrap();

    run_training(&cfg_b, &ToyBackend::default()).unwrap();
    assert_runs_identical(&cfg_a.run_dir, &cfg_b.run_dir, 4);
}

#[test]
fn resume_with_changed_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, script) = write_fixture(dir.path(), 10);
    let cfg = base_config(&dataset, &script, &dir.path().join("run"));
    run_training(&cfg, &ToyBackend::default()).unwrap();

    let mut changed = cfg.clone();
    changed.alpha = 1.0;
    assert!(matches!(
        run_training(&changed, &ToyBackend::default()),
        Err(LoopError::ConfigMismatch)
    ));
}

#[test]
fn single_pass_overrun_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, script) = write_fixture(dir.path(), 10);
    let mut cfg = base_config(&dataset, &script, &dir.path().join("run"));
    cfg.iterations = 5;
    assert!(matches!(
        run_training(&cfg, &ToyBackend::default()),
        Err(LoopError::SinglePassExceeded { needed: 10, available: 8, .. })
    ));
}

#[test]
fn fine_tune_hook_runs_per_iteration_and_can_abort() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, script) = write_fixture(dir.path(), 10);
    let marker = dir.path().join("hook_calls.txt");
    let hook = dir.path().join("hook.sh");
    std::fs::write(&hook, format!("#!/bin/sh\necho \"$6\" >> {}\n", marker.display())).unwrap();

    let mut cfg = base_config(&dataset, &script, &dir.path().join("run_ok"));
    cfg.fine_tune_hook = Some(format!("/bin/sh {}", hook.display()));
    let manifest = run_training(&cfg, &ToyBackend::default()).unwrap();
    for report in &manifest.iterations {
        assert_eq!(report.hook, "ok");
    }
    let calls = std::fs::read_to_string(&marker).unwrap();
    assert_eq!(calls, "0\n1\n2\n3\n", "hook saw each iteration index");

    let failing = dir.path().join("fail.sh");
    std::fs::write(&failing, "#!/bin/sh\nexit 3\n").unwrap();
    let mut cfg = base_config(&dataset, &script, &dir.path().join("run_tolerant"));
    cfg.fine_tune_hook = Some(format!("/bin/sh {}", failing.display()));
    let manifest = run_training(&cfg, &ToyBackend::default()).unwrap();
    assert!(manifest.iterations.iter().all(|r| r.hook == "exit 3"));

    let mut cfg = base_config(&dataset, &script, &dir.path().join("run_strict"));
    cfg.fine_tune_hook = Some(format!("/bin/sh {}", failing.display()));
    cfg.hook_fail_fast = true;
    assert!(matches!(
        run_training(&cfg, &ToyBackend::default()),
        Err(LoopError::HookFailed { iteration: 0, .. })
    ));
}

#[test]
fn multi_reward_marks_at_least_as_many_examples_as_single() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, script) = write_fixture(dir.path(), 10);

    let cfg_multi = base_config(&dataset, &script, &dir.path().join("run_multi"));
    let multi = run_training(&cfg_multi, &ToyBackend::default()).unwrap();

    let mut cfg_single = base_config(&dataset, &script, &dir.path().join("run_single"));
    cfg_single.alpha = 1.0;
    let single = run_training(&cfg_single, &ToyBackend::default()).unwrap();

    let nonzero = |cfg: &RunConfig, manifest: &cexmut::RunManifest| {
        manifest
            .iterations
            .iter()
            .flat_map(|r| jsonl_values(&cfg.run_dir.join(&r.ce_sft)))
            .filter(|v| v["weight"].as_f64().unwrap() > 0.0)
            .count()
    };
    let (n_multi, n_single) = (nonzero(&cfg_multi, &multi), nonzero(&cfg_single, &single));
    assert!(n_multi >= n_single, "multi {n_multi} < single {n_single}");

    // Verification outcomes are identical; only the weighting changes.
    for (a, b) in multi.iterations.iter().zip(&single.iterations) {
        assert_eq!((a.v_m, a.v_h, a.both, a.neither), (b.v_m, b.v_h, b.both, b.neither));
    }
    let proofs = |cfg: &RunConfig, m: &cexmut::RunManifest| -> usize {
        m.iterations
            .iter()
            .map(|r| jsonl_values(&cfg.run_dir.join(&r.proof_sft)).len())
            .sum()
    };
    assert_eq!(proofs(&cfg_multi, &multi), proofs(&cfg_single, &single));
}

#[test]
fn evaluation_runs_three_by_three() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("eval_script.jsonl");
    let problems = vec![problem(1), problem(2), problem(3)];
    let mut sc = String::new();
    for line in [
        script_line("p001", "proposer", "\\boxed{n = 1}"),
        script_line("p001", "prover", "use 1"),
        script_line("p002", "proposer", "\\boxed{n = 2}"),
        script_line("p002", "prover", "use 7"),
        script_line("p003", "proposer", "no answer"),
    ] {
        sc.push_str(&line);
        sc.push('\n');
    }
    std::fs::write(&script, sc).unwrap();

    let endpoint = format!("mock:{}", script.display());
    let mut cfg = EvalConfig::new(
        GeneratorConfig::new(Role::Proposer, &endpoint),
        GeneratorConfig::new(Role::Prover, &endpoint),
    );
    cfg.timeout_s = 10.0;
    let (matrix, report) = evaluate_benchmark(&cfg, &problems, &ToyBackend::default()).unwrap();

    assert_eq!(matrix.problems.len(), 3);
    let by_id = |id: &str| matrix.problems.iter().find(|p| p.problem_id == id).unwrap();
    assert_eq!((by_id("p001").n(), by_id("p001").c()), (9, 9));
    assert_eq!((by_id("p002").n(), by_id("p002").c()), (9, 0));
    assert_eq!(by_id("p003").n(), 0);
    assert_eq!(by_id("p003").losses.len(), 3);

    assert_eq!(report.per_k.len(), 3);
    for kr in &report.per_k {
        assert_eq!(kr.scored, 2, "the lost problem is skipped at k = {}", kr.k);
        assert!((kr.mean_pass - 0.5).abs() < 1e-9);
    }
    let k9 = report.per_k.iter().find(|kr| kr.k == 9).unwrap();
    assert_eq!(k9.solved, 1);
}
