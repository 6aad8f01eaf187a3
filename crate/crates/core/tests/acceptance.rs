//! Acceptance gate: nine criteria, one pass/fail line each, with runtime
//! budgets checked. Run with `cargo test --test acceptance -- --nocapture`
//! to see every line.

mod common;

use std::path::Path;
use std::time::Instant;

use cexmut::{
    compare_settings, compute_reward, mutate, mutate_all, parse_corpus, parse_theorem,
    pass_at_k_exact, print_problem, print_theorem, prune_redundant, run_training, CheckerUsage,
    CombinationForm, RewardConfig, SimConfig, ToyBackend,
};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CORPUS: &str = include_str!("../../../corpus/mini.lean");

/// The worked schema and example exactly as published, compared modulo
/// whitespace.
const SCHEMA_SEED: &str =
    "theorem original_version (x : X) : H\u{2081} x \u{2192} H\u{2082} x \u{2192} C x := by\n  exact witness_proof";
const SCHEMA_MUTATED: &str = "theorem mutated_version : \u{2203} x : X, H\u{2082} x \u{2192} C x";
const SCHEMA_DROPPED: &str = "theorem dropped_hypothesis : \u{2203} x : X, \u{ac} H\u{2081} x";
const WORKED_MUTATED: &str = "theorem aimeII_2001_p3_mut_54_drop4 :
  \u{2203} (x : \u{2115} \u{2192} \u{2124}),
    (\u{2200} n \u{2265} 5, x n = x (n - 1)  - x (n - 2) + x (n - 3)  - x (n - 4))
    \u{2227} x 10 = -267  \u{2227} x 11 = 211  \u{2227} x 12 = 375 \u{2227} x 14 \u{2260} 523 := by
  sorry";

fn squash_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn run_criterion(n: usize, name: &str, budget_ms: u128, body: impl FnOnce()) {
    let start = Instant::now();
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(body));
    let elapsed = start.elapsed().as_millis();
    let ok = result.is_ok() && elapsed < budget_ms;
    println!(
        "criterion {n} {}: {name} ({elapsed} ms, budget {budget_ms} ms)",
        if ok { "PASS" } else { "FAIL" }
    );
    if let Err(panic) = result {
        std::panic::resume_unwind(panic);
    }
    assert!(elapsed < budget_ms, "criterion {n} over budget: {elapsed} ms");
}

#[test]
fn criterion_1_golden_schema_mutation() {
    run_criterion(1, "golden schema mutation, implication form", 1_000, || {
        let t = parse_theorem(SCHEMA_SEED).unwrap();
        let out = mutate(&t, 0, CombinationForm::Implication).unwrap();
        assert_eq!(
            squash_whitespace(&print_problem(&out.mutated)),
            squash_whitespace(&format!("{SCHEMA_MUTATED} := by sorry")),
        );
        assert_eq!(
            squash_whitespace(&print_problem(&out.dropped)),
            squash_whitespace(&format!("{SCHEMA_DROPPED} := by sorry")),
        );
    });
}

#[test]
fn criterion_2_golden_worked_example() {
    run_criterion(2, "golden worked example, drop h\u{2085}", 1_000, || {
        let src = CORPUS
            .split("\n\n")
            .find(|block| block.contains("aimeII_2001_p3_g4_extracted_54"))
            .expect("worked example is in the corpus");
        let t = parse_theorem(src).unwrap();
        let out = mutate(&t, 4, CombinationForm::Conjunction).unwrap();
        assert_eq!(out.mutated.name, "aimeII_2001_p3_mut_54_drop4");
        assert_eq!(
            squash_whitespace(&print_problem(&out.mutated)),
            squash_whitespace(WORKED_MUTATED),
        );
    });
}

#[test]
fn criterion_3_reward_exactness() {
    run_criterion(3, "reward exactness over outcomes and alphas", 1_000, || {
        for alpha in [0.0, 0.5, 0.8, 1.0] {
            let cfg = RewardConfig { alpha };
            for v_m in [false, true] {
                for v_h in [false, true] {
                    let r = compute_reward("p", v_m, v_h, &cfg).r;
                    let formula = alpha * f64::from(u8::from(v_m))
                        + (1.0 - alpha) * f64::from(u8::from(v_h));
                    assert!((r - formula).abs() < 1e-15, "r({v_m},{v_h};{alpha}) = {r}");
                }
            }
        }
        let cfg = RewardConfig { alpha: 0.8 };
        let mut reachable: Vec<f64> = [(false, false), (false, true), (true, false), (true, true)]
            .iter()
            .map(|&(m, h)| compute_reward("p", m, h, &cfg).r)
            .collect();
        reachable.sort_by(f64::total_cmp);
        let expected = [0.0, 0.2, 0.8, 1.0];
        assert_eq!(reachable.len(), expected.len());
        for (r, e) in reachable.iter().zip(expected) {
            assert!((r - e).abs() < 1e-12, "reachable {r} vs {e}");
        }
    });
}

/// Oracle: enumerate every k-subset of n attempts (first c succeed) and
/// count subsets containing a success.
fn pass_at_k_oracle(n: usize, c: usize, k: usize) -> Ratio<u128> {
    let mut total = 0u128;
    let mut hit = 0u128;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        total += 1;
        if (mask & ((1 << c) - 1)) != 0 {
            hit += 1;
        }
    }
    Ratio::new(hit, total)
}

#[test]
fn criterion_4_pass_at_k_oracle_equivalence() {
    run_criterion(4, "pass@k matches subset enumeration", 5_000, || {
        for n in 1..=9 {
            for c in 0..=n {
                for k in 1..=n {
                    let got = pass_at_k_exact(n, c, k).unwrap();
                    let want = pass_at_k_oracle(n, c, k);
                    assert_eq!(got, want, "n={n} c={c} k={k}");
                }
            }
        }
    });
}

#[test]
fn criterion_5_mutation_ratio_and_throughput() {
    run_criterion(5, "corpus mutation ratio and throughput", 10_000, || {
        let parsed = parse_corpus(CORPUS, "mini.lean");
        assert_eq!(parsed.theorems.len(), 50);
        assert!(parsed.skips.is_empty());

        let total: usize = parsed
            .theorems
            .iter()
            .map(|t| mutate_all(t, CombinationForm::Conjunction).len())
            .sum();
        let ratio = total as f64 / parsed.theorems.len() as f64;
        assert!((1.0..=3.0).contains(&ratio), "ratio {ratio}");

        // Throughput over pre-parsed seeds; 20 sweeps = 1000 seed mutations.
        let sweeps = 20;
        let start = Instant::now();
        let mut sink = 0usize;
        for _ in 0..sweeps {
            for t in &parsed.theorems {
                sink += mutate_all(t, CombinationForm::Conjunction).len();
            }
        }
        let per_s = (sweeps * parsed.theorems.len()) as f64 / start.elapsed().as_secs_f64();
        assert_eq!(sink, total * sweeps);
        assert!(per_s >= 1_000.0, "throughput {per_s:.0} seeds/s");

        // Checker-backed pruning is exercised, not timed: the toy backend
        // spots both redundant hypotheses of this corpus theorem.
        let backend = ToyBackend::default();
        let closed = parsed
            .theorems
            .iter()
            .find(|t| t.name == "closed_sum_check")
            .expect("closed_sum_check is in the corpus");
        let pruned = prune_redundant(closed, &CheckerUsage { backend: &backend }).unwrap();
        assert!(pruned.hypotheses.is_empty());
    });
}

#[test]
fn criterion_6_end_to_end_offline_loop() {
    run_criterion(6, "offline loop over 100 toy problems", 60_000, || {
        let dir = tempfile::tempdir().unwrap();
        let (dataset, script) = common::write_fixture(dir.path(), 100);
        let configure = |run_dir: &Path| {
            let mut cfg = common::base_config(&dataset, &script, run_dir);
            cfg.holdout = 0;
            cfg.iterations = 4;
            cfg.batch_size = 25;
            cfg.parallelism = 4;
            cfg
        };

        let cfg_a = configure(&dir.path().join("run_a"));
        let manifest = run_training(&cfg_a, &ToyBackend::default()).unwrap();
        assert!(manifest.completed);
        assert_eq!(manifest.train, 100);

        let allowed = [0.0, 0.2, 0.8, 1.0];
        let mut proof_lines = 0;
        for report in &manifest.iterations {
            for v in common::jsonl_values(&cfg_a.run_dir.join(&report.ce_sft)) {
                let w = v["weight"].as_f64().unwrap();
                assert!(allowed.iter().any(|a| (w - a).abs() < 1e-9), "weight {w}");
            }
            proof_lines += common::jsonl_values(&cfg_a.run_dir.join(&report.proof_sft)).len();
        }
        let verified: usize = manifest.iterations.iter().map(|r| r.v_m + r.v_h).sum();
        assert_eq!(proof_lines, verified);

        let cfg_b = configure(&dir.path().join("run_b"));
        run_training(&cfg_b, &ToyBackend::default()).unwrap();
        common::assert_runs_identical(&cfg_a.run_dir, &cfg_b.run_dir, 4);

        let mut cfg_c = configure(&dir.path().join("run_c"));
        cfg_c.stop_after = Some(2);
        let partial = run_training(&cfg_c, &ToyBackend::default()).unwrap();
        assert!(!partial.completed);
        cfg_c.stop_after = None;
        run_training(&cfg_c, &ToyBackend::default()).unwrap();
        common::assert_runs_identical(&cfg_a.run_dir, &cfg_c.run_dir, 4);
    });
}

#[test]
fn criterion_7_reward_dynamics() {
    run_criterion(7, "multi-reward beats single-reward in simulation", 120_000, || {
        let mut multi = SimConfig::default();
        multi.alpha = 0.8;
        let mut single = SimConfig::default();
        single.alpha = 1.0;
        let cmp = compare_settings(&multi, &single, 20);
        assert!(cmp.win_rate_a >= 0.8, "win rate {}", cmp.win_rate_a);
        assert!(
            cmp.mean_t90_a < cmp.mean_t90_b,
            "iterations to 90%: {} vs {}",
            cmp.mean_t90_a,
            cmp.mean_t90_b
        );
    });
}

#[test]
fn criterion_8_parser_round_trip() {
    run_criterion(8, "corpus round-trip and printer fixpoint", 5_000, || {
        let parsed = parse_corpus(CORPUS, "mini.lean");
        assert_eq!(parsed.theorems.len(), 50);
        assert!(parsed.skips.is_empty());
        for name in ["original_version", "mutated_version", "dropped_hypothesis", "aimeII_2001_p3_g4_extracted_54"] {
            assert!(parsed.theorems.iter().any(|t| t.name == name), "missing {name}");
        }
        for t in &parsed.theorems {
            let printed = print_theorem(t);
            let reparsed = parse_theorem(&printed).unwrap();
            assert_eq!(print_theorem(&reparsed), printed, "fixpoint broke for {}", t.name);
            let third = parse_theorem(&print_theorem(&reparsed)).unwrap();
            assert_eq!(reparsed, third, "parse instability for {}", t.name);
        }
    });
}

#[test]
fn criterion_9_density_dominance() {
    run_criterion(9, "nonzero-reward density dominance", 5_000, || {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let single = RewardConfig { alpha: 1.0 };
        for _ in 0..10_000 {
            let alpha = rng.random_range(0.001..0.999);
            let multi = RewardConfig { alpha };
            let size = rng.random_range(1..=20);
            let outcomes: Vec<(bool, bool)> =
                (0..size).map(|_| (rng.random(), rng.random())).collect();

            let nonzero = |cfg: &RewardConfig| {
                outcomes
                    .iter()
                    .filter(|&&(m, h)| compute_reward("p", m, h, cfg).r > 0.0)
                    .count()
            };
            let (dense, sparse) = (nonzero(&multi), nonzero(&single));
            assert!(dense >= sparse, "alpha {alpha}: {dense} < {sparse}");
            let has_h_only = outcomes.iter().any(|&(m, h)| !m && h);
            assert_eq!(dense == sparse, !has_h_only, "alpha {alpha}");
        }
    });
}
