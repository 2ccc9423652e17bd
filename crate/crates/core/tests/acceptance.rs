//! Acceptance suite: every release criterion as an executable check at its
//! stated tolerance, one pass/fail line per criterion
//! (`cargo test --test acceptance -- --nocapture` to see them all).
//!
//! Criteria 1-10 are exact identities, inequalities, and oracle agreements;
//! 11 and 12 are directional reproductions of the modality-competition
//! mechanism and the negative-sampling sweep on the default synthetic
//! scenario; 13 drives the `verify` subcommand end to end.

use std::time::Instant;
use tcmax::nn::log_sum_exp;
use tcmax::synth::{generate, GeneratorConfig};
use tcmax::trainer::{train, EpochRecord, ModelConfig, Strategy, TrainConfig};
use tcmax::verify::{
    check_dv_inequality, check_dv_tightness, check_gradients, check_loss_equivalences,
    check_mine_special_case, check_population_bound, check_regression_reduction,
    check_tc_decompositions, check_tc_dual_form, check_tcne_supremum, CheckResult,
};

fn report(criterion: &str, check: &CheckResult) {
    println!(
        "[{}] criterion {criterion} ({}): measured {:.3e} vs threshold {:.0e} in {:.2}s",
        if check.pass { "PASS" } else { "FAIL" },
        check.name,
        check.measured,
        check.threshold,
        check.seconds
    );
    assert!(
        check.pass,
        "criterion {criterion} failed: {} measured {} (threshold {})",
        check.name, check.measured, check.threshold
    );
}

fn report_line(criterion: &str, pass: bool, detail: &str) {
    println!(
        "[{}] criterion {criterion}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

#[test]
fn criterion_01_tc_dual_form_identity() {
    let check = check_tc_dual_form();
    report("1", &check);
    assert!(check.seconds < 5.0, "took {:.1}s, budget 5s", check.seconds);
}

#[test]
fn criterion_02_decomposition_identity() {
    report("2", &check_tc_decompositions());
}

#[test]
fn criterion_03_dv_inequality() {
    report("3", &check_dv_inequality(log_sum_exp));
}

#[test]
fn criterion_04_dv_tightness() {
    report("4", &check_dv_tightness());
}

#[test]
fn criterion_05_tcne_supremum_attainment() {
    for check in check_tcne_supremum() {
        assert!(
            check.seconds < 60.0,
            "{} took {:.1}s, budget 60s",
            check.name,
            check.seconds
        );
        report("5", &check);
    }
}

#[test]
fn criterion_06_mine_special_case() {
    report("6", &check_mine_special_case());
}

#[test]
fn criterion_07_loss_form_equivalences() {
    for check in check_loss_equivalences() {
        report("7", &check);
    }
}

#[test]
fn criterion_08_population_bound_and_prediction() {
    for check in check_population_bound() {
        report("8", &check);
    }
}

#[test]
fn criterion_09_gradient_correctness() {
    report("9", &check_gradients());
}

#[test]
fn criterion_10_regression_reduction() {
    for check in check_regression_reduction() {
        report("10", &check);
    }
}

// ---- criterion 11: directional modality-competition reproduction ----

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[values.len() / 2]
}

fn run_strategy(strategy: Strategy, seed: u64) -> EpochRecord {
    let generator = GeneratorConfig::competition_default(seed);
    let split = generate(&generator).expect("generate");
    let model_config = ModelConfig::competition_default();
    let mut model = model_config.build(&[8, 8], 4, seed).expect("model");
    let config = TrainConfig::competition_default(strategy, seed);
    let records = train(&mut model, &split, &config).expect("train");
    records.last().cloned().expect("records")
}

#[test]
fn criterion_11_modality_competition_direction() {
    let started = Instant::now();
    let seeds = [1u64, 2, 3, 4, 5];
    // the configured weak modality is index 1 (signal 0.8 vs 3.0)
    let mut weak_joint = vec![];
    let mut weak_unimodal = vec![];
    let mut js_joint = vec![];
    let mut js_tcmax = vec![];
    let mut multi_joint = vec![];
    let mut multi_unimodal = vec![];
    let mut multi_tcmax = vec![];
    for &seed in &seeds {
        let joint = run_strategy(Strategy::Joint, seed);
        let unimodal = run_strategy(Strategy::Unimodal, seed);
        let tcmax = run_strategy(Strategy::TcmaxFactored, seed);
        weak_joint.push(joint.metrics.modality_accuracy[1]);
        weak_unimodal.push(unimodal.metrics.modality_accuracy[1]);
        js_joint.push(joint.metrics.js_divergence);
        js_tcmax.push(tcmax.metrics.js_divergence);
        multi_joint.push(joint.metrics.multi_accuracy);
        multi_unimodal.push(unimodal.metrics.multi_accuracy);
        multi_tcmax.push(tcmax.metrics.multi_accuracy);
    }
    let weak_joint = median(weak_joint);
    let weak_unimodal = median(weak_unimodal);
    let js_joint = median(js_joint);
    let js_tcmax = median(js_tcmax);
    let multi_joint = median(multi_joint);
    let multi_unimodal = median(multi_unimodal);
    let multi_tcmax = median(multi_tcmax);
    let elapsed = started.elapsed().as_secs_f64();

    report_line(
        "11a",
        weak_joint < weak_unimodal,
        &format!(
            "weak-modality accuracy under joint {weak_joint:.3} < unimodal {weak_unimodal:.3} (medians over 5 seeds)"
        ),
    );
    report_line(
        "11b",
        js_tcmax < js_joint,
        &format!("JS divergence under tcmax_factored {js_tcmax:.3} < joint {js_joint:.3}"),
    );
    report_line(
        "11c",
        multi_tcmax >= multi_joint - 0.01 && multi_tcmax >= multi_unimodal - 0.01,
        &format!(
            "multi accuracy tcmax {multi_tcmax:.3} vs joint {multi_joint:.3} and unimodal {multi_unimodal:.3} (slack 0.01)"
        ),
    );
    report_line(
        "11-runtime",
        elapsed < 900.0,
        &format!("competition runs finished in {elapsed:.1}s (budget 900s)"),
    );
}

// ---- criterion 12: negative-sample sweep harness ----

const SWEEP_CONFIG: &str = r#"
[generator]
num_classes = 4
coupling = 0.5
train_size = 2000
test_size = 1000
seed = 3

[[generator.modalities]]
feature_dim = 8
signal = 3.0
noise = 1.0
variant = "gaussian_clusters"

[[generator.modalities]]
feature_dim = 8
signal = 0.8
noise = 1.0
variant = "gaussian_clusters"

[model]
encoder_hidden = [16]
embed_dim = 8
head = "linear_sum"
activation = "relu"

[train]
strategy = "tcmax_sampled"
epochs = 50
batch_size = 64
learning_rate = 0.01
momentum = 0.9
weight_decay = 0.0001
negatives = 256
eval_every = 50
seed = 3
"#;

#[test]
fn criterion_12_negative_sample_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("sweep.toml");
    std::fs::write(&config_path, SWEEP_CONFIG).unwrap();

    // the sweep, including the full-enumeration point 64^2 = 4096
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_tcmax"))
        .args([
            "train",
            "--config",
            config_path.to_str().unwrap(),
            "--negatives",
            "16,64,256,1024,4096",
            "--seeds",
            "3",
            "--out",
        ])
        .arg(dir.path().join("sweep"))
        .output()
        .expect("spawn");
    assert!(
        out.status.success(),
        "sweep failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let sweep = std::fs::read_to_string(dir.path().join("sweep/negatives_sweep.csv")).unwrap();
    let mut by_count = std::collections::BTreeMap::new();
    for line in sweep.lines().skip(1) {
        let mut parts = line.split(',');
        let count: usize = parts.next().unwrap().parse().unwrap();
        let acc: f64 = parts.next().unwrap().parse().unwrap();
        by_count.insert(count, acc);
    }
    report_line(
        "12-harness",
        by_count.len() == 5 && by_count.values().all(|a| (0.0..=1.0).contains(a)),
        &format!("sweep produced one accuracy per count: {by_count:?}"),
    );

    // reference run with the full pairwise loss, same seed and schedule
    let full_config = SWEEP_CONFIG
        .replace("strategy = \"tcmax_sampled\"", "strategy = \"tcmax_full\"")
        .replace("negatives = 256\n", "");
    let full_path = dir.path().join("full.toml");
    std::fs::write(&full_path, full_config).unwrap();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_tcmax"))
        .args([
            "train",
            "--config",
            full_path.to_str().unwrap(),
            "--seeds",
            "3",
            "--out",
        ])
        .arg(dir.path().join("full"))
        .output()
        .expect("spawn");
    assert!(
        out.status.success(),
        "full run failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("full/seed_3/summary.json")).unwrap(),
    )
    .unwrap();
    let full_acc = summary["final_record"]["multi_accuracy"].as_f64().unwrap();
    let sweep_acc = by_count[&4096];
    report_line(
        "12-full-point",
        (full_acc - sweep_acc).abs() <= 0.02,
        &format!(
            "full-enumeration sweep point {sweep_acc:.4} vs tcmax_full run {full_acc:.4} (tolerance 0.02)"
        ),
    );
}

// ---- criterion 13: verify subcommand end to end ----

#[test]
fn criterion_13_verify_subcommand() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_tcmax"))
        .arg("verify")
        .arg("--out")
        .arg(dir.path().join("verify"))
        .output()
        .expect("spawn");
    let elapsed = started.elapsed().as_secs_f64();
    let text = String::from_utf8_lossy(&out.stdout);
    report_line(
        "13",
        out.status.code() == Some(0) && !text.contains("FAIL") && elapsed < 300.0,
        &format!(
            "verify exited {:?} in {elapsed:.1}s (budget 300s)",
            out.status.code()
        ),
    );
    assert!(
        dir.path().join("verify/verify_report.json").exists(),
        "report missing"
    );
}
