//! Command-line entry points: `tc` (exact report for a distribution file),
//! `estimate` (critic fitting with a bound trace), `train` (synthetic-data
//! training runs with seed sweeps and negative-count sweeps), and `verify`
//! (the identity/inequality suite).
//!
//! Every run directory receives a `manifest.json` with the resolved config,
//! seeds, tool version, output paths, and wall-clock duration; re-running
//! from the echoed config reproduces the run bit-identically. Exit codes:
//! 0 success, 1 usage/config error, 2 invariant or verification failure,
//! 3 numerical abort.

use crate::error::{Error, Result};
use crate::estimators::{
    save_trace_csv, smoothed_final_estimate, tcne_fit_neural, tcne_fit_tabular, NeuralCritic,
    TableSampler, TcneConfig,
};

use crate::nn::{log_sum_exp, Activation, DenseNet};
use crate::prob::JointDistribution;
use crate::synth::{generate, save_dataset, GeneratorConfig};
use crate::trainer::{save_records_csv, train, EpochRecord, ModelConfig, Strategy, TrainConfig};
use crate::verify::{corrupted_log_sum_exp, run_all, VerifyReport};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Instant;

const TRAIN_CONFIG_HELP: &str = "\
Config file format (TOML, unknown keys are errors):

  [generator]               synthetic data (see `[[generator.modalities]]`)
    num_classes             label alphabet size
    coupling                shared-structure strength in [0, 1]
    train_size, test_size   sample counts
    seed                    base generator seed (overridden by --seeds)

  [[generator.modalities]]  one block per modality
    feature_dim             feature width (alphabet size when discrete)
    signal                  class separation, >= 0 (unitless scale factor)
    noise                   noise standard deviation, > 0
    variant                 \"gaussian_clusters\" | \"discrete_table\"

  [model]
    encoder_hidden          hidden widths of each encoder MLP
    embed_dim               per-modality embedding width
    head                    \"linear_sum\" | \"shared_linear\" | \"concat_mlp\"
    head_hidden             hidden widths of the concat head (optional)
    activation              \"relu\" | \"tanh\"

  [train]
    strategy                \"joint\" | \"shared_head\" | \"unimodal\" |
                            \"tcmax_full\" | \"tcmax_sampled\" | \"tcmax_factored\"
    epochs, batch_size      schedule
    learning_rate           SGD step size (per step)
    momentum                SGD momentum in [0, 1)
    weight_decay            L2 coefficient, >= 0
    negatives               pair count per batch (tcmax_sampled only)
    eval_every              metrics cadence in epochs
    seed                    training seed (overridden by --seeds)

Losses and the reported TC lower bound are in nats; accuracies in [0, 1].";

#[derive(Parser)]
#[command(
    name = "tcmax",
    version,
    about = "Exact total-correlation measures, DV-bound estimators, and TC-maximizing multimodal training runs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriticKind {
    Tabular,
    Neural,
}

#[derive(Subcommand)]
pub enum Command {
    /// Exact total correlation (both forms), pairwise mutual informations,
    /// and the label decompositions of a distribution file
    Tc {
        /// JSON file: {"alphabet_sizes": [..], "mass": [..]}, row-major
        dist: PathBuf,
        /// Display information quantities in bits instead of nats
        #[arg(long)]
        bits: bool,
    },
    /// Fit a critic to a distribution file and write the DV bound trace
    Estimate {
        /// JSON file: {"alphabet_sizes": [..], "mass": [..]}, row-major
        dist: PathBuf,
        /// Critic family: exact full-batch (tabular) or minibatch (neural)
        #[arg(long, value_enum, default_value = "tabular")]
        critic: CriticKind,
        /// Ascent iterations
        #[arg(long, default_value_t = 20_000)]
        iters: usize,
        /// Step size per iteration
        #[arg(long, default_value_t = 1.0)]
        lr: f64,
        /// Sampler/initialization seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Minibatch size (neural critic only)
        #[arg(long, default_value_t = 256)]
        batch: usize,
        /// Output directory (trace.csv, summary.json, manifest.json)
        #[arg(long, default_value = "tcmax_out")]
        out: PathBuf,
        /// Display information quantities in bits instead of nats
        #[arg(long)]
        bits: bool,
    },
    /// Train on synthetic data per a TOML config, with optional seed and
    /// negative-count sweeps
    #[command(after_long_help = TRAIN_CONFIG_HELP)]
    Train {
        /// Run config (see --help for the schema)
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seed sweep; each seed drives the generator,
        /// model initialization, and training; medians are reported
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Comma-separated negative-pair counts; one tcmax_sampled run per
        /// count (requires strategy = "tcmax_sampled")
        #[arg(long, value_delimiter = ',')]
        negatives: Option<Vec<usize>>,
        /// Output directory
        #[arg(long, default_value = "tcmax_out")]
        out: PathBuf,
    },
    /// Run the full identity/inequality suite and exit non-zero on failure
    Verify {
        /// Write verify_report.json and manifest.json here
        #[arg(long)]
        out: Option<PathBuf>,
        /// Corrupt the log-sum-exp inside the DV-inequality check (test hook
        /// proving the suite fails loudly under a numerical fault)
        #[arg(long, hide = true)]
        inject_lse_fault: bool,
    },
}

/// Full training-run config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub generator: GeneratorConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub version: String,
    pub outputs: Vec<String>,
    pub duration_secs: f64,
}

impl RunManifest {
    /// Written atomically at run end: temp file in the same directory, then
    /// rename.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let tmp = dir.join("manifest.json.tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(self)?)?;
        std::fs::rename(&tmp, dir.join("manifest.json"))?;
        Ok(())
    }
}

/// Maps an error to the documented exit code.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::NonFinite(_)
        | Error::NonFiniteLoss { .. }
        | Error::NonFiniteLossAtEpoch { .. } => 3,
        Error::InvalidDistribution(_) | Error::AbsoluteContinuity { .. } => 2,
        _ => 1,
    }
}

/// Parses argv and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = args.into_iter().map(|a| a.into()).collect();
    let command_line = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own help/version output
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, &command_line) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn dispatch(command: Command, command_line: &str) -> Result<i32> {
    match command {
        Command::Tc { dist, bits } => cmd_tc(&dist, bits),
        Command::Estimate {
            dist,
            critic,
            iters,
            lr,
            seed,
            batch,
            out,
            bits,
        } => cmd_estimate(&dist, critic, iters, lr, seed, batch, &out, bits, command_line),
        Command::Train {
            config,
            seeds,
            negatives,
            out,
        } => cmd_train(&config, seeds, negatives, &out, command_line),
        Command::Verify {
            out,
            inject_lse_fault,
        } => cmd_verify(out.as_deref(), inject_lse_fault, command_line),
    }
}

struct UnitDisplay {
    bits: bool,
}

impl UnitDisplay {
    fn value(&self, nats: f64) -> f64 {
        if self.bits {
            nats / std::f64::consts::LN_2
        } else {
            nats
        }
    }

    fn unit(&self) -> &'static str {
        if self.bits {
            "bits"
        } else {
            "nats"
        }
    }
}

/// `tc`: exact report with both TC forms, pairwise MIs, and residuals.
pub fn cmd_tc(dist_path: &Path, bits: bool) -> Result<i32> {
    let dist = JointDistribution::load(dist_path)?;
    let u = UnitDisplay { bits };
    let vars = dist.num_variables();
    println!(
        "variables: {} (alphabets {:?}), label = variable {} by convention",
        vars,
        dist.alphabet_sizes(),
        vars - 1
    );

    if vars < 2 {
        return Err(Error::TooFewVariables {
            needed: 2,
            found: vars,
        });
    }
    let tc_entropy = dist.total_correlation()?;
    let tc_kl = dist.kl_divergence(&dist.product_of_marginals()?)?;
    println!(
        "total correlation (entropy form): {} {}",
        u.value(tc_entropy),
        u.unit()
    );
    println!(
        "total correlation (KL form):      {} {}",
        u.value(tc_kl),
        u.unit()
    );
    println!("dual-form residual: {}", (tc_entropy - tc_kl).abs());

    println!("pairwise mutual information ({}):", u.unit());
    for a in 0..vars {
        for b in a + 1..vars {
            let mi = dist.mutual_information(
                &crate::prob::VariableSubset::new(vec![a])?,
                &crate::prob::VariableSubset::new(vec![b])?,
            )?;
            println!("  I(x{a}; x{b}) = {}", u.value(mi.max(0.0)));
        }
    }

    let dec = dist.label_decompositions()?;
    let route1 = dec.fused_mi + dec.modality_tc;
    let route2: f64 = dec.per_label_mi.iter().sum::<f64>() + dec.conditional_alignment;
    println!(
        "decomposition [I(y; modalities) + TC(modalities)]: {} {} (residual {})",
        u.value(route1),
        u.unit(),
        (route1 - tc_entropy).abs()
    );
    println!(
        "decomposition [sum_m I(y; x_m) + alignment given y]: {} {} (residual {})",
        u.value(route2),
        u.unit(),
        (route2 - tc_entropy).abs()
    );
    Ok(0)
}

#[derive(Serialize)]
struct EstimateSummary {
    critic: String,
    exact_tc_nats: f64,
    final_bound_nats: f64,
    smoothed_bound_nats: f64,
    gap_nats: f64,
    iters: usize,
}

#[allow(clippy::too_many_arguments)]
fn cmd_estimate(
    dist_path: &Path,
    critic: CriticKind,
    iters: usize,
    lr: f64,
    seed: u64,
    batch: usize,
    out: &Path,
    bits: bool,
    command_line: &str,
) -> Result<i32> {
    let started = Instant::now();
    let dist = JointDistribution::load(dist_path)?;
    let exact_tc = dist.total_correlation()?;
    std::fs::create_dir_all(out)?;

    let (trace, tag) = match critic {
        CriticKind::Tabular => {
            let (_, trace) = tcne_fit_tabular(&dist, iters, lr)?;
            (trace, "tabular")
        }
        CriticKind::Neural => {
            let width = crate::estimators::one_hot_width(dist.alphabet_sizes());
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
            let net = DenseNet::glorot(vec![width, 32, 32, 1], Activation::Relu, &mut rng)?;
            let mut neural = NeuralCritic::new(net, dist.alphabet_sizes().to_vec())?;
            let mut sampler = TableSampler::new(&dist, seed)?;
            let config = TcneConfig {
                iters,
                batch_size: batch,
                learning_rate: lr,
                momentum: 0.9,
                ..TcneConfig::default()
            };
            (tcne_fit_neural(&mut sampler, &mut neural, &config)?, "neural")
        }
    };

    let trace_path = out.join("trace.csv");
    save_trace_csv(&trace_path, &trace)?;
    let final_bound = trace.last().map(|e| e.lower_bound).unwrap_or(f64::NAN);
    let smoothed = smoothed_final_estimate(&trace);
    let summary = EstimateSummary {
        critic: tag.to_string(),
        exact_tc_nats: exact_tc,
        final_bound_nats: final_bound,
        smoothed_bound_nats: smoothed,
        gap_nats: exact_tc - smoothed,
        iters,
    };
    let summary_path = out.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;

    let u = UnitDisplay { bits };
    println!("exact TC:        {} {}", u.value(exact_tc), u.unit());
    println!("final bound:     {} {}", u.value(final_bound), u.unit());
    println!("smoothed bound:  {} {}", u.value(smoothed), u.unit());
    println!("gap:             {} {}", u.value(exact_tc - smoothed), u.unit());

    RunManifest {
        command: command_line.to_string(),
        config: serde_json::json!({
            "dist": dist_path.display().to_string(),
            "critic": tag,
            "iters": iters,
            "lr": lr,
            "seed": seed,
            "batch": batch,
        }),
        seeds: vec![seed],
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: vec![
            trace_path.display().to_string(),
            summary_path.display().to_string(),
        ],
        duration_secs: started.elapsed().as_secs_f64(),
    }
    .write(out)?;
    Ok(0)
}

#[derive(Serialize)]
struct RunSummary {
    seed: u64,
    strategy: String,
    final_record: EpochRecord,
}

/// One seeded training run end to end; returns the final record.
pub fn run_single_training(
    run_file: &RunFile,
    seed: u64,
    out_dir: &Path,
) -> Result<EpochRecord> {
    let mut generator = run_file.generator.clone();
    generator.seed = seed;
    let mut train_config = run_file.train.clone();
    train_config.seed = seed;

    let split = generate(&generator)?;
    let input_dims: Vec<usize> = (0..split.train.num_modalities())
        .map(|m| split.train.features(m).dim())
        .collect();
    let mut model = run_file
        .model
        .build(&input_dims, generator.num_classes, seed)?;
    let records = train(&mut model, &split, &train_config)?;
    let final_record = records
        .last()
        .cloned()
        .ok_or_else(|| Error::InvalidParameter("no records (zero epochs?)".into()))?;

    std::fs::create_dir_all(out_dir)?;
    save_records_csv(&out_dir.join("records.csv"), &records)?;
    save_dataset(&out_dir.join("dataset.json"), &generator, &split)?;
    model.save(&out_dir.join("model.json"))?;
    let summary = RunSummary {
        seed,
        strategy: train_config.strategy.to_string(),
        final_record: final_record.clone(),
    };
    std::fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    eprintln!(
        "run seed {seed}: strong modality = {} (per-modality accuracy {:?})",
        final_record.metrics.strong_modality, final_record.metrics.modality_accuracy
    );
    Ok(final_record)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Per-metric medians over a set of final records.
pub fn median_metrics(records: &[EpochRecord]) -> serde_json::Value {
    let grab = |f: &dyn Fn(&EpochRecord) -> f64| {
        let mut v: Vec<f64> = records.iter().map(f).collect();
        median(&mut v)
    };
    serde_json::json!({
        "multi_accuracy": grab(&|r| r.metrics.multi_accuracy),
        "accuracy_m0": grab(&|r| r.metrics.modality_accuracy[0]),
        "accuracy_m1": grab(&|r| r.metrics.modality_accuracy[1]),
        "js_divergence": grab(&|r| r.metrics.js_divergence),
        "entropy_m0": grab(&|r| r.metrics.modality_entropy[0]),
        "entropy_m1": grab(&|r| r.metrics.modality_entropy[1]),
        "entropy_ratio": grab(&|r| r.metrics.entropy_ratio),
        "train_loss": grab(&|r| r.train_loss),
    })
}

/// Loads and validates a run config file (unknown keys are errors).
pub fn load_run_file(path: &Path) -> Result<RunFile> {
    let text = std::fs::read_to_string(path)?;
    let run_file: RunFile = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    run_file.generator.validate()?;
    run_file.train.validate()?;
    Ok(run_file)
}

fn cmd_train(
    config_path: &Path,
    seeds: Option<Vec<u64>>,
    negatives: Option<Vec<usize>>,
    out: &Path,
    command_line: &str,
) -> Result<i32> {
    let started = Instant::now();
    let run_file = load_run_file(config_path)?;
    let seeds = seeds.unwrap_or_else(|| vec![run_file.train.seed]);
    if seeds.is_empty() {
        return Err(Error::Config("empty seed list".into()));
    }
    std::fs::create_dir_all(out)?;
    let mut outputs = Vec::new();

    if let Some(counts) = &negatives {
        // negative-count sweep: one tcmax_sampled run per count (per seed)
        if run_file.train.strategy != Strategy::TcmaxSampled {
            return Err(Error::Config(
                "--negatives requires strategy = \"tcmax_sampled\"".into(),
            ));
        }
        if counts.is_empty() {
            return Err(Error::Config("empty negative-count list".into()));
        }
        let mut rows = Vec::new();
        for &count in counts {
            let mut finals = Vec::new();
            for &seed in &seeds {
                let mut sweep_file = run_file.clone();
                sweep_file.train.negatives = Some(count);
                let dir = out.join(format!("negatives_{count}/seed_{seed}"));
                finals.push(run_single_training(&sweep_file, seed, &dir)?);
                outputs.push(dir.display().to_string());
            }
            let mut accs: Vec<f64> = finals.iter().map(|r| r.metrics.multi_accuracy).collect();
            rows.push((count, median(&mut accs)));
        }
        let sweep_path = out.join("negatives_sweep.csv");
        let mut csv = String::from("negatives,multi_accuracy\n");
        for (count, acc) in &rows {
            csv.push_str(&format!("{count},{acc}\n"));
        }
        std::fs::write(&sweep_path, csv)?;
        outputs.push(sweep_path.display().to_string());
        println!("negative-count sweep:");
        for (count, acc) in &rows {
            println!("  negatives {count}: median multi accuracy {acc}");
        }
    } else {
        let mut finals = Vec::new();
        for &seed in &seeds {
            let dir = out.join(format!("seed_{seed}"));
            finals.push(run_single_training(&run_file, seed, &dir)?);
            outputs.push(dir.display().to_string());
        }
        if seeds.len() > 1 {
            let medians = median_metrics(&finals);
            let medians_path = out.join("medians.json");
            std::fs::write(&medians_path, serde_json::to_string_pretty(&medians)?)?;
            outputs.push(medians_path.display().to_string());
            println!("medians over {} seeds: {medians}", seeds.len());
        } else {
            println!(
                "final multi accuracy: {}",
                finals[0].metrics.multi_accuracy
            );
        }
    }

    RunManifest {
        command: command_line.to_string(),
        config: serde_json::to_value(&run_file)?,
        seeds,
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs,
        duration_secs: started.elapsed().as_secs_f64(),
    }
    .write(out)?;
    Ok(0)
}

fn print_report(report: &VerifyReport) {
    for c in &report.checks {
        println!(
            "{} {:<36} measured {} (threshold {}, {:.2}s)",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.threshold,
            c.seconds
        );
    }
}

fn cmd_verify(out: Option<&Path>, inject_fault: bool, command_line: &str) -> Result<i32> {
    let started = Instant::now();
    let lse = if inject_fault {
        corrupted_log_sum_exp
    } else {
        log_sum_exp
    };
    let report = run_all(lse);
    print_report(&report);
    let pass = report.all_pass();
    println!(
        "{}: {}/{} checks passed in {:.1}s",
        if pass { "OK" } else { "FAILED" },
        report.checks.iter().filter(|c| c.pass).count(),
        report.checks.len(),
        started.elapsed().as_secs_f64()
    );

    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let rows: Vec<serde_json::Value> = report
            .checks
            .iter()
            .map(|c| {
                serde_json::json!({
                    "name": c.name,
                    "measured": c.measured,
                    "threshold": c.threshold,
                    "pass": c.pass,
                    "seconds": c.seconds,
                })
            })
            .collect();
        let report_path = dir.join("verify_report.json");
        std::fs::write(&report_path, serde_json::to_string_pretty(&rows)?)?;
        RunManifest {
            command: command_line.to_string(),
            config: serde_json::json!({ "inject_lse_fault": inject_fault }),
            seeds: vec![],
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: vec![report_path.display().to_string()],
            duration_secs: started.elapsed().as_secs_f64(),
        }
        .write(dir)?;
    }
    Ok(if pass { 0 } else { 2 })
}
