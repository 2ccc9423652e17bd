//! Training loops for the five strategies (joint, shared-head joint,
//! unimodal ensemble, and the three TC-maximizing loss forms) plus the
//! evaluation metrics: fused and per-modality test accuracy, mean
//! Jensen-Shannon divergence between the two modalities' predictions, and
//! per-modality prediction entropies with their weak/strong ratio.

use crate::error::{Error, Result};
use crate::losses::{
    argmax, joint_ce_loss, predict, tcmax_factored, tcmax_full, tcmax_sampled, unimodal_loss,
    Head, HeadKind, MultimodalModel, NegativeSampleSet,
};
use crate::nn::{Activation, DenseNet, Sgd};
use crate::prob::{categorical_entropy, js_divergence};
use crate::synth::{shuffle, LabeledDataset, TrainTestSplit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Joint,
    SharedHead,
    Unimodal,
    TcmaxFull,
    TcmaxSampled,
    TcmaxFactored,
}

impl Strategy {
    pub fn is_tcmax(self) -> bool {
        matches!(self, Strategy::TcmaxFull | Strategy::TcmaxSampled | Strategy::TcmaxFactored)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self {
            Strategy::Joint => "joint",
            Strategy::SharedHead => "shared_head",
            Strategy::Unimodal => "unimodal",
            Strategy::TcmaxFull => "tcmax_full",
            Strategy::TcmaxSampled => "tcmax_sampled",
            Strategy::TcmaxFactored => "tcmax_factored",
        };
        f.write_str(tag)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub strategy: Strategy,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Negative-pair count per batch; only valid for the sampled strategy,
    /// clamped to the per-batch pair grid.
    pub negatives: Option<usize>,
    /// Metrics cadence in epochs (the final epoch is always recorded).
    pub eval_every: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Schedule used by the modality-competition runs.
    pub fn competition_default(strategy: Strategy, seed: u64) -> Self {
        Self {
            strategy,
            epochs: 50,
            batch_size: 64,
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 1e-4,
            negatives: if strategy == Strategy::TcmaxSampled {
                Some(256)
            } else {
                None
            },
            eval_every: 10,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be positive".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::InvalidParameter("eval cadence must be positive".into()));
        }
        match (self.strategy, self.negatives) {
            (Strategy::TcmaxSampled, None) => Err(Error::InvalidParameter(
                "the sampled strategy needs a negative-pair count".into(),
            )),
            (Strategy::TcmaxSampled, Some(0)) => Err(Error::EmptyNegativeSet),
            (s, Some(_)) if s != Strategy::TcmaxSampled => Err(Error::InvalidParameter(format!(
                "negatives is only valid for tcmax_sampled, not {s}"
            ))),
            _ => Ok(()),
        }
    }
}

/// Model shape knobs used by the run configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub encoder_hidden: Vec<usize>,
    pub embed_dim: usize,
    pub head: HeadKind,
    /// Hidden widths of the concat-MLP head; ignored by the linear heads.
    #[serde(default)]
    pub head_hidden: Vec<usize>,
    pub activation: Activation,
}

impl ModelConfig {
    pub fn competition_default() -> Self {
        Self {
            encoder_hidden: vec![16],
            embed_dim: 8,
            head: HeadKind::LinearSum,
            head_hidden: vec![],
            activation: Activation::Relu,
        }
    }

    /// Builds and seeds a model for the given per-modality input widths.
    pub fn build(&self, input_dims: &[usize], num_classes: usize, seed: u64) -> Result<MultimodalModel> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut encoders = Vec::with_capacity(input_dims.len());
        for &dim in input_dims {
            let mut widths = vec![dim];
            widths.extend_from_slice(&self.encoder_hidden);
            widths.push(self.embed_dim);
            encoders.push(DenseNet::glorot(widths, self.activation, &mut rng)?);
        }
        let embed_dims = vec![self.embed_dim; input_dims.len()];
        let head = match self.head {
            HeadKind::LinearSum => {
                let mut h = Head::linear_sum(embed_dims, num_classes);
                h.init_glorot(&mut rng);
                h
            }
            HeadKind::SharedLinear => {
                let mut h = Head::shared_linear(self.embed_dim, input_dims.len(), num_classes);
                h.init_glorot(&mut rng);
                h
            }
            HeadKind::ConcatMlp => {
                let mut widths = vec![self.embed_dim * input_dims.len()];
                widths.extend_from_slice(&self.head_hidden);
                widths.push(num_classes);
                let net = DenseNet::glorot(widths, self.activation, &mut rng)?;
                Head::concat_mlp(net, embed_dims)?
            }
        };
        MultimodalModel::new(encoders, head)
    }
}

/// Test-set metrics of one model state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub multi_accuracy: f64,
    pub modality_accuracy: Vec<f64>,
    /// Mean Jensen-Shannon divergence between the two per-modality
    /// categoricals, in nats.
    pub js_divergence: f64,
    /// Mean Shannon entropy of each modality's predictions, in nats.
    pub modality_entropy: Vec<f64>,
    /// Weak-modality entropy over strong-modality entropy; "strong" is the
    /// modality with the higher per-modality accuracy, ties going to
    /// modality 0.
    pub entropy_ratio: f64,
    pub strong_modality: usize,
}

/// One metrics row of a training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    #[serde(flatten)]
    pub metrics: EvalMetrics,
    /// `-train_loss` for the TC-maximizing strategies (a lower-bound value).
    pub tc_lower_bound: Option<f64>,
}

fn check_strategy_head(strategy: Strategy, head: HeadKind) -> Result<()> {
    let ok = match strategy {
        Strategy::Joint | Strategy::TcmaxFull | Strategy::TcmaxSampled => true,
        Strategy::SharedHead => head == HeadKind::SharedLinear,
        Strategy::Unimodal | Strategy::TcmaxFactored => head != HeadKind::ConcatMlp,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::IncompatibleStrategy {
            strategy: strategy.to_string(),
            head: format!("{head:?}"),
        })
    }
}

/// Trains in place and returns the records emitted at the eval cadence.
/// Deterministic given `(config, model, data)`: the per-epoch shuffle and the
/// negative sampling consume independent seeded streams, so switching the
/// sampled loss to full enumeration leaves the data order untouched.
pub fn train(
    model: &mut MultimodalModel,
    data: &TrainTestSplit,
    config: &TrainConfig,
) -> Result<Vec<EpochRecord>> {
    config.validate()?;
    check_strategy_head(config.strategy, model.head().kind())?;
    if data.train.is_empty() || data.test.is_empty() {
        return Err(Error::EmptyInput("train/test split".into()));
    }

    let train_batch = data.train.to_batch()?;
    let n = train_batch.len();
    let mut opt = Sgd::new(
        config.learning_rate,
        config.momentum,
        config.weight_decay,
        model.num_params(),
    )?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);
    let mut neg_rng = ChaCha8Rng::seed_from_u64(config.seed);
    neg_rng.set_stream(2);

    let mut order: Vec<usize> = (0..n).collect();
    let mut records = Vec::new();

    for epoch in 0..config.epochs {
        shuffle(&mut order, &mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch = train_batch.select(chunk);
            let (loss, grad) = match config.strategy {
                Strategy::Joint | Strategy::SharedHead => joint_ce_loss(model, &batch),
                Strategy::Unimodal => unimodal_loss(model, &batch),
                Strategy::TcmaxFull => tcmax_full(model, &batch),
                Strategy::TcmaxFactored => tcmax_factored(model, &batch),
                Strategy::TcmaxSampled => {
                    let grid = batch.len() * batch.len();
                    let count = config.negatives.unwrap().min(grid);
                    let negs = NegativeSampleSet::sample(batch.len(), count, neg_rng.random())?;
                    tcmax_sampled(model, &batch, &negs)
                }
            }
            .map_err(|e| match e {
                Error::NonFinite(_) => Error::NonFiniteLossAtEpoch { epoch },
                other => other,
            })?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLossAtEpoch { epoch });
            }
            loss_sum += loss * batch.len() as f64;

            let mut params = model.params_flat();
            opt.step(&mut params, &grad)
                .map_err(|_| Error::NonFiniteLossAtEpoch { epoch })?;
            model.set_params_flat(&params)?;
        }
        let train_loss = loss_sum / n as f64;

        let done = epoch + 1 == config.epochs;
        if (epoch + 1) % config.eval_every == 0 || done {
            let metrics = evaluate(model, &data.test)?;
            records.push(EpochRecord {
                epoch: epoch + 1,
                train_loss,
                metrics,
                tc_lower_bound: config.strategy.is_tcmax().then_some(-train_loss),
            });
        }
    }
    Ok(records)
}

/// Test-set evaluation: fused accuracy from the prediction rule, per-modality
/// accuracy from each modality's own logits, mean JS divergence between the
/// two per-modality categoricals, and mean per-modality prediction entropies.
pub fn evaluate(model: &MultimodalModel, test: &LabeledDataset) -> Result<EvalMetrics> {
    if test.is_empty() {
        return Err(Error::EmptyInput("test split".into()));
    }
    if model.num_modalities() != 2 || test.num_modalities() != 2 {
        return Err(Error::InvalidParameter(
            "evaluation metrics are defined for exactly two modalities".into(),
        ));
    }
    let n = test.len();
    let mut multi_correct = 0usize;
    let mut modality_correct = [0usize; 2];
    let mut entropy_sum = [0.0f64; 2];
    let mut js_sum = 0.0;

    for i in 0..n {
        let features: Vec<&[f64]> = (0..2).map(|m| test.features(m).row(i)).collect();
        let y = test.labels()[i];

        let fused = predict(model, &features)?;
        if argmax(&fused) == y {
            multi_correct += 1;
        }

        let mut per_modality = Vec::with_capacity(2);
        for m in 0..2 {
            let logits = model.modality_logits(m, features[m])?;
            let lse = crate::nn::log_sum_exp(&logits)?;
            let probs: Vec<f64> = logits.iter().map(|l| (l - lse).exp()).collect();
            if argmax(&probs) == y {
                modality_correct[m] += 1;
            }
            entropy_sum[m] += categorical_entropy(&probs);
            per_modality.push(probs);
        }
        js_sum += js_divergence(&per_modality[0], &per_modality[1])?;
    }

    let nf = n as f64;
    let modality_accuracy = vec![modality_correct[0] as f64 / nf, modality_correct[1] as f64 / nf];
    let modality_entropy = vec![entropy_sum[0] / nf, entropy_sum[1] / nf];
    let strong = if modality_accuracy[1] > modality_accuracy[0] { 1 } else { 0 };
    let weak = 1 - strong;
    Ok(EvalMetrics {
        multi_accuracy: multi_correct as f64 / nf,
        modality_accuracy,
        js_divergence: js_sum / nf,
        entropy_ratio: modality_entropy[weak] / modality_entropy[strong],
        strong_modality: strong,
        modality_entropy,
    })
}

/// Writes records as CSV, one row per record; the lower-bound column is
/// empty for non-TC strategies.
pub fn write_records_csv<W: Write>(mut w: W, records: &[EpochRecord]) -> Result<()> {
    writeln!(
        w,
        "epoch,train_loss,multi_accuracy,accuracy_m0,accuracy_m1,js_divergence,entropy_m0,entropy_m1,entropy_ratio,strong_modality,tc_lower_bound"
    )?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.epoch,
            r.train_loss,
            r.metrics.multi_accuracy,
            r.metrics.modality_accuracy[0],
            r.metrics.modality_accuracy[1],
            r.metrics.js_divergence,
            r.metrics.modality_entropy[0],
            r.metrics.modality_entropy[1],
            r.metrics.entropy_ratio,
            r.metrics.strong_modality,
            r.tc_lower_bound.map(|b| b.to_string()).unwrap_or_default(),
        )?;
    }
    Ok(())
}

pub fn save_records_csv(path: &Path, records: &[EpochRecord]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_records_csv(std::io::BufWriter::new(file), records)
}
