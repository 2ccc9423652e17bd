//! Seeded generators of two-modality labeled data with controllable
//! per-modality informativeness.
//!
//! The Gaussian variant draws class-conditional clusters per modality
//! (separation scaled by the modality's signal strength) plus a shared latent
//! perturbation whose weight is the coupling strength, so one modality can be
//! made dominant and the other weak while the two stay dependent given the
//! label. The discrete variant samples from an explicit joint table (returned
//! as ground truth) so the exact total correlation of the generating process
//! is certifiable.

use crate::error::{Error, Result};
use crate::losses::{Batch, FeatureMatrix};
use crate::nn::{log_sum_exp, Activation, DenseNet, Sgd};
use crate::prob::JointDistribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Shared-latent width for the Gaussian variant.
const LATENT_DIM: usize = 4;

/// Discrete tables are capped so the oracle can certify them exactly.
pub const MAX_DISCRETE_CELLS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModalityVariant {
    GaussianClusters,
    DiscreteTable,
}

/// Per-modality generation knobs. For the discrete variant `feature_dim` is
/// the alphabet size and features are one-hot of that width.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalitySpec {
    pub feature_dim: usize,
    /// Class separation; 0 makes the modality pure noise.
    pub signal: f64,
    pub noise: f64,
    pub variant: ModalityVariant,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub num_classes: usize,
    pub modalities: Vec<ModalitySpec>,
    /// Strength of the shared structure linking the modalities given the
    /// label, in [0, 1].
    pub coupling: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
}

impl GeneratorConfig {
    /// The default modality-competition scenario: a strong modality A and a
    /// weak-but-learnable modality B.
    pub fn competition_default(seed: u64) -> Self {
        Self {
            num_classes: 4,
            modalities: vec![
                ModalitySpec {
                    feature_dim: 8,
                    signal: 3.0,
                    noise: 1.0,
                    variant: ModalityVariant::GaussianClusters,
                },
                ModalitySpec {
                    feature_dim: 8,
                    signal: 0.8,
                    noise: 1.0,
                    variant: ModalityVariant::GaussianClusters,
                },
            ],
            coupling: 0.5,
            train_size: 2000,
            test_size: 1000,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 classes, got {}",
                self.num_classes
            )));
        }
        if self.modalities.is_empty() {
            return Err(Error::InvalidParameter("no modalities configured".into()));
        }
        if self.train_size == 0 || self.test_size == 0 {
            return Err(Error::InvalidParameter("train and test sizes must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.coupling) {
            return Err(Error::InvalidParameter(format!(
                "coupling must be in [0, 1], got {}",
                self.coupling
            )));
        }
        let variant = self.modalities[0].variant;
        for (m, spec) in self.modalities.iter().enumerate() {
            if spec.feature_dim == 0 {
                return Err(Error::InvalidParameter(format!("modality {m} has zero dimension")));
            }
            if spec.signal < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "modality {m} signal must be non-negative, got {}",
                    spec.signal
                )));
            }
            if !(spec.noise > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "modality {m} noise must be positive, got {}",
                    spec.noise
                )));
            }
            if spec.variant != variant {
                return Err(Error::InvalidParameter(
                    "all modalities must use the same variant".into(),
                ));
            }
        }
        if variant == ModalityVariant::DiscreteTable {
            let cells: usize = self
                .modalities
                .iter()
                .map(|s| s.feature_dim)
                .product::<usize>()
                * self.num_classes;
            if cells > MAX_DISCRETE_CELLS {
                return Err(Error::SpaceTooLarge {
                    cells,
                    cap: MAX_DISCRETE_CELLS,
                });
            }
        }
        Ok(())
    }

    pub fn variant(&self) -> ModalityVariant {
        self.modalities[0].variant
    }
}

/// One generated split: per-modality feature matrices, labels, and (for the
/// discrete variant) the exact generating table over `(x^1.., y)`.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    features: Vec<FeatureMatrix>,
    labels: Vec<usize>,
    num_classes: usize,
    ground_truth: Option<JointDistribution>,
}

impl LabeledDataset {
    pub fn new(
        features: Vec<FeatureMatrix>,
        labels: Vec<usize>,
        num_classes: usize,
        ground_truth: Option<JointDistribution>,
    ) -> Result<Self> {
        let n = labels.len();
        for f in &features {
            if f.rows() != n {
                return Err(Error::ShapeMismatch {
                    expected: format!("{n} rows"),
                    actual: format!("{} rows", f.rows()),
                });
            }
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::LabelOutOfRange {
                label: *bad,
                num_classes,
            });
        }
        if let Some(gt) = &ground_truth {
            if *gt.alphabet_sizes().last().unwrap() != num_classes {
                return Err(Error::ShapeMismatch {
                    expected: format!("label alphabet {num_classes}"),
                    actual: format!("{}", gt.alphabet_sizes().last().unwrap()),
                });
            }
        }
        Ok(Self {
            features,
            labels,
            num_classes,
            ground_truth,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_modalities(&self) -> usize {
        self.features.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self, m: usize) -> &FeatureMatrix {
        &self.features[m]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn ground_truth(&self) -> Option<&JointDistribution> {
        self.ground_truth.as_ref()
    }

    pub fn to_batch(&self) -> Result<Batch> {
        Batch::new(self.features.clone(), self.labels.clone())
    }
}

/// Train and test splits drawn from one seeded generation pass.
#[derive(Debug, Clone)]
pub struct TrainTestSplit {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

/// Deterministic generation from a validated config.
pub fn generate(config: &GeneratorConfig) -> Result<TrainTestSplit> {
    config.validate()?;
    match config.variant() {
        ModalityVariant::GaussianClusters => generate_gaussian(config),
        ModalityVariant::DiscreteTable => generate_discrete(config),
    }
}

fn generate_gaussian(config: &GeneratorConfig) -> Result<TrainTestSplit> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let classes = config.num_classes;
    let num_m = config.modalities.len();

    // class means and shared-latent projections, frozen per seed
    let means: Vec<Vec<Vec<f64>>> = config
        .modalities
        .iter()
        .map(|spec| {
            (0..classes)
                .map(|_| (0..spec.feature_dim).map(|_| rng.sample(StandardNormal)).collect())
                .collect()
        })
        .collect();
    let projections: Vec<Vec<f64>> = config
        .modalities
        .iter()
        .map(|spec| {
            (0..spec.feature_dim * LATENT_DIM)
                .map(|_| rng.sample::<f64, _>(StandardNormal) / (LATENT_DIM as f64).sqrt())
                .collect()
        })
        .collect();

    let draw_split = |size: usize, rng: &mut ChaCha8Rng| -> Result<LabeledDataset> {
        let mut feats: Vec<Vec<f64>> = (0..num_m).map(|_| Vec::new()).collect();
        let mut labels = Vec::with_capacity(size);
        let mut latent = vec![0.0; LATENT_DIM];
        for _ in 0..size {
            let y = rng.random_range(0..classes);
            labels.push(y);
            for l in latent.iter_mut() {
                *l = rng.sample(StandardNormal);
            }
            for (m, spec) in config.modalities.iter().enumerate() {
                let proj = &projections[m];
                for d in 0..spec.feature_dim {
                    let mut shared = 0.0;
                    for (l, &u) in latent.iter().enumerate() {
                        shared += proj[d * LATENT_DIM + l] * u;
                    }
                    let eps: f64 = rng.sample(StandardNormal);
                    feats[m].push(
                        spec.signal * means[m][y][d]
                            + config.coupling * shared
                            + spec.noise * eps,
                    );
                }
            }
        }
        let features = feats
            .into_iter()
            .zip(&config.modalities)
            .map(|(data, spec)| FeatureMatrix::new(size, spec.feature_dim, data))
            .collect::<Result<_>>()?;
        LabeledDataset::new(features, labels, classes, None)
    };

    let train = draw_split(config.train_size, &mut rng)?;
    let test = draw_split(config.test_size, &mut rng)?;
    Ok(TrainTestSplit { train, test })
}

/// The explicit generating table of the discrete variant: the label is
/// uniform, and given `y` the modalities are a mixture of independent noisy
/// pointers at `y` (weight `1 - coupling`) and a shared-offset channel that
/// moves all modalities together (weight `coupling`), which creates
/// conditional dependence between them.
pub fn discrete_joint_table(config: &GeneratorConfig) -> Result<JointDistribution> {
    config.validate()?;
    if config.variant() != ModalityVariant::DiscreteTable {
        return Err(Error::InvalidParameter(
            "discrete_joint_table requires the discrete variant".into(),
        ));
    }
    let classes = config.num_classes;
    let num_m = config.modalities.len();
    let sizes: Vec<usize> = config
        .modalities
        .iter()
        .map(|s| s.feature_dim)
        .chain(std::iter::once(classes))
        .collect();
    let shared_span = config.modalities.iter().map(|s| s.feature_dim).min().unwrap();

    let cells: usize = sizes.iter().product();
    let mut mass = vec![0.0; cells];
    let probe = JointDistribution::uniform(sizes.clone())?;
    for idx in 0..cells {
        let coords = probe.coords_of(idx);
        let y = coords[num_m];

        // independent branch: each modality points at y with sharpness
        // signal/(1+signal), else uniform
        let mut indep = 1.0;
        for (m, spec) in config.modalities.iter().enumerate() {
            let k = spec.feature_dim;
            let alpha = spec.signal / (1.0 + spec.signal);
            let hit = if coords[m] == y % k { alpha } else { 0.0 };
            indep *= hit + (1.0 - alpha) / k as f64;
        }

        // shared branch: one uniform offset u shifts every modality together
        let mut shared = 0.0;
        for u in 0..shared_span {
            let all_match = (0..num_m).all(|m| {
                coords[m] == (y + u) % config.modalities[m].feature_dim
            });
            if all_match {
                shared += 1.0 / shared_span as f64;
            }
        }

        mass[idx] =
            ((1.0 - config.coupling) * indep + config.coupling * shared) / classes as f64;
    }
    JointDistribution::from_weights(sizes, mass)
}

fn generate_discrete(config: &GeneratorConfig) -> Result<TrainTestSplit> {
    let table = discrete_joint_table(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut cdf = Vec::with_capacity(table.num_cells());
    let mut acc = 0.0;
    for &p in table.mass() {
        acc += p;
        cdf.push(acc);
    }
    let num_m = config.modalities.len();

    let draw_split = |size: usize, rng: &mut ChaCha8Rng| -> Result<LabeledDataset> {
        let mut feats: Vec<Vec<f64>> = (0..num_m).map(|_| Vec::new()).collect();
        let mut labels = Vec::with_capacity(size);
        for _ in 0..size {
            let u: f64 = rng.random();
            let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            let coords = table.coords_of(idx);
            for (m, spec) in config.modalities.iter().enumerate() {
                let mut one_hot = vec![0.0; spec.feature_dim];
                one_hot[coords[m]] = 1.0;
                feats[m].extend_from_slice(&one_hot);
            }
            labels.push(coords[num_m]);
        }
        let features = feats
            .into_iter()
            .zip(&config.modalities)
            .map(|(data, spec)| FeatureMatrix::new(size, spec.feature_dim, data))
            .collect::<Result<_>>()?;
        LabeledDataset::new(features, labels, config.num_classes, Some(table.clone()))
    };

    let train = draw_split(config.train_size, &mut rng)?;
    let test = draw_split(config.test_size, &mut rng)?;
    Ok(TrainTestSplit { train, test })
}

/// Plug-in frequency table of a discrete dataset (features must be exact
/// one-hot rows); the label is the last variable.
pub fn empirical_distribution(dataset: &LabeledDataset) -> Result<JointDistribution> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("dataset".into()));
    }
    let mut sizes: Vec<usize> = (0..dataset.num_modalities())
        .map(|m| dataset.features(m).dim())
        .collect();
    sizes.push(dataset.num_classes());

    let cells: usize = sizes.iter().product();
    let mut counts = vec![0.0; cells];
    for i in 0..dataset.len() {
        let mut idx = 0usize;
        for (m, &k) in sizes[..sizes.len() - 1].iter().enumerate() {
            let row = dataset.features(m).row(i);
            let s = decode_one_hot(row)?;
            idx = idx * k + s;
        }
        idx = idx * dataset.num_classes() + dataset.labels()[i];
        counts[idx] += 1.0;
    }
    JointDistribution::from_weights(sizes, counts)
}

fn decode_one_hot(row: &[f64]) -> Result<usize> {
    let mut hit = None;
    for (i, &v) in row.iter().enumerate() {
        if v == 1.0 && hit.is_none() {
            hit = Some(i);
        } else if v != 0.0 {
            return Err(Error::InvalidParameter(
                "empirical distribution requires one-hot (discrete) features".into(),
            ));
        }
    }
    hit.ok_or_else(|| {
        Error::InvalidParameter("empirical distribution requires one-hot (discrete) features".into())
    })
}

/// Test accuracy of a softmax linear probe trained on one modality's
/// features; the independent oracle for "how informative is this modality
/// alone".
pub fn linear_probe_accuracy(
    train_features: &FeatureMatrix,
    train_labels: &[usize],
    test_features: &FeatureMatrix,
    test_labels: &[usize],
    num_classes: usize,
    seed: u64,
) -> Result<f64> {
    if train_features.rows() != train_labels.len() || test_features.rows() != test_labels.len() {
        return Err(Error::ShapeMismatch {
            expected: "features aligned with labels".into(),
            actual: "row mismatch".into(),
        });
    }
    let dim = train_features.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = DenseNet::glorot(vec![dim, num_classes], Activation::Relu, &mut rng)?;
    let mut opt = Sgd::new(0.1, 0.9, 0.0, net.num_params())?;

    let n = train_features.rows();
    let batch_size = 64.min(n);
    let epochs = 40;
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..epochs {
        shuffle(&mut order, &mut rng);
        for chunk in order.chunks(batch_size) {
            let mut grad = net.zero_grad();
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let trace = net.forward_trace(train_features.row(i))?;
                let logits = trace.output();
                let lse = log_sum_exp(logits)?;
                let mut cot: Vec<f64> =
                    logits.iter().map(|l| (l - lse).exp() * scale).collect();
                cot[train_labels[i]] -= scale;
                net.backward(&trace, &cot, &mut grad)?;
            }
            opt.step(net.params_mut(), &grad)?;
        }
    }

    let mut correct = 0usize;
    for i in 0..test_features.rows() {
        let logits = net.forward(test_features.row(i))?;
        if crate::losses::argmax(&logits) == test_labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / test_features.rows() as f64)
}

/// Fisher-Yates with the crate's seeded generator.
pub fn shuffle<R: Rng>(order: &mut [usize], rng: &mut R) {
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
}

// ---- dataset files ----

#[derive(Serialize, Deserialize)]
struct SplitFile {
    modalities: Vec<Vec<Vec<f64>>>,
    labels: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    config: GeneratorConfig,
    train: SplitFile,
    test: SplitFile,
    ground_truth: Option<GroundTruthFile>,
}

#[derive(Serialize, Deserialize)]
struct GroundTruthFile {
    alphabet_sizes: Vec<usize>,
    mass: Vec<f64>,
}

fn split_to_file(ds: &LabeledDataset) -> SplitFile {
    SplitFile {
        modalities: (0..ds.num_modalities())
            .map(|m| (0..ds.len()).map(|i| ds.features(m).row(i).to_vec()).collect())
            .collect(),
        labels: ds.labels().to_vec(),
    }
}

fn split_from_file(file: SplitFile, num_classes: usize, gt: Option<JointDistribution>) -> Result<LabeledDataset> {
    let features = file
        .modalities
        .into_iter()
        .map(FeatureMatrix::from_rows)
        .collect::<Result<_>>()?;
    LabeledDataset::new(features, file.labels, num_classes, gt)
}

/// Writes a generated split pair with its config echo and seed.
pub fn save_dataset(path: &Path, config: &GeneratorConfig, split: &TrainTestSplit) -> Result<()> {
    let file = DatasetFile {
        config: config.clone(),
        train: split_to_file(&split.train),
        test: split_to_file(&split.test),
        ground_truth: split.train.ground_truth().map(|gt| GroundTruthFile {
            alphabet_sizes: gt.alphabet_sizes().to_vec(),
            mass: gt.mass().to_vec(),
        }),
    };
    std::fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<(GeneratorConfig, TrainTestSplit)> {
    let text = std::fs::read_to_string(path)?;
    let file: DatasetFile = serde_json::from_str(&text)?;
    let gt = file
        .ground_truth
        .map(|g| JointDistribution::new(g.alphabet_sizes, g.mass))
        .transpose()?;
    let classes = file.config.num_classes;
    let split = TrainTestSplit {
        train: split_from_file(file.train, classes, gt.clone())?,
        test: split_from_file(file.test, classes, gt)?,
    };
    Ok((file.config, split))
}
