//! Training objectives: joint cross-entropy, the per-modality ensemble loss,
//! the pairwise / negative-sampled / factored total-correlation losses, the
//! regression variant, and the prediction rule.
//!
//! Every loss returns its scalar value together with exact reverse-mode
//! gradients over the model's flat parameter vector. The class scores of the
//! fused model play the critic in the DV bound: the pairwise loss is
//! `-(1/|B|) sum_i [F(x_i, y_i) - log sum_{(j,k,y')} e^{F(x_j^a, x_k^v, y')}]
//! - log(|B|^2 |Y|)`, the sampled form restricts the denominator to a
//! negative-pair subset, and the factored form exploits `exp(a+b) =
//! exp(a)exp(b)` for per-modality linear heads so only |B| head evaluations
//! are needed.
//!
//! The label prior in every denominator is uniform over the classes; batches
//! with strongly imbalanced labels are outside the contract here.

use crate::error::{Error, Result};
use crate::nn::{log_sum_exp, DenseNet, GradientSet, NetTrace};
use crate::prob::JointDistribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::ops::Range;
use std::path::Path;

/// Batch-size cap for the full pairwise loss with a concat-MLP head, where
/// the denominator costs |B|^2 head evaluations.
pub const FULL_LOSS_BATCH_CAP: usize = 128;

// ========================= batches =========================

/// Row-major feature matrix; row i is sample i.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::ShapeMismatch {
                expected: format!("{rows}x{dim} = {} values", rows * dim),
                actual: format!("{}", data.len()),
            });
        }
        Ok(Self { rows, dim, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let dim = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n * dim);
        for r in &rows {
            if r.len() != dim {
                return Err(Error::ShapeMismatch {
                    expected: format!("rows of length {dim}"),
                    actual: format!("length {}", r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: n, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Aligned per-modality feature rows with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    modalities: Vec<FeatureMatrix>,
    labels: Vec<usize>,
}

impl Batch {
    pub fn new(modalities: Vec<FeatureMatrix>, labels: Vec<usize>) -> Result<Self> {
        if modalities.is_empty() {
            return Err(Error::EmptyInput("batch modalities".into()));
        }
        let n = labels.len();
        for m in &modalities {
            if m.rows() != n {
                return Err(Error::ShapeMismatch {
                    expected: format!("{n} rows"),
                    actual: format!("{} rows", m.rows()),
                });
            }
        }
        Ok(Self { modalities, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_modalities(&self) -> usize {
        self.modalities.len()
    }

    pub fn modality(&self, m: usize) -> &FeatureMatrix {
        &self.modalities[m]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample_features(&self, i: usize) -> Vec<&[f64]> {
        self.modalities.iter().map(|m| m.row(i)).collect()
    }

    /// Sub-batch at the given row indices (used for minibatching).
    pub fn select(&self, idx: &[usize]) -> Batch {
        let modalities = self
            .modalities
            .iter()
            .map(|m| {
                let mut data = Vec::with_capacity(idx.len() * m.dim());
                for &i in idx {
                    data.extend_from_slice(m.row(i));
                }
                FeatureMatrix {
                    rows: idx.len(),
                    dim: m.dim(),
                    data,
                }
            })
            .collect();
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        Batch { modalities, labels }
    }

    /// Enumerates a distribution's support with each cell repeated
    /// `mass * total` times (which must be integral), one-hot features per
    /// modality variable and the last variable as the label. Expectations
    /// over such a batch are exact population sums.
    pub fn exact_frequency(dist: &JointDistribution, total: usize) -> Result<Batch> {
        if dist.num_variables() < 2 {
            return Err(Error::TooFewVariables {
                needed: 2,
                found: dist.num_variables(),
            });
        }
        if total == 0 {
            return Err(Error::InvalidParameter("total count must be positive".into()));
        }
        let num_modalities = dist.num_variables() - 1;
        let sizes = dist.alphabet_sizes();
        let mut rows: Vec<Vec<Vec<f64>>> = vec![Vec::new(); num_modalities];
        let mut labels = Vec::new();
        for idx in 0..dist.num_cells() {
            let expected = dist.mass()[idx] * total as f64;
            let count = expected.round();
            if (expected - count).abs() > 1e-6 {
                return Err(Error::InvalidParameter(format!(
                    "cell {idx} has mass*total = {expected}, not an integer count"
                )));
            }
            let count = count as usize;
            if count == 0 {
                continue;
            }
            let coords = dist.coords_of(idx);
            for _ in 0..count {
                for m in 0..num_modalities {
                    let mut one_hot = vec![0.0; sizes[m]];
                    one_hot[coords[m]] = 1.0;
                    rows[m].push(one_hot);
                }
                labels.push(coords[num_modalities]);
            }
        }
        let modalities = rows
            .into_iter()
            .map(FeatureMatrix::from_rows)
            .collect::<Result<_>>()?;
        Batch::new(modalities, labels)
    }
}

/// Negative pairs `(j, k)` drawn uniformly without replacement from the
/// square of the batch index set.
#[derive(Debug, Clone)]
pub struct NegativeSampleSet {
    pairs: Vec<(usize, usize)>,
    seed: u64,
}

impl NegativeSampleSet {
    /// Samples `count` distinct pairs from the `batch_len^2` grid.
    pub fn sample(batch_len: usize, count: usize, seed: u64) -> Result<Self> {
        let grid = batch_len * batch_len;
        if count == 0 {
            return Err(Error::EmptyNegativeSet);
        }
        if count > grid {
            return Err(Error::InvalidParameter(format!(
                "cannot draw {count} distinct pairs from a {batch_len}x{batch_len} grid"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs = rand::seq::index::sample(&mut rng, grid, count)
            .into_iter()
            .map(|flat| (flat / batch_len, flat % batch_len))
            .collect();
        Ok(Self { pairs, seed })
    }

    /// The complete grid, in row-major order.
    pub fn full(batch_len: usize) -> Self {
        let mut pairs = Vec::with_capacity(batch_len * batch_len);
        for j in 0..batch_len {
            for k in 0..batch_len {
                pairs.push((j, k));
            }
        }
        Self { pairs, seed: 0 }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

// ========================= model =========================

/// Fusion head variants. Linear variants keep one shared bias split as
/// `b / M` across per-modality outputs, matching the decomposition of a
/// single fully-connected layer over concatenated embeddings.
#[derive(Debug, Clone)]
pub enum Head {
    /// MLP over concatenated embeddings.
    ConcatMlp { net: DenseNet, embed_dims: Vec<usize> },
    /// One affine map per modality, logits summed.
    LinearSum {
        embed_dims: Vec<usize>,
        out_dim: usize,
        /// Per-modality row-major weight blocks followed by the shared bias.
        params: Vec<f64>,
    },
    /// One affine map applied to every modality embedding, logits summed.
    SharedLinear {
        embed_dim: usize,
        num_modalities: usize,
        out_dim: usize,
        /// Row-major weight block followed by the shared bias.
        params: Vec<f64>,
    },
}

/// Config-facing tag for the head variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    ConcatMlp,
    LinearSum,
    SharedLinear,
}

impl Head {
    pub fn concat_mlp(net: DenseNet, embed_dims: Vec<usize>) -> Result<Self> {
        let total: usize = embed_dims.iter().sum();
        if net.input_dim() != total {
            return Err(Error::ShapeMismatch {
                expected: format!("head input width {total}"),
                actual: format!("{}", net.input_dim()),
            });
        }
        Ok(Head::ConcatMlp { net, embed_dims })
    }

    pub fn linear_sum(embed_dims: Vec<usize>, out_dim: usize) -> Self {
        let n: usize = embed_dims.iter().map(|d| d * out_dim).sum::<usize>() + out_dim;
        Head::LinearSum {
            embed_dims,
            out_dim,
            params: vec![0.0; n],
        }
    }

    pub fn shared_linear(embed_dim: usize, num_modalities: usize, out_dim: usize) -> Self {
        Head::SharedLinear {
            embed_dim,
            num_modalities,
            out_dim,
            params: vec![0.0; embed_dim * out_dim + out_dim],
        }
    }

    /// Glorot-uniform weights, zero bias, for the linear variants.
    pub fn init_glorot<R: rand::Rng>(&mut self, rng: &mut R) {
        match self {
            Head::ConcatMlp { .. } => {}
            Head::LinearSum {
                embed_dims,
                out_dim,
                params,
            } => {
                let out_dim = *out_dim;
                let mut off = 0;
                for &d in embed_dims.iter() {
                    let bound = (6.0 / (d + out_dim) as f64).sqrt();
                    for w in &mut params[off..off + d * out_dim] {
                        *w = rng.random_range(-bound..bound);
                    }
                    off += d * out_dim;
                }
            }
            Head::SharedLinear {
                embed_dim,
                out_dim,
                params,
                ..
            } => {
                let bound = (6.0 / (*embed_dim + *out_dim) as f64).sqrt();
                for w in &mut params[..*embed_dim * *out_dim] {
                    *w = rng.random_range(-bound..bound);
                }
            }
        }
    }

    pub fn kind(&self) -> HeadKind {
        match self {
            Head::ConcatMlp { .. } => HeadKind::ConcatMlp,
            Head::LinearSum { .. } => HeadKind::LinearSum,
            Head::SharedLinear { .. } => HeadKind::SharedLinear,
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            Head::ConcatMlp { net, .. } => net.output_dim(),
            Head::LinearSum { out_dim, .. } => *out_dim,
            Head::SharedLinear { out_dim, .. } => *out_dim,
        }
    }

    pub fn num_modalities(&self) -> usize {
        match self {
            Head::ConcatMlp { embed_dims, .. } => embed_dims.len(),
            Head::LinearSum { embed_dims, .. } => embed_dims.len(),
            Head::SharedLinear { num_modalities, .. } => *num_modalities,
        }
    }

    pub fn embed_dim(&self, m: usize) -> usize {
        match self {
            Head::ConcatMlp { embed_dims, .. } => embed_dims[m],
            Head::LinearSum { embed_dims, .. } => embed_dims[m],
            Head::SharedLinear { embed_dim, .. } => *embed_dim,
        }
    }

    /// Whether per-modality logits exist (the head decomposes as a sum of
    /// per-modality affine maps).
    pub fn is_decomposable(&self) -> bool {
        !matches!(self, Head::ConcatMlp { .. })
    }

    pub fn num_params(&self) -> usize {
        match self {
            Head::ConcatMlp { net, .. } => net.num_params(),
            Head::LinearSum { params, .. } => params.len(),
            Head::SharedLinear { params, .. } => params.len(),
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            Head::ConcatMlp { net, .. } => net.params(),
            Head::LinearSum { params, .. } => params,
            Head::SharedLinear { params, .. } => params,
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Head::ConcatMlp { net, .. } => net.params_mut(),
            Head::LinearSum { params, .. } => params,
            Head::SharedLinear { params, .. } => params,
        }
    }

    fn weight_block_range(&self, m: usize) -> Range<usize> {
        match self {
            Head::ConcatMlp { .. } => unreachable!("concat head has no per-modality blocks"),
            Head::LinearSum {
                embed_dims, out_dim, ..
            } => {
                let start: usize = embed_dims[..m].iter().map(|d| d * out_dim).sum();
                start..start + embed_dims[m] * out_dim
            }
            Head::SharedLinear {
                embed_dim, out_dim, ..
            } => 0..embed_dim * out_dim,
        }
    }

    fn bias_range(&self) -> Range<usize> {
        let n = self.num_params();
        n - self.out_dim()..n
    }

    /// Fused logits over all modalities.
    pub fn forward(&self, embeds: &[&[f64]]) -> Result<Vec<f64>> {
        if embeds.len() != self.num_modalities() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} modality embeddings", self.num_modalities()),
                actual: format!("{}", embeds.len()),
            });
        }
        match self {
            Head::ConcatMlp { net, .. } => net.forward(&concat(embeds)),
            _ => {
                let out_dim = self.out_dim();
                let bias = &self.params()[self.bias_range()];
                let mut logits = bias.to_vec();
                for (m, z) in embeds.iter().enumerate() {
                    let w = &self.params()[self.weight_block_range(m)];
                    affine_accumulate(w, z, &mut logits, out_dim)?;
                }
                Ok(logits)
            }
        }
    }

    /// Accumulates head-parameter gradients for one fused evaluation and
    /// returns the per-modality embedding cotangents.
    pub fn backward(
        &self,
        embeds: &[&[f64]],
        cot: &[f64],
        grad: &mut [f64],
    ) -> Result<Vec<Vec<f64>>> {
        match self {
            Head::ConcatMlp { net, embed_dims } => {
                let trace = net.forward_trace(&concat(embeds))?;
                let dinput = net.backward(&trace, cot, grad)?;
                let mut cots = Vec::with_capacity(embed_dims.len());
                let mut off = 0;
                for &d in embed_dims {
                    cots.push(dinput[off..off + d].to_vec());
                    off += d;
                }
                Ok(cots)
            }
            _ => {
                let out_dim = self.out_dim();
                let bias_range = self.bias_range();
                for (g, &c) in grad[bias_range].iter_mut().zip(cot) {
                    *g += c;
                }
                let mut cots = Vec::with_capacity(embeds.len());
                for (m, z) in embeds.iter().enumerate() {
                    let range = self.weight_block_range(m);
                    let w = self.params()[range.clone()].to_vec();
                    cots.push(affine_backward(&w, z, cot, &mut grad[range], out_dim));
                }
                Ok(cots)
            }
        }
    }

    /// Per-modality logits: the modality's affine map plus its `bias / M`
    /// share. Errors for non-decomposable heads.
    pub fn modality_forward(&self, m: usize, embed: &[f64]) -> Result<Vec<f64>> {
        if !self.is_decomposable() {
            return Err(Error::HeadNotDecomposable);
        }
        let out_dim = self.out_dim();
        let num_m = self.num_modalities() as f64;
        let bias = &self.params()[self.bias_range()];
        let mut logits: Vec<f64> = bias.iter().map(|b| b / num_m).collect();
        let w = &self.params()[self.weight_block_range(m)];
        affine_accumulate(w, embed, &mut logits, out_dim)?;
        Ok(logits)
    }

    /// Backward pass for one per-modality evaluation.
    pub fn modality_backward(
        &self,
        m: usize,
        embed: &[f64],
        cot: &[f64],
        grad: &mut [f64],
    ) -> Result<Vec<f64>> {
        if !self.is_decomposable() {
            return Err(Error::HeadNotDecomposable);
        }
        let out_dim = self.out_dim();
        let num_m = self.num_modalities() as f64;
        let bias_range = self.bias_range();
        for (g, &c) in grad[bias_range].iter_mut().zip(cot) {
            *g += c / num_m;
        }
        let range = self.weight_block_range(m);
        let w = self.params()[range.clone()].to_vec();
        Ok(affine_backward(&w, embed, cot, &mut grad[range], out_dim))
    }
}

fn concat(slices: &[&[f64]]) -> Vec<f64> {
    let mut out = Vec::with_capacity(slices.iter().map(|s| s.len()).sum());
    for s in slices {
        out.extend_from_slice(s);
    }
    out
}

fn affine_accumulate(w: &[f64], x: &[f64], out: &mut [f64], out_dim: usize) -> Result<()> {
    let in_dim = x.len();
    if w.len() != in_dim * out_dim {
        return Err(Error::ShapeMismatch {
            expected: format!("{out_dim}x{in_dim} weight block"),
            actual: format!("{} values", w.len()),
        });
    }
    for o in 0..out_dim {
        let row = &w[o * in_dim..(o + 1) * in_dim];
        let mut acc = 0.0;
        for (wi, xi) in row.iter().zip(x) {
            acc += wi * xi;
        }
        out[o] += acc;
    }
    Ok(())
}

fn affine_backward(w: &[f64], x: &[f64], cot: &[f64], grad: &mut [f64], out_dim: usize) -> Vec<f64> {
    let in_dim = x.len();
    let mut dx = vec![0.0; in_dim];
    for o in 0..out_dim {
        let c = cot[o];
        let row = &w[o * in_dim..(o + 1) * in_dim];
        let g_row = &mut grad[o * in_dim..(o + 1) * in_dim];
        for i in 0..in_dim {
            g_row[i] += c * x[i];
            dx[i] += row[i] * c;
        }
    }
    dx
}

/// Per-modality encoders plus a fusion head realizing the class scores
/// `F(x^1..x^M, y)`. For the regression variant the head's output width is 2
/// and is read as `(prediction, confidence)`.
#[derive(Debug, Clone)]
pub struct MultimodalModel {
    encoders: Vec<DenseNet>,
    head: Head,
}

impl MultimodalModel {
    pub fn new(encoders: Vec<DenseNet>, head: Head) -> Result<Self> {
        if encoders.is_empty() {
            return Err(Error::InvalidParameter("model needs at least one encoder".into()));
        }
        if encoders.len() != head.num_modalities() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} encoders", head.num_modalities()),
                actual: format!("{}", encoders.len()),
            });
        }
        for (m, enc) in encoders.iter().enumerate() {
            if enc.output_dim() != head.embed_dim(m) {
                return Err(Error::ShapeMismatch {
                    expected: format!("encoder {m} output width {}", head.embed_dim(m)),
                    actual: format!("{}", enc.output_dim()),
                });
            }
        }
        Ok(Self { encoders, head })
    }

    pub fn num_modalities(&self) -> usize {
        self.encoders.len()
    }

    pub fn num_classes(&self) -> usize {
        self.head.out_dim()
    }

    pub fn head(&self) -> &Head {
        &self.head
    }

    pub fn encoder(&self, m: usize) -> &DenseNet {
        &self.encoders[m]
    }

    pub fn num_params(&self) -> usize {
        self.encoders.iter().map(|e| e.num_params()).sum::<usize>() + self.head.num_params()
    }

    pub(crate) fn encoder_range(&self, m: usize) -> Range<usize> {
        let start: usize = self.encoders[..m].iter().map(|e| e.num_params()).sum();
        start..start + self.encoders[m].num_params()
    }

    pub(crate) fn head_range(&self) -> Range<usize> {
        let start: usize = self.encoders.iter().map(|e| e.num_params()).sum();
        start..start + self.head.num_params()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for e in &self.encoders {
            out.extend_from_slice(e.params());
        }
        out.extend_from_slice(self.head.params());
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} parameters", self.num_params()),
                actual: format!("{}", params.len()),
            });
        }
        let mut off = 0;
        for e in &mut self.encoders {
            let n = e.num_params();
            e.params_mut().copy_from_slice(&params[off..off + n]);
            off += n;
        }
        self.head.params_mut().copy_from_slice(&params[off..]);
        Ok(())
    }

    pub fn zero_grad(&self) -> GradientSet {
        vec![0.0; self.num_params()]
    }

    /// Fused class scores for one sample.
    pub fn fused_logits(&self, features: &[&[f64]]) -> Result<Vec<f64>> {
        let embeds: Vec<Vec<f64>> = features
            .iter()
            .zip(&self.encoders)
            .map(|(x, enc)| enc.forward(x))
            .collect::<Result<_>>()?;
        let refs: Vec<&[f64]> = embeds.iter().map(|e| e.as_slice()).collect();
        self.head.forward(&refs)
    }

    /// Per-modality class scores for metrics: decomposable heads use their
    /// own affine share; the concat head sees the other modalities zeroed.
    pub fn modality_logits(&self, m: usize, features_m: &[f64]) -> Result<Vec<f64>> {
        let embed = self.encoders[m].forward(features_m)?;
        match &self.head {
            Head::ConcatMlp { embed_dims, .. } => {
                let zeros: Vec<Vec<f64>> = embed_dims.iter().map(|&d| vec![0.0; d]).collect();
                let refs: Vec<&[f64]> = zeros
                    .iter()
                    .enumerate()
                    .map(|(i, z)| if i == m { embed.as_slice() } else { z.as_slice() })
                    .collect();
                self.head.forward(&refs)
            }
            _ => self.head.modality_forward(m, &embed),
        }
    }

    /// Single-sample reverse pass: accumulates `d<fused_logits, cot>/d params`
    /// into `grad`. Building block for custom objectives outside this module.
    pub fn backward_from_features(
        &self,
        features: &[&[f64]],
        cot: &[f64],
        grad: &mut [f64],
    ) -> Result<()> {
        if grad.len() != self.num_params() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} gradient entries", self.num_params()),
                actual: format!("{}", grad.len()),
            });
        }
        let traces: Vec<NetTrace> = features
            .iter()
            .zip(&self.encoders)
            .map(|(x, enc)| enc.forward_trace(x))
            .collect::<Result<_>>()?;
        let embeds: Vec<&[f64]> = traces.iter().map(|t| t.output()).collect();
        let head_range = self.head_range();
        let embed_cots = self.head.backward(&embeds, cot, &mut grad[head_range])?;
        for (m, c) in embed_cots.iter().enumerate() {
            let range = self.encoder_range(m);
            self.encoders[m].backward(&traces[m], c, &mut grad[range])?;
        }
        Ok(())
    }

    /// Checkpoint with widths, activation tags, and hex-encoded parameters.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelCheckpoint::from_model(self);
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: ModelCheckpoint = serde_json::from_str(&text)?;
        file.into_model()
    }
}

#[derive(Serialize, Deserialize)]
struct NetCheckpoint {
    widths: Vec<usize>,
    activation: crate::nn::Activation,
    params_hex: Vec<String>,
}

impl NetCheckpoint {
    fn from_net(net: &DenseNet) -> Self {
        Self {
            widths: net.widths().to_vec(),
            activation: net.activation(),
            params_hex: net.to_hex_params(),
        }
    }

    fn into_net(self) -> Result<DenseNet> {
        DenseNet::from_checkpoint_parts(self.widths, self.activation, &self.params_hex)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum HeadCheckpoint {
    ConcatMlp {
        embed_dims: Vec<usize>,
        net: NetCheckpoint,
    },
    LinearSum {
        embed_dims: Vec<usize>,
        out_dim: usize,
        params_hex: Vec<String>,
    },
    SharedLinear {
        embed_dim: usize,
        num_modalities: usize,
        out_dim: usize,
        params_hex: Vec<String>,
    },
}

#[derive(Serialize, Deserialize)]
struct ModelCheckpoint {
    encoders: Vec<NetCheckpoint>,
    head: HeadCheckpoint,
}

fn hex_params(params: &[f64]) -> Vec<String> {
    params.iter().map(|p| format!("{:016x}", p.to_bits())).collect()
}

fn unhex_params(hex: &[String], expected: usize) -> Result<Vec<f64>> {
    if hex.len() != expected {
        return Err(Error::ShapeMismatch {
            expected: format!("{expected} parameters"),
            actual: format!("{}", hex.len()),
        });
    }
    hex.iter()
        .map(|h| {
            u64::from_str_radix(h, 16)
                .map(f64::from_bits)
                .map_err(|e| Error::Config(format!("bad hex float {h:?}: {e}")))
        })
        .collect()
}

impl ModelCheckpoint {
    fn from_model(model: &MultimodalModel) -> Self {
        let head = match &model.head {
            Head::ConcatMlp { net, embed_dims } => HeadCheckpoint::ConcatMlp {
                embed_dims: embed_dims.clone(),
                net: NetCheckpoint::from_net(net),
            },
            Head::LinearSum {
                embed_dims,
                out_dim,
                params,
            } => HeadCheckpoint::LinearSum {
                embed_dims: embed_dims.clone(),
                out_dim: *out_dim,
                params_hex: hex_params(params),
            },
            Head::SharedLinear {
                embed_dim,
                num_modalities,
                out_dim,
                params,
            } => HeadCheckpoint::SharedLinear {
                embed_dim: *embed_dim,
                num_modalities: *num_modalities,
                out_dim: *out_dim,
                params_hex: hex_params(params),
            },
        };
        Self {
            encoders: model.encoders.iter().map(NetCheckpoint::from_net).collect(),
            head,
        }
    }

    fn into_model(self) -> Result<MultimodalModel> {
        let encoders: Vec<DenseNet> = self
            .encoders
            .into_iter()
            .map(NetCheckpoint::into_net)
            .collect::<Result<_>>()?;
        let head = match self.head {
            HeadCheckpoint::ConcatMlp { embed_dims, net } => {
                Head::concat_mlp(net.into_net()?, embed_dims)?
            }
            HeadCheckpoint::LinearSum {
                embed_dims,
                out_dim,
                params_hex,
            } => {
                let mut head = Head::linear_sum(embed_dims, out_dim);
                let params = unhex_params(&params_hex, head.num_params())?;
                head.params_mut().copy_from_slice(&params);
                head
            }
            HeadCheckpoint::SharedLinear {
                embed_dim,
                num_modalities,
                out_dim,
                params_hex,
            } => {
                let mut head = Head::shared_linear(embed_dim, num_modalities, out_dim);
                let params = unhex_params(&params_hex, head.num_params())?;
                head.params_mut().copy_from_slice(&params);
                head
            }
        };
        MultimodalModel::new(encoders, head)
    }
}

// ========================= shared plumbing =========================

/// Per-sample encoder traces for one batch; index [modality][sample].
struct BatchEncoding {
    traces: Vec<Vec<NetTrace>>,
}

impl BatchEncoding {
    fn embed(&self, m: usize, i: usize) -> &[f64] {
        self.traces[m][i].output()
    }
}

fn encode_batch(model: &MultimodalModel, batch_mods: &[FeatureMatrix], n: usize) -> Result<BatchEncoding> {
    if batch_mods.len() != model.num_modalities() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} modalities", model.num_modalities()),
            actual: format!("{}", batch_mods.len()),
        });
    }
    let traces = model
        .encoders
        .iter()
        .enumerate()
        .map(|(m, enc)| {
            (0..n)
                .map(|i| enc.forward_trace(batch_mods[m].row(i)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BatchEncoding { traces })
}

fn check_labels(batch: &Batch, num_classes: usize) -> Result<()> {
    for &y in batch.labels() {
        if y >= num_classes {
            return Err(Error::LabelOutOfRange {
                label: y,
                num_classes,
            });
        }
    }
    Ok(())
}

/// Backpropagates accumulated embedding cotangents through every encoder.
fn encoder_backward(
    model: &MultimodalModel,
    enc: &BatchEncoding,
    embed_cots: &[Vec<Vec<f64>>],
    grad: &mut [f64],
) -> Result<()> {
    for m in 0..model.num_modalities() {
        let range = model.encoder_range(m);
        for (i, cot) in embed_cots[m].iter().enumerate() {
            model.encoders[m].backward(&enc.traces[m][i], cot, &mut grad[range.clone()])?;
        }
    }
    Ok(())
}

fn zero_embed_cots(model: &MultimodalModel, n: usize) -> Vec<Vec<Vec<f64>>> {
    (0..model.num_modalities())
        .map(|m| vec![vec![0.0; model.encoders[m].output_dim()]; n])
        .collect()
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

// ========================= classification losses =========================

/// Mean cross-entropy of the fused prediction: `-log softmax(F(x))_y`.
pub fn joint_ce_loss(model: &MultimodalModel, batch: &Batch) -> Result<(f64, GradientSet)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("batch".into()));
    }
    let classes = model.num_classes();
    check_labels(batch, classes)?;
    let enc = encode_batch(model, &batch.modalities, batch.len())?;
    let n = batch.len();
    let scale = 1.0 / n as f64;

    let mut loss = 0.0;
    let mut grad = model.zero_grad();
    let mut embed_cots = zero_embed_cots(model, n);
    let head_range = model.head_range();

    for i in 0..n {
        let embeds: Vec<&[f64]> = (0..model.num_modalities()).map(|m| enc.embed(m, i)).collect();
        let logits = model.head.forward(&embeds)?;
        let lse = log_sum_exp(&logits)?;
        let y = batch.labels()[i];
        loss += (lse - logits[y]) * scale;

        let mut cot: Vec<f64> = logits.iter().map(|l| (l - lse).exp() * scale).collect();
        cot[y] -= scale;
        let cots = model.head.backward(&embeds, &cot, &mut grad[head_range.clone()])?;
        for (m, c) in cots.iter().enumerate() {
            add_into(&mut embed_cots[m][i], c);
        }
    }
    encoder_backward(model, &enc, &embed_cots, &mut grad)?;
    Ok((loss, grad))
}

/// Mean over the batch of the summed per-modality cross-entropies
/// `-sum_m log softmax(f^m(z^m))_y`. Each modality's term touches only that
/// modality's encoder and weight block (plus its bias share), so the
/// branches train as independently as separately-fitted models.
pub fn unimodal_loss(model: &MultimodalModel, batch: &Batch) -> Result<(f64, GradientSet)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("batch".into()));
    }
    if !model.head.is_decomposable() {
        return Err(Error::HeadNotDecomposable);
    }
    let classes = model.num_classes();
    check_labels(batch, classes)?;
    let enc = encode_batch(model, &batch.modalities, batch.len())?;
    let n = batch.len();
    let scale = 1.0 / n as f64;

    let mut loss = 0.0;
    let mut grad = model.zero_grad();
    let mut embed_cots = zero_embed_cots(model, n);
    let head_range = model.head_range();

    for i in 0..n {
        let y = batch.labels()[i];
        for m in 0..model.num_modalities() {
            let logits = model.head.modality_forward(m, enc.embed(m, i))?;
            let lse = log_sum_exp(&logits)?;
            loss += (lse - logits[y]) * scale;

            let mut cot: Vec<f64> = logits.iter().map(|l| (l - lse).exp() * scale).collect();
            cot[y] -= scale;
            let c = model.head.modality_backward(
                m,
                enc.embed(m, i),
                &cot,
                &mut grad[head_range.clone()],
            )?;
            add_into(&mut embed_cots[m][i], &c);
        }
    }
    encoder_backward(model, &enc, &embed_cots, &mut grad)?;
    Ok((loss, grad))
}

fn require_two_modalities(num: usize) -> Result<()> {
    if num != 2 {
        return Err(Error::InvalidParameter(format!(
            "pairwise losses require exactly two modalities, got {num}"
        )));
    }
    Ok(())
}

/// Shared core of the full and sampled pairwise losses: the denominator
/// enumerates the given `(j, k)` pairs and all classes.
fn tcmax_pairwise(
    model: &MultimodalModel,
    batch: &Batch,
    pairs: &[(usize, usize)],
) -> Result<(f64, GradientSet)> {
    let classes = model.num_classes();
    check_labels(batch, classes)?;
    require_two_modalities(batch.num_modalities())?;
    let enc = encode_batch(model, &batch.modalities, batch.len())?;
    let n = batch.len();
    let scale = 1.0 / n as f64;

    // denominator scores for every (pair, class)
    let mut scores = Vec::with_capacity(pairs.len() * classes);
    for &(j, k) in pairs {
        let embeds = [enc.embed(0, j), enc.embed(1, k)];
        scores.extend(model.head.forward(&embeds)?);
    }
    let lse = log_sum_exp(&scores)?;

    let mut joint_term = 0.0;
    for i in 0..n {
        let embeds = [enc.embed(0, i), enc.embed(1, i)];
        joint_term += model.head.forward(&embeds)?[batch.labels()[i]] * scale;
    }
    let constant = ((pairs.len() * classes) as f64).ln();
    let loss = -joint_term + lse - constant;
    if !loss.is_finite() {
        return Err(Error::NonFinite("pairwise loss".into()));
    }

    let mut grad = model.zero_grad();
    let mut embed_cots = zero_embed_cots(model, n);
    let head_range = model.head_range();

    // denominator gradients: softmax weights over (pair, class)
    for (p, &(j, k)) in pairs.iter().enumerate() {
        let embeds = [enc.embed(0, j), enc.embed(1, k)];
        let cot: Vec<f64> = scores[p * classes..(p + 1) * classes]
            .iter()
            .map(|s| (s - lse).exp())
            .collect();
        let cots = model.head.backward(&embeds, &cot, &mut grad[head_range.clone()])?;
        add_into(&mut embed_cots[0][j], &cots[0]);
        add_into(&mut embed_cots[1][k], &cots[1]);
    }
    // joint-term gradients on the diagonal
    for i in 0..n {
        let embeds = [enc.embed(0, i), enc.embed(1, i)];
        let mut cot = vec![0.0; classes];
        cot[batch.labels()[i]] = -scale;
        let cots = model.head.backward(&embeds, &cot, &mut grad[head_range.clone()])?;
        add_into(&mut embed_cots[0][i], &cots[0]);
        add_into(&mut embed_cots[1][i], &cots[1]);
    }
    encoder_backward(model, &enc, &embed_cots, &mut grad)?;
    Ok((loss, grad))
}

/// Full pairwise loss: the denominator enumerates all of `B x B x Y`.
pub fn tcmax_full(model: &MultimodalModel, batch: &Batch) -> Result<(f64, GradientSet)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("batch".into()));
    }
    if matches!(model.head, Head::ConcatMlp { .. }) && batch.len() > FULL_LOSS_BATCH_CAP {
        return Err(Error::BatchTooLarge {
            size: batch.len(),
            cap: FULL_LOSS_BATCH_CAP,
        });
    }
    let full = NegativeSampleSet::full(batch.len());
    tcmax_pairwise(model, batch, full.pairs())
}

/// Negative-sampled loss: the denominator runs over the sampled pair set,
/// with the matching `-log(|N||Y|)` constant. Deterministic given the set.
pub fn tcmax_sampled(
    model: &MultimodalModel,
    batch: &Batch,
    negs: &NegativeSampleSet,
) -> Result<(f64, GradientSet)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("batch".into()));
    }
    if negs.is_empty() {
        return Err(Error::EmptyNegativeSet);
    }
    for &(j, k) in negs.pairs() {
        if j >= batch.len() || k >= batch.len() {
            return Err(Error::IndexOutOfRange {
                index: j.max(k),
                num_vars: batch.len(),
            });
        }
    }
    tcmax_pairwise(model, batch, negs.pairs())
}

/// Factored loss for per-modality linear heads: the denominator decouples
/// into per-class products of per-modality sums, so only |B| head
/// evaluations per modality are needed. Equal to the full pairwise loss for
/// the same parameters.
pub fn tcmax_factored(model: &MultimodalModel, batch: &Batch) -> Result<(f64, GradientSet)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("batch".into()));
    }
    if !model.head.is_decomposable() {
        return Err(Error::HeadNotLinear);
    }
    let classes = model.num_classes();
    check_labels(batch, classes)?;
    let enc = encode_batch(model, &batch.modalities, batch.len())?;
    let n = batch.len();
    let num_m = model.num_modalities();
    let scale = 1.0 / n as f64;

    // per-modality per-sample logits
    let mut logits = vec![vec![0.0; n * classes]; num_m];
    for m in 0..num_m {
        for i in 0..n {
            let l = model.head.modality_forward(m, enc.embed(m, i))?;
            logits[m][i * classes..(i + 1) * classes].copy_from_slice(&l);
        }
    }

    // log S_m[y'] = LSE_i logits_m[i][y']
    let mut log_sums = vec![vec![0.0; classes]; num_m];
    let mut column = vec![0.0; n];
    for m in 0..num_m {
        for y in 0..classes {
            for i in 0..n {
                column[i] = logits[m][i * classes + y];
            }
            log_sums[m][y] = log_sum_exp(&column)?;
        }
    }
    // log D = LSE_y sum_m log S_m[y]
    let combined: Vec<f64> = (0..classes)
        .map(|y| (0..num_m).map(|m| log_sums[m][y]).sum())
        .collect();
    let log_d = log_sum_exp(&combined)?;

    let mut joint_term = 0.0;
    for i in 0..n {
        let y = batch.labels()[i];
        for m in 0..num_m {
            joint_term += logits[m][i * classes + y] * scale;
        }
    }
    let constant = (n as f64).ln() * num_m as f64 + (classes as f64).ln();
    let loss = -joint_term + log_d - constant;
    if !loss.is_finite() {
        return Err(Error::NonFinite("factored loss".into()));
    }

    let mut grad = model.zero_grad();
    let mut embed_cots = zero_embed_cots(model, n);
    let head_range = model.head_range();

    for m in 0..num_m {
        for i in 0..n {
            let y_i = batch.labels()[i];
            let cot: Vec<f64> = (0..classes)
                .map(|y| {
                    let class_w = (combined[y] - log_d).exp();
                    let within = (logits[m][i * classes + y] - log_sums[m][y]).exp();
                    let mut c = class_w * within;
                    if y == y_i {
                        c -= scale;
                    }
                    c
                })
                .collect();
            let c = model.head.modality_backward(
                m,
                enc.embed(m, i),
                &cot,
                &mut grad[head_range.clone()],
            )?;
            add_into(&mut embed_cots[m][i], &c);
        }
    }
    encoder_backward(model, &enc, &embed_cots, &mut grad)?;
    Ok((loss, grad))
}

// ========================= regression loss =========================

/// Aligned per-modality feature rows with real-valued targets.
#[derive(Debug, Clone)]
pub struct RegressionBatch {
    modalities: Vec<FeatureMatrix>,
    targets: Vec<f64>,
}

impl RegressionBatch {
    pub fn new(modalities: Vec<FeatureMatrix>, targets: Vec<f64>) -> Result<Self> {
        if modalities.is_empty() {
            return Err(Error::EmptyInput("batch modalities".into()));
        }
        let n = targets.len();
        for m in &modalities {
            if m.rows() != n {
                return Err(Error::ShapeMismatch {
                    expected: format!("{n} rows"),
                    actual: format!("{} rows", m.rows()),
                });
            }
        }
        Ok(Self { modalities, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn modality(&self, m: usize) -> &FeatureMatrix {
        &self.modalities[m]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }
}

/// Regression objective with a confidence channel. The model's head outputs
/// `(prediction, confidence)` per sample; the loss is
/// `(1/sigma^2) MSE + lambda * (-E_B[c] + log E_N[e^c]) + log(sqrt(pi) sigma)`
/// with N the full `B x B` cross-modality grid. At `lambda = 0` it reduces
/// exactly to the scaled MSE plus the constant.
pub fn tcmax_regression(
    model: &MultimodalModel,
    batch: &RegressionBatch,
    sigma: f64,
    lambda: f64,
) -> Result<(f64, GradientSet)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("batch".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if model.num_classes() != 2 {
        return Err(Error::ShapeMismatch {
            expected: "head output width 2 (prediction, confidence)".into(),
            actual: format!("{}", model.num_classes()),
        });
    }
    require_two_modalities(batch.modalities.len())?;
    let enc = encode_batch(model, &batch.modalities, batch.len())?;
    let n = batch.len();
    let scale = 1.0 / n as f64;
    let inv_s2 = 1.0 / (sigma * sigma);

    // diagonal outputs for the MSE and the confidence joint term
    let mut diag = Vec::with_capacity(n);
    for i in 0..n {
        let embeds = [enc.embed(0, i), enc.embed(1, i)];
        diag.push(model.head.forward(&embeds)?);
    }
    let mse: f64 = diag
        .iter()
        .zip(batch.targets())
        .map(|(out, &t)| (out[0] - t) * (out[0] - t))
        .sum::<f64>()
        * scale;
    let mean_c: f64 = diag.iter().map(|out| out[1]).sum::<f64>() * scale;

    // confidence over the full cross grid
    let mut c_pairs = Vec::with_capacity(n * n);
    for j in 0..n {
        for k in 0..n {
            let embeds = [enc.embed(0, j), enc.embed(1, k)];
            c_pairs.push(model.head.forward(&embeds)?[1]);
        }
    }
    let lse_c = log_sum_exp(&c_pairs)?;
    let log_mean_c = lse_c - ((n * n) as f64).ln();

    let constant = (std::f64::consts::PI.sqrt() * sigma).ln();
    let loss = inv_s2 * mse + lambda * (-mean_c + log_mean_c) + constant;
    if !loss.is_finite() {
        return Err(Error::NonFinite("regression loss".into()));
    }

    let mut grad = model.zero_grad();
    let mut embed_cots = zero_embed_cots(model, n);
    let head_range = model.head_range();

    for i in 0..n {
        let embeds = [enc.embed(0, i), enc.embed(1, i)];
        let d_pred = inv_s2 * 2.0 * (diag[i][0] - batch.targets()[i]) * scale;
        let cot = [d_pred, -lambda * scale];
        let cots = model.head.backward(&embeds, &cot, &mut grad[head_range.clone()])?;
        add_into(&mut embed_cots[0][i], &cots[0]);
        add_into(&mut embed_cots[1][i], &cots[1]);
    }
    for j in 0..n {
        for k in 0..n {
            let w = (c_pairs[j * n + k] - lse_c).exp();
            let embeds = [enc.embed(0, j), enc.embed(1, k)];
            let cot = [0.0, lambda * w];
            let cots = model.head.backward(&embeds, &cot, &mut grad[head_range.clone()])?;
            add_into(&mut embed_cots[0][j], &cots[0]);
            add_into(&mut embed_cots[1][k], &cots[1]);
        }
    }
    encoder_backward(model, &enc, &embed_cots, &mut grad)?;
    Ok((loss, grad))
}

// ========================= prediction =========================

/// Anything that scores class logits for one joint feature assignment.
pub trait Scorer {
    fn num_classes(&self) -> usize;
    fn class_scores(&self, features: &[&[f64]]) -> Result<Vec<f64>>;
}

impl Scorer for MultimodalModel {
    fn num_classes(&self) -> usize {
        MultimodalModel::num_classes(self)
    }

    fn class_scores(&self, features: &[&[f64]]) -> Result<Vec<f64>> {
        self.fused_logits(features)
    }
}

/// An explicit score table over discrete modality symbols and classes,
/// reading one-hot feature rows back to symbols. The stand-in for "all
/// functions" in the population-level bound checks.
#[derive(Debug, Clone)]
pub struct TabularModel {
    modality_sizes: Vec<usize>,
    num_classes: usize,
    /// Row-major over (x^1, .., x^M, y).
    values: Vec<f64>,
}

impl TabularModel {
    pub fn new(modality_sizes: Vec<usize>, num_classes: usize, values: Vec<f64>) -> Result<Self> {
        let cells: usize = modality_sizes.iter().product::<usize>() * num_classes;
        if values.len() != cells {
            return Err(Error::ShapeMismatch {
                expected: format!("{cells} table values"),
                actual: format!("{}", values.len()),
            });
        }
        Ok(Self {
            modality_sizes,
            num_classes,
            values,
        })
    }

    /// The tight score table `log p(x, y) / (prod_m p_m(x^m) * (1/|Y|)) + offset`
    /// for a distribution whose last variable is the label.
    pub fn log_ratio(dist: &JointDistribution, offset: f64) -> Result<Self> {
        let vars = dist.num_variables();
        if vars < 2 {
            return Err(Error::TooFewVariables {
                needed: 2,
                found: vars,
            });
        }
        let num_classes = dist.alphabet_sizes()[vars - 1];
        let modality_sizes = dist.alphabet_sizes()[..vars - 1].to_vec();
        let marginals: Vec<Vec<f64>> = (0..vars - 1)
            .map(|v| dist.marginal_vector(v))
            .collect::<Result<_>>()?;
        let uniform_y = 1.0 / num_classes as f64;
        let mut values = Vec::with_capacity(dist.num_cells());
        for idx in 0..dist.num_cells() {
            let p = dist.mass()[idx];
            if p == 0.0 {
                values.push(f64::NEG_INFINITY);
                continue;
            }
            let coords = dist.coords_of(idx);
            let mut q = uniform_y;
            for (m, marg) in marginals.iter().enumerate() {
                q *= marg[coords[m]];
            }
            values.push((p / q).ln() + offset);
        }
        Self::new(modality_sizes, num_classes, values)
    }

    fn decode(&self, features: &[&[f64]]) -> Result<Vec<usize>> {
        if features.len() != self.modality_sizes.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} modalities", self.modality_sizes.len()),
                actual: format!("{}", features.len()),
            });
        }
        features
            .iter()
            .zip(&self.modality_sizes)
            .map(|(f, &k)| {
                if f.len() != k {
                    return Err(Error::ShapeMismatch {
                        expected: format!("one-hot of width {k}"),
                        actual: format!("width {}", f.len()),
                    });
                }
                Ok(argmax(f))
            })
            .collect()
    }
}

impl Scorer for TabularModel {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn class_scores(&self, features: &[&[f64]]) -> Result<Vec<f64>> {
        let symbols = self.decode(features)?;
        let mut base = 0usize;
        for (&s, &k) in symbols.iter().zip(&self.modality_sizes) {
            base = base * k + s;
        }
        let start = base * self.num_classes;
        Ok(self.values[start..start + self.num_classes].to_vec())
    }
}

/// First index attaining the maximum (ties break to the lowest class).
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Softmax over classes of the fused score `F(x, .)`; shift-invariant in the
/// scores, so any per-sample constant added to `F` leaves it unchanged.
pub fn predict(scorer: &dyn Scorer, features: &[&[f64]]) -> Result<Vec<f64>> {
    let scores = scorer.class_scores(features)?;
    let lse = log_sum_exp(&scores)?;
    if !lse.is_finite() {
        return Err(Error::NonFinite("prediction scores".into()));
    }
    Ok(scores.iter().map(|s| (s - lse).exp()).collect())
}

/// Loss value of the full pairwise objective for any scorer (no gradients);
/// the population route used by the bound-inequality checks.
pub fn tcmax_full_value(scorer: &dyn Scorer, batch: &Batch) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("batch".into()));
    }
    require_two_modalities(batch.num_modalities())?;
    let classes = scorer.num_classes();
    check_labels(batch, classes)?;
    let n = batch.len();

    let mut scores = Vec::with_capacity(n * n * classes);
    for j in 0..n {
        for k in 0..n {
            let features = [batch.modality(0).row(j), batch.modality(1).row(k)];
            scores.extend(scorer.class_scores(&features)?);
        }
    }
    let lse = log_sum_exp(&scores)?;
    let mut joint_term = 0.0;
    for i in 0..n {
        joint_term += scores[(i * n + i) * classes + batch.labels()[i]] / n as f64;
    }
    Ok(-joint_term + lse - ((n * n * classes) as f64).ln())
}
