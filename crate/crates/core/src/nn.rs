//! Minimal dense-network stack with explicit reverse-mode gradients.
//!
//! Parameters live in one flat `Vec<f64>` per network (per layer: row-major
//! weight matrix, then bias), which keeps gradient buffers, finite-difference
//! checks, SGD, and checkpointing uniform. Batched callers iterate samples
//! and accumulate gradient sums in a fixed order; nothing here averages
//! implicitly, so losses own their own `1/|B|` factors.

use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Flat gradient buffer, congruent with a network's flat parameter vector.
pub type GradientSet = Vec<f64>;

/// Numerically stable log(sum(exp(values))) via max shift.
///
/// Exact for constant inputs; entries of negative infinity contribute zero
/// mass; returns negative infinity when every entry is.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("log_sum_exp".into()));
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if max.is_nan() {
        return Ok(f64::NAN);
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Hidden-layer nonlinearity; the output layer is always identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            // derivative at 0 is defined as 0
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
        }
    }
}

/// A fully-connected network: affine layers with a fixed hidden nonlinearity
/// and an identity output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    widths: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
}

/// Forward-pass cache consumed by [`DenseNet::backward`].
#[derive(Debug, Clone)]
pub struct NetTrace {
    /// Input to each layer (index 0 is the network input).
    layer_inputs: Vec<Vec<f64>>,
    /// Pre-activation of each layer.
    preacts: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl NetTrace {
    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    widths: Vec<usize>,
    activation: Activation,
    /// IEEE-754 bit patterns as hex strings; round-trips bit-exactly.
    params_hex: Vec<String>,
}

impl DenseNet {
    /// All-zero network with the given layer widths.
    pub fn zeros(widths: Vec<usize>, activation: Activation) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidParameter(
                "a network needs at least an input and an output width".into(),
            ));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidParameter("layer widths must be positive".into()));
        }
        let num_params = Self::param_count(&widths);
        Ok(Self {
            widths,
            activation,
            params: vec![0.0; num_params],
        })
    }

    /// Glorot-uniform weights (`±sqrt(6/(fan_in+fan_out))`), zero biases,
    /// drawn from the given seeded generator.
    pub fn glorot<R: Rng>(widths: Vec<usize>, activation: Activation, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(widths, activation)?;
        for l in 0..net.num_layers() {
            let (fan_in, fan_out) = (net.widths[l], net.widths[l + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let (w_off, b_off) = net.layer_offsets(l);
            for w in &mut net.params[w_off..b_off] {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    fn param_count(widths: &[usize]) -> usize {
        widths
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// (weight offset, bias offset) of layer `l` in the flat parameter vector.
    fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let mut off = 0usize;
        for k in 0..l {
            off += self.widths[k] * self.widths[k + 1] + self.widths[k + 1];
        }
        (off, off + self.widths[l] * self.widths[l + 1])
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn zero_grad(&self) -> GradientSet {
        vec![0.0; self.params.len()]
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("input of length {}", self.input_dim()),
                actual: format!("length {}", input.len()),
            });
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        Ok(())
    }

    /// Deterministic forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(input)?.output)
    }

    /// Forward pass that caches everything `backward` needs.
    pub fn forward_trace(&self, input: &[f64]) -> Result<NetTrace> {
        self.check_input(input)?;
        let num_layers = self.num_layers();
        let mut layer_inputs = Vec::with_capacity(num_layers);
        let mut preacts = Vec::with_capacity(num_layers);
        let mut current = input.to_vec();
        for l in 0..num_layers {
            let (in_dim, out_dim) = (self.widths[l], self.widths[l + 1]);
            let (w_off, b_off) = self.layer_offsets(l);
            let mut pre = vec![0.0; out_dim];
            for o in 0..out_dim {
                let row = &self.params[w_off + o * in_dim..w_off + (o + 1) * in_dim];
                let mut acc = self.params[b_off + o];
                for (w, x) in row.iter().zip(&current) {
                    acc += w * x;
                }
                pre[o] = acc;
            }
            let next = if l + 1 == num_layers {
                pre.clone()
            } else {
                pre.iter().map(|&z| self.activation.apply(z)).collect()
            };
            layer_inputs.push(std::mem::replace(&mut current, next));
            preacts.push(pre);
        }
        Ok(NetTrace {
            layer_inputs,
            preacts,
            output: current,
        })
    }

    /// Reverse-mode gradients of `<output, cotangent>`.
    ///
    /// Parameter gradients are *accumulated* into `grad` (callers batch by
    /// summing in a fixed order); the returned vector is the cotangent with
    /// respect to the network input, for chaining through upstream nets.
    pub fn backward(
        &self,
        trace: &NetTrace,
        cotangent: &[f64],
        grad: &mut [f64],
    ) -> Result<Vec<f64>> {
        if cotangent.len() != self.output_dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("cotangent of length {}", self.output_dim()),
                actual: format!("length {}", cotangent.len()),
            });
        }
        if grad.len() != self.params.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("gradient buffer of length {}", self.params.len()),
                actual: format!("length {}", grad.len()),
            });
        }
        let num_layers = self.num_layers();
        let mut upstream = cotangent.to_vec();
        for l in (0..num_layers).rev() {
            let (in_dim, out_dim) = (self.widths[l], self.widths[l + 1]);
            let (w_off, b_off) = self.layer_offsets(l);
            // d pre-activation: output layer is identity
            let dz: Vec<f64> = if l + 1 == num_layers {
                upstream
            } else {
                upstream
                    .iter()
                    .zip(trace.preacts[l].iter())
                    .map(|(&u, &z)| u * self.activation.derivative(z))
                    .collect()
            };
            let layer_in = &trace.layer_inputs[l];
            let mut dinput = vec![0.0; in_dim];
            for o in 0..out_dim {
                let g = dz[o];
                grad[b_off + o] += g;
                let w_row = &self.params[w_off + o * in_dim..w_off + (o + 1) * in_dim];
                let g_row = &mut grad[w_off + o * in_dim..w_off + (o + 1) * in_dim];
                for i in 0..in_dim {
                    g_row[i] += g * layer_in[i];
                    dinput[i] += w_row[i] * g;
                }
            }
            upstream = dinput;
        }
        Ok(upstream)
    }

    /// Writes the checkpoint format: widths, activation tag, and the flat
    /// parameter vector as hex bit patterns.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = CheckpointFile {
            widths: self.widths.clone(),
            activation: self.activation,
            params_hex: self.params.iter().map(|p| format!("{:016x}", p.to_bits())).collect(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: CheckpointFile = serde_json::from_str(&text)?;
        Self::from_checkpoint_parts(file.widths, file.activation, &file.params_hex)
    }

    pub(crate) fn to_hex_params(&self) -> Vec<String> {
        self.params.iter().map(|p| format!("{:016x}", p.to_bits())).collect()
    }

    pub(crate) fn from_checkpoint_parts(
        widths: Vec<usize>,
        activation: Activation,
        params_hex: &[String],
    ) -> Result<Self> {
        let mut net = Self::zeros(widths, activation)?;
        if params_hex.len() != net.params.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} parameters", net.params.len()),
                actual: format!("{} parameters", params_hex.len()),
            });
        }
        for (slot, hex) in net.params.iter_mut().zip(params_hex) {
            let bits = u64::from_str_radix(hex, 16)
                .map_err(|e| Error::Config(format!("bad hex float {hex:?}: {e}")))?;
            *slot = f64::from_bits(bits);
        }
        Ok(net)
    }
}

/// SGD with momentum and (optional) weight decay:
/// `v <- momentum*v + g + wd*p; p <- p - lr*v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Vec<f64>,
}

impl Sgd {
    pub fn new(learning_rate: f64, momentum: f64, weight_decay: f64, num_params: usize) -> Result<Self> {
        if !(learning_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidParameter(format!(
                "momentum must be in [0, 1), got {momentum}"
            )));
        }
        if weight_decay < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "weight decay must be non-negative, got {weight_decay}"
            )));
        }
        Ok(Self {
            learning_rate,
            momentum,
            weight_decay,
            velocity: vec![0.0; num_params],
        })
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.velocity.len() || grads.len() != self.velocity.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} parameters", self.velocity.len()),
                actual: format!("{} params / {} grads", params.len(), grads.len()),
            });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient".into()));
        }
        for ((p, v), &g) in params.iter_mut().zip(&mut self.velocity).zip(grads) {
            *v = self.momentum * *v + g + self.weight_decay * *p;
            *p -= self.learning_rate * *v;
        }
        Ok(())
    }
}

/// Central finite-difference gradient of a scalar function of a flat
/// parameter vector; the independent oracle for every analytic gradient in
/// this crate.
pub fn finite_difference_gradient<F>(f: F, params: &[f64], step: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut perturbed = params.to_vec();
    let mut grad = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        perturbed[i] = params[i] + step;
        let plus = f(&perturbed);
        perturbed[i] = params[i] - step;
        let minus = f(&perturbed);
        perturbed[i] = params[i];
        grad.push((plus - minus) / (2.0 * step));
    }
    grad
}

/// Relative disagreement used by the gradient checks: |a-b| scaled by the
/// larger magnitude, floored so near-zero gradients compare absolutely.
pub fn gradient_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-4))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lse_trivial_cases() {
        let n = 7usize;
        let v = vec![0.0; n];
        assert!((log_sum_exp(&v).unwrap() - (n as f64).ln()).abs() < 1e-15);

        let big = log_sum_exp(&[1000.0, 1000.0]).unwrap();
        assert!((big - (1000.0 + std::f64::consts::LN_2)).abs() < 1e-12);

        assert!(log_sum_exp(&[]).is_err());
        assert_eq!(
            log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]).unwrap(),
            f64::NEG_INFINITY
        );
        // -inf entries drop out
        let v = log_sum_exp(&[0.0, f64::NEG_INFINITY]).unwrap();
        assert!((v - 0.0).abs() < 1e-15);
    }

    #[test]
    fn lse_matches_direct_sum_at_small_magnitudes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let v: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            let direct = v.iter().map(|x| x.exp()).sum::<f64>().ln();
            let lse = log_sum_exp(&v).unwrap();
            assert!((lse - direct).abs() < 1e-12, "{lse} vs {direct}");
        }
    }

    #[test]
    fn forward_zero_net_emits_bias() {
        let mut net = DenseNet::zeros(vec![3, 2], Activation::Relu).unwrap();
        let n = net.num_params();
        net.params_mut()[n - 2] = 0.5;
        net.params_mut()[n - 1] = -1.5;
        let out = net.forward(&[9.0, -3.0, 4.0]).unwrap();
        assert_eq!(out, vec![0.5, -1.5]);
    }

    #[test]
    fn forward_identity_single_layer() {
        let mut net = DenseNet::zeros(vec![2, 2], Activation::Tanh).unwrap();
        net.params_mut()[0] = 1.0; // W[0][0]
        net.params_mut()[3] = 1.0; // W[1][1]
        let out = net.forward(&[0.3, -0.7]).unwrap();
        assert_eq!(out, vec![0.3, -0.7]);
    }

    #[test]
    fn forward_matches_hand_recompute() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let net = DenseNet::glorot(vec![2, 3, 2], Activation::Tanh, &mut rng).unwrap();
        let input = [0.4, -1.2];

        // independent recomputation straight from the flat layout
        let p = net.params();
        let mut hidden = [0.0f64; 3];
        for o in 0..3 {
            hidden[o] = (p[o * 2] * input[0] + p[o * 2 + 1] * input[1] + p[6 + o]).tanh();
        }
        let w2 = &p[9..15];
        let b2 = &p[15..17];
        let mut expect = [0.0f64; 2];
        for o in 0..2 {
            expect[o] = w2[o * 3] * hidden[0] + w2[o * 3 + 1] * hidden[1] + w2[o * 3 + 2] * hidden[2] + b2[o];
        }

        let out = net.forward(&input).unwrap();
        assert!((out[0] - expect[0]).abs() < 1e-14);
        assert!((out[1] - expect[1]).abs() < 1e-14);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let net = DenseNet::zeros(vec![2, 1], Activation::Relu).unwrap();
        assert!(net.forward(&[1.0]).is_err());
        assert!(net.forward(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn backward_linear_chain_rule() {
        let mut net = DenseNet::zeros(vec![1, 1], Activation::Relu).unwrap();
        net.params_mut()[0] = 2.0;
        net.params_mut()[1] = 0.3;
        let trace = net.forward_trace(&[5.0]).unwrap();
        let mut grad = net.zero_grad();
        let dinput = net.backward(&trace, &[1.0], &mut grad).unwrap();
        assert_eq!(grad, vec![5.0, 1.0]); // dW = input, db = 1
        assert_eq!(dinput, vec![2.0]); // dx = W
    }

    #[test]
    fn backward_zero_cotangent_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = DenseNet::glorot(vec![3, 4, 2], Activation::Relu, &mut rng).unwrap();
        let trace = net.forward_trace(&[0.1, 0.2, 0.3]).unwrap();
        let mut grad = net.zero_grad();
        let dinput = net.backward(&trace, &[0.0, 0.0], &mut grad).unwrap();
        assert!(grad.iter().all(|&g| g == 0.0));
        assert!(dinput.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for case in 0..20 {
            let act = if case % 2 == 0 { Activation::Tanh } else { Activation::Relu };
            let net = DenseNet::glorot(vec![3, 5, 4, 2], act, &mut rng).unwrap();
            let input: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let cot: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();

            let trace = net.forward_trace(&input).unwrap();
            let mut grad = net.zero_grad();
            net.backward(&trace, &cot, &mut grad).unwrap();

            let f = |p: &[f64]| {
                let mut probe = net.clone();
                probe.params_mut().copy_from_slice(p);
                let out = probe.forward(&input).unwrap();
                out.iter().zip(&cot).map(|(o, c)| o * c).sum::<f64>()
            };
            let numeric = finite_difference_gradient(f, net.params(), 1e-5);
            let err = gradient_rel_error(&grad, &numeric);
            assert!(err < 1e-4, "case {case}: max rel err {err}");
        }
    }

    #[test]
    fn sgd_zero_grads_keep_params() {
        let mut net = DenseNet::zeros(vec![2, 2], Activation::Relu).unwrap();
        net.params_mut().copy_from_slice(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let before = net.params().to_vec();
        let mut opt = Sgd::new(0.1, 0.9, 0.0, net.num_params()).unwrap();
        opt.step(net.params_mut(), &vec![0.0; 6]).unwrap();
        assert_eq!(net.params(), &before[..]);
    }

    #[test]
    fn sgd_plain_descent_step() {
        let mut params = vec![1.0, -2.0];
        let mut opt = Sgd::new(0.5, 0.0, 0.0, 2).unwrap();
        opt.step(&mut params, &[0.2, -0.4]).unwrap();
        assert_eq!(params, vec![0.9, -1.8]);
    }

    #[test]
    fn sgd_descends_quadratic() {
        // f(w) = w^2, grad = 2w; two steps strictly decrease f
        let mut w = vec![3.0];
        let mut opt = Sgd::new(0.1, 0.9, 0.0, 1).unwrap();
        let mut f_prev = w[0] * w[0];
        for _ in 0..2 {
            let g = vec![2.0 * w[0]];
            opt.step(&mut w, &g).unwrap();
            let f = w[0] * w[0];
            assert!(f < f_prev, "{f} not below {f_prev}");
            f_prev = f;
        }
    }

    #[test]
    fn sgd_rejects_non_finite() {
        let mut params = vec![0.0];
        let mut opt = Sgd::new(0.1, 0.0, 0.0, 1).unwrap();
        assert!(opt.step(&mut params, &[f64::NAN]).is_err());
    }

    #[test]
    fn glorot_is_deterministic_per_seed() {
        let a = DenseNet::glorot(vec![4, 8, 3], Activation::Relu, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = DenseNet::glorot(vec![4, 8, 3], Activation::Relu, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.params(), b.params());
        let c = DenseNet::glorot(vec![4, 8, 3], Activation::Relu, &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let net = DenseNet::glorot(vec![3, 7, 2], Activation::Tanh, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        net.save(&path).unwrap();
        let loaded = DenseNet::load(&path).unwrap();
        assert_eq!(net.widths(), loaded.widths());
        assert_eq!(net.activation(), loaded.activation());
        for (a, b) in net.params().iter().zip(loaded.params()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
