//! Donsker-Varadhan lower-bound evaluation and critic fitting.
//!
//! The bound is `E_P[T] - log E_Q[e^T]` with P the joint over features and
//! label and Q the product of its marginals; any critic T gives a lower bound
//! on the total correlation, and the bound is tight at `T = log(dP/dQ) + c`.
//! Tabular critics span all functions on a finite product space, so the
//! supremum is attainable there; neural critics train on minibatches.

use crate::error::{Error, Result};
use crate::nn::{log_sum_exp, DenseNet, Sgd};
use crate::prob::JointDistribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::Path;

/// Cell cap for exact full-batch fitting.
pub const MAX_FIT_CELLS: usize = 10_000;

/// One value per outcome of the full product space.
#[derive(Debug, Clone)]
pub struct TabularCritic {
    alphabet_sizes: Vec<usize>,
    values: Vec<f64>,
}

impl TabularCritic {
    pub fn new(alphabet_sizes: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let cells: usize = alphabet_sizes.iter().product();
        if values.len() != cells {
            return Err(Error::ShapeMismatch {
                expected: format!("{cells} critic values"),
                actual: format!("{}", values.len()),
            });
        }
        Ok(Self {
            alphabet_sizes,
            values,
        })
    }

    pub fn zeros(alphabet_sizes: Vec<usize>) -> Self {
        let cells = alphabet_sizes.iter().product();
        Self {
            alphabet_sizes,
            values: vec![0.0; cells],
        }
    }

    /// The tight critic `log(dP/dQ) + offset`; cells outside P's support get
    /// negative infinity.
    pub fn log_ratio(p: &JointDistribution, q: &JointDistribution, offset: f64) -> Result<Self> {
        if p.alphabet_sizes() != q.alphabet_sizes() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", p.alphabet_sizes()),
                actual: format!("{:?}", q.alphabet_sizes()),
            });
        }
        let values = p
            .mass()
            .iter()
            .zip(q.mass())
            .map(|(&pv, &qv)| {
                if pv == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    (pv / qv).ln() + offset
                }
            })
            .collect();
        Ok(Self {
            alphabet_sizes: p.alphabet_sizes().to_vec(),
            values,
        })
    }

    pub fn alphabet_sizes(&self) -> &[usize] {
        &self.alphabet_sizes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, coords: &[usize]) -> Result<f64> {
        if coords.len() != self.alphabet_sizes.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} coordinates", self.alphabet_sizes.len()),
                actual: format!("{}", coords.len()),
            });
        }
        let mut idx = 0usize;
        for (&c, &k) in coords.iter().zip(&self.alphabet_sizes) {
            if c >= k {
                return Err(Error::IndexOutOfRange {
                    index: c,
                    num_vars: k,
                });
            }
            idx = idx * k + c;
        }
        Ok(self.values[idx])
    }
}

/// A dense net scoring one-hot-encoded discrete tuples.
#[derive(Debug, Clone)]
pub struct NeuralCritic {
    net: DenseNet,
    alphabet_sizes: Vec<usize>,
}

/// Width of the concatenated one-hot encoding of a tuple.
pub fn one_hot_width(alphabet_sizes: &[usize]) -> usize {
    alphabet_sizes.iter().sum()
}

/// Concatenated one-hot encoding of a discrete tuple.
pub fn one_hot_encode(coords: &[usize], alphabet_sizes: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; one_hot_width(alphabet_sizes)];
    let mut off = 0usize;
    for (&c, &k) in coords.iter().zip(alphabet_sizes) {
        out[off + c] = 1.0;
        off += k;
    }
    out
}

impl NeuralCritic {
    /// Wraps a scalar-output net whose input width matches the one-hot
    /// encoding of tuples from the given alphabets.
    pub fn new(net: DenseNet, alphabet_sizes: Vec<usize>) -> Result<Self> {
        let width = one_hot_width(&alphabet_sizes);
        if net.input_dim() != width {
            return Err(Error::ShapeMismatch {
                expected: format!("critic input width {width}"),
                actual: format!("{}", net.input_dim()),
            });
        }
        if net.output_dim() != 1 {
            return Err(Error::ShapeMismatch {
                expected: "critic output width 1".into(),
                actual: format!("{}", net.output_dim()),
            });
        }
        Ok(Self {
            net,
            alphabet_sizes,
        })
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn value(&self, coords: &[usize]) -> Result<f64> {
        let x = one_hot_encode(coords, &self.alphabet_sizes);
        Ok(self.net.forward(&x)?[0])
    }
}

/// Either critic variant, for sample-based evaluation.
#[derive(Debug, Clone)]
pub enum Critic {
    Tabular(TabularCritic),
    Neural(NeuralCritic),
}

impl Critic {
    pub fn value(&self, coords: &[usize]) -> Result<f64> {
        match self {
            Critic::Tabular(t) => t.value(coords),
            Critic::Neural(n) => n.value(coords),
        }
    }
}

/// One evaluation of the DV objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DvEstimate {
    /// `joint_term - product_term`, a total-correlation lower bound in nats.
    pub lower_bound: f64,
    /// Mean of the critic over joint samples (or the exact expectation).
    pub joint_term: f64,
    /// log-mean-exp of the critic over product samples (or exact).
    pub product_term: f64,
    pub joint_samples: usize,
    pub product_samples: usize,
}

impl DvEstimate {
    fn new(joint_term: f64, product_term: f64, joint_samples: usize, product_samples: usize) -> Self {
        Self {
            lower_bound: joint_term - product_term,
            joint_term,
            product_term,
            joint_samples,
            product_samples,
        }
    }
}

/// Exact DV objective of a tabular critic by full summation:
/// `E_P[T] - log E_Q[e^T]` with Q the product of the joint's marginals.
pub fn dv_bound_exact(critic: &TabularCritic, joint: &JointDistribution) -> Result<DvEstimate> {
    if critic.alphabet_sizes() != joint.alphabet_sizes() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", joint.alphabet_sizes()),
            actual: format!("{:?}", critic.alphabet_sizes()),
        });
    }
    let q = joint.product_of_marginals()?;
    dv_bound_exact_with(critic, joint, &q, log_sum_exp)
}

/// Exact DV objective against an explicit reference measure, with a caller-
/// supplied log-sum-exp (the verification suite injects a corrupted one to
/// prove the inequality check can fail loudly).
pub fn dv_bound_exact_with(
    critic: &TabularCritic,
    joint: &JointDistribution,
    reference: &JointDistribution,
    lse: fn(&[f64]) -> Result<f64>,
) -> Result<DvEstimate> {
    let mut joint_term = 0.0;
    for (&p, &t) in joint.mass().iter().zip(critic.values()) {
        if p > 0.0 {
            joint_term += p * t;
        }
    }
    let log_terms: Vec<f64> = reference
        .mass()
        .iter()
        .zip(critic.values())
        .filter(|(&qv, _)| qv > 0.0)
        .map(|(&qv, &t)| qv.ln() + t)
        .collect();
    let product_term = lse(&log_terms)?;
    Ok(DvEstimate::new(
        joint_term,
        product_term,
        joint.num_cells(),
        reference.num_cells(),
    ))
}

/// Monte-Carlo DV objective from explicit sample lists. With sample lists
/// that enumerate the space at exact frequencies this matches
/// [`dv_bound_exact`] to float precision.
pub fn dv_bound_sampled(
    critic: &Critic,
    joint_samples: &[Vec<usize>],
    product_samples: &[Vec<usize>],
) -> Result<DvEstimate> {
    if joint_samples.is_empty() {
        return Err(Error::EmptyInput("joint sample list".into()));
    }
    if product_samples.is_empty() {
        return Err(Error::EmptyInput("product sample list".into()));
    }
    let mut joint_term = 0.0;
    for s in joint_samples {
        joint_term += critic.value(s)?;
    }
    joint_term /= joint_samples.len() as f64;

    let values: Vec<f64> = product_samples
        .iter()
        .map(|s| critic.value(s))
        .collect::<Result<_>>()?;
    let product_term = log_sum_exp(&values)? - (product_samples.len() as f64).ln();
    Ok(DvEstimate::new(
        joint_term,
        product_term,
        joint_samples.len(),
        product_samples.len(),
    ))
}

/// Full-batch gradient ascent of the exact DV objective over a tabular
/// critic. The gradient at cell w is `p(w) - gibbs(w)`, so the fit walks the
/// Gibbs reweighting of the product measure toward the joint. Returns the
/// fitted critic and the bound trace (one entry per iteration plus the final
/// state).
pub fn tcne_fit_tabular(
    joint: &JointDistribution,
    iters: usize,
    learning_rate: f64,
) -> Result<(TabularCritic, Vec<DvEstimate>)> {
    if joint.num_cells() > MAX_FIT_CELLS {
        return Err(Error::SpaceTooLarge {
            cells: joint.num_cells(),
            cap: MAX_FIT_CELLS,
        });
    }
    if !(learning_rate > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "learning rate must be positive, got {learning_rate}"
        )));
    }
    let q = joint.product_of_marginals()?;
    let cells = joint.num_cells();
    let mut critic = TabularCritic::zeros(joint.alphabet_sizes().to_vec());
    let mut trace = Vec::with_capacity(iters + 1);

    let log_q: Vec<f64> = q
        .mass()
        .iter()
        .map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY })
        .collect();

    let mut scratch = vec![0.0; cells];
    for iter in 0..=iters {
        for (s, (&lq, &t)) in scratch.iter_mut().zip(log_q.iter().zip(critic.values())) {
            *s = lq + t;
        }
        let product_term = log_sum_exp(&scratch)?;
        let mut joint_term = 0.0;
        for (&p, &t) in joint.mass().iter().zip(critic.values()) {
            if p > 0.0 {
                joint_term += p * t;
            }
        }
        let est = DvEstimate::new(joint_term, product_term, cells, cells);
        if !est.lower_bound.is_finite() {
            return Err(Error::NonFiniteLoss { iter });
        }
        trace.push(est);
        if iter == iters {
            break;
        }
        // ascent step: T += lr * (p - gibbs)
        for (i, t) in critic.values.iter_mut().enumerate() {
            let gibbs = (scratch[i] - product_term).exp();
            *t += learning_rate * (joint.mass()[i] - gibbs);
        }
    }
    Ok((critic, trace))
}

/// A seeded source of discrete tuples from a joint distribution, with
/// exact product-of-marginals sampling for the reference measure.
pub trait TupleSource {
    fn alphabet_sizes(&self) -> &[usize];
    fn sample_joint(&mut self) -> Vec<usize>;
    fn sample_product(&mut self) -> Vec<usize>;
}

/// Inverse-CDF sampler over a dense joint table.
pub struct TableSampler {
    alphabet_sizes: Vec<usize>,
    coords: Vec<Vec<usize>>,
    cdf: Vec<f64>,
    marginal_cdfs: Vec<Vec<f64>>,
    rng: ChaCha8Rng,
}

impl TableSampler {
    pub fn new(dist: &JointDistribution, seed: u64) -> Result<Self> {
        let mut cdf = Vec::with_capacity(dist.num_cells());
        let mut acc = 0.0;
        for &p in dist.mass() {
            acc += p;
            cdf.push(acc);
        }
        let coords = (0..dist.num_cells()).map(|i| dist.coords_of(i)).collect();
        let marginal_cdfs = (0..dist.num_variables())
            .map(|v| {
                let m = dist.marginal_vector(v)?;
                let mut acc = 0.0;
                Ok(m.iter()
                    .map(|&p| {
                        acc += p;
                        acc
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            alphabet_sizes: dist.alphabet_sizes().to_vec(),
            coords,
            cdf,
            marginal_cdfs,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }
}

fn draw_from_cdf(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

impl TupleSource for TableSampler {
    fn alphabet_sizes(&self) -> &[usize] {
        &self.alphabet_sizes
    }

    fn sample_joint(&mut self) -> Vec<usize> {
        let u: f64 = self.rng.random();
        self.coords[draw_from_cdf(&self.cdf, u)].clone()
    }

    fn sample_product(&mut self) -> Vec<usize> {
        self.marginal_cdfs
            .iter()
            .map(|cdf| {
                let u: f64 = self.rng.random();
                draw_from_cdf(cdf, u)
            })
            .collect()
    }
}

/// Minibatch schedule for neural critic fitting.
#[derive(Debug, Clone)]
pub struct TcneConfig {
    pub iters: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Exponential-moving-average denominator for the product-term gradient.
    /// Off by default so the trained objective is exactly the DV bound.
    pub ema_correction: bool,
    pub ema_decay: f64,
}

impl Default for TcneConfig {
    fn default() -> Self {
        Self {
            iters: 2000,
            batch_size: 256,
            learning_rate: 0.05,
            momentum: 0.9,
            ema_correction: false,
            ema_decay: 0.99,
        }
    }
}

/// Minibatch ascent of the DV objective with a neural critic. The trace holds
/// one minibatch estimate per iteration; summarize with
/// [`smoothed_final_estimate`].
pub fn tcne_fit_neural(
    source: &mut dyn TupleSource,
    critic: &mut NeuralCritic,
    config: &TcneConfig,
) -> Result<Vec<DvEstimate>> {
    if critic.alphabet_sizes != source.alphabet_sizes() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", source.alphabet_sizes()),
            actual: format!("{:?}", critic.alphabet_sizes),
        });
    }
    if config.batch_size == 0 || config.iters == 0 {
        return Err(Error::InvalidParameter(
            "iters and batch_size must be positive".into(),
        ));
    }
    let n = config.batch_size;
    let sizes = critic.alphabet_sizes.clone();
    let mut opt = Sgd::new(config.learning_rate, config.momentum, 0.0, critic.net.num_params())?;
    let mut trace = Vec::with_capacity(config.iters);
    let mut log_ema: Option<f64> = None;

    for iter in 0..config.iters {
        let joint_x: Vec<Vec<f64>> = (0..n)
            .map(|_| one_hot_encode(&source.sample_joint(), &sizes))
            .collect();
        let product_x: Vec<Vec<f64>> = (0..n)
            .map(|_| one_hot_encode(&source.sample_product(), &sizes))
            .collect();

        let joint_traces: Vec<_> = joint_x
            .iter()
            .map(|x| critic.net.forward_trace(x))
            .collect::<Result<_>>()?;
        let product_traces: Vec<_> = product_x
            .iter()
            .map(|x| critic.net.forward_trace(x))
            .collect::<Result<_>>()?;

        let joint_term = joint_traces.iter().map(|t| t.output()[0]).sum::<f64>() / n as f64;
        let product_values: Vec<f64> = product_traces.iter().map(|t| t.output()[0]).collect();
        let lse = log_sum_exp(&product_values)?;
        let product_term = lse - (n as f64).ln();

        let est = DvEstimate::new(joint_term, product_term, n, n);
        if !est.lower_bound.is_finite() {
            return Err(Error::NonFiniteLoss { iter });
        }
        trace.push(est);

        // minimize -(bound): joint samples push up, product samples down
        let mut grad = critic.net.zero_grad();
        for t in &joint_traces {
            critic.net.backward(t, &[-1.0 / n as f64], &mut grad)?;
        }
        let log_denominator = if config.ema_correction {
            let updated = match log_ema {
                None => product_term,
                Some(prev) => log_sum_exp(&[
                    config.ema_decay.ln() + prev,
                    (1.0 - config.ema_decay).ln() + product_term,
                ])?,
            };
            log_ema = Some(updated);
            updated + (n as f64).ln()
        } else {
            lse
        };
        for (t, &v) in product_traces.iter().zip(&product_values) {
            let w = (v - log_denominator).exp();
            critic.net.backward(t, &[w], &mut grad)?;
        }
        opt.step(critic.net.params_mut(), &grad)
            .map_err(|_| Error::NonFiniteLoss { iter })?;
    }
    Ok(trace)
}

/// Mean lower bound over the last tenth of a trace (at least one point);
/// damps minibatch noise when judging convergence.
pub fn smoothed_final_estimate(trace: &[DvEstimate]) -> f64 {
    if trace.is_empty() {
        return f64::NAN;
    }
    let tail = (trace.len() / 10).max(1);
    let start = trace.len() - tail;
    trace[start..].iter().map(|e| e.lower_bound).sum::<f64>() / tail as f64
}

/// Writes a trace as CSV with columns `iter,joint_term,product_term,lower_bound`.
pub fn write_trace_csv<W: Write>(mut w: W, trace: &[DvEstimate]) -> Result<()> {
    writeln!(w, "iter,joint_term,product_term,lower_bound")?;
    for (i, e) in trace.iter().enumerate() {
        writeln!(w, "{},{},{},{}", i, e.joint_term, e.product_term, e.lower_bound)?;
    }
    Ok(())
}

/// Convenience wrapper writing the trace to a file path.
pub fn save_trace_csv(path: &Path, trace: &[DvEstimate]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_trace_csv(std::io::BufWriter::new(file), trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;

    fn xor_triple() -> JointDistribution {
        let mut mass = vec![0.0; 8];
        for a in 0..2usize {
            for v in 0..2usize {
                mass[(a * 2 + v) * 2 + (a ^ v)] = 0.25;
            }
        }
        JointDistribution::new(vec![2, 2, 2], mass).unwrap()
    }

    fn random_dist(seed: u64, sizes: Vec<usize>) -> JointDistribution {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cells: usize = sizes.iter().product();
        let w: Vec<f64> = (0..cells).map(|_| rng.random::<f64>() + 1e-3).collect();
        JointDistribution::from_weights(sizes, w).unwrap()
    }

    #[test]
    fn constant_critic_gives_zero_bound() {
        let d = random_dist(1, vec![2, 3, 2]);
        let critic = TabularCritic::new(vec![2, 3, 2], vec![2.7; 12]).unwrap();
        let est = dv_bound_exact(&critic, &d).unwrap();
        assert!(est.lower_bound.abs() < 1e-12, "{}", est.lower_bound);
    }

    #[test]
    fn log_ratio_critic_is_tight_on_xor() {
        let d = xor_triple();
        let q = d.product_of_marginals().unwrap();
        for offset in [0.0, -4.2, 13.0] {
            let critic = TabularCritic::log_ratio(&d, &q, offset).unwrap();
            let est = dv_bound_exact(&critic, &d).unwrap();
            let tc = d.total_correlation().unwrap();
            assert!(
                (est.lower_bound - tc).abs() < 1e-10,
                "offset {offset}: bound {} vs TC {tc}",
                est.lower_bound
            );
        }
    }

    #[test]
    fn random_critics_never_beat_tc() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..200 {
            let d = random_dist(100 + trial, vec![2, 2, 3]);
            let tc = d.total_correlation().unwrap();
            let values: Vec<f64> = (0..12).map(|_| rng.random_range(-3.0..3.0)).collect();
            let critic = TabularCritic::new(vec![2, 2, 3], values).unwrap();
            let est = dv_bound_exact(&critic, &d).unwrap();
            assert!(
                est.lower_bound <= tc + 1e-9,
                "trial {trial}: bound {} exceeds TC {tc}",
                est.lower_bound
            );
        }
    }

    #[test]
    fn shift_invariance_of_exact_bound() {
        let d = random_dist(9, vec![3, 2, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let values: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let base = dv_bound_exact(&TabularCritic::new(vec![3, 2, 2], values.clone()).unwrap(), &d)
            .unwrap();
        let shifted_vals: Vec<f64> = values.iter().map(|v| v + 7.5).collect();
        let shifted =
            dv_bound_exact(&TabularCritic::new(vec![3, 2, 2], shifted_vals).unwrap(), &d).unwrap();
        assert!((base.lower_bound - shifted.lower_bound).abs() < 1e-12);
    }

    #[test]
    fn sampled_enumeration_matches_exact() {
        let d = xor_triple();
        let q = d.product_of_marginals().unwrap();
        let critic_t = TabularCritic::log_ratio(&d, &q, 0.3).unwrap();

        // enumerate the support with multiplicity proportional to exact mass
        let mut joint_samples = Vec::new();
        for idx in 0..d.num_cells() {
            let reps = (d.mass()[idx] * 4.0).round() as usize;
            for _ in 0..reps {
                joint_samples.push(d.coords_of(idx));
            }
        }
        let product_samples: Vec<Vec<usize>> = (0..8).map(|i| d.coords_of(i)).collect();

        let exact = dv_bound_exact(&critic_t, &d).unwrap();
        let sampled = dv_bound_sampled(&Critic::Tabular(critic_t), &joint_samples, &product_samples)
            .unwrap();
        assert!(
            (exact.lower_bound - sampled.lower_bound).abs() < 1e-12,
            "{} vs {}",
            exact.lower_bound,
            sampled.lower_bound
        );
    }

    #[test]
    fn sampled_single_constant_sample() {
        let critic = Critic::Tabular(TabularCritic::new(vec![2, 2], vec![1.5; 4]).unwrap());
        let est = dv_bound_sampled(&critic, &[vec![0, 1]], &[vec![1, 0]]).unwrap();
        assert!(est.lower_bound.abs() < 1e-12);
        assert!(dv_bound_sampled(&critic, &[], &[vec![0, 0]]).is_err());
    }

    #[test]
    fn sampled_monte_carlo_close_to_ln2() {
        let d = xor_triple();
        let q = d.product_of_marginals().unwrap();
        let critic = Critic::Tabular(TabularCritic::log_ratio(&d, &q, 0.0).unwrap());
        let mut src = TableSampler::new(&d, 77).unwrap();
        let n = 10_000;
        let joint: Vec<Vec<usize>> = (0..n).map(|_| src.sample_joint()).collect();
        let product: Vec<Vec<usize>> = (0..n).map(|_| src.sample_product()).collect();
        let est = dv_bound_sampled(&critic, &joint, &product).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!(
            (est.lower_bound - ln2).abs() < 0.05,
            "estimate {} too far from ln 2",
            est.lower_bound
        );
    }

    #[test]
    fn tabular_fit_reaches_tc() {
        let cases: Vec<(JointDistribution, f64)> = vec![
            (JointDistribution::uniform(vec![2, 3, 2]).unwrap(), 0.0),
            (xor_triple(), std::f64::consts::LN_2),
            (
                {
                    let k = 3usize;
                    let mut mass = vec![0.0; 27];
                    for i in 0..k {
                        mass[(i * k + i) * k + i] = 1.0 / 3.0;
                    }
                    JointDistribution::new(vec![3, 3, 3], mass).unwrap()
                },
                2.0 * 3.0f64.ln(),
            ),
        ];
        for (d, tc) in cases {
            let (_, trace) = tcne_fit_tabular(&d, 20_000, 1.0).unwrap();
            let last = trace.last().unwrap().lower_bound;
            assert!((last - tc).abs() < 1e-3, "converged to {last}, TC = {tc}");
        }
    }

    #[test]
    fn tabular_fit_trace_is_monotone() {
        let (_, trace) = tcne_fit_tabular(&xor_triple(), 500, 0.5).unwrap();
        for w in trace.windows(2) {
            assert!(
                w[1].lower_bound >= w[0].lower_bound - 1e-6,
                "trace decreased: {} -> {}",
                w[0].lower_bound,
                w[1].lower_bound
            );
        }
    }

    #[test]
    fn tabular_fit_two_variables_is_mine() {
        // correlated bits, p(agree) = 0.9
        let d = JointDistribution::new(vec![2, 2], vec![0.45, 0.05, 0.05, 0.45]).unwrap();
        let mi = d
            .mutual_information(
                &crate::prob::VariableSubset::new(vec![0]).unwrap(),
                &crate::prob::VariableSubset::new(vec![1]).unwrap(),
            )
            .unwrap();
        let (_, trace) = tcne_fit_tabular(&d, 20_000, 1.0).unwrap();
        let last = trace.last().unwrap().lower_bound;
        assert!((last - mi).abs() < 1e-3, "fit {last} vs exact MI {mi}");
    }

    #[test]
    fn tabular_fit_rejects_large_spaces() {
        let d = JointDistribution::uniform(vec![30, 30, 30]).unwrap();
        assert!(matches!(
            tcne_fit_tabular(&d, 10, 0.1),
            Err(Error::SpaceTooLarge { .. })
        ));
    }

    #[test]
    fn table_sampler_is_deterministic() {
        let d = random_dist(4, vec![2, 2, 2]);
        let mut a = TableSampler::new(&d, 123).unwrap();
        let mut b = TableSampler::new(&d, 123).unwrap();
        for _ in 0..50 {
            assert_eq!(a.sample_joint(), b.sample_joint());
            assert_eq!(a.sample_product(), b.sample_product());
        }
    }

    #[test]
    fn neural_fit_two_correlated_bits() {
        let d = JointDistribution::new(vec![2, 2], vec![0.45, 0.05, 0.05, 0.45]).unwrap();
        let mi = 0.9 * (1.8f64).ln() + 0.1 * (0.2f64).ln();
        let mut src = TableSampler::new(&d, 55).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(56);
        let net = DenseNet::glorot(vec![4, 16, 16, 1], Activation::Relu, &mut rng).unwrap();
        let mut critic = NeuralCritic::new(net, vec![2, 2]).unwrap();
        let cfg = TcneConfig {
            iters: 1200,
            batch_size: 128,
            learning_rate: 0.05,
            momentum: 0.9,
            ..TcneConfig::default()
        };
        let trace = tcne_fit_neural(&mut src, &mut critic, &cfg).unwrap();
        let est = smoothed_final_estimate(&trace);
        assert!((est - mi).abs() < 0.1, "estimate {est} vs exact MI {mi}");
    }

    #[test]
    fn neural_fit_reports_divergence_with_iteration() {
        let d = JointDistribution::new(vec![2, 2], vec![0.45, 0.05, 0.05, 0.45]).unwrap();
        let mut src = TableSampler::new(&d, 70).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let net = DenseNet::glorot(vec![4, 8, 1], Activation::Relu, &mut rng).unwrap();
        let mut critic = NeuralCritic::new(net, vec![2, 2]).unwrap();
        let cfg = TcneConfig {
            iters: 200,
            batch_size: 32,
            learning_rate: 1e14,
            momentum: 0.9,
            ..TcneConfig::default()
        };
        match tcne_fit_neural(&mut src, &mut critic, &cfg) {
            Err(Error::NonFiniteLoss { iter }) => assert!(iter < 200),
            other => panic!("expected a non-finite-loss abort, got {other:?}"),
        }
    }

    #[test]
    fn neural_fit_with_ema_correction_still_converges() {
        let d = JointDistribution::new(vec![2, 2], vec![0.45, 0.05, 0.05, 0.45]).unwrap();
        let mi = 0.9 * (1.8f64).ln() + 0.1 * (0.2f64).ln();
        let mut src = TableSampler::new(&d, 72).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let net = DenseNet::glorot(vec![4, 16, 16, 1], Activation::Relu, &mut rng).unwrap();
        let mut critic = NeuralCritic::new(net, vec![2, 2]).unwrap();
        let cfg = TcneConfig {
            iters: 1200,
            batch_size: 128,
            learning_rate: 0.05,
            momentum: 0.9,
            ema_correction: true,
            ema_decay: 0.99,
        };
        let trace = tcne_fit_neural(&mut src, &mut critic, &cfg).unwrap();
        let est = smoothed_final_estimate(&trace);
        assert!((est - mi).abs() < 0.1, "estimate {est} vs exact MI {mi}");
    }

    #[test]
    fn neural_fit_xor_approaches_ln2() {
        let d = xor_triple();
        let mut src = TableSampler::new(&d, 60).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let net = DenseNet::glorot(vec![6, 16, 16, 1], Activation::Relu, &mut rng).unwrap();
        let mut critic = NeuralCritic::new(net, vec![2, 2, 2]).unwrap();
        let cfg = TcneConfig {
            iters: 1500,
            batch_size: 256,
            learning_rate: 0.05,
            momentum: 0.9,
            ..TcneConfig::default()
        };
        let trace = tcne_fit_neural(&mut src, &mut critic, &cfg).unwrap();
        let est = smoothed_final_estimate(&trace);
        let ln2 = std::f64::consts::LN_2;
        assert!(
            est >= ln2 - 0.1 && est <= ln2 + 0.05,
            "estimate {est} outside [ln2 - 0.1, ln2 + 0.05]"
        );
    }

    #[test]
    fn neural_fit_independent_source_stays_near_zero() {
        let d = JointDistribution::uniform(vec![2, 3, 2]).unwrap();
        let mut src = TableSampler::new(&d, 62).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let net = DenseNet::glorot(vec![7, 16, 16, 1], Activation::Relu, &mut rng).unwrap();
        let mut critic = NeuralCritic::new(net, vec![2, 3, 2]).unwrap();
        let cfg = TcneConfig {
            iters: 800,
            batch_size: 256,
            learning_rate: 0.05,
            momentum: 0.9,
            ..TcneConfig::default()
        };
        let trace = tcne_fit_neural(&mut src, &mut critic, &cfg).unwrap();
        let est = smoothed_final_estimate(&trace);
        assert!(est.abs() < 0.05, "estimate {est} not near zero");
    }

    #[test]
    fn smoothing_takes_last_tenth() {
        let trace: Vec<DvEstimate> = (0..20)
            .map(|i| DvEstimate::new(i as f64, 0.0, 1, 1))
            .collect();
        // last 2 entries are 18, 19
        assert!((smoothed_final_estimate(&trace) - 18.5).abs() < 1e-12);
    }

    #[test]
    fn trace_csv_format() {
        let trace = vec![DvEstimate::new(0.5, 0.25, 4, 4)];
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "iter,joint_term,product_term,lower_bound\n0,0.5,0.25,0.25\n");
    }
}
