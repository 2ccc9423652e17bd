//! Exact information measures on dense finite joint distributions.
//!
//! Everything here works on a flat row-major probability table over a finite
//! product space and serves as the brute-force oracle for the estimators and
//! losses built on top of it. All quantities are in nats. The convention
//! `0 * ln 0 = 0` applies throughout, and KL absolute-continuity violations
//! are hard errors rather than infinities.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Hard cap on table size; this module is an oracle, not a scalable engine.
pub const MAX_CELLS: usize = 1_000_000;

/// Tolerance for "mass sums to one" checks.
pub const MASS_TOL: f64 = 1e-12;

/// A dense probability table over a finite product space.
///
/// Variables are indexed `0..num_variables()`; by convention the label, when
/// present, is the last variable. The mass array is row-major: the last
/// variable varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    alphabet_sizes: Vec<usize>,
    mass: Vec<f64>,
}

/// On-disk JSON schema for a distribution.
#[derive(Serialize, Deserialize)]
struct DistributionFile {
    alphabet_sizes: Vec<usize>,
    mass: Vec<f64>,
}

impl JointDistribution {
    /// Validates and builds a distribution from alphabet sizes and a flat
    /// row-major mass array.
    pub fn new(alphabet_sizes: Vec<usize>, mass: Vec<f64>) -> Result<Self> {
        if alphabet_sizes.is_empty() {
            return Err(Error::InvalidDistribution(
                "no variables (alphabet_sizes is empty)".into(),
            ));
        }
        if alphabet_sizes.iter().any(|&k| k == 0) {
            return Err(Error::InvalidDistribution(
                "alphabet sizes must be positive".into(),
            ));
        }
        let cells = alphabet_sizes
            .iter()
            .try_fold(1usize, |acc, &k| acc.checked_mul(k))
            .ok_or(Error::SpaceTooLarge {
                cells: usize::MAX,
                cap: MAX_CELLS,
            })?;
        if cells > MAX_CELLS {
            return Err(Error::SpaceTooLarge {
                cells,
                cap: MAX_CELLS,
            });
        }
        if mass.len() != cells {
            return Err(Error::InvalidDistribution(format!(
                "mass has {} entries but the product space has {} cells",
                mass.len(),
                cells
            )));
        }
        if let Some(p) = mass.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "mass entry {p} is negative or non-finite"
            )));
        }
        let sum: f64 = mass.iter().sum();
        if (sum - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidDistribution(format!("mass sums to {sum}")));
        }
        Ok(Self {
            alphabet_sizes,
            mass,
        })
    }

    /// Builds a distribution from non-negative weights, normalizing them.
    pub fn from_weights(alphabet_sizes: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {total}, cannot normalize"
            )));
        }
        let mass = weights.iter().map(|w| w / total).collect();
        Self::new(alphabet_sizes, mass)
    }

    /// Uniform distribution over the product space.
    pub fn uniform(alphabet_sizes: Vec<usize>) -> Result<Self> {
        let cells: usize = alphabet_sizes.iter().product();
        Self::new(alphabet_sizes, vec![1.0 / cells as f64; cells])
    }

    /// Point mass at a single outcome.
    pub fn point_mass(alphabet_sizes: Vec<usize>, point: &[usize]) -> Result<Self> {
        let cells: usize = alphabet_sizes.iter().product();
        let mut mass = vec![0.0; cells];
        let tmp = Self {
            alphabet_sizes: alphabet_sizes.clone(),
            mass: vec![],
        };
        let idx = tmp.index_of(point)?;
        mass[idx] = 1.0;
        Self::new(alphabet_sizes, mass)
    }

    pub fn num_variables(&self) -> usize {
        self.alphabet_sizes.len()
    }

    pub fn alphabet_sizes(&self) -> &[usize] {
        &self.alphabet_sizes
    }

    pub fn num_cells(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Flat index of an outcome tuple (row-major, last variable fastest).
    pub fn index_of(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.alphabet_sizes.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} coordinates", self.alphabet_sizes.len()),
                actual: format!("{} coordinates", coords.len()),
            });
        }
        let mut idx = 0usize;
        for (i, (&c, &k)) in coords.iter().zip(&self.alphabet_sizes).enumerate() {
            if c >= k {
                return Err(Error::IndexOutOfRange {
                    index: c,
                    num_vars: k.max(i),
                });
            }
            idx = idx * k + c;
        }
        Ok(idx)
    }

    /// Outcome tuple for a flat index.
    pub fn coords_of(&self, mut idx: usize) -> Vec<usize> {
        let mut coords = vec![0usize; self.alphabet_sizes.len()];
        for (c, &k) in coords.iter_mut().zip(&self.alphabet_sizes).rev() {
            *c = idx % k;
            idx /= k;
        }
        coords
    }

    /// Probability of one outcome tuple.
    pub fn prob(&self, coords: &[usize]) -> Result<f64> {
        Ok(self.mass[self.index_of(coords)?])
    }

    fn check_subset(&self, subset: &VariableSubset) -> Result<()> {
        if subset.indices().is_empty() {
            return Err(Error::EmptySubset);
        }
        for &i in subset.indices() {
            if i >= self.num_variables() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    num_vars: self.num_variables(),
                });
            }
        }
        Ok(())
    }

    /// Marginal distribution over `keep`, in the order given by `keep`.
    pub fn marginalize(&self, keep: &VariableSubset) -> Result<JointDistribution> {
        self.check_subset(keep)?;
        let kept_sizes: Vec<usize> = keep.indices().iter().map(|&i| self.alphabet_sizes[i]).collect();
        let kept_cells: usize = kept_sizes.iter().product();
        let mut out = vec![0.0; kept_cells];
        for (idx, &p) in self.mass.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let coords = self.coords_of(idx);
            let mut kept_idx = 0usize;
            for (&var, &k) in keep.indices().iter().zip(&kept_sizes) {
                kept_idx = kept_idx * k + coords[var];
            }
            out[kept_idx] += p;
        }
        // Accumulated sums of a valid mass can drift a hair past the
        // constructor tolerance; renormalizing by the true total keeps the
        // contract without changing exact inputs.
        let total: f64 = out.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            for v in &mut out {
                *v /= total;
            }
        }
        JointDistribution::new(kept_sizes, out)
    }

    /// Marginal probability vector of a single variable.
    pub fn marginal_vector(&self, var: usize) -> Result<Vec<f64>> {
        let m = self.marginalize(&VariableSubset::new(vec![var])?)?;
        Ok(m.mass)
    }

    /// Shannon entropy of the marginal over `vars`, in nats.
    pub fn entropy(&self, vars: &VariableSubset) -> Result<f64> {
        let marginal = self.marginalize(vars)?;
        Ok(entropy_of_mass(&marginal.mass))
    }

    /// Joint entropy of all variables, in nats.
    pub fn joint_entropy(&self) -> f64 {
        entropy_of_mass(&self.mass)
    }

    /// Mutual information I(a; b) = H(a) + H(b) - H(a, b), in nats.
    ///
    /// Guaranteed >= -1e-12 up to the documented float slack; not clamped,
    /// so exact identities stay exact. Clamp at the reporting layer.
    pub fn mutual_information(&self, a: &VariableSubset, b: &VariableSubset) -> Result<f64> {
        let ab = a.union_disjoint(b)?;
        Ok(self.entropy(a)? + self.entropy(b)? - self.entropy(&ab)?)
    }

    /// Conditional mutual information
    /// I(a; b | c) = H(a,c) + H(b,c) - H(a,b,c) - H(c), in nats.
    ///
    /// `c` must be non-empty; use [`mutual_information`](Self::mutual_information)
    /// for the unconditional case.
    pub fn conditional_mutual_information(
        &self,
        a: &VariableSubset,
        b: &VariableSubset,
        c: &VariableSubset,
    ) -> Result<f64> {
        if c.indices().is_empty() {
            return Err(Error::EmptySubset);
        }
        let ac = a.union_disjoint(c)?;
        let bc = b.union_disjoint(c)?;
        let abc = a.union_disjoint(b)?.union_disjoint(c)?;
        Ok(self.entropy(&ac)? + self.entropy(&bc)? - self.entropy(&abc)? - self.entropy(c)?)
    }

    /// Total correlation: sum of per-variable entropies minus the joint
    /// entropy. Equal (within 1e-12) to the KL divergence from the joint to
    /// the product of its marginals; that identity is property-tested.
    pub fn total_correlation(&self) -> Result<f64> {
        if self.num_variables() < 2 {
            return Err(Error::TooFewVariables {
                needed: 2,
                found: self.num_variables(),
            });
        }
        let mut sum = 0.0;
        for v in 0..self.num_variables() {
            sum += self.entropy(&VariableSubset::new(vec![v])?)?;
        }
        Ok(sum - self.joint_entropy())
    }

    /// The fully factorized distribution with the same per-variable marginals.
    pub fn product_of_marginals(&self) -> Result<JointDistribution> {
        let marginals: Vec<Vec<f64>> = (0..self.num_variables())
            .map(|v| self.marginal_vector(v))
            .collect::<Result<_>>()?;
        let mut mass = vec![1.0; self.num_cells()];
        for (idx, m) in mass.iter_mut().enumerate() {
            for (v, &c) in self.coords_of(idx).iter().enumerate() {
                *m *= marginals[v][c];
            }
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            for v in &mut mass {
                *v /= total;
            }
        }
        JointDistribution::new(self.alphabet_sizes.clone(), mass)
    }

    /// The two decompositions of the total correlation through the last
    /// variable (the label): `I(y; rest) + TC(rest)` and
    /// `sum_m I(y; x_m) + [sum_m H(x_m|y) - H(rest|y)]`. For three variables
    /// the second bracket is exactly `I(x0; x1 | y)`.
    pub fn label_decompositions(&self) -> Result<LabelDecomposition> {
        let vars = self.num_variables();
        if vars < 2 {
            return Err(Error::TooFewVariables {
                needed: 2,
                found: vars,
            });
        }
        let label = vars - 1;
        let y = VariableSubset::new(vec![label])?;
        let rest = VariableSubset::new((0..label).collect())?;

        let fused_mi = self.mutual_information(&y, &rest)?;
        let modality_tc = if label >= 2 {
            let mut sum = 0.0;
            for m in 0..label {
                sum += self.entropy(&VariableSubset::new(vec![m])?)?;
            }
            sum - self.entropy(&rest)?
        } else {
            0.0
        };

        let h_y = self.entropy(&y)?;
        let mut per_label_mi = Vec::with_capacity(label);
        let mut conditional_alignment = 0.0;
        for m in 0..label {
            let xm = VariableSubset::new(vec![m])?;
            per_label_mi.push(self.mutual_information(&y, &xm)?);
            let xm_y = xm.union_disjoint(&y)?;
            conditional_alignment += self.entropy(&xm_y)? - h_y;
        }
        let all = rest.union_disjoint(&y)?;
        conditional_alignment -= self.entropy(&all)? - h_y;

        Ok(LabelDecomposition {
            fused_mi,
            modality_tc,
            per_label_mi,
            conditional_alignment,
        })
    }

    /// KL divergence KL(self || q), in nats. Errors if q(x) = 0 while
    /// self(x) > 0 (absolute continuity), rather than returning infinity.
    pub fn kl_divergence(&self, q: &JointDistribution) -> Result<f64> {
        if self.alphabet_sizes != q.alphabet_sizes {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.alphabet_sizes),
                actual: format!("{:?}", q.alphabet_sizes),
            });
        }
        let mut kl = 0.0;
        for (cell, (&p, &qv)) in self.mass.iter().zip(&q.mass).enumerate() {
            if p == 0.0 {
                continue;
            }
            if qv == 0.0 {
                return Err(Error::AbsoluteContinuity { cell, p });
            }
            kl += p * (p / qv).ln();
        }
        Ok(kl)
    }

    /// Reweights `self` (the base measure) by `exp(critic)` and normalizes:
    /// dG = e^T / E_base[e^T] dBase.
    ///
    /// Critic values of negative infinity are allowed and zero out the cell;
    /// NaN or positive infinity on the support of the base is an error.
    pub fn gibbs_distribution(&self, critic: &[f64]) -> Result<JointDistribution> {
        if critic.len() != self.num_cells() {
            return Err(Error::LengthMismatch {
                left: critic.len(),
                right: self.num_cells(),
            });
        }
        // log-domain normalization: log g = log base + T - LSE(log base + T)
        let mut log_weights = Vec::with_capacity(self.num_cells());
        for (&p, &t) in self.mass.iter().zip(critic) {
            if p == 0.0 {
                log_weights.push(f64::NEG_INFINITY);
                continue;
            }
            if t.is_nan() || t == f64::INFINITY {
                return Err(Error::NonFinite("critic value on base support".into()));
            }
            log_weights.push(p.ln() + t);
        }
        let log_z = crate::nn::log_sum_exp(&log_weights)?;
        if !log_z.is_finite() {
            return Err(Error::NonFinite("gibbs normalizer".into()));
        }
        let mass: Vec<f64> = log_weights.iter().map(|lw| (lw - log_z).exp()).collect();
        let total: f64 = mass.iter().sum();
        let mass = mass.iter().map(|m| m / total).collect();
        JointDistribution::new(self.alphabet_sizes.clone(), mass)
    }

    /// Loads a distribution from the JSON file format
    /// `{"alphabet_sizes": [..], "mass": [..]}`, validating all invariants.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: DistributionFile = serde_json::from_str(&text)?;
        Self::new(file.alphabet_sizes, file.mass)
    }

    /// Writes the distribution in the JSON file format.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = DistributionFile {
            alphabet_sizes: self.alphabet_sizes.clone(),
            mass: self.mass.clone(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }
}

/// Both routes from mutual informations to the total correlation, with the
/// label as the last variable. Each sums to the total correlation:
/// `fused_mi + modality_tc` and `sum(per_label_mi) + conditional_alignment`.
#[derive(Debug, Clone)]
pub struct LabelDecomposition {
    /// I(y; all modalities jointly).
    pub fused_mi: f64,
    /// TC among the modalities alone.
    pub modality_tc: f64,
    /// I(y; x_m) per modality.
    pub per_label_mi: Vec<f64>,
    /// Inter-modality dependence given the label.
    pub conditional_alignment: f64,
}

/// An ordered set of distinct variable indices selecting the arguments of
/// entropy, mutual information, and marginalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableSubset {
    indices: Vec<usize>,
}

impl VariableSubset {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        for (i, &a) in indices.iter().enumerate() {
            if indices[..i].contains(&a) {
                return Err(Error::OverlappingSubsets { index: a });
            }
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Concatenation of two subsets, erroring on any shared index.
    pub fn union_disjoint(&self, other: &VariableSubset) -> Result<VariableSubset> {
        let mut all = self.indices.clone();
        for &i in &other.indices {
            if all.contains(&i) {
                return Err(Error::OverlappingSubsets { index: i });
            }
            all.push(i);
        }
        VariableSubset::new(all)
    }
}

fn entropy_of_mass(mass: &[f64]) -> f64 {
    mass.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}

/// Jensen-Shannon divergence between two categorical distributions, in nats.
/// Symmetric, zero iff the inputs match, and bounded by ln 2.
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    validate_categorical(p)?;
    validate_categorical(q)?;
    let mut js = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let mi = 0.5 * (pi + qi);
        if pi > 0.0 {
            js += 0.5 * pi * (pi / mi).ln();
        }
        if qi > 0.0 {
            js += 0.5 * qi * (qi / mi).ln();
        }
    }
    Ok(js.max(0.0))
}

/// Shannon entropy of a categorical distribution, in nats.
pub fn categorical_entropy(p: &[f64]) -> f64 {
    entropy_of_mass(p)
}

fn validate_categorical(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::EmptyInput("categorical distribution".into()));
    }
    if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidDistribution(format!(
            "categorical entry {v} is negative or non-finite"
        )));
    }
    let sum: f64 = p.iter().sum();
    // softmax outputs carry float roundoff; 1e-9 is forgiving but catches
    // unnormalized inputs
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!(
            "categorical sums to {sum}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subset(idx: &[usize]) -> VariableSubset {
        VariableSubset::new(idx.to_vec()).unwrap()
    }

    /// a, v uniform bits, y = a XOR v; mass 1/4 on the four consistent cells.
    fn xor_triple() -> JointDistribution {
        let mut mass = vec![0.0; 8];
        for a in 0..2usize {
            for v in 0..2usize {
                let y = a ^ v;
                mass[(a * 2 + v) * 2 + y] = 0.25;
            }
        }
        JointDistribution::new(vec![2, 2, 2], mass).unwrap()
    }

    fn seeded_random_dist(seed: u64, sizes: Vec<usize>) -> JointDistribution {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let cells: usize = sizes.iter().product();
        let weights: Vec<f64> = (0..cells).map(|_| rng.random::<f64>() + 1e-3).collect();
        JointDistribution::from_weights(sizes, weights).unwrap()
    }

    #[test]
    fn rejects_bad_mass() {
        let err = JointDistribution::new(vec![2], vec![0.4, 0.5]).unwrap_err();
        assert!(err.to_string().contains("mass sums to 0.9"), "{err}");

        assert!(JointDistribution::new(vec![2], vec![1.5, -0.5]).is_err());
        assert!(JointDistribution::new(vec![2, 2], vec![0.5, 0.5]).is_err());
        assert!(JointDistribution::new(vec![101, 101, 101], vec![]).is_err());
    }

    #[test]
    fn index_round_trip() {
        let d = JointDistribution::uniform(vec![3, 2, 4]).unwrap();
        for idx in 0..d.num_cells() {
            let coords = d.coords_of(idx);
            assert_eq!(d.index_of(&coords).unwrap(), idx);
        }
    }

    #[test]
    fn marginalize_uniform_keeps_uniform() {
        let d = JointDistribution::uniform(vec![2, 2]).unwrap();
        let m = d.marginalize(&subset(&[0])).unwrap();
        assert_eq!(m.alphabet_sizes(), &[2]);
        for &p in m.mass() {
            assert!((p - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn marginalize_point_mass_projects_support() {
        let d = JointDistribution::point_mass(vec![2, 2], &[1, 0]).unwrap();
        let m = d.marginalize(&subset(&[1])).unwrap();
        assert_eq!(m.mass(), &[1.0, 0.0]);
    }

    #[test]
    fn marginalize_matches_double_loop() {
        let d = seeded_random_dist(7, vec![3, 2, 2]);
        let m = d.marginalize(&subset(&[0, 2])).unwrap();
        // brute-force oracle: explicit summation over the dropped axis
        for x0 in 0..3 {
            for x2 in 0..2 {
                let mut expect = 0.0;
                for x1 in 0..2 {
                    expect += d.prob(&[x0, x1, x2]).unwrap();
                }
                let got = m.prob(&[x0, x2]).unwrap();
                assert!((got - expect).abs() < 1e-15, "({x0},{x2}): {got} vs {expect}");
            }
        }
    }

    #[test]
    fn marginalize_rejects_bad_subsets() {
        let d = JointDistribution::uniform(vec![2, 2]).unwrap();
        assert!(matches!(
            d.marginalize(&VariableSubset::new(vec![]).unwrap()),
            Err(Error::EmptySubset)
        ));
        assert!(matches!(
            d.marginalize(&subset(&[2])),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn entropy_uniform_and_point() {
        let u = JointDistribution::uniform(vec![4]).unwrap();
        assert!((u.entropy(&subset(&[0])).unwrap() - 4.0f64.ln()).abs() < 1e-15);

        let p = JointDistribution::point_mass(vec![4], &[2]).unwrap();
        assert_eq!(p.entropy(&subset(&[0])).unwrap(), 0.0);
    }

    #[test]
    fn entropy_matches_direct_sum() {
        let d = seeded_random_dist(11, vec![3, 3]);
        let h = d.entropy(&subset(&[0, 1])).unwrap();
        let direct: f64 = d.mass().iter().map(|&p| -p * p.ln()).sum();
        assert!((h - direct).abs() < 1e-14);
        // bounded by log of the product alphabet
        assert!(h >= 0.0 && h <= 9.0f64.ln() + 1e-12);
    }

    #[test]
    fn mi_independent_is_zero() {
        let d = JointDistribution::uniform(vec![3, 4]).unwrap();
        let mi = d.mutual_information(&subset(&[0]), &subset(&[1])).unwrap();
        assert!(mi.abs() < 1e-12);
    }

    #[test]
    fn mi_identity_channel() {
        let k = 5usize;
        let mut mass = vec![0.0; k * k];
        for i in 0..k {
            mass[i * k + i] = 1.0 / k as f64;
        }
        let d = JointDistribution::new(vec![k, k], mass).unwrap();
        let mi = d.mutual_information(&subset(&[0]), &subset(&[1])).unwrap();
        assert!((mi - (k as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn xor_mutual_informations() {
        let d = xor_triple();
        let ln2 = std::f64::consts::LN_2;
        // y carries nothing about either input alone, everything about the pair
        let i_ya = d.mutual_information(&subset(&[2]), &subset(&[0])).unwrap();
        let i_y_av = d
            .mutual_information(&subset(&[2]), &subset(&[0, 1]))
            .unwrap();
        assert!(i_ya.abs() < 1e-12, "I(y;a) = {i_ya}");
        assert!((i_y_av - ln2).abs() < 1e-12, "I(y;(a,v)) = {i_y_av}");

        let cmi = d
            .conditional_mutual_information(&subset(&[0]), &subset(&[1]), &subset(&[2]))
            .unwrap();
        assert!((cmi - ln2).abs() < 1e-12, "I(a;v|y) = {cmi}");
    }

    #[test]
    fn cmi_independent_triple_is_zero() {
        let d = JointDistribution::uniform(vec![2, 3, 2]).unwrap();
        let cmi = d
            .conditional_mutual_information(&subset(&[0]), &subset(&[1]), &subset(&[2]))
            .unwrap();
        assert!(cmi.abs() < 1e-12);
    }

    #[test]
    fn cmi_rejects_empty_conditioner() {
        let d = JointDistribution::uniform(vec![2, 2, 2]).unwrap();
        let empty = VariableSubset::new(vec![]).unwrap();
        assert!(matches!(
            d.conditional_mutual_information(&subset(&[0]), &subset(&[1]), &empty),
            Err(Error::EmptySubset)
        ));
    }

    #[test]
    fn overlapping_subsets_rejected() {
        let d = JointDistribution::uniform(vec![2, 2, 2]).unwrap();
        assert!(matches!(
            d.mutual_information(&subset(&[0, 1]), &subset(&[1])),
            Err(Error::OverlappingSubsets { index: 1 })
        ));
    }

    #[test]
    fn tc_trivial_cases() {
        // independent product: TC = 0
        let d = JointDistribution::uniform(vec![2, 3, 2]).unwrap();
        assert!(d.total_correlation().unwrap().abs() < 1e-12);

        // three identical copies of uniform over k: TC = 2 ln k
        let k = 3usize;
        let mut mass = vec![0.0; k * k * k];
        for i in 0..k {
            mass[(i * k + i) * k + i] = 1.0 / k as f64;
        }
        let d = JointDistribution::new(vec![k, k, k], mass).unwrap();
        let tc = d.total_correlation().unwrap();
        assert!((tc - 2.0 * (k as f64).ln()).abs() < 1e-12, "TC = {tc}");

        // XOR triple: TC = ln 2, and both definitional forms agree
        let d = xor_triple();
        let tc = d.total_correlation().unwrap();
        assert!((tc - std::f64::consts::LN_2).abs() < 1e-12);
        let kl = d.kl_divergence(&d.product_of_marginals().unwrap()).unwrap();
        assert!((tc - kl).abs() < 1e-12);
    }

    #[test]
    fn tc_requires_two_variables() {
        let d = JointDistribution::uniform(vec![4]).unwrap();
        assert!(matches!(
            d.total_correlation(),
            Err(Error::TooFewVariables { .. })
        ));
    }

    #[test]
    fn product_of_marginals_idempotent_on_products() {
        let d = JointDistribution::uniform(vec![2, 3]).unwrap();
        let p = d.product_of_marginals().unwrap();
        for (&a, &b) in d.mass().iter().zip(p.mass()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn product_of_marginals_xor_is_uniform() {
        let p = xor_triple().product_of_marginals().unwrap();
        for &m in p.mass() {
            assert!((m - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn product_of_marginals_point_mass() {
        let d = JointDistribution::point_mass(vec![2, 2], &[0, 1]).unwrap();
        let p = d.product_of_marginals().unwrap();
        assert_eq!(p.mass(), d.mass());
    }

    #[test]
    fn kl_basics() {
        let d = seeded_random_dist(3, vec![2, 3]);
        assert!(d.kl_divergence(&d).unwrap().abs() < 1e-15);

        let k = 4usize;
        let point = JointDistribution::point_mass(vec![k], &[1]).unwrap();
        let unif = JointDistribution::uniform(vec![k]).unwrap();
        let kl = point.kl_divergence(&unif).unwrap();
        assert!((kl - (k as f64).ln()).abs() < 1e-15);

        // direct-sum oracle on a random pair
        let p = seeded_random_dist(5, vec![3, 2]);
        let q = seeded_random_dist(6, vec![3, 2]);
        let kl = p.kl_divergence(&q).unwrap();
        let direct: f64 = p
            .mass()
            .iter()
            .zip(q.mass())
            .map(|(&a, &b)| a * (a / b).ln())
            .sum();
        assert!((kl - direct).abs() < 1e-14);
    }

    #[test]
    fn kl_absolute_continuity_is_error() {
        let p = JointDistribution::uniform(vec![2]).unwrap();
        let q = JointDistribution::point_mass(vec![2], &[0]).unwrap();
        assert!(matches!(
            p.kl_divergence(&q),
            Err(Error::AbsoluteContinuity { .. })
        ));
        // the other direction is fine: support(q) is inside support(p)
        assert!(q.kl_divergence(&p).is_ok());
    }

    #[test]
    fn kl_shape_mismatch() {
        let p = JointDistribution::uniform(vec![2, 2]).unwrap();
        let q = JointDistribution::uniform(vec![4]).unwrap();
        assert!(matches!(
            p.kl_divergence(&q),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn js_cases() {
        let ln2 = std::f64::consts::LN_2;
        assert_eq!(js_divergence(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);

        let js = js_divergence(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((js - ln2).abs() < 1e-15);

        // direct-sum oracle
        let p = [0.5, 0.5];
        let q = [1.0, 0.0];
        let m = [0.75, 0.25];
        let expect = 0.5 * (0.5 * (0.5f64 / m[0]).ln() + 0.5 * (0.5f64 / m[1]).ln())
            + 0.5 * (1.0 * (1.0f64 / m[0]).ln());
        let js = js_divergence(&p, &q).unwrap();
        assert!((js - expect).abs() < 1e-15);

        assert!(js_divergence(&[1.0], &[0.5, 0.5]).is_err());
        assert!(js_divergence(&[0.7, 0.7], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn label_decompositions_sum_to_tc() {
        for seed in 0..20 {
            let d = seeded_random_dist(500 + seed, vec![3, 2, 4]);
            let tc = d.total_correlation().unwrap();
            let dec = d.label_decompositions().unwrap();
            assert!((dec.fused_mi + dec.modality_tc - tc).abs() < 1e-12);
            let route2: f64 = dec.per_label_mi.iter().sum::<f64>() + dec.conditional_alignment;
            assert!((route2 - tc).abs() < 1e-12);
        }
        // on the XOR triple the alignment term given y is exactly ln 2
        let d = xor_triple();
        let dec = d.label_decompositions().unwrap();
        assert!((dec.conditional_alignment - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(dec.per_label_mi.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn gibbs_constant_critic_is_identity() {
        let d = seeded_random_dist(9, vec![2, 2, 2]);
        let g = d.gibbs_distribution(&vec![3.7; 8]).unwrap();
        for (&a, &b) in d.mass().iter().zip(g.mass()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gibbs_log_ratio_recovers_joint() {
        let joint = xor_triple();
        let base = joint.product_of_marginals().unwrap();
        let critic: Vec<f64> = joint
            .mass()
            .iter()
            .zip(base.mass())
            .map(|(&p, &q)| if p == 0.0 { f64::NEG_INFINITY } else { (p / q).ln() })
            .collect();
        let g = base.gibbs_distribution(&critic).unwrap();
        for (&a, &b) in joint.mass().iter().zip(g.mass()) {
            assert!((a - b).abs() < 1e-10);
        }

        // shifting the critic by a constant changes nothing
        let shifted: Vec<f64> = critic.iter().map(|t| t + 11.3).collect();
        let g2 = base.gibbs_distribution(&shifted).unwrap();
        for (&a, &b) in g.mass().iter().zip(g2.mass()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gibbs_rejects_nan_on_support() {
        let d = JointDistribution::uniform(vec![2]).unwrap();
        assert!(d.gibbs_distribution(&[f64::NAN, 0.0]).is_err());
        assert!(d.gibbs_distribution(&[f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn file_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dist.json");
        let d = seeded_random_dist(2, vec![2, 2, 2]);
        d.save(&path).unwrap();
        let loaded = JointDistribution::load(&path).unwrap();
        assert_eq!(d, loaded);

        std::fs::write(
            &path,
            r#"{"alphabet_sizes": [2], "mass": [0.45, 0.45]}"#,
        )
        .unwrap();
        let err = JointDistribution::load(&path).unwrap_err();
        assert!(err.to_string().contains("mass sums to 0.9"), "{err}");
    }
}
