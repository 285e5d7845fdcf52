//! Observational datasets, the overlap partition and noise estimation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::real::{euclidean, Real};

/// Treatment arm of a unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Arm {
    Control,
    Treated,
}

impl Arm {
    pub fn from_indicator(z: bool) -> Self {
        if z {
            Arm::Treated
        } else {
            Arm::Control
        }
    }

    pub fn index(self) -> usize {
        match self {
            Arm::Control => 0,
            Arm::Treated => 1,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Arm::Control => Arm::Treated,
            Arm::Treated => Arm::Control,
        }
    }

    pub const BOTH: [Arm; 2] = [Arm::Control, Arm::Treated];
}

/// Noise standard deviations, either shared by all units or per unit.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSd<T> {
    Shared(T),
    PerUnit(Vec<T>),
}

/// `n` units with covariates, outcome, binary treatment, propensity and noise sd.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    x: Vec<T>,
    dim: usize,
    y: Vec<T>,
    z: Vec<bool>,
    pi: Vec<T>,
    sigma: Vec<T>,
}

impl<T: Real> Dataset<T> {
    /// Builds a dataset from row-major covariates.
    pub fn new(
        x: Vec<Vec<T>>,
        y: Vec<T>,
        z: Vec<bool>,
        pi: Vec<T>,
        sigma: NoiseSd<T>,
    ) -> Result<Self> {
        let dim = x.first().map_or(0, Vec::len);
        if x.iter().any(|row| row.len() != dim) {
            return Err(Error::invalid("covariate rows have differing lengths"));
        }
        let flat = x.into_iter().flatten().collect();
        Self::from_flat(flat, dim, y, z, pi, sigma)
    }

    /// Builds a dataset from a flat row-major covariate buffer of `n * dim` values.
    pub fn from_flat(
        x: Vec<T>,
        dim: usize,
        y: Vec<T>,
        z: Vec<bool>,
        pi: Vec<T>,
        sigma: NoiseSd<T>,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::invalid("dataset has no units"));
        }
        if dim == 0 {
            return Err(Error::invalid("covariate dimension must be positive"));
        }
        if x.len() != n * dim || z.len() != n || pi.len() != n {
            return Err(Error::invalid(format!(
                "length mismatch: {} outcomes, {} treatments, {} propensities, {} covariate values for dimension {dim}",
                n,
                z.len(),
                pi.len(),
                x.len()
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite covariate at unit {}", i / dim)));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite outcome at unit {i}")));
        }
        if let Some(i) = pi
            .iter()
            .position(|&p| !(p >= T::zero() && p <= T::one()))
        {
            return Err(Error::invalid(format!("propensity of unit {i} outside [0, 1]")));
        }
        let sigma = match sigma {
            NoiseSd::Shared(s) => vec![s; n],
            NoiseSd::PerUnit(s) if s.len() == n => s,
            NoiseSd::PerUnit(s) => {
                return Err(Error::invalid(format!(
                    "{} noise sds for {n} units",
                    s.len()
                )))
            }
        };
        if let Some(i) = sigma.iter().position(|&s| !(s > T::zero() && s.is_finite())) {
            return Err(Error::invalid(format!("noise sd of unit {i} must be positive")));
        }
        Ok(Self {
            x,
            dim,
            y,
            z,
            pi,
            sigma,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x(&self, i: usize) -> &[T] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn x_flat(&self) -> &[T] {
        &self.x
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn z(&self) -> &[bool] {
        &self.z
    }

    pub fn arm(&self, i: usize) -> Arm {
        Arm::from_indicator(self.z[i])
    }

    pub fn pi(&self) -> &[T] {
        &self.pi
    }

    pub fn sigma(&self) -> &[T] {
        &self.sigma
    }

    pub fn distance(&self, i: usize, j: usize) -> T {
        euclidean(self.x(i), self.x(j))
    }

    pub fn arm_count(&self, arm: Arm) -> usize {
        self.z.iter().filter(|&&z| Arm::from_indicator(z) == arm).count()
    }

    /// Same units with a new outcome vector.
    pub fn with_outcomes(&self, y: Vec<T>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::invalid("outcome vector length differs from dataset size"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite outcome"));
        }
        Ok(Self { y, ..self.clone() })
    }

    /// Same units with new treatments, propensities and outcomes.
    pub fn with_assignment(&self, z: Vec<bool>, pi: Vec<T>, y: Vec<T>) -> Result<Self> {
        Self::from_flat(
            self.x.clone(),
            self.dim,
            y,
            z,
            pi,
            NoiseSd::PerUnit(self.sigma.clone()),
        )
    }

    /// Same units with new noise sds.
    pub fn with_noise(&self, sigma: NoiseSd<T>) -> Result<Self> {
        Self::from_flat(
            self.x.clone(),
            self.dim,
            self.y.clone(),
            self.z.clone(),
            self.pi.clone(),
            sigma,
        )
    }

    /// Restriction to the listed units, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let mut x = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            x.extend_from_slice(self.x(i));
        }
        Self::from_flat(
            x,
            self.dim,
            idx.iter().map(|&i| self.y[i]).collect(),
            idx.iter().map(|&i| self.z[i]).collect(),
            idx.iter().map(|&i| self.pi[i]).collect(),
            NoiseSd::PerUnit(idx.iter().map(|&i| self.sigma[i]).collect()),
        )
    }
}

/// `min(pi, 1 - pi)`.
pub fn overlap_measure<T: Real>(pi: T) -> T {
    pi.min(T::one() - pi)
}

/// Split of units into overlap (`q >= eps`) and non-overlap (`q < eps`) sets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapPartition<T> {
    pub epsilon: T,
    pub overlap: Vec<bool>,
    /// `1/n` on non-overlap units, zero elsewhere.
    pub weights: Vec<T>,
}

impl<T: Real> OverlapPartition<T> {
    pub fn n_overlap(&self) -> usize {
        self.overlap.iter().filter(|&&o| o).count()
    }

    pub fn n_non_overlap(&self) -> usize {
        self.overlap.len() - self.n_overlap()
    }

    /// True when every unit is in the overlap set.
    pub fn is_degenerate(&self) -> bool {
        self.n_non_overlap() == 0
    }

    pub fn overlap_indices(&self) -> Vec<usize> {
        (0..self.overlap.len()).filter(|&i| self.overlap[i]).collect()
    }

    pub fn non_overlap_indices(&self) -> Vec<usize> {
        (0..self.overlap.len()).filter(|&i| !self.overlap[i]).collect()
    }
}

pub fn partition<T: Real>(data: &Dataset<T>, epsilon: T) -> Result<OverlapPartition<T>> {
    if !(epsilon > T::zero() && epsilon < T::lit(0.5)) {
        return Err(Error::invalid(format!("epsilon {epsilon} outside (0, 1/2)")));
    }
    let inv_n = T::one() / T::from_count(data.n());
    let overlap: Vec<bool> = data
        .pi()
        .iter()
        .map(|&p| overlap_measure(p) >= epsilon)
        .collect();
    let weights = overlap
        .iter()
        .map(|&o| if o { T::zero() } else { inv_n })
        .collect();
    Ok(OverlapPartition {
        epsilon,
        overlap,
        weights,
    })
}

/// `tau = tau_plus + tau_minus`, the sample ATE split by overlap status.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimandDecomposition<T> {
    pub tau: T,
    pub tau_plus: T,
    pub tau_minus: T,
}

/// Splits the sample ATE given per-unit effects `f(x_i,1) - f(x_i,0)`.
pub fn decompose_estimand<T: Real>(
    effects: &[T],
    part: &OverlapPartition<T>,
) -> Result<EstimandDecomposition<T>> {
    if effects.len() != part.overlap.len() {
        return Err(Error::invalid("effect vector length differs from partition size"));
    }
    let n = T::from_count(effects.len());
    let (mut plus, mut minus) = (T::zero(), T::zero());
    for (&e, &o) in effects.iter().zip(&part.overlap) {
        if o {
            plus += e;
        } else {
            minus += e;
        }
    }
    Ok(EstimandDecomposition {
        tau: (plus + minus) / n,
        tau_plus: plus / n,
        tau_minus: minus / n,
    })
}

/// Nearest-neighbour variance estimate, pooled over both arms.
///
/// Each unit is compared with the mean outcome of its `j` nearest neighbours
/// in the same arm; the squared residual is inflated by `j / (j + 1)` to
/// account for the neighbours' own noise. Returns the estimated sd.
pub fn estimate_noise_sd<T: Real>(data: &Dataset<T>, j: usize) -> Result<T> {
    if j == 0 {
        return Err(Error::invalid("number of neighbours must be positive"));
    }
    let mut total = T::zero();
    let scale = T::from_count(j) / T::from_count(j + 1);
    for arm in Arm::BOTH {
        let members: Vec<usize> = (0..data.n()).filter(|&i| data.arm(i) == arm).collect();
        if members.len() <= j {
            return Err(Error::InsufficientUnits {
                arm: arm.index() as u8,
                available: members.len(),
                needed: j + 1,
            });
        }
        let mut dists: Vec<(T, usize)> = Vec::with_capacity(members.len());
        for &i in &members {
            dists.clear();
            dists.extend(
                members
                    .iter()
                    .filter(|&&k| k != i)
                    .map(|&k| (data.distance(i, k), k)),
            );
            // Ties broken by lowest index for determinism.
            dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let mean = dists[..j].iter().map(|&(_, k)| data.y()[k]).sum::<T>() / T::from_count(j);
            let r = data.y()[i] - mean;
            total += scale * r * r;
        }
    }
    Ok((total / T::from_count(data.n())).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64], z: &[bool], pi: &[f64]) -> Dataset<f64> {
        Dataset::new(
            xs.iter().map(|&v| vec![v]).collect(),
            vec![0.0; xs.len()],
            z.to_vec(),
            pi.to_vec(),
            NoiseSd::Shared(1.0),
        )
        .unwrap()
    }

    #[test]
    fn partition_assigns_uniform_weight_to_non_overlap() {
        let d = line(&[0.0, 1.0, 2.0, 3.0], &[false, true, false, true], &[0.01, 0.5, 0.4, 0.97]);
        let p = partition(&d, 0.05).unwrap();
        assert_eq!(p.overlap, vec![false, true, true, false]);
        assert_eq!(p.weights, vec![0.25, 0.0, 0.0, 0.25]);
        assert!(!p.is_degenerate());
        assert!(partition(&d, 0.5).is_err());
        assert!(partition(&d, 0.0).is_err());
    }

    #[test]
    fn boundary_propensity_counts_as_overlap() {
        let d = line(&[0.0, 1.0], &[false, true], &[0.25, 0.75]);
        let p = partition(&d, 0.25).unwrap();
        assert!(p.is_degenerate());
    }

    #[test]
    fn decomposition_adds_up() {
        let d = line(&[0.0, 1.0, 2.0], &[false, true, true], &[0.0, 0.5, 1.0]);
        let p = partition(&d, 0.1).unwrap();
        let dec = decompose_estimand(&[1.0, 2.0, 4.0], &p).unwrap();
        assert!((dec.tau - 7.0 / 3.0).abs() < 1e-15);
        assert!((dec.tau_plus - 2.0 / 3.0).abs() < 1e-15);
        assert!((dec.tau_minus - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let bad_pi = Dataset::new(vec![vec![0.0]], vec![0.0], vec![true], vec![1.5], NoiseSd::Shared(1.0));
        assert!(bad_pi.is_err());
        let bad_sigma = Dataset::new(vec![vec![0.0]], vec![0.0], vec![true], vec![0.5], NoiseSd::Shared(0.0));
        assert!(bad_sigma.is_err());
        let ragged = Dataset::new(
            vec![vec![0.0], vec![0.0, 1.0]],
            vec![0.0; 2],
            vec![true, false],
            vec![0.5; 2],
            NoiseSd::Shared(1.0),
        );
        assert!(ragged.is_err());
    }

    #[test]
    fn noise_estimate_on_hand_computed_example() {
        // Control outcomes 0, 1, 3 at x = 0, 1, 3; treated 0, 2, 2 at x = 0, 1, 2; J = 1.
        // Control residuals: 0-1, 1-0, 3-1 -> 1 + 1 + 4; treated: 0-2, 2-0 (tie -> lowest index), 2-2 -> 4 + 4 + 0.
        let d = Dataset::new(
            vec![vec![0.0], vec![1.0], vec![3.0], vec![0.0], vec![1.0], vec![2.0]],
            vec![0.0, 1.0, 3.0, 0.0, 2.0, 2.0],
            vec![false, false, false, true, true, true],
            vec![0.5; 6],
            NoiseSd::Shared(1.0),
        )
        .unwrap();
        let s = estimate_noise_sd(&d, 1).unwrap();
        let expected = (0.5 * 14.0 / 6.0f64).sqrt();
        assert!((s - expected).abs() < 1e-14, "{s} vs {expected}");
        assert!(matches!(estimate_noise_sd(&d, 3), Err(Error::InsufficientUnits { .. })));
    }
}
