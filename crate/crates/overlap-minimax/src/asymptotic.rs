//! Normal-approximation baselines: augmented inverse propensity weighting on
//! the full sample and on the overlap units, plus choice of the trimming
//! threshold.

use serde::Serialize;

use crate::data::{partition, Dataset};
use crate::error::{Error, Result};
use crate::lipschitz::Regressor;
use crate::minimax_ci::{normal_quantile, ConfidenceInterval};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticCi<T> {
    pub estimate: T,
    pub se: T,
    pub lower: T,
    pub upper: T,
    pub alpha: T,
    pub epsilon_used: Option<T>,
    pub n_used: usize,
}

impl<T: Real> AsymptoticCi<T> {
    pub fn length(&self) -> T {
        self.upper - self.lower
    }

    pub fn contains(&self, v: T) -> bool {
        self.lower <= v && v <= self.upper
    }
}

impl<T: Real> ConfidenceInterval<T> for AsymptoticCi<T> {
    fn lower(&self) -> T {
        self.lower
    }
    fn upper(&self) -> T {
        self.upper
    }
    fn alpha(&self) -> T {
        self.alpha
    }
}

/// Influence-function scores over `units`.
fn scores<T: Real>(data: &Dataset<T>, units: &[usize], regressor: &dyn Regressor<T>) -> Result<Vec<T>> {
    units
        .iter()
        .map(|&i| {
            let p = data.pi()[i];
            if !(p > T::zero() && p < T::one()) {
                return Err(Error::invalid(format!(
                    "unit {i} has propensity {p}; trim units with propensity 0 or 1 first"
                )));
            }
            let x = data.x(i);
            let m1 = regressor.predict(x, crate::data::Arm::Treated);
            let m0 = regressor.predict(x, crate::data::Arm::Control);
            let y = data.y()[i];
            let resid = if data.z()[i] {
                (y - m1) / p
            } else {
                -(y - m0) / (T::one() - p)
            };
            Ok(m1 - m0 + resid)
        })
        .collect()
}

fn normal_interval<T: Real>(psi: &[T], scale: T, alpha: T, epsilon: Option<T>) -> Result<AsymptoticCi<T>> {
    let m = psi.len();
    if m < 2 {
        return Err(Error::invalid("need at least two units for a variance estimate"));
    }
    let mf = T::from_count(m);
    let mean = psi.iter().copied().sum::<T>() / mf;
    let var = psi.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / (mf - T::one());
    let estimate = scale * mean;
    let se = scale * (var / mf).sqrt();
    let z = normal_quantile(T::one() - alpha / T::lit(2.0));
    Ok(AsymptoticCi {
        estimate,
        se,
        lower: estimate - z * se,
        upper: estimate + z * se,
        alpha,
        epsilon_used: epsilon,
        n_used: m,
    })
}

/// AIPW estimate of the sample average effect.
pub fn aipw<T: Real>(data: &Dataset<T>, regressor: &dyn Regressor<T>, alpha: T) -> Result<AsymptoticCi<T>> {
    crate::minimax_ci::check_alpha(alpha)?;
    let units: Vec<usize> = (0..data.n()).collect();
    let psi = scores(data, &units, regressor)?;
    normal_interval(&psi, T::one(), alpha, None)
}

/// AIPW on units with overlap at least `epsilon`, rescaled by `n_+/n` so the
/// target is the unnormalised overlap part of the effect.
pub fn aipw_partial<T: Real>(
    data: &Dataset<T>,
    epsilon: T,
    regressor: &dyn Regressor<T>,
    alpha: T,
) -> Result<AsymptoticCi<T>> {
    crate::minimax_ci::check_alpha(alpha)?;
    let part = partition(data, epsilon)?;
    let units = part.overlap_indices();
    if units.is_empty() {
        return Err(Error::Degenerate(format!("no overlap units at epsilon {epsilon}")));
    }
    let psi = scores(data, &units, regressor)?;
    let scale = T::from_count(units.len()) / T::from_count(data.n());
    normal_interval(&psi, scale, alpha, Some(epsilon))
}

/// Candidate with the shortest trimmed interval; ties go to the smaller
/// threshold. Candidates with no usable overlap units are skipped.
pub fn select_epsilon<T: Real>(
    data: &Dataset<T>,
    candidates: &[T],
    regressor: &dyn Regressor<T>,
    alpha: T,
) -> Result<(T, AsymptoticCi<T>)> {
    if candidates.is_empty() {
        return Err(Error::invalid("empty candidate set"));
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut best: Option<(T, AsymptoticCi<T>)> = None;
    let mut last_err = None;
    for eps in sorted {
        match aipw_partial(data, eps, regressor, alpha) {
            Ok(ci) => {
                if best.as_ref().is_none_or(|(_, b)| ci.length() < b.length()) {
                    best = Some((eps, ci));
                }
            }
            Err(e @ (Error::Degenerate(_) | Error::InvalidInput(_))) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::Degenerate("no feasible threshold".into())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Arm, NoiseSd};

    struct Zero;
    impl Regressor<f64> for Zero {
        fn predict(&self, _: &[f64], _: Arm) -> f64 {
            0.0
        }
    }

    struct Truth;
    impl Regressor<f64> for Truth {
        fn predict(&self, x: &[f64], arm: Arm) -> f64 {
            x[0] + if arm == Arm::Treated { 1.0 + x[0] } else { 0.0 }
        }
    }

    fn data(pi: Vec<f64>) -> Dataset<f64> {
        let n = pi.len();
        let x: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / n as f64]).collect();
        let z: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| x[i][0] + if z[i] { 1.0 + x[i][0] } else { 0.0 })
            .collect();
        Dataset::new(x, y, z, pi, NoiseSd::Shared(1.0)).unwrap()
    }

    #[test]
    fn horvitz_thompson_reduction() {
        let d = data(vec![0.5; 12]);
        let ci = aipw(&d, &Zero, 0.05).unwrap();
        let ht: f64 = (0..12)
            .map(|i| if d.z()[i] { 2.0 * d.y()[i] } else { -2.0 * d.y()[i] })
            .sum::<f64>()
            / 12.0;
        assert!((ci.estimate - ht).abs() < 1e-12);
        assert!((ci.upper - ci.estimate - 1.959963984540054 * ci.se).abs() < 1e-12);
    }

    #[test]
    fn exact_regression_recovers_effect() {
        let d = data(vec![0.3; 10]);
        let ci = aipw(&d, &Truth, 0.05).unwrap();
        let tau: f64 = (0..10).map(|i| 1.0 + d.x(i)[0]).sum::<f64>() / 10.0;
        assert!((ci.estimate - tau).abs() < 1e-12);
    }

    #[test]
    fn trimming_below_min_overlap_is_plain_aipw() {
        let d = data((0..10).map(|i| 0.2 + 0.05 * i as f64).collect());
        let a = aipw(&d, &Truth, 0.1).unwrap();
        let b = aipw_partial(&d, 0.1, &Truth, 0.1).unwrap();
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.se, b.se);
        assert_eq!(b.epsilon_used, Some(0.1));
    }

    #[test]
    fn partial_estimate_is_rescaled_overlap_mean() {
        let mut pi = vec![0.5; 10];
        pi[0] = 0.01;
        pi[1] = 0.99;
        let d = data(pi);
        let b = aipw_partial(&d, 0.05, &Truth, 0.05).unwrap();
        let m: f64 = (2..10).map(|i| 1.0 + d.x(i)[0]).sum::<f64>() / 8.0;
        assert!((b.estimate - 0.8 * m).abs() < 1e-12);
        assert_eq!(b.n_used, 8);
    }

    #[test]
    fn extreme_propensity_is_rejected() {
        let mut pi = vec![0.5; 6];
        pi[4] = 0.0;
        let err = aipw(&data(pi), &Zero, 0.05).unwrap_err();
        assert!(err.to_string().contains("unit 4"));
    }

    #[test]
    fn selection_picks_shortest() {
        let pi: Vec<f64> = (0..40).map(|i| 0.005 + 0.0125 * i as f64).collect();
        let d = data(pi);
        let cands = [0.01, 0.02, 0.03, 0.04, 0.05];
        let (eps, ci) = select_epsilon(&d, &cands, &Zero, 0.05).unwrap();
        assert!(cands.contains(&eps));
        for &c in &cands {
            let other = aipw_partial(&d, c, &Zero, 0.05).unwrap();
            assert!(ci.length() <= other.length());
        }
        let (single, _) = select_epsilon(&d, &[0.03], &Zero, 0.05).unwrap();
        assert_eq!(single, 0.03);
    }
}
