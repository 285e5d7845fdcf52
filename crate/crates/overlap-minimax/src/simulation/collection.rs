//! Choosing where to collect more data, and intervals that stay valid while
//! data keeps arriving.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotic::aipw_partial;
use crate::data::{partition, Dataset, NoiseSd};
use crate::error::{Error, Result};
use crate::lipschitz::{KnnRegressor, LipschitzClass, DEFAULT_KNN_K};
use crate::minimax_ci::{confidence_sequence, minimax_interval, ConfidenceSequence};
use crate::modulus::ModulusProblem;

use super::{interval_distance, replication_rng, Simulated};

/// One-dimensional design with low-overlap bands at both ends and in the middle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollectionParams {
    pub n: usize,
    /// Propensity on `(0, 0.1)` and `(0.9, 1)`.
    pub end_propensity: f64,
    /// Propensity on `(0.4, 0.6)`.
    pub middle_propensity: f64,
    pub h: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for CollectionParams {
    fn default() -> Self {
        Self {
            n: 500,
            end_propensity: 0.01,
            middle_propensity: 0.03,
            h: 0.25,
            sigma: 0.06,
            seed: 0,
        }
    }
}

impl CollectionParams {
    pub fn propensity(&self, x: f64) -> f64 {
        if x < 0.1 || x > 0.9 {
            self.end_propensity
        } else if x > 0.4 && x < 0.6 {
            self.middle_propensity
        } else {
            0.5
        }
    }

    pub fn baseline(&self, x: f64) -> f64 {
        0.5 * (2.0 * std::f64::consts::PI * x).sin()
    }

    pub fn effect(&self, x: f64) -> f64 {
        8.0 * self.h * (x - 0.5).powi(2)
    }

    /// Largest slope of either regression function.
    pub fn lipschitz_bound(&self) -> f64 {
        std::f64::consts::PI + 8.0 * self.h
    }

    fn outcome<R: Rng + ?Sized>(&self, x: f64, z: bool, noise: &Normal<f64>, rng: &mut R) -> f64 {
        let mean = self.baseline(x) + if z { self.effect(x) } else { 0.0 };
        mean + noise.sample(rng)
    }

    fn noise(&self) -> Result<Normal<f64>> {
        Normal::new(0.0, self.sigma).map_err(|e| Error::invalid(e.to_string()))
    }
}

pub fn simulate_collection(params: &CollectionParams, replication: u64) -> Result<Simulated> {
    if params.n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    let mut rng = replication_rng(params.seed, replication);
    let noise = params.noise()?;
    let (mut x, mut y, mut z, mut pi, mut f0, mut f1) = (vec![], vec![], vec![], vec![], vec![], vec![]);
    for _ in 0..params.n {
        let xi: f64 = rng.random();
        let p = params.propensity(xi);
        let zi = rng.random::<f64>() < p;
        x.push(xi);
        z.push(zi);
        pi.push(p);
        y.push(params.outcome(xi, zi, &noise, &mut rng));
        f0.push(params.baseline(xi));
        f1.push(params.baseline(xi) + params.effect(xi));
    }
    let data = Dataset::from_flat(x, 1, y, z, pi, NoiseSd::Shared(params.sigma))?;
    Ok(Simulated { data, f0, f1 })
}

/// Units whose first covariate falls in one of `regions` (open intervals)
/// are selected with probability `select_probability`; selected units get
/// propensity `new_propensity` and a fresh treatment draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingOption {
    pub name: String,
    pub regions: Vec<(f64, f64)>,
    #[serde(default = "one")]
    pub select_probability: f64,
    #[serde(default = "half")]
    pub new_propensity: f64,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

impl SamplingOption {
    pub fn new(name: &str, regions: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            regions,
            select_probability: 1.0,
            new_propensity: 0.5,
        }
    }

    /// Collect in the middle band.
    pub fn option_1() -> Self {
        Self::new("option_1", vec![(0.4, 0.6)])
    }

    /// Collect at both ends.
    pub fn option_2() -> Self {
        Self::new("option_2", vec![(0.0, 0.1), (0.9, 1.0)])
    }

    /// Each low-overlap unit independently with probability 1/2.
    pub fn oracle() -> Self {
        Self {
            select_probability: 0.5,
            ..Self::new("oracle", vec![(0.0, 0.1), (0.4, 0.6), (0.9, 1.0)])
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.regions.iter().any(|&(a, b)| x[0] > a && x[0] < b)
    }

    /// Selected units and their new treatments.
    fn draw<R: Rng + ?Sized>(&self, data: &Dataset<f64>, rng: &mut R) -> (Vec<bool>, Vec<f64>, Vec<bool>) {
        let n = data.n();
        let (mut z, mut pi) = (data.z().to_vec(), data.pi().to_vec());
        let mut selected = vec![false; n];
        for i in 0..n {
            if self.contains(data.x(i)) && rng.random::<f64>() < self.select_probability {
                selected[i] = true;
                pi[i] = self.new_propensity;
                z[i] = rng.random::<f64>() < self.new_propensity;
            }
        }
        (z, pi, selected)
    }
}

/// Mean length of the non-overlap interval over `n_mc` treatment draws under
/// `option`. Outcomes are not needed: interval lengths do not depend on them.
pub fn evaluate_sampling_option(
    data: &Dataset<f64>,
    option: &SamplingOption,
    epsilon: f64,
    lipschitz: f64,
    alpha: f64,
    n_mc: usize,
    seed: u64,
) -> Result<f64> {
    if n_mc == 0 {
        return Err(Error::invalid("n_mc must be at least 1"));
    }
    let class = LipschitzClass::euclidean(data, lipschitz)?;
    let lengths: Vec<f64> = (0..n_mc as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(seed, r);
            let (z, pi, _) = option.draw(data, &mut rng);
            let zeroed = data.with_assignment(z, pi, vec![0.0; data.n()])?;
            let part = partition(&zeroed, epsilon)?;
            let rep = minimax_interval(&zeroed, part.weights, class.clone(), alpha)?;
            Ok(rep.length())
        })
        .collect::<Result<_>>()?;
    Ok(lengths.iter().sum::<f64>() / n_mc as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptionAipwpSummary {
    pub option: String,
    pub coverage: f64,
    pub coverage_se: f64,
    pub mean_distance: f64,
    pub distance_se: f64,
    pub replications: usize,
}

/// Trimmed AIPW after actually collecting data under `option`, scored
/// against the full sample effect.
pub fn sampling_option_aipwp(
    params: &CollectionParams,
    option: &SamplingOption,
    epsilon: f64,
    alpha: f64,
    reps: usize,
) -> Result<OptionAipwpSummary> {
    let noise = params.noise()?;
    let results: Vec<(bool, f64)> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let sim = simulate_collection(params, r)?;
            let mut rng = replication_rng(params.seed ^ 0x0c01_1ec7, r);
            let (z, pi, selected) = option.draw(&sim.data, &mut rng);
            let mut y = sim.data.y().to_vec();
            for i in (0..y.len()).filter(|&i| selected[i]) {
                y[i] = params.outcome(sim.data.x(i)[0], z[i], &noise, &mut rng);
            }
            let data = sim.data.with_assignment(z, pi, y)?;
            let tau = sim.effects().iter().sum::<f64>() / data.n() as f64;
            let part = partition(&data, epsilon)?;
            let reg = KnnRegressor::fit(&data.subset(&part.overlap_indices())?, DEFAULT_KNN_K)?;
            let ci = aipw_partial(&data, epsilon, &reg, alpha)?;
            Ok((ci.contains(tau), interval_distance(ci.lower, ci.upper, tau)))
        })
        .collect::<Result<_>>()?;
    let k = results.len() as f64;
    let coverage = results.iter().filter(|r| r.0).count() as f64 / k;
    let mean_distance = results.iter().map(|r| r.1).sum::<f64>() / k;
    let var = results.iter().map(|r| (r.1 - mean_distance).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
    Ok(OptionAipwpSummary {
        option: option.name.clone(),
        coverage,
        coverage_se: (coverage * (1.0 - coverage) / k).sqrt(),
        mean_distance,
        distance_se: (var / k).sqrt(),
        replications: results.len(),
    })
}

/// Default collection schedule: three slices of the middle band, then three
/// slices of the lower band.
pub fn default_epochs() -> Vec<(f64, f64)> {
    vec![(0.40, 0.47), (0.47, 0.53), (0.53, 0.60), (0.0, 0.03), (0.03, 0.07), (0.07, 0.10)]
}

/// One run of continual collection. At step `t` every unit in the `t`-th
/// region is re-assigned with propensity 1/2 and its outcome re-drawn; the
/// returned targets are the non-overlap effects at each step.
pub fn run_confidence_sequence(
    params: &CollectionParams,
    epochs: &[(f64, f64)],
    epsilon: f64,
    lipschitz: f64,
    alpha: f64,
    replication: u64,
) -> Result<(ConfidenceSequence<f64>, Vec<f64>)> {
    let sim = simulate_collection(params, replication)?;
    let noise = params.noise()?;
    let mut rng = replication_rng(params.seed ^ 0x5e9_0e11ce, replication);
    let class = LipschitzClass::euclidean(&sim.data, lipschitz)?;
    let effects = sim.effects();
    let n = sim.data.n();
    let (mut z, mut pi, mut y) = (sim.data.z().to_vec(), sim.data.pi().to_vec(), sim.data.y().to_vec());
    let mut steps = Vec::with_capacity(epochs.len());
    let mut targets = Vec::with_capacity(epochs.len());
    for &(a, b) in epochs {
        for i in 0..n {
            let x = sim.data.x(i)[0];
            if x > a && x < b {
                pi[i] = 0.5;
                z[i] = rng.random::<f64>() < 0.5;
                y[i] = params.outcome(x, z[i], &noise, &mut rng);
            }
        }
        let data = sim.data.with_assignment(z.clone(), pi.clone(), y.clone())?;
        let part = partition(&data, epsilon)?;
        targets.push(part.weights.iter().zip(&effects).map(|(w, t)| w * t).sum());
        steps.push(ModulusProblem::new(data, part.weights, class.clone())?);
    }
    Ok((confidence_sequence(&steps, alpha)?, targets))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfSeqSummary {
    pub joint_coverage: f64,
    pub joint_coverage_se: f64,
    pub step_coverage: Vec<f64>,
    pub mean_half_length: Vec<f64>,
    pub replications: usize,
    pub failures: usize,
}

pub fn confidence_sequence_experiment(
    params: &CollectionParams,
    epochs: &[(f64, f64)],
    epsilon: f64,
    lipschitz: f64,
    alpha: f64,
    reps: usize,
) -> Result<ConfSeqSummary> {
    if reps == 0 {
        return Err(Error::invalid("reps must be at least 1"));
    }
    let runs: Vec<Option<(ConfidenceSequence<f64>, Vec<f64>)>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| run_confidence_sequence(params, epochs, epsilon, lipschitz, alpha, r).ok())
        .collect();
    let ok: Vec<_> = runs.iter().flatten().collect();
    let k = ok.len() as f64;
    if ok.is_empty() {
        return Err(Error::Degenerate("every replication failed".into()));
    }
    let joint = ok.iter().filter(|(s, t)| s.covers_all(t)).count() as f64 / k;
    let steps = epochs.len();
    let mut step_coverage = vec![0.0; steps];
    let mut mean_half_length = vec![0.0; steps];
    for (s, t) in &ok {
        for (j, e) in s.entries.iter().enumerate() {
            step_coverage[j] += f64::from(u8::from(e.lower <= t[j] && t[j] <= e.upper)) / k;
            mean_half_length[j] += (e.upper - e.lower) / 2.0 / k;
        }
    }
    Ok(ConfSeqSummary {
        joint_coverage: joint,
        joint_coverage_se: (joint * (1.0 - joint) / k).sqrt(),
        step_coverage,
        mean_half_length,
        replications: ok.len(),
        failures: reps - ok.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn options_select_expected_units() {
        assert!(SamplingOption::option_1().contains(&[0.5]));
        assert!(!SamplingOption::option_1().contains(&[0.05]));
        assert!(SamplingOption::option_2().contains(&[0.95]));
        assert!(SamplingOption::oracle().contains(&[0.05]));
    }

    #[test]
    fn empty_option_leaves_metric_unchanged() {
        let sim = simulate_collection(
            &CollectionParams {
                n: 120,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        let none = SamplingOption::new("none", vec![]);
        let before = crate::minimax_ci::mp_interval(&sim.data, 0.04, 5.0, 0.05).unwrap();
        let after = evaluate_sampling_option(&sim.data, &none, 0.04, 5.0, 0.05, 2, 1).unwrap();
        assert!((before.length() - after).abs() < 1e-12);
    }

    #[test]
    fn metric_ignores_outcomes() {
        let sim = simulate_collection(
            &CollectionParams {
                n: 120,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        let other = sim.data.with_outcomes(vec![3.0; 120]).unwrap();
        let opt = SamplingOption::option_2();
        let a = evaluate_sampling_option(&sim.data, &opt, 0.04, 5.0, 0.05, 3, 2).unwrap();
        let b = evaluate_sampling_option(&other, &opt, 0.04, 5.0, 0.05, 3, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn truth_respects_bound() {
        let p = CollectionParams::default();
        let l = p.lipschitz_bound();
        for i in 0..1000 {
            let (a, b) = (i as f64 / 1000.0, (i + 1) as f64 / 1000.0);
            assert!((p.baseline(a) - p.baseline(b)).abs() <= l * 1e-3);
            assert!((p.baseline(a) + p.effect(a) - p.baseline(b) - p.effect(b)).abs() <= l * 1e-3);
        }
    }
}
