use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Arm, Dataset, NoiseSd};
use crate::error::{Error, Result};
use crate::lipschitz::{KnnRegressor, Regressor};

use super::{replication_rng, Simulated};

/// Synthetic randomized trial and the observational data carved out of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaseStudyParams {
    pub n_rct: usize,
    pub dim: usize,
    /// Treatment probability in the trial.
    pub p_treat: f64,
    pub sigma: f64,
    /// Width parameter of the propensity map; `-1` disables limited overlap.
    pub kappa: f64,
    /// Neighbours of the k-NN T-learner used to rank units.
    pub knn_k: usize,
    pub seed: u64,
}

impl Default for CaseStudyParams {
    fn default() -> Self {
        Self {
            n_rct: 1100,
            dim: 10,
            p_treat: 0.483,
            sigma: 0.3,
            kappa: 0.01,
            knn_k: 5,
            seed: 0,
        }
    }
}

fn rct_baseline(x: &[f64]) -> f64 {
    0.5 * x[0].tanh() + 0.2 * x[1]
}

fn rct_effect(x: &[f64]) -> f64 {
    -0.2 + 0.3 * (x[0] + x[2]).tanh()
}

/// Trial with `x ~ N(0, I_d)`, `z ~ Bernoulli(p_treat)` and known effects.
pub fn synthetic_rct(params: &CaseStudyParams, replication: u64) -> Result<Simulated> {
    if params.dim < 3 {
        return Err(Error::invalid("synthetic trial needs at least 3 covariates"));
    }
    if !(params.p_treat > 0.0 && params.p_treat < 1.0) {
        return Err(Error::invalid("treatment probability must lie in (0, 1)"));
    }
    let mut rng = replication_rng(params.seed, replication);
    let noise = Normal::new(0.0, params.sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let (n, d) = (params.n_rct, params.dim);
    let mut x = Vec::with_capacity(n * d);
    let (mut y, mut z, mut f0, mut f1) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let zi = rng.random::<f64>() < params.p_treat;
        let b = rct_baseline(&row);
        let t = b + rct_effect(&row);
        y.push(if zi { t } else { b } + noise.sample(&mut rng));
        z.push(zi);
        f0.push(b);
        f1.push(t);
        x.extend(row);
    }
    let data = Dataset::from_flat(x, d, y, z, vec![params.p_treat; n], NoiseSd::Shared(params.sigma))?;
    Ok(Simulated { data, f0, f1 })
}

/// Propensity assigned to a unit whose effect estimate sits at `percentile`.
/// Both tails get tiny propensities, the band above the lower tail gets
/// moderate ones, and the rest gets 1/2. `kappa == -1` gives 1/2 everywhere.
pub fn propensity_map_e<R: Rng + ?Sized>(percentile: f64, kappa: f64, rng: &mut R) -> f64 {
    if kappa == -1.0 {
        return 0.5;
    }
    let (x, tail) = (percentile, 1.0 - percentile);
    if x <= 0.075 + kappa || tail <= 0.075 + kappa {
        rng.random_range(0.005..0.03)
    } else if x <= 0.1 + kappa || tail <= 0.1 + kappa {
        rng.random_range(0.03..0.05)
    } else if x <= 0.15 + kappa {
        rng.random_range(0.05..0.1)
    } else {
        0.5
    }
}

#[derive(Debug, Clone)]
pub struct ThinnedRct {
    /// Kept units, with propensities set to the target.
    pub data: Dataset<f64>,
    /// Indices of kept units in the trial.
    pub kept: Vec<usize>,
}

/// Subsample of a trial with treatment probability `p` whose treatment
/// given covariates follows `target_pi`: draw `C_i ~ Bernoulli(pi_i)`, keep
/// the unit when `z_i = C_i` and an independent thinning coin `O_i` (which
/// balances the arms) comes up 1. Each unit is kept with probability `min(p, 1-p)`.
pub fn thin_rct<R: Rng + ?Sized>(rct: &Dataset<f64>, target_pi: &[f64], p: f64, rng: &mut R) -> Result<ThinnedRct> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("trial probability {p} outside (0, 1)")));
    }
    if target_pi.len() != rct.n() {
        return Err(Error::invalid("target propensity length differs from trial size"));
    }
    if let Some(i) = target_pi.iter().position(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::invalid(format!("target propensity of unit {i} outside [0, 1]")));
    }
    let mut kept = Vec::new();
    for (i, &zi) in rct.z().iter().enumerate() {
        let c = rng.random::<f64>() < target_pi[i];
        let o = if p <= 0.5 {
            zi || rng.random::<f64>() < p / (1.0 - p)
        } else {
            !zi || rng.random::<f64>() < (1.0 - p) / p
        };
        if zi == c && o {
            kept.push(i);
        }
    }
    if kept.is_empty() {
        return Err(Error::Degenerate("thinning kept no units".into()));
    }
    let sub = rct.subset(&kept)?;
    let pi: Vec<f64> = kept.iter().map(|&i| target_pi[i]).collect();
    let data = sub.with_assignment(sub.z().to_vec(), pi, sub.y().to_vec())?;
    Ok(ThinnedRct { data, kept })
}

/// Observational dataset from a synthetic trial: rank units by a k-NN
/// T-learner effect estimate, map ranks through [`propensity_map_e`] and thin.
pub fn observational_from_rct(params: &CaseStudyParams, replication: u64) -> Result<Simulated> {
    let rct = synthetic_rct(params, replication)?;
    let data = &rct.data;
    let learner = KnnRegressor::fit(data, params.knn_k)?;
    let n = data.n();
    let cate: Vec<f64> = (0..n)
        .map(|i| learner.predict(data.x(i), Arm::Treated) - learner.predict(data.x(i), Arm::Control))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cate[a].total_cmp(&cate[b]).then(a.cmp(&b)));
    let mut percentile = vec![0.0; n];
    let denom = (n.max(2) - 1) as f64;
    for (rank, &i) in order.iter().enumerate() {
        percentile[i] = rank as f64 / denom;
    }
    // Separate stream so thinning does not reuse the trial's draws.
    let mut rng = replication_rng(params.seed ^ 0x5eed_7417, replication);
    let target: Vec<f64> = percentile
        .iter()
        .map(|&q| propensity_map_e(q, params.kappa, &mut rng))
        .collect();
    let thinned = thin_rct(data, &target, params.p_treat, &mut rng)?;
    Ok(Simulated {
        data: thinned.data,
        f0: thinned.kept.iter().map(|&i| rct.f0[i]).collect(),
        f1: thinned.kept.iter().map(|&i| rct.f1[i]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn propensity_map_branches() {
        let mut rng = replication_rng(1, 0);
        assert_eq!(propensity_map_e(0.5, 0.01, &mut rng), 0.5);
        for _ in 0..100 {
            let v = propensity_map_e(0.01, 0.01, &mut rng);
            assert!((0.005..0.03).contains(&v));
            let v = propensity_map_e(0.995, 0.01, &mut rng);
            assert!((0.005..0.03).contains(&v));
            let v = propensity_map_e(0.1, 0.01, &mut rng);
            assert!((0.03..0.05).contains(&v));
            let v = propensity_map_e(0.15, 0.01, &mut rng);
            assert!((0.05..0.1).contains(&v));
            // The third band only exists on the lower side.
            assert_eq!(propensity_map_e(0.85, 0.01, &mut rng), 0.5);
            assert_eq!(propensity_map_e(0.01, -1.0, &mut rng), 0.5);
        }
    }

    #[test]
    fn symmetric_thinning_keeps_matching_units() {
        let params = CaseStudyParams {
            n_rct: 2000,
            p_treat: 0.5,
            ..Default::default()
        };
        let rct = synthetic_rct(&params, 0).unwrap();
        let mut rng = replication_rng(9, 0);
        let t = thin_rct(&rct.data, &vec![0.5; 2000], 0.5, &mut rng).unwrap();
        let frac = t.kept.len() as f64 / 2000.0;
        assert!((frac - 0.5).abs() < 3.0 * (0.25f64 / 2000.0).sqrt());
        assert!(t.data.pi().iter().all(|&p| p == 0.5));
    }

    #[test]
    fn observational_data_has_limited_overlap() {
        let sim = observational_from_rct(&CaseStudyParams::default(), 0).unwrap();
        let n = sim.data.n();
        assert!(n > 400 && n < 660, "{n}");
        let low = sim.data.pi().iter().filter(|&&p| p < 0.05).count();
        assert!(low > 0);
        assert_eq!(sim.f0.len(), n);
    }
}
