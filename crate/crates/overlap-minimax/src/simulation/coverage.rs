use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotic::{aipw, aipw_partial, select_epsilon};
use crate::data::{estimate_noise_sd, partition, Dataset, NoiseSd};
use crate::error::{Error, Result};
use crate::lipschitz::{KnnRegressor, DEFAULT_KNN_K};
use crate::minimax_ci::{combine_intervals, m_interval, mp_interval};

use super::{observational_from_rct, simulate_example1, CaseStudyParams, Example1Params, Simulated};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dgp {
    Example1(Example1Params),
    CaseStudy(CaseStudyParams),
}

impl Dgp {
    fn draw(&self, seed: u64, replication: u64) -> Result<Simulated> {
        match *self {
            Dgp::Example1(p) => simulate_example1(&Example1Params { seed, ..p }, replication),
            Dgp::CaseStudy(p) => observational_from_rct(&CaseStudyParams { seed, ..p }, replication),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Aipw,
    Aipwp,
    Mp,
    M,
    Mc,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Aipw, Method::Aipwp, Method::Mp, Method::M, Method::Mc];

    pub fn name(self) -> &'static str {
        match self {
            Method::Aipw => "aipw",
            Method::Aipwp => "aipwp",
            Method::Mp => "mp",
            Method::M => "m",
            Method::Mc => "mc",
        }
    }

    /// Estimand each method is scored against.
    pub fn target(self) -> &'static str {
        match self {
            Method::Mp => "tau_minus",
            _ => "tau",
        }
    }
}

fn default_alpha() -> f64 {
    0.05
}

fn default_epsilons() -> Vec<f64> {
    vec![0.01, 0.02, 0.03, 0.04, 0.05]
}

fn default_k() -> usize {
    DEFAULT_KNN_K
}

fn default_j() -> usize {
    crate::io::DEFAULT_NOISE_NEIGHBOURS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub dgp: Dgp,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    pub reps: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    pub lipschitz: f64,
    #[serde(default = "default_epsilons")]
    pub epsilon_set: Vec<f64>,
    #[serde(default = "default_k")]
    pub knn_k: usize,
    /// Replace the known noise sd by the nearest-neighbour estimate.
    #[serde(default)]
    pub estimate_sigma: bool,
    #[serde(default = "default_j")]
    pub noise_neighbours: usize,
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct Hit {
    covered: bool,
    half_length: f64,
    distance: f64,
}

#[derive(Debug, Clone, Default)]
struct RepOutcome {
    hits: Vec<(Method, Hit)>,
    aipwp_covers_tau_plus: Option<bool>,
    epsilon: Option<f64>,
    errors: Vec<(Method, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub target: &'static str,
    pub coverage: f64,
    pub coverage_se: f64,
    pub mean_half_length: f64,
    pub half_length_se: f64,
    pub mean_distance: f64,
    pub replications: usize,
    pub failures: usize,
    /// Trimmed AIPW only: coverage of the overlap part of the effect.
    pub coverage_tau_plus: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub config: CoverageConfig,
    pub mean_epsilon: Option<f64>,
    pub methods: Vec<MethodSummary>,
}

impl CoverageReport {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "method",
            "target",
            "coverage",
            "coverage_se",
            "mean_half_length",
            "half_length_se",
            "mean_distance",
            "replications",
            "failures",
        ])
        .map_err(csv_err)?;
        for m in &self.methods {
            w.write_record([
                m.method.name().to_string(),
                m.target.to_string(),
                m.coverage.to_string(),
                m.coverage_se.to_string(),
                m.mean_half_length.to_string(),
                m.half_length_se.to_string(),
                m.mean_distance.to_string(),
                m.replications.to_string(),
                m.failures.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Gap between an interval and a value; zero when the value is inside.
pub fn interval_distance(lower: f64, upper: f64, target: f64) -> f64 {
    (lower - target).max(target - upper).max(0.0)
}

fn hit(lower: f64, upper: f64, target: f64) -> Hit {
    Hit {
        covered: lower <= target && target <= upper,
        half_length: (upper - lower) / 2.0,
        distance: interval_distance(lower, upper, target),
    }
}

fn replicate(cfg: &CoverageConfig, r: u64) -> Result<RepOutcome> {
    let sim = cfg.dgp.draw(cfg.seed, r)?;
    let data: Dataset<f64> = if cfg.estimate_sigma {
        let s = estimate_noise_sd(&sim.data, cfg.noise_neighbours)?;
        sim.data.with_noise(NoiseSd::Shared(s))?
    } else {
        sim.data.clone()
    };
    let alpha = cfg.alpha;
    let l = cfg.lipschitz;
    let mut out = RepOutcome::default();
    let wants = |m: Method| cfg.methods.contains(&m);
    let need_eps = wants(Method::Aipwp) || wants(Method::Mp) || wants(Method::Mc);

    let tau = sim.effects().iter().sum::<f64>() / data.n() as f64;
    let mut record = |m: Method, res: Result<Hit>| match res {
        Ok(h) => out.hits.push((m, h)),
        Err(e) => out.errors.push((m, e.to_string())),
    };

    if wants(Method::Aipw) {
        let res = KnnRegressor::fit(&data, cfg.knn_k)
            .and_then(|reg| aipw(&data, &reg, alpha))
            .map(|ci| hit(ci.lower, ci.upper, tau));
        record(Method::Aipw, res);
    }
    if wants(Method::M) {
        let res = m_interval(&data, l, alpha).map(|r| hit(r.lower, r.upper, tau));
        record(Method::M, res);
    }
    let mut tau_plus_hit = None;
    let mut eps_used = None;
    if need_eps {
        let min_eps = cfg.epsilon_set.iter().copied().fold(f64::INFINITY, f64::min);
        let selection = partition(&data, min_eps)
            .and_then(|part| data.subset(&part.overlap_indices()))
            .and_then(|overlap| KnnRegressor::fit(&overlap, cfg.knn_k))
            .and_then(|reg| {
                let (eps, ci) = select_epsilon(&data, &cfg.epsilon_set, &reg, alpha)?;
                Ok((reg, eps, ci))
            });
        match selection {
            Err(e) => {
                for m in [Method::Aipwp, Method::Mp, Method::Mc] {
                    if wants(m) {
                        record(m, Err(Error::Degenerate(format!("threshold selection failed: {e}"))));
                    }
                }
            }
            Ok((reg, eps, ci)) => {
                eps_used = Some(eps);
                let part = partition(&data, eps)?;
                let dec = sim.decompose(&part)?;
                if wants(Method::Aipwp) {
                    tau_plus_hit = Some(ci.contains(dec.tau_plus));
                    record(Method::Aipwp, Ok(hit(ci.lower, ci.upper, tau)));
                }
                if wants(Method::Mp) {
                    let res = mp_interval(&data, eps, l, alpha).map(|r| hit(r.lower, r.upper, dec.tau_minus));
                    record(Method::Mp, res);
                }
                if wants(Method::Mc) {
                    let res = aipw_partial(&data, eps, &reg, alpha / 2.0).and_then(|a| {
                        let b = mp_interval(&data, eps, l, alpha / 2.0)?;
                        let c = combine_intervals(&a, &b)?;
                        Ok(hit(c.lower, c.upper, tau))
                    });
                    record(Method::Mc, res);
                }
            }
        }
    }
    out.aipwp_covers_tau_plus = tau_plus_hit;
    out.epsilon = eps_used;
    Ok(out)
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (m, f64::NAN);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (m, (var / n as f64).sqrt())
}

/// Runs `reps` independent replications in parallel and aggregates, per
/// method, the hit rate of its target and the mean half-length. Failed
/// replications are counted and left out of the averages.
pub fn coverage_experiment(cfg: &CoverageConfig) -> Result<CoverageReport> {
    if cfg.reps == 0 {
        return Err(Error::invalid("reps must be at least 1"));
    }
    if cfg.methods.is_empty() {
        return Err(Error::invalid("no methods requested"));
    }
    crate::minimax_ci::check_alpha(cfg.alpha)?;
    let outcomes: Vec<RepOutcome> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|r| {
            replicate(cfg, r).unwrap_or_else(|e| RepOutcome {
                errors: cfg.methods.iter().map(|&m| (m, e.to_string())).collect(),
                ..Default::default()
            })
        })
        .collect();

    let mut methods = Vec::new();
    for &m in &cfg.methods {
        let hits: Vec<Hit> = outcomes
            .iter()
            .flat_map(|o| o.hits.iter().filter(|(mm, _)| *mm == m).map(|(_, h)| *h))
            .collect();
        let failures = outcomes
            .iter()
            .filter(|o| o.errors.iter().any(|(mm, _)| *mm == m))
            .count();
        let cov: Vec<f64> = hits.iter().map(|h| f64::from(u8::from(h.covered))).collect();
        let (coverage, _) = mean_se(&cov);
        let k = hits.len() as f64;
        let coverage_se = (coverage * (1.0 - coverage) / k).sqrt();
        let (mean_half_length, half_length_se) = mean_se(&hits.iter().map(|h| h.half_length).collect::<Vec<_>>());
        let (mean_distance, _) = mean_se(&hits.iter().map(|h| h.distance).collect::<Vec<_>>());
        let coverage_tau_plus = (m == Method::Aipwp).then(|| {
            let v: Vec<f64> = outcomes
                .iter()
                .filter_map(|o| o.aipwp_covers_tau_plus)
                .map(|b| f64::from(u8::from(b)))
                .collect();
            mean_se(&v).0
        });
        methods.push(MethodSummary {
            method: m,
            target: m.target(),
            coverage,
            coverage_se,
            mean_half_length,
            half_length_se,
            mean_distance,
            replications: hits.len(),
            failures,
            coverage_tau_plus,
        });
    }
    let eps: Vec<f64> = outcomes.iter().filter_map(|o| o.epsilon).collect();
    Ok(CoverageReport {
        config: cfg.clone(),
        mean_epsilon: (!eps.is_empty()).then(|| mean_se(&eps).0),
        methods,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_is_zero_inside() {
        assert_eq!(interval_distance(-1.0, 1.0, 0.3), 0.0);
        assert_eq!(interval_distance(-1.0, 1.0, 1.5), 0.5);
        assert_eq!(interval_distance(-1.0, 1.0, -3.0), 2.0);
    }

    #[test]
    fn config_parses_with_defaults() {
        let cfg: CoverageConfig = serde_json::from_str(
            r#"{"dgp": {"kind": "example1", "n": 200, "eta_dgp": 0.03}, "reps": 2, "lipschitz": 14}"#,
        )
        .unwrap();
        assert_eq!(cfg.methods.len(), 5);
        assert_eq!(cfg.alpha, 0.05);
        match cfg.dgp {
            Dgp::Example1(p) => {
                assert_eq!(p.n, 200);
                assert_eq!(p.o, 0.05);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn small_run_is_reproducible() {
        let cfg = CoverageConfig {
            dgp: Dgp::Example1(Example1Params {
                n: 150,
                ..Default::default()
            }),
            methods: Method::ALL.to_vec(),
            reps: 3,
            alpha: 0.05,
            seed: 11,
            lipschitz: 14.0,
            epsilon_set: default_epsilons(),
            knn_k: 5,
            estimate_sigma: false,
            noise_neighbours: 2,
        };
        let a = coverage_experiment(&cfg).unwrap();
        let b = coverage_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        for m in &a.methods {
            assert_eq!(m.replications + m.failures, 3, "{:?}", m.method);
        }
    }
}
