//! `analyze` and `sensitivity`: inference on a user-supplied dataset.

use overlap_minimax::asymptotic::{aipw, aipw_partial, select_epsilon};
use overlap_minimax::data::partition;
use overlap_minimax::io::read_dataset_file;
use overlap_minimax::lipschitz::contextualize_l;
use overlap_minimax::minimax_ci::{
    combine_intervals, m_interval, metric_t, mp_interval, sensitivity_curve, CombinedInterval, ConfidenceInterval,
    MetricMode, SmoothnessGrid,
};
use overlap_minimax::{AsymptoticCi, Dataset, Error, IntervalReport, KnnRegressor, OverlapPartition};
use serde::Serialize;

use crate::args::{AnalyzeArgs, Format};
use crate::checks;
use crate::failure::Failure;
use crate::output::{cell, emit, emit_json, Table};

/// Candidates used when neither `--epsilon` nor `--epsilon-set` is given.
const DEFAULT_EPSILON_SET: [f64; 5] = [0.01, 0.02, 0.03, 0.04, 0.05];

#[derive(Debug, Clone, Copy, Serialize)]
struct Metrics {
    endpoint_max: f64,
    length: f64,
}

impl Metrics {
    fn of<C: ConfidenceInterval<f64>>(ci: &C) -> Self {
        Self {
            endpoint_max: metric_t(ci, MetricMode::EndpointMax),
            length: metric_t(ci, MetricMode::Length),
        }
    }
}

#[derive(Debug, Serialize)]
struct Scored<I> {
    #[serde(flatten)]
    interval: I,
    metrics: Metrics,
}

fn scored<I: ConfidenceInterval<f64>>(interval: I) -> Scored<I> {
    let metrics = Metrics::of(&interval);
    Scored { interval, metrics }
}

#[derive(Debug, Serialize)]
struct ThresholdChoice {
    value: f64,
    /// Candidate set searched, absent for a fixed threshold.
    candidates: Option<Vec<f64>>,
    n_overlap: usize,
    n_non_overlap: usize,
}

#[derive(Debug, Serialize)]
struct SmoothnessChoice {
    value: f64,
    percentile: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Combined {
    #[serde(flatten)]
    interval: CombinedInterval<f64>,
    /// Absent when there are no overlap units; that part is then `{0}`.
    overlap_part: Option<AsymptoticCi>,
    non_overlap_part: IntervalReport,
}

impl ConfidenceInterval<f64> for Combined {
    fn lower(&self) -> f64 {
        self.interval.lower
    }
    fn upper(&self) -> f64 {
        self.interval.upper
    }
    fn alpha(&self) -> f64 {
        self.interval.alpha
    }
}

#[derive(Debug, Serialize)]
struct AnalyzeReport {
    input: String,
    n: usize,
    dim: usize,
    alpha: f64,
    epsilon: ThresholdChoice,
    lipschitz: SmoothnessChoice,
    aipw: Scored<AsymptoticCi>,
    aipwp: Option<Scored<AsymptoticCi>>,
    mp: Scored<IntervalReport>,
    m: Scored<IntervalReport>,
    mc: Scored<Combined>,
    warnings: Vec<String>,
}

/// Dataset with its overlap threshold and the trimmed AIPW interval at it.
struct Prepared {
    data: Dataset,
    part: OverlapPartition,
    choice: ThresholdChoice,
    aipwp: Option<AsymptoticCi>,
    /// Regression fitted on the overlap units, when there are any.
    overlap_fit: Option<KnnRegressor>,
    warnings: Vec<String>,
}

/// Overlap units can be missing without that being an error in itself.
fn soft<T>(res: Result<T, Error>, what: &str, warnings: &mut Vec<String>) -> Result<Option<T>, Failure> {
    match res {
        Ok(v) => Ok(Some(v)),
        Err(e @ (Error::Degenerate(_) | Error::InsufficientUnits { .. })) => {
            warnings.push(format!("{what}: {e}"));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn fit_on(data: &Dataset, idx: &[usize], k: usize) -> Result<KnnRegressor, Error> {
    if idx.is_empty() {
        return Err(Error::Degenerate("no overlap units".into()));
    }
    KnnRegressor::fit(&data.subset(idx)?, k)
}

fn prepare(args: &AnalyzeArgs, alpha: f64) -> Result<Prepared, Failure> {
    checks::positive("--j", args.j)?;
    checks::positive("--k", args.k)?;
    let data: Dataset = read_dataset_file(&args.input, args.j)?;
    let mut warnings = Vec::new();
    let (eps, candidates, aipwp, overlap_fit) = match (args.epsilon, &args.epsilon_set) {
        (Some(e), _) => {
            let e = checks::epsilon(e)?;
            let part = partition(&data, e)?;
            let fit = soft(fit_on(&data, &part.overlap_indices(), args.k), "overlap regression", &mut warnings)?;
            let ci = match &fit {
                Some(reg) => soft(aipw_partial(&data, e, reg, alpha), "aipwp", &mut warnings)?,
                None => None,
            };
            (e, None, ci, fit)
        }
        (None, set) => {
            let set = set.clone().unwrap_or_else(|| DEFAULT_EPSILON_SET.to_vec());
            if set.is_empty() {
                return Err(Failure::validation("empty --epsilon-set"));
            }
            for &e in &set {
                checks::epsilon(e)?;
            }
            let min_eps = set.iter().copied().fold(f64::INFINITY, f64::min);
            let reg = fit_on(&data, &partition(&data, min_eps)?.overlap_indices(), args.k)?;
            let (e, ci) = select_epsilon(&data, &set, &reg, alpha)?;
            let fit = fit_on(&data, &partition(&data, e)?.overlap_indices(), args.k)?;
            (e, Some(set), Some(ci), Some(fit))
        }
    };
    let part = partition(&data, eps)?;
    if part.is_degenerate() {
        warnings.push(format!("no units below overlap threshold {eps}; the non-overlap estimand is empty"));
    }
    let choice = ThresholdChoice {
        value: eps,
        candidates,
        n_overlap: part.n_overlap(),
        n_non_overlap: part.n_non_overlap(),
    };
    Ok(Prepared { data, part, choice, aipwp, overlap_fit, warnings })
}

fn contextualized(p: &Prepared, percentile: f64) -> Result<f64, Failure> {
    let reg = p
        .overlap_fit
        .as_ref()
        .ok_or_else(|| Failure::validation("percentile Lipschitz constants need overlap units; pass --L"))?;
    Ok(contextualize_l(&p.data, &p.part, reg, percentile)?.value)
}

fn strict_check(strict: bool, degenerate: bool, warnings: &[String]) -> Result<(), Failure> {
    if strict && degenerate {
        return Err(Failure::strict(warnings.join("; ")));
    }
    Ok(())
}

pub fn analyze(args: &AnalyzeArgs) -> Result<(), Failure> {
    let alpha = checks::alpha(args.alpha)?;
    let smoothness = match (&args.lipschitz, &args.percentiles) {
        (Some(ls), _) => {
            checks::lipschitz(ls)?;
            if ls.len() != 1 {
                return Err(Failure::validation("analyze takes a single --L value"));
            }
            SmoothnessGrid::Constants(ls.clone())
        }
        (None, Some(ps)) => {
            checks::percentiles(ps)?;
            if ps.len() != 1 {
                return Err(Failure::validation("analyze takes a single --percentiles value"));
            }
            SmoothnessGrid::Percentiles(ps.clone())
        }
        (None, None) => return Err(Failure::validation("one of --L or --percentiles is required")),
    };
    let mut prep = prepare(args, alpha)?;
    let lipschitz = match &smoothness {
        SmoothnessGrid::Constants(ls) => SmoothnessChoice { value: ls[0], percentile: None },
        SmoothnessGrid::Percentiles(ps) => SmoothnessChoice {
            value: contextualized(&prep, ps[0])?,
            percentile: Some(ps[0]),
        },
    };
    let (data, eps, l) = (&prep.data, prep.choice.value, lipschitz.value);

    let full_fit = KnnRegressor::fit(data, args.k)?;
    let aipw_ci = aipw(data, &full_fit, alpha)?;
    let mp = mp_interval(data, eps, l, alpha)?;
    let m = m_interval(data, l, alpha)?;

    let half = alpha / 2.0;
    let overlap_part = match &prep.overlap_fit {
        Some(reg) => Some(aipw_partial(data, eps, reg, half)?),
        None => None,
    };
    let non_overlap_part = mp_interval(data, eps, l, half)?;
    let interval = match &overlap_part {
        Some(a) => combine_intervals(a, &non_overlap_part)?,
        None => {
            let zero = CombinedInterval { lower: 0.0, upper: 0.0, alpha: half };
            combine_intervals(&zero, &non_overlap_part)?
        }
    };
    let mc = Combined { interval, overlap_part, non_overlap_part };

    strict_check(args.out.strict, mp.degenerate, &prep.warnings)?;
    let report = AnalyzeReport {
        input: args.input.display().to_string(),
        n: data.n(),
        dim: data.dim(),
        alpha,
        epsilon: prep.choice,
        lipschitz,
        aipw: scored(aipw_ci),
        aipwp: prep.aipwp.take().map(scored),
        mp: scored(mp),
        m: scored(m),
        mc: scored(mc),
        warnings: std::mem::take(&mut prep.warnings),
    };
    emit_json(&args.out, "analyze", report)
}

#[derive(Debug, Serialize)]
struct SensitivityRow {
    percentile: Option<f64>,
    lipschitz: f64,
    #[serde(flatten)]
    interval: IntervalReport,
    metrics: Metrics,
}

#[derive(Debug, Serialize)]
struct SensitivityReport {
    input: String,
    alpha: f64,
    epsilon: ThresholdChoice,
    points: Vec<SensitivityRow>,
    warnings: Vec<String>,
}

pub fn sensitivity(args: &AnalyzeArgs) -> Result<(), Failure> {
    let alpha = checks::alpha(args.alpha)?;
    let grid = match (&args.lipschitz, &args.percentiles) {
        (Some(ls), _) => {
            checks::lipschitz(ls)?;
            SmoothnessGrid::Constants(ls.clone())
        }
        (None, Some(ps)) => {
            checks::percentiles(ps)?;
            SmoothnessGrid::Percentiles(ps.clone())
        }
        (None, None) => return Err(Failure::validation("one of --L or --percentiles is required")),
    };
    let prep = prepare(args, alpha)?;
    let full_fit;
    let reg = match (&grid, &prep.overlap_fit) {
        (SmoothnessGrid::Percentiles(_), None) => {
            return Err(Failure::validation("percentile Lipschitz constants need overlap units; pass --L"))
        }
        (SmoothnessGrid::Percentiles(_), Some(r)) => r,
        // The regression is not consulted for explicit constants.
        (SmoothnessGrid::Constants(_), Some(r)) => r,
        (SmoothnessGrid::Constants(_), None) => {
            full_fit = KnnRegressor::fit(&prep.data, args.k)?;
            &full_fit
        }
    };
    let curve = sensitivity_curve(&prep.data, prep.choice.value, &grid, reg, alpha)?;
    let degenerate = curve.points.iter().any(|p| p.interval.degenerate);
    strict_check(args.out.strict, degenerate, &prep.warnings)?;
    let points: Vec<SensitivityRow> = curve
        .points
        .into_iter()
        .map(|p| SensitivityRow {
            percentile: p.percentile,
            lipschitz: p.lipschitz,
            metrics: Metrics::of(&p.interval),
            interval: p.interval,
        })
        .collect();
    let table = {
        let mut t = Table::new(vec![
            "percentile",
            "lipschitz",
            "estimate",
            "lower",
            "upper",
            "length",
            "t_endpoint_max",
            "maxbias",
            "sd",
            "delta_star",
            "bracketed",
            "degenerate",
        ]);
        for p in &points {
            let r = &p.interval;
            t.push(vec![
                cell(p.percentile),
                p.lipschitz.to_string(),
                r.estimate.to_string(),
                r.lower.to_string(),
                r.upper.to_string(),
                p.metrics.length.to_string(),
                p.metrics.endpoint_max.to_string(),
                r.maxbias.to_string(),
                r.sd.to_string(),
                r.delta_star.to_string(),
                r.bracketed.to_string(),
                r.degenerate.to_string(),
            ]);
        }
        t
    };
    let report = SensitivityReport {
        input: args.input.display().to_string(),
        alpha,
        epsilon: prep.choice,
        points,
        warnings: prep.warnings,
    };
    emit(&args.out, Format::Csv, "sensitivity", report, || table)
}
