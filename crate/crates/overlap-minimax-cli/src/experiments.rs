//! Simulation-backed commands: `coverage`, `simulate`, `sample-options`, `confseq`.

use std::path::Path;

use overlap_minimax::data::partition;
use overlap_minimax::lipschitz::{contextualize_l, DEFAULT_KNN_K};
use overlap_minimax::minimax_ci::sequence_alpha;
use overlap_minimax::simulation::{
    confidence_sequence_experiment, coverage_experiment, default_epochs, evaluate_sampling_option,
    observational_from_rct, run_confidence_sequence, sampling_option_aipwp, simulate_collection, simulate_example1,
    CaseStudyParams, CollectionParams, ConfSeqSummary, CoverageConfig, CoverageReport, Dgp, Example1Params,
    OptionAipwpSummary, SamplingOption, Simulated,
};
use overlap_minimax::{ConfidenceSequence, KnnRegressor};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::args::{ConfseqArgs, DesignName, ExperimentArgs, Format, SimulateArgs};
use crate::checks;
use crate::failure::Failure;
use crate::output::{cell, emit, Table};

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Failure {
        code: crate::failure::code::VALIDATION,
        kind: "schema",
        message: format!("{}: {e}", path.display()),
    })
}

fn single_or_many<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, Failure> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        Many(Vec<T>),
        One(T),
    }
    Ok(match read_json::<OneOrMany<T>>(path)? {
        OneOrMany::Many(v) => v,
        OneOrMany::One(v) => vec![v],
    })
}

// ---------------------------------------------------------------- coverage

#[derive(Serialize)]
struct CoverageBody {
    points: Vec<CoverageReport>,
}

fn dgp_name(d: &Dgp) -> &'static str {
    match d {
        Dgp::Example1(_) => "example1",
        Dgp::CaseStudy(_) => "case_study",
    }
}

pub fn coverage(args: &ExperimentArgs) -> Result<(), Failure> {
    let path = args
        .input
        .as_deref()
        .ok_or_else(|| Failure::validation("coverage needs --input with a JSON configuration"))?;
    if args.percentiles.is_some() {
        return Err(Failure::validation("coverage takes explicit --L values, not percentiles"));
    }
    let mut configs: Vec<CoverageConfig> = single_or_many(path)?;
    if configs.is_empty() {
        return Err(Failure::validation("configuration list is empty"));
    }
    for c in &mut configs {
        if let Some(a) = args.alpha {
            c.alpha = checks::alpha(Some(a))?;
        }
        if let Some(s) = args.seed {
            c.seed = s;
        }
        if let Some(r) = args.reps {
            c.reps = checks::positive("--reps", r)?;
        }
        if let Some(e) = args.epsilon {
            c.epsilon_set = vec![checks::epsilon(e)?];
        }
    }
    // Each configuration is crossed with every explicit Lipschitz constant.
    if let Some(ls) = &args.lipschitz {
        checks::lipschitz(ls)?;
        configs = configs
            .into_iter()
            .flat_map(|c| ls.iter().map(move |&l| CoverageConfig { lipschitz: l, ..c.clone() }))
            .collect();
    }
    let points = configs.iter().map(coverage_experiment).collect::<Result<Vec<_>, _>>()?;

    let table = || -> Result<Table, Failure> {
        let mut t = Table::new(vec![
            "point",
            "dgp",
            "dgp_params",
            "lipschitz",
            "alpha",
            "seed",
            "mean_epsilon",
            "method",
            "target",
            "coverage",
            "coverage_se",
            "mean_half_length",
            "half_length_se",
            "mean_distance",
            "replications",
            "failures",
            "coverage_tau_plus",
        ]);
        for (k, p) in points.iter().enumerate() {
            let params = match &p.config.dgp {
                Dgp::Example1(e) => serde_json::to_string(e)?,
                Dgp::CaseStudy(c) => serde_json::to_string(c)?,
            };
            for m in &p.methods {
                t.push(vec![
                    k.to_string(),
                    dgp_name(&p.config.dgp).into(),
                    params.clone(),
                    p.config.lipschitz.to_string(),
                    p.config.alpha.to_string(),
                    p.config.seed.to_string(),
                    cell(p.mean_epsilon),
                    m.method.name().into(),
                    m.target.into(),
                    m.coverage.to_string(),
                    m.coverage_se.to_string(),
                    m.mean_half_length.to_string(),
                    m.half_length_se.to_string(),
                    m.mean_distance.to_string(),
                    m.replications.to_string(),
                    m.failures.to_string(),
                    cell(m.coverage_tau_plus),
                ]);
            }
        }
        Ok(t)
    };
    let t = table()?;
    emit(&args.out, Format::Csv, "coverage", CoverageBody { points }, || t)
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Design {
    Example1(Example1Params),
    Collection(CollectionParams),
    CaseStudy(CaseStudyParams),
}

impl Design {
    fn with_seed(self, seed: u64) -> Self {
        match self {
            Design::Example1(p) => Design::Example1(Example1Params { seed, ..p }),
            Design::Collection(p) => Design::Collection(CollectionParams { seed, ..p }),
            Design::CaseStudy(p) => Design::CaseStudy(CaseStudyParams { seed, ..p }),
        }
    }

    fn draw(&self, replication: u64) -> Result<Simulated, Failure> {
        Ok(match self {
            Design::Example1(p) => simulate_example1(p, replication)?,
            Design::Collection(p) => simulate_collection(p, replication)?,
            Design::CaseStudy(p) => observational_from_rct(p, replication)?,
        })
    }
}

#[derive(Serialize)]
struct Unit {
    x: Vec<f64>,
    y: f64,
    z: bool,
    pi: f64,
    sigma: f64,
    f0: f64,
    f1: f64,
}

#[derive(Serialize)]
struct SimulateBody {
    design: Design,
    replication: u64,
    /// Sample average effect of the draw.
    tau: f64,
    units: Vec<Unit>,
}

pub fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let mut design = match &args.input {
        Some(p) => read_json::<Design>(p)?,
        None => match args.design {
            DesignName::Example1 => Design::Example1(Example1Params::default()),
            DesignName::Collection => Design::Collection(CollectionParams::default()),
            DesignName::CaseStudy => Design::CaseStudy(CaseStudyParams::default()),
        },
    };
    if let Some(s) = args.seed {
        design = design.with_seed(s);
    }
    let sim = design.draw(args.replication)?;
    let d = &sim.data;
    let tau = sim.effects().iter().sum::<f64>() / d.n() as f64;
    let table = || {
        let mut header: Vec<String> = (1..=d.dim()).map(|k| format!("x{k}")).collect();
        header.extend(["y", "z", "pi", "sigma", "f0", "f1"].map(String::from));
        let mut t = Table::new(header);
        for i in 0..d.n() {
            let mut row: Vec<String> = d.x(i).iter().map(f64::to_string).collect();
            row.extend([
                d.y()[i].to_string(),
                u8::from(d.z()[i]).to_string(),
                d.pi()[i].to_string(),
                d.sigma()[i].to_string(),
                sim.f0[i].to_string(),
                sim.f1[i].to_string(),
            ]);
            t.push(row);
        }
        t
    };
    let units = || {
        (0..d.n())
            .map(|i| Unit {
                x: d.x(i).to_vec(),
                y: d.y()[i],
                z: d.z()[i],
                pi: d.pi()[i],
                sigma: d.sigma()[i],
                f0: sim.f0[i],
                f1: sim.f1[i],
            })
            .collect()
    };
    let body = SimulateBody { design, replication: args.replication, tau, units: units() };
    emit(&args.out, Format::Csv, "simulate", body, table)
}

// ---------------------------------------------------------------- sample-options

fn default_options() -> Vec<SamplingOption> {
    vec![SamplingOption::oracle(), SamplingOption::option_2(), SamplingOption::option_1()]
}

fn default_percentiles() -> Vec<f64> {
    vec![0.8, 0.85, 0.9, 0.95]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct SampleOptionsConfig {
    params: CollectionParams,
    options: Vec<SamplingOption>,
    epsilon: f64,
    percentiles: Vec<f64>,
    /// Explicit constants; replace the percentiles when present.
    lipschitz: Option<Vec<f64>>,
    alpha: f64,
    /// Monte Carlo draws of the new assignments per option.
    n_mc: usize,
    mc_seed: u64,
    /// Replication of the initial dataset.
    replication: u64,
    /// Replications of the collect-then-trim comparison; zero skips it.
    aipwp_reps: usize,
}

impl Default for SampleOptionsConfig {
    fn default() -> Self {
        Self {
            params: CollectionParams::default(),
            options: default_options(),
            epsilon: 0.04,
            percentiles: default_percentiles(),
            lipschitz: None,
            alpha: checks::DEFAULT_ALPHA,
            n_mc: 20,
            mc_seed: 11,
            replication: 0,
            aipwp_reps: 0,
        }
    }
}

#[derive(Serialize)]
struct OptionRow {
    option: String,
    percentile: Option<f64>,
    lipschitz: f64,
    mean_length: f64,
}

#[derive(Serialize)]
struct SampleOptionsBody {
    config: SampleOptionsConfig,
    rows: Vec<OptionRow>,
    aipwp: Vec<OptionAipwpSummary>,
}

pub fn sample_options(args: &ExperimentArgs) -> Result<(), Failure> {
    let mut cfg: SampleOptionsConfig = match &args.input {
        Some(p) => read_json(p)?,
        None => SampleOptionsConfig::default(),
    };
    if let Some(e) = args.epsilon {
        cfg.epsilon = e;
    }
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    if let Some(s) = args.seed {
        cfg.params.seed = s;
    }
    if let Some(r) = args.reps {
        cfg.n_mc = r;
    }
    if let Some(ps) = &args.percentiles {
        cfg.percentiles = ps.clone();
        cfg.lipschitz = None;
    }
    if let Some(ls) = &args.lipschitz {
        cfg.lipschitz = Some(ls.clone());
    }
    checks::epsilon(cfg.epsilon)?;
    checks::alpha(Some(cfg.alpha))?;
    checks::positive("n_mc", cfg.n_mc)?;
    if cfg.options.is_empty() {
        return Err(Failure::validation("no sampling options"));
    }

    let sim = simulate_collection(&cfg.params, cfg.replication)?;
    let levels: Vec<(Option<f64>, f64)> = match &cfg.lipschitz {
        Some(ls) => {
            checks::lipschitz(ls)?;
            ls.iter().map(|&l| (None, l)).collect()
        }
        None => {
            checks::percentiles(&cfg.percentiles)?;
            let part = partition(&sim.data, cfg.epsilon)?;
            let reg = KnnRegressor::fit(&sim.data.subset(&part.overlap_indices())?, DEFAULT_KNN_K)?;
            cfg.percentiles
                .iter()
                .map(|&p| Ok((Some(p), contextualize_l(&sim.data, &part, &reg, p)?.value)))
                .collect::<Result<_, Failure>>()?
        }
    };
    let mut rows = Vec::new();
    for &(percentile, l) in &levels {
        for o in &cfg.options {
            let mean_length = evaluate_sampling_option(&sim.data, o, cfg.epsilon, l, cfg.alpha, cfg.n_mc, cfg.mc_seed)?;
            rows.push(OptionRow { option: o.name.clone(), percentile, lipschitz: l, mean_length });
        }
    }
    let aipwp = if cfg.aipwp_reps > 0 {
        cfg.options
            .iter()
            .map(|o| sampling_option_aipwp(&cfg.params, o, cfg.epsilon, cfg.alpha, cfg.aipwp_reps))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };
    let mut t = Table::new(vec!["option", "percentile", "lipschitz", "mean_length"]);
    for r in &rows {
        t.push(vec![r.option.clone(), cell(r.percentile), r.lipschitz.to_string(), r.mean_length.to_string()]);
    }
    emit(&args.out, Format::Csv, "sample-options", SampleOptionsBody { config: cfg, rows, aipwp }, || t)
}

// ---------------------------------------------------------------- confseq

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct ConfseqConfig {
    params: CollectionParams,
    /// Regions collected at steps 1, 2, ...
    epochs: Vec<(f64, f64)>,
    epsilon: f64,
    /// Defaults to the design's own Lipschitz bound.
    lipschitz: Option<f64>,
    alpha: f64,
}

impl Default for ConfseqConfig {
    fn default() -> Self {
        Self {
            params: CollectionParams::default(),
            epochs: default_epochs(),
            epsilon: 0.04,
            lipschitz: None,
            alpha: checks::DEFAULT_ALPHA,
        }
    }
}

#[derive(Serialize)]
struct StepRecord {
    t: usize,
    region: (f64, f64),
    alpha_t: f64,
    estimate: f64,
    maxbias: f64,
    sd: f64,
    lower: f64,
    upper: f64,
    delta_star: f64,
    target: f64,
    covered: bool,
    degenerate: bool,
}

#[derive(Serialize)]
#[serde(untagged)]
enum ConfseqResult {
    Single { replication: u64, covers_all: bool, steps: Vec<StepRecord> },
    Summary(ConfSeqSummary),
}

#[derive(Serialize)]
struct ConfseqBody {
    config: ConfseqConfig,
    #[serde(flatten)]
    result: ConfseqResult,
}

fn step_records(cfg: &ConfseqConfig, seq: &ConfidenceSequence, targets: &[f64]) -> Vec<StepRecord> {
    seq.entries
        .iter()
        .zip(targets)
        .zip(&cfg.epochs)
        .map(|((e, &target), &region)| StepRecord {
            t: e.t,
            region,
            alpha_t: e.alpha,
            estimate: e.estimate,
            maxbias: e.maxbias,
            sd: e.sd,
            lower: e.lower,
            upper: e.upper,
            delta_star: e.delta_star,
            target,
            covered: e.lower <= target && target <= e.upper,
            degenerate: e.degenerate,
        })
        .collect()
}

pub fn confseq(args: &ConfseqArgs) -> Result<(), Failure> {
    let mut cfg: ConfseqConfig = match &args.input {
        Some(p) => read_json(p)?,
        None => ConfseqConfig::default(),
    };
    if let Some(e) = args.epsilon {
        cfg.epsilon = e;
    }
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    if let Some(s) = args.seed {
        cfg.params.seed = s;
    }
    if let Some(l) = args.lipschitz {
        cfg.lipschitz = Some(l);
    }
    checks::epsilon(cfg.epsilon)?;
    checks::alpha(Some(cfg.alpha))?;
    if cfg.epochs.is_empty() {
        return Err(Failure::validation("no collection epochs"));
    }
    let l = cfg.lipschitz.unwrap_or_else(|| cfg.params.lipschitz_bound());
    checks::lipschitz(&[l])?;
    cfg.lipschitz = Some(l);

    let (result, table) = match args.reps {
        None => {
            let (seq, targets) =
                run_confidence_sequence(&cfg.params, &cfg.epochs, cfg.epsilon, l, cfg.alpha, args.replication)?;
            let steps = step_records(&cfg, &seq, &targets);
            if args.out.strict && steps.iter().any(|s| s.degenerate) {
                return Err(Failure::strict("a step has an empty non-overlap estimand"));
            }
            let mut t = Table::new(vec![
                "t", "region_lower", "region_upper", "alpha_t", "estimate", "maxbias", "sd", "lower", "upper",
                "half_length", "delta_star", "target", "covered", "degenerate",
            ]);
            for s in &steps {
                t.push(vec![
                    s.t.to_string(),
                    s.region.0.to_string(),
                    s.region.1.to_string(),
                    s.alpha_t.to_string(),
                    s.estimate.to_string(),
                    s.maxbias.to_string(),
                    s.sd.to_string(),
                    s.lower.to_string(),
                    s.upper.to_string(),
                    ((s.upper - s.lower) / 2.0).to_string(),
                    s.delta_star.to_string(),
                    s.target.to_string(),
                    s.covered.to_string(),
                    s.degenerate.to_string(),
                ]);
            }
            let covers_all = steps.iter().all(|s| s.covered);
            (ConfseqResult::Single { replication: args.replication, covers_all, steps }, t)
        }
        Some(reps) => {
            checks::positive("--reps", reps)?;
            let s = confidence_sequence_experiment(&cfg.params, &cfg.epochs, cfg.epsilon, l, cfg.alpha, reps)?;
            let mut t = Table::new(vec![
                "t", "region_lower", "region_upper", "alpha_t", "step_coverage", "mean_half_length",
                "joint_coverage", "replications", "failures",
            ]);
            for (k, &(a, b)) in cfg.epochs.iter().enumerate() {
                t.push(vec![
                    (k + 1).to_string(),
                    a.to_string(),
                    b.to_string(),
                    sequence_alpha(cfg.alpha, k + 1).to_string(),
                    s.step_coverage[k].to_string(),
                    s.mean_half_length[k].to_string(),
                    s.joint_coverage.to_string(),
                    s.replications.to_string(),
                    s.failures.to_string(),
                ]);
            }
            (ConfseqResult::Summary(s), t)
        }
    };
    emit(&args.out, Format::Csv, "confseq", ConfseqBody { config: cfg, result }, || table)
}
