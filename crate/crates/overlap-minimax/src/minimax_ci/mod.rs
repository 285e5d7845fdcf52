//! Bias-aware fixed-length confidence intervals built on the modulus.

mod cv;
mod search;
mod sensitivity;
mod sequence;

use serde::Serialize;

use crate::data::{partition, Dataset};
use crate::error::{Error, Result};
use crate::lipschitz::LipschitzClass;
use crate::modulus::{ModulusProblem, ModulusSolution};
use crate::real::Real;

pub use cv::{cv_quantile, normal_quantile};
pub use search::{optimize_delta, DeltaSearch, SearchOptions};
pub use sensitivity::{sensitivity_curve, SensitivityCurve, SensitivityPoint, SmoothnessGrid};
pub use sequence::{confidence_sequence, sequence_alpha, ConfidenceSequence, SequenceEntry};

/// Anything with two endpoints and a miscoverage level.
pub trait ConfidenceInterval<T> {
    fn lower(&self) -> T;
    fn upper(&self) -> T;
    fn alpha(&self) -> T;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalReport<T> {
    pub estimate: T,
    pub maxbias: T,
    pub sd: T,
    pub cv: T,
    pub lower: T,
    pub upper: T,
    /// Zero for degenerate reports.
    pub delta_star: T,
    pub alpha: T,
    pub lipschitz: T,
    /// Estimand is an empty sum; the interval is the point `{0}`.
    pub degenerate: bool,
    /// False when the delta search hit the edge of its grid.
    pub bracketed: bool,
}

impl<T: Real> IntervalReport<T> {
    pub fn half_length(&self) -> T {
        (self.upper - self.lower) / T::lit(2.0)
    }

    pub fn length(&self) -> T {
        self.upper - self.lower
    }

    pub fn contains(&self, value: T) -> bool {
        self.lower <= value && value <= self.upper
    }

    fn degenerate(alpha: T, lipschitz: T) -> Result<Self> {
        Ok(Self {
            estimate: T::zero(),
            maxbias: T::zero(),
            sd: T::zero(),
            cv: cv_quantile(T::zero(), alpha)?,
            lower: T::zero(),
            upper: T::zero(),
            delta_star: T::zero(),
            alpha,
            lipschitz,
            degenerate: true,
            bracketed: true,
        })
    }
}

impl<T: Real> ConfidenceInterval<T> for IntervalReport<T> {
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

/// Coefficients `a_i` of the linear estimator `sum_i a_i y_i`.
pub fn estimator_weights<T: Real>(solution: &ModulusSolution<T>, problem: &ModulusProblem<T>) -> Vec<T> {
    let data = problem.data();
    let scale = T::lit(2.0) * solution.omega_prime / solution.delta;
    (0..data.n())
        .map(|i| {
            let s = data.sigma()[i];
            scale * solution.f_star(i, data.arm(i)) / (s * s)
        })
        .collect()
}

/// Minimax estimate at the solution's radius, cross-checked against the
/// normalised form that divides by the treated-arm mass.
pub fn estimator_value<T: Real>(solution: &ModulusSolution<T>, problem: &ModulusProblem<T>, y: &[T]) -> Result<T> {
    let data = problem.data();
    if y.len() != data.n() {
        return Err(Error::invalid(format!("{} outcomes for {} units", y.len(), data.n())));
    }
    let a = estimator_weights(solution, problem);
    let direct: T = a.iter().zip(y).map(|(&ai, &yi)| ai * yi).sum();
    let mut num = T::zero();
    let mut den = T::zero();
    let mut size = T::zero();
    for i in 0..data.n() {
        let s = data.sigma()[i];
        let g = solution.f_star(i, data.arm(i)) / (s * s);
        num += g * y[i];
        size += (g * y[i]).abs();
        if data.z()[i] {
            den += g;
        }
    }
    if !(den > T::zero()) {
        return Err(Error::Degenerate("treated-arm solution mass is zero".into()));
    }
    let normalised = problem.weight_total() * num / den;
    let scale = (problem.weight_total() * size / den).max(T::min_positive_value());
    let tol = T::lit(1e-8).max(T::epsilon() * T::lit(1e3));
    if (direct - normalised).abs() > tol * scale {
        return Err(Error::Inconsistent(format!(
            "estimator forms disagree: {direct} vs {normalised}"
        )));
    }
    Ok(direct)
}

/// Worst-case bias `(omega - delta * omega') / 2`, clipped at zero.
pub fn maxbias<T: Real>(solution: &ModulusSolution<T>) -> Result<T> {
    let v = (solution.omega - solution.delta * solution.omega_prime) / T::lit(2.0);
    let tol = T::lit(1e-9).max(T::epsilon() * T::lit(1e3) * solution.omega.abs());
    if v < -tol {
        return Err(Error::Inconsistent(format!("negative worst-case bias {v}")));
    }
    Ok(v.max(T::zero()))
}

/// Interval from a solved modulus problem at a fixed radius.
pub fn interval_at<T: Real>(
    solution: &ModulusSolution<T>,
    problem: &ModulusProblem<T>,
    y: &[T],
    alpha: T,
) -> Result<IntervalReport<T>> {
    let bias = maxbias(solution)?;
    let sd = solution.omega_prime;
    if !(sd > T::zero()) {
        return Err(Error::Degenerate("estimator standard deviation is zero".into()));
    }
    let cv = cv_quantile(bias / sd, alpha)?;
    let estimate = estimator_value(solution, problem, y)?;
    Ok(IntervalReport {
        estimate,
        maxbias: bias,
        sd,
        cv,
        lower: estimate - cv * sd,
        upper: estimate + cv * sd,
        delta_star: solution.delta,
        alpha,
        lipschitz: problem.lipschitz(),
        degenerate: false,
        bracketed: true,
    })
}

/// Minimax interval for `sum_i w_i tau(x_i)` with the radius chosen to
/// minimise the half-length. All-zero weights give the point `{0}`.
pub fn minimax_interval<T: Real>(
    data: &Dataset<T>,
    weights: Vec<T>,
    class: LipschitzClass<T>,
    alpha: T,
) -> Result<IntervalReport<T>> {
    check_alpha(alpha)?;
    let lipschitz = class.lipschitz();
    if weights.iter().all(|&w| w == T::zero()) {
        return IntervalReport::degenerate(alpha, lipschitz);
    }
    let problem = ModulusProblem::new(data.clone(), weights, class)?;
    let search = optimize_delta(&problem, alpha, &SearchOptions::default())?;
    let mut report = interval_at(&search.solution, &problem, data.y(), alpha)?;
    report.bracketed = search.bracketed;
    Ok(report)
}

/// Interval for the non-overlap part of the effect at threshold `epsilon`.
pub fn mp_interval<T: Real>(data: &Dataset<T>, epsilon: T, lipschitz: T, alpha: T) -> Result<IntervalReport<T>> {
    let part = partition(data, epsilon)?;
    let class = LipschitzClass::euclidean(data, lipschitz)?;
    minimax_interval(data, part.weights, class, alpha)
}

/// Interval for the full sample average effect (weights `1/n`).
pub fn m_interval<T: Real>(data: &Dataset<T>, lipschitz: T, alpha: T) -> Result<IntervalReport<T>> {
    let n = data.n();
    let w = vec![T::one() / T::from_count(n); n];
    let class = LipschitzClass::euclidean(data, lipschitz)?;
    minimax_interval(data, w, class, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMode {
    EndpointMax,
    Length,
}

pub fn metric_t<T: Real, C: ConfidenceInterval<T>>(interval: &C, mode: MetricMode) -> T {
    match mode {
        MetricMode::EndpointMax => interval.lower().abs().max(interval.upper().abs()),
        MetricMode::Length => interval.upper() - interval.lower(),
    }
}

/// Endpoint sum of two intervals at the same level; covers the sum of their
/// targets with miscoverage at most the sum of the levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CombinedInterval<T> {
    pub lower: T,
    pub upper: T,
    pub alpha: T,
}

impl<T: Real> ConfidenceInterval<T> for CombinedInterval<T> {
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

pub fn combine_intervals<T: Real, A, B>(a: &A, b: &B) -> Result<CombinedInterval<T>>
where
    A: ConfidenceInterval<T>,
    B: ConfidenceInterval<T>,
{
    let (la, lb) = (a.alpha(), b.alpha());
    if (la - lb).abs() > T::epsilon() * T::lit(16.0) * la.max(lb) {
        return Err(Error::LevelMismatch(la.as_f64(), lb.as_f64()));
    }
    Ok(CombinedInterval {
        lower: a.lower() + b.lower(),
        upper: a.upper() + b.upper(),
        alpha: la + lb,
    })
}

pub(crate) fn check_alpha<T: Real>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha < T::one() {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha {alpha} must lie in (0, 1)")))
    }
}

#[cfg(test)]
mod tests;
