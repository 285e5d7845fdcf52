use serde::Serialize;

use crate::error::{Error, Result};
use crate::lipschitz::LipschitzClass;
use crate::modulus::ModulusProblem;
use crate::real::Real;

use super::{check_alpha, minimax_interval};

/// `6 alpha / (pi^2 t^2)`; these sum to `alpha` over `t = 1, 2, ...`.
pub fn sequence_alpha<T: Real>(alpha: T, t: usize) -> T {
    let pi = T::lit(std::f64::consts::PI);
    let t = T::from_count(t);
    T::lit(6.0) * alpha / (pi * pi * t * t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceEntry<T> {
    pub t: usize,
    pub estimate: T,
    pub maxbias: T,
    pub sd: T,
    pub alpha: T,
    pub lower: T,
    pub upper: T,
    pub delta_star: T,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceSequence<T> {
    pub alpha: T,
    pub entries: Vec<SequenceEntry<T>>,
}

impl<T: Real> ConfidenceSequence<T> {
    /// True when every step's interval contains its target.
    pub fn covers_all(&self, targets: &[T]) -> bool {
        self.entries
            .iter()
            .zip(targets)
            .all(|(e, &v)| e.lower <= v && v <= e.upper)
    }
}

/// Minimax interval at level `alpha_t` for each step, with outcomes taken
/// from each problem's dataset. Step `t` is 1-based.
pub fn confidence_sequence<T: Real>(steps: &[ModulusProblem<T>], alpha: T) -> Result<ConfidenceSequence<T>> {
    check_alpha(alpha)?;
    let mut entries = Vec::with_capacity(steps.len());
    for (k, problem) in steps.iter().enumerate() {
        let t = k + 1;
        let alpha_t = sequence_alpha(alpha, t);
        let class: LipschitzClass<T> = problem.class().clone();
        let report = minimax_interval(problem.data(), problem.weights().to_vec(), class, alpha_t).map_err(|e| {
            Error::Step {
                step: t,
                source: Box::new(e),
            }
        })?;
        entries.push(SequenceEntry {
            t,
            estimate: report.estimate,
            maxbias: report.maxbias,
            sd: report.sd,
            alpha: alpha_t,
            lower: report.lower,
            upper: report.upper,
            delta_star: report.delta_star,
            degenerate: report.degenerate,
        });
    }
    Ok(ConfidenceSequence { alpha, entries })
}
