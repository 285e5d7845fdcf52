use serde::Serialize;

use crate::data::{partition, Dataset};
use crate::error::Result;
use crate::lipschitz::{contextualize_l, LipschitzClass, Regressor};
use crate::real::Real;

use super::{minimax_interval, IntervalReport};

/// Smoothness levels to sweep.
#[derive(Debug, Clone)]
pub enum SmoothnessGrid<T> {
    /// Percentiles turned into constants with [`contextualize_l`].
    Percentiles(Vec<T>),
    /// Explicit Lipschitz constants.
    Constants(Vec<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityPoint<T> {
    pub percentile: Option<T>,
    pub lipschitz: T,
    pub interval: IntervalReport<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityCurve<T> {
    pub epsilon: T,
    pub points: Vec<SensitivityPoint<T>>,
}

/// Non-overlap interval at each smoothness level. The regressor is only
/// consulted for percentile grids.
pub fn sensitivity_curve<T: Real>(
    data: &Dataset<T>,
    epsilon: T,
    grid: &SmoothnessGrid<T>,
    regressor: &dyn Regressor<T>,
    alpha: T,
) -> Result<SensitivityCurve<T>> {
    let part = partition(data, epsilon)?;
    let levels: Vec<(Option<T>, T)> = match grid {
        SmoothnessGrid::Constants(ls) => ls.iter().map(|&l| (None, l)).collect(),
        SmoothnessGrid::Percentiles(ps) => ps
            .iter()
            .map(|&p| contextualize_l(data, &part, regressor, p).map(|c| (Some(p), c.value)))
            .collect::<Result<_>>()?,
    };
    let base = LipschitzClass::euclidean(data, T::zero())?;
    let mut points = Vec::with_capacity(levels.len());
    for (percentile, lipschitz) in levels {
        let class = base.with_lipschitz(lipschitz)?;
        let interval = minimax_interval(data, part.weights.clone(), class, alpha)?;
        points.push(SensitivityPoint {
            percentile,
            lipschitz,
            interval,
        });
    }
    Ok(SensitivityCurve { epsilon, points })
}
