//! Check that adding monotone-extrapolation constraints leaves the modulus unchanged.
//!
//! For one-dimensional covariates whose zero-weight units lie on one side of
//! the positive-weight units, the treated-arm values of zero-weight units are
//! required to be non-increasing in their distance to the positive-weight set.

use crate::data::Arm;
use crate::error::{Error, Result};
use crate::real::Real;

use super::{solve_modulus, ModulusProblem, OrderConstraint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrapolationGap<T> {
    pub omega: T,
    pub omega_constrained: T,
}

impl<T: Real> ExtrapolationGap<T> {
    pub fn relative(&self) -> T {
        (self.omega - self.omega_constrained).abs() / self.omega.abs().max(T::min_positive_value())
    }
}

/// Relative tolerance used by [`monotone_extrapolation_check`].
pub const MONOTONE_TOLERANCE: f64 = 1e-6;

pub fn monotone_extrapolation_check<T: Real>(problem: &ModulusProblem<T>, delta: T) -> Result<bool> {
    let gap = monotone_extrapolation_gap(problem, delta)?;
    Ok(gap.relative() <= T::lit(MONOTONE_TOLERANCE))
}

pub fn monotone_extrapolation_gap<T: Real>(problem: &ModulusProblem<T>, delta: T) -> Result<ExtrapolationGap<T>> {
    let data = problem.data();
    if data.dim() != 1 {
        return Err(Error::Unsupported("monotone extrapolation check needs scalar covariates".into()));
    }
    if !problem.order_constraints().is_empty() {
        return Err(Error::invalid("problem already carries order constraints"));
    }
    let w = problem.weights();
    let n = data.n();
    let xs: Vec<T> = (0..n).map(|i| data.x(i)[0]).collect();
    let (zero, pos): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| w[i] == T::zero());
    if pos.is_empty() {
        return Err(Error::Degenerate("all estimand weights are zero".into()));
    }
    let extent = |s: &[usize]| {
        s.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &i| (lo.min(xs[i]), hi.max(xs[i])))
    };
    let (plo, phi) = extent(&pos);
    let (zlo, zhi) = extent(&zero);
    if !zero.is_empty() && !(zhi < plo || zlo > phi) {
        return Err(Error::Unsupported(
            "zero-weight units must lie on one side of the positive-weight units".into(),
        ));
    }
    // Distance to the positive-weight set.
    let eta: Vec<T> = xs.iter().map(|&v| (plo - v).max(v - phi).max(T::zero())).collect();

    let mut sorted = zero.clone();
    sorted.sort_by(|&a, &b| eta[a].partial_cmp(&eta[b]).unwrap().then(a.cmp(&b)));
    let mut order = Vec::new();
    for pair in sorted.windows(2) {
        let (near, far) = (pair[0], pair[1]);
        if eta[near] == eta[far] {
            continue;
        }
        order.push(OrderConstraint {
            arm: Arm::Treated,
            upper: near,
            lower: far,
        });
    }

    let base = solve_modulus(problem, delta)?;
    let constrained = ModulusProblem::with_order_constraints(
        data.clone(),
        w.to_vec(),
        problem.class().clone(),
        order,
    )?;

    let sol = solve_modulus(&constrained, delta)?;
    Ok(ExtrapolationGap {
        omega: base.omega,
        omega_constrained: sol.omega,
    })
}
