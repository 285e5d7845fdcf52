//! Imputation weights recovered from the modulus duals.
//!
//! In each arm, units with positive weight supply `mu * w_k` and observed
//! units absorb `f*(x_j, z_j) / sigma_j^2`; mass may move from `k` to `j`
//! only where the Lipschitz constraint between them binds. A feasible
//! transport is a flow decomposition of the constraint multipliers, and the
//! normalised rows are matching weights that sum to `w_k`.

use serde::Serialize;

use crate::data::Arm;
use crate::error::{Error, Result};
use crate::real::Real;

use super::maxflow::max_flow_matrix;
use super::{ModulusProblem, ModulusSolution};

/// `W_jk`: share of donor `j` in imputing `f(x_k, arm)` for target `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchEntry<T> {
    pub arm: Arm,
    pub target: usize,
    pub donor: usize,
    pub weight: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchingWeights<T> {
    /// Entries for targets with positive weight that are unobserved in `arm`.
    pub entries: Vec<MatchEntry<T>>,
    /// Binding tolerance that produced a feasible transport.
    pub binding_tolerance: T,
}

impl<T: Real> MatchingWeights<T> {
    pub fn row_sum(&self, arm: Arm, target: usize) -> T {
        self.entries
            .iter()
            .filter(|e| e.arm == arm && e.target == target)
            .map(|e| e.weight)
            .sum()
    }

    /// Donors and weights used to impute `f(x_target, arm)`.
    pub fn donors(&self, arm: Arm, target: usize) -> Vec<(usize, T)> {
        self.entries
            .iter()
            .filter(|e| e.arm == arm && e.target == target)
            .map(|e| (e.donor, e.weight))
            .collect()
    }
}

pub fn matching_weights<T: Real>(
    solution: &ModulusSolution<T>,
    problem: &ModulusProblem<T>,
) -> Result<MatchingWeights<T>> {
    let data = problem.data();
    let w = problem.weights();
    let n = data.n();
    let mut tol = T::binding_tolerance();
    let limit = T::lit(1e-2);
    loop {
        match transport(solution, problem, tol) {
            Ok(entries) => {
                let out = MatchingWeights {
                    entries,
                    binding_tolerance: tol,
                };
                let check_tol = T::epsilon().sqrt() * problem.weight_total();
                for k in 0..n {
                    if w[k] > T::zero() {
                        let arm = data.arm(k).other();
                        let s = out.row_sum(arm, k);
                        if (s - w[k]).abs() > check_tol {
                            return Err(Error::Inconsistent(format!(
                                "matching row {k} sums to {s}, expected {}",
                                w[k]
                            )));
                        }
                    }
                }
                return Ok(out);
            }
            Err(Error::Infeasible(_)) if tol < limit => tol *= T::lit(10.0),
            Err(e) => return Err(e),
        }
    }
}

fn transport<T: Real>(
    solution: &ModulusSolution<T>,
    problem: &ModulusProblem<T>,
    tol: T,
) -> Result<Vec<MatchEntry<T>>> {
    let data = problem.data();
    let w = problem.weights();
    let class = problem.class();
    let n = data.n();
    let mut entries = Vec::new();
    for arm in Arm::BOTH {
        let sign = if arm == Arm::Treated { T::one() } else { -T::one() };
        let x = |i: usize| sign * solution.f_star[arm.index()][i];
        let rows: Vec<usize> = (0..n).filter(|&k| w[k] > T::zero()).collect();
        let cols: Vec<usize> = (0..n).filter(|&j| data.arm(j) == arm).collect();
        let p: Vec<T> = rows.iter().map(|&k| solution.mu * w[k]).collect();
        let mut q: Vec<T> = cols
            .iter()
            .map(|&j| {
                let s = data.sigma()[j];
                (x(j) / (s * s)).max(T::zero())
            })
            .collect();
        let (sp, sq) = (p.iter().copied().sum::<T>(), q.iter().copied().sum::<T>());
        if !(sq > T::zero()) {
            return Err(Error::Degenerate("no positive demand in arm".into()));
        }
        for v in &mut q {
            *v *= sp / sq;
        }
        let scale = rows
            .iter()
            .chain(&cols)
            .map(|&i| x(i).abs())
            .fold(T::zero(), T::max);
        let mut allowed = Vec::new();
        for (a, &k) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                let bound = class.bound(k, j);
                let slack = bound - (x(k) - x(j));
                if bound == T::zero() || slack <= tol * (scale + bound) {
                    allowed.push((a, b));
                }
            }
        }
        let plan = max_flow_matrix(&p, &q, &allowed)?;
        for (a, b, v) in plan.entries {
            let (k, j) = (rows[a], cols[b]);
            if data.arm(k) != arm {
                entries.push(MatchEntry {
                    arm,
                    target: k,
                    donor: j,
                    weight: v / solution.mu,
                });
            }
        }
    }
    Ok(entries)
}
