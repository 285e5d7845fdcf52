//! The modulus of continuity problem, its dual quantities and checks.

mod extrapolation;
mod graph;
mod ipm;
mod linalg;
mod matching;
pub mod maxflow;
pub mod toy;

use serde::Serialize;

use crate::data::{Arm, Dataset};
use crate::error::{Error, Result};
use crate::lipschitz::LipschitzClass;
use crate::real::Real;

pub use extrapolation::{monotone_extrapolation_check, monotone_extrapolation_gap, ExtrapolationGap};
pub use matching::{matching_weights, MatchEntry, MatchingWeights};
pub use maxflow::{max_flow_matrix, TransportPlan};

use graph::Program;

/// Extra shape restriction `f(x_upper, arm) >= f(x_lower, arm)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OrderConstraint {
    pub arm: Arm,
    pub upper: usize,
    pub lower: usize,
}

/// Weighted estimand `sum_i w_i (f(x_i,1) - f(x_i,0))` over a Lipschitz class.
#[derive(Debug, Clone)]
pub struct ModulusProblem<T> {
    data: Dataset<T>,
    weights: Vec<T>,
    class: LipschitzClass<T>,
    order: Vec<OrderConstraint>,
    program: Program<T>,
}

impl<T: Real> ModulusProblem<T> {
    pub fn new(data: Dataset<T>, weights: Vec<T>, class: LipschitzClass<T>) -> Result<Self> {
        Self::with_order_constraints(data, weights, class, Vec::new())
    }

    pub fn with_order_constraints(
        data: Dataset<T>,
        weights: Vec<T>,
        class: LipschitzClass<T>,
        order: Vec<OrderConstraint>,
    ) -> Result<Self> {
        if weights.len() != data.n() {
            return Err(Error::invalid(format!(
                "{} weights for {} units",
                weights.len(),
                data.n()
            )));
        }
        if weights.iter().any(|&w| !(w >= T::zero() && w.is_finite())) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        if class.distances().n() != data.n() {
            return Err(Error::invalid("distance matrix size differs from dataset"));
        }
        if let Some(c) = order.iter().find(|c| c.upper >= data.n() || c.lower >= data.n()) {
            return Err(Error::invalid(format!("order constraint {c:?} references a missing unit")));
        }
        let program = Program::compile(&data, &weights, &class, &order)?;
        Ok(Self {
            data,
            weights,
            class,
            order,
            program,
        })
    }

    /// Convenience constructor with the Euclidean metric.
    pub fn euclidean(data: Dataset<T>, weights: Vec<T>, lipschitz: T) -> Result<Self> {
        let class = LipschitzClass::euclidean(&data, lipschitz)?;
        Self::new(data, weights, class)
    }

    pub fn data(&self) -> &Dataset<T> {
        &self.data
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn class(&self) -> &LipschitzClass<T> {
        &self.class
    }

    pub fn lipschitz(&self) -> T {
        self.class.lipschitz()
    }

    pub fn order_constraints(&self) -> &[OrderConstraint] {
        &self.order
    }

    pub fn weight_total(&self) -> T {
        self.weights.iter().copied().sum()
    }

    /// True when every weight is zero (the estimand is identically zero).
    pub fn is_degenerate(&self) -> bool {
        self.weight_total() == T::zero()
    }

    pub fn with_lipschitz(&self, lipschitz: T) -> Result<Self> {
        Self::with_order_constraints(
            self.data.clone(),
            self.weights.clone(),
            self.class.with_lipschitz(lipschitz)?,
            self.order.clone(),
        )
    }

    pub fn with_weights(&self, weights: Vec<T>) -> Result<Self> {
        Self::with_order_constraints(self.data.clone(), weights, self.class.clone(), self.order.clone())
    }

    pub(crate) fn program(&self) -> &Program<T> {
        &self.program
    }
}

/// Interior-point settings.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions<T> {
    /// Target relative duality gap.
    pub tolerance: T,
    pub max_iterations: usize,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tolerance: T::solver_tolerance(),
            max_iterations: 300,
        }
    }
}

/// Multiplier of `f(x_upper, arm) - f(x_lower, arm) <= bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeDual<T> {
    pub arm: Arm,
    pub upper: usize,
    pub lower: usize,
    pub value: T,
    /// Order (monotonicity) constraint rather than a Lipschitz one.
    pub order: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusSolution<T> {
    pub delta: T,
    pub omega: T,
    pub omega_prime: T,
    /// `f_star[arm][i] = f*(x_i, arm)`.
    pub f_star: [Vec<T>; 2],
    /// Ball multiplier, normalised so `f*(x_j,z_j)/sigma_j^2` sums to `mu * sum(w)` per arm.
    pub mu: T,
    pub duals: Vec<EdgeDual<T>>,
    pub relative_gap: T,
    pub iterations: usize,
}

impl<T: Real> ModulusSolution<T> {
    pub fn f_star(&self, i: usize, arm: Arm) -> T {
        self.f_star[arm.index()][i]
    }
}

pub fn solve_modulus<T: Real>(problem: &ModulusProblem<T>, delta: T) -> Result<ModulusSolution<T>> {
    solve_modulus_with(problem, delta, &SolverOptions::default())
}

/// Solves at radius `delta` by locating the ball multiplier whose
/// penalised solution has exactly that radius.
pub fn solve_modulus_with<T: Real>(
    problem: &ModulusProblem<T>,
    delta: T,
    opts: &SolverOptions<T>,
) -> Result<ModulusSolution<T>> {
    if !(delta > T::zero() && delta.is_finite()) {
        return Err(Error::invalid(format!("delta {delta} must be positive and finite")));
    }
    if problem.is_degenerate() {
        return Err(Error::Degenerate("all estimand weights are zero".into()));
    }
    let prog = problem.program();
    // Radius grows like 2 mu sqrt(sum W^2/C) while no constraint binds.
    let free: T = prog
        .arms
        .iter()
        .flat_map(|a| a.nodes.iter())
        .filter(|nd| nd.curvature > T::zero())
        .map(|nd| nd.weight * nd.weight / nd.curvature)
        .sum::<T>()
        .sqrt();
    let target = delta.ln();
    let rtol = opts.tolerance * T::lit(10.0);
    let mut log_mu = (delta / (T::lit(2.0) * free)).ln();
    let (mut lo, mut hi): (Option<T>, Option<T>) = (None, None);
    let mut best: Option<(T, Penalised<T>)> = None;
    for _ in 0..200 {
        let mu = log_mu.exp();
        let pen = solve_penalised(problem, mu, opts)?;
        let err = pen.delta.ln() - target;
        if best.as_ref().is_none_or(|(e, _)| err.abs() < e.abs()) {
            best = Some((err, pen.clone()));
        }
        if err.abs() <= rtol {
            break;
        }
        if err < T::zero() {
            lo = Some(lo.map_or(log_mu, |v| v.max(log_mu)));
        } else {
            hi = Some(hi.map_or(log_mu, |v| v.min(log_mu)));
        }
        let slope = mu / pen.delta * pen.ddelta_dmu;
        let mut next = if slope > T::zero() && slope.is_finite() {
            log_mu - err / slope
        } else {
            log_mu - err
        };
        match (lo, hi) {
            (Some(a), Some(b)) => {
                if b - a <= T::epsilon() * T::lit(8.0) * (T::one() + a.abs()) {
                    break;
                }
                if !(next > a && next < b) {
                    next = (a + b) / T::lit(2.0);
                }
            }
            (Some(a), None) if !(next > a) => next = a + T::lit(2.0).ln(),
            (None, Some(b)) if !(next < b) => next = b - T::lit(2.0).ln(),
            _ => {}
        }
        log_mu = next;
    }
    let (_, pen) = best.expect("at least one solve");
    let mut sol = pen.into_solution(problem);
    sol.delta = delta;
    sol.omega_prime = omega_derivative(&sol, problem)?;
    Ok(sol)
}

/// Modulus solution at ball multiplier `mu`; its radius is `solution.delta`.
pub fn solve_modulus_at_multiplier<T: Real>(problem: &ModulusProblem<T>, mu: T) -> Result<ModulusSolution<T>> {
    if !(mu > T::zero() && mu.is_finite()) {
        return Err(Error::invalid(format!("multiplier {mu} must be positive and finite")));
    }
    if problem.is_degenerate() {
        return Err(Error::Degenerate("all estimand weights are zero".into()));
    }
    let pen = solve_penalised(problem, mu, &SolverOptions::default())?;
    let mut sol = pen.into_solution(problem);
    sol.omega_prime = omega_derivative(&sol, problem)?;
    Ok(sol)
}

#[derive(Clone)]
struct Penalised<T> {
    mu: T,
    delta: T,
    ddelta_dmu: T,
    x: Vec<T>,
    lambda: Vec<T>,
    gap: T,
    iterations: usize,
}

fn solve_penalised<T: Real>(problem: &ModulusProblem<T>, mu: T, opts: &SolverOptions<T>) -> Result<Penalised<T>> {
    let prog = problem.program();
    let out = ipm::solve_qp(prog, mu, opts)?;
    let curv: Vec<T> = prog.arms.iter().flat_map(|a| a.nodes.iter().map(|nd| nd.curvature)).collect();
    let r2: T = curv.iter().zip(&out.x).map(|(&c, &v)| c * v * v).sum();
    let cxx: T = curv.iter().zip(&out.x).zip(&out.dx_dmu).map(|((&c, &v), &d)| c * v * d).sum();
    let delta = T::lit(2.0) * r2.sqrt();
    Ok(Penalised {
        mu,
        delta,
        ddelta_dmu: T::lit(4.0) * cxx / delta,
        x: out.x,
        lambda: out.lambda,
        gap: out.gap,
        iterations: out.iterations,
    })
}

impl<T: Real> Penalised<T> {
    fn into_solution(self, problem: &ModulusProblem<T>) -> ModulusSolution<T> {
        let prog = problem.program();
        let objective: T = prog
            .arms
            .iter()
            .flat_map(|a| a.nodes.iter().map(|nd| nd.weight))
            .zip(&self.x)
            .map(|(w, &v)| w * v)
            .sum();
        let f_star = extend_to_units(problem, &self.x);
        let mut duals = Vec::with_capacity(prog.constraints.len());
        for (con, &value) in prog.constraints.iter().zip(&self.lambda) {
            let arm_idx = usize::from(con.p >= prog.arms[1].offset);
            let g = &prog.arms[arm_idx];
            let (p, q) = (g.nodes[con.p - g.offset].rep, g.nodes[con.q - g.offset].rep);
            let (arm, upper, lower) = if arm_idx == 1 {
                (Arm::Treated, p, q)
            } else {
                (Arm::Control, q, p)
            };
            duals.push(EdgeDual {
                arm,
                upper,
                lower,
                value,
                order: con.order,
            });
        }
        ModulusSolution {
            delta: self.delta,
            omega: T::lit(2.0) * objective,
            omega_prime: T::zero(),
            f_star,
            mu: self.mu,
            duals,
            relative_gap: self.gap,
            iterations: self.iterations,
        }
    }
}

/// `delta * sum(w) / (2 * sum_{z_j = 1} f*(x_j,1) / sigma_j^2)`.
pub fn omega_derivative<T: Real>(solution: &ModulusSolution<T>, problem: &ModulusProblem<T>) -> Result<T> {
    let data = problem.data();
    let denom: T = (0..data.n())
        .filter(|&j| data.z()[j])
        .map(|j| {
            let s = data.sigma()[j];
            solution.f_star[1][j] / (s * s)
        })
        .sum();
    if !(denom > T::zero()) {
        return Err(Error::Degenerate(
            "treated-arm solution values sum to zero; derivative undefined".into(),
        ));
    }
    Ok(solution.delta * problem.weight_total() / (T::lit(2.0) * denom))
}

/// Maps node values back to units; units outside the program take the
/// smallest Lipschitz majorant of the node values (a feasible extension).
fn extend_to_units<T: Real>(problem: &ModulusProblem<T>, x: &[T]) -> [Vec<T>; 2] {
    let prog = problem.program();
    let n = problem.data().n();
    let mut f: [Vec<T>; 2] = [vec![T::zero(); n], vec![T::zero(); n]];
    for (a, arm) in prog.arms.iter().enumerate() {
        let sign = if a == 1 { T::one() } else { -T::one() };
        for i in 0..n {
            let v = match arm.unit_node[i] {
                Some(k) => x[arm.offset + k],
                None => arm
                    .nodes
                    .iter()
                    .enumerate()
                    .map(|(k, nd)| x[arm.offset + k] + problem.class().bound(i, nd.rep))
                    .fold(T::infinity(), T::min),
            };
            f[a][i] = sign * v;
        }
    }
    f
}

#[cfg(test)]
pub(crate) mod tests;
