//! Mehrotra predictor-corrector interior-point method for
//!
//!   minimise  1/2 sum_i C_i x_i^2 - mu sum_i W_i x_i
//!   s.t.      x_p - x_q <= b_pq          (Lipschitz and order constraints).
//!
//! For fixed `mu` its solution is the modulus solution at radius
//! `delta(mu) = 2 sqrt(sum C x^2)`; `mu` is the ball multiplier.
//! Newton systems are block diagonal per arm (graph Laplacian plus diagonal).

use crate::error::{Error, Result};
use crate::real::Real;

use super::graph::Program;
use super::linalg::{ChainFactor, DenseFactor};
use super::SolverOptions;

pub(crate) struct QpOutcome<T> {
    /// Node values in original units (arm 0 negated).
    pub x: Vec<T>,
    /// Constraint multipliers in the normalisation `C x = mu W - A^T Lambda`.
    pub lambda: Vec<T>,
    /// `d x / d mu` on the final active face.
    pub dx_dmu: Vec<T>,
    pub gap: T,
    pub iterations: usize,
}

enum Block<T> {
    Chain(ChainFactor<T>),
    Dense(DenseFactor<T>),
}

struct Newton<T> {
    blocks: Vec<Block<T>>,
}

fn factor<T: Real>(prog: &Program<T>, c: &[T], rho: &[T]) -> Result<Newton<T>> {
    let mut blocks = Vec::with_capacity(2);
    for arm in &prog.arms {
        let (off, nn) = (arm.offset, arm.nodes.len());
        let d = &c[off..off + nn];
        let in_arm = |p: usize| p >= off && p < off + nn;
        let block = if arm.chain {
            let mut r = vec![T::zero(); nn.saturating_sub(1)];
            for (k, con) in prog.constraints.iter().enumerate() {
                if in_arm(con.p) {
                    r[con.p.min(con.q) - off] += rho[k];
                }
            }
            Block::Chain(ChainFactor::new(d, &r))
        } else {
            let mut a = vec![T::zero(); nn * nn];
            for i in 0..nn {
                a[i * nn + i] = d[i];
            }
            for (k, con) in prog.constraints.iter().enumerate() {
                if in_arm(con.p) {
                    let (p, q) = (con.p - off, con.q - off);
                    a[p * nn + p] += rho[k];
                    a[q * nn + q] += rho[k];
                    a[p * nn + q] -= rho[k];
                    a[q * nn + p] -= rho[k];
                }
            }
            Block::Dense(dense_factor(a, nn)?)
        };
        blocks.push(block);
    }
    Ok(Newton { blocks })
}

/// Cholesky of a Laplacian-plus-diagonal block. Multipliers spanning many
/// orders of magnitude near convergence can push roundoff past the smallest
/// pivot; a growing diagonal shift then gives an inexact but usable step.
fn dense_factor<T: Real>(a: Vec<T>, n: usize) -> Result<DenseFactor<T>> {
    let scale = (0..n).fold(T::zero(), |m, i| m.max(a[i * n + i]));
    let mut shift = T::zero();
    for _ in 0..8 {
        let mut shifted = a.clone();
        for i in 0..n {
            shifted[i * n + i] += shift;
        }
        if let Some(f) = DenseFactor::new(shifted, n) {
            return Ok(f);
        }
        shift = if shift == T::zero() { scale * T::epsilon() * T::lit(16.0) } else { shift * T::lit(100.0) };
    }
    Err(Error::Inconsistent("Newton matrix lost positive definiteness".into()))
}

impl<T: Real> Newton<T> {
    fn solve(&self, prog: &Program<T>, r: &[T]) -> Vec<T> {
        let mut out = Vec::with_capacity(r.len());
        for (arm, block) in prog.arms.iter().zip(&self.blocks) {
            let seg = &r[arm.offset..arm.offset + arm.nodes.len()];
            out.extend(match block {
                Block::Chain(f) => f.solve(seg),
                Block::Dense(f) => f.solve(seg),
            });
        }
        out
    }
}

fn max_step<T: Real>(v: &[T], dv: &[T]) -> T {
    v.iter()
        .zip(dv)
        .filter(|(_, &d)| d < T::zero())
        .map(|(&a, &d)| -a / d)
        .fold(T::one(), T::min)
}

fn inf_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
}

/// Solves the penalised problem at ball multiplier `mu` (paper normalisation).
pub(crate) fn solve_qp<T: Real>(prog: &Program<T>, mu: T, opts: &SolverOptions<T>) -> Result<QpOutcome<T>> {
    let n = prog.n_nodes();
    let m = prog.constraints.len();
    let raw_w: Vec<T> = prog.arms.iter().flat_map(|a| a.nodes.iter().map(|nd| nd.weight)).collect();
    let raw_c: Vec<T> = prog.arms.iter().flat_map(|a| a.nodes.iter().map(|nd| nd.curvature)).collect();
    let sw = prog.arms[1].nodes.iter().map(|nd| nd.weight).sum::<T>();
    let sc = raw_c.iter().copied().sum::<T>();
    let w: Vec<T> = raw_w.iter().map(|&v| v / sw).collect();
    let c: Vec<T> = raw_c.iter().map(|&v| v / sc).collect();
    let mu_n = mu * sw / sc;

    // Scale x so that both the unconstrained optimum and the bounds are O(1).
    let bmax = prog.constraints.iter().fold(T::zero(), |a, con| a.max(con.bound));
    let xfree = (0..n)
        .filter(|&i| c[i] > T::zero())
        .fold(T::zero(), |a, i| a.max(mu_n * w[i] / c[i]));
    let kappa = bmax.max(xfree).max(T::min_positive_value().sqrt());
    let b: Vec<T> = prog.constraints.iter().map(|con| con.bound / kappa).collect();
    let mu_s = mu_n / kappa;

    if m == 0 {
        // One node per arm: closed form.
        let x: Vec<T> = (0..n).map(|i| mu * raw_w[i] / raw_c[i]).collect();
        return Ok(QpOutcome {
            dx_dmu: (0..n).map(|i| raw_w[i] / raw_c[i]).collect(),
            x,
            lambda: Vec::new(),
            gap: T::zero(),
            iterations: 0,
        });
    }

    let scaled = Scaled { c: &c, w: &w, b: &b, mu: mu_s };
    // Mehrotra steps can cycle on degenerate faces (near ties between the
    // bounds of an unobserved node). A different corrector budget follows a
    // different path, so a stall is retried before giving up.
    let mut attempt = Err(Error::NotConverged { iterations: 0, gap: f64::INFINITY });
    for correctors in [2, 0, 6] {
        attempt = iterate(prog, &scaled, opts, correctors);
        if !matches!(attempt, Err(Error::NotConverged { .. })) {
            break;
        }
    }
    let Iterate { mut x, lam, s, gap, iterations } = attempt?;
    let mut rho = vec![T::zero(); m];

    let polished = polish(prog, &c, &w, &b, mu_s, &x, &lam, &s);
    let dx_dmu = match polished {
        Some((px, slope)) => {
            x = px;
            slope
        }
        None => {
            // Sensitivity on the final (nearly active) face.
            for k in 0..m {
                rho[k] = lam[k] / s[k];
            }
            factor(prog, &c, &rho)?.solve(prog, &w)
        }
    };
    let to_raw = sw / sc; // d mu_s / d mu = sw / (sc kappa); x = kappa x_s
    Ok(QpOutcome {
        x: x.iter().map(|&v| v * kappa).collect(),
        lambda: lam.iter().map(|&l| l * sc * kappa).collect(),
        dx_dmu: dx_dmu.iter().map(|&v| v * to_raw).collect(),
        gap,
        iterations,
    })
}

struct Scaled<'a, T> {
    c: &'a [T],
    w: &'a [T],
    b: &'a [T],
    mu: T,
}

struct Iterate<T> {
    x: Vec<T>,
    lam: Vec<T>,
    s: Vec<T>,
    gap: T,
    iterations: usize,
}

/// Predictor-corrector iterations in scaled units, with up to `correctors`
/// centrality corrections per step.
fn iterate<T: Real>(prog: &Program<T>, sc: &Scaled<'_, T>, opts: &SolverOptions<T>, correctors: usize) -> Result<Iterate<T>> {
    let Scaled { c, w, b, mu: mu_s } = *sc;
    let n = c.len();
    let m = b.len();
    let mf = T::from_count(m);
    let mut x = vec![T::zero(); n];
    let mut s: Vec<T> = b.iter().map(|&v| v + T::one()).collect();
    let lam0 = T::one() / T::from_count(n);
    let mut lam = vec![lam0; m];

    let mut rd = vec![T::zero(); n];
    let mut rp = vec![T::zero(); m];
    let mut rho = vec![T::zero(); m];
    let mut ds = vec![T::zero(); m];
    let mut dl = vec![T::zero(); m];
    let mut rc = vec![T::zero(); m];

    let tol = opts.tolerance;
    let wscale = mu_s * inf_norm(w);
    let res_factor = T::lit(100.0);
    // Best iterate so far, with its merit in `gap`.
    let mut best: Option<Iterate<T>> = None;
    let mut iterations = 0;
    let mut gap;
    loop {
        for i in 0..n {
            rd[i] = c[i] * x[i] - mu_s * w[i];
        }
        for (k, con) in prog.constraints.iter().enumerate() {
            rd[con.p] += lam[k];
            rd[con.q] -= lam[k];
            rp[k] = x[con.p] - x[con.q] + s[k] - b[k];
        }
        let comp: T = lam.iter().zip(&s).map(|(&l, &v)| l * v).sum();
        let primal: T = (0..n).map(|i| T::lit(0.5) * c[i] * x[i] * x[i] - mu_s * w[i] * x[i]).sum::<T>();
        gap = comp / (primal.abs() + wscale + T::min_positive_value());
        let rd_rel = inf_norm(&rd) / (wscale + T::min_positive_value());
        let rp_rel = inf_norm(&rp) / (T::one() + inf_norm(b));
        // Residuals are limited by roundoff amplified through stiff active
        // constraints, so they get a looser target than the gap.
        let merit = gap.max(rd_rel / res_factor).max(rp_rel / res_factor);
        if best.as_ref().is_none_or(|b| merit < b.gap) {
            best = Some(Iterate { x: x.clone(), lam: lam.clone(), s: s.clone(), gap: merit, iterations });
        }
        if merit <= tol {
            break;
        }
        let b_best = best.as_ref().unwrap();
        if iterations >= opts.max_iterations || iterations >= b_best.iterations + 8 {
            if b_best.gap <= tol * T::lit(1e3) {
                return Ok(Iterate { iterations, ..best.unwrap() });
            }
            return Err(Error::NotConverged {
                iterations,
                gap: b_best.gap.as_f64(),
            });
        }
        iterations += 1;

        for k in 0..m {
            rho[k] = lam[k] / s[k];
        }
        let newton = factor(prog, c, &rho)?;
        let direction = |rc: &[T], dx_out: &mut Vec<T>, ds: &mut [T], dl: &mut [T]| {
            // rhs = -rd - A^T S^{-1} (Lambda rp - rc)
            let mut r: Vec<T> = rd.iter().map(|&v| -v).collect();
            for (k, con) in prog.constraints.iter().enumerate() {
                let g = (lam[k] * rp[k] - rc[k]) / s[k];
                r[con.p] -= g;
                r[con.q] += g;
            }
            *dx_out = newton.solve(prog, &r);
            for (k, con) in prog.constraints.iter().enumerate() {
                let adx = dx_out[con.p] - dx_out[con.q];
                ds[k] = -rp[k] - adx;
                dl[k] = (lam[k] * adx + lam[k] * rp[k] - rc[k]) / s[k];
            }
        };

        // Predictor.
        for k in 0..m {
            rc[k] = lam[k] * s[k];
        }
        let mut dx = Vec::new();
        direction(&rc, &mut dx, &mut ds, &mut dl);
        let a_aff = max_step(&s, &ds).min(max_step(&lam, &dl));
        let mu_cur = comp / mf;
        let mu_aff: T = (0..m)
            .map(|k| (s[k] + a_aff * ds[k]) * (lam[k] + a_aff * dl[k]))
            .sum::<T>()
            / mf;
        let sigma = (mu_aff / mu_cur).powi(3).min(T::one());

        // Corrector.
        for k in 0..m {
            rc[k] = lam[k] * s[k] + ds[k] * dl[k] - sigma * mu_cur;
        }
        direction(&rc, &mut dx, &mut ds, &mut dl);
        let mut step = max_step(&s, &ds).min(max_step(&lam, &dl)).min(T::one());

        // Centrality correctors: pull outlying products back towards the
        // target band when they are what limits the step.
        let target = sigma * mu_cur;
        let (lo_band, hi_band) = (T::lit(0.1) * target, T::lit(10.0) * target);
        let mut rc_try = vec![T::zero(); m];
        let (mut dx_try, mut ds_try, mut dl_try) = (Vec::new(), vec![T::zero(); m], vec![T::zero(); m]);
        for _ in 0..correctors {
            if step >= T::one() {
                break;
            }
            let trial = (step * T::lit(1.5) + T::lit(0.1)).min(T::one());
            for k in 0..m {
                let v = (s[k] + trial * ds[k]) * (lam[k] + trial * dl[k]);
                let t = if v < lo_band {
                    lo_band - v
                } else if v > hi_band {
                    (hi_band - v).max(-hi_band)
                } else {
                    T::zero()
                };
                rc_try[k] = rc[k] - t;
            }
            direction(&rc_try, &mut dx_try, &mut ds_try, &mut dl_try);
            let step_try = max_step(&s, &ds_try).min(max_step(&lam, &dl_try)).min(T::one());
            if step_try < step * T::lit(1.01) {
                break;
            }
            step = step_try;
            std::mem::swap(&mut dx, &mut dx_try);
            std::mem::swap(&mut ds, &mut ds_try);
            std::mem::swap(&mut dl, &mut dl_try);
            std::mem::swap(&mut rc, &mut rc_try);
        }
        let alpha = (T::lit(0.995) * step).min(T::one());
        for i in 0..n {
            x[i] += alpha * dx[i];
        }
        for k in 0..m {
            s[k] += alpha * ds[k];
            lam[k] += alpha * dl[k];
        }
    }

    Ok(Iterate { x, lam, s, gap, iterations })
}

/// Exact solution on the active set suggested by the interior point.
///
/// Active constraints (`s <= lambda`) are imposed as equalities; each connected
/// group of nodes then moves rigidly and its level has a closed form. Violated
/// constraints are added and the solve repeated. Returns the polished point
/// and `dx/dmu` (scaled units) if it is feasible and no worse than the
/// interior iterate.
#[allow(clippy::too_many_arguments)]
fn polish<T: Real>(
    prog: &Program<T>,
    c: &[T],
    w: &[T],
    b: &[T],
    mu: T,
    x: &[T],
    lam: &[T],
    s: &[T],
) -> Option<(Vec<T>, Vec<T>)> {
    let mut active: Vec<bool> = lam.iter().zip(s).map(|(&l, &v)| v <= l).collect();
    let scale = x.iter().fold(T::one(), |a, &v| a.max(v.abs()));
    let feas = T::epsilon().sqrt() * T::lit(1e-2) * scale;
    for _ in 0..4 {
        let (px, slope) = solve_on_face(prog, c, w, b, mu, &active)?;
        let mut violated = false;
        for (k, con) in prog.constraints.iter().enumerate() {
            if px[con.p] - px[con.q] > b[k] + feas {
                active[k] = true;
                violated = true;
            }
        }
        if violated {
            continue;
        }
        let obj = |v: &[T]| -> T {
            v.iter()
                .enumerate()
                .map(|(i, &xi)| T::lit(0.5) * c[i] * xi * xi - mu * w[i] * xi)
                .sum()
        };
        let (o_new, o_old) = (obj(&px), obj(x));
        if o_new > o_old + T::epsilon() * T::lit(1e3) * (o_old.abs() + T::one()) {
            return None;
        }
        return Some((px, slope));
    }
    None
}

fn solve_on_face<T: Real>(
    prog: &Program<T>,
    c: &[T],
    w: &[T],
    b: &[T],
    mu: T,
    active: &[bool],
) -> Option<(Vec<T>, Vec<T>)> {
    let n = c.len();
    let mut adj: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
    for (k, con) in prog.constraints.iter().enumerate() {
        if active[k] {
            // x_p = x_q + b
            adj[con.p].push((con.q, b[k]));
            adj[con.q].push((con.p, -b[k]));
        }
    }
    let mut seen = vec![false; n];
    let mut offset = vec![T::zero(); n];
    let mut px = vec![T::zero(); n];
    let mut slope = vec![T::zero(); n];
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut members = vec![root];
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            for &(v, d) in &adj[u] {
                // x_u = x_v + d
                if !seen[v] {
                    seen[v] = true;
                    offset[v] = offset[u] - d;
                    members.push(v);
                    stack.push(v);
                }
            }
        }
        let sc: T = members.iter().map(|&i| c[i]).sum();
        if !(sc > T::zero()) {
            return None;
        }
        let sw: T = members.iter().map(|&i| w[i]).sum();
        let sco: T = members.iter().map(|&i| c[i] * offset[i]).sum();
        let level = (mu * sw - sco) / sc;
        for &i in &members {
            px[i] = level + offset[i];
            slope[i] = sw / sc;
        }
    }
    Some((px, slope))
}
