//! Choice of the modulus radius.
//!
//! The half-length `G = cv(maxbias/sd) * sd` is searched over the ball
//! multiplier `mu` on a log scale. The radius is increasing in `mu`, so this
//! is a reparametrisation of the search over `delta`, and each evaluation is
//! a single quadratic program instead of a root-find.

use crate::error::{Error, Result};
use crate::modulus::{solve_modulus, solve_modulus_at_multiplier, ModulusProblem, ModulusSolution};
use crate::real::Real;

use super::{check_alpha, cv_quantile, maxbias};

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions<T> {
    /// Starting radius; defaults to `1e-3 * sqrt(n) * min sigma`.
    pub delta_lo: Option<T>,
    /// Stop the upward sweep after this many consecutive non-improving points.
    pub patience: usize,
    /// Stop after this many consecutive points with no change in the half-length.
    pub max_plateau: usize,
    pub max_grid: usize,
    pub max_extend_down: usize,
    /// Golden-section stopping width in `log mu`.
    pub log_tolerance: T,
}

impl<T: Real> Default for SearchOptions<T> {
    fn default() -> Self {
        Self {
            delta_lo: None,
            patience: 3,
            max_plateau: 24,
            max_grid: 80,
            max_extend_down: 30,
            log_tolerance: T::lit(1e-6).max(T::epsilon().sqrt()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DeltaSearch<T> {
    pub solution: ModulusSolution<T>,
    pub half_length: T,
    pub maxbias: T,
    pub sd: T,
    pub cv: T,
    pub bracketed: bool,
    pub evaluations: usize,
}

struct Point<T> {
    log_mu: T,
    g: T,
}

struct Evaluator<'a, T: Real> {
    problem: &'a ModulusProblem<T>,
    alpha: T,
    evaluations: usize,
    best: Option<(T, ModulusSolution<T>)>,
}

impl<T: Real> Evaluator<'_, T> {
    fn eval(&mut self, log_mu: T) -> Result<T> {
        let sol = solve_modulus_at_multiplier(self.problem, log_mu.exp())?;
        self.evaluations += 1;
        let g = half_length(&sol, self.alpha)?;
        if self.best.as_ref().is_none_or(|(b, _)| g < *b) {
            self.best = Some((g, sol));
        }
        Ok(g)
    }
}

fn half_length<T: Real>(sol: &ModulusSolution<T>, alpha: T) -> Result<T> {
    let sd = sol.omega_prime;
    if !(sd > T::zero()) {
        return Err(Error::Degenerate("estimator standard deviation is zero".into()));
    }
    Ok(cv_quantile(maxbias(sol)? / sd, alpha)? * sd)
}

/// Radius minimising the half-length: a doubling sweep from `delta_lo`
/// (extended downward if the minimum sits at the start), then golden-section
/// refinement between the neighbours of the best grid point.
pub fn optimize_delta<T: Real>(
    problem: &ModulusProblem<T>,
    alpha: T,
    opts: &SearchOptions<T>,
) -> Result<DeltaSearch<T>> {
    check_alpha(alpha)?;
    let data = problem.data();
    let delta_lo = match opts.delta_lo {
        Some(d) => d,
        None => {
            let min_sigma = data.sigma().iter().copied().fold(T::infinity(), T::min);
            T::lit(1e-3) * T::from_count(data.n()).sqrt() * min_sigma
        }
    };
    let start = solve_modulus(problem, delta_lo)?;
    let step = T::lit(2.0).ln();
    let mut ev = Evaluator {
        problem,
        alpha,
        evaluations: 0,
        best: None,
    };

    let mut grid = vec![Point {
        log_mu: start.mu.ln(),
        g: half_length(&start, alpha)?,
    }];
    ev.best = Some((grid[0].g, start));
    // Tiny radii give solver-level jitter in `g`; treat it as a tie.
    let tol = T::epsilon().sqrt() * T::lit(0.1);
    let cmp = |a: T, b: T| {
        if b > a + tol * a.abs() {
            std::cmp::Ordering::Greater
        } else if b < a - tol * a.abs() {
            std::cmp::Ordering::Less
        } else {
            std::cmp::Ordering::Equal
        }
    };
    let (mut worse, mut plateau) = (0, 0);
    while worse < opts.patience && plateau < opts.max_plateau && grid.len() < opts.max_grid {
        let last = grid.last().expect("non-empty grid");
        let log_mu = last.log_mu + step;
        let g = ev.eval(log_mu)?;
        match cmp(last.g, g) {
            std::cmp::Ordering::Greater => worse += 1,
            std::cmp::Ordering::Less => (worse, plateau) = (0, 0),
            std::cmp::Ordering::Equal => plateau += 1,
        }
        grid.push(Point { log_mu, g });
    }
    let mut bracketed = worse >= opts.patience || plateau >= opts.max_plateau;

    let argmin = |grid: &[Point<T>]| {
        (0..grid.len())
            .min_by(|&a, &b| grid[a].g.partial_cmp(&grid[b].g).unwrap_or(std::cmp::Ordering::Equal))
            .expect("non-empty grid")
    };
    let descending_left = |grid: &[Point<T>]| grid.len() < 2 || cmp(grid[1].g, grid[0].g) == std::cmp::Ordering::Less;
    let mut i = argmin(&grid);
    let mut extended = 0;
    while i == 0 && descending_left(&grid) {
        if extended == opts.max_extend_down {
            bracketed = false;
            break;
        }
        let log_mu = grid[0].log_mu - step;
        let g = ev.eval(log_mu)?;
        grid.insert(0, Point { log_mu, g });
        extended += 1;
        i = argmin(&grid);
    }
    if i + 1 == grid.len() && worse < opts.patience {
        bracketed = false;
    }

    if i > 0 && i + 1 < grid.len() {
        golden_section(&mut ev, grid[i - 1].log_mu, grid[i + 1].log_mu, opts.log_tolerance)?;
    }
    let evaluations = ev.evaluations;
    let (g, solution) = ev.best.expect("at least one evaluation");
    let bias = maxbias(&solution)?;
    let sd = solution.omega_prime;
    Ok(DeltaSearch {
        half_length: g,
        maxbias: bias,
        sd,
        cv: g / sd,
        solution,
        bracketed,
        evaluations,
    })
}

fn golden_section<T: Real>(ev: &mut Evaluator<'_, T>, mut a: T, mut b: T, tol: T) -> Result<()> {
    let r = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut gc = ev.eval(c)?;
    let mut gd = ev.eval(d)?;
    while b - a > tol {
        if gc <= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = ev.eval(c)?;
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = ev.eval(d)?;
        }
    }
    Ok(())
}
