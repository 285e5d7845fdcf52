use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, NoiseSd};
use crate::error::{Error, Result};

use super::{replication_rng, Simulated};

/// One-dimensional design on `[0, 1]` with a limited-overlap region near zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Example1Params {
    pub n: usize,
    /// Overlap level `o`: propensity at the edge of the low-overlap region.
    pub o: f64,
    /// Width `eta` of the low-overlap region.
    pub eta_dgp: f64,
    /// Effect scale.
    pub h: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for Example1Params {
    fn default() -> Self {
        Self {
            n: 1000,
            o: 0.05,
            eta_dgp: 0.05,
            h: 0.25,
            sigma: 0.06,
            seed: 0,
        }
    }
}

impl Example1Params {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be positive"));
        }
        if !(self.o > 0.0 && self.o < 0.5) {
            return Err(Error::invalid(format!("o = {} outside (0, 1/2)", self.o)));
        }
        if !(self.eta_dgp > 0.0 && self.eta_dgp < 0.5) {
            return Err(Error::invalid(format!("eta = {} outside (0, 1/2)", self.eta_dgp)));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::invalid("sigma must be positive"));
        }
        Ok(())
    }

    pub fn propensity(&self, x: f64) -> f64 {
        let (o, e) = (self.o, self.eta_dgp);
        if x <= e {
            o / e * x
        } else if x <= 2.0 * e {
            -o / e * (x - e) + (1.0 - o)
        } else {
            (1.0 - 2.0 * o) / (1.0 - 2.0 * e) * (x - 2.0 * e) + o
        }
    }

    /// Baseline `F(x) = f(x, 0)`.
    pub fn baseline(&self, x: f64) -> f64 {
        let (h, e) = (self.h, self.eta_dgp);
        if x <= e / 2.0 {
            4.0 * h / (e * e) * (x - e / 2.0).powi(2) + h
        } else if x <= e {
            -4.0 * h / (e * e) * x * (x - e)
        } else if x <= e + 0.5 {
            32.0 * h * (x - e) * (x - e - 0.5)
        } else {
            -16.0 * h / (2.0 * e - 1.0).powi(2) * (x - e - 0.5) * (x - 1.0)
        }
    }

    /// Effect `h(x) = 8H (x - 1/2)^2`.
    pub fn effect(&self, x: f64) -> f64 {
        8.0 * self.h * (x - 0.5).powi(2)
    }

    fn baseline_slope(&self, x: f64) -> f64 {
        let (h, e) = (self.h, self.eta_dgp);
        if x <= e / 2.0 {
            8.0 * h / (e * e) * (x - e / 2.0)
        } else if x <= e {
            -4.0 * h / (e * e) * (2.0 * x - e)
        } else if x <= e + 0.5 {
            32.0 * h * (2.0 * x - 2.0 * e - 0.5)
        } else {
            -16.0 * h / (2.0 * e - 1.0).powi(2) * (2.0 * x - e - 1.5)
        }
    }

    /// Largest slope of `f(., 0)` and `f(., 1)` on `[0, 1]`.
    ///
    /// Every piece is quadratic, so slopes are linear within pieces and the
    /// maximum is attained at a piece endpoint (approached from either side).
    pub fn lipschitz_bound(&self) -> f64 {
        let e = self.eta_dgp;
        let knots = [0.0, e / 2.0, e, e + 0.5, 1.0];
        let mut best: f64 = 0.0;
        for &k in &knots {
            for x in [k - 1e-12, k, k + 1e-12] {
                if !(0.0..=1.0).contains(&x) {
                    continue;
                }
                let s0 = self.baseline_slope(x);
                let s1 = s0 + 16.0 * self.h * (x - 0.5);
                best = best.max(s0.abs()).max(s1.abs());
            }
        }
        best
    }
}

/// Draws `x ~ U[0,1]`, `z ~ Bernoulli(pi(x))` and `y = f(x,z) + N(0, sigma^2)`
/// from the stream `(params.seed, replication)`.
pub fn simulate_example1(params: &Example1Params, replication: u64) -> Result<Simulated> {
    params.validate()?;
    let mut rng = replication_rng(params.seed, replication);
    let noise = Normal::new(0.0, params.sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let n = params.n;
    let (mut x, mut y, mut z, mut pi, mut f0, mut f1) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for _ in 0..n {
        let xi: f64 = rng.random();
        let p = params.propensity(xi);
        let zi = rng.random::<f64>() < p;
        let base = params.baseline(xi);
        let treated = base + params.effect(xi);
        let mean = if zi { treated } else { base };
        x.push(xi);
        z.push(zi);
        pi.push(p.clamp(0.0, 1.0));
        y.push(mean + noise.sample(&mut rng));
        f0.push(base);
        f1.push(treated);
    }
    let data = Dataset::from_flat(x, 1, y, z, pi, NoiseSd::Shared(params.sigma))?;
    Ok(Simulated { data, f0, f1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn propensity_branches() {
        let p = Example1Params::default();
        assert!((p.propensity(0.025) - 0.025).abs() < 1e-15);
        assert!((p.propensity(0.05) - 0.05).abs() < 1e-15);
        assert!((p.propensity(0.05 + 1e-12) - 0.95).abs() < 1e-9);
        assert!((p.propensity(1.0) - 0.95).abs() < 1e-12);
    }

    #[test]
    fn effect_and_baseline_values() {
        let p = Example1Params::default();
        assert_eq!(p.effect(0.5), 0.0);
        assert!((p.effect(0.0) - 0.5).abs() < 1e-15);
        assert!((p.effect(1.0) - 0.5).abs() < 1e-15);
        // Baseline is continuous at the knots.
        let e = p.eta_dgp;
        for k in [e / 2.0, e, e + 0.5] {
            assert!((p.baseline(k) - p.baseline(k + 1e-12)).abs() < 1e-9, "{k}");
        }
        assert!((p.baseline(1.0)).abs() < 1e-15);
    }

    #[test]
    fn slopes_match_finite_differences() {
        let p = Example1Params::default();
        for i in 1..200 {
            let x = i as f64 / 200.0 + 1e-4;
            let h = 1e-7;
            let fd = (p.baseline(x + h) - p.baseline(x - h)) / (2.0 * h);
            assert!((fd - p.baseline_slope(x)).abs() < 1e-5, "{x}");
        }
    }

    #[test]
    fn truth_is_lipschitz_at_the_bound() {
        let p = Example1Params {
            n: 300,
            ..Default::default()
        };
        let sim = simulate_example1(&p, 3).unwrap();
        let l = p.lipschitz_bound();
        // f(., 1) is steepest at x = 0: -4H/eta - 8H.
        assert!((l - 22.0).abs() < 1e-6, "{l}");
        let d = &sim.data;
        for i in 0..d.n() {
            for j in 0..i {
                let dist = (d.x(i)[0] - d.x(j)[0]).abs();
                assert!((sim.f0[i] - sim.f0[j]).abs() <= l * dist + 1e-12);
                assert!((sim.f1[i] - sim.f1[j]).abs() <= l * dist + 1e-12);
            }
        }
    }

    #[test]
    fn draws_are_reproducible_per_replication() {
        let p = Example1Params {
            n: 50,
            ..Default::default()
        };
        let a = simulate_example1(&p, 7).unwrap();
        let b = simulate_example1(&p, 7).unwrap();
        let c = simulate_example1(&p, 8).unwrap();
        assert_eq!(a.data, b.data);
        assert_ne!(a.data, c.data);
    }
}
