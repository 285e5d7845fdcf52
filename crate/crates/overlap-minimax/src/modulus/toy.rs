//! Closed-form modulus for the four-site toy design.
//!
//! Sites sit at `-xi-eta, -xi, xi, xi+eta` holding `k*n, n, n, k*n` units.
//! The two left sites are controls, the two right sites treated, noise sd is
//! one, and each unit at an outer site carries weight `1/((k+1) n)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToyConfig<T> {
    pub n: usize,
    /// Ratio of outer-site to inner-site counts; `k * n` must be an integer.
    pub k: usize,
    pub xi: T,
    pub eta: T,
    pub lipschitz: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ToyRegime {
    /// Ball constraint alone determines the solution shape.
    Slack,
    /// The Lipschitz constraint between outer and inner sites binds.
    Binding,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ToyOracle<T> {
    pub omega: T,
    pub omega_prime: T,
    pub maxbias: T,
    pub sd: T,
    pub regime: ToyRegime,
}

impl<T: Real> ToyConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k < 2 {
            return Err(Error::invalid("toy design needs n >= 1 and k >= 2"));
        }
        if !(self.xi > T::zero() && self.eta > T::zero() && self.lipschitz > T::zero()) {
            return Err(Error::invalid("toy design needs positive xi, eta and L"));
        }
        Ok(())
    }

    /// Weight each outer unit carries in the closed form.
    pub fn outer_weight(&self) -> T {
        T::one() / T::from_count((self.k + 1) * self.n)
    }

    /// Boundary between the two regimes.
    pub fn critical_delta(&self) -> T {
        let (n, k) = (T::from_count(self.n), T::from_count(self.k));
        T::lit(2.0) * (T::lit(2.0) * n * k * (k + T::one())).sqrt() * self.lipschitz * self.eta / (k - T::one())
    }

    pub fn oracle(&self, delta: T) -> Result<ToyOracle<T>> {
        self.validate()?;
        if !(delta > T::zero()) {
            return Err(Error::invalid("delta must be positive"));
        }
        let two = T::lit(2.0);
        let (n, k, l) = (T::from_count(self.n), T::from_count(self.k), self.lipschitz);
        let big_k = two * k / (k + T::one());
        let gamma = two / n * (T::one() + T::one() / k);
        let cap = two * k * n * l * l * self.eta * self.eta / (k + T::one());
        let base = two * l * (two * self.xi + self.eta);
        let (omega, omega_prime, regime) = if delta <= self.critical_delta() {
            (
                big_k * (delta * gamma.sqrt() / two + base),
                big_k * gamma.sqrt() / two,
                ToyRegime::Slack,
            )
        } else {
            let c = (T::lit(8.0) / (n * (k + T::one()))).sqrt();
            let root = (delta * delta / T::lit(4.0) - cap).sqrt();
            (
                big_k * (base + two * (k - T::one()) * l * self.eta / (k + T::one()) + c * root),
                big_k * c * delta / (T::lit(4.0) * root),
                ToyRegime::Binding,
            )
        };
        Ok(ToyOracle {
            omega,
            omega_prime,
            maxbias: (omega - delta * omega_prime) / two,
            sd: omega_prime,
            regime,
        })
    }
}
