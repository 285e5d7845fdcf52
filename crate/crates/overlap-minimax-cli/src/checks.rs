//! Flag validation shared by all commands; failures exit with code 2.

use crate::failure::Failure;

pub const DEFAULT_ALPHA: f64 = 0.05;

pub fn alpha(v: Option<f64>) -> Result<f64, Failure> {
    let a = v.unwrap_or(DEFAULT_ALPHA);
    if a > 0.0 && a < 1.0 {
        Ok(a)
    } else {
        Err(Failure::validation(format!("--alpha {a} must lie in (0, 1)")))
    }
}

pub fn epsilon(e: f64) -> Result<f64, Failure> {
    if e > 0.0 && e < 0.5 {
        Ok(e)
    } else {
        Err(Failure::validation(format!("overlap threshold {e} must lie in (0, 0.5)")))
    }
}

pub fn percentiles(ps: &[f64]) -> Result<(), Failure> {
    if ps.is_empty() {
        return Err(Failure::validation("empty percentile list"));
    }
    match ps.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
        Some(p) => Err(Failure::validation(format!("percentile {p} must lie in (0, 1]"))),
        None => Ok(()),
    }
}

pub fn lipschitz(ls: &[f64]) -> Result<(), Failure> {
    if ls.is_empty() {
        return Err(Failure::validation("empty Lipschitz list"));
    }
    match ls.iter().find(|&&l| !(l.is_finite() && l >= 0.0)) {
        Some(l) => Err(Failure::validation(format!("Lipschitz constant {l} must be finite and non-negative"))),
        None => Ok(()),
    }
}

pub fn positive(name: &str, v: usize) -> Result<usize, Failure> {
    if v == 0 {
        Err(Failure::validation(format!("{name} must be at least 1")))
    } else {
        Ok(v)
    }
}
