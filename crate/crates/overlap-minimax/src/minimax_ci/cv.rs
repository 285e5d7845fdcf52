use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::real::Real;

/// Upper standard normal tail `P(N(0,1) > x)`.
fn upper_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

fn density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile, polished with Newton steps on the exact tail.
pub fn normal_quantile<T: Real>(p: T) -> T {
    let p = p.as_f64();
    let mut x = Normal::standard().inverse_cdf(p);
    if x.is_finite() {
        for _ in 0..2 {
            x -= (1.0 - upper_tail(x) - p) / density(x);
        }
    }
    T::lit(x)
}

/// `1 - alpha` quantile of `|N(b, 1)|`.
///
/// Solves `P(N(0,1) > c - b) + P(N(0,1) > c + b) = alpha` by Newton steps kept
/// inside the bracket `[b + z_{1-alpha}, b + z_{1-alpha/2}]` (slightly padded).
pub fn cv_quantile<T: Real>(b: T, alpha: T) -> Result<T> {
    let (b, alpha) = (b.as_f64(), alpha.as_f64());
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::invalid(format!("standardized bias {b} must be finite and non-negative")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} must lie in (0, 1)")));
    }
    let std = Normal::standard();
    let g = |c: f64| upper_tail(c - b) + upper_tail(c + b) - alpha;
    // The library quantile is only accurate to ~1e-9, so pad the bracket.
    let mut lo = b + std.inverse_cdf(1.0 - alpha) - 1e-3;
    let mut hi = b + std.inverse_cdf(1.0 - alpha / 2.0) + 1e-3;
    let mut c = 0.5 * (lo + hi);
    for _ in 0..100 {
        let v = g(c);
        if v > 0.0 {
            lo = c;
        } else {
            hi = c;
        }
        let d = -(density(c - b) + density(c + b));
        let mut next = c - v / d;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - c).abs() <= 1e-14 * next.abs().max(1.0) || hi - lo <= 1e-15 * hi {
            c = next;
            break;
        }
        c = next;
    }
    Ok(T::lit(c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unbiased_case_is_two_sided_normal_quantile() {
        let c: f64 = cv_quantile(0.0, 0.05).unwrap();
        assert!((c - 1.959963984540054).abs() < 1e-12, "{c:.17}");
    }

    #[test]
    fn coverage_equation_holds() {
        for &b in &[0.0, 0.3, 1.0, 2.5, 7.0] {
            for &a in &[0.01, 0.05, 0.2] {
                let c: f64 = cv_quantile(b, a).unwrap();
                let miss = upper_tail(c - b) + upper_tail(c + b);
                assert!((miss - a).abs() < 1e-12, "b {b} a {a}");
            }
        }
    }

    #[test]
    fn normal_quantile_is_exact() {
        let z: f64 = normal_quantile(0.975);
        assert!((z - 1.959963984540054).abs() < 1e-14);
        let z: f64 = normal_quantile(0.95);
        assert!((z - 1.6448536269514722).abs() < 1e-14);
    }

    #[test]
    fn rejects_negative_bias() {
        assert!(cv_quantile(-1.0, 0.05).is_err());
        assert!(cv_quantile(1.0f64, 1.0).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let c: f32 = cv_quantile(1.0f32, 0.05).unwrap();
        let d: f64 = cv_quantile(1.0, 0.05).unwrap();
        assert!((f64::from(c) - d).abs() < 1e-5);
    }
}
