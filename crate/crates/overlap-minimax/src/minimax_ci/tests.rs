use super::*;
use crate::data::NoiseSd;
use crate::modulus::tests::toy_problem;
use crate::modulus::toy::ToyConfig;
use crate::modulus::solve_modulus;

fn toy() -> ToyConfig<f64> {
    ToyConfig {
        n: 25,
        k: 10,
        xi: 0.01,
        eta: 0.1,
        lipschitz: 1.0,
    }
}

fn line_data(n: usize) -> Dataset<f64> {
    let x: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / n as f64]).collect();
    let z: Vec<bool> = (0..n).map(|i| (i * 7 + 3) % 5 < 2).collect();
    let y: Vec<f64> = (0..n).map(|i| ((i * 13) % 7) as f64 / 7.0 - 0.4).collect();
    let pi: Vec<f64> = (0..n).map(|i| if i < n / 4 { 0.01 } else { 0.5 }).collect();
    Dataset::new(x, y, z, pi, NoiseSd::Shared(0.5)).unwrap()
}

#[test]
fn toy_bias_and_sd_match_oracle() {
    let cfg = toy();
    let prob = toy_problem(&cfg);
    let y = vec![0.0; prob.data().n()];
    for &d in &[0.3, cfg.critical_delta(), 4.0 * cfg.critical_delta()] {
        let sol = solve_modulus(&prob, d).unwrap();
        let rep = interval_at(&sol, &prob, &y, 0.05).unwrap();
        let o = cfg.oracle(d).unwrap();
        assert!((rep.maxbias - o.maxbias).abs() < 1e-8 * o.maxbias.max(1e-3), "{d}");
        assert!((rep.sd - o.sd).abs() < 1e-7 * o.sd, "{d}");
    }
}

#[test]
fn sd_equals_norm_of_estimator_weights() {
    let prob = toy_problem(&toy());
    let sol = solve_modulus(&prob, 2.5).unwrap();
    let a = estimator_weights(&sol, &prob);
    let var: f64 = a.iter().map(|v| v * v).sum();
    assert!((var.sqrt() - sol.omega_prime).abs() < 1e-8 * sol.omega_prime);
}

#[test]
fn constant_class_reduces_to_difference_in_means() {
    let data = line_data(40);
    let w = vec![1.0 / 40.0; 40];
    let class = LipschitzClass::euclidean(&data, 0.0).unwrap();
    let rep = minimax_interval(&data, w, class, 0.05).unwrap();
    let n1 = data.z().iter().filter(|&&z| z).count() as f64;
    let n0 = 40.0 - n1;
    let sd = 0.5 * (1.0 / n1 + 1.0 / n0).sqrt();
    assert!(rep.maxbias.abs() < 1e-12);
    assert!((rep.sd - sd).abs() < 1e-9, "{} vs {sd}", rep.sd);
    assert!((rep.cv - 1.959963984540054).abs() < 1e-9);
    let m1: f64 = (0..40).filter(|&i| data.z()[i]).map(|i| data.y()[i]).sum::<f64>() / n1;
    let m0: f64 = (0..40).filter(|&i| !data.z()[i]).map(|i| data.y()[i]).sum::<f64>() / n0;
    assert!((rep.estimate - (m1 - m0)).abs() < 1e-9);
}

#[test]
fn optimal_delta_is_a_local_minimum() {
    let cfg = toy();
    let prob = toy_problem(&cfg);
    let s = optimize_delta(&prob, 0.05, &SearchOptions::default()).unwrap();
    assert!(s.bracketed);
    let g = |d: f64| {
        let sol = solve_modulus(&prob, d).unwrap();
        let b = maxbias(&sol).unwrap();
        cv_quantile(b / sol.omega_prime, 0.05).unwrap() * sol.omega_prime
    };
    let d = s.solution.delta;
    assert!(s.half_length <= g(d * 1.05) + 1e-12);
    assert!(s.half_length <= g(d / 1.05) + 1e-12);
}

#[test]
fn larger_alpha_gives_shorter_interval() {
    let prob = toy_problem(&toy());
    let a = optimize_delta(&prob, 0.05, &SearchOptions::default()).unwrap();
    let b = optimize_delta(&prob, 0.1, &SearchOptions::default()).unwrap();
    assert!(b.half_length <= a.half_length);
}

#[test]
fn mp_length_ignores_outcomes() {
    let data = line_data(60);
    let a = mp_interval(&data, 0.05, 2.0, 0.05).unwrap();
    let zeroed = data.with_outcomes(vec![0.0; 60]).unwrap();
    let b = mp_interval(&zeroed, 0.05, 2.0, 0.05).unwrap();
    assert_eq!(a.length(), b.length());
    assert_eq!(a.delta_star, b.delta_star);
    assert_eq!(b.estimate, 0.0);
}

#[test]
fn mp_half_length_grows_with_lipschitz() {
    let data = line_data(60);
    let mut prev = 0.0;
    for l in [0.0, 0.5, 1.0, 2.0, 4.0] {
        let r = mp_interval(&data, 0.05, l, 0.05).unwrap();
        assert!(r.half_length() >= prev - 1e-10, "L {l}");
        assert!(r.cv * r.sd >= cv_quantile(0.0, 0.05).unwrap() * r.sd - 1e-12);
        prev = r.half_length();
    }
}

#[test]
fn all_overlap_gives_point_interval() {
    let mut data = line_data(10);
    data = Dataset::new(
        (0..10).map(|i| data.x(i).to_vec()).collect(),
        data.y().to_vec(),
        data.z().to_vec(),
        vec![0.5; 10],
        NoiseSd::Shared(1.0),
    )
    .unwrap();
    let r = mp_interval(&data, 0.05, 1.0, 0.05).unwrap();
    assert!(r.degenerate);
    assert_eq!((r.lower, r.upper), (0.0, 0.0));
    assert_eq!(metric_t(&r, MetricMode::EndpointMax), 0.0);
}

#[test]
fn estimator_is_linear_in_outcomes() {
    let prob = toy_problem(&toy());
    let sol = solve_modulus(&prob, 1.0).unwrap();
    let n = prob.data().n();
    let y1: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
    let y2: Vec<f64> = (0..n).map(|i| (i as f64 * 0.11).cos()).collect();
    let sum: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a + b).collect();
    let e = |y: &[f64]| estimator_value(&sol, &prob, y).unwrap();
    assert!((e(&sum) - e(&y1) - e(&y2)).abs() < 1e-12);
    assert_eq!(e(&vec![0.0; n]), 0.0);
}

#[test]
fn metric_and_combination_arithmetic() {
    let c = CombinedInterval {
        lower: -1.0,
        upper: 3.0,
        alpha: 0.05,
    };
    assert_eq!(metric_t(&c, MetricMode::EndpointMax), 3.0);
    assert_eq!(metric_t(&c, MetricMode::Length), 4.0);
    let d = CombinedInterval {
        lower: -2.0,
        upper: -1.0,
        alpha: 0.05,
    };
    assert_eq!(metric_t(&d, MetricMode::EndpointMax), 2.0);

    let a = CombinedInterval {
        lower: 1.0,
        upper: 2.0,
        alpha: 0.025,
    };
    let b = CombinedInterval {
        lower: 3.0,
        upper: 4.0,
        alpha: 0.025,
    };
    let s: CombinedInterval<f64> = combine_intervals(&a, &b).unwrap();
    assert_eq!((s.lower, s.upper), (4.0, 6.0));
    assert!((s.alpha - 0.05).abs() < 1e-15);
    assert!(matches!(combine_intervals(&a, &c), Err(Error::LevelMismatch(..))));
}

#[test]
fn sequence_levels() {
    assert!((sequence_alpha(0.05f64, 1) - 0.030396355).abs() < 1e-8);
    let total: f64 = (1..200_000).map(|t| sequence_alpha(0.05f64, t)).sum();
    assert!(total <= 0.05 && total > 0.05 - 1e-6);
}

#[test]
fn sequence_widens_with_stricter_levels() {
    let prob = toy_problem(&toy());
    let seq = confidence_sequence(&[prob.clone(), prob], 0.05).unwrap();
    assert_eq!(seq.entries.len(), 2);
    let (a, b) = (&seq.entries[0], &seq.entries[1]);
    assert_eq!((a.t, b.t), (1, 2));
    assert!((a.alpha / b.alpha - 4.0).abs() < 1e-12);
    assert!(b.upper - b.lower > a.upper - a.lower);
}

