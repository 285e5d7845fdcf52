use super::toy::ToyConfig;
use super::*;
use crate::data::NoiseSd;

pub(crate) fn toy_problem(cfg: &ToyConfig<f64>) -> ModulusProblem<f64> {
    let (n, k) = (cfg.n, cfg.k);
    let sites = [-cfg.xi - cfg.eta, -cfg.xi, cfg.xi, cfg.xi + cfg.eta];
    let counts = [k * n, n, n, k * n];
    let mut x = Vec::new();
    let mut z = Vec::new();
    let mut w = Vec::new();
    for (s, (&site, &c)) in sites.iter().zip(&counts).enumerate() {
        for _ in 0..c {
            x.push(vec![site]);
            z.push(s >= 2);
            w.push(if s == 0 || s == 3 { cfg.outer_weight() } else { 0.0 });
        }
    }
    let m = x.len();
    let data = Dataset::new(x, vec![0.0; m], z, vec![0.5; m], NoiseSd::Shared(1.0)).unwrap();
    ModulusProblem::euclidean(data, w, cfg.lipschitz).unwrap()
}

fn toy() -> ToyConfig<f64> {
    ToyConfig {
        n: 25,
        k: 10,
        xi: 0.01,
        eta: 0.1,
        lipschitz: 1.0,
    }
}

#[test]
fn toy_matches_closed_form_across_regimes() {
    let cfg = toy();
    let prob = toy_problem(&cfg);
    let dc = cfg.critical_delta();
    for &delta in &[0.05, 0.5, 0.999 * dc, dc, 1.001 * dc, 1.5 * dc, 10.0 * dc] {
        let sol = solve_modulus(&prob, delta).unwrap();
        let o = cfg.oracle(delta).unwrap();
        assert!((sol.omega - o.omega).abs() <= 1e-8 * o.omega, "delta {delta}: {} vs {}", sol.omega, o.omega);
        assert!(
            (sol.omega_prime - o.omega_prime).abs() <= 1e-7 * o.omega_prime,
            "delta {delta}: {} vs {}",
            sol.omega_prime,
            o.omega_prime
        );
    }
}

#[test]
fn toy_values_agree_with_independent_conic_solver() {
    // Reference values from a general-purpose conic solver on the same program.
    let prob = toy_problem(&toy());
    for (delta, expected) in [(0.05, 0.449848), (1.648044, 0.880808)] {
        let sol = solve_modulus(&prob, delta).unwrap();
        assert!((sol.omega - expected).abs() < 2e-6, "{delta}: {}", sol.omega);
    }
}

#[test]
fn ball_binds_and_identity_holds() {
    let cfg = toy();
    let prob = toy_problem(&cfg);
    let sol = solve_modulus(&prob, 2.0).unwrap();
    let data = prob.data();
    let ball: f64 = (0..data.n())
        .map(|i| {
            let v = sol.f_star(i, data.arm(i));
            v * v
        })
        .sum();
    assert!((ball - 1.0).abs() < 1e-8, "{ball}");
    let treated: f64 = (0..data.n()).filter(|&i| data.z()[i]).map(|i| sol.f_star[1][i]).sum();
    assert!((treated - sol.mu * prob.weight_total()).abs() < 1e-8 * treated);
}

#[test]
fn solution_is_lipschitz_everywhere() {
    let cfg = toy();
    let prob = toy_problem(&cfg);
    let sol = solve_modulus(&prob, 3.0).unwrap();
    let n = prob.data().n();
    for a in 0..2 {
        for i in 0..n {
            for j in 0..n {
                let diff = sol.f_star[a][i] - sol.f_star[a][j];
                assert!(diff <= prob.class().bound(i, j) + 1e-9);
            }
        }
    }
}


/// Two clusters on a line: controls and treated overlap on `[0, 1]`, the
/// positive-weight units sit on `[1.2, 1.6]` and are all controls.
fn two_cluster(seed: u64) -> ModulusProblem<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut z = Vec::new();
    let mut w = Vec::new();
    for i in 0..12 {
        x.push(vec![rng.random::<f64>()]);
        z.push(i % 2 == 0);
        w.push(0.0);
    }
    for _ in 0..5 {
        x.push(vec![1.2 + 0.4 * rng.random::<f64>()]);
        z.push(false);
        w.push(0.2);
    }
    let m = x.len();
    let data = Dataset::new(x, vec![0.0; m], z, vec![0.5; m], NoiseSd::Shared(0.5)).unwrap();
    ModulusProblem::euclidean(data, w, 2.0).unwrap()
}

#[test]
fn matching_rows_sum_to_estimand_weights() {
    for seed in 0..4 {
        let prob = two_cluster(seed);
        let sol = solve_modulus(&prob, 1.0).unwrap();
        let m = matching_weights(&sol, &prob).unwrap();
        for k in 12..17 {
            let s = m.row_sum(crate::data::Arm::Treated, k);
            assert!((s - 0.2).abs() < 1e-6, "seed {seed} unit {k}: {s}");
            assert!(m.donors(crate::data::Arm::Treated, k).iter().all(|&(j, v)| j < 12 && v >= 0.0));
        }
    }
}

#[test]
fn one_sided_extrapolation_is_monotone() {
    for seed in 0..4 {
        let prob = two_cluster(seed);
        for delta in [0.3, 1.0, 3.0] {
            let gap = monotone_extrapolation_gap(&prob, delta).unwrap();
            assert!(gap.relative() < 1e-6, "seed {seed} delta {delta}: {:?}", gap);
        }
    }
}

#[test]
fn derivative_matches_central_difference() {
    let prob = two_cluster(7);
    for delta in [0.5, 2.0] {
        let sol = solve_modulus(&prob, delta).unwrap();
        let h = 1e-4 * delta;
        let up = solve_modulus(&prob, delta + h).unwrap().omega;
        let down = solve_modulus(&prob, delta - h).unwrap().omega;
        let fd = (up - down) / (2.0 * h);
        assert!((sol.omega_prime - fd).abs() < 1e-5 * fd.abs(), "{} vs {fd}", sol.omega_prime);
        let d = omega_derivative(&sol, &prob).unwrap();
        assert!((d - sol.omega_prime).abs() < 1e-9 * d.abs());
    }
}

#[test]
fn single_precision_tracks_double() {
    let cfg = toy();
    let prob = toy_problem(&cfg);
    let data = prob.data();
    let x32: Vec<Vec<f32>> = (0..data.n()).map(|i| vec![data.x(i)[0] as f32]).collect();
    let n = data.n();
    let d32 = Dataset::new(x32, vec![0.0f32; n], data.z().to_vec(), vec![0.5; n], NoiseSd::Shared(1.0)).unwrap();
    let w32: Vec<f32> = prob.weights().iter().map(|&v| v as f32).collect();
    let p32 = ModulusProblem::euclidean(d32, w32, 1.0f32).unwrap();
    for delta in [0.5, 3.0] {
        let a = solve_modulus(&prob, delta).unwrap().omega;
        let b = solve_modulus(&p32, delta as f32).unwrap().omega as f64;
        assert!((a - b).abs() < 1e-3 * a, "{a} vs {b}");
    }
}
