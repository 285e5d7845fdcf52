use rand_distr::{Distribution, StandardNormal};

use crate::data::{Dataset, NoiseSd};
use crate::error::Result;
use crate::modulus::toy::ToyConfig;

use super::{replication_rng, Simulated};

/// Four-site toy design: `kn` controls at `-xi-eta`, `n` controls at `-xi`,
/// `n` treated at `xi`, `kn` treated at `xi+eta`. Outer sites get propensity
/// 0 or 1 so they fall outside the overlap set for every threshold. The true
/// functions are zero and outcomes are standard normal noise.
pub fn build_toy_dataset(config: &ToyConfig<f64>, seed: u64) -> Result<Simulated> {
    config.validate()?;
    let (n, k) = (config.n, config.k);
    let (xi, eta) = (config.xi, config.eta);
    let sites = [
        (-xi - eta, k * n, false, 0.0),
        (-xi, n, false, 0.5),
        (xi, n, true, 0.5),
        (xi + eta, k * n, true, 1.0),
    ];
    let mut rng = replication_rng(seed, 0);
    let (mut x, mut z, mut pi, mut y) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for &(site, count, treated, p) in &sites {
        for _ in 0..count {
            x.push(site);
            z.push(treated);
            pi.push(p);
            y.push(StandardNormal.sample(&mut rng));
        }
    }
    let m = y.len();
    let data = Dataset::from_flat(x, 1, y, z, pi, NoiseSd::Shared(1.0))?;
    Ok(Simulated {
        data,
        f0: vec![0.0; m],
        f1: vec![0.0; m],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::partition;

    #[test]
    fn geometry_and_weights() {
        let cfg = ToyConfig {
            n: 25,
            k: 10,
            xi: 0.01,
            eta: 0.1,
            lipschitz: 1.0,
        };
        let sim = build_toy_dataset(&cfg, 1).unwrap();
        let d = &sim.data;
        assert_eq!(d.n(), 550);
        for i in 0..d.n() {
            if d.x(i)[0] == -0.01 {
                assert!(!d.z()[i]);
            }
        }
        let part = partition(d, 0.05).unwrap();
        let outer = part.weights.iter().filter(|&&w| w > 0.0).count();
        assert_eq!(outer, 500);
        assert!(part.weights.iter().all(|&w| w == 0.0 || (w - 1.0 / 550.0).abs() < 1e-15));
    }
}
