//! Lipschitz class, distance matrices, outcome regressors and data-driven L.

use crate::data::{Arm, Dataset, OverlapPartition};
use crate::error::{Error, Result};
use crate::real::{euclidean, Real};

/// Symmetric matrix of Euclidean distances between units.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<T> {
    n: usize,
    d: Vec<T>,
}

impl<T: Real> DistanceMatrix<T> {
    pub fn new(data: &Dataset<T>) -> Self {
        let n = data.n();
        let mut d = vec![T::zero(); n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = euclidean(data.x(i), data.x(j));
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        Self { n, d }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.d[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.d[i * self.n..(i + 1) * self.n]
    }
}

/// Functions with `|f(x,d) - f(x',d)| <= L * ||x - x'||` within each arm.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzClass<T> {
    lipschitz: T,
    distances: DistanceMatrix<T>,
}

impl<T: Real> LipschitzClass<T> {
    pub fn euclidean(data: &Dataset<T>, lipschitz: T) -> Result<Self> {
        Self::with_distances(DistanceMatrix::new(data), lipschitz)
    }

    pub fn with_distances(distances: DistanceMatrix<T>, lipschitz: T) -> Result<Self> {
        if !(lipschitz >= T::zero() && lipschitz.is_finite()) {
            return Err(Error::invalid(format!("Lipschitz constant {lipschitz} must be finite and non-negative")));
        }
        Ok(Self {
            lipschitz,
            distances,
        })
    }

    pub fn lipschitz(&self) -> T {
        self.lipschitz
    }

    pub fn distances(&self) -> &DistanceMatrix<T> {
        &self.distances
    }

    /// `L * d(x_i, x_j)`.
    #[inline]
    pub fn bound(&self, i: usize, j: usize) -> T {
        self.lipschitz * self.distances.get(i, j)
    }

    pub fn with_lipschitz(&self, lipschitz: T) -> Result<Self> {
        Self::with_distances(self.distances.clone(), lipschitz)
    }
}

/// Arm-specific outcome regression `mu_d(x)`.
pub trait Regressor<T>: Send + Sync {
    fn predict(&self, x: &[T], arm: Arm) -> T;
}

/// Default number of neighbours for the built-in regressor.
pub const DEFAULT_KNN_K: usize = 5;

/// k-nearest-neighbour mean per arm; ties broken by lowest training index.
#[derive(Debug, Clone)]
pub struct KnnRegressor<T> {
    k: usize,
    dim: usize,
    train: [(Vec<T>, Vec<T>); 2],
}

impl<T: Real> KnnRegressor<T> {
    pub fn fit(data: &Dataset<T>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k must be positive"));
        }
        let mut train: [(Vec<T>, Vec<T>); 2] = Default::default();
        for i in 0..data.n() {
            let slot = &mut train[data.arm(i).index()];
            slot.0.extend_from_slice(data.x(i));
            slot.1.push(data.y()[i]);
        }
        for arm in Arm::BOTH {
            if train[arm.index()].1.is_empty() {
                return Err(Error::InsufficientUnits {
                    arm: arm.index() as u8,
                    available: 0,
                    needed: 1,
                });
            }
        }
        Ok(Self {
            k,
            dim: data.dim(),
            train,
        })
    }
}

impl<T: Real> Regressor<T> for KnnRegressor<T> {
    fn predict(&self, x: &[T], arm: Arm) -> T {
        let (xs, ys) = &self.train[arm.index()];
        let mut d: Vec<(T, usize)> = xs
            .chunks_exact(self.dim)
            .enumerate()
            .map(|(i, row)| (euclidean(row, x), i))
            .collect();
        let k = self.k.min(d.len());
        let cmp = |a: &(T, usize), b: &(T, usize)| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
        }
        d[..k].iter().map(|&(_, i)| ys[i]).sum::<T>() / T::from_count(k)
    }
}

/// Data-driven Lipschitz constant at percentile `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContextualizedL<T> {
    pub per_arm: [T; 2],
    pub value: T,
}

/// For each overlap unit, the lower `p`-quantile of its slopes to the other
/// overlap units under the fitted regression; maximised over units and arms.
pub fn contextualize_l<T: Real>(
    data: &Dataset<T>,
    part: &OverlapPartition<T>,
    regressor: &dyn Regressor<T>,
    p: T,
) -> Result<ContextualizedL<T>> {
    if !(p > T::zero() && p <= T::one()) {
        return Err(Error::invalid(format!("percentile {p} outside (0, 1]")));
    }
    let idx = part.overlap_indices();
    if idx.len() < 2 {
        return Err(Error::invalid("need at least two overlap units"));
    }
    let m = idx.len() - 1;
    let rank = ((p * T::from_count(m)).ceil().to_usize().unwrap_or(m)).clamp(1, m) - 1;
    let mut per_arm = [T::zero(); 2];
    let mut slopes = Vec::with_capacity(m);
    for arm in Arm::BOTH {
        let pred: Vec<T> = idx.iter().map(|&i| regressor.predict(data.x(i), arm)).collect();
        let mut best = T::zero();
        for a in 0..idx.len() {
            slopes.clear();
            for b in 0..idx.len() {
                if a == b {
                    continue;
                }
                let dist = data.distance(idx[a], idx[b]);
                let diff = (pred[a] - pred[b]).abs();
                if dist == T::zero() {
                    if diff != T::zero() {
                        return Err(Error::InfiniteSlope { i: idx[a], j: idx[b] });
                    }
                    slopes.push(T::zero());
                } else {
                    slopes.push(diff / dist);
                }
            }
            slopes.select_nth_unstable_by(rank, |u, v| u.partial_cmp(v).unwrap());
            best = best.max(slopes[rank]);
        }
        per_arm[arm.index()] = best;
    }
    Ok(ContextualizedL {
        per_arm,
        value: per_arm[0].max(per_arm[1]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{partition, NoiseSd};

    struct Linear(f64, f64);
    impl Regressor<f64> for Linear {
        fn predict(&self, x: &[f64], arm: Arm) -> f64 {
            match arm {
                Arm::Control => self.0 * x[0],
                Arm::Treated => self.1 * x[0],
            }
        }
    }

    fn grid(n: usize) -> Dataset<f64> {
        Dataset::new(
            (0..n).map(|i| vec![i as f64]).collect(),
            (0..n).map(|i| i as f64).collect(),
            (0..n).map(|i| i % 2 == 0).collect(),
            vec![0.5; n],
            NoiseSd::Shared(1.0),
        )
        .unwrap()
    }

    #[test]
    fn linear_regression_gives_its_slope() {
        let d = grid(6);
        let part = partition(&d, 0.1).unwrap();
        let c = contextualize_l(&d, &part, &Linear(-2.0, 3.0), 0.9).unwrap();
        assert!((c.per_arm[0] - 2.0).abs() < 1e-12);
        assert!((c.per_arm[1] - 3.0).abs() < 1e-12);
        assert!((c.value - 3.0).abs() < 1e-12);
    }

    #[test]
    fn coincident_units_with_equal_predictions_have_zero_slope() {
        let d = Dataset::new(
            vec![vec![0.0], vec![0.0], vec![1.0]],
            vec![0.0; 3],
            vec![true, false, true],
            vec![0.5; 3],
            NoiseSd::Shared(1.0),
        )
        .unwrap();
        let part = partition(&d, 0.1).unwrap();
        // Lowest slope per unit: unit 0 and 1 see each other (0); unit 2 sees slope 2 to both.
        let c = contextualize_l(&d, &part, &Linear(0.0, 2.0), 0.5).unwrap();
        assert_eq!(c.per_arm[0], 0.0);
        assert!((c.per_arm[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_distance_with_distinct_predictions_is_infinite_slope() {
        struct Unit(std::sync::atomic::AtomicUsize);
        impl Regressor<f64> for Unit {
            fn predict(&self, _: &[f64], _: Arm) -> f64 {
                self.0.fetch_add(1, std::sync::atomic::Ordering::Relaxed) as f64
            }
        }
        let d = Dataset::new(
            vec![vec![0.0], vec![0.0]],
            vec![0.0; 2],
            vec![true, false],
            vec![0.5; 2],
            NoiseSd::Shared(1.0),
        )
        .unwrap();
        let part = partition(&d, 0.1).unwrap();
        let r = contextualize_l(&d, &part, &Unit(0.into()), 0.9);
        assert!(matches!(r, Err(Error::InfiniteSlope { .. })));
    }

    #[test]
    fn knn_averages_nearest_same_arm_outcomes() {
        let d = grid(10);
        let knn = KnnRegressor::fit(&d, 2).unwrap();
        // Treated units sit at even x; nearest two to 4.2 are 4 and 6 (2 is farther).
        assert!((knn.predict(&[4.2], Arm::Treated) - 5.0).abs() < 1e-12);
        // Tie at 4.0 between controls 3 and 5: both included with k = 2.
        assert!((knn.predict(&[4.0], Arm::Control) - 4.0).abs() < 1e-12);
        let big = KnnRegressor::fit(&d, 50).unwrap();
        assert!((big.predict(&[0.0], Arm::Control) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn distance_matrix_is_symmetric() {
        let d = grid(4);
        let m = DistanceMatrix::new(&d);
        assert_eq!(m.get(1, 3), 2.0);
        assert_eq!(m.get(3, 1), 2.0);
        assert_eq!(m.get(2, 2), 0.0);
    }
}
