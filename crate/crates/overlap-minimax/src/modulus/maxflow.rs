//! Transportation problems solved as bipartite maximum flow (Dinic).

use crate::error::{Error, Result, ViolatedCut};
use crate::real::Real;

/// Sparse non-negative matrix `A` with `A 1 = p` and `A^T 1 = q`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan<T> {
    pub rows: usize,
    pub cols: usize,
    /// `(row, col, amount)` with positive amounts only.
    pub entries: Vec<(usize, usize, T)>,
}

impl<T: Real> TransportPlan<T> {
    pub fn row_sums(&self) -> Vec<T> {
        let mut s = vec![T::zero(); self.rows];
        for &(i, _, v) in &self.entries {
            s[i] += v;
        }
        s
    }

    pub fn col_sums(&self) -> Vec<T> {
        let mut s = vec![T::zero(); self.cols];
        for &(_, j, v) in &self.entries {
            s[j] += v;
        }
        s
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries
            .iter()
            .filter(|e| e.0 == i && e.1 == j)
            .map(|e| e.2)
            .sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut m = vec![vec![T::zero(); self.cols]; self.rows];
        for &(i, j, v) in &self.entries {
            m[i][j] += v;
        }
        m
    }
}

struct FlowGraph<T> {
    head: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<T>,
}

impl<T: Real> FlowGraph<T> {
    fn new(n: usize) -> Self {
        Self {
            head: vec![Vec::new(); n],
            to: Vec::new(),
            cap: Vec::new(),
        }
    }

    fn add(&mut self, u: usize, v: usize, c: T) -> usize {
        let id = self.to.len();
        self.head[u].push(id);
        self.to.push(v);
        self.cap.push(c);
        self.head[v].push(id + 1);
        self.to.push(u);
        self.cap.push(T::zero());
        id
    }

    fn levels(&self, s: usize, eps: T) -> Vec<usize> {
        let mut level = vec![usize::MAX; self.head.len()];
        level[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.head[u] {
                let v = self.to[e];
                if self.cap[e] > eps && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        level
    }

    fn push(&mut self, u: usize, t: usize, limit: T, level: &[usize], it: &mut [usize], eps: T) -> T {
        if u == t {
            return limit;
        }
        while it[u] < self.head[u].len() {
            let e = self.head[u][it[u]];
            let v = self.to[e];
            if self.cap[e] > eps && level[v] == level[u] + 1 {
                let got = self.push(v, t, limit.min(self.cap[e]), level, it, eps);
                if got > T::zero() {
                    self.cap[e] -= got;
                    self.cap[e ^ 1] += got;
                    return got;
                }
            }
            it[u] += 1;
        }
        T::zero()
    }

    fn max_flow(&mut self, s: usize, t: usize, eps: T) -> T {
        let mut total = T::zero();
        loop {
            let level = self.levels(s, eps);
            if level[t] == usize::MAX {
                return total;
            }
            let mut it = vec![0; self.head.len()];
            loop {
                let f = self.push(s, t, T::infinity(), &level, &mut it, eps);
                if f <= eps {
                    break;
                }
                total += f;
            }
        }
    }
}

/// Finds `A >= 0` supported on `allowed` with row sums `p` and column sums `q`.
///
/// When no such matrix exists the error carries a set of rows whose admissible
/// columns cannot absorb their total supply.
pub fn max_flow_matrix<T: Real>(p: &[T], q: &[T], allowed: &[(usize, usize)]) -> Result<TransportPlan<T>> {
    if p.iter().chain(q).any(|&v| !(v >= T::zero() && v.is_finite())) {
        return Err(Error::invalid("supplies and demands must be finite and non-negative"));
    }
    if let Some(&(i, j)) = allowed.iter().find(|&&(i, j)| i >= p.len() || j >= q.len()) {
        return Err(Error::invalid(format!("allowed pair ({i}, {j}) out of range")));
    }
    let sp: T = p.iter().copied().sum();
    let sq: T = q.iter().copied().sum();
    let scale = sp.max(sq);
    let balance_tol = T::epsilon() * T::lit(1e4) * scale.max(T::min_positive_value());
    if (sp - sq).abs() > balance_tol {
        return Err(Error::invalid(format!(
            "unbalanced transportation problem: supply {sp} vs demand {sq}"
        )));
    }
    let (r, c) = (p.len(), q.len());
    let (s, t) = (r + c, r + c + 1);
    let mut g = FlowGraph::new(r + c + 2);
    for (i, &v) in p.iter().enumerate() {
        g.add(s, i, v);
    }
    for (j, &v) in q.iter().enumerate() {
        g.add(r + j, t, v);
    }
    let big = scale + T::one();
    let mids: Vec<(usize, usize, usize)> = allowed.iter().map(|&(i, j)| (i, j, g.add(i, r + j, big))).collect();
    let eps = T::epsilon() * T::lit(16.0) * scale;
    let flow = g.max_flow(s, t, eps);

    if flow < sp - balance_tol {
        let level = g.levels(s, eps);
        let rows: Vec<usize> = (0..r).filter(|&i| level[i] != usize::MAX).collect();
        let mut columns: Vec<usize> = allowed
            .iter()
            .filter(|&&(i, _)| level[i] != usize::MAX)
            .map(|&(_, j)| j)
            .collect();
        columns.sort_unstable();
        columns.dedup();
        return Err(Error::Infeasible(ViolatedCut {
            supply: rows.iter().map(|&i| p[i].as_f64()).sum(),
            capacity: columns.iter().map(|&j| q[j].as_f64()).sum(),
            rows,
            columns,
        }));
    }
    let entries = mids
        .into_iter()
        .filter_map(|(i, j, e)| {
            let f = g.cap[e ^ 1];
            (f > T::zero()).then_some((i, j, f))
        })
        .collect();
    Ok(TransportPlan { rows: r, cols: c, entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_full_support() {
        let p = [0.3f64, 0.7];
        let q = [0.5, 0.5];
        let plan = max_flow_matrix(&p, &q, &[(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap();
        for (a, b) in plan.row_sums().iter().zip(&p) {
            assert!((a - b).abs() < 1e-15);
        }
        for (a, b) in plan.col_sums().iter().zip(&q) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn forced_routing_respects_forbidden_edges() {
        // Row 0 may only use column 1, so row 1 must fill column 0 and the rest of column 1.
        let p = [1.0f64, 2.0];
        let q = [1.5, 1.5];
        let plan = max_flow_matrix(&p, &q, &[(0, 1), (1, 0), (1, 1)]).unwrap();
        let a = plan.to_dense();
        assert_eq!(a[0][0], 0.0);
        assert!((a[0][1] - 1.0).abs() < 1e-15);
        assert!((a[1][0] - 1.5).abs() < 1e-15);
        assert!((a[1][1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn infeasible_reports_hall_violator() {
        let r = max_flow_matrix(&[1.0f64, 1.0], &[0.0, 2.0], &[(0, 0), (1, 1)]);
        match r {
            Err(Error::Infeasible(cut)) => {
                assert_eq!(cut.rows, vec![0]);
                assert_eq!(cut.columns, vec![0]);
                assert!(cut.supply > cut.capacity);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn unbalanced_is_rejected() {
        assert!(matches!(
            max_flow_matrix(&[1.0f64], &[2.0], &[(0, 0)]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn reroutes_through_residual_edges() {
        // Greedy 0->0 would block row 1; max flow must reroute row 0 to column 1.
        let plan = max_flow_matrix(&[1.0f64, 1.0], &[1.0, 1.0], &[(0, 0), (0, 1), (1, 0)]).unwrap();
        let a = plan.to_dense();
        assert!((a[0][1] - 1.0).abs() < 1e-15);
        assert!((a[1][0] - 1.0).abs() < 1e-15);
    }
}
