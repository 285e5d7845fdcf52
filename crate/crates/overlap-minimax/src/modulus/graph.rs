//! Reduction of the modulus program to per-arm node values.
//!
//! Arm 0 is stored sign-flipped (`x = -f(., 0)`) so both arms maximise
//! `sum W x` under the same kind of constraints. Units whose value cannot
//! affect the objective (unobserved in the arm, zero weight, no order
//! constraint) are dropped; coincident covariates share one node.

use crate::data::{Arm, Dataset};
use crate::error::{Error, Result};
use crate::lipschitz::LipschitzClass;
use crate::real::Real;

use super::OrderConstraint;

#[derive(Debug, Clone)]
pub(crate) struct Node<T> {
    /// Representative unit (any member; all members share covariates).
    pub rep: usize,
    /// Sum of estimand weights of member units.
    pub weight: T,
    /// Sum of `1/sigma^2` over members observed in this arm.
    pub curvature: T,
}

/// `x_p - x_q <= bound`, global node indices.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Constraint<T> {
    pub p: usize,
    pub q: usize,
    pub bound: T,
    pub order: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct ArmGraph<T> {
    pub nodes: Vec<Node<T>>,
    /// Global index of the first node.
    pub offset: usize,
    /// Local node of each unit, if the unit is represented in this arm.
    pub unit_node: Vec<Option<usize>>,
    /// All constraints join consecutive nodes.
    pub chain: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct Program<T> {
    pub arms: [ArmGraph<T>; 2],
    pub constraints: Vec<Constraint<T>>,
}

impl<T: Real> Program<T> {
    pub fn n_nodes(&self) -> usize {
        self.arms[0].nodes.len() + self.arms[1].nodes.len()
    }

    pub fn compile(
        data: &Dataset<T>,
        weights: &[T],
        class: &LipschitzClass<T>,
        order: &[OrderConstraint],
    ) -> Result<Self> {
        let n = data.n();
        let lip = class.lipschitz();
        let mut constraints = Vec::new();
        let mut arms: Vec<ArmGraph<T>> = Vec::with_capacity(2);
        let mut offset = 0;
        for arm in Arm::BOTH {
            let mut relevant = vec![false; n];
            for i in 0..n {
                relevant[i] = data.arm(i) == arm || weights[i] > T::zero();
            }
            for c in order.iter().filter(|c| c.arm == arm) {
                relevant[c.upper] = true;
                relevant[c.lower] = true;
            }
            let mut units: Vec<usize> = (0..n).filter(|&i| relevant[i]).collect();
            units.sort_by(|&a, &b| {
                data.x(a)
                    .iter()
                    .zip(data.x(b))
                    .map(|(u, v)| u.partial_cmp(v).unwrap())
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            let mut groups: Vec<Vec<usize>> = Vec::new();
            for &u in &units {
                match groups.last_mut() {
                    Some(g) if lip == T::zero() || data.x(g[0]) == data.x(u) => g.push(u),
                    _ => groups.push(vec![u]),
                }
            }
            let mut unit_node = vec![None; n];
            let nodes: Vec<Node<T>> = groups
                .into_iter()
                .enumerate()
                .map(|(k, members): (usize, Vec<usize>)| {
                    let mut weight = T::zero();
                    let mut curvature = T::zero();
                    for &u in &members {
                        unit_node[u] = Some(k);
                        weight += weights[u];
                        if data.arm(u) == arm {
                            let s = data.sigma()[u];
                            curvature += T::one() / (s * s);
                        }
                    }
                    Node {
                        rep: members[0],
                        weight,
                        curvature,
                    }
                })
                .collect();
            if !nodes.iter().any(|nd| nd.curvature > T::zero()) {
                return Err(Error::InsufficientUnits {
                    arm: arm.index() as u8,
                    available: 0,
                    needed: 1,
                });
            }

            let first = constraints.len();
            let nn = nodes.len();
            let dist = |a: usize, b: usize| class.distances().get(nodes[a].rep, nodes[b].rep);
            let push_pair = |a: usize, b: usize, constraints: &mut Vec<Constraint<T>>| {
                let bound = lip * dist(a, b);
                constraints.push(Constraint { p: offset + a, q: offset + b, bound, order: false });
                constraints.push(Constraint { p: offset + b, q: offset + a, bound, order: false });
            };
            if data.dim() == 1 {
                for k in 1..nn {
                    push_pair(k - 1, k, &mut constraints);
                }
            } else {
                for a in 0..nn {
                    for b in (a + 1)..nn {
                        let dab = dist(a, b);
                        let redundant = (0..nn).any(|r| {
                            r != a && r != b && dist(a, r) + dist(r, b) <= dab * (T::one() + T::lit(1e-12))
                        });
                        if !redundant {
                            push_pair(a, b, &mut constraints);
                        }
                    }
                }
            }
            for c in order.iter().filter(|c| c.arm == arm) {
                let (u, l) = (unit_node[c.upper].unwrap(), unit_node[c.lower].unwrap());
                if u == l {
                    continue;
                }
                // f(upper) >= f(lower); arm 0 values are stored negated.
                let (p, q) = match arm {
                    Arm::Treated => (l, u),
                    Arm::Control => (u, l),
                };
                constraints.push(Constraint { p: offset + p, q: offset + q, bound: T::zero(), order: true });
            }
            let chain = data.dim() == 1
                && constraints[first..].iter().all(|c| c.p.abs_diff(c.q) == 1);
            arms.push(ArmGraph {
                nodes,
                offset,
                unit_node,
                chain,
            });
            offset += nn;
        }
        let arm1 = arms.pop().unwrap();
        let arm0 = arms.pop().unwrap();
        Ok(Self {
            arms: [arm0, arm1],
            constraints,
        })
    }
}
