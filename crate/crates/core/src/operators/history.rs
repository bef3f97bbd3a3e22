use alloc::vec::Vec;

use crate::{Instance, Solution};

/// Best complete-solution objective observed for every undirected edge,
/// depot legs included.
#[derive(Debug, Clone, PartialEq)]
pub struct PairHistory {
    n_nodes: usize,
    best: Vec<f64>,
}

impl PairHistory {
    pub fn new(inst: &Instance) -> Self {
        let n = inst.n_nodes();
        Self {
            n_nodes: n,
            best: alloc::vec![f64::INFINITY; n * n],
        }
    }

    pub fn clear(&mut self) {
        self.best.iter_mut().for_each(|v| *v = f64::INFINITY);
    }

    /// Lowest objective of a recorded solution containing edge `(a, b)`.
    pub fn best(&self, a: usize, b: usize) -> Option<f64> {
        let v = self.best[a * self.n_nodes + b];
        v.is_finite().then_some(v)
    }

    /// Records a complete solution with objective `cost`.
    pub fn record(&mut self, sol: &Solution, cost: f64) {
        let n = self.n_nodes;
        for (a, b) in sol.edges() {
            for idx in [a * n + b, b * n + a] {
                if cost < self.best[idx] {
                    self.best[idx] = cost;
                }
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.best.iter().all(|v| !v.is_finite())
    }
}
