//! Static CVRP instance data.

use alloc::string::String;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

/// One row of the instance: a customer, or the depot at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub demand: u32,
    pub dist_depot: f64,
}

/// Depot plus customers with a full Euclidean distance matrix.
///
/// Node `i` always has id `i`; the depot is node 0. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    name: String,
    nodes: Vec<NodeRecord>,
    capacity: u32,
    distance: Vec<f64>,
    max_distance: f64,
}

impl Instance {
    /// Builds an instance from `(x, y, demand)` rows, depot first.
    ///
    /// The depot demand is forced to zero.
    pub fn new(name: impl Into<String>, rows: &[(f64, f64, u32)], capacity: u32) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::EmptyInstance);
        }
        let (dx, dy, _) = rows[0];
        let nodes: Vec<NodeRecord> = rows
            .iter()
            .enumerate()
            .map(|(id, &(x, y, demand))| NodeRecord {
                id,
                x,
                y,
                demand: if id == 0 { 0 } else { demand },
                dist_depot: math::hypot(x - dx, y - dy),
            })
            .collect();
        let n = nodes.len();
        let mut distance = alloc::vec![0.0; n * n];
        let mut max_distance = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = math::hypot(nodes[i].x - nodes[j].x, nodes[i].y - nodes[j].y);
                distance[i * n + j] = d;
                distance[j * n + i] = d;
                max_distance = max_distance.max(d);
            }
        }
        Ok(Self {
            name: name.into(),
            nodes,
            capacity,
            distance,
            max_distance,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &NodeRecord {
        &self.nodes[id]
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn n_customers(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Largest pairwise distance, used for feature and relatedness scaling.
    pub fn max_distance(&self) -> f64 {
        self.max_distance
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.distance[i * self.nodes.len() + j]
    }

    #[inline]
    pub fn demand(&self, id: usize) -> u32 {
        self.nodes[id].demand
    }

    pub fn is_customer(&self, id: usize) -> bool {
        id >= 1 && id < self.nodes.len()
    }

    /// Keeps the depot and customers `1..=n`, scaling capacity by
    /// `n / n_customers` rounded to the nearest integer (halves round up).
    pub fn truncate(&self, n: usize) -> Result<Self> {
        let available = self.n_customers();
        if n == 0 || n > available {
            return Err(Error::CustomerCount {
                requested: n,
                available,
            });
        }
        let rows: Vec<(f64, f64, u32)> = self.nodes[..=n]
            .iter()
            .map(|r| (r.x, r.y, r.demand))
            .collect();
        let scaled = (u64::from(self.capacity) * n as u64 * 2 + available as u64) / (2 * available as u64);
        Self::new(self.name.clone(), &rows, scaled as u32)
    }

    /// Bounding box of all nodes as `(min_x, min_y, max_x, max_y)`.
    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        self.nodes.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), r| (a.min(r.x), b.min(r.y), c.max(r.x), d.max(r.y)),
        )
    }
}
