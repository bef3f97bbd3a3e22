use alloc::vec::Vec;

use crate::mdp::{EpisodeConfig, Phase, State};
use crate::{Instance, Solution};

/// Features per node: x, y, demand, depot distance, routed flag, removal flag.
pub const NODE_FEATURES: usize = 6;
/// Global features: phase bit, remaining budget, tour count, destroy scale.
pub const GLOBAL_FEATURES: usize = 4;

/// Coordinates are divided by this grid size.
const GRID: f64 = 100.0;

/// Network input for one state: per-node rows and the global vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub n_nodes: usize,
    /// `n_nodes × NODE_FEATURES`, row-major, depot first.
    pub nodes: Vec<f64>,
    pub globals: Vec<f64>,
}

impl Observation {
    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * NODE_FEATURES..(i + 1) * NODE_FEATURES]
    }
}

pub fn encode_state(state: &State<'_>) -> Observation {
    encode(
        state.instance(),
        state.solution(),
        state.phase(),
        state.budget_remaining(),
        state.config(),
    )
}

/// Encodes a solution with explicit phase and budget, for callers outside
/// an episode.
pub fn encode(inst: &Instance, sol: &Solution, phase: Phase, budget_remaining: usize, config: EpisodeConfig) -> Observation {
    let n_nodes = inst.n_nodes();
    let mut nodes = alloc::vec![0.0; n_nodes * NODE_FEATURES];
    let cap = f64::from(inst.capacity());
    let max_dist = inst.max_distance();
    for (i, node) in inst.nodes().iter().enumerate() {
        let row = &mut nodes[i * NODE_FEATURES..(i + 1) * NODE_FEATURES];
        row[0] = node.x / GRID;
        row[1] = node.y / GRID;
        row[2] = f64::from(node.demand) / cap;
        row[3] = if max_dist > 0.0 { node.dist_depot / max_dist } else { 0.0 };
        row[4] = 1.0;
    }
    for &c in sol.removal_list() {
        nodes[c * NODE_FEATURES + 4] = 0.0;
        nodes[c * NODE_FEATURES + 5] = 1.0;
    }
    let n = inst.n_customers() as f64;
    let globals = alloc::vec![
        if phase == Phase::Destroy { 1.0 } else { 0.0 },
        budget_remaining as f64 / config.budget as f64,
        sol.tours().len() as f64 / n,
        config.d as f64 / n,
    ];
    Observation {
        n_nodes,
        nodes,
        globals,
    }
}
