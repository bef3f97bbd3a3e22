//! Destroy and repair operators, portfolios and the edge history used by
//! historical node-pair removal.

mod destroy;
mod history;
mod repair;

use alloc::vec::Vec;
use core::fmt;

pub use destroy::apply_destroy;
pub use history::PairHistory;
pub use repair::{apply_repair, greedy_choice, greedy_repair, regret2_repair, regret_choice, Insertion, RegretChoice};

/// The twelve destroy operators in canonical portfolio order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DestroyOp {
    RandomNode,
    RandomRoute,
    WorstNode,
    Neighbourhood,
    GreedyRoute,
    Proximity,
    Cluster,
    NodeNeighbourhood,
    Zone,
    RouteNeighbourhood,
    Pair,
    HistoricalNodePair,
}

impl DestroyOp {
    pub const ALL: [DestroyOp; 12] = [
        DestroyOp::RandomNode,
        DestroyOp::RandomRoute,
        DestroyOp::WorstNode,
        DestroyOp::Neighbourhood,
        DestroyOp::GreedyRoute,
        DestroyOp::Proximity,
        DestroyOp::Cluster,
        DestroyOp::NodeNeighbourhood,
        DestroyOp::Zone,
        DestroyOp::RouteNeighbourhood,
        DestroyOp::Pair,
        DestroyOp::HistoricalNodePair,
    ];

    /// Position in the canonical order.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            DestroyOp::RandomNode => "random_node",
            DestroyOp::RandomRoute => "random_route",
            DestroyOp::WorstNode => "worst_node",
            DestroyOp::Neighbourhood => "neighbourhood",
            DestroyOp::GreedyRoute => "greedy_route",
            DestroyOp::Proximity => "proximity",
            DestroyOp::Cluster => "cluster",
            DestroyOp::NodeNeighbourhood => "node_neighbourhood",
            DestroyOp::Zone => "zone",
            DestroyOp::RouteNeighbourhood => "route_neighbourhood",
            DestroyOp::Pair => "pair",
            DestroyOp::HistoricalNodePair => "historical_node_pair",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RepairOp {
    Greedy,
    Regret2,
}

impl RepairOp {
    pub const ALL: [RepairOp; 2] = [RepairOp::Greedy, RepairOp::Regret2];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            RepairOp::Greedy => "greedy_repair",
            RepairOp::Regret2 => "regret2_repair",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    Destroy,
    Repair,
}

/// A destroy or repair operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OperatorId {
    Destroy(DestroyOp),
    Repair(RepairOp),
}

impl OperatorId {
    pub fn kind(self) -> OperatorKind {
        match self {
            OperatorId::Destroy(_) => OperatorKind::Destroy,
            OperatorId::Repair(_) => OperatorKind::Repair,
        }
    }

    /// Index within its kind's canonical order.
    pub fn index(self) -> usize {
        match self {
            OperatorId::Destroy(op) => op.index(),
            OperatorId::Repair(op) => op.index(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OperatorId::Destroy(op) => op.name(),
            OperatorId::Repair(op) => op.name(),
        }
    }

    /// Looks an operator up by its catalogue name.
    pub fn from_name(name: &str) -> Option<Self> {
        DestroyOp::ALL
            .iter()
            .map(|&d| OperatorId::Destroy(d))
            .chain(RepairOp::ALL.iter().map(|&r| OperatorId::Repair(r)))
            .find(|op| op.name() == name)
    }
}

impl fmt::Display for OperatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A destroy-operator prefix of the canonical order plus both repairs.
///
/// Operators are also addressed by a flat action index: destroys first
/// (`0..|D|`), then repairs (`|D|..|D|+2`). Network outputs use this order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Portfolio {
    destroys: Vec<DestroyOp>,
    repairs: Vec<RepairOp>,
}

impl Portfolio {
    /// First `k` destroy operators of the canonical order, `2 <= k <= 12`.
    pub fn build(k: usize) -> crate::Result<Self> {
        if !(2..=DestroyOp::ALL.len()).contains(&k) {
            return Err(crate::Error::PortfolioSize(k));
        }
        Ok(Self {
            destroys: DestroyOp::ALL[..k].to_vec(),
            repairs: RepairOp::ALL.to_vec(),
        })
    }

    pub fn destroys(&self) -> &[DestroyOp] {
        &self.destroys
    }

    pub fn repairs(&self) -> &[RepairOp] {
        &self.repairs
    }

    pub fn n_destroys(&self) -> usize {
        self.destroys.len()
    }

    /// Total number of operators (network output width).
    pub fn len(&self) -> usize {
        self.destroys.len() + self.repairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn destroy_ids(&self) -> Vec<OperatorId> {
        self.destroys.iter().map(|&d| OperatorId::Destroy(d)).collect()
    }

    pub fn repair_ids(&self) -> Vec<OperatorId> {
        self.repairs.iter().map(|&r| OperatorId::Repair(r)).collect()
    }

    pub fn operators(&self) -> Vec<OperatorId> {
        let mut all = self.destroy_ids();
        all.extend(self.repair_ids());
        all
    }

    pub fn action_index(&self, op: OperatorId) -> Option<usize> {
        match op {
            OperatorId::Destroy(d) => self.destroys.iter().position(|&x| x == d),
            OperatorId::Repair(r) => self
                .repairs
                .iter()
                .position(|&x| x == r)
                .map(|i| i + self.destroys.len()),
        }
    }

    pub fn operator(&self, action: usize) -> Option<OperatorId> {
        let nd = self.destroys.len();
        if action < nd {
            Some(OperatorId::Destroy(self.destroys[action]))
        } else {
            self.repairs.get(action - nd).map(|&r| OperatorId::Repair(r))
        }
    }
}
