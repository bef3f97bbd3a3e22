//! Solutions: tours plus a removal list, with an incrementally maintained cost.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::{Error, Instance, Result};

/// A (possibly partial) CVRP solution.
///
/// Tours hold customer ids; the depot is implicit at both ends of every tour.
/// Customers that are not routed sit in the removal list. `cost` is the length
/// of the routed edges and is updated on every mutation.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    tours: Vec<Vec<usize>>,
    loads: Vec<u32>,
    removal_list: Vec<usize>,
    cost: f64,
}

/// A problem found by [`validate_solution`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Duplicate { customer: usize },
    Missing { customer: usize },
    Unrouted { customer: usize },
    UnknownCustomer { id: usize },
    DepotInTour { tour: usize },
    EmptyTour { tour: usize },
    CapacityExceeded { tour: usize, load: u32 },
}

/// Length of one depot-to-depot tour.
pub fn tour_length(inst: &Instance, tour: &[usize]) -> f64 {
    let mut prev = 0;
    let mut total = 0.0;
    for &c in tour {
        total += inst.dist(prev, c);
        prev = c;
    }
    total + inst.dist(prev, 0)
}

/// Objective recomputed from scratch: total length of all tours.
///
/// For partial solutions this is the length of the routed edges only.
pub fn objective(inst: &Instance, sol: &Solution) -> Result<f64> {
    for tour in &sol.tours {
        if let Some(&bad) = tour.iter().find(|&&c| !inst.is_customer(c)) {
            return Err(Error::UnknownCustomer(bad));
        }
    }
    Ok(sol.tours.iter().map(|t| tour_length(inst, t)).sum())
}

/// Reports every invariant violation; an empty list means the solution is
/// complete and feasible.
pub fn validate_solution(inst: &Instance, sol: &Solution) -> Vec<Violation> {
    let n = inst.n_customers();
    let mut seen = alloc::vec![0usize; n + 1];
    let mut out = Vec::new();
    for (t, tour) in sol.tours.iter().enumerate() {
        if tour.is_empty() {
            out.push(Violation::EmptyTour { tour: t });
        }
        let mut load = 0u32;
        for &c in tour {
            if c == 0 {
                out.push(Violation::DepotInTour { tour: t });
            } else if c > n {
                out.push(Violation::UnknownCustomer { id: c });
            } else {
                seen[c] += 1;
                load += inst.demand(c);
            }
        }
        if load > inst.capacity() {
            out.push(Violation::CapacityExceeded { tour: t, load });
        }
    }
    for &c in &sol.removal_list {
        if c == 0 || c > n {
            out.push(Violation::UnknownCustomer { id: c });
        } else {
            seen[c] += 1;
            out.push(Violation::Unrouted { customer: c });
        }
    }
    for (c, &count) in seen.iter().enumerate().skip(1) {
        match count {
            0 => out.push(Violation::Missing { customer: c }),
            1 => {}
            _ => out.push(Violation::Duplicate { customer: c }),
        }
    }
    out
}

/// Shuffles all customers uniformly and fills tours left to right, opening a
/// new tour whenever the next customer would exceed capacity.
pub fn random_initial_solution<R: Rng + ?Sized>(inst: &Instance, rng: &mut R) -> Result<Solution> {
    let cap = inst.capacity();
    if let Some(node) = inst.nodes()[1..].iter().find(|r| r.demand > cap) {
        return Err(Error::DemandExceedsCapacity {
            customer: node.id,
            demand: node.demand,
            capacity: cap,
        });
    }
    let mut order: Vec<usize> = (1..=inst.n_customers()).collect();
    order.shuffle(rng);
    let mut tours: Vec<Vec<usize>> = Vec::new();
    let mut current = Vec::new();
    let mut load = 0u32;
    for c in order {
        let q = inst.demand(c);
        if load + q > cap && !current.is_empty() {
            tours.push(core::mem::take(&mut current));
            load = 0;
        }
        current.push(c);
        load += q;
    }
    if !current.is_empty() {
        tours.push(current);
    }
    Solution::from_tours(inst, tours)
}

/// Cost change of inserting `c` between `prev` and `next`.
#[inline]
pub(crate) fn splice_in_delta(inst: &Instance, prev: usize, c: usize, next: usize) -> f64 {
    inst.dist(prev, c) + inst.dist(c, next) - inst.dist(prev, next)
}

impl Solution {
    /// Builds a complete solution from tours; empty tours are dropped.
    ///
    /// Fails on unknown ids, the depot inside a tour, or repeated customers.
    /// Capacity and coverage are checked by [`validate_solution`] instead.
    pub fn from_tours(inst: &Instance, tours: Vec<Vec<usize>>) -> Result<Self> {
        Self::from_parts(inst, tours, Vec::new())
    }

    /// Builds a solution from tours and a removal list.
    pub fn from_parts(inst: &Instance, tours: Vec<Vec<usize>>, removal_list: Vec<usize>) -> Result<Self> {
        let mut seen = alloc::vec![false; inst.n_nodes()];
        for &c in tours.iter().flatten().chain(removal_list.iter()) {
            if !inst.is_customer(c) {
                return Err(Error::UnknownCustomer(c));
            }
            if seen[c] {
                return Err(Error::DuplicateCustomer { customer: c });
            }
            seen[c] = true;
        }
        let tours: Vec<Vec<usize>> = tours.into_iter().filter(|t| !t.is_empty()).collect();
        let loads = tours.iter().map(|t| t.iter().map(|&c| inst.demand(c)).sum()).collect();
        let cost = tours.iter().map(|t| tour_length(inst, t)).sum();
        Ok(Self {
            tours,
            loads,
            removal_list,
            cost,
        })
    }

    pub fn tours(&self) -> &[Vec<usize>] {
        &self.tours
    }

    pub fn loads(&self) -> &[u32] {
        &self.loads
    }

    pub fn removal_list(&self) -> &[usize] {
        &self.removal_list
    }

    pub fn is_complete(&self) -> bool {
        self.removal_list.is_empty()
    }

    /// Incrementally maintained length of the routed edges.
    pub fn cached_cost(&self) -> f64 {
        self.cost
    }

    pub fn n_routed(&self) -> usize {
        self.tours.iter().map(Vec::len).sum()
    }

    /// Routed customers in tour order.
    pub fn routed(&self) -> Vec<usize> {
        self.tours.iter().flatten().copied().collect()
    }

    /// `(tour, position)` of a routed customer.
    pub fn locate(&self, customer: usize) -> Option<(usize, usize)> {
        self.tours
            .iter()
            .enumerate()
            .find_map(|(t, tour)| tour.iter().position(|&c| c == customer).map(|p| (t, p)))
    }

    /// Predecessor and successor of the gap at `position` in `tour`
    /// (depot at the boundaries).
    #[inline]
    pub(crate) fn gap(&self, tour: usize, position: usize) -> (usize, usize) {
        let t = &self.tours[tour];
        let prev = if position == 0 { 0 } else { t[position - 1] };
        let next = if position == t.len() { 0 } else { t[position] };
        (prev, next)
    }

    /// Neighbours of the customer at `(tour, position)`.
    #[inline]
    pub(crate) fn neighbours(&self, tour: usize, position: usize) -> (usize, usize) {
        let t = &self.tours[tour];
        let prev = if position == 0 { 0 } else { t[position - 1] };
        let next = t.get(position + 1).copied().unwrap_or(0);
        (prev, next)
    }

    /// Moves a routed customer to the removal list. Empty tours are kept until
    /// [`Solution::prune_empty_tours`] so tour indices stay stable.
    pub fn remove_customer(&mut self, inst: &Instance, customer: usize) -> Result<()> {
        let (t, p) = self.locate(customer).ok_or(Error::NotRouted(customer))?;
        let (prev, next) = self.neighbours(t, p);
        self.cost -= splice_in_delta(inst, prev, customer, next);
        self.tours[t].remove(p);
        self.loads[t] -= inst.demand(customer);
        self.removal_list.push(customer);
        Ok(())
    }

    pub fn prune_empty_tours(&mut self) {
        let mut t = 0;
        while t < self.tours.len() {
            if self.tours[t].is_empty() {
                self.tours.remove(t);
                self.loads.remove(t);
            } else {
                t += 1;
            }
        }
    }

    fn take_from_removal(&mut self, customer: usize) -> Result<()> {
        let idx = self
            .removal_list
            .iter()
            .position(|&c| c == customer)
            .ok_or(Error::NotRemoved(customer))?;
        self.removal_list.remove(idx);
        Ok(())
    }

    /// Inserts a removed customer at `position` of an existing tour.
    pub fn insert_customer(&mut self, inst: &Instance, customer: usize, tour: usize, position: usize) -> Result<()> {
        if tour >= self.tours.len() || position > self.tours[tour].len() {
            return Err(Error::InvalidPosition { tour, position });
        }
        if self.loads[tour] + inst.demand(customer) > inst.capacity() {
            return Err(Error::CapacityExceeded { tour });
        }
        self.take_from_removal(customer)?;
        let (prev, next) = self.gap(tour, position);
        self.cost += splice_in_delta(inst, prev, customer, next);
        self.tours[tour].insert(position, customer);
        self.loads[tour] += inst.demand(customer);
        Ok(())
    }

    /// Opens a new singleton tour for a removed customer.
    pub fn insert_new_tour(&mut self, inst: &Instance, customer: usize) -> Result<()> {
        self.take_from_removal(customer)?;
        self.cost += 2.0 * inst.dist(0, customer);
        self.tours.push(alloc::vec![customer]);
        self.loads.push(inst.demand(customer));
        Ok(())
    }

    /// Undirected customer/depot edges of every tour, depot legs included.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.tours.iter().flat_map(|t| {
            let n = t.len();
            (0..=n).map(move |i| {
                let a = if i == 0 { 0 } else { t[i - 1] };
                let b = if i == n { 0 } else { t[i] };
                (a, b)
            })
        })
    }
}

/// Cost of inserting removed customer `customer` at `position` of `tour`.
///
/// Returns [`Error::CapacityExceeded`] when the tour cannot take the load;
/// the solution is never modified.
pub fn insertion_delta(inst: &Instance, sol: &Solution, customer: usize, tour: usize, position: usize) -> Result<f64> {
    if !sol.removal_list.contains(&customer) {
        return Err(Error::NotRemoved(customer));
    }
    if tour >= sol.tours.len() || position > sol.tours[tour].len() {
        return Err(Error::InvalidPosition { tour, position });
    }
    if sol.loads[tour] + inst.demand(customer) > inst.capacity() {
        return Err(Error::CapacityExceeded { tour });
    }
    let (prev, next) = sol.gap(tour, position);
    Ok(splice_in_delta(inst, prev, customer, next))
}

/// Cost decrease obtained by splicing a routed customer out of its tour.
pub fn removal_gain(inst: &Instance, sol: &Solution, customer: usize) -> Result<f64> {
    let (t, p) = sol.locate(customer).ok_or(Error::NotRouted(customer))?;
    let (prev, next) = sol.neighbours(t, p);
    Ok(splice_in_delta(inst, prev, customer, next))
}
