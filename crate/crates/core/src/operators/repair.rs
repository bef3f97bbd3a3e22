use rand::Rng;

use super::{OperatorId, RepairOp};
use crate::solution::splice_in_delta;
use crate::{Error, Instance, Result, Solution};

/// A concrete insertion move. `tour == tours.len()` means "open a new tour".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Insertion {
    pub customer: usize,
    pub tour: usize,
    pub position: usize,
    pub delta: f64,
}

/// The customer a 2-regret round would insert, with its best move and regret.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretChoice {
    pub insertion: Insertion,
    pub regret: f64,
}

pub fn apply_repair<R: Rng + ?Sized>(op: OperatorId, inst: &Instance, sol: &mut Solution, rng: &mut R) -> Result<()> {
    match op {
        OperatorId::Repair(RepairOp::Greedy) => greedy_repair(inst, sol, rng),
        OperatorId::Repair(RepairOp::Regret2) => regret2_repair(inst, sol, rng),
        OperatorId::Destroy(_) => Err(Error::WrongOperatorKind(op.name())),
    }
}

/// Visits every feasible move for `customer` in (tour, position) order, the
/// new-tour option last.
fn for_each_move(inst: &Instance, sol: &Solution, customer: usize, mut visit: impl FnMut(usize, usize, f64)) {
    let q = inst.demand(customer);
    let cap = inst.capacity();
    for (t, tour) in sol.tours().iter().enumerate() {
        if sol.loads()[t] + q > cap {
            continue;
        }
        for p in 0..=tour.len() {
            let (prev, next) = sol.gap(t, p);
            visit(t, p, splice_in_delta(inst, prev, customer, next));
        }
    }
    visit(sol.tours().len(), 0, 2.0 * inst.dist(0, customer));
}

fn commit(inst: &Instance, sol: &mut Solution, ins: Insertion) -> Result<()> {
    if ins.tour == sol.tours().len() {
        sol.insert_new_tour(inst, ins.customer)
    } else {
        sol.insert_customer(inst, ins.customer, ins.tour, ins.position)
    }
}

/// The globally cheapest feasible insertion over all removed customers.
///
/// Ties go to the earliest tour, then the earliest position, then the
/// customer listed first in the removal list.
pub fn greedy_choice(inst: &Instance, sol: &Solution) -> Option<Insertion> {
    let mut best: Option<Insertion> = None;
    for &c in sol.removal_list() {
        for_each_move(inst, sol, c, |tour, position, delta| {
            let better = match best {
                None => true,
                Some(b) => delta < b.delta || (delta == b.delta && (tour, position) < (b.tour, b.position)),
            };
            if better {
                best = Some(Insertion {
                    customer: c,
                    tour,
                    position,
                    delta,
                });
            }
        });
    }
    best
}

/// Repeatedly performs the globally cheapest insertion until the removal
/// list is empty.
pub fn greedy_repair<R: Rng + ?Sized>(inst: &Instance, sol: &mut Solution, _rng: &mut R) -> Result<()> {
    while let Some(ins) = greedy_choice(inst, sol) {
        commit(inst, sol, ins)?;
    }
    Ok(())
}

/// Best and second-best move for one customer.
fn two_best(inst: &Instance, sol: &Solution, customer: usize) -> (Insertion, Option<f64>) {
    let mut best: Option<Insertion> = None;
    let mut second: Option<f64> = None;
    for_each_move(inst, sol, customer, |tour, position, delta| match best {
        Some(b) if delta >= b.delta => {
            if second.map_or(true, |s| delta < s) {
                second = Some(delta);
            }
        }
        _ => {
            if let Some(b) = best {
                second = Some(b.delta);
            }
            best = Some(Insertion {
                customer,
                tour,
                position,
                delta,
            });
        }
    });
    (best.expect("the new-tour move always exists"), second)
}

/// The next 2-regret insertion: the customer maximising
/// `second_best - best` (infinite with a single feasible move), ties broken
/// by smaller best delta and then removal-list order.
pub fn regret_choice(inst: &Instance, sol: &Solution) -> Option<RegretChoice> {
    let mut chosen: Option<RegretChoice> = None;
    for &c in sol.removal_list() {
        let (ins, second) = two_best(inst, sol, c);
        let regret = second.map_or(f64::INFINITY, |s| s - ins.delta);
        let better = match chosen {
            None => true,
            Some(cur) => regret > cur.regret || (regret == cur.regret && ins.delta < cur.insertion.delta),
        };
        if better {
            chosen = Some(RegretChoice { insertion: ins, regret });
        }
    }
    chosen
}

pub fn regret2_repair<R: Rng + ?Sized>(inst: &Instance, sol: &mut Solution, _rng: &mut R) -> Result<()> {
    while let Some(choice) = regret_choice(inst, sol) {
        commit(inst, sol, choice.insertion)?;
    }
    Ok(())
}
