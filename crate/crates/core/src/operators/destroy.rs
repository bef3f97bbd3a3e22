use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng;

use super::{DestroyOp, OperatorId, PairHistory};
use crate::solution::removal_gain;
use crate::{Error, Instance, Result, Solution};

/// Moves exactly `d` routed customers of a complete solution to its removal
/// list, then deletes tours left empty.
pub fn apply_destroy<R: Rng + ?Sized>(
    op: OperatorId,
    inst: &Instance,
    sol: &mut Solution,
    d: usize,
    rng: &mut R,
    history: &PairHistory,
) -> Result<()> {
    let OperatorId::Destroy(op) = op else {
        return Err(Error::WrongOperatorKind(op.name()));
    };
    let routed = sol.n_routed();
    if d == 0 || d > routed {
        return Err(Error::DestroyScale { d, routed });
    }
    match op {
        DestroyOp::RandomNode => random_node(inst, sol, d, rng)?,
        DestroyOp::RandomRoute => {
            let mut order: Vec<usize> = (0..sol.tours().len()).collect();
            order.shuffle(rng);
            stage_tours(inst, sol, &order, d, rng)?;
        }
        DestroyOp::WorstNode => repeat_argmax(inst, sol, d, |inst, sol, c| {
            removal_gain(inst, sol, c).unwrap_or(f64::NEG_INFINITY)
        })?,
        DestroyOp::Neighbourhood => repeat_argmax(inst, sol, d, outlier_score)?,
        DestroyOp::GreedyRoute => {
            let mut order: Vec<usize> = (0..sol.tours().len()).collect();
            order.sort_by_key(|&t| (sol.tours()[t].len(), t));
            stage_tours(inst, sol, &order, d, rng)?;
        }
        DestroyOp::Proximity => {
            let seed = random_routed(sol, rng);
            remove_nearest_to_seed(inst, sol, seed, d, |inst, a, b| inst.dist(a, b))?;
        }
        DestroyOp::Cluster => cluster(inst, sol, d, rng)?,
        DestroyOp::NodeNeighbourhood => {
            let seed = random_routed(sol, rng);
            let max_dist = inst.max_distance().max(f64::MIN_POSITIVE);
            let cap = f64::from(inst.capacity().max(1));
            remove_nearest_to_seed(inst, sol, seed, d, |inst, a, b| {
                inst.dist(a, b) / max_dist + f64::from(inst.demand(a).abs_diff(inst.demand(b))) / cap
            })?;
        }
        DestroyOp::Zone => zone(inst, sol, d, rng)?,
        DestroyOp::RouteNeighbourhood => route_neighbourhood(inst, sol, d, rng)?,
        DestroyOp::Pair => pair(inst, sol, d, rng)?,
        DestroyOp::HistoricalNodePair => historical(inst, sol, d, rng, history)?,
    }
    sol.prune_empty_tours();
    Ok(())
}

fn remove_all(inst: &Instance, sol: &mut Solution, staged: &[usize]) -> Result<()> {
    staged.iter().try_for_each(|&c| sol.remove_customer(inst, c))
}

fn random_routed<R: Rng + ?Sized>(sol: &Solution, rng: &mut R) -> usize {
    let routed = sol.routed();
    routed[rng.gen_range(0..routed.len())]
}

fn random_node<R: Rng + ?Sized>(inst: &Instance, sol: &mut Solution, d: usize, rng: &mut R) -> Result<()> {
    let mut routed = sol.routed();
    let (picked, _) = routed.partial_shuffle(rng, d);
    let picked = picked.to_vec();
    remove_all(inst, sol, &picked)
}

/// Stages whole tours in `order` until at least `d` customers are staged; the
/// last tour contributes a uniform subset so exactly `d` are removed.
fn stage_tours<R: Rng + ?Sized>(inst: &Instance, sol: &mut Solution, order: &[usize], d: usize, rng: &mut R) -> Result<()> {
    let mut staged = Vec::with_capacity(d);
    for &t in order {
        let need = d - staged.len();
        if need == 0 {
            break;
        }
        let mut members = sol.tours()[t].clone();
        if members.len() > need {
            let (keep, _) = members.partial_shuffle(rng, need);
            staged.extend_from_slice(keep);
        } else {
            staged.extend(members);
        }
    }
    remove_all(inst, sol, &staged)
}

/// Removes the routed customer with the highest score, `d` times, rescoring
/// after every removal. Ties go to the first customer in tour order.
fn repeat_argmax<F>(inst: &Instance, sol: &mut Solution, d: usize, score: F) -> Result<()>
where
    F: Fn(&Instance, &Solution, usize) -> f64,
{
    for _ in 0..d {
        let mut best: Option<(usize, f64)> = None;
        for c in sol.tours().iter().flatten().copied() {
            let s = score(inst, sol, c);
            if best.map_or(true, |(_, b)| s > b) {
                best = Some((c, s));
            }
        }
        let (c, _) = best.expect("d <= routed customers");
        sol.remove_customer(inst, c)?;
    }
    Ok(())
}

/// Mean distance to the other customers of the same tour; distance to the
/// depot for singletons.
fn outlier_score(inst: &Instance, sol: &Solution, c: usize) -> f64 {
    let Some((t, _)) = sol.locate(c) else {
        return f64::NEG_INFINITY;
    };
    let tour = &sol.tours()[t];
    if tour.len() == 1 {
        return inst.dist(0, c);
    }
    let total: f64 = tour.iter().filter(|&&o| o != c).map(|&o| inst.dist(c, o)).sum();
    total / (tour.len() - 1) as f64
}

/// Removes `seed` and the `d - 1` routed customers closest to it under
/// `measure` (ties by id).
fn remove_nearest_to_seed<F>(inst: &Instance, sol: &mut Solution, seed: usize, d: usize, measure: F) -> Result<()>
where
    F: Fn(&Instance, usize, usize) -> f64,
{
    let mut others: Vec<(f64, usize)> = sol
        .routed()
        .into_iter()
        .filter(|&c| c != seed)
        .map(|c| (measure(inst, seed, c), c))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut staged = alloc::vec![seed];
    staged.extend(others.iter().take(d - 1).map(|&(_, c)| c));
    remove_all(inst, sol, &staged)
}

fn centroid(inst: &Instance, customers: &[usize]) -> (f64, f64) {
    let k = customers.len().max(1) as f64;
    let (sx, sy) = customers
        .iter()
        .fold((0.0, 0.0), |(x, y), &c| (x + inst.node(c).x, y + inst.node(c).y));
    (sx / k, sy / k)
}

fn point_dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    crate::math::hypot(a.0 - b.0, a.1 - b.1)
}

/// Splits `members` in two around its farthest pair and returns one half
/// chosen at random.
fn split_cluster<R: Rng + ?Sized>(inst: &Instance, members: &[usize], rng: &mut R) -> Vec<usize> {
    if members.len() < 2 {
        return members.to_vec();
    }
    let (mut a, mut b, mut far) = (members[0], members[1], f64::NEG_INFINITY);
    for (i, &x) in members.iter().enumerate() {
        for &y in &members[i + 1..] {
            let dxy = inst.dist(x, y);
            if dxy > far {
                (a, b, far) = (x, y, dxy);
            }
        }
    }
    let (near_a, near_b): (Vec<usize>, Vec<usize>) = members.iter().partition(|&&c| inst.dist(c, a) <= inst.dist(c, b));
    if rng.gen_bool(0.5) {
        near_a
    } else {
        near_b
    }
}

fn cluster<R: Rng + ?Sized>(inst: &Instance, sol: &mut Solution, d: usize, rng: &mut R) -> Result<()> {
    let n_tours = sol.tours().len();
    let mut staged: Vec<usize> = Vec::with_capacity(d);
    let mut is_staged = alloc::vec![false; inst.n_nodes()];
    let mut visited = alloc::vec![false; n_tours];
    let mut current = rng.gen_range(0..n_tours);
    loop {
        visited[current] = true;
        let remaining: Vec<usize> = sol.tours()[current].iter().copied().filter(|&c| !is_staged[c]).collect();
        let mut chosen = split_cluster(inst, &remaining, rng);
        let need = d - staged.len();
        if chosen.len() > need {
            let (keep, _) = chosen.partial_shuffle(rng, need);
            chosen = keep.to_vec();
        }
        for &c in &chosen {
            is_staged[c] = true;
        }
        staged.extend(chosen);
        if staged.len() == d {
            break;
        }
        let open = |t: usize, visited: &[bool]| !visited[t] && sol.tours()[t].iter().any(|&c| !is_staged[c]);
        if !(0..n_tours).any(|t| open(t, &visited)) {
            // Every tour has donated a cluster; allow second passes over leftovers.
            visited.iter_mut().for_each(|v| *v = false);
        }
        let anchor = centroid(inst, &staged);
        current = (0..n_tours)
            .filter(|&t| open(t, &visited))
            .map(|t| {
                let rest: Vec<usize> = sol.tours()[t].iter().copied().filter(|&c| !is_staged[c]).collect();
                (point_dist(centroid(inst, &rest), anchor), t)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, t)| t)
            .expect("fewer than d customers staged implies some remain routed");
    }
    remove_all(inst, sol, &staged)
}

fn zone<R: Rng + ?Sized>(inst: &Instance, sol: &mut Solution, d: usize, rng: &mut R) -> Result<()> {
    let (x0, y0, x1, y1) = inst.bounding_box();
    let px = if x1 > x0 { rng.gen_range(x0..=x1) } else { x0 };
    let py = if y1 > y0 { rng.gen_range(y0..=y1) } else { y0 };
    let mut routed: Vec<(f64, usize)> = sol
        .routed()
        .into_iter()
        .map(|c| {
            let node = inst.node(c);
            ((node.x - px).abs().max((node.y - py).abs()), c)
        })
        .collect();
    routed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let staged: Vec<usize> = routed.iter().take(d).map(|&(_, c)| c).collect();
    remove_all(inst, sol, &staged)
}

fn route_neighbourhood<R: Rng + ?Sized>(inst: &Instance, sol: &mut Solution, d: usize, rng: &mut R) -> Result<()> {
    let n_tours = sol.tours().len();
    let seed = rng.gen_range(0..n_tours);
    let anchor = centroid(inst, &sol.tours()[seed]);
    let mut order: Vec<(f64, usize)> = (0..n_tours)
        .map(|t| {
            let dist = if t == seed { 0.0 } else { point_dist(centroid(inst, &sol.tours()[t]), anchor) };
            (dist, t)
        })
        .collect();
    // The seed tour always comes first, even if another centroid coincides.
    order.sort_by(|a, b| {
        (a.1 != seed)
            .cmp(&(b.1 != seed))
            .then(a.0.total_cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    let order: Vec<usize> = order.into_iter().map(|(_, t)| t).collect();
    stage_tours(inst, sol, &order, d, rng)
}

fn pair<R: Rng + ?Sized>(inst: &Instance, sol: &mut Solution, d: usize, rng: &mut R) -> Result<()> {
    let mut pool = sol.routed();
    let mut staged = Vec::with_capacity(d + 1);
    while staged.len() < d {
        let c = pool.swap_remove(rng.gen_range(0..pool.len()));
        staged.push(c);
        if staged.len() == d {
            break;
        }
        let partner = pool
            .iter()
            .enumerate()
            .min_by(|a, b| inst.dist(c, *a.1).total_cmp(&inst.dist(c, *b.1)).then(a.1.cmp(b.1)))
            .map(|(i, _)| i);
        if let Some(i) = partner {
            staged.push(pool.swap_remove(i));
        }
    }
    remove_all(inst, sol, &staged)
}

/// Scores each routed customer by the best historical objective of its two
/// incident edges (unseen edges count as the current cost) and removes the
/// `d` highest. Edges that only ever appeared in poor solutions are the
/// first to go. Ties are broken uniformly at random.
fn historical<R: Rng + ?Sized>(inst: &Instance, sol: &mut Solution, d: usize, rng: &mut R, history: &PairHistory) -> Result<()> {
    let current = sol.cached_cost();
    let edge = |a: usize, b: usize| history.best(a, b).unwrap_or(current);
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(sol.n_routed());
    for (t, tour) in sol.tours().iter().enumerate() {
        for (p, &c) in tour.iter().enumerate() {
            let (prev, next) = sol.neighbours(t, p);
            scored.push((edge(prev, c) + edge(c, next), c));
        }
    }
    scored.shuffle(rng);
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let staged: Vec<usize> = scored.iter().take(d).map(|&(_, c)| c).collect();
    remove_all(inst, sol, &staged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::Portfolio;
    use crate::solution::{random_initial_solution, validate_solution, Violation};
    use alloc::vec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(seed: u64, n: usize) -> Instance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<(f64, f64, u32)> = (0..=n)
            .map(|_| (rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0), rng.gen_range(1..20)))
            .collect();
        Instance::new("r", &rows, 40).unwrap()
    }

    #[test]
    fn worst_node_removes_largest_gain() {
        let inst = Instance::new("w", &[(0.0, 0.0, 0), (2.0, 0.0, 1), (2.0, 2.0, 1)], 10).unwrap();
        let mut sol = Solution::from_tours(&inst, vec![vec![1, 2]]).unwrap();
        // Brute-force gains: a -> 2 + 2 - sqrt(8), b -> 2 + sqrt(8) - 2.
        let ga = inst.dist(0, 1) + inst.dist(1, 2) - inst.dist(0, 2);
        let gb = inst.dist(1, 2) + inst.dist(2, 0) - inst.dist(1, 0);
        assert!(gb > ga);
        assert!((gb - 2.8284).abs() < 1e-4);
        let h = PairHistory::new(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        apply_destroy(OperatorId::Destroy(DestroyOp::WorstNode), &inst, &mut sol, 1, &mut rng, &h).unwrap();
        assert_eq!(sol.removal_list(), &[2]);
    }

    #[test]
    fn proximity_removes_seed_and_nearest() {
        let inst = random_instance(3, 20);
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sol = random_initial_solution(&inst, &mut rng).unwrap();
            let before = sol.routed();
            let h = PairHistory::new(&inst);
            apply_destroy(OperatorId::Destroy(DestroyOp::Proximity), &inst, &mut sol, 3, &mut rng, &h).unwrap();
            let removed = sol.removal_list().to_vec();
            let s = removed[0];
            // Brute force: every non-removed customer is at least as far from s
            // as each removed partner.
            let far = removed[1..].iter().map(|&c| inst.dist(s, c)).fold(0.0, f64::max);
            for &c in before.iter().filter(|c| !removed.contains(c)) {
                assert!(inst.dist(s, c) >= far);
            }
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let inst = random_instance(1, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut sol = random_initial_solution(&inst, &mut rng).unwrap();
        let h = PairHistory::new(&inst);
        let op = OperatorId::Destroy(DestroyOp::RandomNode);
        assert!(matches!(apply_destroy(op, &inst, &mut sol, 0, &mut rng, &h), Err(Error::DestroyScale { .. })));
        assert!(matches!(apply_destroy(op, &inst, &mut sol, 11, &mut rng, &h), Err(Error::DestroyScale { .. })));
        let repair = OperatorId::Repair(crate::operators::RepairOp::Greedy);
        assert!(matches!(apply_destroy(repair, &inst, &mut sol, 2, &mut rng, &h), Err(Error::WrongOperatorKind(_))));
    }

    #[test]
    fn historical_prefers_edges_from_poor_solutions() {
        // Tour [1,2,3,4]; history says edge (3,4) and (4,0) were only seen at cost 1000.
        let inst = Instance::new(
            "h",
            &[(0.0, 0.0, 0), (1.0, 0.0, 1), (2.0, 0.0, 1), (3.0, 0.0, 1), (4.0, 0.0, 1)],
            10,
        )
        .unwrap();
        let mut sol = Solution::from_tours(&inst, vec![vec![1, 2, 3, 4]]).unwrap();
        let mut h = PairHistory::new(&inst);
        let bad = Solution::from_tours(&inst, vec![vec![3, 4], vec![1, 2]]).unwrap();
        h.record(&bad, 1000.0);
        let good = Solution::from_tours(&inst, vec![vec![1, 2, 3], vec![4]]).unwrap();
        h.record(&good, 5.0);
        // Scores: 1: (0,1)=5 + (1,2)=5; 4: (3,4)=1000 + (4,0)=5.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        apply_destroy(OperatorId::Destroy(DestroyOp::HistoricalNodePair), &inst, &mut sol, 1, &mut rng, &h).unwrap();
        assert_eq!(sol.removal_list(), &[4]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn every_destroy_removes_exactly_d(seed in 0u64..100_000, n in 4usize..30, d_frac in 0.0f64..1.0) {
            let inst = random_instance(seed, n);
            let d = 1 + ((n - 1) as f64 * d_frac) as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let start = random_initial_solution(&inst, &mut rng).unwrap();
            let mut h = PairHistory::new(&inst);
            h.record(&start, start.cached_cost());
            for op in Portfolio::build(12).unwrap().destroy_ids() {
                let mut sol = start.clone();
                apply_destroy(op, &inst, &mut sol, d, &mut rng, &h).unwrap();
                prop_assert_eq!(sol.removal_list().len(), d, "{}", op);
                prop_assert_eq!(sol.n_routed(), n - d);
                prop_assert!(sol.tours().iter().all(|t| !t.is_empty()));
                prop_assert!(!sol.removal_list().contains(&0));
                let violations = validate_solution(&inst, &sol);
                let only_unrouted = violations.iter().all(|v| matches!(v, Violation::Unrouted { .. }));
                prop_assert!(only_unrouted);
                prop_assert!((sol.cached_cost() - crate::solution::objective(&inst, &sol).unwrap()).abs() < 1e-9);
            }
        }

        #[test]
        fn destroys_are_reproducible(seed in 0u64..100_000) {
            let inst = random_instance(seed, 15);
            let start = random_initial_solution(&inst, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let h = PairHistory::new(&inst);
            for op in Portfolio::build(12).unwrap().destroy_ids() {
                let mut a = start.clone();
                let mut b = start.clone();
                apply_destroy(op, &inst, &mut a, 4, &mut ChaCha8Rng::seed_from_u64(seed + 1), &h).unwrap();
                apply_destroy(op, &inst, &mut b, 4, &mut ChaCha8Rng::seed_from_u64(seed + 1), &h).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }
}
