//! The operator-selection MDP: alternate destroy and repair operators on a
//! solution under a fixed pair budget; the only reward is the terminal
//! improvement over the starting cost.

use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::operators::{apply_destroy, apply_repair, OperatorId, OperatorKind, PairHistory, Portfolio};
use crate::solution::{objective, validate_solution};
use crate::{Error, Instance, Result, Solution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeConfig {
    /// Destroy scale: customers removed per destroy step.
    pub d: usize,
    /// Operator-pair budget.
    pub budget: usize,
}

impl EpisodeConfig {
    pub fn new(d: usize, budget: usize) -> Self {
        Self { d, budget }
    }

    pub fn check(&self, inst: &Instance) -> Result<()> {
        if self.d == 0 || self.d > inst.n_customers() {
            return Err(Error::DestroyScale {
                d: self.d,
                routed: inst.n_customers(),
            });
        }
        if self.budget == 0 {
            return Err(Error::Config("operator pair budget must be at least 1"));
        }
        Ok(())
    }
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self { d: 4, budget: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Destroy,
    Repair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct State<'a> {
    inst: &'a Instance,
    solution: Solution,
    phase: Phase,
    budget_remaining: usize,
    config: EpisodeConfig,
    initial_cost: f64,
    step_index: usize,
}

impl<'a> State<'a> {
    pub fn instance(&self) -> &'a Instance {
        self.inst
    }

    pub fn solution(&self) -> &Solution {
        &self.solution
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn budget_remaining(&self) -> usize {
        self.budget_remaining
    }

    pub fn config(&self) -> EpisodeConfig {
        self.config
    }

    pub fn initial_cost(&self) -> f64 {
        self.initial_cost
    }

    /// Number of operators applied so far.
    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn is_terminal(&self) -> bool {
        self.budget_remaining == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<'a> {
    pub next: State<'a>,
    pub reward: f64,
    pub terminal: bool,
}

/// One `(s, a, r, s')` record of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<'a> {
    pub state: State<'a>,
    pub action: OperatorId,
    pub reward: f64,
    pub next: State<'a>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult<'a> {
    pub total_reward: f64,
    pub final_solution: Solution,
    pub transitions: Vec<Transition<'a>>,
}

/// Chooses an operator among the valid ones for a state.
pub trait Policy {
    fn select(&mut self, state: &State<'_>, valid: &[OperatorId], rng: &mut dyn RngCore) -> Result<OperatorId>;
}

impl<P: Policy + ?Sized> Policy for &mut P {
    fn select(&mut self, state: &State<'_>, valid: &[OperatorId], rng: &mut dyn RngCore) -> Result<OperatorId> {
        (**self).select(state, valid, rng)
    }
}

/// Environment bound to one instance and portfolio. Owns the edge history,
/// which is reset at the start of every episode.
#[derive(Debug, Clone)]
pub struct MdpEnv<'a> {
    inst: &'a Instance,
    portfolio: Portfolio,
    config: EpisodeConfig,
    history: PairHistory,
}

impl<'a> MdpEnv<'a> {
    pub fn new(inst: &'a Instance, portfolio: Portfolio, config: EpisodeConfig) -> Result<Self> {
        config.check(inst)?;
        Ok(Self {
            inst,
            portfolio,
            config,
            history: PairHistory::new(inst),
        })
    }

    pub fn instance(&self) -> &'a Instance {
        self.inst
    }

    pub fn portfolio(&self) -> &Portfolio {
        &self.portfolio
    }

    pub fn config(&self) -> EpisodeConfig {
        self.config
    }

    pub fn history(&self) -> &PairHistory {
        &self.history
    }

    /// Starts an episode from a complete, feasible solution.
    pub fn reset(&mut self, start: &Solution) -> Result<State<'a>> {
        let violations = validate_solution(self.inst, start);
        if !violations.is_empty() {
            return Err(Error::InfeasibleStart(violations.len()));
        }
        let initial_cost = objective(self.inst, start)?;
        self.history.clear();
        self.history.record(start, initial_cost);
        Ok(State {
            inst: self.inst,
            solution: start.clone(),
            phase: Phase::Destroy,
            budget_remaining: self.config.budget,
            config: self.config,
            initial_cost,
            step_index: 0,
        })
    }

    pub fn valid_actions(&self, state: &State<'_>) -> Vec<OperatorId> {
        if state.is_terminal() {
            return Vec::new();
        }
        match state.phase {
            Phase::Destroy => self.portfolio.destroy_ids(),
            Phase::Repair => self.portfolio.repair_ids(),
        }
    }

    pub fn step<R: Rng + ?Sized>(&mut self, state: &State<'a>, action: OperatorId, rng: &mut R) -> Result<StepOutcome<'a>> {
        if state.is_terminal() {
            return Err(Error::EpisodeTerminated);
        }
        let expected = match state.phase {
            Phase::Destroy => OperatorKind::Destroy,
            Phase::Repair => OperatorKind::Repair,
        };
        if action.kind() != expected || self.portfolio.action_index(action).is_none() {
            return Err(Error::InvalidAction(action.name()));
        }
        let mut next = state.clone();
        next.step_index += 1;
        match state.phase {
            Phase::Destroy => {
                apply_destroy(action, self.inst, &mut next.solution, self.config.d, rng, &self.history)?;
                next.phase = Phase::Repair;
                Ok(StepOutcome {
                    next,
                    reward: 0.0,
                    terminal: false,
                })
            }
            Phase::Repair => {
                apply_repair(action, self.inst, &mut next.solution, rng)?;
                next.phase = Phase::Destroy;
                next.budget_remaining -= 1;
                let cost = objective(self.inst, &next.solution)?;
                self.history.record(&next.solution, cost);
                let terminal = next.budget_remaining == 0;
                let reward = if terminal { state.initial_cost - cost } else { 0.0 };
                Ok(StepOutcome { next, reward, terminal })
            }
        }
    }

    /// Runs a full episode of exactly `2 * budget` operator applications.
    pub fn run_episode<P, R>(&mut self, start: &Solution, policy: &mut P, rng: &mut R) -> Result<EpisodeResult<'a>>
    where
        P: Policy + ?Sized,
        R: RngCore,
    {
        let mut state = self.reset(start)?;
        let mut transitions = Vec::with_capacity(2 * self.config.budget);
        let mut total_reward = 0.0;
        while !state.is_terminal() {
            let valid = self.valid_actions(&state);
            let action = policy.select(&state, &valid, rng)?;
            let outcome = self.step(&state, action, rng)?;
            total_reward += outcome.reward;
            transitions.push(Transition {
                state,
                action,
                reward: outcome.reward,
                next: outcome.next.clone(),
            });
            state = outcome.next;
        }
        Ok(EpisodeResult {
            total_reward,
            final_solution: state.solution,
            transitions,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{DestroyOp, RepairOp};
    use crate::selectors::RandomPolicy;
    use crate::solution::random_initial_solution;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Nine customers laid out so the routes of the illustrated episode make
    /// sense; coordinates are arbitrary.
    fn nine() -> Instance {
        let mut rows = vec![(50.0, 50.0, 0u32)];
        for i in 0..9 {
            let angle = i as f64 * 0.7;
            rows.push((50.0 + 30.0 * libm::cos(angle), 50.0 + 30.0 * libm::sin(angle), 5));
        }
        Instance::new("nine", &rows, 20).unwrap()
    }

    fn figure_start(inst: &Instance) -> Solution {
        Solution::from_tours(inst, vec![vec![1], vec![2, 4], vec![3, 5, 8, 6], vec![7, 9]]).unwrap()
    }

    struct Scripted(Vec<OperatorId>, usize);

    impl Policy for Scripted {
        fn select(&mut self, _: &State<'_>, _: &[OperatorId], _: &mut dyn RngCore) -> Result<OperatorId> {
            self.1 += 1;
            Ok(self.0[(self.1 - 1) % self.0.len()])
        }
    }

    #[test]
    fn illustrated_episode() {
        let inst = nine();
        let portfolio = Portfolio::build(3).unwrap();
        let mut env = MdpEnv::new(&inst, portfolio, EpisodeConfig::new(3, 3)).unwrap();
        let start = figure_start(&inst);
        let s0 = env.reset(&start).unwrap();
        assert!(s0.solution().removal_list().is_empty());
        assert_eq!(s0.budget_remaining(), 3);
        assert_eq!(s0.phase(), Phase::Destroy);
        assert_eq!(env.reset(&start).unwrap(), s0);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = env
            .step(&s0, OperatorId::Destroy(DestroyOp::RandomNode), &mut rng)
            .unwrap();
        assert_eq!(out.next.solution().removal_list().len(), 3);
        assert_eq!(out.reward, 0.0);
        assert!(!out.terminal);
        assert_eq!(env.valid_actions(&out.next).len(), 2);

        let mut policy = Scripted(
            vec![
                OperatorId::Destroy(DestroyOp::WorstNode),
                OperatorId::Repair(RepairOp::Greedy),
            ],
            0,
        );
        let result = env.run_episode(&start, &mut policy, &mut rng).unwrap();
        assert_eq!(result.transitions.len(), 6);
        let last = result.transitions.last().unwrap();
        assert_eq!(last.next.step_index(), 6);
        assert!(last.next.is_terminal());
        assert!(env.valid_actions(&last.next).is_empty());
        let fresh = objective(&inst, &result.final_solution).unwrap();
        assert!((result.total_reward - (s0.initial_cost() - fresh)).abs() < 1e-9);
    }

    #[test]
    fn rejects_wrong_phase_and_bad_start() {
        let inst = nine();
        let mut env = MdpEnv::new(&inst, Portfolio::build(3).unwrap(), EpisodeConfig::new(3, 3)).unwrap();
        let s0 = env.reset(&figure_start(&inst)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            env.step(&s0, OperatorId::Repair(RepairOp::Greedy), &mut rng),
            Err(Error::InvalidAction(_))
        ));
        assert!(matches!(
            env.step(&s0, OperatorId::Destroy(DestroyOp::Zone), &mut rng),
            Err(Error::InvalidAction(_))
        ));
        let partial = Solution::from_tours(&inst, vec![vec![1, 2, 3], vec![4, 5, 6, 7, 8]]).unwrap();
        assert!(matches!(env.reset(&partial), Err(Error::InfeasibleStart(_))));
        assert!(MdpEnv::new(&inst, Portfolio::build(3).unwrap(), EpisodeConfig::new(10, 3)).is_err());
        assert!(MdpEnv::new(&inst, Portfolio::build(3).unwrap(), EpisodeConfig::new(2, 0)).is_err());
    }

    #[test]
    fn random_episodes_alternate_and_stay_feasible() {
        let inst = nine();
        let mut env = MdpEnv::new(&inst, Portfolio::build(12).unwrap(), EpisodeConfig::new(3, 10)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let start = random_initial_solution(&inst, &mut rng).unwrap();
            let result = env.run_episode(&start, &mut RandomPolicy, &mut rng).unwrap();
            assert_eq!(result.transitions.len(), 20);
            assert!(validate_solution(&inst, &result.final_solution).is_empty());
            for (i, t) in result.transitions.iter().enumerate() {
                let expected = if i % 2 == 0 { Phase::Destroy } else { Phase::Repair };
                assert_eq!(t.state.phase(), expected);
                assert_eq!(t.state.budget_remaining(), 10 - i / 2);
                if i + 1 < result.transitions.len() {
                    assert_eq!(t.reward, 0.0);
                }
            }
            let fresh = objective(&inst, &result.final_solution).unwrap();
            let initial = objective(&inst, &start).unwrap();
            assert!((result.total_reward - (initial - fresh)).abs() < 1e-9);
        }
    }

    #[test]
    fn unchanged_cost_gives_zero_reward() {
        // One customer: any destroy/repair pair rebuilds the same tour.
        let inst = Instance::new("one", &[(0.0, 0.0, 0), (3.0, 4.0, 1)], 5).unwrap();
        let mut env = MdpEnv::new(&inst, Portfolio::build(2).unwrap(), EpisodeConfig::new(1, 2)).unwrap();
        let start = Solution::from_tours(&inst, vec![vec![1]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let result = env.run_episode(&start, &mut RandomPolicy, &mut rng).unwrap();
        assert_eq!(result.total_reward, 0.0);
    }
}
