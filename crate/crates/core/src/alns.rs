//! Adaptive Large Neighbourhood Search with simulated-annealing acceptance,
//! driven by any operator selector.

use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::dqn::TrainedAgent;
use crate::math::{exp, ln};
use crate::mdp::{EpisodeConfig, Phase};
use crate::neural::encode;
use crate::operators::{apply_destroy, apply_repair, OperatorId, PairHistory, Portfolio};
use crate::selectors::{ran_select, Outcome, RouletteState, ScoreRule};
use crate::solution::{objective, validate_solution};
use crate::{Error, Instance, Result, Solution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlnsConfig {
    pub iterations: usize,
    pub segment: usize,
    pub score_rule: ScoreRule,
    pub reaction: f64,
    /// Initial temperature accepts a `w0`-worse solution with probability 1/2.
    pub w0: f64,
    pub cooling: f64,
    pub d: usize,
    /// Budget the DQN selector was trained with; drives its budget feature.
    pub budget: usize,
    pub tau: f64,
}

impl Default for AlnsConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            segment: 100,
            score_rule: ScoreRule::default(),
            reaction: 0.1,
            w0: 0.05,
            cooling: 0.9975,
            d: 4,
            budget: 10,
            tau: 0.01,
        }
    }
}

impl AlnsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.segment == 0 || self.budget == 0 {
            return Err(Error::Config("iterations, segment length and budget must be positive"));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::Config("cooling factor must lie in (0, 1)"));
        }
        if !(self.w0 >= 0.0) || !(self.tau > 0.0) {
            return Err(Error::Config("w0 must be non-negative and tau positive"));
        }
        Ok(())
    }

    pub fn initial_temperature(&self, start_cost: f64) -> f64 {
        self.w0 * start_cost / ln(2.0)
    }
}

/// Accept if not worse, else with probability `exp(-(new - cur) / T)`.
/// A non-positive temperature accepts improvements only.
pub fn sa_accept<R: Rng + ?Sized>(new: f64, cur: f64, temperature: f64, rng: &mut R) -> bool {
    if new <= cur {
        return true;
    }
    if temperature <= 0.0 {
        return false;
    }
    rng.gen::<f64>() < exp(-(new - cur) / temperature)
}

pub trait Acceptance {
    fn accept(&mut self, new: f64, cur: f64, temperature: f64, rng: &mut dyn RngCore) -> bool;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimulatedAnnealing;

impl Acceptance for SimulatedAnnealing {
    fn accept(&mut self, new: f64, cur: f64, temperature: f64, rng: &mut dyn RngCore) -> bool {
        sa_accept(new, cur, temperature, rng)
    }
}

/// Rejects every candidate.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysReject;

impl Acceptance for AlwaysReject {
    fn accept(&mut self, _: f64, _: f64, _: f64, _: &mut dyn RngCore) -> bool {
        false
    }
}

/// What a selector sees when asked for an operator.
pub struct SelectionContext<'a> {
    pub inst: &'a Instance,
    /// The incumbent before destroy, the partial solution before repair.
    pub solution: &'a Solution,
    pub phase: Phase,
    pub iteration: usize,
    pub portfolio: &'a Portfolio,
    pub config: &'a AlnsConfig,
}

pub trait OperatorSelector {
    fn select(&mut self, ctx: &SelectionContext<'_>, rng: &mut dyn RngCore) -> Result<OperatorId>;

    fn observe(&mut self, _destroy: OperatorId, _repair: OperatorId, _outcome: Outcome) -> Result<()> {
        Ok(())
    }

    fn end_segment(&mut self) {}
}

fn phase_ops(ctx: &SelectionContext<'_>) -> Vec<OperatorId> {
    match ctx.phase {
        Phase::Destroy => ctx.portfolio.destroy_ids(),
        Phase::Repair => ctx.portfolio.repair_ids(),
    }
}

/// Uniform choice (RAN).
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomSelector;

impl OperatorSelector for RandomSelector {
    fn select(&mut self, ctx: &SelectionContext<'_>, rng: &mut dyn RngCore) -> Result<OperatorId> {
        ran_select(&phase_ops(ctx), rng)
    }
}

/// Classic adaptive roulette wheel (CRW): scores from search outcomes,
/// weights updated at the end of every segment.
#[derive(Debug, Clone)]
pub struct AdaptiveRoulette {
    pub wheel: RouletteState,
    pub rule: ScoreRule,
}

impl AdaptiveRoulette {
    pub fn new(portfolio: Portfolio, cfg: &AlnsConfig) -> Result<Self> {
        Ok(Self {
            wheel: RouletteState::new(portfolio, cfg.reaction)?,
            rule: cfg.score_rule,
        })
    }
}

impl OperatorSelector for AdaptiveRoulette {
    fn select(&mut self, ctx: &SelectionContext<'_>, rng: &mut dyn RngCore) -> Result<OperatorId> {
        self.wheel.select(&phase_ops(ctx), rng)
    }

    fn observe(&mut self, destroy: OperatorId, repair: OperatorId, outcome: Outcome) -> Result<()> {
        self.wheel.observe_pair(destroy, repair, outcome, &self.rule)
    }

    fn end_segment(&mut self) {
        self.wheel.update();
    }
}

/// Roulette wheel with fixed weights (trained LRW).
#[derive(Debug, Clone)]
pub struct FrozenRoulette(pub RouletteState);

impl OperatorSelector for FrozenRoulette {
    fn select(&mut self, ctx: &SelectionContext<'_>, rng: &mut dyn RngCore) -> Result<OperatorId> {
        self.0.select(&phase_ops(ctx), rng)
    }
}

/// Softmax policy of a trained agent. The budget feature cycles
/// `b, b-1, …, 1` with the iteration index.
pub struct DqnSelector<'a> {
    pub agent: &'a TrainedAgent,
    pub tau: f64,
}

impl OperatorSelector for DqnSelector<'_> {
    fn select(&mut self, ctx: &SelectionContext<'_>, rng: &mut dyn RngCore) -> Result<OperatorId> {
        let b = ctx.config.budget;
        let remaining = b - ctx.iteration % b;
        let obs = encode(ctx.inst, ctx.solution, ctx.phase, remaining, EpisodeConfig::new(ctx.config.d, b));
        self.agent.act(&obs, ctx.phase, self.tau, rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlnsResult {
    pub best: Solution,
    pub best_cost: f64,
    pub final_cost: f64,
    /// Incumbent cost after each iteration.
    pub trajectory: Vec<f64>,
    /// Best cost after each iteration.
    pub best_trajectory: Vec<f64>,
    /// Candidate cost produced in each iteration.
    pub candidates: Vec<f64>,
    /// Times each portfolio operator was applied, in action order.
    pub usage: Vec<u32>,
    pub accepted: usize,
    pub segments: usize,
}

/// Runs exactly `cfg.iterations` destroy/repair iterations from `start`.
#[allow(clippy::too_many_arguments)]
pub fn run_alns<S, A, R>(
    inst: &Instance,
    start: &Solution,
    selector: &mut S,
    acceptance: &mut A,
    portfolio: &Portfolio,
    cfg: &AlnsConfig,
    rng: &mut R,
) -> Result<AlnsResult>
where
    S: OperatorSelector + ?Sized,
    A: Acceptance + ?Sized,
    R: RngCore,
{
    cfg.validate()?;
    EpisodeConfig::new(cfg.d, cfg.budget).check(inst)?;
    let violations = validate_solution(inst, start);
    if !violations.is_empty() {
        return Err(Error::InfeasibleStart(violations.len()));
    }
    let mut current = start.clone();
    let mut current_cost = objective(inst, start)?;
    let mut best = current.clone();
    let mut best_cost = current_cost;
    let mut history = PairHistory::new(inst);
    history.record(&current, current_cost);
    let mut temperature = cfg.initial_temperature(current_cost);

    let mut trajectory = Vec::with_capacity(cfg.iterations);
    let mut best_trajectory = Vec::with_capacity(cfg.iterations);
    let mut candidates = Vec::with_capacity(cfg.iterations);
    let mut usage = alloc::vec![0u32; portfolio.len()];
    let mut accepted = 0;
    let mut segments = 0;

    for iteration in 0..cfg.iterations {
        let mut ctx = SelectionContext {
            inst,
            solution: &current,
            phase: Phase::Destroy,
            iteration,
            portfolio,
            config: cfg,
        };
        let destroy = selector.select(&ctx, rng)?;
        let mut candidate = current.clone();
        apply_destroy(destroy, inst, &mut candidate, cfg.d, rng, &history)?;
        ctx.solution = &candidate;
        ctx.phase = Phase::Repair;
        let repair = selector.select(&ctx, rng)?;
        apply_repair(repair, inst, &mut candidate, rng)?;
        for op in [destroy, repair] {
            let i = portfolio.action_index(op).ok_or(Error::NotInPortfolio(op.name()))?;
            usage[i] += 1;
        }

        let cost = objective(inst, &candidate)?;
        candidates.push(cost);
        let outcome = if acceptance.accept(cost, current_cost, temperature, rng) {
            accepted += 1;
            let outcome = if cost < best_cost {
                Outcome::GlobalBest
            } else if cost < current_cost {
                Outcome::LocalBest
            } else {
                Outcome::AcceptedWorse
            };
            history.record(&candidate, cost);
            current = candidate;
            current_cost = cost;
            if cost < best_cost {
                best = current.clone();
                best_cost = cost;
            }
            outcome
        } else {
            Outcome::Rejected
        };
        selector.observe(destroy, repair, outcome)?;
        if (iteration + 1) % cfg.segment == 0 {
            selector.end_segment();
            segments += 1;
        }
        temperature *= cfg.cooling;
        trajectory.push(current_cost);
        best_trajectory.push(best_cost);
    }

    Ok(AlnsResult {
        best,
        best_cost,
        final_cost: current_cost,
        trajectory,
        best_trajectory,
        candidates,
        usage,
        accepted,
        segments,
    })
}
