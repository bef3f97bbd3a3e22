//! Non-neural operator selection: uniform random (RAN), the classic roulette
//! wheel driven by search outcomes (CRW) and the roulette wheel trained on
//! episode rewards (LRW).

use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::mdp::{EpisodeConfig, MdpEnv, Policy, State};
use crate::operators::{OperatorId, Portfolio};
use crate::{Error, Instance, Result, Solution};

/// Uniform draw from the valid operators.
pub fn ran_select<R: Rng + ?Sized>(valid: &[OperatorId], rng: &mut R) -> Result<OperatorId> {
    if valid.is_empty() {
        return Err(Error::EmptyActionSet);
    }
    Ok(valid[rng.gen_range(0..valid.len())])
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn select(&mut self, _state: &State<'_>, valid: &[OperatorId], rng: &mut dyn RngCore) -> Result<OperatorId> {
        ran_select(valid, rng)
    }
}

/// Score increments for the classic roulette wheel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreRule {
    pub global_best: f64,
    pub local_best: f64,
    pub accepted_worse: f64,
}

impl ScoreRule {
    pub fn new(global_best: f64, local_best: f64, accepted_worse: f64) -> Result<Self> {
        if !(global_best > local_best && local_best > accepted_worse && accepted_worse > 0.0) {
            return Err(Error::Config("score increments must satisfy d1 > d2 > d3 > 0"));
        }
        Ok(Self {
            global_best,
            local_best,
            accepted_worse,
        })
    }

    pub fn score(&self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::GlobalBest => self.global_best,
            Outcome::LocalBest => self.local_best,
            Outcome::AcceptedWorse => self.accepted_worse,
            Outcome::Rejected => 0.0,
        }
    }
}

impl Default for ScoreRule {
    fn default() -> Self {
        Self {
            global_best: 33.0,
            local_best: 13.0,
            accepted_worse: 9.0,
        }
    }
}

/// How an ALNS iteration ended for the operator pair that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    GlobalBest,
    LocalBest,
    AcceptedWorse,
    Rejected,
}

/// Weights, segment scores and usage counts for every portfolio operator.
#[derive(Debug, Clone, PartialEq)]
pub struct RouletteState {
    portfolio: Portfolio,
    weights: Vec<f64>,
    scores: Vec<f64>,
    counts: Vec<u32>,
    reaction: f64,
}

impl RouletteState {
    /// All weights start at 1.
    pub fn new(portfolio: Portfolio, reaction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&reaction) {
            return Err(Error::Config("reaction factor must lie in [0, 1]"));
        }
        let n = portfolio.len();
        Ok(Self {
            portfolio,
            weights: alloc::vec![1.0; n],
            scores: alloc::vec![0.0; n],
            counts: alloc::vec![0; n],
            reaction,
        })
    }

    pub fn portfolio(&self) -> &Portfolio {
        &self.portfolio
    }

    pub fn reaction(&self) -> f64 {
        self.reaction
    }

    /// Weights in portfolio action order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    fn index(&self, op: OperatorId) -> Result<usize> {
        self.portfolio.action_index(op).ok_or(Error::NotInPortfolio(op.name()))
    }

    pub fn weight(&self, op: OperatorId) -> Result<f64> {
        Ok(self.weights[self.index(op)?])
    }

    pub fn set_weight(&mut self, op: OperatorId, weight: f64) -> Result<()> {
        if !(weight > 0.0) {
            return Err(Error::NonPositiveWeight(weight));
        }
        let i = self.index(op)?;
        self.weights[i] = weight;
        Ok(())
    }

    /// Selection probabilities over `valid`, normalised within that subset.
    pub fn probabilities(&self, valid: &[OperatorId]) -> Result<Vec<f64>> {
        if valid.is_empty() {
            return Err(Error::EmptyActionSet);
        }
        let mut w = Vec::with_capacity(valid.len());
        for &op in valid {
            let x = self.weights[self.index(op)?];
            if !(x > 0.0) {
                return Err(Error::NonPositiveWeight(x));
            }
            w.push(x);
        }
        let total: f64 = w.iter().sum();
        Ok(w.into_iter().map(|x| x / total).collect())
    }

    /// Roulette-wheel draw proportional to weight among `valid`.
    pub fn select<R: Rng + ?Sized>(&self, valid: &[OperatorId], rng: &mut R) -> Result<OperatorId> {
        let probs = self.probabilities(valid)?;
        let mut u = rng.gen::<f64>();
        for (&op, p) in valid.iter().zip(&probs) {
            if u < *p {
                return Ok(op);
            }
            u -= p;
        }
        Ok(*valid.last().expect("non-empty"))
    }

    /// Adds `score` to an operator's segment score and `uses` to its count.
    pub fn credit(&mut self, op: OperatorId, score: f64, uses: u32) -> Result<()> {
        let i = self.index(op)?;
        self.scores[i] += score;
        self.counts[i] += uses;
        Ok(())
    }

    /// Classic scoring: both operators of the pair gain the outcome's
    /// increment and one use each.
    pub fn observe_pair(&mut self, destroy: OperatorId, repair: OperatorId, outcome: Outcome, rule: &ScoreRule) -> Result<()> {
        let s = rule.score(outcome);
        self.credit(destroy, s, 1)?;
        self.credit(repair, s, 1)
    }

    /// End-of-segment update: operators with a positive score move towards
    /// their mean score, the rest keep their weight. Scores and counts reset.
    pub fn update(&mut self) {
        for i in 0..self.weights.len() {
            if self.scores[i] > 0.0 {
                assert!(self.counts[i] > 0, "positive score without any use");
                let mean = self.scores[i] / f64::from(self.counts[i]);
                self.weights[i] = (1.0 - self.reaction) * self.weights[i] + self.reaction * mean;
            }
            self.scores[i] = 0.0;
            self.counts[i] = 0;
        }
    }
}

impl Policy for RouletteState {
    fn select(&mut self, _state: &State<'_>, valid: &[OperatorId], rng: &mut dyn RngCore) -> Result<OperatorId> {
        RouletteState::select(self, valid, rng)
    }
}

/// Trains roulette weights on whole episodes: after each episode every
/// operator used `k` times is credited `k * max(reward, 0)` over `k` uses and
/// the weights are updated.
pub fn train_lrw<R: RngCore>(
    inst: &Instance,
    train: &[Solution],
    portfolio: &Portfolio,
    config: EpisodeConfig,
    episodes: usize,
    reaction: f64,
    rng: &mut R,
) -> Result<RouletteState> {
    if train.is_empty() {
        return Err(Error::Config("training set is empty"));
    }
    if episodes == 0 {
        return Err(Error::Config("at least one training episode is required"));
    }
    let mut env = MdpEnv::new(inst, portfolio.clone(), config)?;
    let mut wheel = RouletteState::new(portfolio.clone(), reaction)?;
    for _ in 0..episodes {
        let start = &train[rng.gen_range(0..train.len())];
        let result = env.run_episode(start, &mut wheel, rng)?;
        credit_episode(&mut wheel, result.transitions.iter().map(|t| t.action), result.total_reward)?;
        wheel.update();
    }
    Ok(wheel)
}

/// Credits one finished episode to the wheel without updating the weights.
pub fn credit_episode(wheel: &mut RouletteState, actions: impl Iterator<Item = OperatorId>, reward: f64) -> Result<()> {
    let mut uses = alloc::vec![0u32; wheel.portfolio.len()];
    for op in actions {
        uses[wheel.index(op)?] += 1;
    }
    let gain = reward.max(0.0);
    for (i, &k) in uses.iter().enumerate() {
        if k > 0 {
            let op = wheel.portfolio.operator(i).expect("index within portfolio");
            wheel.credit(op, f64::from(k) * gain, k)?;
        }
    }
    Ok(())
}
