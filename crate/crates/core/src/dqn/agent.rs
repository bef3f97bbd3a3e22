use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{greedy_action, softmax_action, train_loop, DqnConfig, EnvStep, TrainingEnv, TrainingReport};
use crate::mdp::{EpisodeConfig, MdpEnv, Phase, Policy, State};
use crate::neural::{action_mask, encode_state, MaskedQ, NetworkConfig, Observation, QNetwork};
use crate::operators::{OperatorId, Portfolio};
use crate::{Error, Instance, Result, Solution};

/// The operator-selection MDP seen as a [`TrainingEnv`]; every episode
/// starts from a uniformly drawn solution of `starts`.
pub struct CvrpTrainingEnv<'a> {
    env: MdpEnv<'a>,
    starts: &'a [Solution],
    state: Option<State<'a>>,
}

impl<'a> CvrpTrainingEnv<'a> {
    pub fn new(inst: &'a Instance, portfolio: Portfolio, config: EpisodeConfig, starts: &'a [Solution]) -> Result<Self> {
        if starts.is_empty() {
            return Err(Error::Config("training set is empty"));
        }
        Ok(Self {
            env: MdpEnv::new(inst, portfolio, config)?,
            starts,
            state: None,
        })
    }

    fn observe(&self, state: &State<'_>) -> (Observation, Vec<bool>) {
        (encode_state(state), action_mask(self.env.portfolio(), state.phase()))
    }
}

impl TrainingEnv for CvrpTrainingEnv<'_> {
    fn reset(&mut self, rng: &mut dyn RngCore) -> Result<(Observation, Vec<bool>)> {
        let start = &self.starts[rng.gen_range(0..self.starts.len())];
        let state = self.env.reset(start)?;
        let out = self.observe(&state);
        self.state = Some(state);
        Ok(out)
    }

    fn step(&mut self, action: usize, rng: &mut dyn RngCore) -> Result<EnvStep> {
        let state = self.state.take().ok_or(Error::EpisodeTerminated)?;
        let op = self
            .env
            .portfolio()
            .operator(action)
            .ok_or(Error::InvalidAction("action index outside the portfolio"))?;
        let out = self.env.step(&state, op, rng)?;
        let (obs, mask) = self.observe(&out.next);
        if !out.terminal {
            self.state = Some(out.next);
        }
        Ok(EnvStep {
            reward: out.reward,
            obs,
            mask,
            terminal: out.terminal,
        })
    }
}

/// A trained Q-network bound to its portfolio and inference temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedAgent {
    pub network: QNetwork,
    pub portfolio: Portfolio,
    pub tau: f64,
    pub value_scale: f64,
    /// Best mean validation reward, if validation ran.
    pub validation_score: Option<f64>,
}

impl TrainedAgent {
    /// Q-values in reward units with the phase mask.
    pub fn q_for(&self, obs: &Observation, phase: Phase) -> Result<MaskedQ> {
        let mut q = self.network.q_for(obs, &self.portfolio, phase)?;
        q.values.iter_mut().for_each(|v| *v *= self.value_scale);
        Ok(q)
    }

    pub fn q_values(&self, state: &State<'_>) -> Result<MaskedQ> {
        self.q_for(&encode_state(state), state.phase())
    }

    /// Softmax draw at temperature `tau`.
    pub fn act<R: Rng + ?Sized>(&self, obs: &Observation, phase: Phase, tau: f64, rng: &mut R) -> Result<OperatorId> {
        let q = self.q_for(obs, phase)?;
        let i = softmax_action(&q.values, &q.valid, tau, rng)?;
        Ok(self.portfolio.operator(i).expect("masked index within portfolio"))
    }

    pub fn act_greedy(&self, obs: &Observation, phase: Phase) -> Result<OperatorId> {
        let q = self.q_for(obs, phase)?;
        let i = greedy_action(&q.values, &q.valid)?;
        Ok(self.portfolio.operator(i).expect("masked index within portfolio"))
    }

    pub fn softmax_policy(&self) -> SoftmaxPolicy<'_> {
        SoftmaxPolicy { agent: self, tau: self.tau }
    }

    pub fn greedy_policy(&self) -> GreedyPolicy<'_> {
        GreedyPolicy { agent: self }
    }
}

fn checked(op: OperatorId, valid: &[OperatorId]) -> Result<OperatorId> {
    if valid.contains(&op) {
        Ok(op)
    } else {
        Err(Error::InvalidAction(op.name()))
    }
}

pub struct SoftmaxPolicy<'a> {
    pub agent: &'a TrainedAgent,
    pub tau: f64,
}

impl Policy for SoftmaxPolicy<'_> {
    fn select(&mut self, state: &State<'_>, valid: &[OperatorId], rng: &mut dyn RngCore) -> Result<OperatorId> {
        let op = self.agent.act(&encode_state(state), state.phase(), self.tau, rng)?;
        checked(op, valid)
    }
}

pub struct GreedyPolicy<'a> {
    pub agent: &'a TrainedAgent,
}

impl Policy for GreedyPolicy<'_> {
    fn select(&mut self, state: &State<'_>, valid: &[OperatorId], _rng: &mut dyn RngCore) -> Result<OperatorId> {
        let op = self.agent.act_greedy(&encode_state(state), state.phase())?;
        checked(op, valid)
    }
}

/// Cumulative reward of one episode from every start, in order.
pub fn evaluate_policy<P, R>(
    inst: &Instance,
    portfolio: &Portfolio,
    config: EpisodeConfig,
    starts: &[Solution],
    policy: &mut P,
    rng: &mut R,
) -> Result<Vec<f64>>
where
    P: Policy + ?Sized,
    R: RngCore,
{
    let mut env = MdpEnv::new(inst, portfolio.clone(), config)?;
    starts
        .iter()
        .map(|s| env.run_episode(s, policy, rng).map(|r| r.total_reward))
        .collect()
}

/// Trains a DQN agent on `train` and selects the checkpoint with the best
/// greedy mean reward on `validate`. Validation episodes reuse one fixed
/// random stream so checkpoints are compared on equal terms.
#[allow(clippy::too_many_arguments)]
pub fn train_dqn<R: RngCore>(
    inst: &Instance,
    train: &[Solution],
    validate: &[Solution],
    portfolio: &Portfolio,
    episode: EpisodeConfig,
    cfg: &DqnConfig,
    network: NetworkConfig,
    rng: &mut R,
) -> Result<(TrainedAgent, TrainingReport)> {
    if network.outputs != portfolio.len() {
        return Err(Error::Shape(alloc::format!(
            "network has {} outputs, portfolio has {} operators",
            network.outputs,
            portfolio.len()
        )));
    }
    if validate.is_empty() {
        return Err(Error::Config("validation set is empty"));
    }
    let net = QNetwork::new(network, rng)?;
    let validation_seed = rng.next_u64();
    let mut env = CvrpTrainingEnv::new(inst, portfolio.clone(), episode, train)?;
    let report = train_loop(&mut env, net, cfg, rng, |net, scale| {
        let agent = TrainedAgent {
            network: net.clone(),
            portfolio: portfolio.clone(),
            tau: cfg.tau,
            value_scale: scale,
            validation_score: None,
        };
        let mut vrng = ChaCha8Rng::seed_from_u64(validation_seed);
        let rewards = evaluate_policy(inst, portfolio, episode, validate, &mut agent.greedy_policy(), &mut vrng)?;
        Ok(rewards.iter().sum::<f64>() / rewards.len() as f64)
    })?;
    let agent = TrainedAgent {
        network: report.best.clone(),
        portfolio: portfolio.clone(),
        tau: cfg.tau,
        value_scale: cfg.value_scale,
        validation_score: report.best_score,
    };
    Ok((agent, report))
}
