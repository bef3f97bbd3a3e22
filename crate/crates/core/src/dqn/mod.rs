//! Deep Q-learning: replay buffer, target network, epsilon-greedy training
//! and the temperature-softmax policy used at inference.

mod agent;

use alloc::vec::Vec;

use rand::Rng;

use crate::math::exp;
use crate::neural::{Adam, Observation, QNetwork};
use crate::{Error, Result};

pub use agent::{evaluate_policy, train_dqn, CvrpTrainingEnv, GreedyPolicy, SoftmaxPolicy, TrainedAgent};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DqnConfig {
    /// Environment steps (operator selections).
    pub total_steps: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Share of `total_steps` over which epsilon decays linearly.
    pub epsilon_decay_fraction: f64,
    /// Replay capacity as a share of `total_steps`.
    pub replay_fraction: f64,
    pub batch_size: usize,
    pub target_sync: usize,
    pub gamma: f64,
    /// Softmax temperature at inference.
    pub tau: f64,
    pub validation_period: usize,
    pub learning_rate: f64,
    /// The network regresses `Q / value_scale`; Q-values handed to policies
    /// are in reward units.
    pub value_scale: f64,
}

impl DqnConfig {
    pub fn with_steps(total_steps: usize) -> Self {
        Self {
            total_steps,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_decay_fraction: 0.1,
            replay_fraction: 0.2,
            batch_size: 64,
            target_sync: 100,
            gamma: 1.0,
            tau: 0.01,
            validation_period: 1000,
            learning_rate: Adam::DEFAULT_LR,
            value_scale: 1.0,
        }
    }

    /// 15 000 steps.
    pub fn mlp() -> Self {
        Self::with_steps(15_000)
    }

    /// 25 000 steps.
    pub fn gat() -> Self {
        Self::with_steps(25_000)
    }

    pub fn replay_capacity(&self) -> usize {
        (libm::round(self.total_steps as f64 * self.replay_fraction) as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_steps == 0 || self.batch_size == 0 || self.target_sync == 0 || self.validation_period == 0 {
            return Err(Error::Config("step counts, batch size and periods must be positive"));
        }
        if !(self.tau > 0.0) || !(self.value_scale > 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::Config("tau, value scale and learning rate must be positive"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config("gamma must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Linear decay from `epsilon_start` to `epsilon_end` over the first
/// `epsilon_decay_fraction` of training, constant afterwards.
pub fn epsilon_at(step: usize, cfg: &DqnConfig) -> f64 {
    let window = cfg.epsilon_decay_fraction * cfg.total_steps as f64;
    if window <= 0.0 || step as f64 >= window {
        return cfg.epsilon_end;
    }
    let frac = step as f64 / window;
    cfg.epsilon_start + frac * (cfg.epsilon_end - cfg.epsilon_start)
}

/// `r` for terminal transitions, else `r + γ · max_valid Q'`.
pub fn td_target(reward: f64, terminal: bool, next_q: &[f64], next_mask: &[bool], gamma: f64) -> Result<f64> {
    if terminal {
        return Ok(reward);
    }
    let best = next_q
        .iter()
        .zip(next_mask)
        .filter(|(_, &ok)| ok)
        .map(|(&q, _)| q)
        .fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return Err(Error::EmptyActionSet);
    }
    Ok(reward + gamma * best)
}

/// Valid argmax; ties go to the lowest index.
pub fn greedy_action(q: &[f64], mask: &[bool]) -> Result<usize> {
    let mut best: Option<usize> = None;
    for (i, (&v, &ok)) in q.iter().zip(mask).enumerate() {
        if ok && best.map_or(true, |b| v > q[b]) {
            best = Some(i);
        }
    }
    best.ok_or(Error::EmptyActionSet)
}

/// `exp(Q / τ)` normalised over the valid entries; masked entries get 0.
pub fn softmax_probs(q: &[f64], mask: &[bool], tau: f64) -> Result<Vec<f64>> {
    let max = q
        .iter()
        .zip(mask)
        .filter(|(_, &ok)| ok)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::EmptyActionSet);
    }
    let mut p: Vec<f64> = q
        .iter()
        .zip(mask)
        .map(|(&v, &ok)| if ok { exp((v - max) / tau) } else { 0.0 })
        .collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    Ok(p)
}

pub fn softmax_action<R: Rng + ?Sized>(q: &[f64], mask: &[bool], tau: f64, rng: &mut R) -> Result<usize> {
    let p = softmax_probs(q, mask, tau)?;
    let mut u = rng.gen::<f64>();
    let mut last = 0;
    for (i, &pi) in p.iter().enumerate() {
        if pi > 0.0 {
            if u < pi {
                return Ok(i);
            }
            u -= pi;
            last = i;
        }
    }
    Ok(last)
}

/// Uniform over valid actions with probability `epsilon`, greedy otherwise.
pub fn epsilon_greedy_action<R: Rng + ?Sized>(q: &[f64], mask: &[bool], epsilon: f64, rng: &mut R) -> Result<usize> {
    if rng.gen::<f64>() < epsilon {
        let valid: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
        if valid.is_empty() {
            return Err(Error::EmptyActionSet);
        }
        Ok(valid[rng.gen_range(0..valid.len())])
    } else {
        greedy_action(q, mask)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub obs: Observation,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Observation,
    pub terminal: bool,
    pub next_mask: Vec<bool>,
}

/// Fixed-capacity ring buffer; the oldest entry is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: Vec<T>,
    next: usize,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::with_capacity(capacity),
            next: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.next] = item;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.items.iter()
    }

    /// `k` distinct entries drawn uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<&T> {
        rand::seq::index::sample(rng, self.items.len(), k.min(self.items.len()))
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}

/// Online and target networks with their optimizer.
#[derive(Debug, Clone)]
pub struct Learner {
    online: QNetwork,
    target: QNetwork,
    adam: Adam,
    gamma: f64,
    value_scale: f64,
}

impl Learner {
    pub fn new(network: QNetwork, cfg: &DqnConfig) -> Self {
        Self {
            adam: Adam::new(network.params(), cfg.learning_rate),
            target: network.clone(),
            online: network,
            gamma: cfg.gamma,
            value_scale: cfg.value_scale,
        }
    }

    pub fn online(&self) -> &QNetwork {
        &self.online
    }

    pub fn target(&self) -> &QNetwork {
        &self.target
    }

    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
    }

    /// Regression targets in network units.
    pub fn targets(&self, batch: &[&Experience]) -> Result<Vec<f64>> {
        let live: Vec<&Observation> = batch.iter().filter(|e| !e.terminal).map(|e| &e.next_obs).collect();
        let next = if live.is_empty() { None } else { Some(self.target.forward_batch(&live)?) };
        let mut k = 0;
        let mut out = Vec::with_capacity(batch.len());
        for e in batch {
            let r = e.reward / self.value_scale;
            if e.terminal {
                out.push(r);
            } else {
                let q = next.as_ref().expect("live batch").output(k);
                k += 1;
                out.push(td_target(r, false, q, &e.next_mask, self.gamma)?);
            }
        }
        Ok(out)
    }

    /// One Adam step on the mean squared TD error of the chosen actions.
    /// Returns the loss before the step.
    pub fn update(&mut self, batch: &[&Experience]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Config("empty training batch"));
        }
        let y = self.targets(batch)?;
        let obs: Vec<&Observation> = batch.iter().map(|e| &e.obs).collect();
        let tape = self.online.forward_batch(&obs)?;
        let width = self.online.config().outputs;
        let mut grad = alloc::vec![0.0; tape.outputs().len()];
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for (s, e) in batch.iter().enumerate() {
            let err = tape.output(s)[e.action] - y[s];
            loss += err * err * scale;
            grad[s * width + e.action] = 2.0 * err * scale;
        }
        let grads = self.online.backward(&tape, &grad)?;
        self.adam.step(self.online.params_mut(), &grads)?;
        Ok(loss)
    }

    /// Q-values of the online network in reward units.
    pub fn q(&self, obs: &Observation) -> Result<Vec<f64>> {
        let mut q = self.online.forward(obs)?;
        q.iter_mut().for_each(|v| *v *= self.value_scale);
        Ok(q)
    }
}

/// An episodic environment with a fixed discrete action set.
pub trait TrainingEnv {
    /// Starts an episode; returns the first observation and its action mask.
    fn reset(&mut self, rng: &mut dyn rand::RngCore) -> Result<(Observation, Vec<bool>)>;
    fn step(&mut self, action: usize, rng: &mut dyn rand::RngCore) -> Result<EnvStep>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub reward: f64,
    pub obs: Observation,
    pub mask: Vec<bool>,
    pub terminal: bool,
}

#[derive(Debug, Clone)]
pub struct TrainingReport {
    /// Online network with the best validation score (final network when
    /// no validation ran).
    pub best: QNetwork,
    pub best_score: Option<f64>,
    /// `(step, score)` for each validation.
    pub validations: Vec<(usize, f64)>,
    pub losses: Vec<f64>,
    pub episodes: usize,
}

/// The DQN loop: epsilon-greedy acting, one update per environment step once
/// the buffer holds a batch, target sync every `target_sync` steps and
/// model selection by `validate` every `validation_period` steps.
pub fn train_loop<E, R, V>(env: &mut E, network: QNetwork, cfg: &DqnConfig, rng: &mut R, mut validate: V) -> Result<TrainingReport>
where
    E: TrainingEnv + ?Sized,
    R: rand::RngCore,
    V: FnMut(&QNetwork, f64) -> Result<f64>,
{
    cfg.validate()?;
    let mut learner = Learner::new(network, cfg);
    let mut buffer = ReplayBuffer::new(cfg.replay_capacity());
    let mut best: Option<(f64, QNetwork)> = None;
    let mut validations = Vec::new();
    let mut losses = Vec::new();
    let (mut obs, mut mask) = env.reset(rng)?;
    let mut episodes = 0;
    for step in 0..cfg.total_steps {
        let eps = epsilon_at(step, cfg);
        let q = learner.online.forward(&obs)?;
        let action = epsilon_greedy_action(&q, &mask, eps, rng)?;
        let out = env.step(action, rng)?;
        let next = if out.terminal {
            None
        } else {
            Some((out.obs.clone(), out.mask.clone()))
        };
        buffer.push(Experience {
            obs,
            action,
            reward: out.reward,
            next_obs: out.obs,
            terminal: out.terminal,
            next_mask: out.mask,
        });
        if buffer.len() >= cfg.batch_size {
            let batch = buffer.sample(cfg.batch_size, rng);
            losses.push(learner.update(&batch)?);
        }
        if (step + 1) % cfg.target_sync == 0 {
            learner.sync_target();
        }
        if (step + 1) % cfg.validation_period == 0 {
            let score = validate(&learner.online, cfg.value_scale)?;
            validations.push((step + 1, score));
            if best.as_ref().map_or(true, |(b, _)| score > *b) {
                best = Some((score, learner.online.clone()));
            }
        }
        match next {
            Some((o, m)) => {
                obs = o;
                mask = m;
            }
            None => {
                episodes += 1;
                let (o, m) = env.reset(rng)?;
                obs = o;
                mask = m;
            }
        }
    }
    let (best_score, best) = match best {
        Some((s, net)) => (Some(s), net),
        None => (None, learner.online),
    };
    Ok(TrainingReport {
        best,
        best_score,
        validations,
        losses,
        episodes,
    })
}
