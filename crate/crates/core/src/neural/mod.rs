//! Q-value function approximators with hand-written reverse mode, the Adam
//! optimizer and the state encoder.

mod adam;
pub mod checkpoint;
mod encode;
mod gat;
mod kernels;
mod mlp;
mod params;

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

pub use adam::Adam;
pub use encode::{encode, encode_state, Observation, GLOBAL_FEATURES, NODE_FEATURES};
pub use params::{ParamArray, Parameters};

use crate::mdp::{Phase, State};
use crate::operators::{OperatorKind, Portfolio};
use crate::{Error, Result};

use gat::{GatDims, GatTape};
use mlp::MlpTape;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Architecture {
    /// Fixed-size input: all node rows of an `nodes`-node graph plus globals.
    Mlp { nodes: usize, hidden: Vec<usize> },
    Gat { layers: usize, embed: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkConfig {
    pub arch: Architecture,
    pub node_features: usize,
    pub global_features: usize,
    /// `|D| + |R|`.
    pub outputs: usize,
}

impl NetworkConfig {
    /// Hidden layers 256/128/64.
    pub fn mlp(nodes: usize, outputs: usize) -> Self {
        Self {
            arch: Architecture::Mlp {
                nodes,
                hidden: alloc::vec![256, 128, 64],
            },
            node_features: NODE_FEATURES,
            global_features: GLOBAL_FEATURES,
            outputs,
        }
    }

    /// Three attention layers with 32-wide embeddings.
    pub fn gat(outputs: usize) -> Self {
        Self {
            arch: Architecture::Gat { layers: 3, embed: 32 },
            node_features: NODE_FEATURES,
            global_features: GLOBAL_FEATURES,
            outputs,
        }
    }

    pub fn is_mlp(&self) -> bool {
        matches!(self.arch, Architecture::Mlp { .. })
    }

    /// Flat input width of the MLP; `None` for the graph network.
    pub fn input_width(&self) -> Option<usize> {
        match self.arch {
            Architecture::Mlp { nodes, .. } => Some(nodes * self.node_features + self.global_features),
            Architecture::Gat { .. } => None,
        }
    }

    fn mlp_widths(&self) -> Vec<usize> {
        match &self.arch {
            Architecture::Mlp { hidden, .. } => {
                let mut w = alloc::vec![self.input_width().expect("mlp")];
                w.extend_from_slice(hidden);
                w.push(self.outputs);
                w
            }
            Architecture::Gat { .. } => unreachable!("not an mlp"),
        }
    }

    fn gat_dims(&self) -> GatDims {
        match self.arch {
            Architecture::Gat { layers, embed } => GatDims {
                node_features: self.node_features,
                global_features: self.global_features,
                embed,
                layers,
                outputs: self.outputs,
            },
            Architecture::Mlp { .. } => unreachable!("not a gat"),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.outputs > 0
            && self.node_features > 0
            && match &self.arch {
                Architecture::Mlp { nodes, hidden } => *nodes > 0 && hidden.iter().all(|&h| h > 0),
                Architecture::Gat { layers, embed } => *layers > 0 && *embed > 0,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("network dimensions must be positive"))
        }
    }
}

/// Glorot-uniform initialisation.
fn glorot<R: Rng + ?Sized>(data: &mut [f64], fan_in: usize, fan_out: usize, rng: &mut R) {
    let limit = crate::math::sqrt(6.0 / (fan_in + fan_out) as f64);
    for x in data {
        *x = rng.gen_range(-limit..limit);
    }
}

/// Forward intermediates of a batch, needed by [`QNetwork::backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    outputs: Vec<f64>,
    width: usize,
    inner: TapeInner,
}

#[derive(Debug, Clone)]
enum TapeInner {
    Mlp(MlpTape),
    Gat(Vec<GatTape>),
}

impl Tape {
    /// Q-values, `batch × outputs` row-major.
    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn output(&self, sample: usize) -> &[f64] {
        &self.outputs[sample * self.width..(sample + 1) * self.width]
    }

    pub fn batch(&self) -> usize {
        self.outputs.len() / self.width
    }
}

/// Q-values of a state with the wrong-phase entries flagged invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedQ {
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl MaskedQ {
    /// Highest valid entry; ties go to the lowest index.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, (&q, &ok)) in self.values.iter().zip(&self.valid).enumerate() {
            if ok && best.map_or(true, |b| q > self.values[b]) {
                best = Some(i);
            }
        }
        best
    }
}

/// Portfolio action indices allowed in `phase`.
pub fn action_mask(portfolio: &Portfolio, phase: Phase) -> Vec<bool> {
    let want = match phase {
        Phase::Destroy => OperatorKind::Destroy,
        Phase::Repair => OperatorKind::Repair,
    };
    portfolio.operators().iter().map(|op| op.kind() == want).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    config: NetworkConfig,
    params: Parameters,
}

impl QNetwork {
    pub fn new<R: Rng + ?Sized>(config: NetworkConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let arrays = if config.is_mlp() {
            mlp::init(&config.mlp_widths(), rng)
        } else {
            gat::init(config.gat_dims(), rng)
        };
        Ok(Self {
            config,
            params: Parameters::new(arrays),
        })
    }

    /// Wraps existing parameters after checking their layout against `config`.
    pub fn from_parameters(config: NetworkConfig, params: Parameters) -> Result<Self> {
        let reference = Self::new(config, &mut rand::rngs::mock::StepRng::new(0, 1))?;
        reference.params.check_layout(&params)?;
        Ok(Self {
            config: reference.config,
            params,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Parameters {
        &mut self.params
    }

    pub fn forward_batch(&self, batch: &[&Observation]) -> Result<Tape> {
        let width = self.config.outputs;
        match &self.config.arch {
            Architecture::Mlp { nodes, .. } => {
                let in_w = self.config.input_width().expect("mlp");
                let mut x = Vec::with_capacity(batch.len() * in_w);
                for obs in batch {
                    if obs.n_nodes != *nodes || obs.globals.len() != self.config.global_features {
                        return Err(Error::Shape(format!(
                            "mlp configured for {nodes} nodes, observation has {}",
                            obs.n_nodes
                        )));
                    }
                    x.extend_from_slice(&obs.nodes);
                    x.extend_from_slice(&obs.globals);
                }
                let (outputs, tape) = mlp::forward(&self.params, &self.config.mlp_widths(), &x, batch.len())?;
                Ok(Tape {
                    outputs,
                    width,
                    inner: TapeInner::Mlp(tape),
                })
            }
            Architecture::Gat { .. } => {
                let dims = self.config.gat_dims();
                let mut outputs = Vec::with_capacity(batch.len() * width);
                let mut tapes = Vec::with_capacity(batch.len());
                for obs in batch {
                    let (q, tape) = gat::forward(&self.params, dims, &obs.nodes, obs.n_nodes, &obs.globals)?;
                    outputs.extend_from_slice(&q);
                    tapes.push(tape);
                }
                Ok(Tape {
                    outputs,
                    width,
                    inner: TapeInner::Gat(tapes),
                })
            }
        }
    }

    pub fn forward(&self, obs: &Observation) -> Result<Vec<f64>> {
        Ok(self.forward_batch(&[obs])?.outputs)
    }

    /// Gradients of `Σ grad_out · outputs` with respect to every parameter.
    pub fn backward(&self, tape: &Tape, grad_out: &[f64]) -> Result<Parameters> {
        if grad_out.len() != tape.outputs.len() {
            return Err(Error::Shape(format!(
                "output gradient has {} entries, forward produced {}",
                grad_out.len(),
                tape.outputs.len()
            )));
        }
        match &tape.inner {
            TapeInner::Mlp(t) => Ok(mlp::backward(&self.params, &self.config.mlp_widths(), t, grad_out)),
            TapeInner::Gat(tapes) => {
                let dims = self.config.gat_dims();
                let mut grads = Parameters::zeros_like(&self.params);
                for (s, t) in tapes.iter().enumerate() {
                    let dq = &grad_out[s * tape.width..(s + 1) * tape.width];
                    if dq.iter().any(|&g| g != 0.0) {
                        gat::backward(&self.params, dims, t, dq, &mut grads);
                    }
                }
                Ok(grads)
            }
        }
    }

    /// Q-values of an MDP state with the phase mask applied.
    pub fn q_values(&self, state: &State<'_>, portfolio: &Portfolio) -> Result<MaskedQ> {
        self.q_for(&encode_state(state), portfolio, state.phase())
    }

    pub fn q_for(&self, obs: &Observation, portfolio: &Portfolio, phase: Phase) -> Result<MaskedQ> {
        if portfolio.len() != self.config.outputs {
            return Err(Error::Shape(format!(
                "network has {} outputs, portfolio has {} operators",
                self.config.outputs,
                portfolio.len()
            )));
        }
        Ok(MaskedQ {
            values: self.forward(obs)?,
            valid: action_mask(portfolio, phase),
        })
    }
}

#[cfg(test)]
mod tests;
