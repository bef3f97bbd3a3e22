//! Files for trained selectors.
//!
//! A DQN agent is two files: `<stem>.ckpt` holds the network in the core
//! checkpoint format, `<stem>.meta` is a `key = value` sidecar with the
//! training configuration, portfolio and inference settings. Learned
//! roulette weights are a `key = value` file mapping operator names to
//! weights.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use opsel_core::dqn::{DqnConfig, TrainedAgent};
use opsel_core::neural::checkpoint;
use opsel_core::operators::{OperatorId, Portfolio};
use opsel_core::selectors::RouletteState;

use crate::config::{parse_kv, KeyValues};
use crate::{Error, Result};

const META_MAGIC: &str = "opsel-agent 1";
const WEIGHTS_MAGIC: &str = "opsel-lrw 1";

pub fn checkpoint_path(stem: &Path) -> PathBuf {
    stem.with_extension("ckpt")
}

pub fn meta_path(stem: &Path) -> PathBuf {
    stem.with_extension("meta")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn operator_names(portfolio: &Portfolio) -> String {
    portfolio.operators().iter().map(|o| o.name()).collect::<Vec<_>>().join(",")
}

/// Writes the agent, its training configuration and free-form labels.
pub fn save_agent(stem: &Path, agent: &TrainedAgent, cfg: &DqnConfig, labels: &BTreeMap<String, String>) -> Result<()> {
    write_file(&checkpoint_path(stem), &checkpoint::to_bytes(&agent.network))?;
    let mut meta = String::new();
    let _ = writeln!(meta, "# {META_MAGIC}");
    let _ = writeln!(meta, "portfolio = {}", agent.portfolio.n_destroys());
    let _ = writeln!(meta, "operators = {}", operator_names(&agent.portfolio));
    let _ = writeln!(meta, "tau = {}", agent.tau);
    let _ = writeln!(meta, "value_scale = {}", agent.value_scale);
    match agent.validation_score {
        Some(s) => {
            let _ = writeln!(meta, "validation_score = {s}");
        }
        None => {
            let _ = writeln!(meta, "validation_score = none");
        }
    }
    for (k, v) in dqn_fields(cfg) {
        let _ = writeln!(meta, "dqn.{k} = {v}");
    }
    for (k, v) in labels {
        let _ = writeln!(meta, "label.{k} = {v}");
    }
    write_file(&meta_path(stem), meta.as_bytes())
}

fn dqn_fields(cfg: &DqnConfig) -> Vec<(&'static str, String)> {
    vec![
        ("total_steps", cfg.total_steps.to_string()),
        ("epsilon_start", cfg.epsilon_start.to_string()),
        ("epsilon_end", cfg.epsilon_end.to_string()),
        ("epsilon_decay_fraction", cfg.epsilon_decay_fraction.to_string()),
        ("replay_fraction", cfg.replay_fraction.to_string()),
        ("batch_size", cfg.batch_size.to_string()),
        ("target_sync", cfg.target_sync.to_string()),
        ("gamma", cfg.gamma.to_string()),
        ("tau", cfg.tau.to_string()),
        ("validation_period", cfg.validation_period.to_string()),
        ("learning_rate", cfg.learning_rate.to_string()),
        ("value_scale", cfg.value_scale.to_string()),
    ]
}

/// Applies `key = value` overrides to a DQN configuration.
pub fn apply_dqn_field(cfg: &mut DqnConfig, key: &str, value: &str, kv: &KeyValues) -> Result<bool> {
    match key {
        "total_steps" => cfg.total_steps = kv.parse(key, value)?,
        "epsilon_start" => cfg.epsilon_start = kv.parse(key, value)?,
        "epsilon_end" => cfg.epsilon_end = kv.parse(key, value)?,
        "epsilon_decay_fraction" => cfg.epsilon_decay_fraction = kv.parse(key, value)?,
        "replay_fraction" => cfg.replay_fraction = kv.parse(key, value)?,
        "batch_size" => cfg.batch_size = kv.parse(key, value)?,
        "target_sync" => cfg.target_sync = kv.parse(key, value)?,
        "gamma" => cfg.gamma = kv.parse(key, value)?,
        "tau" => cfg.tau = kv.parse(key, value)?,
        "validation_period" => cfg.validation_period = kv.parse(key, value)?,
        "learning_rate" => cfg.learning_rate = kv.parse(key, value)?,
        "value_scale" => cfg.value_scale = kv.parse(key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedAgent {
    pub agent: TrainedAgent,
    pub config: DqnConfig,
    pub labels: BTreeMap<String, String>,
}

pub fn load_agent(stem: &Path) -> Result<LoadedAgent> {
    let ckpt = checkpoint_path(stem);
    let bytes = std::fs::read(&ckpt).map_err(|e| Error::io(&ckpt, e))?;
    let network = checkpoint::from_bytes(&bytes)?;

    let path = meta_path(stem);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let source = path.display().to_string();
    if text.lines().next() != Some(&format!("# {META_MAGIC}")) {
        return Err(Error::Checkpoint(format!("{source}: missing `# {META_MAGIC}` header")));
    }
    let kv = parse_kv(&text, &source)?;
    let k: usize = kv.require("portfolio")?;
    let portfolio = Portfolio::build(k)?;
    let names: String = kv.require("operators")?;
    if names != operator_names(&portfolio) {
        return Err(Error::Checkpoint(format!("{source}: operator list does not match portfolio size {k}")));
    }
    let mut config = DqnConfig::mlp();
    let mut labels = BTreeMap::new();
    for (line, key, value) in kv.entries() {
        if let Some(field) = key.strip_prefix("dqn.") {
            if !apply_dqn_field(&mut config, field, value, &kv)? {
                return Err(Error::parse(&source, *line, format!("unknown key `{key}`")));
            }
        } else if let Some(label) = key.strip_prefix("label.") {
            labels.insert(label.to_string(), value.clone());
        }
    }
    let validation_score = match kv.get("validation_score") {
        None | Some("none") => None,
        Some(v) => Some(kv.parse("validation_score", v)?),
    };
    if network.config().outputs != portfolio.len() {
        return Err(Error::Checkpoint(format!(
            "network has {} outputs, portfolio has {} operators",
            network.config().outputs,
            portfolio.len()
        )));
    }
    Ok(LoadedAgent {
        agent: TrainedAgent {
            network,
            portfolio,
            tau: kv.require("tau")?,
            value_scale: kv.require("value_scale")?,
            validation_score,
        },
        config,
        labels,
    })
}

pub fn save_weights(path: &Path, wheel: &RouletteState) -> Result<()> {
    let mut text = format!("# {WEIGHTS_MAGIC}\nportfolio = {}\nreaction = {}\n", wheel.portfolio().n_destroys(), wheel.reaction());
    for (op, w) in wheel.portfolio().operators().iter().zip(wheel.weights()) {
        let _ = writeln!(text, "{} = {w}", op.name());
    }
    write_file(path, text.as_bytes())
}

pub fn load_weights(path: &Path) -> Result<RouletteState> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let source = path.display().to_string();
    if text.lines().next() != Some(&format!("# {WEIGHTS_MAGIC}")) {
        return Err(Error::Checkpoint(format!("{source}: missing `# {WEIGHTS_MAGIC}` header")));
    }
    let kv = parse_kv(&text, &source)?;
    let portfolio = Portfolio::build(kv.require("portfolio")?)?;
    let mut wheel = RouletteState::new(portfolio.clone(), kv.require("reaction")?)?;
    for (line, key, value) in kv.entries() {
        if key == "portfolio" || key == "reaction" {
            continue;
        }
        let op = OperatorId::from_name(key)
            .filter(|op| portfolio.action_index(*op).is_some())
            .ok_or_else(|| Error::parse(&source, *line, format!("`{key}` is not an operator of this portfolio")))?;
        wheel.set_weight(op, kv.parse(key, value)?)?;
    }
    Ok(wheel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use opsel_core::neural::{NetworkConfig, QNetwork};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn agent_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let portfolio = Portfolio::build(5).unwrap();
        let agent = TrainedAgent {
            network: QNetwork::new(NetworkConfig::gat(portfolio.len()), &mut rng).unwrap(),
            portfolio,
            tau: 0.01,
            value_scale: 1.0,
            validation_score: Some(12.345678901234567),
        };
        let mut cfg = DqnConfig::gat();
        cfg.learning_rate = 1.0 / 3.0;
        let labels = BTreeMap::from([("class".to_string(), "RC".to_string())]);
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("agents/a");
        save_agent(&stem, &agent, &cfg, &labels).unwrap();
        let back = load_agent(&stem).unwrap();
        assert_eq!(back.agent, agent);
        assert_eq!(back.config, cfg);
        assert_eq!(back.labels, labels);

        let mut bytes = std::fs::read(checkpoint_path(&stem)).unwrap();
        bytes[0] = b'X';
        std::fs::write(checkpoint_path(&stem), bytes).unwrap();
        assert!(matches!(
            load_agent(&stem),
            Err(Error::Core(opsel_core::Error::CheckpointVersion { .. }))
        ));
    }

    #[test]
    fn weights_round_trip() {
        let mut wheel = RouletteState::new(Portfolio::build(3).unwrap(), 0.1).unwrap();
        let ops = wheel.portfolio().operators();
        wheel.set_weight(ops[1], 2.0 / 7.0).unwrap();
        wheel.set_weight(ops[4], 9.5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.lrw");
        save_weights(&path, &wheel).unwrap();
        let back = load_weights(&path).unwrap();
        assert_eq!(back.weights(), wheel.weights());
        std::fs::write(&path, "# opsel-lrw 1\nportfolio = 3\nreaction = 0.1\nnope = 1\n").unwrap();
        assert!(matches!(load_weights(&path), Err(Error::Parse { line: 4, .. })));
    }
}
