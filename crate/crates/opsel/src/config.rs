//! `key = value` files and the experiment settings they override.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use opsel_core::alns::AlnsConfig;
use opsel_core::dqn::DqnConfig;
use opsel_core::selectors::ScoreRule;

use crate::solomon::InstanceClass;
use crate::store::apply_dqn_field;
use crate::studies::AgentKind;
use crate::{Error, Result};

/// Parsed `key = value` lines. `#` starts a comment; blank lines are skipped.
#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    source: String,
    entries: Vec<(usize, String, String)>,
}

pub fn parse_kv(text: &str, source: &str) -> Result<KeyValues> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(source, i + 1, format!("expected `key = value`, found `{line}`")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::parse(source, i + 1, "empty key"));
        }
        if entries.iter().any(|(_, k, _)| k == key) {
            return Err(Error::parse(source, i + 1, format!("duplicate key `{key}`")));
        }
        entries.push((i + 1, key.to_string(), value.trim().to_string()));
    }
    Ok(KeyValues {
        source: source.to_string(),
        entries,
    })
}

impl KeyValues {
    pub fn entries(&self) -> &[(usize, String, String)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(_, k, _)| k == key).map(|(_, _, v)| v.as_str())
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.iter().find(|(_, k, _)| k == key).map_or(0, |(l, _, _)| *l)
    }

    pub fn parse<T: FromStr>(&self, key: &str, value: &str) -> Result<T> {
        value
            .parse()
            .map_err(|_| Error::parse(&self.source, self.line_of(key), format!("invalid value `{value}` for `{key}`")))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        let value = self
            .get(key)
            .ok_or_else(|| Error::parse(&self.source, 0, format!("missing key `{key}`")))?;
        self.parse(key, value)
    }

    fn list<T: FromStr>(&self, key: &str, value: &str) -> Result<Vec<T>> {
        value.split(',').map(|v| self.parse(key, v.trim())).collect()
    }
}

/// Every tunable of the studies. Defaults give the desk-scale protocol:
/// n = 20, d = 4, b = 10, portfolios {2, 5, 12}, 5 seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub master_seed: u64,
    pub classes: Vec<InstanceClass>,
    /// Replaces the bundled instance of the (single) selected class.
    pub instance: Option<PathBuf>,
    pub n: usize,
    pub d: usize,
    pub budget: usize,
    pub portfolios: Vec<usize>,
    pub agents: Vec<AgentKind>,
    pub seeds: usize,
    /// Solutions per train/validate/test set.
    pub set_size: usize,
    /// Test solutions used as ALNS starts.
    pub alns_starts: usize,
    pub dqn_mlp: DqnConfig,
    pub dqn_gat: DqnConfig,
    /// LRW training length in environment steps (episodes = steps / 2b).
    pub lrw_steps: usize,
    pub lrw_reaction: f64,
    pub alns: AlnsConfig,
    /// Evaluation sizes of the generalization study.
    pub generalize_sizes: Vec<usize>,
    /// Portfolio size of the generalization, scale and temperature studies.
    pub sweep_portfolio: usize,
    pub scale_grid: Vec<usize>,
    pub tau_grid: Vec<f64>,
    /// Sets a worker-pool size; `None` uses all cores.
    pub threads: Option<usize>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            master_seed: 20_240_501,
            classes: InstanceClass::ALL.to_vec(),
            instance: None,
            n: 20,
            d: 4,
            budget: 10,
            portfolios: vec![2, 5, 12],
            agents: Vec::new(),
            seeds: 5,
            set_size: crate::dataset::SET_SIZE,
            alns_starts: crate::dataset::SET_SIZE,
            dqn_mlp: DqnConfig::mlp(),
            dqn_gat: DqnConfig::gat(),
            lrw_steps: DqnConfig::mlp().total_steps,
            lrw_reaction: 0.1,
            alns: AlnsConfig::default(),
            generalize_sizes: vec![20, 50, 100],
            sweep_portfolio: 12,
            scale_grid: vec![2, 4, 6, 8, 10],
            tau_grid: vec![1e-2, 1e-1, 1e0, 1e1, 1e2],
            threads: None,
        }
    }
}

impl Settings {
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply(&parse_kv(&text, &path.display().to_string())?)
    }

    /// Applies every entry; unknown keys are errors.
    pub fn apply(&mut self, kv: &KeyValues) -> Result<()> {
        for (line, key, value) in kv.entries() {
            let v = value.as_str();
            match key.as_str() {
                "master_seed" => self.master_seed = kv.parse(key, v)?,
                "classes" => self.classes = kv.list(key, v)?,
                "instance" => self.instance = Some(PathBuf::from(v)),
                "n" => self.n = kv.parse(key, v)?,
                "d" => self.d = kv.parse(key, v)?,
                "budget" => self.budget = kv.parse(key, v)?,
                "portfolios" => self.portfolios = kv.list(key, v)?,
                "agents" => self.agents = kv.list(key, v)?,
                "seeds" => self.seeds = kv.parse(key, v)?,
                "set_size" => self.set_size = kv.parse(key, v)?,
                "alns_starts" => self.alns_starts = kv.parse(key, v)?,
                "lrw_steps" => self.lrw_steps = kv.parse(key, v)?,
                "lrw_reaction" => self.lrw_reaction = kv.parse(key, v)?,
                "generalize_sizes" => self.generalize_sizes = kv.list(key, v)?,
                "sweep_portfolio" => self.sweep_portfolio = kv.parse(key, v)?,
                "scale_grid" => self.scale_grid = kv.list(key, v)?,
                "tau_grid" => self.tau_grid = kv.list(key, v)?,
                "threads" => self.threads = Some(kv.parse(key, v)?),
                "alns.iterations" => self.alns.iterations = kv.parse(key, v)?,
                "alns.segment" => self.alns.segment = kv.parse(key, v)?,
                "alns.reaction" => self.alns.reaction = kv.parse(key, v)?,
                "alns.w0" => self.alns.w0 = kv.parse(key, v)?,
                "alns.cooling" => self.alns.cooling = kv.parse(key, v)?,
                "alns.tau" => self.alns.tau = kv.parse(key, v)?,
                "alns.scores" => {
                    let s: Vec<f64> = kv.list(key, v)?;
                    if s.len() != 3 {
                        return Err(Error::parse(&kv.source, *line, "alns.scores expects three values"));
                    }
                    self.alns.score_rule = ScoreRule::new(s[0], s[1], s[2])?;
                }
                other => {
                    let handled = if let Some(field) = other.strip_prefix("dqn_mlp.") {
                        apply_dqn_field(&mut self.dqn_mlp, field, v, kv)?
                    } else if let Some(field) = other.strip_prefix("dqn_gat.") {
                        apply_dqn_field(&mut self.dqn_gat, field, v, kv)?
                    } else if let Some(field) = other.strip_prefix("dqn.") {
                        apply_dqn_field(&mut self.dqn_mlp, field, v, kv)? && apply_dqn_field(&mut self.dqn_gat, field, v, kv)?
                    } else {
                        false
                    };
                    if !handled {
                        return Err(Error::parse(&kv.source, *line, format!("unknown key `{other}`")));
                    }
                }
            }
        }
        self.check()
    }

    pub fn check(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.seeds == 0 {
            return fail("seeds must be at least 1");
        }
        if self.classes.is_empty() {
            return fail("at least one instance class is required");
        }
        if self.instance.is_some() && self.classes.len() != 1 {
            return fail("--instance needs exactly one class");
        }
        if self.portfolios.iter().chain([&self.sweep_portfolio]).any(|k| !(2..=12).contains(k)) {
            return fail("portfolio sizes must lie in 2..=12");
        }
        if self.set_size == 0 || self.alns_starts == 0 || self.alns_starts > self.set_size {
            return fail("set size must be positive and alns_starts at most the set size");
        }
        if self.n == 0 || self.d == 0 || self.budget == 0 {
            return fail("n, d and budget must be positive");
        }
        if self.lrw_steps < 2 * self.budget {
            return fail("lrw_steps must cover at least one episode");
        }
        if self.tau_grid.iter().any(|t| !(*t > 0.0)) {
            return fail("temperatures must be positive");
        }
        self.dqn_mlp.validate()?;
        self.dqn_gat.validate()?;
        let mut alns = self.alns;
        alns.d = self.d;
        alns.budget = self.budget;
        alns.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_apply_and_errors_name_lines() {
        let text = "# desk run\nseeds = 3\nclasses = C, RC\nagents = dqn-mlp,ran\ndqn_mlp.total_steps = 100 # short\n\
                    alns.iterations = 50\ntau_grid = 0.5,2\ndqn.batch_size = 16\n";
        let mut s = Settings::default();
        s.apply(&parse_kv(text, "cfg").unwrap()).unwrap();
        assert_eq!(s.seeds, 3);
        assert_eq!(s.classes, vec![InstanceClass::C, InstanceClass::RC]);
        assert_eq!(s.agents, vec![AgentKind::DqnMlp, AgentKind::Ran]);
        assert_eq!(s.dqn_mlp.total_steps, 100);
        assert_eq!(s.dqn_gat.total_steps, 25_000);
        assert_eq!((s.dqn_mlp.batch_size, s.dqn_gat.batch_size), (16, 16));
        assert_eq!(s.alns.iterations, 50);
        assert_eq!(s.tau_grid, vec![0.5, 2.0]);

        let mut s = Settings::default();
        let err = s.apply(&parse_kv("seeds = 2\nbogus = 1\n", "cfg").unwrap()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = s.apply(&parse_kv("seeds = two\n", "cfg").unwrap()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(parse_kv("seeds 2\n", "cfg").is_err());
        assert!(parse_kv("a = 1\na = 2\n", "cfg").is_err());
        assert!(s.apply(&parse_kv("portfolios = 1,5\n", "cfg").unwrap()).is_err());
        assert!(s.apply(&parse_kv("seeds = 0\n", "cfg").unwrap()).is_err());
    }
}
