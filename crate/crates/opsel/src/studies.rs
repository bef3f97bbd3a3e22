//! The experiment studies: training pipelines, evaluation jobs and result
//! rows.
//!
//! Every random stream is derived from the master seed and a textual job
//! key, so results do not depend on scheduling. Trained selectors are kept
//! in memory and, when an output directory is set, cached under
//! `<out>/agents`; solution sets are written under `<out>/sets`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use opsel_core::alns::{run_alns, AdaptiveRoulette, DqnSelector, FrozenRoulette, OperatorSelector, RandomSelector, SimulatedAnnealing};
use opsel_core::dqn::{evaluate_policy, train_dqn, DqnConfig, SoftmaxPolicy, TrainedAgent};
use opsel_core::mdp::{EpisodeConfig, Policy};
use opsel_core::neural::NetworkConfig;
use opsel_core::operators::Portfolio;
use opsel_core::selectors::{train_lrw, RandomPolicy, RouletteState};
use opsel_core::Instance;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::Settings;
use crate::dataset::{make_solution_sets_sized, SolutionSets};
use crate::results::ResultRow;
use crate::solomon::{self, InstanceClass};
use crate::store;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgentKind {
    DqnMlp,
    DqnGnn,
    Lrw,
    Crw,
    Ran,
}

impl AgentKind {
    pub const ALL: [AgentKind; 5] = [AgentKind::DqnMlp, AgentKind::DqnGnn, AgentKind::Lrw, AgentKind::Crw, AgentKind::Ran];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::DqnMlp => "dqn-mlp",
            AgentKind::DqnGnn => "dqn-gnn",
            AgentKind::Lrw => "lrw",
            AgentKind::Crw => "crw",
            AgentKind::Ran => "ran",
        }
    }

    pub fn is_dqn(self) -> bool {
        matches!(self, AgentKind::DqnMlp | AgentKind::DqnGnn)
    }

    pub fn is_trained(self) -> bool {
        matches!(self, AgentKind::DqnMlp | AgentKind::DqnGnn | AgentKind::Lrw)
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown agent `{s}` (expected dqn-mlp, dqn-gnn, lrw, crw or ran)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    MdpTable,
    AlnsTable,
    Generalization,
    ScaleSweep,
    TempSweep,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::MdpTable => "mdp-table",
            Study::AlnsTable => "alns-table",
            Study::Generalization => "generalization",
            Study::ScaleSweep => "scale-sweep",
            Study::TempSweep => "temp-sweep",
        }
    }

    pub fn default_agents(self) -> &'static [AgentKind] {
        match self {
            Study::MdpTable | Study::ScaleSweep => &[AgentKind::DqnMlp, AgentKind::Lrw, AgentKind::Ran],
            Study::AlnsTable => &[AgentKind::DqnMlp, AgentKind::Lrw, AgentKind::Crw, AgentKind::Ran],
            Study::Generalization => &[AgentKind::DqnGnn, AgentKind::Lrw, AgentKind::Ran],
            Study::TempSweep => &[AgentKind::DqnMlp],
        }
    }

    fn allowed(self, agent: AgentKind) -> bool {
        match self {
            Study::MdpTable | Study::ScaleSweep => matches!(agent, AgentKind::DqnMlp | AgentKind::DqnGnn | AgentKind::Lrw | AgentKind::Ran),
            Study::AlnsTable => true,
            Study::Generalization => agent != AgentKind::DqnMlp && agent != AgentKind::Crw,
            Study::TempSweep => agent.is_dqn(),
        }
    }
}

/// Study label of one swept value, e.g. `scale-sweep/d=2`.
pub fn scale_label(d: usize) -> String {
    format!("{}/d={d}", Study::ScaleSweep.name())
}

pub fn temp_label(tau: f64) -> String {
    format!("{}/tau={tau}", Study::TempSweep.name())
}

/// First 8 bytes of SHA-256 over the master seed and the job key.
pub fn derive_seed(master: u64, parts: &[&dyn fmt::Display]) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for p in parts {
        h.update(b"/");
        h.update(p.to_string().as_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn rng_for(master: u64, parts: &[&dyn fmt::Display]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, parts))
}

/// One instance with its solution sets.
#[derive(Debug)]
pub struct Problem {
    pub class: InstanceClass,
    pub instance: Instance,
    pub sets: SolutionSets,
}

impl Problem {
    pub fn label(&self) -> String {
        format!("{}-n{}", self.instance.name(), self.instance.n_customers())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct AgentKey {
    pub kind: AgentKind,
    pub class: InstanceClass,
    pub n: usize,
    pub portfolio: usize,
    pub d: usize,
    pub budget: usize,
    pub seed: usize,
}

#[derive(Debug, Clone)]
pub enum Trained {
    Dqn(Arc<TrainedAgent>),
    Lrw(Arc<RouletteState>),
}

/// Shared state of a harness run.
pub struct Workspace {
    pub settings: Settings,
    out: Option<PathBuf>,
    verbose: bool,
    problems: Mutex<BTreeMap<(InstanceClass, usize), Arc<Problem>>>,
    trained: Mutex<BTreeMap<AgentKey, Trained>>,
}

impl Workspace {
    pub fn new(settings: Settings, out: Option<PathBuf>) -> Result<Self> {
        settings.check()?;
        Ok(Self {
            settings,
            out,
            verbose: false,
            problems: Mutex::new(BTreeMap::new()),
            trained: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn verbose(mut self, on: bool) -> Self {
        self.verbose = on;
        self
    }

    fn log(&self, msg: impl FnOnce() -> String) {
        if self.verbose {
            eprintln!("{}", msg());
        }
    }

    pub fn out(&self) -> Option<&Path> {
        self.out.as_deref()
    }

    fn agents_for(&self, study: Study) -> Result<Vec<AgentKind>> {
        let agents = if self.settings.agents.is_empty() {
            study.default_agents().to_vec()
        } else {
            self.settings.agents.clone()
        };
        for &a in &agents {
            if !study.allowed(a) {
                return Err(Error::Config(format!("agent `{a}` is not available in the {} study", study.name())));
            }
        }
        Ok(agents)
    }

    /// The class instance truncated to `n` customers with its solution sets,
    /// built once and reused.
    pub fn problem(&self, class: InstanceClass, n: usize) -> Result<Arc<Problem>> {
        if let Some(p) = self.problems.lock().expect("lock").get(&(class, n)) {
            return Ok(p.clone());
        }
        let source = match &self.settings.instance {
            Some(path) => solomon::read(path)?,
            None => class.bundled(),
        };
        let instance = source.truncated(n)?;
        let seed = derive_seed(self.settings.master_seed, &[&"sets", &instance.name(), &n]);
        let sets = make_solution_sets_sized(&instance, seed, self.settings.set_size)?;
        if let Some(out) = &self.out {
            let dir = out.join("sets").join(format!("{}-n{n}", instance.name()));
            if dir.join("sets.sha256").exists() {
                let stored = SolutionSets::read_dir(&instance, &dir)?;
                if stored != sets {
                    return Err(Error::Config(format!(
                        "{} holds solution sets from another seed or set size; remove it or use another --out",
                        dir.display()
                    )));
                }
            } else {
                sets.write_dir(&instance, &dir)?;
            }
        }
        let problem = Arc::new(Problem { class, instance, sets });
        self.problems.lock().expect("lock").insert((class, n), problem.clone());
        Ok(problem)
    }

    fn dqn_config(&self, kind: AgentKind) -> &DqnConfig {
        if kind == AgentKind::DqnGnn {
            &self.settings.dqn_gat
        } else {
            &self.settings.dqn_mlp
        }
    }

    fn agent_stem(&self, key: &AgentKey, problem: &Problem) -> Option<PathBuf> {
        let steps = match key.kind {
            AgentKind::Lrw => self.settings.lrw_steps,
            kind => self.dqn_config(kind).total_steps,
        };
        self.out.as_ref().map(|out| {
            out.join("agents").join(format!(
                "{}_{}_D{}_d{}_b{}_t{steps}_s{}",
                key.kind,
                problem.label(),
                key.portfolio,
                key.d,
                key.budget,
                key.seed
            ))
        })
    }

    fn training_seed(&self, key: &AgentKey, problem: &Problem) -> u64 {
        derive_seed(
            self.settings.master_seed,
            &[&"train", &key.kind, &problem.label(), &key.portfolio, &key.d, &key.budget, &key.seed],
        )
    }

    fn labels(&self, key: &AgentKey, problem: &Problem) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("agent".to_string(), key.kind.to_string()),
            ("instance".to_string(), problem.label()),
            ("class".to_string(), key.class.to_string()),
            ("d".to_string(), key.d.to_string()),
            ("budget".to_string(), key.budget.to_string()),
            ("seed".to_string(), key.seed.to_string()),
            ("master_seed".to_string(), self.settings.master_seed.to_string()),
            ("set_hash".to_string(), problem.sets.train.hash.clone()),
        ])
    }

    /// Trains (or loads from the agent cache) one selector.
    fn train_one(&self, key: &AgentKey) -> Result<Trained> {
        let problem = self.problem(key.class, key.n)?;
        problem.sets.verify(&problem.instance)?;
        let portfolio = Portfolio::build(key.portfolio)?;
        let episode = EpisodeConfig::new(key.d, key.budget);
        let mut rng = ChaCha8Rng::seed_from_u64(self.training_seed(key, &problem));
        let stem = self.agent_stem(key, &problem);
        if key.kind == AgentKind::Lrw {
            let path = stem.as_ref().map(|s| s.with_extension("lrw"));
            if let Some(path) = path.as_ref().filter(|p| p.exists()) {
                let wheel = store::load_weights(path)?;
                if wheel.portfolio() == &portfolio && wheel.reaction() == self.settings.lrw_reaction {
                    return Ok(Trained::Lrw(Arc::new(wheel)));
                }
            }
            let episodes = self.settings.lrw_steps / (2 * key.budget);
            let wheel = train_lrw(
                &problem.instance,
                &problem.sets.train.solutions,
                &portfolio,
                episode,
                episodes,
                self.settings.lrw_reaction,
                &mut rng,
            )?;
            if let Some(path) = path {
                store::save_weights(&path, &wheel)?;
            }
            return Ok(Trained::Lrw(Arc::new(wheel)));
        }

        let cfg = self.dqn_config(key.kind);
        let labels = self.labels(key, &problem);
        if let Some(stem) = stem.as_ref().filter(|s| store::meta_path(s).exists()) {
            let loaded = store::load_agent(stem)?;
            let same_cfg = DqnConfig { tau: cfg.tau, ..loaded.config } == *cfg;
            if same_cfg && loaded.labels == labels && loaded.agent.portfolio == portfolio {
                self.log(|| format!("loaded {}", stem.display()));
                return Ok(Trained::Dqn(Arc::new(loaded.agent)));
            }
        }
        let network = if key.kind == AgentKind::DqnGnn {
            NetworkConfig::gat(portfolio.len())
        } else {
            NetworkConfig::mlp(key.n + 1, portfolio.len())
        };
        let started = std::time::Instant::now();
        let (agent, report) = train_dqn(
            &problem.instance,
            &problem.sets.train.solutions,
            &problem.sets.validate.solutions,
            &portfolio,
            episode,
            cfg,
            network,
            &mut rng,
        )?;
        self.log(|| {
            format!(
                "trained {} {} D={} d={} seed={} in {:.0?}: best validation {:?}",
                key.kind,
                problem.label(),
                key.portfolio,
                key.d,
                key.seed,
                started.elapsed(),
                report.best_score
            )
        });
        if let Some(stem) = stem {
            store::save_agent(&stem, &agent, cfg, &labels)?;
        }
        Ok(Trained::Dqn(Arc::new(agent)))
    }

    /// Makes sure every key is trained; missing ones run on the worker pool.
    pub fn ensure_trained(&self, keys: &[AgentKey]) -> Result<()> {
        let missing: Vec<AgentKey> = {
            let cache = self.trained.lock().expect("lock");
            let mut m: Vec<AgentKey> = keys.iter().filter(|k| k.kind.is_trained() && !cache.contains_key(k)).copied().collect();
            m.sort();
            m.dedup();
            m
        };
        // Build problems first so set files are written once.
        for k in &missing {
            self.problem(k.class, k.n)?;
        }
        let trained: Vec<(AgentKey, Trained)> = self.pool(|| {
            missing
                .par_iter()
                .map(|k| self.train_one(k).map(|t| (*k, t)))
                .collect::<Result<Vec<_>>>()
        })?;
        self.trained.lock().expect("lock").extend(trained);
        Ok(())
    }

    pub fn trained(&self, key: &AgentKey) -> Result<Trained> {
        self.ensure_trained(std::slice::from_ref(key))?;
        Ok(self.trained.lock().expect("lock")[key].clone())
    }

    pub fn dqn_agent(&self, key: &AgentKey) -> Result<Arc<TrainedAgent>> {
        match self.trained(key)? {
            Trained::Dqn(a) => Ok(a),
            Trained::Lrw(_) => Err(Error::Config(format!("{} is not a DQN agent", key.kind))),
        }
    }

    fn pool<T: Send>(&self, f: impl FnOnce() -> T + Send) -> T {
        match self.settings.threads {
            Some(t) => rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .expect("thread pool")
                .install(f),
            None => f(),
        }
    }

    fn key(&self, kind: AgentKind, class: InstanceClass, portfolio: usize, d: usize, seed: usize) -> AgentKey {
        AgentKey {
            kind,
            class,
            n: self.settings.n,
            portfolio,
            d,
            budget: self.settings.budget,
            seed,
        }
    }

    /// Mean cumulative reward of one selector over the test set of `problem`.
    fn mdp_reward(&self, problem: &Problem, key: &AgentKey, episode: EpisodeConfig, tag: &str) -> Result<f64> {
        problem.sets.verify(&problem.instance)?;
        let portfolio = Portfolio::build(key.portfolio)?;
        let mut rng = rng_for(
            self.settings.master_seed,
            &[&tag, &key.kind, &problem.label(), &key.portfolio, &episode.d, &episode.budget, &key.seed],
        );
        let mut policy: Box<dyn Policy> = match key.kind {
            AgentKind::Ran => Box::new(RandomPolicy),
            AgentKind::Lrw => match self.trained(key)? {
                Trained::Lrw(w) => Box::new((*w).clone()),
                Trained::Dqn(_) => unreachable!("lrw key"),
            },
            AgentKind::DqnMlp | AgentKind::DqnGnn => {
                let agent = self.dqn_agent(key)?;
                let tau = self.dqn_config(key.kind).tau;
                return mean_reward(&problem.instance, &portfolio, episode, problem, &mut SoftmaxPolicy { agent: &agent, tau }, &mut rng);
            }
            AgentKind::Crw => return Err(Error::Config("crw has no episodic MDP policy".into())),
        };
        mean_reward(&problem.instance, &portfolio, episode, problem, policy.as_mut(), &mut rng)
    }

    /// ALNS from the first `alns_starts` test solutions: (mean best, min best).
    fn alns_objectives(&self, problem: &Problem, key: &AgentKey, tau: f64, tag: &str) -> Result<(f64, f64)> {
        problem.sets.verify(&problem.instance)?;
        let portfolio = Portfolio::build(key.portfolio)?;
        let mut cfg = self.settings.alns;
        cfg.d = key.d;
        cfg.budget = key.budget;
        cfg.tau = tau;
        let mut rng = rng_for(
            self.settings.master_seed,
            &[&tag, &key.kind, &problem.label(), &key.portfolio, &key.d, &key.budget, &tau, &key.seed],
        );
        let trained = if key.kind.is_trained() { Some(self.trained(key)?) } else { None };
        let mut best = Vec::with_capacity(self.settings.alns_starts);
        for start in &problem.sets.test.solutions[..self.settings.alns_starts] {
            let mut selector: Box<dyn OperatorSelector + '_> = match (&trained, key.kind) {
                (_, AgentKind::Ran) => Box::new(RandomSelector),
                (_, AgentKind::Crw) => Box::new(AdaptiveRoulette::new(portfolio.clone(), &cfg)?),
                (Some(Trained::Lrw(w)), _) => Box::new(FrozenRoulette((**w).clone())),
                (Some(Trained::Dqn(a)), _) => Box::new(DqnSelector { agent: a, tau }),
                (None, _) => unreachable!("trained selectors are loaded above"),
            };
            let result = run_alns(
                &problem.instance,
                start,
                selector.as_mut(),
                &mut SimulatedAnnealing,
                &portfolio,
                &cfg,
                &mut rng,
            )?;
            best.push(result.best_cost);
        }
        let avg = best.iter().sum::<f64>() / best.len() as f64;
        let min = best.iter().copied().fold(f64::INFINITY, f64::min);
        Ok((avg, min))
    }

    fn row(&self, study: &str, problem: &Problem, portfolio: usize, agent: AgentKind, seed: usize, metric: &str, value: f64) -> ResultRow {
        ResultRow {
            study: study.to_string(),
            instance: problem.instance.name().to_string(),
            class: problem.class.to_string(),
            n: problem.instance.n_customers(),
            portfolio,
            agent: agent.to_string(),
            seed,
            metric: metric.to_string(),
            value,
        }
    }

    fn run_jobs<J: Sync>(&self, jobs: &[J], f: impl Fn(&J) -> Result<Vec<ResultRow>> + Sync) -> Result<Vec<ResultRow>> {
        let chunks = self.pool(|| jobs.par_iter().map(&f).collect::<Result<Vec<_>>>())?;
        let mut rows: Vec<ResultRow> = chunks.into_iter().flatten().collect();
        crate::results::sort_rows(&mut rows);
        Ok(rows)
    }

    fn grid(&self, agents: &[AgentKind], portfolios: &[usize], d: usize) -> Vec<AgentKey> {
        let mut keys = Vec::new();
        for &class in &self.settings.classes {
            for &k in portfolios {
                for &a in agents {
                    for seed in 0..self.settings.seeds {
                        keys.push(self.key(a, class, k, d, seed));
                    }
                }
            }
        }
        keys
    }

    /// Cumulative MDP reward per (class, |D|, agent, seed).
    pub fn run_mdp_table(&self) -> Result<Vec<ResultRow>> {
        let agents = self.agents_for(Study::MdpTable)?;
        let keys = self.grid(&agents, &self.settings.portfolios, self.settings.d);
        self.ensure_trained(&keys)?;
        let episode = EpisodeConfig::new(self.settings.d, self.settings.budget);
        self.run_jobs(&keys, |key| {
            let problem = self.problem(key.class, key.n)?;
            let v = self.mdp_reward(&problem, key, episode, Study::MdpTable.name())?;
            Ok(vec![self.row(Study::MdpTable.name(), &problem, key.portfolio, key.kind, key.seed, "cum_reward", v)])
        })
    }

    /// ALNS objective per (class, |D|, agent, seed).
    pub fn run_alns_table(&self) -> Result<Vec<ResultRow>> {
        let agents = self.agents_for(Study::AlnsTable)?;
        let keys = self.grid(&agents, &self.settings.portfolios, self.settings.d);
        self.ensure_trained(&keys)?;
        let tau = self.settings.alns.tau;
        self.run_jobs(&keys, |key| {
            let problem = self.problem(key.class, key.n)?;
            let (avg, min) = self.alns_objectives(&problem, key, tau, Study::AlnsTable.name())?;
            let study = Study::AlnsTable.name();
            Ok(vec![
                self.row(study, &problem, key.portfolio, key.kind, key.seed, "obj_avg", avg),
                self.row(study, &problem, key.portfolio, key.kind, key.seed, "obj_min", min),
            ])
        })
    }

    /// Agents trained at the configured size, evaluated at every size of
    /// `generalize_sizes` with d = size / 5.
    pub fn run_generalization(&self) -> Result<Vec<ResultRow>> {
        let agents = self.agents_for(Study::Generalization)?;
        let k = self.settings.sweep_portfolio;
        let keys = self.grid(&agents, &[k], self.settings.d);
        self.ensure_trained(&keys)?;
        for &size in &self.settings.generalize_sizes {
            if size / 5 == 0 {
                return Err(Error::Config(format!("evaluation size {size} gives destroy scale 0")));
            }
        }
        let jobs: Vec<(AgentKey, usize)> = keys
            .iter()
            .flat_map(|k| self.settings.generalize_sizes.iter().map(move |&s| (*k, s)))
            .collect();
        self.run_jobs(&jobs, |(key, size)| {
            let problem = self.problem(key.class, *size)?;
            let episode = EpisodeConfig::new(size / 5, self.settings.budget);
            let v = self.mdp_reward(&problem, key, episode, Study::Generalization.name())?;
            Ok(vec![self.row(Study::Generalization.name(), &problem, key.portfolio, key.kind, key.seed, "cum_reward", v)])
        })
    }

    /// Agents trained and evaluated at every destroy scale of `scale_grid`.
    pub fn run_scale_sweep(&self) -> Result<Vec<ResultRow>> {
        let agents = self.agents_for(Study::ScaleSweep)?;
        let k = self.settings.sweep_portfolio;
        let keys: Vec<AgentKey> = self.settings.scale_grid.iter().flat_map(|&d| self.grid(&agents, &[k], d)).collect();
        self.ensure_trained(&keys)?;
        self.run_jobs(&keys, |key| {
            let problem = self.problem(key.class, key.n)?;
            let label = scale_label(key.d);
            let v = self.mdp_reward(&problem, key, EpisodeConfig::new(key.d, key.budget), &label)?;
            Ok(vec![self.row(&label, &problem, key.portfolio, key.kind, key.seed, "cum_reward", v)])
        })
    }

    /// ALNS with the DQN selector at every temperature of `tau_grid`; rows
    /// per class plus class `ALL` averaging the classes seed by seed.
    pub fn run_temp_sweep(&self) -> Result<Vec<ResultRow>> {
        let agents = self.agents_for(Study::TempSweep)?;
        let k = self.settings.sweep_portfolio;
        let keys = self.grid(&agents, &[k], self.settings.d);
        self.ensure_trained(&keys)?;
        let jobs: Vec<(AgentKey, f64)> = keys
            .iter()
            .flat_map(|key| self.settings.tau_grid.iter().map(move |&t| (*key, t)))
            .collect();
        let mut rows = self.run_jobs(&jobs, |(key, tau)| {
            let problem = self.problem(key.class, key.n)?;
            let label = temp_label(*tau);
            let (avg, min) = self.alns_objectives(&problem, key, *tau, Study::TempSweep.name())?;
            Ok(vec![
                self.row(&label, &problem, key.portfolio, key.kind, key.seed, "obj_avg", avg),
                self.row(&label, &problem, key.portfolio, key.kind, key.seed, "obj_min", min),
            ])
        })?;
        let mut pooled: BTreeMap<(String, String, usize, usize, String), Vec<f64>> = BTreeMap::new();
        for r in &rows {
            pooled
                .entry((r.study.clone(), r.agent.clone(), r.portfolio, r.seed, r.metric.clone()))
                .or_default()
                .push(r.value);
        }
        for ((study, agent, portfolio, seed, metric), values) in pooled {
            rows.push(ResultRow {
                study,
                instance: "ALL".into(),
                class: "ALL".into(),
                n: self.settings.n,
                portfolio,
                agent,
                seed,
                metric,
                value: values.iter().sum::<f64>() / values.len() as f64,
            });
        }
        crate::results::sort_rows(&mut rows);
        Ok(rows)
    }

    pub fn run(&self, study: Study) -> Result<Vec<ResultRow>> {
        match study {
            Study::MdpTable => self.run_mdp_table(),
            Study::AlnsTable => self.run_alns_table(),
            Study::Generalization => self.run_generalization(),
            Study::ScaleSweep => self.run_scale_sweep(),
            Study::TempSweep => self.run_temp_sweep(),
        }
    }
}

fn mean_reward<P: Policy + ?Sized>(
    inst: &Instance,
    portfolio: &Portfolio,
    episode: EpisodeConfig,
    problem: &Problem,
    policy: &mut P,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let rewards = evaluate_policy(inst, portfolio, episode, &problem.sets.test.solutions, policy, rng)?;
    Ok(rewards.iter().sum::<f64>() / rewards.len() as f64)
}

/// Errors unless every cell holds exactly `seeds` rows.
pub fn check_cells(rows: &[ResultRow], seeds: usize) -> Result<()> {
    for cell in crate::results::aggregate(rows)? {
        if cell.seeds != seeds {
            return Err(Error::Config(format!(
                "cell {}/{}/{}/{} has {} rows, expected {seeds}",
                cell.study, cell.class, cell.agent, cell.metric, cell.seeds
            )));
        }
    }
    Ok(())
}
