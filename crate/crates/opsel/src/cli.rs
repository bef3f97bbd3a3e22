//! Command-line interface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::Settings;
use crate::results::{aggregate, read_results, summary_path, write_results, CellSummary, ResultRow};
use crate::solomon::InstanceClass;
use crate::studies::{AgentKey, AgentKind, Study, Workspace};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "opsel", version, about = "Learned operator selection for ALNS on CVRP")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate and store the train/validate/test solution sets.
    GenData(Shared),
    /// Train selectors (dqn-mlp, dqn-gnn, lrw) into <out>/agents.
    Train(Shared),
    /// Cumulative-reward table of the MDP evaluation.
    EvalMdp(Shared),
    /// Objective table of the ALNS evaluation.
    EvalAlns(Shared),
    /// Train at n, evaluate at larger sizes with d = n/5.
    Generalize(Shared),
    /// Destroy-scale sweep.
    SweepScale(Shared),
    /// Softmax-temperature sweep inside ALNS.
    SweepTemp(Shared),
    /// Aggregate result CSVs and print the summary cells.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Shared {
    /// Solomon instance file replacing the bundled one of --class.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long, value_parser = parse_class)]
    pub class: Option<InstanceClass>,
    /// Customers kept from the instance.
    #[arg(long)]
    pub n: Option<usize>,
    /// Destroy portfolio size.
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=12))]
    pub portfolio: Option<u8>,
    /// Selector; repeat or separate with commas.
    #[arg(long, value_delimiter = ',', value_parser = parse_agent)]
    pub agent: Vec<AgentKind>,
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Destroy scale.
    #[arg(long)]
    pub d: Option<usize>,
    /// Operator-pair budget per episode.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Softmax temperature at inference.
    #[arg(long)]
    pub tau: Option<f64>,
    /// ALNS iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long, default_value = "opsel-out")]
    pub out: PathBuf,
    /// `key = value` file applied before the other flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// No progress messages.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Result CSVs; defaults to every study CSV in --out.
    pub files: Vec<PathBuf>,
    #[arg(long, default_value = "opsel-out")]
    pub out: PathBuf,
}

fn parse_class(s: &str) -> Result<InstanceClass> {
    s.parse()
}

fn parse_agent(s: &str) -> Result<AgentKind> {
    s.parse()
}

impl Shared {
    pub fn settings(&self) -> Result<Settings> {
        let mut s = Settings::default();
        if let Some(path) = &self.config {
            s.apply_file(path)?;
        }
        if let Some(p) = &self.instance {
            s.instance = Some(p.clone());
            if self.class.is_none() {
                let name = p.file_stem().and_then(|x| x.to_str()).unwrap_or("").to_ascii_uppercase();
                let class = if name.starts_with("RC") {
                    InstanceClass::RC
                } else if name.starts_with('R') {
                    InstanceClass::R
                } else {
                    InstanceClass::C
                };
                s.classes = vec![class];
            }
        }
        if let Some(c) = self.class {
            s.classes = vec![c];
        }
        if let Some(n) = self.n {
            s.n = n;
        }
        if let Some(k) = self.portfolio {
            s.portfolios = vec![usize::from(k)];
            s.sweep_portfolio = usize::from(k);
        }
        if !self.agent.is_empty() {
            s.agents = self.agent.clone();
        }
        if let Some(k) = self.seeds {
            s.seeds = k;
        }
        if let Some(d) = self.d {
            s.d = d;
        }
        if let Some(b) = self.budget {
            s.budget = b;
        }
        if let Some(t) = self.tau {
            s.dqn_mlp.tau = t;
            s.dqn_gat.tau = t;
            s.alns.tau = t;
            s.tau_grid = vec![t];
        }
        if let Some(i) = self.iters {
            s.alns.iterations = i;
        }
        if let Some(seed) = self.seed {
            s.master_seed = seed;
        }
        if self.threads.is_some() {
            s.threads = self.threads;
        }
        s.check()?;
        Ok(s)
    }

    fn workspace(&self) -> Result<Workspace> {
        Ok(Workspace::new(self.settings()?, Some(self.out.clone()))?.verbose(!self.quiet))
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => gen_data(&a),
        Command::Train(a) => train(&a),
        Command::EvalMdp(a) => study(&a, Study::MdpTable),
        Command::EvalAlns(a) => study(&a, Study::AlnsTable),
        Command::Generalize(a) => study(&a, Study::Generalization),
        Command::SweepScale(a) => study(&a, Study::ScaleSweep),
        Command::SweepTemp(a) => study(&a, Study::TempSweep),
        Command::Report(a) => report(&a),
    }
}

fn gen_data(a: &Shared) -> Result<()> {
    let ws = a.workspace()?;
    for &class in &ws.settings.classes {
        let p = ws.problem(class, ws.settings.n)?;
        println!(
            "{}: train {} validate {} test {}",
            p.label(),
            p.sets.train.hash,
            p.sets.validate.hash,
            p.sets.test.hash
        );
    }
    Ok(())
}

fn train(a: &Shared) -> Result<()> {
    let ws = a.workspace()?;
    let agents = if ws.settings.agents.is_empty() {
        vec![AgentKind::DqnMlp, AgentKind::Lrw]
    } else {
        ws.settings.agents.clone()
    };
    let mut keys = Vec::new();
    for &kind in &agents {
        if !kind.is_trained() {
            return Err(Error::Config(format!("agent `{kind}` needs no training")));
        }
        for &class in &ws.settings.classes {
            for &portfolio in &ws.settings.portfolios {
                for seed in 0..ws.settings.seeds {
                    keys.push(AgentKey {
                        kind,
                        class,
                        n: ws.settings.n,
                        portfolio,
                        d: ws.settings.d,
                        budget: ws.settings.budget,
                        seed,
                    });
                }
            }
        }
    }
    ws.ensure_trained(&keys)?;
    println!("{} selectors available under {}", keys.len(), a.out.join("agents").display());
    Ok(())
}

fn study(a: &Shared, study: Study) -> Result<()> {
    let ws = a.workspace()?;
    let rows = ws.run(study)?;
    let path = a.out.join(format!("{}.csv", study.name()));
    write_results(&rows, &path)?;
    print_summary(&aggregate(&rows)?);
    println!("wrote {} and {}", path.display(), summary_path(&path).display());
    Ok(())
}

fn study_files(out: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(out).map_err(|e| Error::io(out, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.ends_with(".csv") && !name.ends_with(".summary.csv")
        })
        .collect();
    files.sort();
    Ok(files)
}

fn report(a: &ReportArgs) -> Result<()> {
    let files = if a.files.is_empty() { study_files(&a.out)? } else { a.files.clone() };
    if files.is_empty() {
        return Err(Error::Config(format!("no result CSVs found in {}", a.out.display())));
    }
    let mut rows: Vec<ResultRow> = Vec::new();
    for f in &files {
        let these = read_results(f)?;
        write_results(&these, f)?;
        rows.extend(these);
    }
    print_summary(&aggregate(&rows)?);
    Ok(())
}

pub fn print_summary(cells: &[CellSummary]) {
    println!(
        "{:<26} {:<6} {:<4} {:>4} {:>3} {:<8} {:<10} {:>5} {:>12} {:>10}",
        "study", "inst", "cls", "n", "D", "agent", "metric", "seeds", "mean", "±95%"
    );
    for c in cells {
        let hw = c.halfwidth.map_or_else(|| "-".to_string(), |h| format!("{h:.3}"));
        println!(
            "{:<26} {:<6} {:<4} {:>4} {:>3} {:<8} {:<10} {:>5} {:>12.3} {:>10}",
            c.study, c.instance, c.class, c.n, c.portfolio, c.agent, c.metric, c.seeds, c.mean, hw
        );
    }
}
