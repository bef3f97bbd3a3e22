//! Training, validation and test sets of random initial solutions, and
//! their text serialization.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use opsel_core::solution::random_initial_solution;
use opsel_core::{Instance, Solution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const SET_SIZE: usize = 128;
const HEADER: &str = "# opsel solution set v1";

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSet {
    pub name: String,
    pub solutions: Vec<Solution>,
    /// SHA-256 of the serialized set, fixed when the set is created or read.
    pub hash: String,
}

impl SolutionSet {
    pub fn new(name: &str, inst: &Instance, solutions: Vec<Solution>) -> Self {
        let hash = sha256_hex(&serialize(inst, &solutions));
        Self {
            name: name.to_string(),
            solutions,
            hash,
        }
    }

    /// Re-hashes the solutions and compares with the recorded hash.
    pub fn verify(&self, inst: &Instance) -> Result<()> {
        let found = sha256_hex(&serialize(inst, &self.solutions));
        if found != self.hash {
            return Err(Error::HashMismatch {
                name: self.name.clone(),
                expected: self.hash.clone(),
                found,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSets {
    pub train: SolutionSet,
    pub validate: SolutionSet,
    pub test: SolutionSet,
}

impl SolutionSets {
    pub fn verify(&self, inst: &Instance) -> Result<()> {
        self.train.verify(inst)?;
        self.validate.verify(inst)?;
        self.test.verify(inst)
    }

    pub fn write_dir(&self, inst: &Instance, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = String::new();
        for set in [&self.train, &self.validate, &self.test] {
            let path = dir.join(format!("{}.sol", set.name));
            std::fs::write(&path, serialize(inst, &set.solutions)).map_err(|e| Error::io(&path, e))?;
            let _ = writeln!(manifest, "{}  {}.sol", set.hash, set.name);
        }
        let path = dir.join("sets.sha256");
        std::fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
    }

    /// Reads the three sets and checks them against the manifest.
    pub fn read_dir(inst: &Instance, dir: &Path) -> Result<Self> {
        let manifest_path = dir.join("sets.sha256");
        let manifest = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let read = |name: &str| -> Result<SolutionSet> {
            let path = dir.join(format!("{name}.sol"));
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let expected = manifest
                .lines()
                .find_map(|l| l.strip_suffix(&format!("  {name}.sol")))
                .ok_or_else(|| Error::Config(format!("{} has no entry for {name}", manifest_path.display())))?;
            let found = sha256_hex(&text);
            if found != expected {
                return Err(Error::HashMismatch {
                    name: name.to_string(),
                    expected: expected.to_string(),
                    found,
                });
            }
            Ok(SolutionSet {
                name: name.to_string(),
                solutions: deserialize(inst, &text, &path.display().to_string())?,
                hash: found,
            })
        };
        Ok(Self {
            train: read("train")?,
            validate: read("validate")?,
            test: read("test")?,
        })
    }
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// One solution per line, tours separated by `|`.
pub fn serialize(inst: &Instance, solutions: &[Solution]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "instance {}", inst.name());
    let _ = writeln!(out, "customers {}", inst.n_customers());
    let _ = writeln!(out, "solutions {}", solutions.len());
    for sol in solutions {
        let tours: Vec<String> = sol
            .tours()
            .iter()
            .map(|t| t.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "))
            .collect();
        let _ = writeln!(out, "{}", tours.join(" | "));
    }
    out
}

pub fn deserialize(inst: &Instance, text: &str, source_name: &str) -> Result<Vec<Solution>> {
    let mut lines = text.lines().enumerate();
    let mut header = |key: &str| -> Result<String> {
        let (i, line) = lines
            .next()
            .ok_or_else(|| Error::parse(source_name, 0, format!("missing `{key}` header")))?;
        if key == HEADER {
            return if line == HEADER {
                Ok(String::new())
            } else {
                Err(Error::parse(source_name, i + 1, "not an opsel solution set"))
            };
        }
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| Error::parse(source_name, i + 1, format!("expected `{key} ...`")))
    };
    header(HEADER)?;
    let name = header("instance")?;
    let customers: usize = header("customers")?
        .parse()
        .map_err(|_| Error::parse(source_name, 3, "bad customer count"))?;
    let count: usize = header("solutions")?
        .parse()
        .map_err(|_| Error::parse(source_name, 4, "bad solution count"))?;
    if name != inst.name() || customers != inst.n_customers() {
        return Err(Error::parse(
            source_name,
            2,
            format!(
                "set is for {name} with {customers} customers, instance is {} with {}",
                inst.name(),
                inst.n_customers()
            ),
        ));
    }
    let mut solutions = Vec::with_capacity(count);
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut tours = Vec::new();
        for part in line.split('|') {
            let tour: std::result::Result<Vec<usize>, _> = part.split_whitespace().map(str::parse).collect();
            tours.push(tour.map_err(|_| Error::parse(source_name, i + 1, "bad customer id"))?);
        }
        let sol = Solution::from_tours(inst, tours).map_err(|e| Error::parse(source_name, i + 1, e.to_string()))?;
        if !sol.is_complete() {
            return Err(Error::parse(source_name, i + 1, "solution does not route every customer"));
        }
        solutions.push(sol);
    }
    if solutions.len() != count {
        return Err(Error::parse(
            source_name,
            0,
            format!("header announces {count} solutions, found {}", solutions.len()),
        ));
    }
    Ok(solutions)
}

/// Three sets of [`SET_SIZE`] random initial solutions drawn from disjoint
/// streams of one seed. Errors if a solution appears in two sets.
pub fn make_solution_sets(inst: &Instance, seed: u64) -> Result<SolutionSets> {
    make_solution_sets_sized(inst, seed, SET_SIZE)
}

pub fn make_solution_sets_sized(inst: &Instance, seed: u64, size: usize) -> Result<SolutionSets> {
    let draw = |stream: u64| -> Result<Vec<Solution>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        (0..size)
            .map(|_| random_initial_solution(inst, &mut rng).map_err(Error::from))
            .collect()
    };
    let train = draw(0)?;
    let validate = draw(1)?;
    let test = draw(2)?;
    let mut seen: HashSet<&[Vec<usize>]> = HashSet::new();
    for (which, set) in [("train", &train), ("validate", &validate), ("test", &test)] {
        let own: HashSet<&[Vec<usize>]> = set.iter().map(|s| s.tours()).collect();
        if own.iter().any(|t| seen.contains(t)) {
            return Err(Error::Config(format!(
                "solution in `{which}` also appears in an earlier set; choose another seed"
            )));
        }
        seen.extend(own);
    }
    Ok(SolutionSets {
        train: SolutionSet::new("train", inst, train),
        validate: SolutionSet::new("validate", inst, validate),
        test: SolutionSet::new("test", inst, test),
    })
}
