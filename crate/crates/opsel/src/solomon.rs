//! Solomon benchmark files.
//!
//! Only coordinates, demands and the vehicle capacity are used; the
//! time-window and service columns are parsed and written back unchanged.
//! The bundled C101, R101 and RC101 files were transcribed by hand; any
//! official copy can be passed instead through `--instance`.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use opsel_core::Instance;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Customer {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub demand: u32,
    pub ready: f64,
    pub due: f64,
    pub service: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolomonInstance {
    pub name: String,
    pub vehicles: u32,
    pub capacity: u32,
    /// Depot first, sorted by id.
    pub customers: Vec<Customer>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InstanceClass {
    C,
    R,
    RC,
}

impl InstanceClass {
    pub const ALL: [InstanceClass; 3] = [InstanceClass::C, InstanceClass::R, InstanceClass::RC];

    pub fn name(self) -> &'static str {
        match self {
            InstanceClass::C => "C",
            InstanceClass::R => "R",
            InstanceClass::RC => "RC",
        }
    }

    /// Name of the bundled representative instance.
    pub fn instance_name(self) -> &'static str {
        match self {
            InstanceClass::C => "C101",
            InstanceClass::R => "R101",
            InstanceClass::RC => "RC101",
        }
    }

    pub fn bundled_text(self) -> &'static str {
        match self {
            InstanceClass::C => include_str!("../data/C101.txt"),
            InstanceClass::R => include_str!("../data/R101.txt"),
            InstanceClass::RC => include_str!("../data/RC101.txt"),
        }
    }

    pub fn bundled(self) -> SolomonInstance {
        parse(self.bundled_text(), self.instance_name()).expect("bundled instance parses")
    }
}

impl fmt::Display for InstanceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InstanceClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "C" => Ok(InstanceClass::C),
            "R" => Ok(InstanceClass::R),
            "RC" => Ok(InstanceClass::RC),
            _ => Err(Error::Config(format!("unknown instance class `{s}` (expected C, R or RC)"))),
        }
    }
}

fn numbers(line: &str) -> Option<Vec<f64>> {
    line.split_whitespace().map(|t| t.parse::<f64>().ok()).collect()
}

fn as_count(v: f64, what: &str, source_name: &str, line: usize) -> Result<u32> {
    if v < 0.0 || v.fract() != 0.0 || v > f64::from(u32::MAX) {
        return Err(Error::parse(source_name, line, format!("{what} must be a non-negative integer, got {v}")));
    }
    Ok(v as u32)
}

/// Parses the classic layout: name line, `VEHICLE` block with number and
/// capacity, `CUSTOMER` block with seven columns per row.
pub fn parse(text: &str, source_name: &str) -> Result<SolomonInstance> {
    let mut name = None;
    let mut fleet = None;
    let mut section = "";
    let mut customers = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if name.is_none() {
            name = Some(line.to_string());
            continue;
        }
        let upper = line.to_ascii_uppercase();
        if upper.starts_with("VEHICLE") {
            section = "vehicle";
            continue;
        }
        if upper.starts_with("CUSTOMER") {
            section = "customer";
            continue;
        }
        let Some(values) = numbers(line) else {
            if line.chars().next().is_some_and(|c| c.is_ascii_digit()) {
                return Err(Error::parse(source_name, line_no, format!("malformed numeric row `{line}`")));
            }
            // Column headers.
            continue;
        };
        match section {
            "vehicle" => {
                if values.len() != 2 {
                    return Err(Error::parse(source_name, line_no, "expected vehicle number and capacity"));
                }
                fleet = Some((
                    as_count(values[0], "vehicle number", source_name, line_no)?,
                    as_count(values[1], "capacity", source_name, line_no)?,
                ));
            }
            "customer" => {
                if values.len() != 7 {
                    return Err(Error::parse(
                        source_name,
                        line_no,
                        format!("expected 7 columns, found {}", values.len()),
                    ));
                }
                customers.push((
                    line_no,
                    Customer {
                        id: as_count(values[0], "customer number", source_name, line_no)? as usize,
                        x: values[1],
                        y: values[2],
                        demand: as_count(values[3], "demand", source_name, line_no)?,
                        ready: values[4],
                        due: values[5],
                        service: values[6],
                    },
                ));
            }
            _ => return Err(Error::parse(source_name, line_no, "numeric row outside the VEHICLE and CUSTOMER sections")),
        }
    }
    let name = name.ok_or_else(|| Error::parse(source_name, 1, "empty file"))?;
    let (vehicles, capacity) = fleet.ok_or_else(|| Error::parse(source_name, 1, "missing VEHICLE section"))?;
    if customers.len() < 2 {
        return Err(Error::parse(source_name, 1, "need a depot and at least one customer"));
    }
    customers.sort_by_key(|(_, c)| c.id);
    for (expected, (line, c)) in customers.iter().enumerate() {
        if c.id != expected {
            return Err(Error::parse(
                source_name,
                *line,
                format!("customer ids must be contiguous from 0; expected {expected}, found {}", c.id),
            ));
        }
    }
    Ok(SolomonInstance {
        name,
        vehicles,
        capacity,
        customers: customers.into_iter().map(|(_, c)| c).collect(),
    })
}

pub fn read(path: &Path) -> Result<SolomonInstance> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, &path.display().to_string())
}

impl SolomonInstance {
    /// The full CVRP instance (time windows dropped).
    pub fn to_instance(&self) -> Result<Instance> {
        let rows: Vec<(f64, f64, u32)> = self.customers.iter().map(|c| (c.x, c.y, c.demand)).collect();
        Ok(Instance::new(&self.name, &rows, self.capacity)?)
    }

    /// The depot plus the first `n` customers, capacity scaled to `n`.
    pub fn truncated(&self, n: usize) -> Result<Instance> {
        Ok(self.to_instance()?.truncate(n)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = write!(
            out,
            "{}\n\nVEHICLE\nNUMBER     CAPACITY\n{:>5}{:>12}\n\nCUSTOMER\n\
             CUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME  DUE DATE   SERVICE   TIME\n\n",
            self.name, self.vehicles, self.capacity
        );
        for c in &self.customers {
            let _ = writeln!(
                out,
                "{:>5}{:>11}{:>11}{:>11}{:>11}{:>11}{:>11}",
                c.id, c.x, c.y, c.demand, c.ready, c.due, c.service
            );
        }
        out
    }
}
