//! Checkpoint byte format.
//!
//! A UTF-8 header of `key value` lines followed by the raw arrays:
//!
//! ```text
//! OPSEL-CKPT 1
//! arch mlp            (or gat)
//! nodes 21            (mlp only)
//! hidden 256,128,64   (mlp only)
//! layers 3            (gat only)
//! embed 32            (gat only)
//! node_features 6
//! global_features 4
//! outputs 14
//! array mlp.0.weight 130,256
//! ...
//! data
//! ```
//!
//! After the `data\n` line come the arrays in header order, each a run of
//! little-endian IEEE-754 doubles, row-major.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use super::{Architecture, NetworkConfig, ParamArray, Parameters, QNetwork};
use crate::{Error, Result};

pub const MAGIC: &str = "OPSEL-CKPT";
pub const VERSION: u32 = 1;

fn join(values: &[usize]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub fn to_bytes(network: &QNetwork) -> Vec<u8> {
    let cfg = network.config();
    let mut head = String::new();
    let _ = writeln!(head, "{MAGIC} {VERSION}");
    match &cfg.arch {
        Architecture::Mlp { nodes, hidden } => {
            let _ = writeln!(head, "arch mlp\nnodes {nodes}\nhidden {}", join(hidden));
        }
        Architecture::Gat { layers, embed } => {
            let _ = writeln!(head, "arch gat\nlayers {layers}\nembed {embed}");
        }
    }
    let _ = writeln!(head, "node_features {}", cfg.node_features);
    let _ = writeln!(head, "global_features {}", cfg.global_features);
    let _ = writeln!(head, "outputs {}", cfg.outputs);
    for a in network.params().arrays() {
        let _ = writeln!(head, "array {} {}", a.name, join(&a.shape));
    }
    head.push_str("data\n");
    let mut out = head.into_bytes();
    for a in network.params().arrays() {
        for x in &a.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn parse_usize(v: &str, key: &str) -> Result<usize> {
    v.parse().map_err(|_| bad(format!("`{key}` expects an integer, got `{v}`")))
}

fn parse_list(v: &str, key: &str) -> Result<Vec<usize>> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|t| parse_usize(t, key)).collect()
}

pub fn from_bytes(bytes: &[u8]) -> Result<QNetwork> {
    let mut pos = 0;
    let mut next_line = || -> Result<&str> {
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad("truncated header"))?;
        pos += end + 1;
        core::str::from_utf8(&rest[..end]).map_err(|_| bad("header is not UTF-8"))
    };

    let first = next_line().map_err(|_| Error::CheckpointVersion {
        found: String::from("<none>"),
        expected: VERSION,
    })?;
    match first.split_once(' ') {
        Some((MAGIC, v)) if v == VERSION.to_string() => {}
        _ => {
            return Err(Error::CheckpointVersion {
                found: first.chars().take(40).collect(),
                expected: VERSION,
            })
        }
    }

    let (mut arch, mut nodes, mut hidden, mut layers, mut embed) = (None, None, None, None, None);
    let (mut node_features, mut global_features, mut outputs) = (None, None, None);
    let mut shapes: Vec<(String, Vec<usize>)> = Vec::new();
    loop {
        let line = next_line()?;
        if line == "data" {
            break;
        }
        let (key, value) = line.split_once(' ').unwrap_or((line, ""));
        match key {
            "arch" => arch = Some(String::from(value)),
            "nodes" => nodes = Some(parse_usize(value, key)?),
            "hidden" => hidden = Some(parse_list(value, key)?),
            "layers" => layers = Some(parse_usize(value, key)?),
            "embed" => embed = Some(parse_usize(value, key)?),
            "node_features" => node_features = Some(parse_usize(value, key)?),
            "global_features" => global_features = Some(parse_usize(value, key)?),
            "outputs" => outputs = Some(parse_usize(value, key)?),
            "array" => {
                let (name, shape) = value.split_once(' ').ok_or_else(|| bad("array line needs a name and a shape"))?;
                shapes.push((String::from(name), parse_list(shape, key)?));
            }
            _ => return Err(bad(format!("unknown header key `{key}`"))),
        }
    }
    let need = |v: Option<usize>, key: &str| v.ok_or_else(|| bad(format!("missing `{key}`")));
    let arch = match arch.as_deref() {
        Some("mlp") => Architecture::Mlp {
            nodes: need(nodes, "nodes")?,
            hidden: hidden.ok_or_else(|| bad("missing `hidden`"))?,
        },
        Some("gat") => Architecture::Gat {
            layers: need(layers, "layers")?,
            embed: need(embed, "embed")?,
        },
        Some(other) => return Err(bad(format!("unknown architecture `{other}`"))),
        None => return Err(bad("missing `arch`")),
    };
    let config = NetworkConfig {
        arch,
        node_features: need(node_features, "node_features")?,
        global_features: need(global_features, "global_features")?,
        outputs: need(outputs, "outputs")?,
    };

    let mut data = &bytes[pos..];
    let mut arrays = Vec::with_capacity(shapes.len());
    for (name, shape) in shapes {
        let len: usize = shape.iter().product();
        if data.len() < len * 8 {
            return Err(bad(format!("truncated data in array `{name}`")));
        }
        let values = data[..len * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        data = &data[len * 8..];
        arrays.push(ParamArray {
            name,
            shape,
            data: values,
        });
    }
    if !data.is_empty() {
        return Err(bad(format!("{} trailing bytes after the last array", data.len())));
    }
    QNetwork::from_parameters(config, Parameters::new(arrays))
}
