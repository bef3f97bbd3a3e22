//! Single-head graph attention over the complete graph with self-loops,
//! followed by mean pooling, concatenation of the global features and an
//! affine head.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::kernels::{axpy, dot, vecmat};
use super::params::{ParamArray, Parameters};
use crate::math::{exp, expm1};
use crate::{Error, Result};

pub(crate) const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct GatDims {
    pub node_features: usize,
    pub global_features: usize,
    pub embed: usize,
    pub layers: usize,
    pub outputs: usize,
}

impl GatDims {
    fn layer_in(&self, l: usize) -> usize {
        if l == 0 {
            self.node_features
        } else {
            self.embed
        }
    }

    fn head_in(&self) -> usize {
        self.embed + self.global_features
    }
}

pub(crate) fn init<R: Rng + ?Sized>(dims: GatDims, rng: &mut R) -> Vec<ParamArray> {
    let mut arrays = Vec::new();
    for l in 0..dims.layers {
        let f_in = dims.layer_in(l);
        let mut w = ParamArray::zeros(format!("gat.{l}.weight"), &[f_in, dims.embed]);
        super::glorot(&mut w.data, f_in, dims.embed, rng);
        arrays.push(w);
        for side in ["att_src", "att_dst"] {
            let mut a = ParamArray::zeros(format!("gat.{l}.{side}"), &[dims.embed]);
            super::glorot(&mut a.data, dims.embed, 1, rng);
            arrays.push(a);
        }
    }
    let mut w = ParamArray::zeros("head.weight", &[dims.head_in(), dims.outputs]);
    super::glorot(&mut w.data, dims.head_in(), dims.outputs, rng);
    arrays.push(w);
    arrays.push(ParamArray::zeros("head.bias", &[dims.outputs]));
    arrays
}

#[derive(Debug, Clone)]
struct LayerTape {
    input: Vec<f64>,
    z: Vec<f64>,
    alpha: Vec<f64>,
    positive: Vec<bool>,
    out: Vec<f64>,
}

/// Intermediates of one sample.
#[derive(Debug, Clone)]
pub(crate) struct GatTape {
    n: usize,
    layers: Vec<LayerTape>,
    head_input: Vec<f64>,
}

fn layer_forward(h: &[f64], n: usize, f_in: usize, embed: usize, w: &[f64], a_src: &[f64], a_dst: &[f64]) -> LayerTape {
    let mut z = alloc::vec![0.0; n * embed];
    for i in 0..n {
        vecmat(&h[i * f_in..(i + 1) * f_in], w, &mut z[i * embed..(i + 1) * embed]);
    }
    let s: Vec<f64> = (0..n).map(|i| dot(a_src, &z[i * embed..(i + 1) * embed])).collect();
    let t: Vec<f64> = (0..n).map(|j| dot(a_dst, &z[j * embed..(j + 1) * embed])).collect();
    let mut alpha = alloc::vec![0.0; n * n];
    let mut positive = alloc::vec![false; n * n];
    let mut out = alloc::vec![0.0; n * embed];
    for i in 0..n {
        let row = &mut alpha[i * n..(i + 1) * n];
        let mut max = f64::NEG_INFINITY;
        for j in 0..n {
            let pre = s[i] + t[j];
            positive[i * n + j] = pre > 0.0;
            let e = if pre > 0.0 { pre } else { LEAKY_SLOPE * pre };
            row[j] = e;
            max = max.max(e);
        }
        let mut total = 0.0;
        for e in row.iter_mut() {
            *e = exp(*e - max);
            total += *e;
        }
        let u = &mut out[i * embed..(i + 1) * embed];
        for j in 0..n {
            row[j] /= total;
            axpy(row[j], &z[j * embed..(j + 1) * embed], u);
        }
        for x in u.iter_mut() {
            if *x <= 0.0 {
                *x = expm1(*x);
            }
        }
    }
    LayerTape {
        input: h.to_vec(),
        z,
        alpha,
        positive,
        out,
    }
}

/// Forward pass of one graph. `nodes` is `n × node_features` row-major.
pub(crate) fn forward(params: &Parameters, dims: GatDims, nodes: &[f64], n: usize, globals: &[f64]) -> Result<(Vec<f64>, GatTape)> {
    if n == 0 || nodes.len() != n * dims.node_features || globals.len() != dims.global_features {
        return Err(Error::Shape(format!(
            "gat expects {} features per node and {} globals, got {} values for {n} nodes and {} globals",
            dims.node_features,
            dims.global_features,
            nodes.len(),
            globals.len()
        )));
    }
    let arrays = params.arrays();
    let mut layers = Vec::with_capacity(dims.layers);
    let mut h = nodes.to_vec();
    for l in 0..dims.layers {
        let tape = layer_forward(
            &h,
            n,
            dims.layer_in(l),
            dims.embed,
            &arrays[3 * l].data,
            &arrays[3 * l + 1].data,
            &arrays[3 * l + 2].data,
        );
        h = tape.out.clone();
        layers.push(tape);
    }
    let mut head_input = alloc::vec![0.0; dims.head_in()];
    for i in 0..n {
        axpy(1.0 / n as f64, &h[i * dims.embed..(i + 1) * dims.embed], &mut head_input[..dims.embed]);
    }
    head_input[dims.embed..].copy_from_slice(globals);
    let hw = &arrays[3 * dims.layers].data;
    let hb = &arrays[3 * dims.layers + 1].data;
    let mut q = alloc::vec![0.0; dims.outputs];
    vecmat(&head_input, hw, &mut q);
    axpy(1.0, hb, &mut q);
    Ok((q, GatTape { n, layers, head_input }))
}

/// Accumulates the parameter gradients of one sample into `grads`.
pub(crate) fn backward(params: &Parameters, dims: GatDims, tape: &GatTape, dq: &[f64], grads: &mut Parameters) {
    let n = tape.n;
    let embed = dims.embed;
    let arrays = params.arrays();
    let head = 3 * dims.layers;
    let hw = &arrays[head].data;
    {
        let ga = grads.arrays_mut();
        for (k, &x) in tape.head_input.iter().enumerate() {
            if x != 0.0 {
                axpy(x, dq, &mut ga[head].data[k * dims.outputs..(k + 1) * dims.outputs]);
            }
        }
        axpy(1.0, dq, &mut ga[head + 1].data);
    }
    let mut dh = alloc::vec![0.0; n * embed];
    for k in 0..embed {
        let dp = dot(&hw[k * dims.outputs..(k + 1) * dims.outputs], dq) / n as f64;
        for i in 0..n {
            dh[i * embed + k] = dp;
        }
    }

    for l in (0..dims.layers).rev() {
        let lt = &tape.layers[l];
        let f_in = dims.layer_in(l);
        let w = &arrays[3 * l].data;
        let a_src = &arrays[3 * l + 1].data;
        let a_dst = &arrays[3 * l + 2].data;

        // Through the ELU: derivative is 1 above zero and exp(u) = out + 1 below.
        let mut du = dh;
        for (g, &o) in du.iter_mut().zip(&lt.out) {
            if o <= 0.0 {
                *g *= o + 1.0;
            }
        }

        let mut dz = alloc::vec![0.0; n * embed];
        let mut ds = alloc::vec![0.0; n];
        let mut dt = alloc::vec![0.0; n];
        let mut dalpha = alloc::vec![0.0; n];
        for i in 0..n {
            let dui = &du[i * embed..(i + 1) * embed];
            let arow = &lt.alpha[i * n..(i + 1) * n];
            let mut weighted = 0.0;
            for j in 0..n {
                dalpha[j] = dot(dui, &lt.z[j * embed..(j + 1) * embed]);
                weighted += arow[j] * dalpha[j];
                axpy(arow[j], dui, &mut dz[j * embed..(j + 1) * embed]);
            }
            for j in 0..n {
                let de = arow[j] * (dalpha[j] - weighted);
                let dpre = if lt.positive[i * n + j] { de } else { LEAKY_SLOPE * de };
                ds[i] += dpre;
                dt[j] += dpre;
            }
        }

        let ga = grads.arrays_mut();
        for i in 0..n {
            let zi = &lt.z[i * embed..(i + 1) * embed];
            axpy(ds[i], zi, &mut ga[3 * l + 1].data);
            axpy(dt[i], zi, &mut ga[3 * l + 2].data);
            let dzi = &mut dz[i * embed..(i + 1) * embed];
            axpy(ds[i], a_src, dzi);
            axpy(dt[i], a_dst, dzi);
        }

        let mut dh_in = if l > 0 { alloc::vec![0.0; n * f_in] } else { Vec::new() };
        for i in 0..n {
            let dzi = &dz[i * embed..(i + 1) * embed];
            for k in 0..f_in {
                let x = lt.input[i * f_in + k];
                if x != 0.0 {
                    axpy(x, dzi, &mut ga[3 * l].data[k * embed..(k + 1) * embed]);
                }
                if l > 0 {
                    dh_in[i * f_in + k] = dot(&w[k * embed..(k + 1) * embed], dzi);
                }
            }
        }
        dh = dh_in;
    }
}

#[cfg(test)]
pub(crate) fn attention(params: &Parameters, dims: GatDims, nodes: &[f64], n: usize, globals: &[f64]) -> Vec<Vec<f64>> {
    let (_, tape) = forward(params, dims, nodes, n, globals).unwrap();
    tape.layers.into_iter().map(|l| l.alpha).collect()
}

#[cfg(test)]
pub(crate) fn embeddings(params: &Parameters, dims: GatDims, nodes: &[f64], n: usize, globals: &[f64]) -> Vec<Vec<f64>> {
    let (_, tape) = forward(params, dims, nodes, n, globals).unwrap();
    tape.layers.into_iter().map(|l| l.out).collect()
}
