//! Fully connected network: affine + ReLU through the hidden layers, affine
//! output. Weights are stored `(in, out)` row-major.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::kernels::{axpy, dot, vecmat};
use super::params::{ParamArray, Parameters};
use crate::{Error, Result};

pub(crate) fn init<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Vec<ParamArray> {
    let mut arrays = Vec::new();
    for (k, pair) in widths.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let mut w = ParamArray::zeros(format!("mlp.{k}.weight"), &[fan_in, fan_out]);
        super::glorot(&mut w.data, fan_in, fan_out, rng);
        arrays.push(w);
        arrays.push(ParamArray::zeros(format!("mlp.{k}.bias"), &[fan_out]));
    }
    arrays
}

/// Activations entering each layer, `batch × width` row-major.
#[derive(Debug, Clone)]
pub(crate) struct MlpTape {
    pub(crate) batch: usize,
    pub(crate) inputs: Vec<Vec<f64>>,
}

pub(crate) fn forward(params: &Parameters, widths: &[usize], x: &[f64], batch: usize) -> Result<(Vec<f64>, MlpTape)> {
    if x.len() != batch * widths[0] {
        return Err(Error::Shape(format!(
            "mlp expects {} inputs per sample, got {} values for batch {batch}",
            widths[0],
            x.len()
        )));
    }
    let layers = widths.len() - 1;
    let arrays = params.arrays();
    let mut inputs = Vec::with_capacity(layers);
    let mut cur = x.to_vec();
    for k in 0..layers {
        let (fan_in, fan_out) = (widths[k], widths[k + 1]);
        let w = &arrays[2 * k].data;
        let b = &arrays[2 * k + 1].data;
        let mut next = alloc::vec![0.0; batch * fan_out];
        for s in 0..batch {
            let out = &mut next[s * fan_out..(s + 1) * fan_out];
            vecmat(&cur[s * fan_in..(s + 1) * fan_in], w, out);
            for (o, bi) in out.iter_mut().zip(b) {
                *o += bi;
                if k + 1 < layers && *o < 0.0 {
                    *o = 0.0;
                }
            }
        }
        inputs.push(core::mem::replace(&mut cur, next));
    }
    Ok((cur, MlpTape { batch, inputs }))
}

pub(crate) fn backward(params: &Parameters, widths: &[usize], tape: &MlpTape, grad_out: &[f64]) -> Parameters {
    let layers = widths.len() - 1;
    let batch = tape.batch;
    let arrays = params.arrays();
    let mut grads = Parameters::zeros_like(params);
    let mut g = grad_out.to_vec();
    for k in (0..layers).rev() {
        let (fan_in, fan_out) = (widths[k], widths[k + 1]);
        let x = &tape.inputs[k];
        let w = &arrays[2 * k].data;
        let mut gx = if k > 0 { alloc::vec![0.0; batch * fan_in] } else { Vec::new() };
        {
            let ga = grads.arrays_mut();
            let (gw, rest) = ga[2 * k..].split_at_mut(1);
            let gw = &mut gw[0].data;
            let gb = &mut rest[0].data;
            for s in 0..batch {
                let gs = &g[s * fan_out..(s + 1) * fan_out];
                axpy(1.0, gs, gb);
                let xs = &x[s * fan_in..(s + 1) * fan_in];
                for (i, &xi) in xs.iter().enumerate() {
                    if xi == 0.0 {
                        // Zero input: no weight gradient, and for hidden
                        // layers the ReLU that produced it is inactive.
                        continue;
                    }
                    let row = i * fan_out..(i + 1) * fan_out;
                    axpy(xi, gs, &mut gw[row.clone()]);
                    if k > 0 {
                        gx[s * fan_in + i] = dot(&w[row], gs);
                    }
                }
            }
        }
        g = gx;
    }
    grads
}
