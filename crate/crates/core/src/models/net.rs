//! Fully connected networks on a flat parameter vector.
//!
//! Zero hidden layers gives logistic regression. Each hidden layer is
//! `Linear (no bias) → BatchNorm → LeakyReLU(0.01)`; the output is a single
//! biased linear unit producing a logit.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub const LEAKY_SLOPE: f64 = 0.01;
pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNormStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    /// Layer widths, input first, output (always 1) last.
    pub dims: Vec<usize>,
    pub params: Vec<f64>,
    pub running: Vec<BatchNormStats>,
}

#[derive(Debug, Clone, Copy)]
struct HiddenLayout {
    w: usize,
    gamma: usize,
    beta: usize,
    din: usize,
    dout: usize,
}

pub enum Init {
    Zero,
    KaimingNormal,
}

/// Result of a training-mode forward/backward pass.
pub struct Pass {
    pub loss: f64,
    pub grad: Vec<f64>,
    /// Per hidden layer: batch mean and unbiased batch variance.
    pub batch_stats: Vec<BatchNormStats>,
}

fn leaky(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        LEAKY_SLOPE * v
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy on a logit, stable for large |z|.
pub fn bce_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

impl Network {
    pub fn new<R: Rng>(dims: Vec<usize>, init: Init, rng: &mut R) -> Self {
        assert!(dims.len() >= 2 && *dims.last().unwrap() == 1, "network must end in one unit");
        let mut net = Self {
            params: Vec::new(),
            running: Vec::new(),
            dims,
        };
        let n_hidden = net.dims.len() - 2;
        for l in 0..=n_hidden {
            let (din, dout) = (net.dims[l], net.dims[l + 1]);
            match init {
                Init::Zero => net.params.extend(std::iter::repeat_n(0.0, din * dout)),
                Init::KaimingNormal => {
                    let normal = Normal::new(0.0, (2.0 / din as f64).sqrt()).expect("finite std");
                    net.params.extend((0..din * dout).map(|_| normal.sample(rng)));
                }
            }
            if l < n_hidden {
                net.params.extend(std::iter::repeat_n(1.0, dout));
                net.params.extend(std::iter::repeat_n(0.0, dout));
                net.running.push(BatchNormStats {
                    mean: vec![0.0; dout],
                    var: vec![1.0; dout],
                });
            } else {
                net.params.push(0.0);
            }
        }
        net
    }

    pub fn n_inputs(&self) -> usize {
        self.dims[0]
    }

    fn n_hidden(&self) -> usize {
        self.dims.len() - 2
    }

    fn layout(&self) -> (Vec<HiddenLayout>, usize, usize) {
        let mut off = 0;
        let mut hidden = Vec::new();
        for l in 0..self.n_hidden() {
            let (din, dout) = (self.dims[l], self.dims[l + 1]);
            hidden.push(HiddenLayout {
                w: off,
                gamma: off + din * dout,
                beta: off + din * dout + dout,
                din,
                dout,
            });
            off += din * dout + 2 * dout;
        }
        let out_w = off;
        let out_b = off + self.dims[self.n_hidden()];
        (hidden, out_w, out_b)
    }

    fn weights(&self, at: usize, dout: usize, din: usize) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((dout, din), &self.params[at..at + dout * din]).expect("layout")
    }

    /// Inference-mode logits (batch norm uses running statistics).
    pub fn logits(&self, x: ArrayView2<f64>) -> Vec<f64> {
        let (hidden, out_w, out_b) = self.layout();
        let mut a = x.to_owned();
        for (l, h) in hidden.iter().enumerate() {
            let mut z = a.dot(&self.weights(h.w, h.dout, h.din).t());
            let stats = &self.running[l];
            for (j, mut col) in z.axis_iter_mut(Axis(1)).enumerate() {
                let inv = 1.0 / (stats.var[j] + BN_EPS).sqrt();
                let (g, b, m) = (self.params[h.gamma + j], self.params[h.beta + j], stats.mean[j]);
                col.mapv_inplace(|v| leaky(g * (v - m) * inv + b));
            }
            a = z;
        }
        let w = ArrayView1::from(&self.params[out_w..out_b]);
        let b = self.params[out_b];
        a.dot(&w).iter().map(|v| v + b).collect()
    }

    /// Training-mode mean BCE loss and its gradient. `weight` scales each
    /// sample's loss; the mean divides by the batch size.
    pub fn loss_and_grad(&self, x: ArrayView2<f64>, y: &[f64], weight: &[f64]) -> Pass {
        let n = x.nrows();
        let nf = n as f64;
        let (hidden, out_w, out_b) = self.layout();
        let mut grad = vec![0.0; self.params.len()];
        let mut inputs: Vec<Array2<f64>> = vec![x.to_owned()];
        // (xhat, inv_std, bn output)
        let mut caches: Vec<(Array2<f64>, Array1<f64>, Array2<f64>)> = Vec::new();
        let mut batch_stats = Vec::new();
        for h in &hidden {
            let z = inputs.last().unwrap().dot(&self.weights(h.w, h.dout, h.din).t());
            let mean = z.mean_axis(Axis(0)).expect("non-empty batch");
            let centred = &z - &mean;
            let var = centred.mapv(|v| v * v).sum_axis(Axis(0)) / nf;
            let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
            let xhat = &centred * &inv_std;
            let gamma = ArrayView1::from(&self.params[h.gamma..h.gamma + h.dout]);
            let beta = ArrayView1::from(&self.params[h.beta..h.beta + h.dout]);
            let bn = &xhat * &gamma + &beta;
            inputs.push(bn.mapv(leaky));
            let unbiased = if n > 1 { &var * (nf / (nf - 1.0)) } else { var.clone() };
            batch_stats.push(BatchNormStats {
                mean: mean.to_vec(),
                var: unbiased.to_vec(),
            });
            caches.push((xhat, inv_std, bn));
        }
        let last = inputs.last().unwrap();
        let w_out = ArrayView1::from(&self.params[out_w..out_b]);
        let logits = last.dot(&w_out) + self.params[out_b];
        let mut loss = 0.0;
        let mut dlogit = Array1::<f64>::zeros(n);
        for i in 0..n {
            loss += weight[i] * bce_logit(logits[i], y[i]);
            dlogit[i] = weight[i] * (sigmoid(logits[i]) - y[i]) / nf;
        }
        loss /= nf;
        let gw = last.t().dot(&dlogit);
        grad[out_w..out_b].copy_from_slice(gw.as_slice().expect("contiguous"));
        grad[out_b] = dlogit.sum();
        let mut da = dlogit.insert_axis(Axis(1)).dot(&w_out.insert_axis(Axis(0)));
        for (l, h) in hidden.iter().enumerate().rev() {
            let (xhat, inv_std, bn) = &caches[l];
            let dy = ndarray::Zip::from(&da)
                .and(bn)
                .map_collect(|&d, &v| if v > 0.0 { d } else { LEAKY_SLOPE * d });
            let dgamma = (&dy * xhat).sum_axis(Axis(0));
            let dbeta = dy.sum_axis(Axis(0));
            grad[h.gamma..h.gamma + h.dout].copy_from_slice(dgamma.as_slice().expect("contiguous"));
            grad[h.beta..h.beta + h.dout].copy_from_slice(dbeta.as_slice().expect("contiguous"));
            let gamma = ArrayView1::from(&self.params[h.gamma..h.gamma + h.dout]);
            let dxhat = &dy * &gamma;
            let sum_dxhat = dxhat.sum_axis(Axis(0));
            let sum_dxhat_xhat = (&dxhat * xhat).sum_axis(Axis(0));
            let dz = (&dxhat * nf - &sum_dxhat - xhat * &sum_dxhat_xhat) * &(inv_std / nf);
            let dw = dz.t().dot(&inputs[l]);
            grad[h.w..h.w + h.dout * h.din].copy_from_slice(dw.as_standard_layout().as_slice().expect("contiguous"));
            if l > 0 {
                da = dz.dot(&self.weights(h.w, h.dout, h.din));
            }
        }
        Pass {
            loss,
            grad,
            batch_stats,
        }
    }

    pub fn update_running(&mut self, batch: &[BatchNormStats]) {
        for (run, b) in self.running.iter_mut().zip(batch) {
            for j in 0..run.mean.len() {
                run.mean[j] = (1.0 - BN_MOMENTUM) * run.mean[j] + BN_MOMENTUM * b.mean[j];
                run.var[j] = (1.0 - BN_MOMENTUM) * run.var[j] + BN_MOMENTUM * b.var[j];
            }
        }
    }

    /// Inference-mode weighted mean BCE.
    pub fn eval_loss(&self, x: ArrayView2<f64>, y: &[f64], weight: &[f64]) -> f64 {
        let z = self.logits(x);
        let n = z.len().max(1) as f64;
        z.iter()
            .zip(y)
            .zip(weight)
            .map(|((&z, &y), &w)| w * bce_logit(z, y))
            .sum::<f64>()
            / n
    }
}
