//! First-order optimisers over a flat parameter vector.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimiserKind {
    Adam,
    Adamw,
    Sgd,
}

#[derive(Debug, Clone)]
pub struct Optimiser {
    kind: OptimiserKind,
    lr: f64,
    weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Optimiser {
    pub fn new(kind: OptimiserKind, lr: f64, weight_decay: f64, n_params: usize) -> Self {
        Self {
            kind,
            lr,
            weight_decay,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    /// One update. Adam and SGD add `weight_decay·p` to the gradient; AdamW
    /// shrinks the parameters directly.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        match self.kind {
            OptimiserKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.lr * (g + self.weight_decay * *p);
                }
            }
            OptimiserKind::Adam | OptimiserKind::Adamw => {
                let decoupled = self.kind == OptimiserKind::Adamw;
                let bc1 = 1.0 - BETA1.powi(self.t);
                let bc2 = 1.0 - BETA2.powi(self.t);
                for i in 0..params.len() {
                    let mut g = grad[i];
                    if decoupled {
                        params[i] *= 1.0 - self.lr * self.weight_decay;
                    } else {
                        g += self.weight_decay * params[i];
                    }
                    self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
                    self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
                    let mhat = self.m[i] / bc1;
                    let vhat = self.v[i] / bc2;
                    params[i] -= self.lr * mhat / (vhat.sqrt() + EPS);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimise(kind: OptimiserKind, lr: f64) -> f64 {
        // f(p) = (p - 3)²
        let mut p = vec![0.0];
        let mut opt = Optimiser::new(kind, lr, 0.0, 1);
        for _ in 0..2000 {
            let g = vec![2.0 * (p[0] - 3.0)];
            opt.step(&mut p, &g);
        }
        p[0]
    }

    #[test]
    fn all_optimisers_converge_on_quadratic() {
        for kind in [OptimiserKind::Adam, OptimiserKind::Adamw, OptimiserKind::Sgd] {
            assert!((minimise(kind, 0.05) - 3.0).abs() < 1e-3, "{kind:?}");
        }
    }

    #[test]
    fn first_adam_step_has_size_lr() {
        let mut p = vec![1.0];
        let mut opt = Optimiser::new(OptimiserKind::Adam, 0.1, 0.0, 1);
        opt.step(&mut p, &[5.0]);
        assert!((p[0] - 0.9).abs() < 1e-6);
    }
}
