//! Output layer on top of the last hidden state: affine map, per-unit batch
//! normalization, then softmax or independent sigmoids.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::data::TaskMode;
use crate::numeric::{sigmoid_scalar, softmax, Matrix, Rng};

pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Batch statistics, dropout active.
    Train,
    /// Running statistics, no dropout.
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    /// `C x H`
    pub w: Matrix,
    pub b: Vec<f64>,
    pub bn_scale: Vec<f64>,
    pub bn_shift: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub batch_norm: bool,
    /// Number of running-statistics updates so far.
    pub bn_updates: u64,
}

impl HeadParams {
    pub fn zeros(hidden: usize, outputs: usize, batch_norm: bool) -> Self {
        Self {
            w: Matrix::zeros(outputs, hidden),
            b: vec![0.0; outputs],
            bn_scale: vec![1.0; outputs],
            bn_shift: vec![0.0; outputs],
            running_mean: vec![0.0; outputs],
            running_var: vec![1.0; outputs],
            batch_norm,
            bn_updates: 0,
        }
    }

    /// Weights uniform in `±1/√H`, bias zero, identity normalization.
    pub fn init(hidden: usize, outputs: usize, batch_norm: bool, rng: &mut Rng) -> Self {
        let mut head = Self::zeros(hidden, outputs, batch_norm);
        let bound = 1.0 / (hidden as f64).sqrt();
        head.w
            .data_mut()
            .iter_mut()
            .for_each(|x| *x = rng.uniform_range(-bound, bound));
        head
    }

    pub fn outputs(&self) -> usize {
        self.b.len()
    }

    pub fn hidden(&self) -> usize {
        self.w.cols()
    }

    /// Trainable values in a fixed order: `W`, `b`, scale, shift.
    pub fn trainable(&self) -> Vec<f64> {
        let mut v = self.w.data().to_vec();
        v.extend_from_slice(&self.b);
        v.extend_from_slice(&self.bn_scale);
        v.extend_from_slice(&self.bn_shift);
        v
    }

    pub fn trainable_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w.data_mut(), &mut self.b, &mut self.bn_scale, &mut self.bn_shift]
    }

    pub fn trainable_len(&self) -> usize {
        self.w.data().len() + 3 * self.b.len()
    }

    /// Named trainable blocks, for gradient reports.
    pub fn trainable_blocks(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("head_W", self.w.data()),
            ("head_b", &self.b),
            ("bn_scale", &self.bn_scale),
            ("bn_shift", &self.bn_shift),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.trainable().iter().all(|x| x.is_finite())
            && self.running_mean.iter().chain(&self.running_var).all(|x| x.is_finite())
    }

    /// Folds batch statistics into the running estimates.
    pub fn update_running(&mut self, batch_mean: &[f64], batch_var: &[f64]) {
        for c in 0..self.outputs() {
            self.running_mean[c] = BN_MOMENTUM * self.running_mean[c] + (1.0 - BN_MOMENTUM) * batch_mean[c];
            self.running_var[c] = BN_MOMENTUM * self.running_var[c] + (1.0 - BN_MOMENTUM) * batch_var[c];
        }
        self.bn_updates += 1;
    }
}

/// Everything the backward pass needs from a batch forward.
#[derive(Debug, Clone)]
pub struct HeadCache {
    pub phase: Phase,
    /// Hidden states after dropout, one per sample.
    pub inputs: Vec<Vec<f64>>,
    pub dropout: Vec<Option<Vec<f64>>>,
    /// Normalized logits (equal to raw logits without batch norm).
    pub normalized: Vec<Vec<f64>>,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
    pub probs: Vec<Vec<f64>>,
}

fn activate(task_mode: TaskMode, y: &[f64]) -> Vec<f64> {
    if task_mode.is_multiclass() {
        softmax(y)
    } else {
        y.iter().map(|&v| sigmoid_scalar(v)).collect()
    }
}

/// Inverted-dropout mask for one hidden state: entries are 0 or `1/(1−rate)`.
pub fn head_dropout_mask(hidden: usize, rate: f64, rng: &mut Rng) -> Vec<f64> {
    let keep = 1.0 - rate;
    (0..hidden)
        .map(|_| if rng.uniform() < keep { 1.0 / keep } else { 0.0 })
        .collect()
}

/// Forward pass over a batch of final hidden states.
///
/// `dropout` supplies per-sample inverted-dropout masks (train phase only).
pub fn head_forward(
    head: &HeadParams,
    hs: &[&[f64]],
    dropout: &[Option<Vec<f64>>],
    task_mode: TaskMode,
    phase: Phase,
) -> HeadCache {
    let n = hs.len();
    let c = head.outputs();
    let inputs: Vec<Vec<f64>> = hs
        .iter()
        .enumerate()
        .map(|(i, h)| match dropout.get(i).and_then(|m| m.as_ref()) {
            Some(mask) if phase == Phase::Train => h.iter().zip(mask).map(|(h, m)| h * m).collect(),
            _ => h.to_vec(),
        })
        .collect();
    let logits: Vec<Vec<f64>> = inputs
        .iter()
        .map(|h| {
            let mut a = head.b.clone();
            head.w.matvec_acc(h, &mut a);
            a
        })
        .collect();

    let mut batch_mean = vec![0.0; c];
    let mut batch_var = vec![0.0; c];
    let normalized = if !head.batch_norm {
        logits
    } else {
        let (mean, var) = match phase {
            Phase::Train => {
                for a in &logits {
                    for k in 0..c {
                        batch_mean[k] += a[k] / n as f64;
                    }
                }
                for a in &logits {
                    for k in 0..c {
                        batch_var[k] += (a[k] - batch_mean[k]).powi(2) / n as f64;
                    }
                }
                (&batch_mean, &batch_var)
            }
            Phase::Eval => {
                if head.bn_updates == 0 {
                    warn!("batch norm evaluated before any training step; using initial running statistics");
                }
                (&head.running_mean, &head.running_var)
            }
        };
        logits
            .iter()
            .map(|a| (0..c).map(|k| (a[k] - mean[k]) / (var[k] + BN_EPS).sqrt()).collect())
            .collect()
    };
    let probs = normalized
        .iter()
        .map(|xhat: &Vec<f64>| {
            let y: Vec<f64> = if head.batch_norm {
                (0..c).map(|k| head.bn_scale[k] * xhat[k] + head.bn_shift[k]).collect()
            } else {
                xhat.clone()
            };
            activate(task_mode, &y)
        })
        .collect();
    HeadCache {
        phase,
        inputs,
        dropout: dropout.to_vec(),
        normalized,
        batch_mean,
        batch_var,
        probs,
    }
}

/// Gradients of the head's trainable values, same layout as [`HeadParams::trainable`].
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGrad {
    pub w: Matrix,
    pub b: Vec<f64>,
    pub bn_scale: Vec<f64>,
    pub bn_shift: Vec<f64>,
}

impl HeadGrad {
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.w.data().to_vec();
        v.extend_from_slice(&self.b);
        v.extend_from_slice(&self.bn_scale);
        v.extend_from_slice(&self.bn_shift);
        v
    }
}

/// Backward pass given `dy[i] = ∂L/∂y_i` for the pre-activation outputs
/// `y_i` (the softmax/sigmoid inputs). Returns the head gradient and
/// `∂L/∂h_i` for every sample (before dropout).
pub fn head_backward(head: &HeadParams, cache: &HeadCache, dy: &[Vec<f64>]) -> (HeadGrad, Vec<Vec<f64>>) {
    let n = dy.len();
    let c = head.outputs();
    let mut grad = HeadGrad {
        w: Matrix::zeros(c, head.hidden()),
        b: vec![0.0; c],
        bn_scale: vec![0.0; c],
        bn_shift: vec![0.0; c],
    };

    let d_logits: Vec<Vec<f64>> = if !head.batch_norm {
        dy.to_vec()
    } else {
        let mut d_hat = vec![vec![0.0; c]; n];
        for i in 0..n {
            for k in 0..c {
                grad.bn_shift[k] += dy[i][k];
                grad.bn_scale[k] += dy[i][k] * cache.normalized[i][k];
                d_hat[i][k] = dy[i][k] * head.bn_scale[k];
            }
        }
        match cache.phase {
            Phase::Eval => (0..n)
                .map(|i| {
                    (0..c)
                        .map(|k| d_hat[i][k] / (head.running_var[k] + BN_EPS).sqrt())
                        .collect()
                })
                .collect(),
            Phase::Train => {
                let nf = n as f64;
                let mut sum_d = vec![0.0; c];
                let mut sum_dx = vec![0.0; c];
                for i in 0..n {
                    for k in 0..c {
                        sum_d[k] += d_hat[i][k];
                        sum_dx[k] += d_hat[i][k] * cache.normalized[i][k];
                    }
                }
                (0..n)
                    .map(|i| {
                        (0..c)
                            .map(|k| {
                                let inv = 1.0 / (cache.batch_var[k] + BN_EPS).sqrt();
                                inv * (d_hat[i][k] - sum_d[k] / nf - cache.normalized[i][k] * sum_dx[k] / nf)
                            })
                            .collect()
                    })
                    .collect()
            }
        }
    };

    let mut dh = Vec::with_capacity(n);
    for i in 0..n {
        grad.w.add_outer(&d_logits[i], &cache.inputs[i]);
        for k in 0..c {
            grad.b[k] += d_logits[i][k];
        }
        let mut g = vec![0.0; head.hidden()];
        head.w.tmatvec_acc(&d_logits[i], &mut g);
        if cache.phase == Phase::Train {
            if let Some(mask) = &cache.dropout[i] {
                g.iter_mut().zip(mask).for_each(|(g, m)| *g *= m);
            }
        }
        dh.push(g);
    }
    (grad, dh)
}
