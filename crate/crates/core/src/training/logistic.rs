//! Non-recurrent baseline: logistic regression on a fixed-length grid.

use serde::{Deserialize, Serialize};

use super::adam::{AdamHyper, AdamState};
use super::loss::{cross_entropy, output_gradient};
use super::trainer::{EarlyStopping, EpochRecord, StopDecision};
use crate::data::{Dataset, Label, Sample, TaskMode};
use crate::error::{ensure, Error, Result};
use crate::evaluation::mean_auc;
use crate::numeric::{sigmoid_scalar, softmax, Matrix, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticConfig {
    pub bin_hours: f64,
    /// Append the flattened masking grid to the features.
    pub with_masking: bool,
    pub l2: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            bin_hours: 1.0,
            with_masking: true,
            l2: 1e-3,
            learning_rate: 1e-2,
            batch_size: 32,
            max_epochs: 100,
            patience: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    /// `C x F`
    pub w: Matrix,
    pub b: Vec<f64>,
    pub task_mode: TaskMode,
    pub n_bins: usize,
    pub bin_hours: f64,
    pub with_masking: bool,
    pub n_vars: usize,
}

/// Number of bins covering `[0, horizon]`.
pub fn bin_count(horizon: f64, bin_hours: f64) -> usize {
    (horizon / bin_hours).floor() as usize + 1
}

/// Fixed-length features: the binned grid (in-bin means) filled forward then
/// backward per variable, zero where a variable is never observed, followed
/// by the binned masking grid when requested. Length `n_bins·D·(1 or 2)`.
pub fn featurize(sample: &Sample, n_bins: usize, bin_hours: f64, with_masking: bool) -> Vec<f64> {
    let d = sample.n_variables();
    let mut sum = vec![0.0; n_bins * d];
    let mut count = vec![0usize; n_bins * d];
    for t in 0..sample.len() {
        let bin = ((sample.timestamps[t] / bin_hours).floor() as usize).min(n_bins - 1);
        for v in 0..d {
            if sample.observed(t, v) {
                sum[bin * d + v] += sample.values[(t, v)];
                count[bin * d + v] += 1;
            }
        }
    }
    let mut grid = vec![0.0; n_bins * d];
    for v in 0..d {
        let mut last: Option<f64> = None;
        for k in 0..n_bins {
            let i = k * d + v;
            if count[i] > 0 {
                last = Some(sum[i] / count[i] as f64);
            }
            if let Some(x) = last {
                grid[i] = x;
            }
        }
        // backward fill the leading gap
        if let Some(first) = (0..n_bins).find(|&k| count[k * d + v] > 0) {
            let x = grid[first * d + v];
            for k in 0..first {
                grid[k * d + v] = x;
            }
        }
    }
    if with_masking {
        grid.extend(count.iter().map(|&c| (c > 0) as u8 as f64));
    }
    grid
}

impl LogisticModel {
    pub fn n_features(&self) -> usize {
        self.n_bins * self.n_vars * if self.with_masking { 2 } else { 1 }
    }

    fn probs_of(&self, x: &[f64]) -> Vec<f64> {
        let mut a = self.b.clone();
        self.w.matvec_acc(x, &mut a);
        if self.task_mode.is_multiclass() {
            softmax(&a)
        } else {
            a.into_iter().map(sigmoid_scalar).collect()
        }
    }

    pub fn predict(&self, samples: &[&Sample]) -> Vec<Vec<f64>> {
        samples
            .iter()
            .map(|s| self.probs_of(&featurize(s, self.n_bins, self.bin_hours, self.with_masking)))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct LogisticOutcome {
    pub model: LogisticModel,
    pub history: Vec<EpochRecord>,
    pub best_val_auc: Option<f64>,
}

/// Trains the baseline with mini-batch Adam on cross-entropy plus
/// `l2/2 · ‖W‖²`, early-stopping on validation AUC when a validation split
/// is given.
pub fn logistic_baseline(
    dataset: &Dataset,
    train_idx: &[usize],
    val_idx: &[usize],
    cfg: &LogisticConfig,
) -> Result<LogisticOutcome> {
    ensure!(cfg.bin_hours > 0.0, Config, "bin_hours must be positive");
    ensure!(cfg.l2 >= 0.0 && cfg.learning_rate > 0.0, Config, "l2 must be >= 0 and learning_rate > 0");
    ensure!(cfg.batch_size >= 1 && cfg.max_epochs >= 1 && cfg.patience >= 1, Config, "batch_size, max_epochs and patience must be >= 1");
    ensure!(!train_idx.is_empty(), Config, "empty training split");
    let n_bins = bin_count(dataset.horizon(), cfg.bin_hours);
    let c = dataset.task_mode.arity();
    let mut model = LogisticModel {
        w: Matrix::zeros(c, 0),
        b: vec![0.0; c],
        task_mode: dataset.task_mode,
        n_bins,
        bin_hours: cfg.bin_hours,
        with_masking: cfg.with_masking,
        n_vars: dataset.n_variables(),
    };
    let f = model.n_features();
    model.w = Matrix::zeros(c, f);
    let features: Vec<Vec<f64>> = dataset
        .samples
        .iter()
        .map(|s| featurize(s, n_bins, cfg.bin_hours, cfg.with_masking))
        .collect();

    let hyper = AdamHyper {
        learning_rate: cfg.learning_rate,
        ..Default::default()
    };
    let mut adam = AdamState::new(c * f + c);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = model.clone();
    let mut history = Vec::new();
    let mut order = train_idx.to_vec();
    let labels: Vec<Label> = dataset.labels();

    for epoch in 1..=cfg.max_epochs {
        Rng::for_stream(cfg.seed, &[0x6c72, epoch as u64]).shuffle(&mut order);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let n = batch.len() as f64;
            let mut gw = Matrix::zeros(c, f);
            let mut gb = vec![0.0; c];
            for &i in batch {
                let p = model.probs_of(&features[i]);
                loss_sum += cross_entropy(&p, &labels[i], dataset.task_mode);
                let g: Vec<f64> = output_gradient(&p, &labels[i], dataset.task_mode).iter().map(|g| g / n).collect();
                gw.add_outer(&g, &features[i]);
                for k in 0..c {
                    gb[k] += g[k];
                }
            }
            let mut grad = gw.data().to_vec();
            grad.iter_mut().zip(model.w.data()).for_each(|(g, w)| *g += cfg.l2 * w);
            grad.extend(&gb);
            let mut values = model.w.data().to_vec();
            values.extend(&model.b);
            adam.step(&mut values, &grad, &hyper)?;
            model.w.data_mut().copy_from_slice(&values[..c * f]);
            model.b.copy_from_slice(&values[c * f..]);
        }
        let train_loss = loss_sum / order.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::Numerical(format!("baseline loss diverged in epoch {epoch}")));
        }
        let val_auc = if val_idx.is_empty() {
            None
        } else {
            let probs: Vec<Vec<f64>> = val_idx.iter().map(|&i| model.probs_of(&features[i])).collect();
            let labs: Vec<Label> = val_idx.iter().map(|&i| labels[i].clone()).collect();
            mean_auc(&probs, &labs, dataset.task_mode)
        };
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_auc,
            train_aux_nll: None,
        });
        match val_auc {
            Some(score) => match stopper.observe(epoch, score) {
                StopDecision::Improved => best = model.clone(),
                StopDecision::Continue => {}
                StopDecision::Stop => break,
            },
            None => best = model.clone(),
        }
    }
    Ok(LogisticOutcome {
        model: best,
        history,
        best_val_auc: stopper.best(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::MISSING;

    #[test]
    fn feature_layout_and_fill() {
        let values = Matrix::from_rows(&[vec![MISSING, 1.0], vec![4.0, MISSING], vec![MISSING, MISSING]]).unwrap();
        let s = Sample::new("a", vec![0.0, 1.5, 3.2], values, Label::Class(0)).unwrap();
        let n_bins = bin_count(3.2, 1.0);
        assert_eq!(n_bins, 4);
        let f = featurize(&s, n_bins, 1.0, true);
        assert_eq!(f.len(), 4 * 2 * 2);
        // variable 0: observed in bin 1 only → backward then forward fill
        assert_eq!([f[0], f[2], f[4], f[6]], [4.0; 4]);
        assert_eq!([f[1], f[3], f[5], f[7]], [1.0; 4]);
        assert_eq!(&f[8..], &[0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(featurize(&s, n_bins, 1.0, false).len(), 8);
    }

    #[test]
    fn deterministic() {
        let ds = crate::data::generate_mask_signal(60, 3, 6, 0.6, 1).unwrap();
        let idx: Vec<usize> = (0..40).collect();
        let val: Vec<usize> = (40..60).collect();
        let cfg = LogisticConfig {
            max_epochs: 5,
            ..Default::default()
        };
        let a = logistic_baseline(&ds, &idx, &val, &cfg).unwrap();
        let b = logistic_baseline(&ds, &idx, &val, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.history, b.history);
    }
}
