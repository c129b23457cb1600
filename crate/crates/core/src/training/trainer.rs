use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::config::TrainConfig;
use super::head::Phase;
use super::model::Model;
use super::objective::{batch_objective, Draws};
use crate::cells::CellKind;
use crate::data::{empirical_means, Dataset, NormStats, Sample};
use crate::error::{ensure, Result};
use crate::evaluation::mean_auc;
use crate::numeric::Rng;

const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_DRAWS: u64 = 3;

/// Cell kind and hidden size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub kind: CellKind,
    pub hidden: usize,
}

/// One line of the training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// `None` without a validation split (or with a single-class one).
    pub val_auc: Option<f64>,
    /// Mean imputation NLL over the epoch (GRU-IMP only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub train_aux_nll: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub history: Vec<EpochRecord>,
    /// Epoch whose weights were kept (0 = initialization).
    pub best_epoch: usize,
    pub best_val_auc: Option<f64>,
    /// Set when training stopped on a non-finite loss or gradient.
    pub aborted: Option<String>,
}

impl TrainOutcome {
    /// History as JSON lines.
    pub fn history_jsonl(&self) -> String {
        self.history
            .iter()
            .map(|r| serde_json::to_string(r).expect("history serializes") + "\n")
            .collect()
    }
}

/// Patience-based stopping on a score that should increase.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    best_epoch: usize,
    stale: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    /// New best; snapshot the weights.
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: None,
            best_epoch: 0,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, score: f64) -> StopDecision {
        if self.best.is_none_or(|b| score > b) {
            self.best = Some(score);
            self.best_epoch = epoch;
            self.stale = 0;
            return StopDecision::Improved;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// Splits a shuffled index list into batches; a trailing batch of one is
/// merged into its predecessor so batch statistics stay defined.
fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        out.pop();
        let start = (out.len() - 1) * size;
        let last = out.len() - 1;
        out[last] = &order[start..];
    }
    out
}

/// Validation score of `model`, or `None` when undefined.
pub fn validation_auc(model: &Model, dataset: &Dataset, indices: &[usize]) -> Result<Option<f64>> {
    if indices.is_empty() {
        return Ok(None);
    }
    let samples: Vec<&Sample> = indices.iter().map(|&i| &dataset.samples[i]).collect();
    let probs = model.predict(&samples)?;
    let labels: Vec<_> = samples.iter().map(|s| s.label.clone()).collect();
    Ok(mean_auc(&probs, &labels, dataset.task_mode))
}

/// Trains `arch` on an already normalized dataset.
///
/// Each epoch visits the training indices in a seeded shuffle; after it the
/// validation AUC decides early stopping and the best epoch's weights are
/// returned. Without a usable validation split every epoch counts as an
/// improvement and training runs to `max_epochs`.
pub fn train(
    arch: Architecture,
    dataset: &Dataset,
    train_idx: &[usize],
    val_idx: &[usize],
    means: Vec<f64>,
    normalization: NormStats,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    ensure!(!train_idx.is_empty(), Config, "empty training split");
    let mut init_rng = Rng::for_stream(config.seed, &[STREAM_INIT]);
    let mut model = Model::init(arch.kind, arch.hidden, dataset, means, normalization, config.batch_norm, &mut init_rng)?;
    let lambda = if arch.kind.has_imputer() { config.imp_lambda } else { 0.0 };
    let hyper = config.adam();
    let mut adam = AdamState::new(model.trainable().len());
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = model.clone();
    let mut history = Vec::new();
    let mut aborted = None;
    let mut order = train_idx.to_vec();

    'epochs: for epoch in 1..=config.max_epochs {
        Rng::for_stream(config.seed, &[STREAM_SHUFFLE, epoch as u64]).shuffle(&mut order);
        let mut loss_sum = 0.0;
        let mut aux_sum = 0.0;
        for batch in batches(&order, config.batch_size) {
            let samples: Vec<&Sample> = batch.iter().map(|&i| &dataset.samples[i]).collect();
            let draws = batch
                .iter()
                .map(|&i| {
                    let mut rng = Rng::for_stream(config.seed, &[STREAM_DRAWS, epoch as u64, i as u64]);
                    Draws::sample(&model, dataset.samples[i].len(), config.head_dropout, config.recurrent_dropout, &mut rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let res = batch_objective(&model, &samples, &draws, lambda, Phase::Train, true)?;
            let grad = res.flat_grad().expect("gradient requested");
            if !res.loss.is_finite() {
                aborted = Some(format!("non-finite loss in epoch {epoch}"));
                break 'epochs;
            }
            let mut values = model.trainable();
            if let Err(e) = adam.step(&mut values, &grad, &hyper) {
                aborted = Some(format!("epoch {epoch}: {e}"));
                break 'epochs;
            }
            if !values.iter().all(|v| v.is_finite()) {
                aborted = Some(format!("non-finite parameters in epoch {epoch}"));
                break 'epochs;
            }
            model.set_trainable(&values);
            if config.batch_norm {
                model.head.update_running(&res.batch_mean, &res.batch_var);
            }
            loss_sum += res.loss * batch.len() as f64;
            aux_sum += res.mean_aux * batch.len() as f64;
        }
        let n = order.len() as f64;
        let val_auc = validation_auc(&model, dataset, val_idx)?;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            val_auc,
            train_aux_nll: arch.kind.has_imputer().then_some(aux_sum / n),
        });
        debug!("epoch {epoch}: loss {:.6} val_auc {val_auc:?}", loss_sum / n);
        match val_auc {
            Some(score) => match stopper.observe(epoch, score) {
                StopDecision::Improved => best = model.clone(),
                StopDecision::Continue => {}
                StopDecision::Stop => {
                    info!("early stop at epoch {epoch}; best epoch {}", stopper.best_epoch());
                    break;
                }
            },
            // no validation signal: keep the latest weights
            None if stopper.best().is_none() => best = model.clone(),
            None => {}
        }
    }

    if let Some(msg) = &aborted {
        // `best` still holds the last finite checkpoint
        warn!("training aborted: {msg}");
    }
    let best_val_auc = stopper.best();
    let best_epoch = if best_val_auc.is_some() {
        stopper.best_epoch()
    } else {
        history.len()
    };
    debug_assert!(best_val_auc.is_none_or(|b| history.iter().all(|r| r.val_auc.is_none_or(|a| a <= b))));
    Ok(TrainOutcome {
        model: best,
        history,
        best_epoch,
        best_val_auc,
        aborted,
    })
}

/// Fits normalization and empirical means on `train_idx` of a raw dataset,
/// then trains. Validation and any other samples never influence the
/// statistics.
pub fn fit(
    arch: Architecture,
    raw: &Dataset,
    train_idx: &[usize],
    val_idx: &[usize],
    config: &TrainConfig,
) -> Result<(TrainOutcome, Dataset)> {
    let norm = NormStats::fit(raw, train_idx);
    let normalized = norm.apply(raw)?;
    let means = empirical_means(&normalized, train_idx).means;
    let outcome = train(arch, &normalized, train_idx, val_idx, means, norm, config)?;
    Ok((outcome, normalized))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Label, Sample, TaskMode};
    use crate::numeric::Matrix;

    #[test]
    fn stopping_rule() {
        let mut s = EarlyStopping::new(1);
        assert_eq!(s.observe(1, 0.9), StopDecision::Improved);
        assert_eq!(s.observe(2, 0.8), StopDecision::Stop);
        assert_eq!(s.best_epoch(), 1);
        let mut s = EarlyStopping::new(3);
        s.observe(1, 0.5);
        assert_eq!(s.observe(2, 0.5), StopDecision::Continue);
        assert_eq!(s.observe(3, 0.6), StopDecision::Improved);
    }

    #[test]
    fn batching_merges_singletons() {
        let order: Vec<usize> = (0..9).collect();
        let b = batches(&order, 4);
        assert_eq!(b.iter().map(|b| b.len()).collect::<Vec<_>>(), vec![4, 5]);
        assert_eq!(batches(&order[..1], 4).len(), 1);
        assert_eq!(batches(&order, 3).len(), 3);
    }

    /// Two-variable, three-step set whose class is the sign of the first
    /// variable's mean.
    pub(crate) fn separable(n: usize, seed: u64) -> Dataset {
        let mut rng = Rng::new(seed, 0);
        let samples = (0..n)
            .map(|i| {
                let y = i % 2;
                let sign = if y == 1 { 1.0 } else { -1.0 };
                let values = Matrix::from_fn(3, 2, |_, d| {
                    if d == 0 {
                        sign * (1.0 + rng.uniform())
                    } else {
                        rng.uniform_range(-1.0, 1.0)
                    }
                });
                Sample::new(format!("s{i}"), vec![0.0, 1.0, 2.0], values, Label::Tasks(vec![y as f64])).unwrap()
            })
            .collect();
        Dataset::new(samples, vec!["a".into(), "b".into()], vec!["y".into()], TaskMode::MultiTask(1)).unwrap()
    }

    fn plain_config(seed: u64) -> TrainConfig {
        TrainConfig {
            head_dropout: 0.0,
            recurrent_dropout: 0.0,
            batch_norm: false,
            learning_rate: 1e-2,
            batch_size: 8,
            max_epochs: 200,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn separable_toy_set_is_learned() {
        let ds = separable(32, 4);
        let idx: Vec<usize> = (0..32).collect();
        let arch = Architecture {
            kind: CellKind::GruMean,
            hidden: 4,
        };
        let (out, _) = fit(arch, &ds, &idx, &[], &plain_config(1)).unwrap();
        let last = out.history.last().unwrap();
        assert!(out.history.len() <= 200);
        assert!(last.train_loss < 0.1, "final loss {}", last.train_loss);
    }

    #[test]
    fn bit_identical_history() {
        let ds = separable(24, 2);
        let idx: Vec<usize> = (0..16).collect();
        let val: Vec<usize> = (16..24).collect();
        let cfg = TrainConfig {
            max_epochs: 5,
            batch_size: 6,
            ..Default::default()
        };
        for kind in [CellKind::GruD, CellKind::GruImp] {
            let arch = Architecture { kind, hidden: 3 };
            let a = fit(arch, &ds, &idx, &val, &cfg).unwrap().0;
            let b = fit(arch, &ds, &idx, &val, &cfg).unwrap().0;
            assert_eq!(a.history_jsonl(), b.history_jsonl());
            assert_eq!(a.model, b.model);
        }
    }

    #[test]
    fn best_epoch_weights_are_returned() {
        let ds = separable(40, 5);
        let idx: Vec<usize> = (0..24).collect();
        let val: Vec<usize> = (24..40).collect();
        let cfg = TrainConfig {
            max_epochs: 30,
            patience: 3,
            batch_size: 8,
            ..Default::default()
        };
        let arch = Architecture {
            kind: CellKind::GruD,
            hidden: 3,
        };
        let (out, normalized) = fit(arch, &ds, &idx, &val, &cfg).unwrap();
        let best = out.best_val_auc.unwrap();
        assert!(out.history.iter().all(|r| r.val_auc.unwrap() <= best));
        assert_eq!(validation_auc(&out.model, &normalized, &val).unwrap(), Some(best));
        let line = out.history_jsonl().lines().next().unwrap().to_string();
        assert!(line.starts_with("{\"epoch\":1,\"train_loss\":"));
    }
}
