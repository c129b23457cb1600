//! Cross-validation, online early prediction and training-size scaling.

use log::info;
use serde::{Deserialize, Serialize};

use super::auc::output_aucs;
use crate::data::{kfold_split, stratified_subsample, Dataset, Sample, TaskMode};
use crate::error::{ensure, Error, Result};
use crate::training::{fit, Architecture, Model, TrainConfig};

/// Mean and sample standard deviation over the folds where a value was
/// defined. `std` is 0 with a single value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let v: Vec<f64> = values.into_iter().flatten().collect();
        if v.is_empty() {
            return Self { mean: None, std: None, n: 0 };
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            mean: Some(mean),
            std: Some(std),
            n: v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    /// Seed the fold's model was trained with.
    pub seed: u64,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_auc: Option<f64>,
    /// Test AUC per output (class one-vs-rest or task).
    pub output_auc: Vec<Option<f64>>,
    pub mean_auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub architecture: Architecture,
    pub folds_requested: usize,
    pub split_seed: u64,
    pub output_names: Vec<String>,
    pub per_output: Vec<Summary>,
    /// Summary of the per-fold unweighted mean over outputs.
    pub average: Summary,
    pub folds: Vec<FoldResult>,
}

/// A cross-validation run with the trained fold models kept for further
/// evaluation. `tests[f]` are the dataset indices of fold `f`'s test set.
#[derive(Debug, Clone)]
pub struct CvRun {
    pub report: CvReport,
    pub models: Vec<Model>,
    pub tests: Vec<Vec<usize>>,
}

fn output_names(dataset: &Dataset) -> Vec<String> {
    match dataset.task_mode {
        TaskMode::Multiclass(c) => (0..c).map(|k| format!("class{k}")).collect(),
        TaskMode::MultiTask(c) => (0..c)
            .map(|k| dataset.task_names.get(k).cloned().unwrap_or_else(|| format!("task{k}")))
            .collect(),
    }
}

/// Seed used for fold `f`'s model.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_add(fold as u64)
}

/// Stratified k-fold cross validation of `arch` on a raw (unnormalized)
/// dataset. Each fold fits normalization and means on its training part,
/// early-stops on its validation part and is scored only on its test part.
pub fn cross_validate(arch: Architecture, dataset: &Dataset, config: &TrainConfig, k: usize) -> Result<CvRun> {
    config.validate()?;
    let labels = dataset.labels();
    let folds = kfold_split(&labels, k, config.seed, true)?;
    let mut results = Vec::with_capacity(folds.len());
    let mut models = Vec::with_capacity(folds.len());
    let mut tests = Vec::with_capacity(folds.len());
    for (f, fold) in folds.iter().enumerate() {
        let cfg = TrainConfig {
            seed: fold_seed(config.seed, f),
            ..config.clone()
        };
        let (outcome, normalized) = fit(arch, dataset, &fold.train, &fold.validation, &cfg)?;
        let samples: Vec<&Sample> = fold.test.iter().map(|&i| &normalized.samples[i]).collect();
        let probs = outcome.model.predict(&samples)?;
        let test_labels: Vec<_> = fold.test.iter().map(|&i| labels[i].clone()).collect();
        let output_auc = output_aucs(&probs, &test_labels, dataset.task_mode);
        let mean_auc = Summary::of(output_auc.iter().copied()).mean;
        info!(
            "{} fold {}/{}: test AUC {:?} after {} epochs",
            arch.kind,
            f + 1,
            folds.len(),
            mean_auc,
            outcome.history.len()
        );
        results.push(FoldResult {
            fold: f,
            seed: cfg.seed,
            n_train: fold.train.len(),
            n_validation: fold.validation.len(),
            n_test: fold.test.len(),
            epochs: outcome.history.len(),
            best_epoch: outcome.best_epoch,
            best_val_auc: outcome.best_val_auc,
            output_auc,
            mean_auc,
            aborted: outcome.aborted.clone(),
        });
        models.push(outcome.model);
        tests.push(fold.test.clone());
    }
    let n_out = dataset.task_mode.arity();
    let per_output = (0..n_out)
        .map(|o| Summary::of(results.iter().map(|r| r.output_auc[o])))
        .collect();
    let average = Summary::of(results.iter().map(|r| r.mean_auc));
    Ok(CvRun {
        report: CvReport {
            architecture: arch,
            folds_requested: k,
            split_seed: config.seed,
            output_names: output_names(dataset),
            per_output,
            average,
            folds: results,
        },
        models,
        tests,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffAuc {
    pub cutoff_hours: f64,
    pub auc: Option<f64>,
    /// Set when some series had no step at or before the cutoff; the cutoff
    /// is then not scored.
    pub empty_prefix: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineReport {
    pub cutoffs: Vec<CutoffAuc>,
    /// AUC of the untruncated series.
    pub full_auc: Option<f64>,
    pub n_samples: usize,
}

fn raw_probs(model: &Model, template: &Dataset, samples: Vec<Sample>) -> Result<Vec<Vec<f64>>> {
    let ds = Dataset {
        samples,
        ..template.subset(&[])
    };
    model.predict_raw(&ds)
}

fn score(probs: &[Vec<f64>], samples: &[&Sample], task_mode: TaskMode) -> Option<f64> {
    let labels: Vec<_> = samples.iter().map(|s| s.label.clone()).collect();
    Summary::of(output_aucs(probs, &labels, task_mode)).mean
}

/// Scores prefixes of raw `samples` (those of `dataset` at `indices`)
/// truncated at each cutoff through an unchanged model trained on full
/// series. A cutoff at or past every series' last step reproduces the full
/// evaluation exactly.
pub fn online_eval(model: &Model, dataset: &Dataset, indices: &[usize], cutoffs: &[f64]) -> Result<OnlineReport> {
    ensure!(!indices.is_empty(), Argument, "online evaluation needs samples");
    for &c in cutoffs {
        ensure!(c.is_finite() && c > 0.0, Argument, "cutoffs must be positive hours, got {c}");
    }
    let samples: Vec<&Sample> = indices.iter().map(|&i| &dataset.samples[i]).collect();
    let full = raw_probs(model, dataset, samples.iter().map(|s| (*s).clone()).collect())?;
    let full_auc = score(&full, &samples, dataset.task_mode);
    let mut out = Vec::with_capacity(cutoffs.len());
    for &cutoff in cutoffs {
        let prefixes: Option<Vec<Sample>> = samples.iter().map(|s| s.truncate_prefix(cutoff).ok()).collect();
        let entry = match prefixes {
            Some(p) => {
                let probs = raw_probs(model, dataset, p)?;
                CutoffAuc {
                    cutoff_hours: cutoff,
                    auc: score(&probs, &samples, dataset.task_mode),
                    empty_prefix: false,
                }
            }
            None => CutoffAuc {
                cutoff_hours: cutoff,
                auc: None,
                empty_prefix: true,
            },
        };
        out.push(entry);
    }
    Ok(OnlineReport {
        cutoffs: out,
        full_auc,
        n_samples: samples.len(),
    })
}

/// Online evaluation of every fold model on its own test fold; the per-cutoff
/// AUC is the mean over folds where it was defined.
pub fn online_eval_cv(run: &CvRun, dataset: &Dataset, cutoffs: &[f64]) -> Result<(OnlineReport, Vec<OnlineReport>)> {
    let per_fold = run
        .models
        .iter()
        .zip(&run.tests)
        .map(|(m, test)| online_eval(m, dataset, test, cutoffs))
        .collect::<Result<Vec<_>>>()?;
    let cutoffs = (0..cutoffs.len())
        .map(|c| CutoffAuc {
            cutoff_hours: per_fold[0].cutoffs[c].cutoff_hours,
            auc: Summary::of(per_fold.iter().map(|r| r.cutoffs[c].auc)).mean,
            empty_prefix: per_fold.iter().any(|r| r.cutoffs[c].empty_prefix),
        })
        .collect();
    let merged = OnlineReport {
        cutoffs,
        full_auc: Summary::of(per_fold.iter().map(|r| r.full_auc)).mean,
        n_samples: per_fold.iter().map(|r| r.n_samples).sum(),
    };
    Ok((merged, per_fold))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCell {
    pub size: usize,
    /// Share of each stratum in the subsample.
    pub stratum_shares: Vec<(usize, f64)>,
    pub report: CvReport,
}

fn stratum_shares(dataset: &Dataset, indices: &[usize]) -> Vec<(usize, f64)> {
    let mut counts = std::collections::BTreeMap::new();
    for &i in indices {
        *counts.entry(dataset.samples[i].label.stratum()).or_insert(0usize) += 1;
    }
    counts
        .into_iter()
        .map(|(k, c)| (k, c as f64 / indices.len() as f64))
        .collect()
}

/// Cross validation of each architecture on label-stratified subsamples of
/// the requested sizes. Sizes too small to fill `k` folds per class are
/// rejected before any training.
pub fn scaling_experiment(
    archs: &[Architecture],
    dataset: &Dataset,
    sizes: &[usize],
    config: &TrainConfig,
    k: usize,
) -> Result<Vec<ScalingCell>> {
    let labels = dataset.labels();
    let strata = {
        let mut s: Vec<usize> = labels.iter().map(|l| l.stratum()).collect();
        s.sort_unstable();
        s.dedup();
        s.len()
    };
    for &size in sizes {
        ensure!(size <= dataset.len(), Config, "size {size} exceeds the {} available samples", dataset.len());
        if size < k * strata {
            return Err(Error::Config(format!(
                "size {size} is below folds x classes = {k} x {strata}"
            )));
        }
    }
    let mut out = Vec::with_capacity(archs.len() * sizes.len());
    for &size in sizes {
        let idx = stratified_subsample(&labels, size, config.seed)?;
        let sub = dataset.subset(&idx);
        let shares = stratum_shares(dataset, &idx);
        for &arch in archs {
            let run = cross_validate(arch, &sub, config, k)?;
            out.push(ScalingCell {
                size,
                stratum_shares: shares.clone(),
                report: run.report,
            });
        }
    }
    Ok(out)
}
