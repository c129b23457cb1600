use log::warn;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{ensure, Result};

/// Per-variable mean over observed entries, with warnings for variables that
/// were never observed (their mean defaults to 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeansReport {
    pub means: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Empirical mean `x̃^d = Σ m x / Σ m` over the given samples only.
pub fn empirical_means(dataset: &Dataset, indices: &[usize]) -> MeansReport {
    let d = dataset.n_variables();
    let mut sum = vec![0.0; d];
    let mut count = vec![0usize; d];
    for &i in indices {
        let s = &dataset.samples[i];
        for t in 0..s.len() {
            for v in 0..d {
                if s.observed(t, v) {
                    sum[v] += s.values[(t, v)];
                    count[v] += 1;
                }
            }
        }
    }
    let mut warnings = Vec::new();
    let means = (0..d)
        .map(|v| {
            if count[v] == 0 {
                let msg = format!(
                    "variable '{}' is never observed in the training split; using mean 0",
                    dataset.variable_names[v]
                );
                warn!("{msg}");
                warnings.push(msg);
                0.0
            } else {
                sum[v] / count[v] as f64
            }
        })
        .collect();
    MeansReport { means, warnings }
}

/// Per-variable standardization fitted on observed training entries
/// (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl NormStats {
    pub fn fit(dataset: &Dataset, indices: &[usize]) -> NormStats {
        let MeansReport { means, mut warnings } = empirical_means(dataset, indices);
        let d = dataset.n_variables();
        let mut sq = vec![0.0; d];
        let mut count = vec![0usize; d];
        for &i in indices {
            let s = &dataset.samples[i];
            for t in 0..s.len() {
                for v in 0..d {
                    if s.observed(t, v) {
                        sq[v] += (s.values[(t, v)] - means[v]).powi(2);
                        count[v] += 1;
                    }
                }
            }
        }
        let std = (0..d)
            .map(|v| {
                let sd = if count[v] == 0 {
                    0.0
                } else {
                    (sq[v] / count[v] as f64).sqrt()
                };
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    let msg = format!(
                        "variable '{}' has zero variance; std clamped to 1",
                        dataset.variable_names[v]
                    );
                    warn!("{msg}");
                    warnings.push(msg);
                    1.0
                }
            })
            .collect();
        NormStats {
            mean: means,
            std,
            warnings,
        }
    }

    pub fn identity(d: usize) -> NormStats {
        NormStats {
            mean: vec![0.0; d],
            std: vec![1.0; d],
            warnings: Vec::new(),
        }
    }

    /// Standardizes observed entries of every sample; masking, intervals and
    /// sentinels are left untouched.
    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset> {
        ensure!(
            self.mean.len() == dataset.n_variables(),
            Argument,
            "normalization stats cover {} variables, dataset has {}",
            self.mean.len(),
            dataset.n_variables()
        );
        let mut out = dataset.clone();
        for s in &mut out.samples {
            let d = s.n_variables();
            for (k, x) in s.values.data_mut().iter_mut().enumerate() {
                if !x.is_nan() {
                    let v = k % d;
                    *x = (*x - self.mean[v]) / self.std[v];
                }
            }
        }
        out.normalization = Some(self.clone());
        Ok(out)
    }
}

/// Pearson correlation. Returns `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub variable: String,
    pub task: String,
    pub pearson_r: f64,
    /// Set when either side had zero variance and `pearson_r` was reported as 0.
    pub degenerate: bool,
}

/// Pearson r between each variable's per-sample missing rate and each task's
/// label across the dataset. Multiclass labels enter as the class index.
pub fn missingness_label_correlation(dataset: &Dataset) -> Result<Vec<CorrelationEntry>> {
    ensure!(dataset.len() >= 2, Data, "need at least two samples for correlation");
    let rates: Vec<Vec<f64>> = dataset.samples.iter().map(|s| s.missing_rate()).collect();
    let labels: Vec<Vec<f64>> = dataset.samples.iter().map(|s| s.label.task_values()).collect();
    let n_tasks = labels[0].len();
    let task_names: Vec<String> = if dataset.task_mode.is_multiclass() {
        vec!["class".to_string()]
    } else {
        dataset.task_names.clone()
    };
    let mut out = Vec::with_capacity(dataset.n_variables() * n_tasks);
    for (v, name) in dataset.variable_names.iter().enumerate() {
        let p: Vec<f64> = rates.iter().map(|r| r[v]).collect();
        for task in 0..n_tasks {
            let l: Vec<f64> = labels.iter().map(|x| x[task]).collect();
            let r = pearson(&p, &l);
            out.push(CorrelationEntry {
                variable: name.clone(),
                task: task_names.get(task).cloned().unwrap_or_else(|| format!("task{task}")),
                pearson_r: r.unwrap_or(0.0),
                degenerate: r.is_none(),
            });
        }
    }
    Ok(out)
}

/// Dataset summary: sample and variable counts, step-count mean and max, and
/// the mean of all per-sample, per-variable missing rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStatistics {
    pub n_samples: usize,
    pub n_variables: usize,
    pub mean_steps: f64,
    pub max_steps: usize,
    pub mean_missing_rate: f64,
}

pub fn dataset_statistics(dataset: &Dataset) -> DatasetStatistics {
    let n = dataset.len().max(1) as f64;
    let steps: Vec<usize> = dataset.samples.iter().map(|s| s.len()).collect();
    let rates: f64 = dataset
        .samples
        .iter()
        .map(|s| s.missing_rate().iter().sum::<f64>() / s.n_variables().max(1) as f64)
        .sum();
    DatasetStatistics {
        n_samples: dataset.len(),
        n_variables: dataset.n_variables(),
        mean_steps: steps.iter().sum::<usize>() as f64 / n,
        max_steps: steps.iter().copied().max().unwrap_or(0),
        mean_missing_rate: rates / n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Label, Sample, TaskMode, MISSING};
    use crate::numeric::Matrix;

    fn one_var(values: &[f64]) -> Dataset {
        let t = values.len();
        let s = Sample::new(
            "a",
            (0..t).map(|i| i as f64).collect(),
            Matrix::from_vec(t, 1, values.to_vec()).unwrap(),
            Label::Tasks(vec![0.0]),
        )
        .unwrap();
        Dataset::new(vec![s], vec!["v".into()], vec!["y".into()], TaskMode::MultiTask(1)).unwrap()
    }

    #[test]
    fn means_examples() {
        assert_eq!(empirical_means(&one_var(&[1.0, 3.0]), &[0]).means, vec![2.0]);
        assert_eq!(empirical_means(&one_var(&[1.0, 3.0, MISSING]), &[0]).means, vec![2.0]);
        let report = empirical_means(&one_var(&[MISSING, MISSING]), &[0]);
        assert_eq!(report.means, vec![0.0]);
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn means_use_only_listed_samples() {
        let mut ds = one_var(&[1.0, 3.0]);
        let other = Sample::new("b", vec![0.0], Matrix::filled(1, 1, 100.0), Label::Tasks(vec![1.0])).unwrap();
        ds.samples.push(other);
        assert_eq!(empirical_means(&ds, &[0]).means, vec![2.0]);
    }

    #[test]
    fn normalize_examples() {
        let ds = one_var(&[2.0, 4.0, MISSING]);
        let stats = NormStats::fit(&ds, &[0]);
        assert_eq!(stats.mean, vec![3.0]);
        assert_eq!(stats.std, vec![1.0]);
        let out = stats.apply(&ds).unwrap();
        let v = out.samples[0].values.data();
        assert_eq!(&v[..2], &[-1.0, 1.0]);
        assert!(v[2].is_nan());
        assert_eq!(out.samples[0].mask, ds.samples[0].mask);
        assert_eq!(out.samples[0].intervals, ds.samples[0].intervals);

        let constant = one_var(&[5.0, 5.0]);
        let stats = NormStats::fit(&constant, &[0]);
        assert_eq!(stats.std, vec![1.0]);
        assert_eq!(stats.warnings.len(), 1);
    }

    #[test]
    fn normalize_is_idempotent() {
        let ds = one_var(&[0.3, 7.5, MISSING, -2.0, 11.0]);
        let once = NormStats::fit(&ds, &[0]).apply(&ds).unwrap();
        let again = NormStats::fit(&once, &[0]);
        assert!(again.mean[0].abs() < 1e-12);
        assert!((again.std[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_examples() {
        let p = [0.1, 0.2, 0.3, 0.4];
        assert!((pearson(&p, &p).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = p.iter().map(|x| -x).collect();
        assert!((pearson(&p, &neg).unwrap() + 1.0).abs() < 1e-12);
        let r = pearson(&p, &[0.0, 0.0, 1.0, 1.0]).unwrap();
        assert!((r - 0.894_427_190_999_916).abs() < 1e-12, "{r}");
        assert!(pearson(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn correlation_flags_constant_missing_rate() {
        let mk = |label: f64| {
            Sample::new("s", vec![0.0, 1.0], Matrix::filled(2, 1, 1.0), Label::Tasks(vec![label])).unwrap()
        };
        let ds = Dataset::new(vec![mk(0.0), mk(1.0)], vec!["v".into()], vec!["y".into()], TaskMode::MultiTask(1))
            .unwrap();
        let table = missingness_label_correlation(&ds).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table[0].pearson_r, 0.0);
        assert!(table[0].degenerate);
    }
}
