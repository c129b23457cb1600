//! Irregular, partially observed multivariate time series.
//!
//! A [`Sample`] stores measurements with `NaN` as the missing-value sentinel,
//! the 0/1 masking matrix derived from it, and the per-variable time
//! intervals since the last observation. Imputation never happens here; the
//! recurrent cells decide how to fill gaps.

mod csv_io;
mod resample;
mod split;
mod stats;
pub mod synthetic;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::numeric::Matrix;

pub use csv_io::{dataset_csv, read_dataset, read_raw_series, write_dataset, RawTable};
pub use resample::{resample, RawSeries};
pub use synthetic::{generate_mask_signal, generate_synthetic, SyntheticConfig};
pub use split::{kfold_split, stratified_subsample, validation_split, Fold, VALIDATION_FRACTION};
pub use stats::{
    dataset_statistics, empirical_means, missingness_label_correlation, pearson, CorrelationEntry,
    DatasetStatistics, MeansReport, NormStats,
};

/// Missing-value sentinel stored in [`Sample::values`].
pub const MISSING: f64 = f64::NAN;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Label {
    /// Index of the single correct class.
    Class(usize),
    /// One 0/1 target per binary task.
    Tasks(Vec<f64>),
}

impl Label {
    /// Scalar label value per task, used for stratification and correlation.
    /// A multiclass label is reported as its class index.
    pub fn task_values(&self) -> Vec<f64> {
        match self {
            Label::Class(c) => vec![*c as f64],
            Label::Tasks(v) => v.clone(),
        }
    }

    pub fn stratum(&self) -> usize {
        match self {
            Label::Class(c) => *c,
            Label::Tasks(v) => v.first().map_or(0, |&x| (x > 0.5) as usize),
        }
    }
}

/// How the output layer interprets labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskMode {
    /// Softmax over `n` classes.
    Multiclass(usize),
    /// `n` independent sigmoid units (one for plain binary classification).
    MultiTask(usize),
}

impl TaskMode {
    /// Number of output units.
    pub fn arity(&self) -> usize {
        match *self {
            TaskMode::Multiclass(n) | TaskMode::MultiTask(n) => n,
        }
    }

    pub fn is_multiclass(&self) -> bool {
        matches!(self, TaskMode::Multiclass(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    /// Hours since admission, strictly increasing.
    pub timestamps: Vec<f64>,
    /// `T x D`, `NaN` where unobserved.
    pub values: Matrix,
    /// `T x D` in {0, 1}.
    pub mask: Matrix,
    /// `T x D` hours since the previous observation of each variable.
    pub intervals: Matrix,
    pub label: Label,
}

impl Sample {
    /// Builds a sample from timestamps and a value grid whose `NaN` entries
    /// mark missing observations. Masking and intervals are derived.
    pub fn new(id: impl Into<String>, timestamps: Vec<f64>, values: Matrix, label: Label) -> Result<Self> {
        ensure!(
            values.rows() == timestamps.len(),
            Data,
            "{} timestamps for {} rows",
            timestamps.len(),
            values.rows()
        );
        let mask = Matrix::from_fn(values.rows(), values.cols(), |t, d| {
            if values[(t, d)].is_nan() {
                0.0
            } else {
                1.0
            }
        });
        let intervals = compute_intervals(&mask, &timestamps)?;
        Ok(Self {
            id: id.into(),
            timestamps,
            values,
            mask,
            intervals,
            label,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    #[inline]
    pub fn n_variables(&self) -> usize {
        self.values.cols()
    }

    #[inline]
    pub fn observed(&self, t: usize, d: usize) -> bool {
        self.mask[(t, d)] == 1.0
    }

    /// Keeps the steps with timestamp `<= cutoff_hours`.
    pub fn truncate_prefix(&self, cutoff_hours: f64) -> Result<Sample> {
        ensure!(cutoff_hours > 0.0, Argument, "cutoff must be positive, got {cutoff_hours}");
        let keep = self.timestamps.iter().take_while(|&&s| s <= cutoff_hours).count();
        ensure!(
            keep > 0,
            Argument,
            "cutoff {cutoff_hours}h leaves series {} empty",
            self.id
        );
        if keep == self.len() {
            return Ok(self.clone());
        }
        let d = self.n_variables();
        let values = Matrix::from_vec(keep, d, self.values.data()[..keep * d].to_vec())?;
        Sample::new(self.id.clone(), self.timestamps[..keep].to_vec(), values, self.label.clone())
    }

    /// Per-variable fraction of unobserved steps, `1 - (1/T) Σ_t m_t`.
    pub fn missing_rate(&self) -> Vec<f64> {
        let t = self.len().max(1) as f64;
        (0..self.n_variables())
            .map(|d| 1.0 - self.mask.column(d).iter().sum::<f64>() / t)
            .collect()
    }
}

/// Time since the previous observation of each variable.
///
/// `Δ[0] = 0`; afterwards `Δ[t] = s_t − s_{t−1}` when the variable was observed
/// at `t−1`, else `s_t − s_{t−1} + Δ[t−1]`.
pub fn compute_intervals(mask: &Matrix, timestamps: &[f64]) -> Result<Matrix> {
    ensure!(
        mask.rows() == timestamps.len(),
        Data,
        "mask has {} rows but {} timestamps",
        mask.rows(),
        timestamps.len()
    );
    for w in timestamps.windows(2) {
        ensure!(
            w[1] > w[0],
            Data,
            "timestamps must be strictly increasing ({} then {})",
            w[0],
            w[1]
        );
    }
    let (steps, vars) = mask.shape();
    let mut delta = Matrix::zeros(steps, vars);
    for t in 1..steps {
        let gap = timestamps[t] - timestamps[t - 1];
        for d in 0..vars {
            delta[(t, d)] = if mask[(t - 1, d)] == 1.0 {
                gap
            } else {
                gap + delta[(t - 1, d)]
            };
        }
    }
    Ok(delta)
}

/// Summary of how a synthetic dataset was generated, measured on the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSummary {
    pub config: synthetic::SyntheticConfig,
    /// Fraction of unobserved entries over the whole dataset.
    pub achieved_missing_rate: f64,
    /// Mean over variables of |Pearson r| between per-sample missing rate and label.
    pub achieved_correlation: f64,
    /// Label-offset scale found by calibration.
    pub offset_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub variable_names: Vec<String>,
    pub task_names: Vec<String>,
    pub task_mode: TaskMode,
    /// Normalization applied to the values, if any.
    pub normalization: Option<NormStats>,
    pub synthetic: Option<SyntheticSummary>,
}

impl Dataset {
    pub fn new(
        samples: Vec<Sample>,
        variable_names: Vec<String>,
        task_names: Vec<String>,
        task_mode: TaskMode,
    ) -> Result<Self> {
        let d = variable_names.len();
        for s in &samples {
            ensure!(
                s.n_variables() == d,
                Data,
                "series {} has {} variables, expected {d}",
                s.id,
                s.n_variables()
            );
            ensure!(!s.is_empty(), Data, "series {} is empty", s.id);
            match (&s.label, task_mode) {
                (Label::Class(c), TaskMode::Multiclass(n)) => {
                    ensure!(*c < n, Data, "series {} has class {c} >= {n}", s.id)
                }
                (Label::Tasks(v), TaskMode::MultiTask(n)) => ensure!(
                    v.len() == n && v.iter().all(|&x| x == 0.0 || x == 1.0),
                    Data,
                    "series {} needs {n} binary task labels",
                    s.id
                ),
                _ => return Err(Error::Data(format!("series {} label does not match task mode", s.id))),
            }
        }
        Ok(Self {
            samples,
            variable_names,
            task_names,
            task_mode,
            normalization: None,
            synthetic: None,
        })
    }

    #[inline]
    pub fn n_variables(&self) -> usize {
        self.variable_names.len()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.samples.iter().map(|s| s.label.clone()).collect()
    }

    /// Copy holding only the listed samples, in the listed order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            ..self.metadata_clone()
        }
    }

    fn metadata_clone(&self) -> Dataset {
        Dataset {
            samples: Vec::new(),
            variable_names: self.variable_names.clone(),
            task_names: self.task_names.clone(),
            task_mode: self.task_mode,
            normalization: self.normalization.clone(),
            synthetic: self.synthetic.clone(),
        }
    }

    /// Largest timestamp across all samples.
    pub fn horizon(&self) -> f64 {
        self.samples
            .iter()
            .filter_map(|s| s.timestamps.last().copied())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn column(m: &Matrix, d: usize) -> Vec<f64> {
        m.column(d)
    }

    #[test]
    fn intervals_base_case() {
        let mask = Matrix::filled(1, 3, 0.0);
        let delta = compute_intervals(&mask, &[5.0]).unwrap();
        assert_eq!(delta.data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn intervals_accumulate_over_gaps() {
        let mask = Matrix::from_vec(4, 1, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let delta = compute_intervals(&mask, &[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(column(&delta, 0), vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn intervals_fully_observed_unit_spacing() {
        let mask = Matrix::filled(5, 1, 1.0);
        let delta = compute_intervals(&mask, &[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(column(&delta, 0), vec![0.0, 1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn intervals_reject_non_increasing_time() {
        let mask = Matrix::filled(2, 1, 1.0);
        assert!(matches!(compute_intervals(&mask, &[1.0, 1.0]), Err(Error::Data(_))));
    }

    #[test]
    fn missing_rate_examples() {
        let full = Sample::new("a", vec![0.0, 1.0], Matrix::filled(2, 2, 1.0), Label::Class(0)).unwrap();
        assert_eq!(full.missing_rate(), vec![0.0, 0.0]);
        let values = Matrix::from_vec(4, 1, vec![1.0, MISSING, MISSING, 2.0]).unwrap();
        let s = Sample::new("b", vec![0.0, 1.0, 2.0, 3.0], values, Label::Class(0)).unwrap();
        assert_eq!(s.missing_rate(), vec![0.5]);
        let none = Sample::new("c", vec![0.0], Matrix::filled(1, 1, MISSING), Label::Class(0)).unwrap();
        assert_eq!(none.missing_rate(), vec![1.0]);
    }

    fn hourly_sample(t: usize) -> Sample {
        let values = Matrix::from_fn(t, 2, |i, d| if (i + d) % 3 == 0 { MISSING } else { i as f64 });
        Sample::new("s", (0..t).map(|i| i as f64).collect(), values, Label::Class(1)).unwrap()
    }

    #[test]
    fn truncate_filter_semantics() {
        let s = hourly_sample(49);
        let same = s.truncate_prefix(100.0).unwrap();
        assert!(same.values.bit_eq(&s.values) && same.intervals == s.intervals);
        let day = s.truncate_prefix(24.0).unwrap();
        assert_eq!(day.len(), 25);
        assert!(day.timestamps.iter().all(|&t| t <= 24.0));
        assert!(s.truncate_prefix(0.0).is_err());
        let late = Sample::new("x", vec![5.0, 6.0], Matrix::filled(2, 1, 1.0), Label::Class(0)).unwrap();
        assert!(late.truncate_prefix(1.0).is_err());
    }

    /// Independent scan: time since the latest observation strictly before `t`.
    fn scan_interval(mask: &Matrix, ts: &[f64], t: usize, d: usize) -> f64 {
        if t == 0 {
            return 0.0;
        }
        let last = (0..t).rev().find(|&u| mask[(u, d)] == 1.0).unwrap_or(0);
        ts[t] - ts[last]
    }

    proptest! {
        #[test]
        fn intervals_match_independent_scan(
            gaps in prop::collection::vec(0.1f64..5.0, 1..15),
            bits in prop::collection::vec(any::<bool>(), 45),
        ) {
            let mut ts = vec![0.0];
            for g in &gaps { ts.push(ts.last().unwrap() + g); }
            let t = ts.len();
            let mask = Matrix::from_fn(t, 3, |i, d| bits[(i * 3 + d) % bits.len()] as u8 as f64);
            let delta = compute_intervals(&mask, &ts).unwrap();
            for i in 0..t {
                for d in 0..3 {
                    prop_assert!((delta[(i, d)] - scan_interval(&mask, &ts, i, d)).abs() < 1e-9);
                    prop_assert!(delta[(i, d)] >= 0.0);
                }
            }
        }

        #[test]
        fn intervals_are_prefix_closed(t in 2usize..30, cut in 1usize..30) {
            let s = hourly_sample(t);
            let cutoff = cut.min(t - 1) as f64 + 0.5;
            let prefix = s.truncate_prefix(cutoff).unwrap();
            let k = prefix.len();
            prop_assert_eq!(prefix.intervals.data(), &s.intervals.data()[..k * 2]);
        }
    }
}
