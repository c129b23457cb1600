//! Learned decay introspection: input-decay curves and hidden-decay weight
//! histograms.

use serde::{Deserialize, Serialize};

use crate::cells::decay_rate_diag;
use crate::error::{Error, Result};
use crate::training::Model;

/// Sweep of the time interval, in hours.
pub const DELTA_MAX: f64 = 24.0;
pub const DELTA_STEP: f64 = 0.25;
/// Bins shared by every variable's hidden-decay histogram.
pub const HIST_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub variable: String,
    pub delta: Vec<f64>,
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightHistogram {
    pub variable: String,
    pub bins: Vec<HistogramBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    /// Input-decay curves, one per variable (kinds with input decay).
    pub input_curves: Vec<DecayCurve>,
    /// Histograms of each column of the hidden-decay weights (kinds with
    /// hidden decay).
    pub hidden_histograms: Vec<WeightHistogram>,
}

pub fn delta_grid() -> Vec<f64> {
    let n = (DELTA_MAX / DELTA_STEP).round() as usize;
    (0..=n).map(|k| k as f64 * DELTA_STEP).collect()
}

/// Equal-width bins over `[lo, hi]`; the last bin is closed on the right.
/// A degenerate range yields a single bin holding every value.
fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<HistogramBin> {
    if hi <= lo {
        return vec![HistogramBin {
            lo,
            hi,
            count: values.len(),
        }];
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            lo: lo + k as f64 * width,
            hi: if k + 1 == bins { hi } else { lo + (k + 1) as f64 * width },
            count,
        })
        .collect()
}

/// Tabulates what a trained model has learned about decay.
///
/// Fails for kinds with neither input nor hidden decay.
pub fn decay_report(model: &Model) -> Result<DecayReport> {
    let cell = &model.cell;
    if cell.input_decay.is_none() && cell.hidden_decay.is_none() {
        return Err(Error::Config(format!(
            "{} has no input or hidden decay to report",
            cell.kind
        )));
    }
    let grid = delta_grid();
    let input_curves = match &cell.input_decay {
        Some(dec) => model
            .variable_names
            .iter()
            .enumerate()
            .map(|(d, name)| {
                let gamma = grid
                    .iter()
                    .map(|&delta| decay_rate_diag(&dec.w[d..=d], &dec.b[d..=d], &[delta]).map(|g| g[0]))
                    .collect::<Result<Vec<_>>>()?;
                Ok(DecayCurve {
                    variable: name.clone(),
                    delta: grid.clone(),
                    gamma,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    let hidden_histograms = match &cell.hidden_decay {
        Some(dec) => {
            let all = dec.w.data();
            let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            model
                .variable_names
                .iter()
                .enumerate()
                .map(|(d, name)| WeightHistogram {
                    variable: name.clone(),
                    bins: histogram(&dec.w.column(d), lo, hi, HIST_BINS),
                })
                .collect()
        }
        None => Vec::new(),
    };
    Ok(DecayReport {
        input_curves,
        hidden_histograms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::CellKind;
    use crate::data::{generate_synthetic, NormStats, SyntheticConfig};
    use crate::numeric::Rng;

    fn model(kind: CellKind) -> Model {
        let ds = generate_synthetic(&SyntheticConfig {
            n_samples: 10,
            n_variables: 3,
            n_steps: 4,
            ..Default::default()
        })
        .unwrap();
        Model::init(kind, 4, &ds, vec![0.0; 3], NormStats::identity(3), false, &mut Rng::new(0, 0)).unwrap()
    }

    #[test]
    fn fresh_model_is_flat() {
        let r = decay_report(&model(CellKind::GruD)).unwrap();
        assert_eq!(r.input_curves.len(), 3);
        assert_eq!(r.input_curves[0].delta.len(), 97);
        assert!(r.input_curves.iter().all(|c| c.gamma.iter().all(|&g| g == 1.0)));
        assert_eq!(r.hidden_histograms.len(), 3);
        assert_eq!(r.hidden_histograms[0].bins.iter().map(|b| b.count).sum::<usize>(), 4);
    }

    #[test]
    fn value_at_zero_interval() {
        let mut m = model(CellKind::GruD);
        let dec = m.cell.input_decay.as_mut().unwrap();
        dec.w = vec![0.1, -0.2, 0.05];
        dec.b = vec![0.3, 0.5, -0.4];
        let r = decay_report(&m).unwrap();
        for (d, c) in r.input_curves.iter().enumerate() {
            let b: f64 = [0.3, 0.5, -0.4][d];
            assert!((c.gamma[0] - (-b.max(0.0)).exp()).abs() < 1e-15);
            assert!(c.gamma.iter().all(|&g| g > 0.0 && g <= 1.0));
        }
        // 0.1·24 + 0.3 = 2.7
        assert!((r.input_curves[0].gamma[96] - (-2.7f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn kinds_without_decay_fail() {
        assert!(decay_report(&model(CellKind::GruMean)).is_err());
        assert!(decay_report(&model(CellKind::GruSimple)).is_err());
        let ds = decay_report(&model(CellKind::GruDS)).unwrap();
        assert!(ds.input_curves.is_empty() && !ds.hidden_histograms.is_empty());
    }

    #[test]
    fn histogram_edges() {
        let h = histogram(&[0.0, 0.5, 1.0], 0.0, 1.0, 2);
        assert_eq!(h.iter().map(|b| b.count).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(histogram(&[2.0, 2.0], 2.0, 2.0, 5).len(), 1);
    }
}
