//! Synthetic classification benchmarks with controllable informative
//! missingness.
//!
//! Values are class-conditioned sinusoids on top of a per-series baseline
//! level, plus Gaussian noise whose scale varies between series. Missingness is
//! Bernoulli per entry with a per-sample, per-variable rate
//! `r + β·s_d·ξ_c`, where `ξ_c` spreads the classes evenly over `[-1, 1]`
//! and `s_d = ±1`. The scale `β` is found by bisection so that the measured
//! mean |Pearson r| between per-sample missing rates and the class index
//! matches the requested strength; the marginal missing rate stays at `r`.
//!
//! The uniforms that decide missingness are drawn once and shared across
//! `β` (common random numbers), so the same seed yields the same values and
//! labels for every strength and only the mask changes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{pearson, Dataset, Label, Sample, SyntheticSummary, TaskMode, MISSING};
use crate::error::{ensure, Error, Result};
use crate::numeric::{Matrix, Rng};

const STREAM_SIGNAL: u64 = 1;
const STREAM_LABELS: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_MISSING: u64 = 4;
const STREAM_SIGNS: u64 = 5;
const STREAM_LEVELS: u64 = 6;

/// Tolerance on the achieved correlation before a setting is declared infeasible.
const CORRELATION_SLACK: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_samples: usize,
    pub n_variables: usize,
    pub n_classes: usize,
    /// Hourly steps per series.
    pub n_steps: usize,
    pub target_missing_rate: f64,
    pub correlation_strength: f64,
    /// Relative spread of class-specific amplitude, frequency and phase.
    pub signal_separation: f64,
    /// Per-sample uniform phase shift in `[-jitter, jitter]` radians.
    pub phase_jitter: f64,
    pub noise_std: f64,
    /// Standard deviation of a per-series, per-variable baseline level.
    pub level_std: f64,
    /// Per-series noise scale is `noise_std · exp(u)`, `u ~ U[-k, k]`.
    pub noise_dispersion: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_samples: 378,
            n_variables: 18,
            n_classes: 5,
            n_steps: 24,
            target_missing_rate: 0.5,
            correlation_strength: 0.0,
            signal_separation: 0.05,
            phase_jitter: 1.0,
            noise_std: 0.3,
            level_std: 1.0,
            noise_dispersion: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.n_samples >= 2, Config, "need at least 2 samples");
        ensure!(self.n_variables >= 1, Config, "need at least 1 variable");
        ensure!(self.n_classes >= 2, Config, "need at least 2 classes");
        ensure!(self.n_steps >= 1, Config, "need at least 1 step");
        ensure!(
            self.target_missing_rate > 0.0 && self.target_missing_rate < 1.0,
            Config,
            "missing rate must lie in (0, 1), got {}",
            self.target_missing_rate
        );
        ensure!(
            (0.0..=1.0).contains(&self.correlation_strength),
            Config,
            "correlation strength must lie in [0, 1], got {}",
            self.correlation_strength
        );
        ensure!(
            self.noise_std >= 0.0
                && self.signal_separation >= 0.0
                && self.phase_jitter >= 0.0
                && self.level_std >= 0.0
                && self.noise_dispersion >= 0.0,
            Config,
            "noise, separation, jitter, level and dispersion must be non-negative"
        );
        Ok(())
    }
}

struct Generated {
    labels: Vec<usize>,
    values: Vec<Matrix>,
    uniforms: Vec<Matrix>,
    /// `s_d · ξ_c` per class and variable.
    offsets: Matrix,
}

fn class_position(c: usize, n_classes: usize) -> f64 {
    2.0 * c as f64 / (n_classes - 1) as f64 - 1.0
}

fn draw(cfg: &SyntheticConfig) -> Generated {
    let (n, d, c, t) = (cfg.n_samples, cfg.n_variables, cfg.n_classes, cfg.n_steps);
    let mut signal = Rng::for_stream(cfg.seed, &[STREAM_SIGNAL]);
    let base: Vec<(f64, f64, f64)> = (0..d)
        .map(|_| {
            (
                signal.uniform_range(0.5, 1.5),
                signal.uniform_range(0.2, 0.8),
                signal.uniform_range(0.0, 2.0 * PI),
            )
        })
        .collect();
    let sep = cfg.signal_separation;
    // (amplitude, angular frequency, phase) per class and variable
    let params: Vec<Vec<(f64, f64, f64)>> = (0..c)
        .map(|_| {
            base.iter()
                .map(|&(a, w, p)| {
                    (
                        a * (1.0 + sep * signal.uniform_range(-1.0, 1.0)),
                        w * (1.0 + sep * signal.uniform_range(-1.0, 1.0)),
                        p + sep * PI * signal.uniform_range(-1.0, 1.0),
                    )
                })
                .collect()
        })
        .collect();

    let mut labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    Rng::for_stream(cfg.seed, &[STREAM_LABELS]).shuffle(&mut labels);

    let values = labels
        .iter()
        .enumerate()
        .map(|(i, &class)| {
            let mut rng = Rng::for_stream(cfg.seed, &[STREAM_NOISE, i as u64]);
            let shift = rng.uniform_range(-cfg.phase_jitter, cfg.phase_jitter);
            let mut own = Rng::for_stream(cfg.seed, &[STREAM_LEVELS, i as u64]);
            let levels: Vec<f64> = (0..d).map(|_| cfg.level_std * own.gaussian()).collect();
            let k = cfg.noise_dispersion;
            let sigma = cfg.noise_std * own.uniform_range(-k, k).exp();
            Matrix::from_fn(t, d, |step, v| {
                let (a, w, p) = params[class][v];
                levels[v] + a * (w * step as f64 + p + shift).sin() + sigma * rng.gaussian()
            })
        })
        .collect();

    let uniforms = (0..n)
        .map(|i| {
            let mut rng = Rng::for_stream(cfg.seed, &[STREAM_MISSING, i as u64]);
            Matrix::from_fn(t, d, |_, _| rng.uniform())
        })
        .collect();

    let mut signs = Rng::for_stream(cfg.seed, &[STREAM_SIGNS]);
    let sign: Vec<f64> = (0..d).map(|_| if signs.uniform() < 0.5 { -1.0 } else { 1.0 }).collect();
    let offsets = Matrix::from_fn(c, d, |class, v| sign[v] * class_position(class, c));

    Generated {
        labels,
        values,
        uniforms,
        offsets,
    }
}

fn masks_for(gen: &Generated, rate: f64, scale: f64) -> Vec<Matrix> {
    gen.labels
        .iter()
        .zip(&gen.uniforms)
        .map(|(&class, u)| {
            Matrix::from_fn(u.rows(), u.cols(), |t, v| {
                let p = (rate + scale * gen.offsets[(class, v)]).clamp(0.0, 1.0);
                if u[(t, v)] < p {
                    0.0
                } else {
                    1.0
                }
            })
        })
        .collect()
}

/// `(overall missing rate, mean |r| over variables)` measured on masks.
fn measure(masks: &[Matrix], labels: &[usize]) -> (f64, f64) {
    let d = masks[0].cols();
    let y: Vec<f64> = labels.iter().map(|&c| c as f64).collect();
    let mut missing = 0.0;
    let mut total = 0.0;
    let mut corr = 0.0;
    for v in 0..d {
        let rates: Vec<f64> = masks
            .iter()
            .map(|m| 1.0 - m.column(v).iter().sum::<f64>() / m.rows() as f64)
            .collect();
        corr += pearson(&rates, &y).map_or(0.0, f64::abs);
    }
    for m in masks {
        missing += m.data().iter().filter(|&&x| x == 0.0).count() as f64;
        total += m.data().len() as f64;
    }
    (missing / total, corr / d as f64)
}

/// Generates a multiclass dataset whose missingness is informative to the
/// requested degree. Achieved rate and correlation are measured and stored in
/// [`Dataset::synthetic`].
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    cfg.validate()?;
    let gen = draw(cfg);
    let rate = cfg.target_missing_rate;
    let max_scale = rate.min(1.0 - rate);
    let target = cfg.correlation_strength;

    let mut scale = 0.0;
    if target > 0.0 {
        let (_, at_max) = measure(&masks_for(&gen, rate, max_scale), &gen.labels);
        if at_max + CORRELATION_SLACK < target {
            return Err(Error::Config(format!(
                "correlation {target} is infeasible at missing rate {rate}: the largest label \
                 offset that keeps rates inside [0, 1] reaches only {at_max:.3}"
            )));
        }
        let (mut lo, mut hi) = (0.0, max_scale);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            let (_, c) = measure(&masks_for(&gen, rate, mid), &gen.labels);
            if c < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        scale = 0.5 * (lo + hi);
    }

    let masks = masks_for(&gen, rate, scale);
    let (achieved_rate, achieved_corr) = measure(&masks, &gen.labels);
    let timestamps: Vec<f64> = (0..cfg.n_steps).map(|t| t as f64).collect();
    let samples = gen
        .values
        .iter()
        .zip(&masks)
        .zip(&gen.labels)
        .enumerate()
        .map(|(i, ((x, m), &class))| {
            let values = Matrix::from_fn(x.rows(), x.cols(), |t, v| {
                if m[(t, v)] == 1.0 {
                    x[(t, v)]
                } else {
                    MISSING
                }
            });
            Sample::new(format!("s{i:05}"), timestamps.clone(), values, Label::Class(class))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ds = Dataset::new(
        samples,
        (0..cfg.n_variables).map(|v| format!("v{v:02}")).collect(),
        vec!["class".to_string()],
        TaskMode::Multiclass(cfg.n_classes),
    )?;
    ds.synthetic = Some(SyntheticSummary {
        config: cfg.clone(),
        achieved_missing_rate: achieved_rate,
        achieved_correlation: achieved_corr,
        offset_scale: scale,
    });
    Ok(ds)
}

/// Binary dataset where only the masking pattern carries the label: values
/// are i.i.d. standard normal for both classes, while positives miss each
/// entry with probability `0.5 + gap/2` and negatives with `0.5 − gap/2`.
pub fn generate_mask_signal(n_samples: usize, n_variables: usize, n_steps: usize, gap: f64, seed: u64) -> Result<Dataset> {
    ensure!(n_samples >= 2 && n_variables >= 1 && n_steps >= 1, Config, "empty mask-signal dataset");
    ensure!((0.0..1.0).contains(&gap), Config, "gap must lie in [0, 1)");
    let mut labels: Vec<usize> = (0..n_samples).map(|i| i % 2).collect();
    Rng::for_stream(seed, &[STREAM_LABELS]).shuffle(&mut labels);
    let timestamps: Vec<f64> = (0..n_steps).map(|t| t as f64).collect();
    let samples = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let mut rng = Rng::for_stream(seed, &[STREAM_NOISE, i as u64]);
            let p = 0.5 + if y == 1 { gap / 2.0 } else { -gap / 2.0 };
            let values = Matrix::from_fn(n_steps, n_variables, |_, _| {
                let x = rng.gaussian();
                if rng.uniform() < p {
                    MISSING
                } else {
                    x
                }
            });
            Sample::new(format!("m{i:05}"), timestamps.clone(), values, Label::Tasks(vec![y as f64]))
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(
        samples,
        (0..n_variables).map(|v| format!("v{v:02}")).collect(),
        vec!["label".to_string()],
        TaskMode::MultiTask(1),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::missingness_label_correlation;

    fn cfg(strength: f64, rate: f64) -> SyntheticConfig {
        SyntheticConfig {
            correlation_strength: strength,
            target_missing_rate: rate,
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn zero_strength_is_uninformative() {
        let ds = generate_synthetic(&cfg(0.0, 0.5)).unwrap();
        let summary = ds.synthetic.as_ref().unwrap();
        assert_eq!(ds.len(), 378);
        assert!(summary.achieved_correlation < 0.1, "{}", summary.achieved_correlation);
        let table = missingness_label_correlation(&ds).unwrap();
        let mean_abs = table.iter().map(|e| e.pearson_r.abs()).sum::<f64>() / table.len() as f64;
        assert!((mean_abs - summary.achieved_correlation).abs() < 1e-12);
    }

    #[test]
    fn strong_setting_hits_rate_and_correlation() {
        let ds = generate_synthetic(&cfg(0.9, 0.5)).unwrap();
        let s = ds.synthetic.unwrap();
        assert!((s.achieved_missing_rate - 0.5).abs() < 0.02, "{}", s.achieved_missing_rate);
        assert!((s.achieved_correlation - 0.9).abs() < 0.02, "{}", s.achieved_correlation);
    }

    #[test]
    fn same_seed_same_bits_and_shared_values() {
        let a = generate_synthetic(&cfg(0.6, 0.5)).unwrap();
        let b = generate_synthetic(&cfg(0.6, 0.5)).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!(x.values.bit_eq(&y.values));
        }
        let c = generate_synthetic(&cfg(0.0, 0.5)).unwrap();
        assert_eq!(a.labels(), c.labels());
        // wherever both settings observe an entry it carries the same value
        let (x, y) = (&a.samples[3], &c.samples[3]);
        for k in 0..x.values.data().len() {
            let (p, q) = (x.values.data()[k], y.values.data()[k]);
            if !p.is_nan() && !q.is_nan() {
                assert_eq!(p.to_bits(), q.to_bits());
            }
        }
    }

    #[test]
    fn infeasible_setting_is_config_error() {
        let mut c = cfg(0.99, 0.5);
        c.n_steps = 1;
        c.n_classes = 2;
        // with a single step the per-sample rate is 0/1 noise-free only at full offset
        let err = generate_synthetic(&SyntheticConfig { target_missing_rate: 0.02, ..c });
        assert!(matches!(err, Err(Error::Config(_))));
        assert!(generate_synthetic(&cfg(1.5, 0.5)).is_err());
    }

    #[test]
    fn mask_signal_shapes() {
        let ds = generate_mask_signal(40, 3, 6, 0.6, 1).unwrap();
        assert_eq!(ds.len(), 40);
        assert_eq!(ds.task_mode, TaskMode::MultiTask(1));
    }
}
