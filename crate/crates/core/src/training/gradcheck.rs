//! Finite-difference verification of the analytic gradients.

use serde::{Deserialize, Serialize};

use super::head::{HeadParams, Phase};
use super::model::Model;
use super::objective::{batch_objective, Draws};
use crate::cells::{forward_sequence, CellKind, CellParams};
use crate::data::{Label, NormStats, Sample, TaskMode};
use crate::error::{ensure, Error, Result};
use crate::numeric::{Matrix, Rng};

pub const FD_STEP: f64 = 1e-5;
/// Instances with any decay pre-activation closer than this to the kink of
/// `max(0, ·)` are redrawn.
pub const KINK_MARGIN: f64 = 1e-3;
/// Central differences at [`FD_STEP`] carry about 1e-11 of rounding noise
/// on an order-one loss, so nonzero gradients smaller than this cannot be
/// verified to 1e-5 relative accuracy; instances containing one are redrawn.
/// Exact zeros are kept and checked.
pub const RESOLUTION_FLOOR: f64 = 1e-5;
const MAX_ATTEMPTS: usize = 500;
const STREAM_GRADCHECK: u64 = 0x67_7261_6463;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradCheckDims {
    pub n_vars: usize,
    pub hidden: usize,
    pub steps: usize,
    pub outputs: usize,
    /// Sequences in the checked batch.
    pub batch: usize,
}

impl Default for GradCheckDims {
    fn default() -> Self {
        Self {
            n_vars: 3,
            hidden: 4,
            steps: 5,
            outputs: 2,
            batch: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockError {
    pub block: String,
    pub entries: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub kind: CellKind,
    pub seed: u64,
    pub dims: GradCheckDims,
    pub task_mode: TaskMode,
    pub max_rel_err: f64,
    pub blocks: Vec<BlockError>,
    /// Smallest |decay pre-activation| in the accepted instance.
    pub min_decay_preactivation: Option<f64>,
    pub attempts: usize,
}

/// `|a − b| / max(|a|, |b|, 1e-8)`
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

struct Instance {
    model: Model,
    samples: Vec<Sample>,
    draws: Vec<Draws>,
    lambda: f64,
}

fn random_instance(kind: CellKind, dims: GradCheckDims, task_mode: TaskMode, rng: &mut Rng) -> Result<Instance> {
    let d = dims.n_vars;
    let mut samples = Vec::with_capacity(dims.batch);
    for i in 0..dims.batch {
        let mut t = 0.0;
        let timestamps: Vec<f64> = (0..dims.steps)
            .map(|k| {
                if k > 0 {
                    t += rng.uniform_range(0.5, 2.0);
                }
                t
            })
            .collect();
        let values = Matrix::from_fn(dims.steps, d, |_, _| {
            if rng.uniform() < 0.4 {
                f64::NAN
            } else {
                rng.gaussian()
            }
        });
        let label = match task_mode {
            TaskMode::Multiclass(c) => Label::Class(rng.below(c)),
            TaskMode::MultiTask(c) => Label::Tasks((0..c).map(|_| rng.below(2) as f64).collect()),
        };
        samples.push(Sample::new(format!("g{i}"), timestamps, values, label)?);
    }

    // weights of order one keep hidden states, and therefore gradients,
    // well above the finite-difference noise floor
    let mut cell = CellParams::init(kind, d, dims.hidden, rng);
    for g in &mut cell.gates {
        let mut mats = vec![g.w.data_mut(), g.u.data_mut()];
        if let Some(v) = g.v.as_mut() {
            mats.push(v.data_mut());
        }
        for m in mats {
            m.iter_mut().for_each(|x| *x = rng.uniform_range(-1.0, 1.0));
        }
        g.b.iter_mut().for_each(|b| *b = rng.uniform_range(-0.5, 0.5));
    }
    // decays: mostly active, with slopes of both signs
    let diag = |w: &mut [f64], b: &mut [f64], rng: &mut Rng| {
        w.iter_mut().for_each(|x| *x = rng.uniform_range(-0.1, 0.3));
        b.iter_mut().for_each(|x| *x = rng.uniform_range(-0.2, 0.4));
    };
    if let Some(dec) = cell.input_decay.as_mut() {
        diag(&mut dec.w, &mut dec.b, rng);
    }
    if let Some(dec) = cell.mask_decay.as_mut() {
        diag(&mut dec.w, &mut dec.b, rng);
    }
    if let Some(dec) = cell.hidden_decay.as_mut() {
        diag(dec.w.data_mut(), &mut dec.b, rng);
    }
    if let Some(imp) = cell.imputer.as_mut() {
        imp.w.data_mut().iter_mut().for_each(|x| *x = rng.uniform_range(-1.0, 1.0));
        imp.b.iter_mut().for_each(|x| *x = rng.uniform_range(-0.5, 0.5));
        diag(&mut imp.decay.w, &mut imp.decay.b, rng);
    }

    let mut head = HeadParams::init(dims.hidden, dims.outputs, false, rng);
    head.w.data_mut().iter_mut().for_each(|x| *x = rng.uniform_range(-2.0, 2.0));
    head.b.iter_mut().for_each(|x| *x = rng.uniform_range(-0.5, 0.5));
    let means: Vec<f64> = (0..d).map(|_| 0.5 * rng.gaussian()).collect();
    let model = Model {
        cell,
        head,
        task_mode,
        means,
        normalization: NormStats::identity(d),
        variable_names: (0..d).map(|k| format!("v{k}")).collect(),
        task_names: (0..dims.outputs).map(|k| format!("t{k}")).collect(),
    };
    let draws = samples
        .iter()
        .map(|s| Draws {
            weight_scale: None,
            head_mask: None,
            noise: kind
                .has_imputer()
                .then(|| Matrix::from_fn(s.len(), d, |_, _| rng.gaussian())),
        })
        .collect();
    Ok(Instance {
        model,
        samples,
        draws,
        lambda: if kind.has_imputer() { 0.7 } else { 0.0 },
    })
}

fn min_preactivation(inst: &Instance) -> Result<f64> {
    let mut min = f64::INFINITY;
    for (s, dr) in inst.samples.iter().zip(&inst.draws) {
        let out = forward_sequence(&inst.model.cell, s, &inst.model.means, dr.noise.as_ref())?;
        min = min.min(out.min_abs_decay_preactivation());
    }
    Ok(min)
}

/// Compares the analytic gradient of the full batch loss (cell, head and,
/// for GRU-IMP, the likelihood regularizer through frozen noise) with
/// central differences for every trainable value.
///
/// Dropout and batch normalization are off: the head bias has an exactly
/// zero gradient under batch normalization, which finite differences can
/// only resolve to rounding noise.
pub fn gradient_check(kind: CellKind, dims: GradCheckDims, seed: u64) -> Result<GradCheckReport> {
    ensure!(
        dims.n_vars >= 1 && dims.hidden >= 1 && dims.steps >= 1 && dims.outputs >= 1 && dims.batch >= 1,
        Argument,
        "gradient check dimensions must be positive"
    );
    let task_mode = if seed.is_multiple_of(2) && dims.outputs >= 2 {
        TaskMode::Multiclass(dims.outputs)
    } else {
        TaskMode::MultiTask(dims.outputs)
    };
    let mut rng = Rng::for_stream(seed, &[STREAM_GRADCHECK, kind as u64]);
    let mut attempts = 0;
    let (inst, min_pre, analytic) = loop {
        attempts += 1;
        if attempts > MAX_ATTEMPTS {
            return Err(Error::Numerical(format!(
                "no instance for {kind} clear of decay kinks and the resolution floor after {MAX_ATTEMPTS} draws"
            )));
        }
        let inst = random_instance(kind, dims, task_mode, &mut rng)?;
        let min_pre = min_preactivation(&inst)?;
        if min_pre < KINK_MARGIN {
            continue;
        }
        let refs: Vec<&Sample> = inst.samples.iter().collect();
        let analytic = batch_objective(&inst.model, &refs, &inst.draws, inst.lambda, Phase::Train, true)?
            .flat_grad()
            .expect("gradient requested");
        if analytic.iter().any(|g| *g != 0.0 && g.abs() < RESOLUTION_FLOOR) {
            continue;
        }
        break (inst, min_pre, analytic);
    };

    let refs: Vec<&Sample> = inst.samples.iter().collect();
    let eval = |m: &Model, want: bool| batch_objective(m, &refs, &inst.draws, inst.lambda, Phase::Train, want);
    let base = inst.model.trainable();

    let mut names: Vec<(String, usize)> = inst.model.cell.blocks().into_iter().map(|b| (b.0, b.3.len())).collect();
    names.extend(inst.model.head.trainable_blocks().into_iter().map(|(n, v)| (n.to_string(), v.len())));

    let mut blocks = Vec::with_capacity(names.len());
    let mut offset = 0;
    let mut probe = inst.model.clone();
    for (name, len) in names {
        let mut worst: f64 = 0.0;
        for i in offset..offset + len {
            let mut values = base.clone();
            let mut at = |x: f64| -> Result<f64> {
                values[i] = x;
                probe.set_trainable(&values);
                Ok(eval(&probe, false)?.loss)
            };
            let fd = (at(base[i] + FD_STEP)? - at(base[i] - FD_STEP)?) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(analytic[i], fd));
        }
        blocks.push(BlockError {
            block: name,
            entries: len,
            max_rel_err: worst,
        });
        offset += len;
    }
    let max_rel_err = blocks.iter().map(|b| b.max_rel_err).fold(0.0, f64::max);
    Ok(GradCheckReport {
        kind,
        seed,
        dims,
        task_mode,
        max_rel_err,
        blocks,
        min_decay_preactivation: min_pre.is_finite().then_some(min_pre),
        attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(1e-9, 0.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn representative_kinds_pass() {
        for kind in [CellKind::GruMean, CellKind::GruD, CellKind::GruImp] {
            let r = gradient_check(kind, GradCheckDims::default(), 1).unwrap();
            assert!(r.max_rel_err < 1e-5, "{kind}: {:?}", r.blocks);
        }
    }
}
