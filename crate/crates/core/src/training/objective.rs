//! Mean mini-batch loss and its exact gradient through head and cell.

use super::dropout::{apply_scale, recurrent_dropout_masks};
use super::head::{head_backward, head_dropout_mask, head_forward, HeadGrad, Phase};
use super::loss::{cross_entropy, output_gradient};
use super::model::Model;
use crate::cells::{backward_sequence, forward_sequence, CellParams};
use crate::data::Sample;
use crate::error::Result;
use crate::numeric::{Matrix, Rng};
use crate::parallel::ordered_map;

/// Per-sequence random draws: recurrent weight-dropout factors, the head
/// dropout mask and the imputation noise. `None` disables each.
#[derive(Debug, Clone, Default)]
pub struct Draws {
    pub weight_scale: Option<CellParams>,
    pub head_mask: Option<Vec<f64>>,
    pub noise: Option<Matrix>,
}

impl Draws {
    pub fn none() -> Self {
        Self::default()
    }

    /// Draws for one training sequence. Noise is drawn only for GRU-IMP.
    pub fn sample(model: &Model, steps: usize, head_dropout: f64, recurrent_dropout: f64, rng: &mut Rng) -> Result<Self> {
        let weight_scale = if recurrent_dropout > 0.0 {
            Some(recurrent_dropout_masks(&model.cell, recurrent_dropout, rng)?)
        } else {
            None
        };
        let head_mask = (head_dropout > 0.0).then(|| head_dropout_mask(model.hidden(), head_dropout, rng));
        let noise = model
            .kind()
            .has_imputer()
            .then(|| Matrix::from_fn(steps, model.cell.n_vars, |_, _| rng.gaussian()));
        Ok(Self {
            weight_scale,
            head_mask,
            noise,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    /// Mean over the batch of `ce + λ·aux`.
    pub loss: f64,
    pub mean_ce: f64,
    /// Mean imputation NLL (zero for kinds without an imputer).
    pub mean_aux: f64,
    pub cell_grad: Option<CellParams>,
    pub head_grad: Option<HeadGrad>,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
}

impl BatchResult {
    /// Gradient in the layout of [`Model::trainable`].
    pub fn flat_grad(&self) -> Option<Vec<f64>> {
        let mut g = self.cell_grad.as_ref()?.flatten();
        g.extend(self.head_grad.as_ref()?.flatten());
        Some(g)
    }
}

/// Evaluates the batch loss (and optionally its gradient) for `model`.
pub fn batch_objective(
    model: &Model,
    samples: &[&Sample],
    draws: &[Draws],
    lambda: f64,
    phase: Phase,
    want_grad: bool,
) -> Result<BatchResult> {
    assert_eq!(samples.len(), draws.len());
    let n = samples.len() as f64;
    let items: Vec<(&Sample, &Draws)> = samples.iter().copied().zip(draws).collect();

    let forwards = ordered_map(&items, |_, (s, dr)| -> Result<_> {
        let eff = dr.weight_scale.as_ref().map(|sc| apply_scale(&model.cell, sc));
        let params = eff.as_ref().unwrap_or(&model.cell);
        let out = forward_sequence(params, s, &model.means, dr.noise.as_ref())?;
        Ok((eff, out))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let hs: Vec<&[f64]> = forwards.iter().map(|(_, o)| o.h_last()).collect();
    let masks: Vec<Option<Vec<f64>>> = draws.iter().map(|d| d.head_mask.clone()).collect();
    let cache = head_forward(&model.head, &hs, &masks, model.task_mode, phase);

    let mut ce_sum = 0.0;
    let mut aux_sum = 0.0;
    for ((s, (_, out)), p) in samples.iter().zip(&forwards).zip(&cache.probs) {
        ce_sum += cross_entropy(p, &s.label, model.task_mode);
        aux_sum += out.aux_nll;
    }
    let mean_ce = ce_sum / n;
    let mean_aux = aux_sum / n;
    let mut result = BatchResult {
        loss: mean_ce + lambda * mean_aux,
        mean_ce,
        mean_aux,
        cell_grad: None,
        head_grad: None,
        batch_mean: cache.batch_mean.clone(),
        batch_var: cache.batch_var.clone(),
    };
    if !want_grad {
        return Ok(result);
    }

    let dy: Vec<Vec<f64>> = samples
        .iter()
        .zip(&cache.probs)
        .map(|(s, p)| output_gradient(p, &s.label, model.task_mode).into_iter().map(|g| g / n).collect())
        .collect();
    let (head_grad, dh) = head_backward(&model.head, &cache, &dy);

    let work: Vec<usize> = (0..samples.len()).collect();
    let grads = ordered_map(&work, |_, &i| -> Result<CellParams> {
        let (eff, out) = &forwards[i];
        let params = eff.as_ref().unwrap_or(&model.cell);
        let mut g = model.cell.zeros_like();
        backward_sequence(params, out, &dh[i], lambda / n, &mut g)?;
        Ok(match &draws[i].weight_scale {
            Some(sc) => apply_scale(&g, sc),
            None => g,
        })
    });
    // fixed reduction order: sample index
    let mut total = model.cell.zeros_like();
    for g in grads {
        total.add_assign(&g?);
    }
    result.cell_grad = Some(total);
    result.head_grad = Some(head_grad);
    Ok(result)
}
