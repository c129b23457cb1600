//! Full-sequence forward pass with cached activations, and its exact
//! backward pass.

use std::f64::consts::PI;

use super::ops::{decay_diag_with_pre, decay_full_with_pre, rectifier_active};
use super::{build_simple_input, decay_input, decay_mask, impute_forward, impute_mean, CellKind, CellParams, Gate, Imputation};
use crate::data::Sample;
use crate::error::{ensure, Result};
use crate::numeric::{axpy, sigmoid_scalar, Matrix};

/// Activations of one step, enough to run the step backward.
#[derive(Debug, Clone, Default)]
pub struct StepCache {
    pub mask: Vec<f64>,
    pub delta: Vec<f64>,
    /// Raw measurements (`NaN` where missing).
    pub x_raw: Vec<f64>,
    /// `x_last − x̃` for the input-decay blend.
    pub decay_gap: Vec<f64>,
    /// Imputed measurement vector.
    pub imputed: Vec<f64>,
    /// Vector fed to the `W` matrices.
    pub input: Vec<f64>,
    /// Masking fed to the `V` matrices (decayed for GRU-DM).
    pub mask_feed: Vec<f64>,
    pub h_prev: Vec<f64>,
    /// Previous hidden state after hidden decay.
    pub h_bar: Vec<f64>,
    pub gamma_x: Vec<f64>,
    pub pre_x: Vec<f64>,
    pub gamma_h: Vec<f64>,
    pub pre_h: Vec<f64>,
    pub gamma_m: Vec<f64>,
    pub pre_m: Vec<f64>,
    pub gamma_imp: Vec<f64>,
    pub pre_imp: Vec<f64>,
    /// `W_x h_{t−1} + b_x`
    pub imp_proj: Vec<f64>,
    pub mu: Vec<f64>,
    /// Gate activations in gate order.
    pub gates: Vec<Vec<f64>>,
    pub c_prev: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SequenceOutput {
    pub kind: CellKind,
    pub steps: Vec<StepCache>,
    /// Per-sequence negative log-likelihood of observed entries under the
    /// GRU-IMP predictor, `−(1/T) Σ_t Σ_d m log N(x; μ, 1) / Σ_d m`
    /// (steps without observations contribute 0). Zero for other kinds.
    pub aux_nll: f64,
}

impl SequenceOutput {
    pub fn h_last(&self) -> &[f64] {
        &self.steps.last().expect("non-empty sequence").h
    }

    pub fn hidden_trajectory(&self) -> Vec<Vec<f64>> {
        self.steps.iter().map(|s| s.h.clone()).collect()
    }

    /// Smallest |pre-activation| of any decay across the sequence, or
    /// infinity when the kind has no decay.
    pub fn min_abs_decay_preactivation(&self) -> f64 {
        self.steps
            .iter()
            .flat_map(|s| s.pre_x.iter().chain(&s.pre_h).chain(&s.pre_m).chain(&s.pre_imp))
            .fold(f64::INFINITY, |acc, x| acc.min(x.abs()))
    }
}

fn gate_preactivation(g: &Gate, input: &[f64], h_in: &[f64], mask_feed: &[f64]) -> Vec<f64> {
    let mut a = g.b.clone();
    g.w.matvec_acc(input, &mut a);
    g.u.matvec_acc(h_in, &mut a);
    if let Some(v) = &g.v {
        v.matvec_acc(mask_feed, &mut a);
    }
    a
}

/// GRU update with optional masking feed. Returns `(h_t, [z, r, h̃])`.
fn gru_core(gates: &[Gate], h_prev: &[f64], input: &[f64], mask_feed: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let z: Vec<f64> = gate_preactivation(&gates[0], input, h_prev, mask_feed)
        .into_iter()
        .map(sigmoid_scalar)
        .collect();
    let r: Vec<f64> = gate_preactivation(&gates[1], input, h_prev, mask_feed)
        .into_iter()
        .map(sigmoid_scalar)
        .collect();
    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(r, h)| r * h).collect();
    let cand: Vec<f64> = gate_preactivation(&gates[2], input, &rh, mask_feed)
        .into_iter()
        .map(f64::tanh)
        .collect();
    let h = (0..h_prev.len())
        .map(|j| (1.0 - z[j]) * h_prev[j] + z[j] * cand[j])
        .collect();
    (h, vec![z, r, cand])
}

/// One plain GRU update `h_t = (1 − z) ⊙ h_{t−1} + z ⊙ h̃` on a prepared input.
/// `mask_feed` is required exactly when the kind feeds masking through `V`.
pub fn gru_step(params: &CellParams, h_prev: &[f64], input: &[f64], mask_feed: Option<&[f64]>) -> Result<Vec<f64>> {
    ensure!(!params.kind.is_lstm(), Argument, "gru_step called with an LSTM cell");
    ensure!(h_prev.len() == params.hidden, Argument, "hidden state has length {}, expected {}", h_prev.len(), params.hidden);
    let din = params.gates[0].w.cols();
    ensure!(input.len() == din, Argument, "input has length {}, expected {din}", input.len());
    let feed = mask_feed.unwrap_or(&[]);
    ensure!(
        params.kind.has_mask_feed() == mask_feed.is_some() && (mask_feed.is_none() || feed.len() == params.n_vars),
        Argument,
        "masking feed does not match {}",
        params.kind
    );
    Ok(gru_core(&params.gates, h_prev, input, feed).0)
}

fn check_dims(params: &CellParams, sample: &Sample, means: &[f64], noise: Option<&Matrix>) -> Result<()> {
    ensure!(!sample.is_empty(), Argument, "series {} has no steps", sample.id);
    ensure!(
        sample.n_variables() == params.n_vars,
        Argument,
        "series {} has {} variables, model expects {}",
        sample.id,
        sample.n_variables(),
        params.n_vars
    );
    ensure!(means.len() == params.n_vars, Argument, "means have length {}, expected {}", means.len(), params.n_vars);
    if let Some(eps) = noise {
        ensure!(
            eps.shape() == (sample.len(), params.n_vars),
            Argument,
            "noise is {:?}, expected {:?}",
            eps.shape(),
            (sample.len(), params.n_vars)
        );
    }
    Ok(())
}

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Runs the cell over the whole sample from `h_0 = 0`, with `x_last`
/// initialized to `means`.
///
/// `noise` holds one standard-normal draw per step and variable; it selects
/// the GRU-IMP training path `x̃ = μ + ε`. Without it the predictor mean is
/// used. Other kinds ignore it. Weight dropout is applied by the caller on a
/// masked copy of the parameters.
pub fn forward_sequence(params: &CellParams, sample: &Sample, means: &[f64], noise: Option<&Matrix>) -> Result<SequenceOutput> {
    check_dims(params, sample, means, noise)?;
    debug_assert!((HALF_LN_2PI - 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
    let kind = params.kind;
    let d = params.n_vars;
    let hsize = params.hidden;
    let mut h = vec![0.0; hsize];
    let mut c_state = vec![0.0; hsize];
    let mut x_last = means.to_vec();
    let mut steps = Vec::with_capacity(sample.len());
    let mut loglik_sum = 0.0;

    for t in 0..sample.len() {
        let m = sample.mask.row(t);
        let delta = sample.intervals.row(t);
        let x = sample.values.row(t);
        let mut cache = StepCache {
            mask: m.to_vec(),
            delta: delta.to_vec(),
            x_raw: x.to_vec(),
            h_prev: h.clone(),
            ..Default::default()
        };

        cache.h_bar = match &params.hidden_decay {
            Some(hd) => {
                let (gamma, pre) = decay_full_with_pre(&hd.w, &hd.b, delta);
                let bar = h.iter().zip(&gamma).map(|(h, g)| h * g).collect();
                cache.gamma_h = gamma;
                cache.pre_h = pre;
                bar
            }
            None => h.clone(),
        };

        cache.imputed = match kind.imputation() {
            Imputation::Mean => impute_mean(x, m, means),
            Imputation::Forward => impute_forward(x, m, &x_last),
            Imputation::InputDecay => {
                let dec = params.input_decay.as_ref().expect("input decay block");
                let (gamma, pre) = decay_diag_with_pre(&dec.w, &dec.b, delta);
                let out = decay_input(x, m, &x_last, means, &gamma);
                cache.decay_gap = x_last.iter().zip(means).map(|(l, mu)| l - mu).collect();
                cache.gamma_x = gamma;
                cache.pre_x = pre;
                out
            }
            Imputation::Model => {
                let imp = params.imputer.as_ref().expect("imputer block");
                let (gamma, pre) = decay_diag_with_pre(&imp.decay.w, &imp.decay.b, delta);
                let mut proj = imp.b.clone();
                imp.w.matvec_acc(&h, &mut proj);
                let mu: Vec<f64> = gamma.iter().zip(&proj).map(|(g, p)| g * p).collect();
                let eps = noise.map(|n| n.row(t));
                let out: Vec<f64> = (0..d)
                    .map(|k| {
                        if m[k] == 1.0 {
                            x[k]
                        } else {
                            mu[k] + eps.map_or(0.0, |e| e[k])
                        }
                    })
                    .collect();
                let observed: f64 = m.iter().sum();
                if observed > 0.0 {
                    let ll: f64 = (0..d)
                        .filter(|&k| m[k] == 1.0)
                        .map(|k| -0.5 * (x[k] - mu[k]).powi(2) - HALF_LN_2PI)
                        .sum();
                    loglik_sum += ll / observed;
                }
                cache.gamma_imp = gamma;
                cache.pre_imp = pre;
                cache.imp_proj = proj;
                cache.mu = mu;
                out
            }
        };

        cache.input = match kind {
            CellKind::GruSimple | CellKind::GruSimpleMaskOnly | CellKind::GruSimpleIntervalOnly => {
                build_simple_input(&cache.imputed, m, delta, kind)?
            }
            _ => cache.imputed.clone(),
        };

        if kind.has_mask_feed() {
            cache.mask_feed = match &params.mask_decay {
                Some(md) => {
                    let (gamma, pre) = decay_diag_with_pre(&md.w, &md.b, delta);
                    let feed = decay_mask(m, &gamma);
                    cache.gamma_m = gamma;
                    cache.pre_m = pre;
                    feed
                }
                None => m.to_vec(),
            };
        }

        if kind.is_lstm() {
            let pre: Vec<Vec<f64>> = params
                .gates
                .iter()
                .map(|g| gate_preactivation(g, &cache.input, &h, &[]))
                .collect();
            let act = |k: usize| -> Vec<f64> {
                if k == 3 {
                    pre[k].iter().map(|a| a.tanh()).collect()
                } else {
                    pre[k].iter().map(|&a| sigmoid_scalar(a)).collect()
                }
            };
            let gates: Vec<Vec<f64>> = (0..4).map(act).collect();
            let c_new: Vec<f64> = (0..hsize)
                .map(|j| gates[1][j] * c_state[j] + gates[0][j] * gates[3][j])
                .collect();
            h = (0..hsize).map(|j| gates[2][j] * c_new[j].tanh()).collect();
            cache.c_prev = std::mem::replace(&mut c_state, c_new.clone());
            cache.c = c_new;
            cache.gates = gates;
        } else {
            let (h_new, gates) = gru_core(&params.gates, &cache.h_bar, &cache.input, &cache.mask_feed);
            h = h_new;
            cache.gates = gates;
        }
        cache.h = h.clone();

        for k in 0..d {
            if m[k] == 1.0 {
                x_last[k] = x[k];
            }
        }
        steps.push(cache);
    }

    let aux_nll = if kind.has_imputer() {
        -loglik_sum / sample.len() as f64
    } else {
        0.0
    };
    Ok(SequenceOutput { kind, steps, aux_nll })
}

#[allow(clippy::too_many_arguments)]
fn gate_backward(
    g: &Gate,
    dg: &mut Gate,
    da: &[f64],
    input: &[f64],
    h_in: &[f64],
    mask_feed: &[f64],
    d_input: Option<&mut [f64]>,
    d_h_in: &mut [f64],
    d_mask_feed: Option<&mut [f64]>,
) {
    dg.w.add_outer(da, input);
    dg.u.add_outer(da, h_in);
    axpy(1.0, da, &mut dg.b);
    if let (Some(v), Some(dv)) = (&g.v, dg.v.as_mut()) {
        dv.add_outer(da, mask_feed);
        if let Some(dm) = d_mask_feed {
            v.tmatvec_acc(da, dm);
        }
    }
    if let Some(du) = d_input {
        g.w.tmatvec_acc(da, du);
    }
    g.u.tmatvec_acc(da, d_h_in);
}

/// Chain rule through `γ = exp(−max(0, a))`: returns `∂L/∂a` given `∂L/∂γ`.
#[inline]
fn decay_preact_grad(d_gamma: f64, gamma: f64, pre: f64) -> f64 {
    if rectifier_active(pre) {
        -d_gamma * gamma
    } else {
        0.0
    }
}

/// Accumulates into `grads` the gradient of a scalar loss whose partials are
/// `grad_h_last = ∂L/∂h_T` and `grad_aux = ∂L/∂aux_nll`.
pub fn backward_sequence(
    params: &CellParams,
    out: &SequenceOutput,
    grad_h_last: &[f64],
    grad_aux: f64,
    grads: &mut CellParams,
) -> Result<()> {
    ensure!(
        out.kind == params.kind && grads.kind == params.kind,
        Argument,
        "cache of {} / gradients of {} do not match {}",
        out.kind,
        grads.kind,
        params.kind
    );
    ensure!(
        grads.n_vars == params.n_vars && grads.hidden == params.hidden,
        Argument,
        "gradient buffer dimensions do not match parameters"
    );
    ensure!(!out.steps.is_empty(), Argument, "empty cache");
    ensure!(
        grad_h_last.len() == params.hidden && out.steps[0].h.len() == params.hidden && out.steps[0].mask.len() == params.n_vars,
        Argument,
        "cache or gradient does not match H={} D={}",
        params.hidden,
        params.n_vars
    );
    let kind = params.kind;
    let d = params.n_vars;
    let hsize = params.hidden;
    let t_len = out.steps.len() as f64;
    let needs_input_grad = matches!(kind.imputation(), Imputation::InputDecay | Imputation::Model);
    let din = kind.input_width(d);

    let mut dh = grad_h_last.to_vec();
    let mut dc_next = vec![0.0; hsize];

    for cache in out.steps.iter().rev() {
        let mut d_input = if needs_input_grad { vec![0.0; din] } else { Vec::new() };
        let mut d_mask_feed = vec![0.0; if kind.has_mask_feed() { d } else { 0 }];
        let mut dh_bar = vec![0.0; hsize];

        if kind.is_lstm() {
            let (i, f, o, g) = (&cache.gates[0], &cache.gates[1], &cache.gates[2], &cache.gates[3]);
            let mut da: Vec<Vec<f64>> = vec![vec![0.0; hsize]; 4];
            for j in 0..hsize {
                let tc = cache.c[j].tanh();
                let dc = dc_next[j] + dh[j] * o[j] * (1.0 - tc * tc);
                da[0][j] = dc * g[j] * i[j] * (1.0 - i[j]);
                da[1][j] = dc * cache.c_prev[j] * f[j] * (1.0 - f[j]);
                da[2][j] = dh[j] * tc * o[j] * (1.0 - o[j]);
                da[3][j] = dc * i[j] * (1.0 - g[j] * g[j]);
                dc_next[j] = dc * f[j];
            }
            for k in 0..4 {
                gate_backward(
                    &params.gates[k],
                    &mut grads.gates[k],
                    &da[k],
                    &cache.input,
                    &cache.h_bar,
                    &[],
                    needs_input_grad.then_some(d_input.as_mut_slice()),
                    &mut dh_bar,
                    None,
                );
            }
        } else {
            let (z, r, cand) = (&cache.gates[0], &cache.gates[1], &cache.gates[2]);
            let h_bar = &cache.h_bar;
            let mut da_z = vec![0.0; hsize];
            let mut da_c = vec![0.0; hsize];
            for j in 0..hsize {
                da_z[j] = dh[j] * (cand[j] - h_bar[j]) * z[j] * (1.0 - z[j]);
                da_c[j] = dh[j] * z[j] * (1.0 - cand[j] * cand[j]);
                dh_bar[j] = dh[j] * (1.0 - z[j]);
            }
            let rh: Vec<f64> = r.iter().zip(h_bar).map(|(r, h)| r * h).collect();
            let mut d_rh = vec![0.0; hsize];
            gate_backward(
                &params.gates[2],
                &mut grads.gates[2],
                &da_c,
                &cache.input,
                &rh,
                &cache.mask_feed,
                needs_input_grad.then_some(d_input.as_mut_slice()),
                &mut d_rh,
                kind.has_mask_feed().then_some(d_mask_feed.as_mut_slice()),
            );
            let mut da_r = vec![0.0; hsize];
            for j in 0..hsize {
                da_r[j] = d_rh[j] * h_bar[j] * r[j] * (1.0 - r[j]);
                dh_bar[j] += d_rh[j] * r[j];
            }
            gate_backward(
                &params.gates[1],
                &mut grads.gates[1],
                &da_r,
                &cache.input,
                h_bar,
                &cache.mask_feed,
                needs_input_grad.then_some(d_input.as_mut_slice()),
                &mut dh_bar,
                kind.has_mask_feed().then_some(d_mask_feed.as_mut_slice()),
            );
            gate_backward(
                &params.gates[0],
                &mut grads.gates[0],
                &da_z,
                &cache.input,
                h_bar,
                &cache.mask_feed,
                needs_input_grad.then_some(d_input.as_mut_slice()),
                &mut dh_bar,
                kind.has_mask_feed().then_some(d_mask_feed.as_mut_slice()),
            );
        }

        if let Some(gm) = grads.mask_decay.as_mut() {
            for k in 0..d {
                let d_gamma = d_mask_feed[k] * (1.0 - cache.mask[k]);
                let da = decay_preact_grad(d_gamma, cache.gamma_m[k], cache.pre_m[k]);
                gm.w[k] += da * cache.delta[k];
                gm.b[k] += da;
            }
        }

        let mut dh_prev = match grads.hidden_decay.as_mut() {
            Some(gh) => {
                let mut da = vec![0.0; hsize];
                for j in 0..hsize {
                    let d_gamma = dh_bar[j] * cache.h_prev[j];
                    da[j] = decay_preact_grad(d_gamma, cache.gamma_h[j], cache.pre_h[j]);
                }
                gh.w.add_outer(&da, &cache.delta);
                axpy(1.0, &da, &mut gh.b);
                dh_bar.iter().zip(&cache.gamma_h).map(|(d, g)| d * g).collect()
            }
            None => dh_bar,
        };

        match kind.imputation() {
            Imputation::InputDecay => {
                let gx = grads.input_decay.as_mut().expect("input decay gradient");
                for k in 0..d {
                    if cache.mask[k] == 1.0 {
                        continue;
                    }
                    let d_gamma = d_input[k] * cache.decay_gap[k];
                    let da = decay_preact_grad(d_gamma, cache.gamma_x[k], cache.pre_x[k]);
                    gx.w[k] += da * cache.delta[k];
                    gx.b[k] += da;
                }
            }
            Imputation::Model => {
                let imp = params.imputer.as_ref().expect("imputer block");
                let gi = grads.imputer.as_mut().expect("imputer gradient");
                let observed: f64 = cache.mask.iter().sum();
                let mut d_proj = vec![0.0; d];
                for k in 0..d {
                    let mut d_mu = if cache.mask[k] == 1.0 { 0.0 } else { d_input[k] };
                    if cache.mask[k] == 1.0 && observed > 0.0 {
                        // ∂aux/∂μ = −(1/T) (x − μ) / Σm on observed entries
                        d_mu -= grad_aux * (cache.x_raw[k] - cache.mu[k]) / (observed * t_len);
                    }
                    d_proj[k] = d_mu * cache.gamma_imp[k];
                    let da = decay_preact_grad(d_mu * cache.imp_proj[k], cache.gamma_imp[k], cache.pre_imp[k]);
                    gi.decay.w[k] += da * cache.delta[k];
                    gi.decay.b[k] += da;
                }
                gi.w.add_outer(&d_proj, &cache.h_prev);
                axpy(1.0, &d_proj, &mut gi.b);
                imp.w.tmatvec_acc(&d_proj, &mut dh_prev);
            }
            Imputation::Mean | Imputation::Forward => {}
        }

        dh = dh_prev;
    }
    Ok(())
}
