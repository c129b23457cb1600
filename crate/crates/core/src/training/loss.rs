use crate::data::{Label, TaskMode};

pub const PROB_CLAMP: f64 = 1e-12;

fn clamp(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Cross-entropy for a softmax output, or summed binary cross-entropy over
/// sigmoid tasks. Probabilities are clamped before the logarithm.
pub fn cross_entropy(probs: &[f64], label: &Label, task_mode: TaskMode) -> f64 {
    match (label, task_mode) {
        (Label::Class(c), TaskMode::Multiclass(_)) => -clamp(probs[*c]).ln(),
        (Label::Tasks(t), TaskMode::MultiTask(_)) => probs
            .iter()
            .zip(t)
            .map(|(&p, &y)| -(y * clamp(p).ln() + (1.0 - y) * (1.0 - clamp(p)).ln()))
            .sum(),
        _ => panic!("label does not match task mode"),
    }
}

/// `ℓ = ℓ_ce + λ · aux`, where `aux` is the imputation model's observed-entry
/// negative log-likelihood (zero for kinds without one).
pub fn loss(probs: &[f64], label: &Label, task_mode: TaskMode, aux_nll: f64, lambda: f64) -> f64 {
    cross_entropy(probs, label, task_mode) + lambda * aux_nll
}

/// `∂ℓ_ce/∂y` for the softmax/sigmoid inputs `y`: `p − target` in both modes.
pub fn output_gradient(probs: &[f64], label: &Label, task_mode: TaskMode) -> Vec<f64> {
    match (label, task_mode) {
        (Label::Class(c), TaskMode::Multiclass(_)) => probs
            .iter()
            .enumerate()
            .map(|(k, &p)| p - if k == *c { 1.0 } else { 0.0 })
            .collect(),
        (Label::Tasks(t), TaskMode::MultiTask(_)) => probs.iter().zip(t).map(|(p, y)| p - y).collect(),
        _ => panic!("label does not match task mode"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let bin = TaskMode::MultiTask(1);
        assert!((cross_entropy(&[0.5], &Label::Tasks(vec![1.0]), bin) - 2f64.ln()).abs() < 1e-15);
        assert!((cross_entropy(&[0.5], &Label::Tasks(vec![1.0]), bin) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(cross_entropy(&[1.0], &Label::Tasks(vec![1.0]), bin) <= 1e-11);
        assert!(cross_entropy(&[0.0, 1.0, 0.0], &Label::Class(1), TaskMode::Multiclass(3)) <= 1e-11);
        let l = Label::Class(0);
        let mc = TaskMode::Multiclass(2);
        assert_eq!(loss(&[0.3, 0.7], &l, mc, 5.0, 0.0), loss(&[0.3, 0.7], &l, mc, -2.0, 0.0));
    }

    #[test]
    fn output_gradient_is_residual() {
        assert_eq!(output_gradient(&[0.25, 0.75], &Label::Class(1), TaskMode::Multiclass(2)), vec![0.25, -0.25]);
        assert_eq!(output_gradient(&[0.25, 0.5], &Label::Tasks(vec![0.0, 1.0]), TaskMode::MultiTask(2)), vec![0.25, -0.5]);
    }

    proptest! {
        #[test]
        fn clamped_loss_is_finite(p in 0.0f64..=1.0, y in 0u8..2) {
            let l = cross_entropy(&[p], &Label::Tasks(vec![y as f64]), TaskMode::MultiTask(1));
            prop_assert!(l.is_finite() && l >= 0.0);
            let l = cross_entropy(&[p, 1.0 - p], &Label::Class(y as usize), TaskMode::Multiclass(2));
            prop_assert!(l.is_finite());
        }

        #[test]
        fn affine_in_lambda(p in 0.01f64..0.99, aux in -5.0f64..5.0, lambda in 0.0f64..10.0) {
            let lab = Label::Tasks(vec![1.0]);
            let m = TaskMode::MultiTask(1);
            let base = loss(&[p], &lab, m, aux, 0.0);
            prop_assert!((loss(&[p], &lab, m, aux, lambda) - (base + lambda * aux)).abs() <= 1e-12);
        }
    }
}
