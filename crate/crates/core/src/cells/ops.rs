//! Imputation rules and decay mechanisms, one time step at a time.
//!
//! Values arrive with the `NaN` sentinel where unobserved, so every rule
//! branches on the mask instead of multiplying by it.

use super::CellKind;
use crate::error::{ensure, Result};
use crate::numeric::Matrix;

/// `m x + (1 − m) x̃`
pub fn impute_mean(x: &[f64], m: &[f64], means: &[f64]) -> Vec<f64> {
    impute_forward(x, m, means)
}

/// `m x + (1 − m) x_last`
pub fn impute_forward(x: &[f64], m: &[f64], x_last: &[f64]) -> Vec<f64> {
    debug_assert!(x.len() == m.len() && m.len() == x_last.len());
    x.iter()
        .zip(m)
        .zip(x_last)
        .map(|((&x, &m), &last)| if m == 1.0 { x } else { last })
        .collect()
}

/// Concatenated input of the GRU-Simple family: `[x; m; δ]`, `[x; m]` or `[x; δ]`.
pub fn build_simple_input(x_imputed: &[f64], m: &[f64], delta: &[f64], kind: CellKind) -> Result<Vec<f64>> {
    let mut out = x_imputed.to_vec();
    match kind {
        CellKind::GruSimple => {
            out.extend_from_slice(m);
            out.extend_from_slice(delta);
        }
        CellKind::GruSimpleMaskOnly => out.extend_from_slice(m),
        CellKind::GruSimpleIntervalOnly => out.extend_from_slice(delta),
        other => {
            return Err(crate::Error::Argument(format!(
                "{other} does not concatenate masking or intervals"
            )))
        }
    }
    Ok(out)
}

/// Derivative convention for `max(0, a)`: the decay counts as active when
/// `a >= 0`. Zero-initialized decay parameters sit exactly at `a = 0`, and
/// taking the right derivative there is what lets them leave the origin.
#[inline]
pub fn rectifier_active(pre: f64) -> bool {
    pre >= 0.0
}

#[inline]
pub(crate) fn gamma_of(pre: f64) -> f64 {
    (-pre.max(0.0)).exp()
}

/// Diagonal decay `γ = exp(−max(0, w ⊙ δ + b))`; also returns the pre-activation.
pub(crate) fn decay_diag_with_pre(w: &[f64], b: &[f64], delta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let pre: Vec<f64> = w.iter().zip(b).zip(delta).map(|((w, b), d)| w * d + b).collect();
    (pre.iter().map(|&a| gamma_of(a)).collect(), pre)
}

/// Full decay `γ = exp(−max(0, W δ + b))`; also returns the pre-activation.
pub(crate) fn decay_full_with_pre(w: &Matrix, b: &[f64], delta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut pre = b.to_vec();
    w.matvec_acc(delta, &mut pre);
    (pre.iter().map(|&a| gamma_of(a)).collect(), pre)
}

pub fn decay_rate_diag(w: &[f64], b: &[f64], delta: &[f64]) -> Result<Vec<f64>> {
    ensure!(
        w.len() == b.len() && b.len() == delta.len(),
        Argument,
        "diagonal decay needs equal lengths, got {}, {}, {}",
        w.len(),
        b.len(),
        delta.len()
    );
    Ok(decay_diag_with_pre(w, b, delta).0)
}

pub fn decay_rate_full(w: &Matrix, b: &[f64], delta: &[f64]) -> Result<Vec<f64>> {
    ensure!(
        w.rows() == b.len() && w.cols() == delta.len(),
        Argument,
        "decay matrix {:?} does not fit bias {} and interval {}",
        w.shape(),
        b.len(),
        delta.len()
    );
    Ok(decay_full_with_pre(w, b, delta).0)
}

/// Observed entries pass through; missing ones blend the last observation
/// toward the mean: `γ x_last + (1 − γ) x̃`.
pub fn decay_input(x: &[f64], m: &[f64], x_last: &[f64], means: &[f64], gamma: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|d| {
            if m[d] == 1.0 {
                x[d]
            } else {
                gamma[d] * x_last[d] + (1.0 - gamma[d]) * means[d]
            }
        })
        .collect()
}

/// `γ_h ⊙ h`
pub fn decay_hidden(h: &[f64], gamma: &[f64]) -> Vec<f64> {
    h.iter().zip(gamma).map(|(h, g)| h * g).collect()
}

/// `m + (1 − m) γ_m`
pub fn decay_mask(m: &[f64], gamma: &[f64]) -> Vec<f64> {
    m.iter().zip(gamma).map(|(&m, &g)| m + (1.0 - m) * g).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::MISSING;
    use proptest::prelude::*;

    #[test]
    fn imputation_examples() {
        let x = [5.0, MISSING];
        assert_eq!(impute_mean(&x, &[1.0, 0.0], &[9.0, 2.0]), vec![5.0, 2.0]);
        assert_eq!(impute_mean(&[1.0, 2.0], &[1.0, 1.0], &[9.0, 9.0]), vec![1.0, 2.0]);
        assert_eq!(impute_mean(&[MISSING, MISSING], &[0.0, 0.0], &[9.0, 2.0]), vec![9.0, 2.0]);
        assert_eq!(impute_forward(&[MISSING], &[0.0], &[7.0]), vec![7.0]);
    }

    #[test]
    fn simple_input_layout() {
        let x = [1.0, 2.0];
        let m = [1.0, 0.0];
        let d = [0.0, 3.0];
        assert_eq!(
            build_simple_input(&x, &m, &d, CellKind::GruSimple).unwrap(),
            vec![1.0, 2.0, 1.0, 0.0, 0.0, 3.0]
        );
        assert_eq!(build_simple_input(&x, &m, &d, CellKind::GruSimpleMaskOnly).unwrap().len(), 4);
        assert_eq!(
            build_simple_input(&x, &[1.0, 1.0], &[0.0, 0.0], CellKind::GruSimpleIntervalOnly).unwrap(),
            vec![1.0, 2.0, 0.0, 0.0]
        );
        assert!(build_simple_input(&x, &m, &d, CellKind::GruD).is_err());
    }

    #[test]
    fn decay_rate_examples() {
        assert_eq!(decay_rate_diag(&[0.0], &[0.0], &[4.0]).unwrap(), vec![1.0]);
        assert_eq!(decay_rate_diag(&[1.0], &[-3.0], &[0.0]).unwrap(), vec![1.0]);
        let g = decay_rate_diag(&[0.5], &[0.0], &[2.0]).unwrap()[0];
        assert!((g - (-1.0f64).exp()).abs() < 1e-15);
        assert!((g - 0.367_879).abs() < 1e-6);
        let w = Matrix::from_rows(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let full = decay_rate_full(&w, &[0.0, 0.0], &[1.0, 5.0]).unwrap();
        assert!((full[0] - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(full[1], 1.0);
    }

    #[test]
    fn decay_input_examples() {
        assert_eq!(decay_input(&[3.0], &[1.0], &[2.0], &[0.0], &[0.5]), vec![3.0]);
        assert_eq!(decay_input(&[MISSING], &[0.0], &[2.0], &[0.0], &[1.0]), vec![2.0]);
        assert_eq!(decay_input(&[MISSING], &[0.0], &[2.0], &[0.0], &[0.5]), vec![1.0]);
    }

    #[test]
    fn decay_hidden_and_mask_examples() {
        assert_eq!(decay_hidden(&[0.3, -0.2], &[1.0, 1.0]), vec![0.3, -0.2]);
        assert_eq!(decay_hidden(&[-1.0, 1.0], &[0.5, 0.5]), vec![-0.5, 0.5]);
        assert_eq!(decay_mask(&[1.0], &[0.2]), vec![1.0]);
        assert_eq!(decay_mask(&[0.0], &[0.3]), vec![0.3]);
    }

    proptest! {
        #[test]
        fn decay_in_unit_interval(w in -5.0f64..5.0, b in -5.0f64..5.0, d in 0.0f64..48.0) {
            let g = decay_rate_diag(&[w], &[b], &[d]).unwrap()[0];
            prop_assert!(g > 0.0 && g <= 1.0);
            prop_assert_eq!(g == 1.0, w * d + b <= 0.0);
        }

        #[test]
        fn decay_input_limits(x in -3.0f64..3.0, last in -3.0f64..3.0, mean in -3.0f64..3.0, g in 0.0f64..=1.0) {
            // observed → identity
            prop_assert_eq!(decay_input(&[x], &[1.0], &[last], &[mean], &[g]), vec![x]);
            // γ = 1 → forward fill, γ = 0 → mean
            prop_assert_eq!(decay_input(&[MISSING], &[0.0], &[last], &[mean], &[1.0]), impute_forward(&[MISSING], &[0.0], &[last]));
            prop_assert_eq!(decay_input(&[MISSING], &[0.0], &[last], &[mean], &[0.0]), impute_mean(&[MISSING], &[0.0], &[mean]));
            let v = decay_input(&[MISSING], &[0.0], &[last], &[mean], &[g])[0];
            prop_assert!(v >= last.min(mean) - 1e-12 && v <= last.max(mean) + 1e-12);
        }

        #[test]
        fn hidden_decay_contracts(h in prop::collection::vec(-1.0f64..1.0, 1..8), g in 0.0f64..=1.0) {
            let gamma = vec![g; h.len()];
            let out = decay_hidden(&h, &gamma);
            let before = h.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let after = out.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            prop_assert!(after <= before);
        }

        #[test]
        fn decayed_mask_in_unit_interval(bits in prop::collection::vec(any::<bool>(), 1..8), g in 1e-9f64..=1.0) {
            let m: Vec<f64> = bits.iter().map(|&b| b as u8 as f64).collect();
            let out = decay_mask(&m, &vec![g; m.len()]);
            for (o, &mi) in out.iter().zip(&m) {
                prop_assert!(*o > 0.0 && *o <= 1.0);
                if mi == 1.0 { prop_assert_eq!(*o, 1.0); }
            }
        }
    }
}
