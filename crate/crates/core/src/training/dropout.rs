//! Weight dropout on the recurrent cell: one mask per sequence, reused at
//! every time step.

use crate::cells::CellParams;
use crate::error::{ensure, Result};
use crate::numeric::Rng;

/// Multiplicative factors with the shape of `params`. Entries of the gate
/// matrices `W`, `U`, `V` are 0 or `1/(1−rate)`; every other entry is 1.
pub fn recurrent_dropout_masks(params: &CellParams, rate: f64, rng: &mut Rng) -> Result<CellParams> {
    ensure!((0.0..1.0).contains(&rate), Argument, "dropout rate {rate} outside [0, 1)");
    let mut scale = params.zeros_like();
    for block in scale.blocks_mut() {
        block.iter_mut().for_each(|x| *x = 1.0);
    }
    if rate == 0.0 {
        return Ok(scale);
    }
    let keep = 1.0 - rate;
    for g in &mut scale.gates {
        let mut mats = vec![g.w.data_mut(), g.u.data_mut()];
        if let Some(v) = g.v.as_mut() {
            mats.push(v.data_mut());
        }
        for m in mats {
            m.iter_mut()
                .for_each(|x| *x = if rng.uniform() < keep { 1.0 / keep } else { 0.0 });
        }
    }
    Ok(scale)
}

/// Elementwise product of two same-shaped parameter sets.
pub fn apply_scale(params: &CellParams, scale: &CellParams) -> CellParams {
    let mut out = params.clone();
    let factors = scale.flatten();
    let mut k = 0;
    for block in out.blocks_mut() {
        for x in block.iter_mut() {
            *x *= factors[k];
            k += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::CellKind;

    #[test]
    fn zero_rate_is_identity() {
        let p = CellParams::init(CellKind::GruD, 3, 4, &mut Rng::new(1, 0));
        let s = recurrent_dropout_masks(&p, 0.0, &mut Rng::new(2, 0)).unwrap();
        assert_eq!(apply_scale(&p, &s), p);
        assert!(recurrent_dropout_masks(&p, 1.0, &mut Rng::new(2, 0)).is_err());
    }

    #[test]
    fn masks_only_gate_matrices_and_are_unbiased() {
        let p = CellParams::init(CellKind::GruD, 8, 30, &mut Rng::new(1, 0));
        let s = recurrent_dropout_masks(&p, 0.3, &mut Rng::new(5, 0)).unwrap();
        let keep = 1.0 / 0.7;
        for g in &s.gates {
            assert!(g.w.data().iter().chain(g.u.data()).all(|&x| x == 0.0 || x == keep));
            assert!(g.b.iter().all(|&x| x == 1.0));
        }
        assert!(s.input_decay.as_ref().unwrap().w.iter().all(|&x| x == 1.0));
        let u = s.gates[0].u.data();
        let mean = u.iter().sum::<f64>() / u.len() as f64;
        assert!((mean - 1.0).abs() < 0.1);
    }
}
