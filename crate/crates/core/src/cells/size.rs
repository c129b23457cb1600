use super::CellKind;
use crate::error::{ensure, Result};

/// Scalars stored per output unit besides its affine weights: batch-norm
/// scale, shift, running mean and running variance.
pub const HEAD_BOOKKEEPING_PER_UNIT: usize = 4;

fn cell_count(kind: CellKind, d: usize, h: usize) -> usize {
    let gates = kind.n_gates();
    let din = kind.input_width(d);
    let mut n = gates * (h * din + h * h + h);
    if kind.has_mask_feed() {
        n += gates * h * d;
    }
    if kind.has_input_decay() {
        n += 2 * d;
    }
    if kind.has_hidden_decay() {
        n += h * d + h;
    }
    if kind.has_mask_decay() {
        n += 2 * d;
    }
    if kind.has_imputer() {
        n += d * h + d + 2 * d;
    }
    n
}

/// Total trainable and bookkeeping parameters: the recurrent cell plus
/// `C (H + 1)` affine head values and 4 batch-norm values per output unit.
pub fn count_params(kind: CellKind, d: usize, h: usize, c: usize) -> Result<usize> {
    ensure!(d > 0 && h > 0 && c > 0, Argument, "dimensions must be positive (D={d}, H={h}, C={c})");
    Ok(cell_count(kind, d, h) + c * (h + 1) + HEAD_BOOKKEEPING_PER_UNIT * c)
}

/// Largest hidden size whose [`count_params`] fits in `budget`.
pub fn size_for_budget(kind: CellKind, d: usize, c: usize, budget: usize) -> Result<usize> {
    let smallest = count_params(kind, d, 1, c)?;
    ensure!(
        smallest <= budget,
        Config,
        "{kind} with D={d}, C={c} needs at least {smallest} parameters; budget is {budget}"
    );
    let mut h = 1;
    while count_params(kind, d, h + 1, c)? <= budget {
        h += 1;
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::CellParams;

    #[test]
    fn closed_form_matches_materialized_blocks() {
        for kind in CellKind::ALL {
            for (d, h) in [(1, 1), (3, 4), (7, 2)] {
                assert_eq!(cell_count(kind, d, h), CellParams::zeros(kind, d, h).count(), "{kind}");
            }
        }
    }

    #[test]
    fn size_table_rows() {
        use CellKind::*;
        assert_eq!(count_params(GruMean, 33, 64, 1).unwrap(), 18885);
        assert_eq!(count_params(GruSimple, 99, 56, 1).unwrap(), 59533);
        assert_eq!(count_params(GruD, 33, 49, 1).unwrap(), 18838);
        assert_eq!(count_params(GruD, 18, 55, 5).unwrap(), 16561);
        assert!(count_params(GruD, 0, 5, 1).is_err());
    }

    #[test]
    fn budget_examples() {
        assert_eq!(size_for_budget(CellKind::GruSimple, 33, 1, 18885).unwrap(), 43);
        let exact = count_params(CellKind::GruD, 33, 49, 1).unwrap();
        assert_eq!(size_for_budget(CellKind::GruD, 33, 1, exact).unwrap(), 49);
        assert!(size_for_budget(CellKind::GruD, 33, 1, 10).is_err());
        let mut last = 0;
        for budget in (500..20000).step_by(731) {
            let h = size_for_budget(CellKind::GruMean, 10, 2, budget).unwrap();
            assert!(h >= last);
            last = h;
        }
    }
}
