use std::collections::BTreeMap;

use super::{Label, Sample, MISSING};
use crate::error::{ensure, Result};
use crate::numeric::Matrix;

/// Irregular readings of one series before binning: `(hours, variable, value)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub id: String,
    pub n_variables: usize,
    pub readings: Vec<(f64, usize, f64)>,
    pub label: Label,
}

/// Bins readings into windows of `bin_hours` counted from hour 0.
///
/// Each kept step is a bin that holds at least one reading; its timestamp is
/// the bin start. Several readings of one variable in one bin are averaged; a
/// variable with no reading in a kept bin is missing there.
pub fn resample(raw: &RawSeries, bin_hours: f64) -> Result<Sample> {
    ensure!(
        bin_hours > 0.0 && bin_hours.is_finite(),
        Argument,
        "bin width must be positive, got {bin_hours}"
    );
    ensure!(!raw.readings.is_empty(), Data, "series {} has no readings", raw.id);
    let d = raw.n_variables;
    let mut bins: BTreeMap<u64, (Vec<f64>, Vec<u32>)> = BTreeMap::new();
    for &(time, var, value) in &raw.readings {
        ensure!(
            time >= 0.0 && time.is_finite(),
            Data,
            "series {} has reading at invalid time {time}",
            raw.id
        );
        ensure!(var < d, Data, "series {} reading refers to variable {var} >= {d}", raw.id);
        if value.is_nan() {
            continue;
        }
        let bin = (time / bin_hours).floor() as u64;
        let (sum, count) = bins.entry(bin).or_insert_with(|| (vec![0.0; d], vec![0; d]));
        sum[var] += value;
        count[var] += 1;
    }
    ensure!(!bins.is_empty(), Data, "series {} has no observed values", raw.id);
    let mut timestamps = Vec::with_capacity(bins.len());
    let mut data = Vec::with_capacity(bins.len() * d);
    for (bin, (sum, count)) in bins {
        timestamps.push(bin as f64 * bin_hours);
        data.extend(
            sum.iter()
                .zip(&count)
                .map(|(&s, &c)| if c == 0 { MISSING } else { s / c as f64 }),
        );
    }
    let values = Matrix::from_vec(timestamps.len(), d, data)?;
    Sample::new(raw.id.clone(), timestamps, values, raw.label.clone())
}
