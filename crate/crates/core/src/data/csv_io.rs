//! Wide CSV layout.
//!
//! Measurements: `series_id,timestamp,<var1>,…,<varD>` with timestamps in
//! hours and empty cells for missing values. Labels:
//! `series_id,<task1>,…,<taskC>`; a single column named `class` holds a
//! multiclass index instead of binary targets. Lines starting with `#` are
//! comments.

use std::collections::HashMap;
use std::path::Path;

use super::{Dataset, Label, RawSeries, Sample, TaskMode, MISSING};
use crate::artifact;
use crate::error::{ensure, Error, Result};
use crate::numeric::Matrix;

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    }
}

fn parse_cell(cell: &str, path: &Path, line: usize) -> Result<f64> {
    if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
        return Ok(MISSING);
    }
    cell.parse::<f64>()
        .map_err(|_| Error::Data(format!("{}:{line}: cannot parse '{cell}' as a number", path.display())))
}

struct Labels {
    names: Vec<String>,
    mode: TaskMode,
    by_id: HashMap<String, Label>,
}

fn read_labels(path: &Path, n_classes: Option<usize>) -> Result<Labels> {
    let mut rdr = reader(path)?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    ensure!(
        header.len() >= 2 && header[0] == "series_id",
        Data,
        "{}: label header must start with series_id and name at least one task",
        path.display()
    );
    let names = header[1..].to_vec();
    let multiclass = names.len() == 1 && names[0] == "class";
    let mut by_id = HashMap::new();
    let mut max_class = 0usize;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = row + 2;
        ensure!(rec.len() == header.len(), Data, "{}:{line}: wrong column count", path.display());
        let id = rec[0].to_string();
        let label = if multiclass {
            let c: usize = rec[1]
                .parse()
                .map_err(|_| Error::Data(format!("{}:{line}: class must be a non-negative integer", path.display())))?;
            max_class = max_class.max(c);
            Label::Class(c)
        } else {
            let v = (1..rec.len())
                .map(|k| parse_cell(&rec[k], path, line))
                .collect::<Result<Vec<f64>>>()?;
            ensure!(
                v.iter().all(|&x| x == 0.0 || x == 1.0),
                Data,
                "{}:{line}: task labels must be 0 or 1",
                path.display()
            );
            Label::Tasks(v)
        };
        ensure!(by_id.insert(id.clone(), label).is_none(), Data, "{}: duplicate series {id}", path.display());
    }
    let mode = if multiclass {
        let n = n_classes.unwrap_or(max_class + 1).max(max_class + 1);
        TaskMode::Multiclass(n.max(2))
    } else {
        TaskMode::MultiTask(names.len())
    };
    Ok(Labels { names, mode, by_id })
}

type Rows = Vec<(String, Vec<(f64, Vec<f64>)>)>;

fn read_rows(path: &Path) -> Result<(Vec<String>, Rows)> {
    let mut rdr = reader(path)?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    ensure!(
        header.len() >= 3 && header[0] == "series_id" && header[1] == "timestamp",
        Data,
        "{}: header must be series_id,timestamp,<variables…>",
        path.display()
    );
    let vars = header[2..].to_vec();
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<(f64, Vec<f64>)>> = HashMap::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = row + 2;
        ensure!(rec.len() == header.len(), Data, "{}:{line}: wrong column count", path.display());
        let time = parse_cell(&rec[1], path, line)?;
        ensure!(time.is_finite(), Data, "{}:{line}: missing timestamp", path.display());
        let values = (2..rec.len())
            .map(|k| parse_cell(&rec[k], path, line))
            .collect::<Result<Vec<f64>>>()?;
        let id = rec[0].to_string();
        groups
            .entry(id.clone())
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push((time, values));
    }
    let rows = order
        .into_iter()
        .map(|id| {
            let g = groups.remove(&id).unwrap_or_default();
            (id, g)
        })
        .collect();
    Ok((vars, rows))
}

/// Reads a regularly stepped dataset: every row is one step of its series.
pub fn read_dataset(data: &Path, labels: &Path, n_classes: Option<usize>) -> Result<Dataset> {
    let lab = read_labels(labels, n_classes)?;
    let (vars, rows) = read_rows(data)?;
    let d = vars.len();
    let samples = rows
        .into_iter()
        .map(|(id, steps)| {
            let label = lab
                .by_id
                .get(&id)
                .cloned()
                .ok_or_else(|| Error::Data(format!("series {id} has no label")))?;
            let timestamps: Vec<f64> = steps.iter().map(|s| s.0).collect();
            let flat: Vec<f64> = steps.into_iter().flat_map(|s| s.1).collect();
            Sample::new(id, timestamps.clone(), Matrix::from_vec(timestamps.len(), d, flat)?, label)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(samples, vars, lab.names, lab.mode)
}

/// Raw series with their variable names, task names and task mode.
pub type RawTable = (Vec<RawSeries>, Vec<String>, Vec<String>, TaskMode);

/// Reads irregular readings for resampling; rows may share timestamps and
/// arrive in any order.
pub fn read_raw_series(data: &Path, labels: &Path, n_classes: Option<usize>) -> Result<RawTable> {
    let lab = read_labels(labels, n_classes)?;
    let (vars, rows) = read_rows(data)?;
    let series = rows
        .into_iter()
        .map(|(id, steps)| {
            let label = lab
                .by_id
                .get(&id)
                .cloned()
                .ok_or_else(|| Error::Data(format!("series {id} has no label")))?;
            let readings = steps
                .into_iter()
                .flat_map(|(time, values)| {
                    values
                        .into_iter()
                        .enumerate()
                        .filter(|(_, x)| !x.is_nan())
                        .map(move |(v, x)| (time, v, x))
                })
                .collect();
            Ok(RawSeries {
                id,
                n_variables: vars.len(),
                readings,
                label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((series, vars, lab.names, lab.mode))
}

fn fmt_value(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

/// Renders `(measurements, labels)` CSV text, each prefixed by the comment
/// lines in `provenance`.
pub fn dataset_csv(ds: &Dataset, provenance: &str) -> (String, String) {
    let mut data = artifact::comment_block(provenance);
    data.push_str("series_id,timestamp");
    for v in &ds.variable_names {
        data.push(',');
        data.push_str(v);
    }
    data.push('\n');
    for s in &ds.samples {
        for t in 0..s.len() {
            data.push_str(&s.id);
            data.push(',');
            data.push_str(&fmt_value(s.timestamps[t]));
            for x in s.values.row(t) {
                data.push(',');
                data.push_str(&fmt_value(*x));
            }
            data.push('\n');
        }
    }
    let mut labels = artifact::comment_block(provenance);
    labels.push_str("series_id");
    if ds.task_mode.is_multiclass() {
        labels.push_str(",class");
    } else {
        for t in &ds.task_names {
            labels.push(',');
            labels.push_str(t);
        }
    }
    labels.push('\n');
    for s in &ds.samples {
        labels.push_str(&s.id);
        match &s.label {
            Label::Class(c) => labels.push_str(&format!(",{c}")),
            Label::Tasks(v) => v.iter().for_each(|x| labels.push_str(&format!(",{x}"))),
        }
        labels.push('\n');
    }
    (data, labels)
}

/// Writes both CSV files atomically.
pub fn write_dataset(ds: &Dataset, data: &Path, labels: &Path, provenance: &str) -> Result<()> {
    let (d, l) = dataset_csv(ds, provenance);
    artifact::write_atomic(data, d.as_bytes())?;
    artifact::write_atomic(labels, l.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic::{generate_synthetic, SyntheticConfig};

    #[test]
    fn round_trip_preserves_values_and_masks() {
        let ds = generate_synthetic(&SyntheticConfig {
            n_samples: 12,
            n_variables: 3,
            n_steps: 5,
            correlation_strength: 0.3,
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (dp, lp) = (dir.path().join("d.csv"), dir.path().join("l.csv"));
        write_dataset(&ds, &dp, &lp, "{\"seed\":3}").unwrap();
        let back = read_dataset(&dp, &lp, Some(5)).unwrap();
        assert_eq!(back.len(), ds.len());
        assert_eq!(back.task_mode, ds.task_mode);
        for (a, b) in ds.samples.iter().zip(&back.samples) {
            assert!(a.values.bit_eq(&b.values));
            assert_eq!(a.mask, b.mask);
            assert_eq!(a.label, b.label);
        }
    }

    #[test]
    fn binary_labels_and_irregular_rows() {
        let dir = tempfile::tempdir().unwrap();
        let dp = dir.path().join("d.csv");
        let lp = dir.path().join("l.csv");
        std::fs::write(&dp, "series_id,timestamp,hr,ph\na,0.7,3,\na,0.2,1,7.1\nb,5,,\nb,5.5,80,\n").unwrap();
        std::fs::write(&lp, "series_id,mortality\na,0\nb,1\n").unwrap();
        let (raw, vars, tasks, mode) = read_raw_series(&dp, &lp, None).unwrap();
        assert_eq!(vars, vec!["hr", "ph"]);
        assert_eq!(tasks, vec!["mortality"]);
        assert_eq!(mode, TaskMode::MultiTask(1));
        assert_eq!(raw[0].readings.len(), 3);
        let s = crate::data::resample(&raw[0], 1.0).unwrap();
        assert_eq!(s.values[(0, 0)], 2.0);
        // unsorted timestamps are rejected for stepped reads
        assert!(matches!(read_dataset(&dp, &lp, None), Err(Error::Data(_))));
    }
}
