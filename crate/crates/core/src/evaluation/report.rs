//! Report bundle and its JSON/CSV serializations.
//!
//! Numbers in files are written at full round-trip precision; every file
//! carries the provenance it was produced with.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::decay::DecayReport;
use super::protocols::{CvReport, OnlineReport};
use crate::artifact::{csv_with_provenance, write_atomic, write_json};
use crate::data::CorrelationEntry;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Resolved configuration and seeds.
    pub provenance: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cv: Option<CvReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub online: Option<OnlineReport>,
    /// Per-fold online reports behind `online`.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub online_folds: Vec<OnlineReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub decay: Option<DecayReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub correlation: Option<Vec<CorrelationEntry>>,
}

impl EvalReport {
    pub fn new(provenance: serde_json::Value) -> Self {
        Self {
            provenance,
            cv: None,
            online: None,
            online_folds: Vec::new(),
            decay: None,
            correlation: None,
        }
    }

    /// Writes `report.json` plus a CSV for every present section into
    /// `dir`; returns the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let prov = provenance_line(&self.provenance);
        let mut written = Vec::new();
        let mut emit = |name: &str, text: String| -> Result<()> {
            let p = dir.join(name);
            write_atomic(&p, text.as_bytes())?;
            written.push(p);
            Ok(())
        };
        if let Some(cv) = &self.cv {
            emit("cv_auc.csv", cv_csv(&prov, cv))?;
        }
        if let Some(online) = &self.online {
            emit("online_auc.csv", online_csv(&prov, online))?;
        }
        if let Some(decay) = &self.decay {
            if !decay.input_curves.is_empty() {
                emit("decay_curves.csv", decay_curves_csv(&prov, decay))?;
            }
            if !decay.hidden_histograms.is_empty() {
                emit("hidden_decay_hist.csv", hidden_hist_csv(&prov, decay))?;
            }
        }
        if let Some(corr) = &self.correlation {
            emit("correlation.csv", correlation_csv(&prov, corr))?;
        }
        let json = dir.join("report.json");
        write_json(&json, self)?;
        written.push(json);
        Ok(written)
    }
}

/// Compact single-line JSON of the provenance, for CSV comment headers.
pub fn provenance_line(provenance: &serde_json::Value) -> String {
    serde_json::to_string(provenance).expect("json value serializes")
}

/// Full-precision number; empty when undefined.
pub fn num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn cv_csv(provenance: &str, cv: &CvReport) -> String {
    let mut rows: Vec<String> = cv
        .output_names
        .iter()
        .zip(&cv.per_output)
        .map(|(name, s)| format!("{name},{},{},{}", num(s.mean), num(s.std), s.n))
        .collect();
    rows.push(format!("average,{},{},{}", num(cv.average.mean), num(cv.average.std), cv.average.n));
    csv_with_provenance(provenance, "output,mean_auc,std_auc,folds", &rows)
}

pub fn online_csv(provenance: &str, online: &OnlineReport) -> String {
    let rows: Vec<String> = online
        .cutoffs
        .iter()
        .map(|c| format!("{},{},{}", c.cutoff_hours, num(c.auc), c.empty_prefix))
        .collect();
    csv_with_provenance(provenance, "cutoff_hours,auc,empty_prefix", &rows)
}

pub fn decay_curves_csv(provenance: &str, decay: &DecayReport) -> String {
    let rows: Vec<String> = decay
        .input_curves
        .iter()
        .flat_map(|c| {
            c.delta
                .iter()
                .zip(&c.gamma)
                .map(move |(d, g)| format!("{},{d},{g}", c.variable))
        })
        .collect();
    csv_with_provenance(provenance, "variable,delta,gamma", &rows)
}

pub fn hidden_hist_csv(provenance: &str, decay: &DecayReport) -> String {
    let rows: Vec<String> = decay
        .hidden_histograms
        .iter()
        .flat_map(|h| {
            h.bins
                .iter()
                .map(move |b| format!("{},{},{},{}", h.variable, b.lo, b.hi, b.count))
        })
        .collect();
    csv_with_provenance(provenance, "variable,bin_lo,bin_hi,count", &rows)
}

pub fn correlation_csv(provenance: &str, entries: &[CorrelationEntry]) -> String {
    let rows: Vec<String> = entries
        .iter()
        .map(|e| format!("{},{},{}", e.variable, e.task, e.pearson_r))
        .collect();
    csv_with_provenance(provenance, "variable,task,pearson_r", &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::CutoffAuc;

    #[test]
    fn online_csv_layout() {
        let r = OnlineReport {
            cutoffs: vec![
                CutoffAuc {
                    cutoff_hours: 12.0,
                    auc: Some(0.75),
                    empty_prefix: false,
                },
                CutoffAuc {
                    cutoff_hours: 0.5,
                    auc: None,
                    empty_prefix: true,
                },
            ],
            full_auc: Some(0.8),
            n_samples: 4,
        };
        let text = online_csv("{\"seed\":1}", &r);
        assert_eq!(
            text,
            "# {\"seed\":1}\ncutoff_hours,auc,empty_prefix\n12,0.75,false\n0.5,,true\n"
        );
    }

    #[test]
    fn write_creates_requested_sections_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = EvalReport::new(serde_json::json!({"seed": 3}));
        r.correlation = Some(vec![CorrelationEntry {
            variable: "v0".into(),
            task: "class".into(),
            pearson_r: 0.25,
            degenerate: false,
        }]);
        let files = r.write(dir.path()).unwrap();
        let names: Vec<_> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(names, vec!["correlation.csv", "report.json"]);
        let back: EvalReport =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
