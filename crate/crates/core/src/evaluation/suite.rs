//! Synthetic informative-missingness benchmark over several correlation
//! settings and cell kinds, with checksummed, resumable artifacts.

use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use super::decay::decay_report;
use super::protocols::{cross_validate, online_eval_cv, Summary};
use super::report::{correlation_csv, num, provenance_line, EvalReport};
use crate::artifact::{csv_with_provenance, sha256_file, sha256_hex, write_atomic, write_json};
use crate::cells::CellKind;
use crate::data::{generate_synthetic, missingness_label_correlation, SyntheticConfig};
use crate::error::{ensure, Error, Result};
use crate::parallel::ordered_map;
use crate::training::{Architecture, TrainConfig};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub kinds: Vec<CellKind>,
    pub correlations: Vec<f64>,
    /// Each seed drives both data generation and training.
    pub seeds: Vec<u64>,
    pub hidden: usize,
    pub folds: usize,
    /// Online-evaluation cutoffs in hours; empty means quarter, half,
    /// three quarters and all of the horizon.
    pub cutoffs: Vec<f64>,
    /// Base generator settings; strength and seed are overridden per cell.
    pub synthetic: SyntheticConfig,
    /// Base training settings; the seed is overridden per cell.
    pub train: TrainConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            kinds: vec![CellKind::GruMean, CellKind::GruForward, CellKind::GruSimple, CellKind::GruD],
            correlations: vec![0.0, 0.3, 0.6, 0.9],
            seeds: vec![0],
            hidden: 16,
            folds: 5,
            cutoffs: Vec::new(),
            synthetic: SyntheticConfig::default(),
            train: TrainConfig {
                learning_rate: 1e-2,
                ..TrainConfig::default()
            },
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(!self.kinds.is_empty(), Config, "suite needs at least one kind");
        ensure!(!self.correlations.is_empty(), Config, "suite needs at least one correlation setting");
        ensure!(!self.seeds.is_empty(), Config, "suite needs at least one seed");
        ensure!(self.hidden >= 1, Config, "hidden size must be at least 1");
        ensure!(self.folds >= 1, Config, "folds must be at least 1");
        ensure!(
            self.cutoffs.iter().all(|c| c.is_finite() && *c > 0.0),
            Config,
            "cutoffs must be positive hours"
        );
        self.synthetic.validate()?;
        self.train.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SuiteConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("suite config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One (kind, correlation, seed) cell of the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub kind: CellKind,
    pub correlation: f64,
    pub seed: u64,
    pub achieved_correlation: f64,
    pub achieved_missing_rate: f64,
    pub mean_auc: Option<f64>,
    pub std_auc: Option<f64>,
    /// Online AUC per cutoff, averaged over folds.
    pub online_auc: Vec<(f64, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteTable {
    pub provenance: serde_json::Value,
    pub rows: Vec<SuiteRow>,
}

impl SuiteTable {
    /// Mean AUC of `kind` at `correlation`, averaged over seeds.
    pub fn auc(&self, kind: CellKind, correlation: f64) -> Option<f64> {
        Summary::of(
            self.rows
                .iter()
                .filter(|r| r.kind == kind && r.correlation == correlation)
                .map(|r| r.mean_auc),
        )
        .mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    config_sha256: String,
    files: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub table: SuiteTable,
    /// `true` when a complete, verified run was found and nothing was done.
    pub reused: bool,
    pub files: Vec<PathBuf>,
}

fn config_digest(cfg: &SuiteConfig) -> String {
    sha256_hex(serde_json::to_string(cfg).expect("config serializes").as_bytes())
}

fn verified(dir: &Path, digest: &str) -> Option<Manifest> {
    let text = std::fs::read_to_string(dir.join(MANIFEST)).ok()?;
    let m: Manifest = serde_json::from_str(&text).ok()?;
    if m.config_sha256 != digest {
        return None;
    }
    for (name, sum) in &m.files {
        if sha256_file(&dir.join(name)).ok()? != *sum {
            return None;
        }
    }
    Some(m)
}

fn provenance(cfg: &SuiteConfig, cell: Option<(CellKind, f64, u64)>) -> serde_json::Value {
    let mut p = serde_json::json!({
        "tool": "decayrnn",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "suite",
        "config": cfg,
    });
    if let Some((kind, corr, seed)) = cell {
        p["cell"] = serde_json::json!({"kind": kind, "correlation": corr, "seed": seed});
    }
    p
}

fn cell_dir(kind: CellKind, correlation: f64, seed: u64) -> String {
    format!("cells/{kind}_corr{correlation}_seed{seed}")
}

/// Runs (or, when a verified complete run already exists in `out_dir`,
/// reloads) the benchmark and writes:
///
/// * `cells/<kind>_corr<c>_seed<s>/`: the cell's [`EvalReport`] bundle
/// * `correlation_corr<c>_seed<s>.csv`: the missingness/label correlation table
/// * `table.csv`, `table.json`: one row per cell
/// * `manifest.json`: SHA-256 of every file above and of the resolved config
pub fn experiment_suite(cfg: &SuiteConfig, out_dir: &Path) -> Result<SuiteOutcome> {
    cfg.validate()?;
    let digest = config_digest(cfg);
    if let Some(m) = verified(out_dir, &digest) {
        info!("suite in {} is complete and verified; nothing to do", out_dir.display());
        let text = std::fs::read_to_string(out_dir.join("table.json")).map_err(|e| Error::io(out_dir, e))?;
        let table: SuiteTable = serde_json::from_str(&text)?;
        let files = m.files.iter().map(|(n, _)| out_dir.join(n)).collect();
        return Ok(SuiteOutcome {
            table,
            reused: true,
            files,
        });
    }

    let mut files: Vec<PathBuf> = Vec::new();
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        for &correlation in &cfg.correlations {
            let data = generate_synthetic(&SyntheticConfig {
                correlation_strength: correlation,
                seed,
                ..cfg.synthetic.clone()
            })?;
            let summary = data.synthetic.clone().expect("generator records its summary");
            let correlation_table = missingness_label_correlation(&data)?;
            let corr_name = format!("correlation_corr{correlation}_seed{seed}.csv");
            let text = correlation_csv(&provenance_line(&provenance(cfg, None)), &correlation_table);
            write_atomic(&out_dir.join(&corr_name), text.as_bytes())?;
            files.push(out_dir.join(corr_name));

            let horizon = data.horizon();
            let cutoffs = if cfg.cutoffs.is_empty() {
                vec![0.25 * horizon, 0.5 * horizon, 0.75 * horizon, horizon]
            } else {
                cfg.cutoffs.clone()
            };
            let cells = ordered_map(&cfg.kinds, |_, &kind| -> Result<(EvalReport, SuiteRow)> {
                let train = TrainConfig {
                    seed,
                    ..cfg.train.clone()
                };
                let arch = Architecture {
                    kind,
                    hidden: cfg.hidden,
                };
                let run = cross_validate(arch, &data, &train, cfg.folds)?;
                let (online, online_folds) = online_eval_cv(&run, &data, &cutoffs)?;
                let mut report = EvalReport::new(provenance(cfg, Some((kind, correlation, seed))));
                if kind.has_input_decay() || kind.has_hidden_decay() {
                    report.decay = Some(decay_report(&run.models[0])?);
                }
                let row = SuiteRow {
                    kind,
                    correlation,
                    seed,
                    achieved_correlation: summary.achieved_correlation,
                    achieved_missing_rate: summary.achieved_missing_rate,
                    mean_auc: run.report.average.mean,
                    std_auc: run.report.average.std,
                    online_auc: online.cutoffs.iter().map(|c| (c.cutoff_hours, c.auc)).collect(),
                };
                info!("{kind} at correlation {correlation} (seed {seed}): AUC {:?}", row.mean_auc);
                report.cv = Some(run.report);
                report.online = Some(online);
                report.online_folds = online_folds;
                Ok((report, row))
            });
            for (cell, &kind) in cells.into_iter().zip(&cfg.kinds) {
                let (report, row) = cell?;
                files.extend(report.write(&out_dir.join(cell_dir(kind, correlation, seed)))?);
                rows.push(row);
            }
        }
    }

    let table = SuiteTable {
        provenance: provenance(cfg, None),
        rows,
    };
    let prov = provenance_line(&table.provenance);
    let csv_rows: Vec<String> = table
        .rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{}",
                r.kind,
                r.correlation,
                r.seed,
                r.achieved_correlation,
                r.achieved_missing_rate,
                num(r.mean_auc),
                num(r.std_auc)
            )
        })
        .collect();
    let csv = csv_with_provenance(
        &prov,
        "kind,correlation,seed,achieved_correlation,achieved_missing_rate,mean_auc,std_auc",
        &csv_rows,
    );
    write_atomic(&out_dir.join("table.csv"), csv.as_bytes())?;
    files.push(out_dir.join("table.csv"));
    write_json(&out_dir.join("table.json"), &table)?;
    files.push(out_dir.join("table.json"));

    let manifest = Manifest {
        config_sha256: digest,
        files: files
            .iter()
            .map(|p| {
                let name = p
                    .strip_prefix(out_dir)
                    .unwrap_or(p)
                    .to_string_lossy()
                    .replace('\\', "/");
                sha256_file(p).map(|s| (name, s))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    write_json(&out_dir.join(MANIFEST), &manifest)?;
    files.push(out_dir.join(MANIFEST));
    Ok(SuiteOutcome {
        table,
        reused: false,
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SuiteConfig {
        SuiteConfig {
            kinds: vec![CellKind::GruMean, CellKind::GruD],
            correlations: vec![0.0, 0.6],
            hidden: 3,
            folds: 2,
            synthetic: SyntheticConfig {
                n_samples: 40,
                n_variables: 3,
                n_classes: 2,
                n_steps: 6,
                ..Default::default()
            },
            train: TrainConfig {
                max_epochs: 3,
                learning_rate: 1e-2,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn table_shape_and_rerun_is_a_no_op() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny();
        let first = experiment_suite(&cfg, dir.path()).unwrap();
        assert!(!first.reused);
        assert_eq!(first.table.rows.len(), 4);
        assert!(dir.path().join("cells/gru-d_corr0.6_seed0/decay_curves.csv").exists());
        assert!(!dir.path().join("cells/gru-mean_corr0_seed0/decay_curves.csv").exists());
        let before = std::fs::metadata(dir.path().join("table.csv")).unwrap().modified().unwrap();
        let second = experiment_suite(&cfg, dir.path()).unwrap();
        assert!(second.reused);
        assert_eq!(second.table, first.table);
        let after = std::fs::metadata(dir.path().join("table.csv")).unwrap().modified().unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn tampered_run_is_redone() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SuiteConfig {
            kinds: vec![CellKind::GruMean],
            correlations: vec![0.0],
            ..tiny()
        };
        experiment_suite(&cfg, dir.path()).unwrap();
        let table = dir.path().join("table.csv");
        let original = std::fs::read(&table).unwrap();
        std::fs::write(&table, b"tampered").unwrap();
        let again = experiment_suite(&cfg, dir.path()).unwrap();
        assert!(!again.reused);
        assert_eq!(std::fs::read(&table).unwrap(), original);
    }

    #[test]
    fn config_rejects_unknown_fields() {
        assert!(SuiteConfig::from_json("{\"kinds\": [\"gru-d\"], \"bogus\": 1}").is_err());
        let cfg = SuiteConfig::from_json("{\"kinds\": [\"gru-d\"], \"seeds\": [3]}").unwrap();
        assert_eq!(cfg.seeds, vec![3]);
        assert_eq!(cfg.correlations.len(), 4);
    }
}
