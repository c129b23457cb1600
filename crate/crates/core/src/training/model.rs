use std::path::Path;

use serde::{Deserialize, Serialize};

use super::head::{head_forward, HeadParams, Phase};
use crate::artifact::write_json;
use crate::cells::{forward_sequence, CellKind, CellParams, ParamBlock};
use crate::data::{Dataset, NormStats, Sample, TaskMode};
use crate::error::{ensure, Error, Result};
use crate::numeric::Rng;
use crate::parallel::ordered_map;

pub const MODEL_FORMAT: &str = "decayrnn-model";
pub const MODEL_VERSION: u32 = 1;

/// A trained classifier together with everything inference needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub cell: CellParams,
    pub head: HeadParams,
    pub task_mode: TaskMode,
    /// Empirical means of the (normalized) training split.
    pub means: Vec<f64>,
    pub normalization: NormStats,
    pub variable_names: Vec<String>,
    pub task_names: Vec<String>,
}

/// Human-readable description of the wiring conventions baked into a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCard {
    pub kind: CellKind,
    pub imputation: String,
    pub masking_feed: bool,
    pub decays: Vec<String>,
    pub notes: Vec<String>,
}

impl ModelCard {
    pub fn for_kind(kind: CellKind) -> Self {
        use crate::cells::Imputation::*;
        let imputation = match kind.imputation() {
            Mean => "empirical mean",
            Forward => "last observation (empirical mean before the first)",
            InputDecay => "decayed blend of last observation and empirical mean",
            Model => "learned Gaussian predictor: sample in training, mean at inference",
        }
        .to_string();
        let mut decays = Vec::new();
        if kind.has_input_decay() {
            decays.push("input".to_string());
        }
        if kind.has_hidden_decay() {
            decays.push("hidden".to_string());
        }
        if kind.has_mask_decay() {
            decays.push("mask".to_string());
        }
        if kind.has_imputer() {
            decays.push("imputation".to_string());
        }
        let mut notes = Vec::new();
        if matches!(kind, CellKind::GruDI | CellKind::GruDS | CellKind::GruDM) {
            notes.push(
                "convention: keeps the masking feed of GRU-D and enables a single decay mechanism".to_string(),
            );
        }
        if kind == CellKind::GruDM {
            notes.push("convention: the decayed mask replaces the raw mask in the masking feed".to_string());
        }
        if kind == CellKind::GruImp {
            notes.push("convention: plain GRU gates without masking feed; loss adds lambda times the observed-entry NLL".to_string());
        }
        if kind.has_any_decay() {
            notes.push("decay gradient at a zero pre-activation uses the right derivative".to_string());
        }
        Self {
            kind,
            imputation,
            masking_feed: kind.has_mask_feed(),
            decays,
            notes,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    kind: CellKind,
    n_vars: usize,
    hidden: usize,
    n_outputs: usize,
    task_mode: TaskMode,
    variable_names: Vec<String>,
    task_names: Vec<String>,
    blocks: Vec<ParamBlock>,
    head: HeadParams,
    means: Vec<f64>,
    normalization: NormStats,
    card: ModelCard,
    provenance: serde_json::Value,
}

impl Model {
    /// Freshly initialized model shaped for `dataset`.
    pub fn init(
        kind: CellKind,
        hidden: usize,
        dataset: &Dataset,
        means: Vec<f64>,
        normalization: NormStats,
        batch_norm: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        let d = dataset.n_variables();
        ensure!(d > 0 && hidden > 0, Config, "model needs positive dimensions (D={d}, H={hidden})");
        ensure!(means.len() == d, Argument, "{} means for {d} variables", means.len());
        let cell = CellParams::init(kind, d, hidden, rng);
        let head = HeadParams::init(hidden, dataset.task_mode.arity(), batch_norm, rng);
        Ok(Self {
            cell,
            head,
            task_mode: dataset.task_mode,
            means,
            normalization,
            variable_names: dataset.variable_names.clone(),
            task_names: dataset.task_names.clone(),
        })
    }

    pub fn kind(&self) -> CellKind {
        self.cell.kind
    }

    pub fn hidden(&self) -> usize {
        self.cell.hidden
    }

    pub fn card(&self) -> ModelCard {
        ModelCard::for_kind(self.kind())
    }

    /// Cell values followed by the head's trainable values.
    pub fn trainable(&self) -> Vec<f64> {
        let mut v = self.cell.flatten();
        v.extend(self.head.trainable());
        v
    }

    pub fn set_trainable(&mut self, values: &[f64]) {
        let mut k = 0;
        for block in self.cell.blocks_mut().into_iter().chain(self.head.trainable_mut()) {
            block.copy_from_slice(&values[k..k + block.len()]);
            k += block.len();
        }
        debug_assert_eq!(k, values.len());
    }

    pub fn is_finite(&self) -> bool {
        self.cell.is_finite() && self.head.is_finite()
    }

    /// Class or task probabilities for samples already normalized with
    /// [`Model::normalization`]. Inference mode: predictor means, no dropout,
    /// running batch-norm statistics.
    pub fn predict(&self, samples: &[&Sample]) -> Result<Vec<Vec<f64>>> {
        let hs = ordered_map(samples, |_, s| {
            forward_sequence(&self.cell, s, &self.means, None).map(|o| o.h_last().to_vec())
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&[f64]> = hs.iter().map(|h| h.as_slice()).collect();
        let none = vec![None; refs.len()];
        Ok(head_forward(&self.head, &refs, &none, self.task_mode, Phase::Eval).probs)
    }

    /// Probabilities for every sample of a dataset in raw units (the stored
    /// normalization is applied first).
    pub fn predict_raw(&self, dataset: &Dataset) -> Result<Vec<Vec<f64>>> {
        ensure!(
            dataset.n_variables() == self.cell.n_vars,
            Data,
            "dataset has {} variables, model expects {}",
            dataset.n_variables(),
            self.cell.n_vars
        );
        let normalized = self.normalization.apply(dataset)?;
        let refs: Vec<&Sample> = normalized.samples.iter().collect();
        self.predict(&refs)
    }

    pub fn to_json(&self, provenance: serde_json::Value) -> Result<serde_json::Value> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            kind: self.kind(),
            n_vars: self.cell.n_vars,
            hidden: self.cell.hidden,
            n_outputs: self.head.outputs(),
            task_mode: self.task_mode,
            variable_names: self.variable_names.clone(),
            task_names: self.task_names.clone(),
            blocks: self.cell.to_blocks(),
            head: self.head.clone(),
            means: self.means.clone(),
            normalization: self.normalization.clone(),
            card: self.card(),
            provenance,
        };
        Ok(serde_json::to_value(file)?)
    }

    pub fn save(&self, path: &Path, provenance: serde_json::Value) -> Result<()> {
        write_json(path, &self.to_json(provenance)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Data(format!("unreadable model file: {e}")))?;
        ensure!(
            file.format == MODEL_FORMAT && file.version == MODEL_VERSION,
            Data,
            "unsupported model container {} v{}",
            file.format,
            file.version
        );
        let cell = CellParams::from_blocks(file.kind, file.n_vars, file.hidden, &file.blocks)?;
        ensure!(
            file.head.w.shape() == (file.n_outputs, file.hidden)
                && file.head.b.len() == file.n_outputs
                && file.head.bn_scale.len() == file.n_outputs
                && file.head.bn_shift.len() == file.n_outputs
                && file.head.running_mean.len() == file.n_outputs
                && file.head.running_var.len() == file.n_outputs,
            Data,
            "head shape does not match {} outputs",
            file.n_outputs
        );
        ensure!(file.task_mode.arity() == file.n_outputs, Data, "task mode does not match output count");
        ensure!(
            file.means.len() == file.n_vars
                && file.normalization.mean.len() == file.n_vars
                && file.normalization.std.len() == file.n_vars
                && file.variable_names.len() == file.n_vars,
            Data,
            "per-variable statistics do not match D={}",
            file.n_vars
        );
        Ok(Self {
            cell,
            head: file.head,
            task_mode: file.task_mode,
            means: file.means,
            normalization: file.normalization,
            variable_names: file.variable_names,
            task_names: file.task_names,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticConfig};

    fn small() -> Dataset {
        generate_synthetic(&SyntheticConfig {
            n_samples: 20,
            n_variables: 3,
            n_classes: 2,
            n_steps: 5,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn save_load_round_trip() {
        let ds = small();
        for kind in CellKind::ALL {
            let m = Model::init(kind, 4, &ds, vec![0.1, 0.2, 0.3], NormStats::identity(3), true, &mut Rng::new(1, 0)).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("m.json");
            m.save(&path, serde_json::json!({"seed": 1})).unwrap();
            let back = Model::load(&path).unwrap();
            assert_eq!(back, m);
            let refs: Vec<&Sample> = ds.samples.iter().collect();
            let a = m.predict(&refs).unwrap();
            let b = back.predict(&refs).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rejects_corrupt_files() {
        let ds = small();
        let m = Model::init(CellKind::GruD, 4, &ds, vec![0.0; 3], NormStats::identity(3), true, &mut Rng::new(1, 0)).unwrap();
        let mut v = m.to_json(serde_json::Value::Null).unwrap();
        v["hidden"] = serde_json::json!(5);
        assert!(Model::from_json(&v.to_string()).is_err());
        assert!(Model::from_json("{}").is_err());
    }

    #[test]
    fn trainable_round_trip() {
        let ds = small();
        let mut m = Model::init(CellKind::GruImp, 3, &ds, vec![0.0; 3], NormStats::identity(3), true, &mut Rng::new(2, 0)).unwrap();
        let mut v = m.trainable();
        v.iter_mut().for_each(|x| *x += 1.0);
        m.set_trainable(&v);
        assert_eq!(m.trainable(), v);
    }

    #[test]
    fn card_flags_conventions() {
        let card = ModelCard::for_kind(CellKind::GruDM);
        assert_eq!(card.decays, vec!["mask"]);
        assert!(card.masking_feed);
        assert!(!card.notes.is_empty());
    }
}
