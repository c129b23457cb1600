use serde::{Deserialize, Serialize};

use super::CellKind;
use crate::error::{ensure, Result};
use crate::numeric::{Matrix, Rng};

/// One gate: `W` (H x Din), `U` (H x H), optional masking weights `V`
/// (H x D), bias `b` (H).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub w: Matrix,
    pub u: Matrix,
    pub v: Option<Matrix>,
    pub b: Vec<f64>,
}

/// Per-variable decay `exp(−max(0, w ⊙ δ + b))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagDecay {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

/// Hidden-state decay `exp(−max(0, W δ + b))` with `W` of shape H x D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenDecay {
    pub w: Matrix,
    pub b: Vec<f64>,
}

/// GRU-IMP predictor `μ = γ ⊙ (W_x h + b_x)` with its own diagonal decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imputer {
    pub w: Matrix,
    pub b: Vec<f64>,
    pub decay: DiagDecay,
}

/// Weights of one recurrent cell.
///
/// Gate order is `[update z, reset r, candidate]` for GRU kinds and
/// `[input, forget, output, candidate]` for LSTM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub kind: CellKind,
    pub n_vars: usize,
    pub hidden: usize,
    pub gates: Vec<Gate>,
    pub input_decay: Option<DiagDecay>,
    pub hidden_decay: Option<HiddenDecay>,
    pub mask_decay: Option<DiagDecay>,
    pub imputer: Option<Imputer>,
}

/// Named, flattened view of one parameter block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

const GRU_GATES: [&str; 3] = ["z", "r", "h"];
const LSTM_GATES: [&str; 4] = ["i", "f", "o", "g"];

impl CellParams {
    /// All blocks present for `kind`, filled with zeros.
    pub fn zeros(kind: CellKind, n_vars: usize, hidden: usize) -> Self {
        let din = kind.input_width(n_vars);
        let gates = (0..kind.n_gates())
            .map(|_| Gate {
                w: Matrix::zeros(hidden, din),
                u: Matrix::zeros(hidden, hidden),
                v: kind.has_mask_feed().then(|| Matrix::zeros(hidden, n_vars)),
                b: vec![0.0; hidden],
            })
            .collect();
        let diag = || DiagDecay {
            w: vec![0.0; n_vars],
            b: vec![0.0; n_vars],
        };
        Self {
            kind,
            n_vars,
            hidden,
            gates,
            input_decay: kind.has_input_decay().then(diag),
            hidden_decay: kind.has_hidden_decay().then(|| HiddenDecay {
                w: Matrix::zeros(hidden, n_vars),
                b: vec![0.0; hidden],
            }),
            mask_decay: kind.has_mask_decay().then(diag),
            imputer: kind.has_imputer().then(|| Imputer {
                w: Matrix::zeros(n_vars, hidden),
                b: vec![0.0; n_vars],
                decay: diag(),
            }),
        }
    }

    /// Gate and predictor weights uniform in `±1/√fan_in`; decay weights and
    /// all biases zero, so every decay starts at `γ = 1`.
    pub fn init(kind: CellKind, n_vars: usize, hidden: usize, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(kind, n_vars, hidden);
        let fill = |m: &mut Matrix, rng: &mut Rng| {
            let bound = 1.0 / (m.cols().max(1) as f64).sqrt();
            m.data_mut().iter_mut().for_each(|x| *x = rng.uniform_range(-bound, bound));
        };
        for g in &mut p.gates {
            fill(&mut g.w, rng);
            fill(&mut g.u, rng);
            if let Some(v) = g.v.as_mut() {
                fill(v, rng);
            }
        }
        if let Some(imp) = p.imputer.as_mut() {
            fill(&mut imp.w, rng);
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.kind, self.n_vars, self.hidden)
    }

    fn gate_names(&self) -> &'static [&'static str] {
        if self.kind.is_lstm() {
            &LSTM_GATES
        } else {
            &GRU_GATES
        }
    }

    /// Blocks in their fixed serialization order: `(name, rows, cols, values)`.
    pub fn blocks(&self) -> Vec<(String, usize, usize, &[f64])> {
        let mut out: Vec<(String, usize, usize, &[f64])> = Vec::new();
        for (g, name) in self.gates.iter().zip(self.gate_names()) {
            out.push((format!("W_{name}"), g.w.rows(), g.w.cols(), g.w.data()));
            out.push((format!("U_{name}"), g.u.rows(), g.u.cols(), g.u.data()));
            if let Some(v) = &g.v {
                out.push((format!("V_{name}"), v.rows(), v.cols(), v.data()));
            }
            out.push((format!("b_{name}"), g.b.len(), 1, &g.b));
        }
        if let Some(d) = &self.input_decay {
            out.push(("w_gamma_x".into(), d.w.len(), 1, &d.w));
            out.push(("b_gamma_x".into(), d.b.len(), 1, &d.b));
        }
        if let Some(d) = &self.hidden_decay {
            out.push(("W_gamma_h".into(), d.w.rows(), d.w.cols(), d.w.data()));
            out.push(("b_gamma_h".into(), d.b.len(), 1, &d.b));
        }
        if let Some(d) = &self.mask_decay {
            out.push(("w_gamma_m".into(), d.w.len(), 1, &d.w));
            out.push(("b_gamma_m".into(), d.b.len(), 1, &d.b));
        }
        if let Some(imp) = &self.imputer {
            out.push(("W_x".into(), imp.w.rows(), imp.w.cols(), imp.w.data()));
            out.push(("b_x".into(), imp.b.len(), 1, &imp.b));
            out.push(("w_gamma_imp".into(), imp.decay.w.len(), 1, &imp.decay.w));
            out.push(("b_gamma_imp".into(), imp.decay.b.len(), 1, &imp.decay.b));
        }
        out
    }

    /// Mutable views of the blocks, same order as [`CellParams::blocks`].
    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for g in &mut self.gates {
            out.push(g.w.data_mut());
            out.push(g.u.data_mut());
            if let Some(v) = g.v.as_mut() {
                out.push(v.data_mut());
            }
            out.push(&mut g.b);
        }
        if let Some(d) = self.input_decay.as_mut() {
            out.push(&mut d.w);
            out.push(&mut d.b);
        }
        if let Some(d) = self.hidden_decay.as_mut() {
            out.push(d.w.data_mut());
            out.push(&mut d.b);
        }
        if let Some(d) = self.mask_decay.as_mut() {
            out.push(&mut d.w);
            out.push(&mut d.b);
        }
        if let Some(imp) = self.imputer.as_mut() {
            out.push(imp.w.data_mut());
            out.push(&mut imp.b);
            out.push(&mut imp.decay.w);
            out.push(&mut imp.decay.b);
        }
        out
    }

    /// Number of scalar parameters in the cell.
    pub fn count(&self) -> usize {
        self.blocks().iter().map(|b| b.3.len()).sum()
    }

    pub fn to_blocks(&self) -> Vec<ParamBlock> {
        self.blocks()
            .into_iter()
            .map(|(name, rows, cols, data)| ParamBlock {
                name,
                rows,
                cols,
                data: data.to_vec(),
            })
            .collect()
    }

    /// Rebuilds parameters from blocks in serialization order, checking
    /// names and sizes.
    pub fn from_blocks(kind: CellKind, n_vars: usize, hidden: usize, blocks: &[ParamBlock]) -> Result<Self> {
        let mut p = Self::zeros(kind, n_vars, hidden);
        let expected: Vec<(String, usize, usize)> = p
            .blocks()
            .into_iter()
            .map(|(n, r, c, _)| (n, r, c))
            .collect();
        ensure!(
            expected.len() == blocks.len(),
            Data,
            "{kind} needs {} parameter blocks, found {}",
            expected.len(),
            blocks.len()
        );
        for ((name, rows, cols), block) in expected.iter().zip(blocks) {
            ensure!(
                *name == block.name && *rows == block.rows && *cols == block.cols && block.data.len() == rows * cols,
                Data,
                "parameter block {} ({}x{}) does not match expected {name} ({rows}x{cols})",
                block.name,
                block.rows,
                block.cols
            );
        }
        for (dst, block) in p.blocks_mut().into_iter().zip(blocks) {
            dst.copy_from_slice(&block.data);
        }
        Ok(p)
    }

    /// Flattened copy of every value, in block order.
    pub fn flatten(&self) -> Vec<f64> {
        self.blocks().into_iter().flat_map(|b| b.3.iter().copied()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.3.iter().all(|x| x.is_finite()))
    }

    /// `self += other`, block by block.
    pub fn add_assign(&mut self, other: &CellParams) {
        let src = other.flatten();
        let mut k = 0;
        for block in self.blocks_mut() {
            for x in block.iter_mut() {
                *x += src[k];
                k += 1;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for block in self.blocks_mut() {
            block.iter_mut().for_each(|x| *x *= factor);
        }
    }
}
