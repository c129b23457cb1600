//! Recurrent cell variants with exact backpropagation through time.
//!
//! Every GRU-family kind shares one step routine; the [`CellKind`] decides
//! how the step input is built (imputation rule, concatenated masking and
//! intervals) and which decay blocks are active. LSTM-Mean is the only
//! non-GRU kind.

mod ops;
mod params;
mod sequence;
mod size;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use ops::{
    build_simple_input, decay_hidden, decay_input, decay_mask, decay_rate_diag, decay_rate_full, impute_forward,
    impute_mean, rectifier_active,
};
pub use params::{CellParams, DiagDecay, Gate, HiddenDecay, Imputer, ParamBlock};
pub use sequence::{backward_sequence, forward_sequence, gru_step, SequenceOutput, StepCache};
pub use size::{count_params, size_for_budget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CellKind {
    #[serde(rename = "gru-mean")]
    GruMean,
    #[serde(rename = "gru-forward")]
    GruForward,
    #[serde(rename = "gru-simple")]
    GruSimple,
    #[serde(rename = "gru-simple-mask-only")]
    GruSimpleMaskOnly,
    #[serde(rename = "gru-simple-interval-only")]
    GruSimpleIntervalOnly,
    #[serde(rename = "gru-d")]
    GruD,
    #[serde(rename = "gru-di")]
    GruDI,
    #[serde(rename = "gru-ds")]
    GruDS,
    #[serde(rename = "gru-dm")]
    GruDM,
    #[serde(rename = "gru-imp")]
    GruImp,
    #[serde(rename = "lstm-mean")]
    LstmMean,
}

/// How a missing entry is filled before it enters the gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Imputation {
    Mean,
    Forward,
    /// Blend of last observation and mean weighted by the input decay.
    InputDecay,
    /// Sample (train) or mean (test) of the learned Gaussian predictor.
    Model,
}

impl CellKind {
    pub const ALL: [CellKind; 11] = [
        CellKind::GruMean,
        CellKind::GruForward,
        CellKind::GruSimple,
        CellKind::GruSimpleMaskOnly,
        CellKind::GruSimpleIntervalOnly,
        CellKind::GruD,
        CellKind::GruDI,
        CellKind::GruDS,
        CellKind::GruDM,
        CellKind::GruImp,
        CellKind::LstmMean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CellKind::GruMean => "gru-mean",
            CellKind::GruForward => "gru-forward",
            CellKind::GruSimple => "gru-simple",
            CellKind::GruSimpleMaskOnly => "gru-simple-mask-only",
            CellKind::GruSimpleIntervalOnly => "gru-simple-interval-only",
            CellKind::GruD => "gru-d",
            CellKind::GruDI => "gru-di",
            CellKind::GruDS => "gru-ds",
            CellKind::GruDM => "gru-dm",
            CellKind::GruImp => "gru-imp",
            CellKind::LstmMean => "lstm-mean",
        }
    }

    pub fn is_lstm(self) -> bool {
        self == CellKind::LstmMean
    }

    pub fn n_gates(self) -> usize {
        if self.is_lstm() {
            4
        } else {
            3
        }
    }

    /// Width of the vector fed to the gate matrices `W`.
    pub fn input_width(self, d: usize) -> usize {
        match self {
            CellKind::GruSimple => 3 * d,
            CellKind::GruSimpleMaskOnly | CellKind::GruSimpleIntervalOnly => 2 * d,
            _ => d,
        }
    }

    pub fn imputation(self) -> Imputation {
        match self {
            CellKind::GruMean
            | CellKind::GruSimple
            | CellKind::GruSimpleMaskOnly
            | CellKind::GruSimpleIntervalOnly
            | CellKind::LstmMean => Imputation::Mean,
            CellKind::GruForward | CellKind::GruDS | CellKind::GruDM => Imputation::Forward,
            CellKind::GruD | CellKind::GruDI => Imputation::InputDecay,
            CellKind::GruImp => Imputation::Model,
        }
    }

    /// Whether masking enters the gates through `V` matrices.
    pub fn has_mask_feed(self) -> bool {
        matches!(self, CellKind::GruD | CellKind::GruDI | CellKind::GruDS | CellKind::GruDM)
    }

    pub fn has_input_decay(self) -> bool {
        matches!(self, CellKind::GruD | CellKind::GruDI)
    }

    pub fn has_hidden_decay(self) -> bool {
        matches!(self, CellKind::GruD | CellKind::GruDS)
    }

    pub fn has_mask_decay(self) -> bool {
        self == CellKind::GruDM
    }

    pub fn has_imputer(self) -> bool {
        self == CellKind::GruImp
    }

    pub fn has_any_decay(self) -> bool {
        self.has_input_decay() || self.has_hidden_decay() || self.has_mask_decay() || self.has_imputer()
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Ok(match key.as_str() {
            "grumean" | "mean" => CellKind::GruMean,
            "gruforward" | "forward" => CellKind::GruForward,
            "grusimple" | "simple" => CellKind::GruSimple,
            "grusimplemaskonly" | "grusimplemask" => CellKind::GruSimpleMaskOnly,
            "grusimpleintervalonly" | "grusimpleinterval" => CellKind::GruSimpleIntervalOnly,
            "grud" => CellKind::GruD,
            "grudi" => CellKind::GruDI,
            "gruds" => CellKind::GruDS,
            "grudm" => CellKind::GruDM,
            "gruimp" => CellKind::GruImp,
            "lstmmean" | "lstm" => CellKind::LstmMean,
            _ => return Err(Error::Argument(format!("unknown cell kind '{s}'"))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in CellKind::ALL {
            assert_eq!(k.name().parse::<CellKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert_eq!("GRU-D".parse::<CellKind>().unwrap(), CellKind::GruD);
        assert_eq!("grud".parse::<CellKind>().unwrap(), CellKind::GruD);
        assert!("gru-x".parse::<CellKind>().is_err());
    }
}
