//! Loss, regularization, optimization and the training loop, plus the
//! gradient verification harness and the logistic-regression baseline.

mod adam;
mod config;
mod dropout;
mod gradcheck;
mod head;
mod logistic;
mod loss;
mod model;
mod objective;
mod trainer;

pub use adam::{AdamHyper, AdamState};
pub use config::TrainConfig;
pub use dropout::{apply_scale, recurrent_dropout_masks};
pub use gradcheck::{gradient_check, relative_error, BlockError, GradCheckDims, GradCheckReport, FD_STEP, KINK_MARGIN};
pub use head::{head_backward, head_dropout_mask, head_forward, HeadCache, HeadGrad, HeadParams, Phase, BN_EPS, BN_MOMENTUM};
pub use logistic::{bin_count, featurize, logistic_baseline, LogisticConfig, LogisticModel, LogisticOutcome};
pub use loss::{cross_entropy, loss, output_gradient, PROB_CLAMP};
pub use model::{Model, ModelCard, MODEL_FORMAT, MODEL_VERSION};
pub use objective::{batch_objective, BatchResult, Draws};
pub use trainer::{fit, train, validation_auc, Architecture, EarlyStopping, EpochRecord, StopDecision, TrainOutcome};
