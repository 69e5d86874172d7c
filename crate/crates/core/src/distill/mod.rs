//! Distillation losses, teacher pretraining, student distillation, and
//! classification metrics.

mod loss;
mod metrics;
mod optim;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::ModelError;
use crate::tensor::TensorError;

pub use loss::{
    ce_label_smooth, ce_label_smooth_tape, combined_loss, combined_loss_tape, kd_js, kd_js_tape, kd_kl,
    kd_kl_tape, Form,
};
pub use metrics::{evaluate, evaluate_classifier, evaluate_predictions, EvalReport};
pub use optim::{lr_schedule, Adam};
pub use train::{distill_student, student_probabilities, train_teacher, write_epoch_log, EpochRecord, TrainOutcome};

#[derive(Debug, Error)]
pub enum DistillError {
    #[error("invalid distillation config: {0}")]
    Config(String),
    #[error("non-finite loss at epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("writing epoch log: {0}")]
    Log(#[from] csv::Error),
}

pub type Result<T, E = DistillError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Kl,
    Js,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistillConfig {
    pub alpha: f64,
    pub temperature: f64,
    pub label_smoothing: f64,
    pub loss_kind: LossKind,
    pub literal_equation_mode: bool,
    pub epochs: usize,
    pub batch: usize,
    pub warmup_epochs: usize,
    pub peak_lr: f64,
    pub seed: u64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            temperature: 3.0,
            label_smoothing: 0.1,
            loss_kind: LossKind::Kl,
            literal_equation_mode: false,
            epochs: 100,
            batch: 64,
            warmup_epochs: 5,
            peak_lr: 1e-3,
            seed: 0,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(DistillError::Config(msg));
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail(format!("alpha must be in [0, 1], got {}", self.alpha));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return fail(format!("temperature must be positive, got {}", self.temperature));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return fail(format!("label_smoothing must be in [0, 1), got {}", self.label_smoothing));
        }
        if self.epochs == 0 || self.batch == 0 {
            return fail("epochs and batch must be positive".into());
        }
        if !(self.peak_lr > 0.0 && self.peak_lr.is_finite()) {
            return fail(format!("peak_lr must be positive, got {}", self.peak_lr));
        }
        Ok(())
    }

    pub fn form(&self) -> Form {
        if self.literal_equation_mode {
            Form::Literal
        } else {
            Form::Standard
        }
    }
}
