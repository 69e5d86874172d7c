//! Analytic cost model (FLOPS, heap, footprint) and the energy-efficiency
//! score with its accuracy ratio.

mod cost;
mod ees;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cost::{
    count_flops, describe_echo, describe_mixer_student, describe_teacher, estimate_footprint, estimate_heap,
    footprint_mb, profile, Layer, ModelDesc, HEADER_BYTES, LAYERNORM_COST, SOFTMAX_COST,
};
pub use ees::{compute_aer, compute_ees, normalize_column, report, EesReport, EesRow, EesWeights, Preset, AER_EPS};

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("invalid model description: {0}")]
    Description(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("unknown preset '{0}' (expected balanced, memory_saving, power_saving or storage_optimized)")]
    UnknownPreset(String),
}

pub type Result<T, E = EnergyError> = std::result::Result<T, E>;

/// Cost and quality figures of one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMetrics {
    pub name: String,
    /// Operations per forward pass at the profiled batch and shape.
    pub flops: f64,
    /// Mebibytes.
    pub heap_mb: f64,
    /// Megabytes (10^6 bytes).
    pub footprint_mb: f64,
    /// Fraction in `[0, 1]`.
    pub accuracy: f64,
}

impl ModelMetrics {
    pub fn validate(&self) -> Result<()> {
        let cols = [("flops", self.flops), ("heap_mb", self.heap_mb), ("footprint_mb", self.footprint_mb)];
        for (name, v) in cols {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(EnergyError::Contract(format!("{}: {name} must be non-negative, got {v}", self.name)));
            }
        }
        if !(0.0..=1.0).contains(&self.accuracy) {
            return Err(EnergyError::Contract(format!(
                "{}: accuracy must be a fraction in [0, 1], got {}",
                self.name, self.accuracy
            )));
        }
        Ok(())
    }
}
