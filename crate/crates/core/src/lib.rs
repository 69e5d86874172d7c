//! Patch-tokenized echo state network classifier for multi-channel sensor
//! windows, its MLP-Mixer teacher, soft distillation, and energy-efficiency
//! scoring.

pub mod checkpoint;
pub mod data;
pub mod distill;
pub mod energy;
pub mod models;
pub mod reservoir;
pub mod tensor;
pub mod tokenizer;

pub use checkpoint::{Checkpoint, Metadata, ModelKind};
pub use data::{ChannelStats, LabeledWindow};
pub use distill::{DistillConfig, EvalReport, LossKind};
pub use energy::{EesReport, EesWeights, ModelDesc, ModelMetrics, Preset};
pub use models::{
    Classifier, EchoConfig, MixerConfig, MixerTeacher, ParamCount, PatchEchoClassifier, PatchMixerClassifier, Student,
};
pub use reservoir::EsnParams;
pub use tensor::{Scalar, Tape, Tensor, TensorError, Var};
