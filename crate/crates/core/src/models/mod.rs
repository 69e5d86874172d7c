//! Student and teacher architectures and their parameter bookkeeping.

mod echo;
mod mixer;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::LabeledWindow;
use crate::reservoir::ReservoirError;
use crate::tensor::{Scalar, Tape, Tensor, TensorError, Var};
use crate::tokenizer::TokenizerError;

pub use echo::{EchoConfig, PatchEchoClassifier};
pub use mixer::{
    mixer_layer_forward, MixerConfig, MixerLayerVars, MixerTeacher, PatchMixerClassifier,
    TeacherConfig,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error(transparent)]
    Reservoir(#[from] ReservoirError),
    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

/// A named parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub tensor: Tensor<f32>,
    pub frozen: bool,
}

/// Ordered parameters of one model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    entries: Vec<Param>,
}

/// Tape handles for every entry of a [`ParamSet`], in the same order.
#[derive(Clone, Debug)]
pub struct Bound(Vec<Var>);

impl std::ops::Index<usize> for Bound {
    type Output = Var;

    fn index(&self, i: usize) -> &Var {
        &self.0[i]
    }
}

impl Bound {
    pub fn vars(&self) -> &[Var] {
        &self.0
    }
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor<f32>, frozen: bool) -> usize {
        self.entries.push(Param {
            name: name.into(),
            tensor,
            frozen,
        });
        self.entries.len() - 1
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Param] {
        &self.entries
    }

    pub fn get(&self, i: usize) -> &Tensor<f32> {
        &self.entries[i].tensor
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Tensor<f32> {
        &mut self.entries[i].tensor
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|p| p.name == name)
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<f32>> {
        self.index_of(name).map(|i| self.get(i))
    }

    /// Record every tensor as a tape leaf; frozen tensors do not require grad.
    pub fn bind<T: Scalar>(&self, tape: &mut Tape<T>) -> Bound {
        Bound(
            self.entries
                .iter()
                .map(|p| tape.leaf(p.tensor.cast(), !p.frozen))
                .collect(),
        )
    }

    pub fn count(&self, frozen: bool) -> usize {
        self.entries
            .iter()
            .filter(|p| p.frozen == frozen)
            .map(|p| p.tensor.len())
            .sum()
    }

    /// Replace tensors by name from `other`, checking shapes.
    pub fn load_from(&mut self, other: &[Param]) -> Result<()> {
        for p in &mut self.entries {
            let src = other
                .iter()
                .find(|o| o.name == p.name)
                .ok_or_else(|| ModelError::Contract(format!("missing parameter '{}'", p.name)))?;
            if src.tensor.shape() != p.tensor.shape() {
                return Err(ModelError::Contract(format!(
                    "parameter '{}' has shape {:?}, expected {:?}",
                    p.name,
                    src.tensor.shape(),
                    p.tensor.shape()
                )));
            }
            p.tensor = src.tensor.clone();
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        let all: Vec<&Tensor<f32>> = self.entries.iter().map(|p| &p.tensor).collect();
        crate::reservoir::tensor_digest(&all)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamCount {
    pub trainable: usize,
    pub frozen: usize,
}

impl ParamCount {
    pub fn total(&self) -> usize {
        self.trainable + self.frozen
    }
}

pub(crate) const SMALL_INIT: f32 = 0.02;

pub(crate) fn uniform<R: Rng>(rng: &mut R, shape: Vec<usize>, bound: f32) -> Tensor<f32> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::new(shape, data).expect("init shape")
}

/// `x · W + b` over the last axis of `x`.
pub fn linear<T: Scalar>(tape: &mut Tape<T>, x: Var, weight: Var, bias: Var) -> Result<Var> {
    let shape = tape.shape(x).to_vec();
    let d_in = *shape.last().unwrap_or(&1);
    let rows = shape.iter().product::<usize>() / d_in.max(1);
    let flat = if shape.len() == 2 {
        x
    } else {
        tape.reshape(x, vec![rows, d_in])?
    };
    let y = tape.matmul(flat, weight)?;
    let y = tape.add(y, bias)?;
    if shape.len() == 2 {
        return Ok(y);
    }
    let mut out = shape;
    *out.last_mut().expect("non-empty") = tape.shape(weight)[1];
    Ok(tape.reshape(y, out)?)
}

/// Classifiers with a class head and a distillation head.
pub trait Student {
    fn params(&self) -> &ParamSet;
    fn params_mut(&mut self) -> &mut ParamSet;
    fn classes(&self) -> usize;

    /// `(Z_cls, Z_dist)`, each `B x K`, for a batch of normalized windows.
    fn forward_pair<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        bound: &Bound,
        batch: &[&LabeledWindow],
    ) -> Result<(Var, Var)>;

    /// Per-window inputs that never depend on trainable parameters, so a
    /// training loop may compute them once (`B x F`). `None` when the model has
    /// nothing worth caching.
    fn frozen_features(&self, _batch: &[&LabeledWindow]) -> Result<Option<Tensor<f32>>> {
        Ok(None)
    }

    /// [`Student::forward_pair`] reusing rows from [`Student::frozen_features`].
    fn forward_with_features<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        bound: &Bound,
        batch: &[&LabeledWindow],
        features: Option<&Tensor<f32>>,
    ) -> Result<(Var, Var)> {
        let _ = features;
        self.forward_pair(tape, bound, batch)
    }

    fn param_count(&self) -> ParamCount;

    /// Digest of tensors that must never change during training.
    fn frozen_digest(&self) -> String;
}

/// Single-head classifiers (the teacher).
pub trait Classifier {
    fn params(&self) -> &ParamSet;
    fn params_mut(&mut self) -> &mut ParamSet;
    fn classes(&self) -> usize;

    fn forward<T: Scalar>(&self, tape: &mut Tape<T>, bound: &Bound, batch: &[&LabeledWindow]) -> Result<Var>;
}

/// Class distribution from the two heads: `softmax((z_cls + z_dist) / 2)`.
pub fn combine_heads(z_cls: &[f64], z_dist: &[f64]) -> Vec<f64> {
    let mean: Vec<f64> = z_cls.iter().zip(z_dist).map(|(a, b)| (a + b) / 2.0).collect();
    crate::tensor::softmax_row(&mean)
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Head-averaged class distributions for every window, evaluated in chunks.
pub fn predict_batch<S: Student>(model: &S, windows: &[LabeledWindow]) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(windows.len());
    for chunk in windows.chunks(64) {
        let refs: Vec<&LabeledWindow> = chunk.iter().collect();
        let mut tape = Tape::<f32>::new();
        let bound = model.params().bind(&mut tape);
        let (zc, zd) = model.forward_pair(&mut tape, &bound, &refs)?;
        let k = model.classes();
        let (zc, zd) = (tape.value(zc).to_f64_vec(), tape.value(zd).to_f64_vec());
        for (a, b) in zc.chunks(k).zip(zd.chunks(k)) {
            out.push(combine_heads(a, b));
        }
    }
    Ok(out)
}

/// Teacher logits for every window, evaluated in chunks.
pub fn logits_batch<C: Classifier>(model: &C, windows: &[LabeledWindow]) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(windows.len());
    for chunk in windows.chunks(64) {
        let refs: Vec<&LabeledWindow> = chunk.iter().collect();
        let mut tape = Tape::<f32>::new();
        let bound = model.params().bind(&mut tape);
        let z = model.forward(&mut tape, &bound, &refs)?;
        let k = model.classes();
        out.extend(tape.value(z).to_f64_vec().chunks(k).map(<[f64]>::to_vec));
    }
    Ok(out)
}
