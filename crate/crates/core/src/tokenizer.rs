//! Splitting windows into time-slice patches and attaching special tokens.

use thiserror::Error;

use crate::data::{self, resampled_len, DataError};
use crate::tensor::Tensor;

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("window length {len} is not divisible by patch size {patch}; resample to a multiple of {patch} first")]
    Divisibility { len: usize, patch: usize },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpecialToken {
    Cls,
    Dist,
}

/// `N x D` patch matrix with `D = patch * channels`.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchSequence {
    pub patches: Tensor<f32>,
    pub patch: usize,
    pub channels: usize,
}

impl PatchSequence {
    pub fn len(&self) -> usize {
        self.patches.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.patch * self.channels
    }

    /// Inverse of [`patchify`]; only meaningful before a token is attached.
    pub fn flatten(&self) -> Tensor<f32> {
        let (n, p, c) = (self.len(), self.patch, self.channels);
        let mut out = vec![0.0f32; c * n * p];
        for (i, row) in self.patches.data().chunks(p * c).enumerate() {
            for s in 0..p {
                for ch in 0..c {
                    out[ch * n * p + i * p + s] = row[s * c + ch];
                }
            }
        }
        Tensor::new(vec![c, n * p], out).expect("flatten shape")
    }

    /// Copy of this sequence with `token` appended as the last row.
    pub fn with_token(&self, token: &[f32]) -> Result<PatchSequence, TokenizerError> {
        if token.len() != self.dim() {
            return Err(TokenizerError::Contract(format!(
                "token has {} values, patches have {}",
                token.len(),
                self.dim()
            )));
        }
        let mut data = self.patches.data().to_vec();
        data.extend_from_slice(token);
        Ok(PatchSequence {
            patches: Tensor::new(vec![self.len() + 1, self.dim()], data).expect("token row"),
            patch: self.patch,
            channels: self.channels,
        })
    }
}

/// Cut a `C x L` window into `L / p` patches. Each patch lists the samples of
/// one time step for all channels before moving to the next time step.
pub fn patchify(window: &Tensor<f32>, patch: usize) -> Result<PatchSequence, TokenizerError> {
    if window.ndim() != 2 || patch == 0 {
        return Err(TokenizerError::Contract(format!(
            "patchify expects a C x L window and positive patch, got {:?} / {patch}",
            window.shape()
        )));
    }
    let (c, l) = (window.shape()[0], window.shape()[1]);
    if l % patch != 0 || l == 0 {
        return Err(TokenizerError::Divisibility { len: l, patch });
    }
    let n = l / patch;
    let mut data = Vec::with_capacity(c * l);
    for i in 0..n {
        for t in i * patch..(i + 1) * patch {
            for ch in 0..c {
                data.push(window.row(ch)[t]);
            }
        }
    }
    Ok(PatchSequence {
        patches: Tensor::new(vec![n, patch * c], data).expect("patch shape"),
        patch,
        channels: c,
    })
}

/// Resample to the nearest multiple of `patch` when needed, then patchify.
pub fn tokenize(window: &Tensor<f32>, patch: usize) -> Result<PatchSequence, TokenizerError> {
    let len = window.shape().get(1).copied().unwrap_or(0);
    let target = resampled_len(len, patch);
    if target == len {
        patchify(window, patch)
    } else {
        patchify(&data::resample(window, target)?, patch)
    }
}
