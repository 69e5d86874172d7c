//! Sensor windows: ingestion, windowing, augmentation, splits, and a
//! synthetic activity generator.

mod augment;
mod csv_io;
mod normalize;
mod split;
mod synth;

use std::path::PathBuf;

use thiserror::Error;

use crate::tensor::Tensor;

pub use augment::{jitter, jitter_with, resample, resampled_len};
pub use csv_io::{load_csv, read_record, write_windows_csv, CsvSchema};
pub use normalize::ChannelStats;
pub use split::{Provenance, SplitSpec};
pub use synth::synth_generate;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("parse error at line {line}, column '{column}': {value:?}")]
    Parse {
        line: usize,
        column: String,
        value: String,
    },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;

/// Continuous multi-channel recording with one label per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalRecord {
    /// `C x T`.
    pub samples: Tensor<f32>,
    pub labels: Vec<usize>,
}

impl SignalRecord {
    pub fn new(samples: Tensor<f32>, labels: Vec<usize>) -> Result<Self> {
        if samples.ndim() != 2 || samples.shape()[1] != labels.len() {
            return Err(DataError::Contract(format!(
                "samples {:?} do not match {} labels",
                samples.shape(),
                labels.len()
            )));
        }
        Ok(Self { samples, labels })
    }

    pub fn channels(&self) -> usize {
        self.samples.shape()[0]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Sliding windows of `width` samples every `stride` samples, each with
    /// the median label of the samples it covers and its raw-sample start.
    pub fn windows(&self, width: usize, stride: usize) -> Result<Vec<(LabeledWindow, usize)>> {
        if width == 0 || stride == 0 {
            return Err(DataError::Contract("window and stride must be positive".into()));
        }
        let (c, t) = (self.channels(), self.len());
        let mut out = Vec::new();
        let mut start = 0;
        while start + width <= t {
            let mut data = Vec::with_capacity(c * width);
            for ch in 0..c {
                data.extend_from_slice(&self.samples.row(ch)[start..start + width]);
            }
            let label = median_label(&self.labels[start..start + width]);
            let data = Tensor::new(vec![c, width], data).expect("window shape");
            out.push((LabeledWindow { data, label }, start));
            start += stride;
        }
        Ok(out)
    }
}

/// Fixed-length `C x W` segment with its class id.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledWindow {
    pub data: Tensor<f32>,
    pub label: usize,
}

impl LabeledWindow {
    pub fn channels(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn len(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Lower median of a label sequence, so even-length ties go to the smaller id.
pub fn median_label(labels: &[usize]) -> usize {
    let mut sorted = labels.to_vec();
    sorted.sort_unstable();
    sorted[(sorted.len() - 1) / 2]
}

/// Number of distinct classes implied by the largest label.
pub fn class_count(windows: &[LabeledWindow]) -> usize {
    windows.iter().map(|w| w.label + 1).max().unwrap_or(0)
}
