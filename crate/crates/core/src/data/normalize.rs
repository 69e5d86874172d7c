use serde::{Deserialize, Serialize};

use super::LabeledWindow;

/// Per-channel mean and standard deviation for z-scoring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ChannelStats {
    /// Statistics over every sample of every window (typically the train split).
    pub fn fit(windows: &[LabeledWindow]) -> Self {
        let c = windows.first().map_or(0, LabeledWindow::channels);
        let mut sum = vec![0.0f64; c];
        let mut sq = vec![0.0f64; c];
        let mut n = 0usize;
        for w in windows {
            for ch in 0..c {
                for &v in w.data.row(ch) {
                    sum[ch] += v as f64;
                    sq[ch] += (v as f64) * (v as f64);
                }
            }
            n += w.len();
        }
        let n = n.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / n - m * m).max(0.0).sqrt();
                if sd > 1e-8 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn identity(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }

    pub fn apply(&self, window: &LabeledWindow) -> LabeledWindow {
        let mut out = window.clone();
        let w = window.len();
        for (ch, chunk) in out.data.data_mut().chunks_mut(w).enumerate() {
            let (m, s) = (self.mean[ch], self.std[ch]);
            for v in chunk {
                *v = ((*v as f64 - m) / s) as f32;
            }
        }
        out
    }

    pub fn apply_all(&self, windows: &[LabeledWindow]) -> Vec<LabeledWindow> {
        windows.iter().map(|w| self.apply(w)).collect()
    }
}
