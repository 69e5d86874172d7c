use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{DataError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Splits come from different sources (users, files); windows never share samples.
    BySource,
    /// One recording cut in time; windows straddling a cut are dropped.
    ByTime,
}

/// Disjoint train/val/test ranges over a window list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
    pub provenance: Provenance,
}

fn overlaps(a: &Range<usize>, b: &Range<usize>) -> bool {
    !a.is_empty() && !b.is_empty() && a.start < b.end && b.start < a.end
}

impl SplitSpec {
    pub fn new(
        train: Range<usize>,
        val: Range<usize>,
        test: Range<usize>,
        provenance: Provenance,
    ) -> Result<Self> {
        let spec = Self {
            train,
            val,
            test,
            provenance,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Consecutive splits of the given sizes from independent sources.
    pub fn by_source(train: usize, val: usize, test: usize) -> Self {
        Self {
            train: 0..train,
            val: train..train + val,
            test: train + val..train + val + test,
            provenance: Provenance::BySource,
        }
    }

    /// Cut a recording of `total_samples` at the given train/val fractions.
    /// `starts` are raw-sample offsets of windows of `width` samples, in
    /// increasing order. A window belongs to a split only if all its samples
    /// fall inside that split's time span.
    pub fn by_time(
        starts: &[usize],
        width: usize,
        total_samples: usize,
        train_frac: f64,
        val_frac: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&train_frac)
            || !(0.0..=1.0).contains(&val_frac)
            || train_frac + val_frac > 1.0
        {
            return Err(DataError::Contract(format!(
                "invalid split fractions {train_frac}/{val_frac}"
            )));
        }
        if starts.windows(2).any(|p| p[0] > p[1]) {
            return Err(DataError::Contract("window starts must be sorted".into()));
        }
        let cut1 = (total_samples as f64 * train_frac).floor() as usize;
        let cut2 = (total_samples as f64 * (train_frac + val_frac)).floor() as usize;
        let within = |lo: usize, hi: usize| -> Range<usize> {
            let first = starts.iter().position(|&s| s >= lo).unwrap_or(starts.len());
            let mut last = first;
            while last < starts.len() && starts[last] + width <= hi {
                last += 1;
            }
            first..last
        };
        let spec = Self {
            train: within(0, cut1),
            val: within(cut1, cut2),
            test: within(cut2, total_samples),
            provenance: Provenance::ByTime,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [&self.train, &self.val, &self.test];
        for (i, a) in parts.iter().enumerate() {
            for b in &parts[i + 1..] {
                if overlaps(a, b) {
                    return Err(DataError::Contract(format!(
                        "split ranges {a:?} and {b:?} overlap"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn overlapping_ranges_rejected() {
        assert!(SplitSpec::new(0..5, 4..6, 6..8, Provenance::BySource).is_err());
        assert!(SplitSpec::new(0..5, 5..6, 6..8, Provenance::BySource).is_ok());
    }

    #[test]
    fn by_time_never_shares_samples_between_train_and_test() {
        let width = 10;
        let total = 200;
        for stride in [3usize, 5, 10] {
            let starts: Vec<usize> = (0..).map(|i| i * stride).take_while(|s| s + width <= total).collect();
            let spec = SplitSpec::by_time(&starts, width, total, 0.6, 0.2).unwrap();
            let samples = |r: &Range<usize>| -> HashSet<usize> {
                r.clone().flat_map(|i| starts[i]..starts[i] + width).collect()
            };
            let (tr, va, te) = (samples(&spec.train), samples(&spec.val), samples(&spec.test));
            assert!(tr.is_disjoint(&te));
            assert!(tr.is_disjoint(&va));
            assert!(va.is_disjoint(&te));
            assert!(!spec.train.is_empty() && !spec.test.is_empty());
        }
    }
}
