//! Dataset directories: `dataset.csv` (windows back to back) plus
//! `manifest.json` describing columns and splits.

use std::path::Path;

use patchecho::checkpoint::config_digest;
use patchecho::data::{load_csv, write_windows_csv, CsvSchema, SplitSpec};
use patchecho::LabeledWindow;
use serde::{Deserialize, Serialize};

use crate::config::Split;
use crate::CliError;

pub const DATA_FILE: &str = "dataset.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub channels: Vec<String>,
    pub label: String,
    pub window: usize,
    pub classes: usize,
    pub split: SplitSpec,
    /// SHA-256 of `dataset.csv`.
    pub sha256: String,
}

pub struct Dataset {
    pub manifest: Manifest,
    pub windows: Vec<LabeledWindow>,
}

impl Dataset {
    pub fn split(&self, which: Split) -> &[LabeledWindow] {
        let s = &self.manifest.split;
        let r = match which {
            Split::Train => s.train.clone(),
            Split::Val => s.val.clone(),
            Split::Test => s.test.clone(),
        };
        &self.windows[r]
    }
}

/// Write `train`, `val` and `test` windows in that order with a manifest.
pub fn write(
    dir: &Path,
    channels: &[String],
    classes: usize,
    splits: [&[LabeledWindow]; 3],
    provenance: patchecho::data::Provenance,
) -> Result<Manifest, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let all: Vec<LabeledWindow> = splits.iter().flat_map(|s| s.iter().cloned()).collect();
    let window = all.first().map_or(0, LabeledWindow::len);
    let data_path = dir.join(DATA_FILE);
    write_windows_csv(&data_path, channels, &all)?;
    let bytes = std::fs::read(&data_path).map_err(|e| CliError::io(&data_path, e))?;
    let mut split = SplitSpec::by_source(splits[0].len(), splits[1].len(), splits[2].len());
    split.provenance = provenance;
    let manifest = Manifest {
        channels: channels.to_vec(),
        label: "label".into(),
        window,
        classes,
        split,
        sha256: config_digest(&bytes),
    };
    crate::write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn load(dir: &Path) -> Result<Dataset, CliError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| CliError::io(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", manifest_path.display())))?;
    let data_path = dir.join(DATA_FILE);
    let bytes = std::fs::read(&data_path).map_err(|e| CliError::io(&data_path, e))?;
    if config_digest(&bytes) != manifest.sha256 {
        return Err(CliError::Other(format!("{} does not match its manifest digest", data_path.display())));
    }
    let schema = CsvSchema {
        channels: manifest.channels.clone(),
        label: manifest.label.clone(),
        window: manifest.window,
        stride: manifest.window,
    };
    let windows = load_csv(&data_path, &schema)?;
    if windows.len() != manifest.split.total() {
        return Err(CliError::Other(format!(
            "{} holds {} windows, manifest lists {}",
            data_path.display(),
            windows.len(),
            manifest.split.total()
        )));
    }
    Ok(Dataset { manifest, windows })
}
