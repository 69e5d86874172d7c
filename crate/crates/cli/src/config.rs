use std::path::{Path, PathBuf};

use patchecho::energy::{EesWeights, Preset};
use patchecho::{DistillConfig, EchoConfig, MixerConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

/// Read an optional JSON config file, apply `key.path = value` overrides
/// (later ones win), and deserialize with unknown keys rejected.
pub fn resolve<T: DeserializeOwned>(file: Option<&Path>, overrides: &[(String, Value)]) -> Result<T, CliError> {
    resolve_with(Value::Object(Map::new()), file, overrides)
}

/// As [`resolve`], with the file merged over `base`.
pub fn resolve_with<T: DeserializeOwned>(
    base: Value,
    file: Option<&Path>,
    overrides: &[(String, Value)],
) -> Result<T, CliError> {
    let loaded = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => Value::Object(Map::new()),
    };
    let mut root = base;
    merge(&mut root, loaded);
    for (key, value) in overrides {
        set_path(&mut root, key, value.clone())?;
    }
    serde_path_to_error::deserialize(root).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("{path}: {}", e.into_inner()))
    })
}

fn merge(into: &mut Value, from: Value) {
    match (into, from) {
        (Value::Object(a), Value::Object(b)) => {
            for (k, v) in b {
                match a.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        a.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(CliError::Config(format!("empty segment in key '{key}'")));
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("'{}' is not an object", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

/// `key=value`, with `value` parsed as JSON when possible and kept as a
/// string otherwise.
pub fn parse_override(s: &str) -> Result<(String, Value), CliError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{s}' is not KEY=VALUE")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

fn d_seed() -> u64 {
    0
}
fn d_classes() -> usize {
    4
}
fn d_train_pc() -> usize {
    500
}
fn d_eval_pc() -> usize {
    100
}
fn d_channels() -> usize {
    3
}
fn d_window() -> usize {
    496
}
fn d_label() -> String {
    "label".into()
}
fn d_ingest_window() -> usize {
    500
}
fn d_train_frac() -> f64 {
    0.7
}
fn d_val_frac() -> f64 {
    0.15
}
fn d_patch() -> usize {
    16
}
fn d_radius() -> f64 {
    0.9
}
fn d_one() -> f64 {
    1.0
}
fn d_reservoir() -> usize {
    1000
}
fn d_student_dim() -> usize {
    512
}
fn d_student_layers() -> usize {
    8
}
fn d_teacher_dim() -> usize {
    768
}
fn d_teacher_layers() -> usize {
    12
}
fn d_batch() -> usize {
    64
}
fn d_mac() -> u64 {
    2
}
fn d_split() -> Split {
    Split::Test
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthRun {
    pub out_dir: PathBuf,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_classes")]
    pub classes: usize,
    #[serde(default = "d_train_pc")]
    pub train_per_class: usize,
    #[serde(default = "d_eval_pc")]
    pub val_per_class: usize,
    #[serde(default = "d_eval_pc")]
    pub test_per_class: usize,
    #[serde(default = "d_channels")]
    pub channels: usize,
    #[serde(default = "d_window")]
    pub window: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestRun {
    pub input: PathBuf,
    pub out_dir: PathBuf,
    pub channels: Vec<String>,
    #[serde(default = "d_label")]
    pub label: String,
    #[serde(default = "d_ingest_window")]
    pub window: usize,
    /// Defaults to `window` (non-overlapping).
    #[serde(default)]
    pub stride: Option<usize>,
    #[serde(default = "d_train_frac")]
    pub train_fraction: f64,
    #[serde(default = "d_val_frac")]
    pub val_fraction: f64,
    /// Defaults to one more than the largest label seen.
    #[serde(default)]
    pub classes: Option<usize>,
}

/// Architecture hyperparameters; channel count, window and classes come
/// from the dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Echo {
        #[serde(default = "d_patch")]
        patch: usize,
        #[serde(default = "d_reservoir")]
        reservoir_size: usize,
        #[serde(default = "d_radius")]
        spectral_radius: f64,
        #[serde(default)]
        sparsity: f64,
        #[serde(default = "d_one")]
        input_scaling: f64,
    },
    Mixer {
        #[serde(default = "d_patch")]
        patch: usize,
        #[serde(default = "d_student_dim")]
        dim: usize,
        #[serde(default = "d_student_layers")]
        layers: usize,
        #[serde(default)]
        token_hidden: Option<usize>,
        #[serde(default)]
        channel_hidden: Option<usize>,
    },
    Teacher {
        #[serde(default = "d_patch")]
        patch: usize,
        #[serde(default = "d_teacher_dim")]
        dim: usize,
        #[serde(default = "d_teacher_layers")]
        layers: usize,
        #[serde(default)]
        token_hidden: Option<usize>,
        #[serde(default)]
        channel_hidden: Option<usize>,
    },
}

impl ModelSpec {
    pub fn default_echo() -> Self {
        Self::Echo {
            patch: d_patch(),
            reservoir_size: d_reservoir(),
            spectral_radius: d_radius(),
            sparsity: 0.0,
            input_scaling: 1.0,
        }
    }

    pub fn default_teacher() -> Self {
        Self::Teacher {
            patch: d_patch(),
            dim: d_teacher_dim(),
            layers: d_teacher_layers(),
            token_hidden: None,
            channel_hidden: None,
        }
    }

    pub fn echo_config(&self, channels: usize, window: usize, classes: usize, seed: u64) -> Option<EchoConfig> {
        match *self {
            Self::Echo { patch, reservoir_size, spectral_radius, sparsity, input_scaling } => Some(EchoConfig {
                patch,
                channels,
                window,
                classes,
                reservoir_size,
                spectral_radius,
                sparsity,
                input_scaling,
                seed,
            }),
            _ => None,
        }
    }

    /// Mixer configuration for either mixer variant.
    pub fn mixer_config(&self, channels: usize, window: usize, classes: usize, seed: u64) -> Option<MixerConfig> {
        match *self {
            Self::Mixer { patch, dim, layers, token_hidden, channel_hidden }
            | Self::Teacher { patch, dim, layers, token_hidden, channel_hidden } => Some(MixerConfig {
                patch,
                channels,
                window,
                dim,
                layers,
                classes,
                token_hidden,
                channel_hidden,
                seed,
            }),
            Self::Echo { .. } => None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeacherRun {
    pub data: PathBuf,
    pub out_dir: PathBuf,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "ModelSpec::default_teacher")]
    pub model: ModelSpec,
    #[serde(default)]
    pub train: DistillConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillRun {
    pub data: PathBuf,
    pub teacher: PathBuf,
    pub out_dir: PathBuf,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "ModelSpec::default_echo")]
    pub student: ModelSpec,
    #[serde(default)]
    pub train: DistillConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRun {
    pub data: PathBuf,
    pub checkpoint: PathBuf,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "d_split")]
    pub split: Split,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileRun {
    /// Profile a saved model; footprint is its file size.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    /// Profile an architecture without weights.
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "d_batch")]
    pub batch: usize,
    #[serde(default = "d_channels")]
    pub channels: usize,
    #[serde(default = "d_window")]
    pub length: usize,
    #[serde(default = "d_classes_profile")]
    pub classes: usize,
    #[serde(default = "d_mac")]
    pub mac_cost: u64,
    #[serde(default)]
    pub accuracy: Option<f64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn d_classes_profile() -> usize {
    8
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EesRun {
    pub metrics: PathBuf,
    #[serde(default = "all_presets")]
    pub presets: Vec<Preset>,
    /// Explicit weights replace the presets.
    #[serde(default)]
    pub weights: Option<EesWeights>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn all_presets() -> Vec<Preset> {
    Preset::ALL.to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn overrides_create_nested_keys_and_win() {
        let mut root = json!({"train": {"alpha": 0.1}});
        set_path(&mut root, "train.alpha", json!(0.7)).unwrap();
        set_path(&mut root, "student.kind", json!("echo")).unwrap();
        assert_eq!(root, json!({"train": {"alpha": 0.7}, "student": {"kind": "echo"}}));
        assert!(set_path(&mut root, "train.alpha.x", json!(1)).is_err());
    }

    #[test]
    fn file_merges_over_base() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"data": "d", "out_dir": "o", "model": {"dim": 32}}"#).unwrap();
        let base = serde_json::json!({"model": {"kind": "teacher"}});
        let cfg: TeacherRun = resolve_with(base, Some(&path), &[("model.layers".into(), json!(2))]).unwrap();
        assert_eq!(cfg.model.mixer_config(3, 496, 4, 0).map(|c| (c.dim, c.layers)), Some((32, 2)));
    }

    #[test]
    fn override_values_parse_as_json_or_string() {
        assert_eq!(parse_override("a.b=3").unwrap(), ("a.b".into(), json!(3)));
        assert_eq!(parse_override("p=runs/x").unwrap(), ("p".into(), json!("runs/x")));
        assert!(parse_override("novalue").is_err());
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let o = vec![
            ("data".into(), json!("d")),
            ("teacher".into(), json!("t")),
            ("out_dir".into(), json!("o")),
            ("train".into(), json!({"alpah": 0.5})),
        ];
        let err = resolve::<DistillRun>(None, &o).unwrap_err();
        assert!(matches!(&err, CliError::Config(m) if m.starts_with("train")), "{err}");
    }

    #[test]
    fn model_spec_defaults_and_kinds() {
        let s: ModelSpec = serde_json::from_value(json!({"kind": "echo", "reservoir_size": 200})).unwrap();
        let cfg = s.echo_config(3, 496, 4, 1).unwrap();
        assert_eq!((cfg.patch, cfg.reservoir_size, cfg.spectral_radius), (16, 200, 0.9));
        assert!(serde_json::from_value::<ModelSpec>(json!({"kind": "lstm"})).is_err());
        assert!(serde_json::from_value::<ModelSpec>(json!({"kind": "echo", "bogus": 1})).is_err());
    }
}
