//! Versioned binary container for model parameters.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "PECK" | u32 version | str kind | str config_json | str metadata_json | u32 count
//! count x ( str name | u8 frozen | u32 ndim | ndim x u32 dim | [str sha256 if frozen] | f32 values )
//! ```
//!
//! where `str` is a u32 byte length followed by UTF-8. The JSON sections are
//! kept verbatim so that load followed by save reproduces the input bytes.

use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::data::ChannelStats;
use crate::models::{EchoConfig, MixerConfig, MixerTeacher, ModelError, Param, PatchEchoClassifier, PatchMixerClassifier, Student, Classifier};
use crate::reservoir::{tensor_digest, EsnParams};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"PECK";
pub const VERSION: u32 = 1;

const ESN_INPUT: &str = "esn.w_input";
const ESN_RESERVOIR: &str = "esn.w_reservoir";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error("frozen tensor '{name}' fails its digest check")]
    Digest { name: String },
    #[error("checkpoint holds a {found} model, expected {expected}")]
    Kind { expected: &'static str, found: String },
    #[error("checkpoint JSON section: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T, E = CheckpointError> = std::result::Result<T, E>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    PatchEcho,
    PatchMixer,
    MixerTeacher,
}

impl ModelKind {
    pub fn tag(self) -> &'static str {
        match self {
            Self::PatchEcho => "patch_echo",
            Self::PatchMixer => "patch_mixer",
            Self::MixerTeacher => "mixer_teacher",
        }
    }

    fn parse(tag: &str) -> Option<Self> {
        [Self::PatchEcho, Self::PatchMixer, Self::MixerTeacher]
            .into_iter()
            .find(|k| k.tag() == tag)
    }
}

/// Training provenance stored next to the tensors.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub epoch: Option<usize>,
    pub val_accuracy: Option<f64>,
    /// SHA-256 of the resolved run configuration.
    pub config_digest: String,
    /// Input standardization fitted on the training split.
    pub normalization: Option<ChannelStats>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    config_json: String,
    metadata_json: String,
    pub tensors: Vec<Param>,
}

pub fn config_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Checkpoint {
    fn build<C: Serialize>(kind: ModelKind, config: &C, meta: &Metadata, tensors: Vec<Param>) -> Result<Self> {
        Ok(Self {
            kind,
            config_json: serde_json::to_string(config)?,
            metadata_json: serde_json::to_string(meta)?,
            tensors,
        })
    }

    pub fn from_echo(model: &PatchEchoClassifier, meta: &Metadata) -> Result<Self> {
        let mut tensors = model.params().entries().to_vec();
        for (name, t) in [(ESN_INPUT, model.esn().w_input()), (ESN_RESERVOIR, model.esn().w_reservoir())] {
            tensors.push(Param {
                name: name.into(),
                tensor: t.clone(),
                frozen: true,
            });
        }
        Self::build(ModelKind::PatchEcho, model.config(), meta, tensors)
    }

    pub fn from_mixer(model: &PatchMixerClassifier, meta: &Metadata) -> Result<Self> {
        Self::build(ModelKind::PatchMixer, model.config(), meta, model.params().entries().to_vec())
    }

    pub fn from_teacher(model: &MixerTeacher, meta: &Metadata) -> Result<Self> {
        Self::build(ModelKind::MixerTeacher, model.config(), meta, model.params().entries().to_vec())
    }

    pub fn metadata(&self) -> Result<Metadata> {
        Ok(serde_json::from_str(&self.metadata_json)?)
    }

    pub fn config<C: DeserializeOwned>(&self) -> Result<C> {
        Ok(serde_json::from_str(&self.config_json)?)
    }

    pub fn config_json(&self) -> &str {
        &self.config_json
    }

    pub fn tensors(&self) -> &[Param] {
        &self.tensors
    }

    fn expect(&self, kind: ModelKind) -> Result<()> {
        if self.kind != kind {
            return Err(CheckpointError::Kind {
                expected: kind.tag(),
                found: self.kind.tag().into(),
            });
        }
        Ok(())
    }

    fn tensor(&self, name: &str) -> Result<&Tensor<f32>> {
        self.tensors
            .iter()
            .find(|p| p.name == name)
            .map(|p| &p.tensor)
            .ok_or_else(|| CheckpointError::Format(format!("missing tensor '{name}'")))
    }

    pub fn to_echo(&self) -> Result<PatchEchoClassifier> {
        self.expect(ModelKind::PatchEcho)?;
        let cfg: EchoConfig = self.config()?;
        let esn = EsnParams::from_weights(self.tensor(ESN_INPUT)?.clone(), self.tensor(ESN_RESERVOIR)?.clone())
            .map_err(ModelError::from)?;
        Ok(PatchEchoClassifier::from_parts(cfg, esn, &self.tensors)?)
    }

    pub fn to_mixer(&self) -> Result<PatchMixerClassifier> {
        self.expect(ModelKind::PatchMixer)?;
        let mut m = PatchMixerClassifier::new(self.config()?)?;
        m.params_mut().load_from(&self.tensors)?;
        Ok(m)
    }

    pub fn to_teacher(&self) -> Result<MixerTeacher> {
        self.expect(ModelKind::MixerTeacher)?;
        let cfg: MixerConfig = self.config()?;
        let mut m = MixerTeacher::new(cfg)?;
        m.params_mut().load_from(&self.tensors)?;
        Ok(m)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let values: usize = self.tensors.iter().map(|p| p.tensor.len()).sum();
        let mut out = Vec::with_capacity(64 + values * 4);
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_str(&mut out, self.kind.tag());
        put_str(&mut out, &self.config_json);
        put_str(&mut out, &self.metadata_json);
        put_u32(&mut out, self.tensors.len() as u32);
        for p in &self.tensors {
            put_str(&mut out, &p.name);
            out.push(u8::from(p.frozen));
            put_u32(&mut out, p.tensor.ndim() as u32);
            for &d in p.tensor.shape() {
                put_u32(&mut out, d as u32);
            }
            if p.frozen {
                put_str(&mut out, &tensor_digest(&[&p.tensor]));
            }
            for v in p.tensor.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(CheckpointError::Format("bad magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CheckpointError::Format(format!("unsupported version {version}")));
        }
        let tag = r.str()?;
        let kind = ModelKind::parse(&tag).ok_or_else(|| CheckpointError::Format(format!("unknown model kind '{tag}'")))?;
        let config_json = r.str()?;
        let metadata_json = r.str()?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let name = r.str()?;
            let frozen = match r.take(1)?[0] {
                0 => false,
                1 => true,
                f => return Err(CheckpointError::Format(format!("tensor '{name}': bad frozen flag {f}"))),
            };
            let ndim = r.u32()? as usize;
            let shape = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let digest = if frozen { Some(r.str()?) } else { None };
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(4).ok_or_else(|| CheckpointError::Format("tensor too large".into()))?)?;
            let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            let tensor = Tensor::new(shape, data).map_err(|e| CheckpointError::Format(e.to_string()))?;
            if digest.is_some_and(|d| d != tensor_digest(&[&tensor])) {
                return Err(CheckpointError::Digest { name });
            }
            tensors.push(Param { name, tensor, frozen });
        }
        if r.pos != bytes.len() {
            return Err(CheckpointError::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Self {
            kind,
            config_json,
            metadata_json,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| CheckpointError::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| CheckpointError::Format(e.to_string()))
    }
}
