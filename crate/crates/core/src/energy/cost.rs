//! Layer-level cost conventions.
//!
//! Per sample, activations are 2-D (`rows x cols`); the batch multiplies
//! every count. A matrix product `m x k` by `k x n` costs `mac * m * k * n`,
//! a bias add `m * n`, elementwise maps one per element, layer norm
//! [`LAYERNORM_COST`] and softmax [`SOFTMAX_COST`] per element. One reservoir
//! step costs `mac * (S*S + S*D) + 2*S` (pre-activation sum and tanh).

use serde::{Deserialize, Serialize};

use super::{EnergyError, ModelMetrics, Result};
use crate::data::resampled_len;
use crate::models::{EchoConfig, MixerConfig, ParamCount};

/// Mean, centre, square, variance sum, normalize, gain, bias.
pub const LAYERNORM_COST: u64 = 7;
/// Exponential, sum, divide.
pub const SOFTMAX_COST: u64 = 3;
/// Linear interpolation per output sample when a window is resampled.
const RESAMPLE_COST: u64 = 3;
/// Allowance for names, shapes and metadata in a serialized checkpoint.
pub const HEADER_BYTES: usize = 4096;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Layer {
    /// `C x L` window to `N x (patch*C)` tokens, resampling `L` if needed.
    Patchify { patch: usize },
    /// All values into one row.
    Flatten,
    Linear { out: usize, bias: bool },
    /// Learned additive position embeddings.
    PosEmbed,
    /// Learned rows prepended to the token matrix.
    Tokens { count: usize },
    LayerNorm,
    MixerLayer { token_hidden: usize, channel_hidden: usize },
    /// Frozen reservoir run `passes` times over the tokens; with `token` each
    /// pass appends its own learned token. Emits one final state per pass.
    Esn { size: usize, passes: usize, token: bool },
    Tanh,
    Gelu,
    Softmax,
    /// Mean over rows.
    MeanTokens,
    /// First `count` rows.
    SelectTokens { count: usize },
    /// A separate linear head with bias for every row.
    Heads { out: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDesc {
    pub name: String,
    pub layers: Vec<Layer>,
}

/// Per-sample cost of one layer.
#[derive(Debug, Default)]
struct Step {
    out: [usize; 2],
    flops: u64,
    trainable: usize,
    frozen: usize,
    /// Largest number of activation values alive while the layer runs.
    peak: usize,
}

fn step(layer: &Layer, [r, k]: [usize; 2], mac: u64) -> Result<Step> {
    let n = |v: usize| v as u64;
    let elems = r * k;
    let simple = |flops: u64| Step {
        out: [r, k],
        flops,
        peak: elems,
        ..Default::default()
    };
    let bad = |msg: String| Err(EnergyError::Description(msg));
    Ok(match *layer {
        Layer::Patchify { patch } => {
            if patch == 0 {
                return bad("patch must be positive".into());
            }
            let len = resampled_len(k, patch);
            let out = [len / patch, patch * r];
            let flops = if len == k { 0 } else { RESAMPLE_COST * n(r * len) };
            Step { out, flops, peak: r * len, ..Default::default() }
        }
        Layer::Flatten => Step { out: [1, elems], peak: elems, ..Default::default() },
        Layer::Linear { out, bias } => Step {
            out: [r, out],
            flops: mac * n(r * k * out) + if bias { n(r * out) } else { 0 },
            trainable: k * out + if bias { out } else { 0 },
            peak: r * out,
            ..Default::default()
        },
        Layer::PosEmbed => Step { trainable: elems, ..simple(n(elems)) },
        Layer::Tokens { count } => Step {
            out: [r + count, k],
            trainable: count * k,
            peak: (r + count) * k,
            ..Default::default()
        },
        Layer::LayerNorm => Step { trainable: 2 * k, ..simple(LAYERNORM_COST * n(elems)) },
        Layer::MixerLayer { token_hidden: ht, channel_hidden: hc } => {
            let (t, d) = (r, k);
            let token = LAYERNORM_COST * n(t * d)
                + mac * n(d * t * ht) + n(d * ht) // fc1 + bias
                + n(d * ht) // gelu
                + mac * n(d * ht * t) + n(d * t) // fc2 + bias
                + n(t * d); // residual
            let channel = LAYERNORM_COST * n(t * d)
                + mac * n(t * d * hc) + n(t * hc)
                + n(t * hc)
                + mac * n(t * hc * d) + n(t * d)
                + n(t * d);
            Step {
                out: [t, d],
                flops: token + channel,
                trainable: 4 * d + (t * ht + ht + ht * t + t) + (d * hc + hc + hc * d + d),
                frozen: 0,
                peak: t * d + (d * ht).max(t * hc),
            }
        }
        Layer::Esn { size: s, passes, token } => {
            let steps = r + usize::from(token);
            Step {
                out: [passes, s],
                flops: n(passes * steps) * (mac * n(s * s + s * k) + 2 * n(s)),
                trainable: if token { passes * k } else { 0 },
                frozen: s * s + s * k,
                peak: passes * s,
            }
        }
        Layer::Tanh | Layer::Gelu => simple(n(elems)),
        Layer::Softmax => simple(SOFTMAX_COST * n(elems)),
        Layer::MeanTokens => Step { out: [1, k], flops: n(elems), peak: k, ..Default::default() },
        Layer::SelectTokens { count } => {
            if count > r {
                return bad(format!("cannot select {count} of {r} rows"));
            }
            Step { out: [count, k], peak: count * k, ..Default::default() }
        }
        Layer::Heads { out } => Step {
            out: [r, out],
            flops: n(r) * (mac * n(k * out) + n(out)),
            trainable: r * (k * out + out),
            peak: r * out,
            ..Default::default()
        },
    })
}

struct Totals {
    flops: u64,
    params: ParamCount,
    peak: usize,
}

fn walk(desc: &ModelDesc, sample: [usize; 2], mac: u64) -> Result<Totals> {
    if mac != 1 && mac != 2 {
        return Err(EnergyError::Description(format!("mac cost must be 1 or 2, got {mac}")));
    }
    let mut shape = sample;
    let mut t = Totals {
        flops: 0,
        params: ParamCount { trainable: 0, frozen: 0 },
        peak: 0,
    };
    for (i, layer) in desc.layers.iter().enumerate() {
        let s = step(layer, shape, mac).map_err(|e| EnergyError::Description(format!("{} layer {i}: {e}", desc.name)))?;
        t.flops += s.flops;
        t.params.trainable += s.trainable;
        t.params.frozen += s.frozen;
        t.peak = t.peak.max(s.peak);
        shape = s.out;
    }
    Ok(t)
}

/// Exact operation count for a batch of `batch` windows of shape `sample`
/// (`C x L`).
pub fn count_flops(desc: &ModelDesc, batch: usize, sample: [usize; 2], mac_cost: u64) -> Result<u64> {
    Ok(walk(desc, sample, mac_cost)?.flops * batch as u64)
}

impl ModelDesc {
    pub fn param_count(&self, sample: [usize; 2]) -> Result<ParamCount> {
        Ok(walk(self, sample, 2)?.params)
    }
}

/// Parameters, resident input and the largest single-layer activation
/// footprint, 4 bytes per value, in mebibytes, plus `runtime_mb`.
pub fn estimate_heap(desc: &ModelDesc, batch: usize, sample: [usize; 2], runtime_mb: f64) -> Result<f64> {
    let t = walk(desc, sample, 2)?;
    let values = t.params.total() + batch * (sample[0] * sample[1] + t.peak);
    Ok(values as f64 * 4.0 / (1024.0 * 1024.0) + runtime_mb)
}

/// Serialized size of `params` 32-bit values plus [`HEADER_BYTES`], in MB.
pub fn estimate_footprint(params: usize) -> f64 {
    footprint_mb(params * 4 + HEADER_BYTES)
}

pub fn footprint_mb(bytes: usize) -> f64 {
    bytes as f64 / 1e6
}

/// Metrics record for `desc` at the given batch and shape. Footprint comes
/// from the parameter count; `accuracy` is passed through.
pub fn profile(desc: &ModelDesc, batch: usize, sample: [usize; 2], mac_cost: u64, accuracy: f64) -> Result<ModelMetrics> {
    let params = desc.param_count(sample)?;
    let m = ModelMetrics {
        name: desc.name.clone(),
        flops: count_flops(desc, batch, sample, mac_cost)? as f64,
        heap_mb: estimate_heap(desc, batch, sample, 0.0)?,
        footprint_mb: estimate_footprint(params.total()),
        accuracy,
    };
    m.validate()?;
    Ok(m)
}

pub fn describe_echo(cfg: &EchoConfig) -> ModelDesc {
    ModelDesc {
        name: format!("PatchEchoClassifier_S{}_p{}", cfg.reservoir_size, cfg.patch),
        layers: vec![
            Layer::Patchify { patch: cfg.patch },
            Layer::Esn { size: cfg.reservoir_size, passes: 2, token: true },
            Layer::Heads { out: cfg.classes },
            Layer::MeanTokens,
            Layer::Softmax,
        ],
    }
}

fn mixer_layers(cfg: &MixerConfig) -> impl Iterator<Item = Layer> + '_ {
    (0..cfg.layers).map(|_| Layer::MixerLayer {
        token_hidden: cfg.token_hidden(),
        channel_hidden: cfg.channel_hidden(),
    })
}

pub fn describe_mixer_student(cfg: &MixerConfig) -> ModelDesc {
    let mut layers = vec![
        Layer::Patchify { patch: cfg.patch },
        Layer::Linear { out: cfg.dim, bias: true },
        Layer::PosEmbed,
        Layer::Tokens { count: 2 },
    ];
    layers.extend(mixer_layers(cfg));
    layers.extend([
        Layer::LayerNorm,
        Layer::SelectTokens { count: 2 },
        Layer::Heads { out: cfg.classes },
        Layer::MeanTokens,
        Layer::Softmax,
    ]);
    ModelDesc { name: "PatchMixerClassifier".into(), layers }
}

pub fn describe_teacher(cfg: &MixerConfig) -> ModelDesc {
    let mut layers = vec![Layer::Patchify { patch: cfg.patch }, Layer::Linear { out: cfg.dim, bias: true }];
    layers.extend(mixer_layers(cfg));
    layers.extend([
        Layer::LayerNorm,
        Layer::MeanTokens,
        Layer::Linear { out: cfg.classes, bias: true },
        Layer::Softmax,
    ]);
    ModelDesc { name: "MixerTeacher".into(), layers }
}
