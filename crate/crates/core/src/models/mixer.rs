use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{linear, uniform, Bound, Classifier, ModelError, ParamCount, ParamSet, Result, Student, SMALL_INIT};
use crate::data::{resampled_len, LabeledWindow};
use crate::tensor::{Scalar, Tape, Tensor, Var};
use crate::tokenizer::tokenize;

pub const LAYERNORM_EPS: f64 = 1e-5;

/// Shape of a 1-D MLP-Mixer. Used for both the two-head student and the
/// pooled single-head teacher.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixerConfig {
    pub patch: usize,
    pub channels: usize,
    pub window: usize,
    pub dim: usize,
    pub layers: usize,
    pub classes: usize,
    /// Token-mixing hidden width; `dim / 2` when absent.
    #[serde(default)]
    pub token_hidden: Option<usize>,
    /// Channel-mixing hidden width; `4 * dim` when absent.
    #[serde(default)]
    pub channel_hidden: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

pub type TeacherConfig = MixerConfig;

impl MixerConfig {
    /// 512-wide, 8-layer student with patch 16.
    pub fn student(channels: usize, window: usize, classes: usize) -> Self {
        Self {
            patch: 16,
            channels,
            window,
            dim: 512,
            layers: 8,
            classes,
            token_hidden: None,
            channel_hidden: None,
            seed: 0,
        }
    }

    /// 768-wide, 12-layer teacher with patch 16.
    pub fn teacher(channels: usize, window: usize, classes: usize) -> Self {
        Self {
            dim: 768,
            layers: 12,
            ..Self::student(channels, window, classes)
        }
    }

    pub fn patches(&self) -> usize {
        resampled_len(self.window, self.patch) / self.patch
    }

    pub fn token_hidden(&self) -> usize {
        self.token_hidden.unwrap_or((self.dim / 2).max(1))
    }

    pub fn channel_hidden(&self) -> usize {
        self.channel_hidden.unwrap_or(4 * self.dim)
    }

    fn validate(&self) -> Result<()> {
        if self.patch == 0 || self.channels == 0 || self.dim == 0 || self.classes < 2 || self.window == 0 {
            return Err(ModelError::Contract(format!("invalid mixer config {self:?}")));
        }
        Ok(())
    }
}

/// Tape handles of one mixer layer's parameters.
#[derive(Clone, Copy, Debug)]
pub struct MixerLayerVars {
    pub norm1_gain: Var,
    pub norm1_bias: Var,
    pub token_fc1_w: Var,
    pub token_fc1_b: Var,
    pub token_fc2_w: Var,
    pub token_fc2_b: Var,
    pub norm2_gain: Var,
    pub norm2_bias: Var,
    pub channel_fc1_w: Var,
    pub channel_fc1_b: Var,
    pub channel_fc2_w: Var,
    pub channel_fc2_b: Var,
}

const LAYER_PARAMS: [&str; 12] = [
    "norm1.gain",
    "norm1.bias",
    "token_mlp.fc1.weight",
    "token_mlp.fc1.bias",
    "token_mlp.fc2.weight",
    "token_mlp.fc2.bias",
    "norm2.gain",
    "norm2.bias",
    "channel_mlp.fc1.weight",
    "channel_mlp.fc1.bias",
    "channel_mlp.fc2.weight",
    "channel_mlp.fc2.bias",
];

impl MixerLayerVars {
    fn from_indices(bound: &Bound, idx: &[usize; 12]) -> Self {
        let v = |i: usize| bound[idx[i]];
        Self {
            norm1_gain: v(0),
            norm1_bias: v(1),
            token_fc1_w: v(2),
            token_fc1_b: v(3),
            token_fc2_w: v(4),
            token_fc2_b: v(5),
            norm2_gain: v(6),
            norm2_bias: v(7),
            channel_fc1_w: v(8),
            channel_fc1_b: v(9),
            channel_fc2_w: v(10),
            channel_fc2_b: v(11),
        }
    }
}

/// One mixer layer on `x: B x T x d`:
/// `x + TokenMLP(LN(x))` across tokens, then `x + ChannelMLP(LN(x))` across features.
pub fn mixer_layer_forward<T: Scalar>(tape: &mut Tape<T>, x: Var, v: &MixerLayerVars) -> Result<Var> {
    let shape = tape.shape(x).to_vec();
    let [b, t, d] = shape[..] else {
        return Err(ModelError::Contract(format!("mixer layer expects B x T x d, got {shape:?}")));
    };
    let y = tape.layernorm(x, v.norm1_gain, v.norm1_bias, LAYERNORM_EPS)?;
    let yt = tape.swap_last2(y)?;
    let yt = tape.reshape(yt, vec![b * d, t])?;
    let h = linear(tape, yt, v.token_fc1_w, v.token_fc1_b)?;
    let h = tape.gelu(h);
    let o = linear(tape, h, v.token_fc2_w, v.token_fc2_b)?;
    let o = tape.reshape(o, vec![b, d, t])?;
    let o = tape.swap_last2(o)?;
    let x = tape.add(x, o)?;

    let z = tape.layernorm(x, v.norm2_gain, v.norm2_bias, LAYERNORM_EPS)?;
    let h = linear(tape, z, v.channel_fc1_w, v.channel_fc1_b)?;
    let h = tape.gelu(h);
    let o = linear(tape, h, v.channel_fc2_w, v.channel_fc2_b)?;
    Ok(tape.add(x, o)?)
}

fn push_layer(params: &mut ParamSet, prefix: &str, tokens: usize, cfg: &MixerConfig, rng: &mut ChaCha8Rng) -> [usize; 12] {
    let (d, ht, hc) = (cfg.dim, cfg.token_hidden(), cfg.channel_hidden());
    let fan = |n: usize| 1.0 / (n as f32).sqrt();
    let shapes: [(Vec<usize>, Option<f32>); 12] = [
        (vec![d], None),
        (vec![d], None),
        (vec![tokens, ht], Some(fan(tokens))),
        (vec![ht], None),
        (vec![ht, tokens], Some(fan(ht))),
        (vec![tokens], None),
        (vec![d], None),
        (vec![d], None),
        (vec![d, hc], Some(fan(d))),
        (vec![hc], None),
        (vec![hc, d], Some(fan(hc))),
        (vec![d], None),
    ];
    let mut idx = [0; 12];
    for (i, ((shape, bound), name)) in shapes.into_iter().zip(LAYER_PARAMS).enumerate() {
        let t = match (bound, name.ends_with("gain")) {
            (Some(b), _) => uniform(rng, shape, b),
            (None, true) => Tensor::ones(shape),
            (None, false) => Tensor::zeros(shape),
        };
        idx[i] = params.push(format!("{prefix}.{name}"), t, false);
    }
    idx
}

/// Patch embedding of a batch of windows: `B x N x d`.
fn embed<T: Scalar>(
    tape: &mut Tape<T>,
    cfg: &MixerConfig,
    batch: &[&LabeledWindow],
    weight: Var,
    bias: Var,
) -> Result<Var> {
    let n = cfg.patches();
    let pd = cfg.patch * cfg.channels;
    let mut data = Vec::with_capacity(batch.len() * n * pd);
    for w in batch {
        if w.channels() != cfg.channels {
            return Err(ModelError::Contract(format!(
                "window has {} channels, model expects {}",
                w.channels(),
                cfg.channels
            )));
        }
        let seq = tokenize(&w.data, cfg.patch)?;
        if seq.len() != n {
            return Err(ModelError::Contract(format!(
                "window yields {} patches, model expects {n}",
                seq.len()
            )));
        }
        data.extend(seq.patches.data().iter().map(|&v| T::from_f64(v as f64)));
    }
    let x = tape.constant(Tensor::new(vec![batch.len(), n, pd], data)?);
    linear(tape, x, weight, bias)
}

#[derive(Clone, Debug, PartialEq)]
struct Layout {
    embed_w: usize,
    embed_b: usize,
    layers: Vec<[usize; 12]>,
    norm_g: usize,
    norm_b: usize,
}

impl Layout {
    fn build(params: &mut ParamSet, cfg: &MixerConfig, tokens: usize, rng: &mut ChaCha8Rng, extra: impl FnOnce(&mut ParamSet, &mut ChaCha8Rng)) -> Self {
        let pd = cfg.patch * cfg.channels;
        let embed_w = params.push("embed.weight", uniform(rng, vec![pd, cfg.dim], SMALL_INIT), false);
        let embed_b = params.push("embed.bias", uniform(rng, vec![cfg.dim], SMALL_INIT), false);
        extra(params, rng);
        let layers = (0..cfg.layers)
            .map(|i| push_layer(params, &format!("layers.{i}"), tokens, cfg, rng))
            .collect();
        let norm_g = params.push("norm.gain", Tensor::ones(vec![cfg.dim]), false);
        let norm_b = params.push("norm.bias", Tensor::zeros(vec![cfg.dim]), false);
        Self {
            embed_w,
            embed_b,
            layers,
            norm_g,
            norm_b,
        }
    }

    fn run_layers<T: Scalar>(&self, tape: &mut Tape<T>, bound: &Bound, mut x: Var) -> Result<Var> {
        for idx in &self.layers {
            x = mixer_layer_forward(tape, x, &MixerLayerVars::from_indices(bound, idx))?;
        }
        Ok(tape.layernorm(x, bound[self.norm_g], bound[self.norm_b], LAYERNORM_EPS)?)
    }
}

/// Mixer student: patch embedding with position embeddings, class and
/// distillation tokens prepended, two heads reading those token rows.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchMixerClassifier {
    config: MixerConfig,
    params: ParamSet,
    layout: Layout,
    pos: usize,
    cls: usize,
    dist: usize,
    heads: [usize; 4],
}

impl PatchMixerClassifier {
    pub fn new(config: MixerConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamSet::new();
        let (n, d, k) = (config.patches(), config.dim, config.classes);
        let mut extra = [0usize; 3];
        let layout = Layout::build(&mut params, &config, n + 2, &mut rng, |p, rng| {
            extra[0] = p.push("pos_embed", uniform(rng, vec![n, d], SMALL_INIT), false);
            extra[1] = p.push("cls_token", uniform(rng, vec![d], SMALL_INIT), false);
            extra[2] = p.push("dist_token", uniform(rng, vec![d], SMALL_INIT), false);
        });
        let heads = [
            params.push("head_cls.weight", uniform(&mut rng, vec![d, k], SMALL_INIT), false),
            params.push("head_cls.bias", uniform(&mut rng, vec![k], SMALL_INIT), false),
            params.push("head_dist.weight", uniform(&mut rng, vec![d, k], SMALL_INIT), false),
            params.push("head_dist.bias", uniform(&mut rng, vec![k], SMALL_INIT), false),
        ];
        Ok(Self {
            config,
            params,
            layout,
            pos: extra[0],
            cls: extra[1],
            dist: extra[2],
            heads,
        })
    }

    pub fn config(&self) -> &MixerConfig {
        &self.config
    }

    /// Token count seen by the mixer layers (`N + 2`).
    pub fn tokens(&self) -> usize {
        self.config.patches() + 2
    }
}

impl Student for PatchMixerClassifier {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn classes(&self) -> usize {
        self.config.classes
    }

    fn forward_pair<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        bound: &Bound,
        batch: &[&LabeledWindow],
    ) -> Result<(Var, Var)> {
        let b = batch.len();
        let d = self.config.dim;
        let x = embed(tape, &self.config, batch, bound[self.layout.embed_w], bound[self.layout.embed_b])?;
        let x = tape.add(x, bound[self.pos])?;
        let mut parts = Vec::with_capacity(3);
        for tok in [self.cls, self.dist] {
            let e = tape.expand(bound[tok], b);
            parts.push(tape.reshape(e, vec![b, 1, d])?);
        }
        parts.push(x);
        let x = tape.concat(&parts, 1)?;
        let x = self.layout.run_layers(tape, bound, x)?;
        let zc_in = tape.select(x, 1, 0)?;
        let zd_in = tape.select(x, 1, 1)?;
        let zc = linear(tape, zc_in, bound[self.heads[0]], bound[self.heads[1]])?;
        let zd = linear(tape, zd_in, bound[self.heads[2]], bound[self.heads[3]])?;
        Ok((zc, zd))
    }

    fn param_count(&self) -> ParamCount {
        ParamCount {
            trainable: self.params.count(false),
            frozen: self.params.count(true),
        }
    }

    fn frozen_digest(&self) -> String {
        crate::reservoir::tensor_digest(&[])
    }
}

/// Mixer teacher: patch embedding, mixer layers, mean over tokens, one head.
#[derive(Clone, Debug, PartialEq)]
pub struct MixerTeacher {
    config: MixerConfig,
    params: ParamSet,
    layout: Layout,
    head: [usize; 2],
}

impl MixerTeacher {
    pub fn new(config: MixerConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamSet::new();
        let layout = Layout::build(&mut params, &config, config.patches(), &mut rng, |_, _| {});
        let (d, k) = (config.dim, config.classes);
        let head = [
            params.push("head.weight", uniform(&mut rng, vec![d, k], SMALL_INIT), false),
            params.push("head.bias", uniform(&mut rng, vec![k], SMALL_INIT), false),
        ];
        Ok(Self {
            config,
            params,
            layout,
            head,
        })
    }

    pub fn config(&self) -> &MixerConfig {
        &self.config
    }

    pub fn param_count(&self) -> ParamCount {
        ParamCount {
            trainable: self.params.count(false),
            frozen: self.params.count(true),
        }
    }
}

impl Classifier for MixerTeacher {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn classes(&self) -> usize {
        self.config.classes
    }

    fn forward<T: Scalar>(&self, tape: &mut Tape<T>, bound: &Bound, batch: &[&LabeledWindow]) -> Result<Var> {
        let x = embed(tape, &self.config, batch, bound[self.layout.embed_w], bound[self.layout.embed_b])?;
        let x = self.layout.run_layers(tape, bound, x)?;
        let pooled = tape.mean_axis(x, 1)?;
        linear(tape, pooled, bound[self.head[0]], bound[self.head[1]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dim: usize, layers: usize) -> MixerConfig {
        MixerConfig {
            patch: 4,
            channels: 2,
            window: 16,
            dim,
            layers,
            classes: 3,
            token_hidden: None,
            channel_hidden: None,
            seed: 3,
        }
    }

    fn windows(n: usize) -> Vec<LabeledWindow> {
        (0..n)
            .map(|k| LabeledWindow {
                data: Tensor::new(
                    vec![2, 16],
                    (0..32).map(|i| ((i * 7 + k * 5) % 9) as f32 / 4.0 - 1.0).collect(),
                )
                .unwrap(),
                label: k % 3,
            })
            .collect()
    }

    #[test]
    fn zero_parameters_give_zero_logits() {
        let mut m = PatchMixerClassifier::new(small(8, 2)).unwrap();
        for i in 0..m.params.len() {
            m.params.get_mut(i).data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let w = windows(2);
        let refs: Vec<&LabeledWindow> = w.iter().collect();
        let mut tape = Tape::<f32>::new();
        let bound = m.params.bind(&mut tape);
        let (zc, zd) = m.forward_pair(&mut tape, &bound, &refs).unwrap();
        assert_eq!(tape.shape(zc), &[2, 3]);
        assert!(tape.value(zc).data().iter().chain(tape.value(zd).data()).all(|&v| v == 0.0));
    }

    #[test]
    fn teacher_outputs_one_logit_row_per_window() {
        let m = MixerTeacher::new(small(8, 2)).unwrap();
        let w = windows(3);
        let refs: Vec<&LabeledWindow> = w.iter().collect();
        let mut tape = Tape::<f32>::new();
        let bound = m.params.bind(&mut tape);
        let z = m.forward(&mut tape, &bound, &refs).unwrap();
        assert_eq!(tape.shape(z), &[3, 3]);
        assert!(tape.value(z).all_finite());
    }

    #[test]
    fn default_widths() {
        let c = MixerConfig::teacher(3, 496, 8);
        assert_eq!((c.dim, c.layers, c.patch), (768, 12, 16));
        assert_eq!(c.token_hidden(), 384);
        assert_eq!(c.channel_hidden(), 3072);
        assert_eq!(c.patches(), 31);
        let s = MixerConfig::student(3, 496, 8);
        assert_eq!((s.dim, s.layers), (512, 8));
    }

    #[test]
    fn student_token_count() {
        let m = PatchMixerClassifier::new(small(8, 1)).unwrap();
        assert_eq!(m.tokens(), 6);
        assert_eq!(m.params.by_name("layers.0.token_mlp.fc1.weight").unwrap().shape(), &[6, 4]);
    }
}
