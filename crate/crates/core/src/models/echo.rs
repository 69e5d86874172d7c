use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{combine_heads, uniform, Bound, ModelError, ParamCount, ParamSet, Result, Student, SMALL_INIT};
use crate::data::{resampled_len, LabeledWindow};
use crate::reservoir::{self, EsnParams};
use crate::tensor::{Scalar, Tape, Tensor, Var};
use crate::tokenizer::{tokenize, PatchSequence};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EchoConfig {
    pub patch: usize,
    pub channels: usize,
    /// Raw window length before resampling to a multiple of `patch`.
    pub window: usize,
    pub classes: usize,
    pub reservoir_size: usize,
    #[serde(default = "default_radius")]
    pub spectral_radius: f64,
    #[serde(default)]
    pub sparsity: f64,
    /// Multiplier on the uniform(-1, 1) input weights.
    #[serde(default = "default_input_scaling")]
    pub input_scaling: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_radius() -> f64 {
    0.9
}

fn default_input_scaling() -> f64 {
    1.0
}

impl EchoConfig {
    /// Dense reservoir with spectral radius 0.9 and unscaled input weights.
    pub fn new(patch: usize, channels: usize, window: usize, classes: usize, reservoir_size: usize) -> Self {
        Self {
            patch,
            channels,
            window,
            classes,
            reservoir_size,
            spectral_radius: default_radius(),
            sparsity: 0.0,
            input_scaling: default_input_scaling(),
            seed: 0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.patch * self.channels
    }

    pub fn tokens(&self) -> usize {
        resampled_len(self.window, self.patch) / self.patch
    }
}

const CLS: usize = 0;
const DIST: usize = 1;
const HEAD_CLS_W: usize = 2;
const HEAD_CLS_B: usize = 3;
const HEAD_DIST_W: usize = 4;
const HEAD_DIST_B: usize = 5;

/// Patch tokenizer, frozen reservoir, and two linear heads. Only the two
/// special tokens and the heads train.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchEchoClassifier {
    config: EchoConfig,
    esn: EsnParams,
    params: ParamSet,
}

impl PatchEchoClassifier {
    pub fn new(config: EchoConfig) -> Result<Self> {
        if config.classes < 2 || config.patch == 0 || config.channels == 0 {
            return Err(ModelError::Contract(format!("invalid echo config {config:?}")));
        }
        let (s, d, k) = (config.reservoir_size, config.input_dim(), config.classes);
        let esn = EsnParams::init_scaled(s, d, config.spectral_radius, config.sparsity, config.input_scaling, config.seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
        let mut params = ParamSet::new();
        params.push("cls_token", uniform(&mut rng, vec![d], SMALL_INIT), false);
        params.push("dist_token", uniform(&mut rng, vec![d], SMALL_INIT), false);
        params.push("head_cls.weight", uniform(&mut rng, vec![s, k], SMALL_INIT), false);
        params.push("head_cls.bias", uniform(&mut rng, vec![k], SMALL_INIT), false);
        params.push("head_dist.weight", uniform(&mut rng, vec![s, k], SMALL_INIT), false);
        params.push("head_dist.bias", uniform(&mut rng, vec![k], SMALL_INIT), false);
        Ok(Self { config, esn, params })
    }

    /// Assemble from stored parts (checkpoint loading, hand-built models).
    pub fn from_parts(config: EchoConfig, esn: EsnParams, trainable: &[super::Param]) -> Result<Self> {
        if esn.input_dim() != config.input_dim() || esn.size() != config.reservoir_size {
            return Err(ModelError::Contract(format!(
                "reservoir {}x{} does not match config S={} D={}",
                esn.size(),
                esn.input_dim(),
                config.reservoir_size,
                config.input_dim()
            )));
        }
        let mut model = Self {
            params: Self::zero_params(&config),
            config,
            esn,
        };
        model.params.load_from(trainable)?;
        Ok(model)
    }

    fn zero_params(config: &EchoConfig) -> ParamSet {
        let (s, d, k) = (config.reservoir_size, config.input_dim(), config.classes);
        let mut params = ParamSet::new();
        params.push("cls_token", Tensor::zeros(vec![d]), false);
        params.push("dist_token", Tensor::zeros(vec![d]), false);
        params.push("head_cls.weight", Tensor::zeros(vec![s, k]), false);
        params.push("head_cls.bias", Tensor::zeros(vec![k]), false);
        params.push("head_dist.weight", Tensor::zeros(vec![s, k]), false);
        params.push("head_dist.bias", Tensor::zeros(vec![k]), false);
        params
    }

    pub fn config(&self) -> &EchoConfig {
        &self.config
    }

    pub fn esn(&self) -> &EsnParams {
        &self.esn
    }

    pub fn tokenize(&self, window: &LabeledWindow) -> Result<PatchSequence> {
        if window.channels() != self.config.channels {
            return Err(ModelError::Contract(format!(
                "window has {} channels, model expects {}",
                window.channels(),
                self.config.channels
            )));
        }
        Ok(tokenize(&window.data, self.config.patch)?)
    }

    /// Reservoir state after the last signal patch, for each window (`B x S`).
    /// Independent of every trainable parameter.
    pub fn prefix_states(&self, batch: &[&LabeledWindow]) -> Result<Tensor<f32>> {
        let seqs = batch
            .iter()
            .map(|w| self.tokenize(w).map(|s| s.patches))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Tensor<f32>> = seqs.iter().collect();
        Ok(reservoir::batch_final_states(&self.esn, &refs)?)
    }

    /// Final token step and both heads, starting from precomputed prefix states.
    pub fn forward_from_prefix<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        bound: &Bound,
        prefix: &Tensor<f32>,
    ) -> Result<(Var, Var)> {
        let h = tape.constant(prefix.cast());
        self.token_step(tape, bound, Some(h))
    }

    /// Full recurrence recorded on the tape.
    pub fn forward_full<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        bound: &Bound,
        batch: &[&LabeledWindow],
    ) -> Result<(Var, Var)> {
        let seqs = batch
            .iter()
            .map(|w| self.tokenize(w))
            .collect::<Result<Vec<_>>>()?;
        let (s, d) = (self.esn.size(), self.esn.input_dim());
        let steps = seqs.first().map_or(0, PatchSequence::len);
        let w_res = tape.constant(self.esn.w_reservoir().cast());
        let w_in_t = tape.constant(self.esn.w_input().transpose()?.cast());
        let mut h: Option<Var> = None;
        for t in 0..steps {
            let mut rows = Vec::with_capacity(seqs.len() * d);
            for q in &seqs {
                rows.extend(q.patches.row(t).iter().map(|&v| T::from_f64(v as f64)));
            }
            let x = tape.constant(Tensor::new(vec![seqs.len(), d], rows)?);
            let mut pre = tape.matmul(x, w_in_t)?;
            if let Some(prev) = h {
                let rec = tape.matmul(prev, w_res)?;
                pre = tape.add(pre, rec)?;
            }
            h = Some(tape.tanh(pre));
        }
        if h.is_none() {
            h = Some(tape.constant(Tensor::zeros(vec![seqs.len(), s])));
        }
        self.token_step(tape, bound, h)
    }

    fn token_step<T: Scalar>(&self, tape: &mut Tape<T>, bound: &Bound, h: Option<Var>) -> Result<(Var, Var)> {
        let (s, d) = (self.esn.size(), self.esn.input_dim());
        let h = h.expect("prefix state");
        let w_res = tape.constant(self.esn.w_reservoir().cast());
        let w_in_t = tape.constant(self.esn.w_input().transpose()?.cast());
        let rec = tape.matmul(h, w_res)?;
        let mut heads = Vec::with_capacity(2);
        for (tok, w, b) in [(CLS, HEAD_CLS_W, HEAD_CLS_B), (DIST, HEAD_DIST_W, HEAD_DIST_B)] {
            let row = tape.reshape(bound[tok], vec![1, d])?;
            let u = tape.matmul(row, w_in_t)?;
            let u = tape.reshape(u, vec![s])?;
            let pre = tape.add(rec, u)?;
            let state = tape.tanh(pre);
            heads.push(super::linear(tape, state, bound[w], bound[b])?);
        }
        Ok((heads[0], heads[1]))
    }

    /// Two reservoir passes over the window, one with each special token
    /// appended, and the head outputs read at the token position.
    pub fn echo_forward(&self, window: &LabeledWindow) -> Result<(Vec<f32>, Vec<f32>)> {
        let seq = self.tokenize(window)?;
        let mut out = Vec::with_capacity(2);
        for (tok, w, b) in [(CLS, HEAD_CLS_W, HEAD_CLS_B), (DIST, HEAD_DIST_W, HEAD_DIST_B)] {
            let with = seq.with_token(self.params.get(tok).data())?;
            let states = reservoir::esn_forward(&self.esn, &with)?;
            let last = Tensor::new(vec![1, self.esn.size()], states.last().to_vec())?;
            let mut z = last.matmul(self.params.get(w))?.into_data();
            for (zi, bi) in z.iter_mut().zip(self.params.get(b).data()) {
                *zi += bi;
            }
            out.push(z);
        }
        let dist = out.pop().expect("two heads");
        Ok((out.pop().expect("two heads"), dist))
    }

    pub fn predict(&self, window: &LabeledWindow) -> Result<Vec<f64>> {
        let (zc, zd) = self.echo_forward(window)?;
        let f = |v: Vec<f32>| v.into_iter().map(f64::from).collect::<Vec<_>>();
        Ok(combine_heads(&f(zc), &f(zd)))
    }
}

impl Student for PatchEchoClassifier {
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
        let prefix = self.prefix_states(batch)?;
        self.forward_from_prefix(tape, bound, &prefix)
    }

    fn frozen_features(&self, batch: &[&LabeledWindow]) -> Result<Option<Tensor<f32>>> {
        self.prefix_states(batch).map(Some)
    }

    fn forward_with_features<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        bound: &Bound,
        batch: &[&LabeledWindow],
        features: Option<&Tensor<f32>>,
    ) -> Result<(Var, Var)> {
        match features {
            Some(prefix) => self.forward_from_prefix(tape, bound, prefix),
            None => self.forward_pair(tape, bound, batch),
        }
    }

    fn param_count(&self) -> ParamCount {
        ParamCount {
            trainable: self.params.count(false),
            frozen: self.params.count(true) + self.esn.param_count(),
        }
    }

    fn frozen_digest(&self) -> String {
        self.esn.digest()
    }
}
