//! Echo state network with frozen random input and recurrent weights.
//!
//! State update, with row-vector states:
//! `x_i = tanh(x_{i-1} · W_reservoir + u_i · W_inputᵀ)`, `x_0 = 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::tensor::{Scalar, Tensor};
use crate::tokenizer::PatchSequence;

pub const POWER_ITERATIONS: usize = 200;
const CONVERGENCE_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum ReservoirError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("recurrent matrix has zero spectral radius; cannot rescale")]
    Degenerate,
}

pub type Result<T, E = ReservoirError> = std::result::Result<T, E>;

/// Frozen reservoir weights. There is no mutable access after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct EsnParams {
    w_input: Tensor<f32>,
    w_reservoir: Tensor<f32>,
    spectral_radius: f64,
    sparsity: f64,
    seed: u64,
}

/// Outcome of the power-iteration radius estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadiusEstimate {
    pub radius: f64,
    pub converged: bool,
}

/// Dominant-eigenvalue magnitude by power iteration: the geometric mean of
/// the per-step growth factors over the second half of the iterations.
/// Growth averaging also settles when the dominant eigenvalues form a
/// complex pair, where the plain Rayleigh ratio oscillates.
pub fn power_iteration(m: &Tensor<f32>, iterations: usize) -> RadiusEstimate {
    let n = m.shape()[0];
    let a: Vec<f64> = m.to_f64_vec();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut w = vec![0.0; n];
    let mut logs = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        // w = v · A (row-vector convention; same spectrum as A · v)
        w.iter_mut().for_each(|x| *x = 0.0);
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                for (wj, aij) in w.iter_mut().zip(&a[i * n..(i + 1) * n]) {
                    *wj += vi * aij;
                }
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return RadiusEstimate {
                radius: 0.0,
                converged: norm == 0.0,
            };
        }
        logs.push(norm.ln());
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
    }
    let half = logs.len() / 2;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len().max(1) as f64;
    let est = mean(&logs[half..]).exp();
    let prev = if logs.len() > half + 1 {
        mean(&logs[half..logs.len() - 1]).exp()
    } else {
        est
    };
    RadiusEstimate {
        radius: est,
        converged: ((est - prev) / est).abs() <= CONVERGENCE_TOL,
    }
}

impl EsnParams {
    /// Uniform(-1, 1) weights, a `sparsity` fraction of recurrent entries
    /// zeroed, recurrent matrix rescaled to `spectral_radius`.
    pub fn init(size: usize, input_dim: usize, spectral_radius: f64, sparsity: f64, seed: u64) -> Result<Self> {
        Self::init_scaled(size, input_dim, spectral_radius, sparsity, 1.0, seed)
    }

    /// [`EsnParams::init`] with `W_input` multiplied by `input_scaling`.
    pub fn init_scaled(
        size: usize,
        input_dim: usize,
        spectral_radius: f64,
        sparsity: f64,
        input_scaling: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(input_scaling > 0.0 && input_scaling.is_finite()) {
            return Err(ReservoirError::Contract(format!(
                "input scaling must be positive, got {input_scaling}"
            )));
        }
        if size == 0 || input_dim == 0 {
            return Err(ReservoirError::Contract(format!(
                "reservoir size and input dim must be positive (S={size}, D={input_dim})"
            )));
        }
        if !(spectral_radius > 0.0) {
            return Err(ReservoirError::Contract(format!(
                "spectral radius must be positive, got {spectral_radius}"
            )));
        }
        if !(0.0..1.0).contains(&sparsity) {
            return Err(ReservoirError::Contract(format!(
                "sparsity must be in [0, 1), got {sparsity}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w_input: Vec<f32> = (0..size * input_dim)
            .map(|_| rng.random_range(-1.0f32..1.0))
            .collect();
        let w_input: Vec<f32> = if input_scaling == 1.0 {
            w_input
        } else {
            w_input.into_iter().map(|v| (v as f64 * input_scaling) as f32).collect()
        };
        let mut w_res: Vec<f32> = (0..size * size)
            .map(|_| rng.random_range(-1.0f32..1.0))
            .collect();
        if sparsity > 0.0 {
            for w in &mut w_res {
                if rng.random::<f64>() < sparsity {
                    *w = 0.0;
                }
            }
        }
        let w_res = Tensor::new(vec![size, size], w_res).expect("square");
        let est = power_iteration(&w_res, POWER_ITERATIONS);
        if est.radius == 0.0 {
            return Err(ReservoirError::Degenerate);
        }
        if !est.converged {
            log::warn!(
                "power iteration did not settle to {CONVERGENCE_TOL} after {POWER_ITERATIONS} iterations; using estimate {:.6}",
                est.radius
            );
        }
        let factor = spectral_radius / est.radius;
        let w_reservoir = w_res.map(|v| (v as f64 * factor) as f32);
        Ok(Self {
            w_input: Tensor::new(vec![size, input_dim], w_input).expect("input shape"),
            w_reservoir,
            spectral_radius,
            sparsity,
            seed,
        })
    }

    /// Wrap explicit weights (`W_input`: `S x D`, `W_reservoir`: `S x S`).
    pub fn from_weights(w_input: Tensor<f32>, w_reservoir: Tensor<f32>) -> Result<Self> {
        let s = w_reservoir.shape().first().copied().unwrap_or(0);
        if w_reservoir.shape() != [s, s] || w_input.ndim() != 2 || w_input.shape()[0] != s || s == 0 {
            return Err(ReservoirError::Contract(format!(
                "incompatible reservoir weights {:?} / {:?}",
                w_input.shape(),
                w_reservoir.shape()
            )));
        }
        let radius = power_iteration(&w_reservoir, POWER_ITERATIONS).radius;
        Ok(Self {
            w_input,
            w_reservoir,
            spectral_radius: radius,
            sparsity: 0.0,
            seed: 0,
        })
    }

    pub fn size(&self) -> usize {
        self.w_reservoir.shape()[0]
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.shape()[1]
    }

    pub fn w_input(&self) -> &Tensor<f32> {
        &self.w_input
    }

    pub fn w_reservoir(&self) -> &Tensor<f32> {
        &self.w_reservoir
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    pub fn sparsity(&self) -> f64 {
        self.sparsity
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.w_input.len() + self.w_reservoir.len()
    }

    /// SHA-256 over both weight matrices (shapes, then little-endian values).
    pub fn digest(&self) -> String {
        tensor_digest(&[&self.w_input, &self.w_reservoir])
    }
}

/// Hex SHA-256 over shapes and little-endian `f32` values of the tensors.
pub fn tensor_digest(tensors: &[&Tensor<f32>]) -> String {
    let mut h = Sha256::new();
    for t in tensors {
        h.update((t.ndim() as u64).to_le_bytes());
        for &d in t.shape() {
            h.update((d as u64).to_le_bytes());
        }
        for v in t.data() {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Reservoir states for a sequence, one row per input row.
#[derive(Clone, Debug, PartialEq)]
pub struct EsnStates {
    /// `(N+1) x S`; the last row is the state at the special-token position.
    pub states: Tensor<f32>,
    pub initial: Vec<f32>,
}

impl EsnStates {
    pub fn last(&self) -> &[f32] {
        self.states.row(self.states.shape()[0] - 1)
    }
}

/// Run the recurrence over `seq` from the zero state.
pub fn esn_forward(params: &EsnParams, seq: &PatchSequence) -> Result<EsnStates> {
    let x0 = vec![0.0; params.size()];
    run(params, &seq.patches, &x0)
}

/// Run the recurrence over the rows of `inputs` (`T x D`) from `initial`.
pub fn run(params: &EsnParams, inputs: &Tensor<f32>, initial: &[f32]) -> Result<EsnStates> {
    let (s, d) = (params.size(), params.input_dim());
    if inputs.ndim() != 2 || inputs.shape()[1] != d {
        return Err(ReservoirError::Contract(format!(
            "input rows have shape {:?}, reservoir expects width {d}",
            inputs.shape()
        )));
    }
    if initial.len() != s {
        return Err(ReservoirError::Contract(format!(
            "initial state has {} entries, reservoir has {s}",
            initial.len()
        )));
    }
    let steps = inputs.shape()[0];
    let mut states = Vec::with_capacity(steps * s);
    let mut h = initial.to_vec();
    let mut pre = vec![0.0f32; s];
    for t in 0..steps {
        step(params, &h, inputs.row(t), &mut pre);
        h.iter_mut().zip(&pre).for_each(|(x, p)| *x = p.tanh());
        states.extend_from_slice(&h);
    }
    Ok(EsnStates {
        states: Tensor::new(vec![steps, s], states).expect("state shape"),
        initial: initial.to_vec(),
    })
}

/// `pre = h · W_reservoir + u · W_inputᵀ`.
fn step(params: &EsnParams, h: &[f32], u: &[f32], pre: &mut [f32]) {
    let s = params.size();
    f32::gemm(1, s, s, h, false, params.w_reservoir.data(), false, 0.0, pre);
    f32::gemm(1, u.len(), s, u, false, params.w_input.data(), true, 1.0, pre);
}

/// States after consuming every patch of every sequence, batched.
/// `sequences` must share one length; returns `B x S`.
pub fn batch_final_states(params: &EsnParams, sequences: &[&Tensor<f32>]) -> Result<Tensor<f32>> {
    let (s, d) = (params.size(), params.input_dim());
    let b = sequences.len();
    let steps = sequences.first().map_or(0, |q| q.shape()[0]);
    for q in sequences {
        if q.shape() != [steps, d] {
            return Err(ReservoirError::Contract(format!(
                "sequence shape {:?} differs from [{steps}, {d}]",
                q.shape()
            )));
        }
    }
    let mut h = vec![0.0f32; b * s];
    let mut u = vec![0.0f32; b * d];
    let mut pre = vec![0.0f32; b * s];
    for t in 0..steps {
        for (i, q) in sequences.iter().enumerate() {
            u[i * d..(i + 1) * d].copy_from_slice(q.row(t));
        }
        f32::gemm(b, s, s, &h, false, params.w_reservoir.data(), false, 0.0, &mut pre);
        f32::gemm(b, d, s, &u, false, params.w_input.data(), true, 1.0, &mut pre);
        h.iter_mut().zip(&pre).for_each(|(x, p)| *x = p.tanh());
    }
    Ok(Tensor::new(vec![b, s], h).expect("batch state shape"))
}
