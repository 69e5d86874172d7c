use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DataError, Result};
use crate::tensor::Tensor;

/// Per-channel linear interpolation of a `C x T` signal onto `target_len`
/// equally spaced points spanning `[0, T-1]`. Endpoints are reproduced exactly.
pub fn resample(x: &Tensor<f32>, target_len: usize) -> Result<Tensor<f32>> {
    if x.ndim() != 2 {
        return Err(DataError::Contract(format!(
            "resample expects C x T, got {:?}",
            x.shape()
        )));
    }
    let (c, t) = (x.shape()[0], x.shape()[1]);
    if t < 2 || target_len < 2 {
        return Err(DataError::Contract(format!(
            "resample needs T >= 2 and L >= 2 (T={t}, L={target_len})"
        )));
    }
    if t == target_len {
        return Ok(x.clone());
    }
    let mut out = Vec::with_capacity(c * target_len);
    for ch in 0..c {
        let row = x.row(ch);
        for j in 0..target_len {
            let pos = (j * (t - 1)) as f64 / (target_len - 1) as f64;
            let i = (pos.floor() as usize).min(t - 1);
            let frac = pos - i as f64;
            let v = if frac == 0.0 {
                row[i] as f64
            } else {
                row[i] as f64 * (1.0 - frac) + row[i + 1] as f64 * frac
            };
            out.push(v as f32);
        }
    }
    Ok(Tensor::new(vec![c, target_len], out).expect("resample shape"))
}

/// Nearest multiple of `patch` to `len` (at least one patch).
pub fn resampled_len(len: usize, patch: usize) -> usize {
    let patches = ((len as f64 / patch as f64).round() as usize).max(1);
    patches * patch
}

/// Add i.i.d. Gaussian noise with standard deviation `sigma`, seeded.
pub fn jitter(x: &Tensor<f32>, sigma: f64, seed: u64) -> Result<Tensor<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    jitter_with(x, sigma, &mut rng)
}

pub fn jitter_with<R: Rng + ?Sized>(x: &Tensor<f32>, sigma: f64, rng: &mut R) -> Result<Tensor<f32>> {
    if !(sigma >= 0.0) {
        return Err(DataError::Contract(format!("jitter sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let noise = Normal::new(0.0, sigma).expect("finite sigma");
    let mut out = x.clone();
    for v in out.data_mut() {
        *v = (*v as f64 + noise.sample(rng)) as f32;
    }
    Ok(out)
}
