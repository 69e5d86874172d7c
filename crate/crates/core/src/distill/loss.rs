use super::{DistillConfig, LossKind, Result};
use crate::tensor::{Scalar, Tape, Tensor, Var};

/// Which algebraic form of the distillation divergences to use.
///
/// `Standard` weights log-ratios by probabilities. `Literal` weights them by
/// the raw logits, and the KL variant carries an extra `1/K` factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Form {
    Standard,
    Literal,
}

fn batch_dims<T: Scalar>(tape: &Tape<T>, z: Var) -> Result<(usize, usize)> {
    match *tape.shape(z) {
        [b, k] if b > 0 && k > 0 => Ok((b, k)),
        ref s => Err(super::DistillError::Contract(format!("loss expects B x K logits, got {s:?}"))),
    }
}

fn check_same<T: Scalar>(tape: &Tape<T>, z: Var, zt: &Tensor<T>) -> Result<()> {
    if tape.shape(z) != zt.shape() {
        return Err(super::DistillError::Contract(format!(
            "student logits {:?} and teacher logits {:?} differ in shape",
            tape.shape(z),
            zt.shape()
        )));
    }
    Ok(())
}

fn batch_mean<T: Scalar>(tape: &mut Tape<T>, x: Var, b: usize) -> Var {
    let s = tape.sum(x);
    tape.scale(s, T::from_f64(1.0 / b as f64))
}

/// Label-smoothed cross entropy, averaged over the batch.
pub fn ce_label_smooth_tape<T: Scalar>(tape: &mut Tape<T>, z: Var, labels: &[usize], eps: f64) -> Result<Var> {
    let (b, k) = batch_dims(tape, z)?;
    if labels.len() != b || labels.iter().any(|&y| y >= k) {
        return Err(super::DistillError::Contract(format!(
            "{} labels for {b} rows with {k} classes",
            labels.len()
        )));
    }
    let mut target = vec![eps / k as f64; b * k];
    for (row, &y) in labels.iter().enumerate() {
        target[row * k + y] += 1.0 - eps;
    }
    let target = tape.constant(Tensor::from_f64(vec![b, k], &target)?);
    let lp = tape.log_softmax(z);
    let weighted = tape.mul(lp, target)?;
    let mean = batch_mean(tape, weighted, b);
    Ok(tape.scale(mean, T::from_f64(-1.0)))
}

/// Temperature-scaled KL divergence of the student distribution from the
/// teacher's, batch-averaged. The teacher side is constant.
pub fn kd_kl_tape<T: Scalar>(tape: &mut Tape<T>, z: Var, zt: &Tensor<T>, temperature: f64, form: Form) -> Result<Var> {
    let (b, k) = batch_dims(tape, z)?;
    check_same(tape, z, zt)?;
    let inv_t = T::from_f64(1.0 / temperature);
    let zs = tape.scale(z, inv_t);
    let log_q = tape.log_softmax(zs);
    let zt_scaled = tape.constant(zt.map(|v| v * inv_t));
    let log_r = tape.log_softmax(zt_scaled);
    let ratio = tape.sub(log_q, log_r)?;
    let (weight, coef) = match form {
        Form::Standard => (tape.softmax(zs), 1.0),
        Form::Literal => (z, 1.0 / k as f64),
    };
    let terms = tape.mul(weight, ratio)?;
    let mean = batch_mean(tape, terms, b);
    Ok(tape.scale(mean, T::from_f64(temperature * temperature * coef)))
}

/// Jensen-Shannon divergence between student and teacher distributions,
/// batch-averaged.
pub fn kd_js_tape<T: Scalar>(tape: &mut Tape<T>, z: Var, zt: &Tensor<T>, form: Form) -> Result<Var> {
    let (b, _) = batch_dims(tape, z)?;
    check_same(tape, z, zt)?;
    let zt_var = tape.constant(zt.clone());
    let q = tape.softmax(z);
    let r = tape.softmax(zt_var);
    let log_q = tape.log_softmax(z);
    let log_r = tape.log_softmax(zt_var);
    let qr = tape.add(q, r)?;
    let m = tape.scale(qr, T::from_f64(0.5));
    let log_m = tape.log(m);
    let (wq, wr) = match form {
        Form::Standard => (q, r),
        Form::Literal => (z, zt_var),
    };
    let dq = tape.sub(log_q, log_m)?;
    let dr = tape.sub(log_r, log_m)?;
    let tq = tape.mul(wq, dq)?;
    let tr = tape.mul(wr, dr)?;
    let both = tape.add(tq, tr)?;
    let mean = batch_mean(tape, both, b);
    Ok(tape.scale(mean, T::from_f64(0.5)))
}

/// `(1 - alpha) * CE(z_cls) + alpha * KD(z_dist, z_t)`.
pub fn combined_loss_tape<T: Scalar>(
    tape: &mut Tape<T>,
    z_cls: Var,
    z_dist: Var,
    z_t: &Tensor<T>,
    labels: &[usize],
    cfg: &DistillConfig,
) -> Result<Var> {
    let ce = ce_label_smooth_tape(tape, z_cls, labels, cfg.label_smoothing)?;
    let kd = match cfg.loss_kind {
        LossKind::Kl => kd_kl_tape(tape, z_dist, z_t, cfg.temperature, cfg.form())?,
        LossKind::Js => kd_js_tape(tape, z_dist, z_t, cfg.form())?,
    };
    let ce = tape.scale(ce, T::from_f64(1.0 - cfg.alpha));
    let kd = tape.scale(kd, T::from_f64(cfg.alpha));
    Ok(tape.add(ce, kd)?)
}

fn row(v: &[f64]) -> Tensor<f64> {
    Tensor::new(vec![1, v.len()], v.to_vec()).expect("row")
}

fn eval(f: impl FnOnce(&mut Tape<f64>) -> Result<Var>) -> Result<f64> {
    let mut tape = Tape::new();
    let out = f(&mut tape)?;
    Ok(tape.value(out).item())
}

pub fn ce_label_smooth(z_cls: &[f64], y: usize, eps: f64) -> Result<f64> {
    eval(|t| {
        let z = t.constant(row(z_cls));
        ce_label_smooth_tape(t, z, &[y], eps)
    })
}

pub fn kd_kl(z_dist: &[f64], z_t: &[f64], temperature: f64, form: Form) -> Result<f64> {
    eval(|t| {
        let z = t.constant(row(z_dist));
        kd_kl_tape(t, z, &row(z_t), temperature, form)
    })
}

pub fn kd_js(z_dist: &[f64], z_t: &[f64], form: Form) -> Result<f64> {
    eval(|t| {
        let z = t.constant(row(z_dist));
        kd_js_tape(t, z, &row(z_t), form)
    })
}

pub fn combined_loss(z_cls: &[f64], z_dist: &[f64], z_t: &[f64], y: usize, cfg: &DistillConfig) -> Result<f64> {
    eval(|t| {
        let zc = t.constant(row(z_cls));
        let zd = t.constant(row(z_dist));
        combined_loss_tape(t, zc, zd, &row(z_t), &[y], cfg)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_cross_entropy_is_log_k() {
        let v = ce_label_smooth(&[0.3; 4], 2, 0.0).unwrap();
        assert!((v - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_prediction_has_near_zero_loss() {
        assert!(ce_label_smooth(&[40.0, 0.0, 0.0], 0, 0.0).unwrap() < 1e-12);
    }

    #[test]
    fn smoothed_ce_matches_direct_formula() {
        let z = [2.0f64, 1.0, 0.0];
        let lse = z.iter().map(|v| v.exp()).sum::<f64>().ln();
        let lp: Vec<f64> = z.iter().map(|v| v - lse).collect();
        let want = -0.9 * lp[0] - 0.1 / 3.0 * lp.iter().sum::<f64>();
        assert!((ce_label_smooth(&z, 0, 0.1).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn kl_of_known_distributions() {
        // softmax([ln .7, ln .3]) = [.7, .3]
        let q = [0.7f64.ln(), 0.3f64.ln()];
        let v = kd_kl(&q, &[0.0, 0.0], 1.0, Form::Standard).unwrap();
        let want = 0.7 * 1.4f64.ln() + 0.3 * 0.6f64.ln();
        assert!((v - want).abs() < 1e-12);
        assert!((want - 0.082282).abs() < 1e-6);
    }

    #[test]
    fn identical_logits_give_zero_in_both_forms() {
        let z = [1.0, -2.0, 0.5];
        for form in [Form::Standard, Form::Literal] {
            assert!(kd_kl(&z, &z, 3.0, form).unwrap().abs() < 1e-12);
            assert!(kd_js(&z, &z, form).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn literal_kl_weights_by_logits() {
        let (zs, zt, t) = ([1.0f64, 2.0], [0.0f64, 1.5], 2.0);
        let ls = |z: &[f64]| {
            let lse = z.iter().map(|v| (v / t).exp()).sum::<f64>().ln();
            z.iter().map(|v| v / t - lse).collect::<Vec<_>>()
        };
        let (a, b) = (ls(&zs), ls(&zt));
        let want = t * t / 2.0 * (0..2).map(|i| zs[i] * (a[i] - b[i])).sum::<f64>();
        assert!((kd_kl(&zs, &zt, t, Form::Literal).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn js_is_symmetric() {
        let (a, b) = ([0.4, -1.0, 2.2], [1.5, 0.3, -0.7]);
        let ab = kd_js(&a, &b, Form::Standard).unwrap();
        let ba = kd_js(&b, &a, Form::Standard).unwrap();
        assert!((ab - ba).abs() < 1e-12);
        assert!(ab > 0.0 && ab <= 2f64.ln());
    }

    #[test]
    fn combined_endpoints() {
        let (zc, zd, zt) = ([0.2, 1.0, -0.4], [0.5, 0.1, 0.0], [1.0, -1.0, 0.3]);
        let base = DistillConfig::default();
        let ce = ce_label_smooth(&zc, 1, base.label_smoothing).unwrap();
        let kd = kd_kl(&zd, &zt, base.temperature, Form::Standard).unwrap();
        let at = |alpha| combined_loss(&zc, &zd, &zt, 1, &DistillConfig { alpha, ..base.clone() }).unwrap();
        assert!((at(0.0) - ce).abs() < 1e-12);
        assert!((at(1.0) - kd).abs() < 1e-12);
        assert!((at(0.5) - (ce + kd) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn bad_labels_rejected() {
        assert!(ce_label_smooth(&[0.0, 1.0], 2, 0.0).is_err());
        assert!(kd_kl(&[0.0, 1.0], &[0.0], 1.0, Form::Standard).is_err());
    }
}
