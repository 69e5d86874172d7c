use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{ce_label_smooth_tape, combined_loss_tape};
use super::optim::{lr_schedule, Adam};
use super::{DistillConfig, DistillError, Result};
use crate::data::LabeledWindow;
use crate::models::{argmax, combine_heads, logits_batch, Bound, Classifier, ParamSet, Student};
use crate::tensor::{Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

/// Result of a training run. The model holds the best-validation parameters
/// when this is returned.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub log: Vec<EpochRecord>,
}

pub fn write_epoch_log(path: &Path, log: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in log {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

trait Job {
    fn params(&self) -> &ParamSet;
    fn params_mut(&mut self) -> &mut ParamSet;
    fn batch_loss(&self, tape: &mut Tape<f32>, bound: &Bound, idx: &[usize]) -> Result<Var>;
    fn val_accuracy(&self) -> Result<f64>;
    fn check_invariants(&self) -> Result<()>;
}

fn fit<J: Job>(job: &mut J, n_train: usize, cfg: &DistillConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if n_train == 0 {
        return Err(DistillError::Contract("empty training set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut adam = Adam::new(job.params());
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, ParamSet)> = None;

    for epoch in 0..cfg.epochs {
        let lr = lr_schedule(epoch, cfg);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(cfg.batch) {
            let mut tape = Tape::<f32>::new();
            let bound = job.params().bind(&mut tape);
            let loss = job.batch_loss(&mut tape, &bound, idx)?;
            let value = tape.value(loss).item() as f64;
            if !value.is_finite() {
                return Err(DistillError::NonFinite { epoch });
            }
            tape.backward(loss)?;
            adam.step(job.params_mut(), &tape, &bound, lr);
            total += value * idx.len() as f64;
        }
        job.check_invariants()?;
        let val_accuracy = job.val_accuracy()?;
        let train_loss = total / n_train as f64;
        log::info!("epoch {epoch}: lr {lr:.3e} loss {train_loss:.5} val {val_accuracy:.4}");
        log.push(EpochRecord {
            epoch,
            lr,
            train_loss,
            val_accuracy,
        });
        if best.as_ref().is_none_or(|b| val_accuracy > b.1) {
            best = Some((epoch, val_accuracy, job.params().clone()));
        }
    }
    let (best_epoch, best_val_accuracy, params) = best.expect("at least one epoch");
    *job.params_mut() = params;
    Ok(TrainOutcome {
        best_epoch,
        best_val_accuracy,
        log,
    })
}

fn gather(t: &Tensor<f32>, idx: &[usize]) -> Tensor<f32> {
    let mut data = Vec::with_capacity(idx.len() * t.last_dim());
    for &i in idx {
        data.extend_from_slice(t.row(i));
    }
    Tensor::new(vec![idx.len(), t.last_dim()], data).expect("gathered rows")
}

fn accuracy(predicted: impl Iterator<Item = usize>, windows: &[LabeledWindow]) -> f64 {
    let correct = predicted.zip(windows).filter(|(p, w)| *p == w.label).count();
    correct as f64 / windows.len().max(1) as f64
}

struct TeacherJob<'a, C> {
    model: &'a mut C,
    train: &'a [LabeledWindow],
    val: &'a [LabeledWindow],
    smoothing: f64,
}

impl<C: Classifier> Job for TeacherJob<'_, C> {
    fn params(&self) -> &ParamSet {
        self.model.params()
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        self.model.params_mut()
    }

    fn batch_loss(&self, tape: &mut Tape<f32>, bound: &Bound, idx: &[usize]) -> Result<Var> {
        let batch: Vec<&LabeledWindow> = idx.iter().map(|&i| &self.train[i]).collect();
        let labels: Vec<usize> = batch.iter().map(|w| w.label).collect();
        let z = self.model.forward(tape, bound, &batch)?;
        ce_label_smooth_tape(tape, z, &labels, self.smoothing)
    }

    fn val_accuracy(&self) -> Result<f64> {
        let logits = logits_batch(&*self.model, self.val)?;
        Ok(accuracy(logits.iter().map(|z| argmax(z)), self.val))
    }

    fn check_invariants(&self) -> Result<()> {
        Ok(())
    }
}

/// Supervised teacher training with label-smoothed cross entropy. Keeps the
/// parameters of the best validation epoch.
pub fn train_teacher<C: Classifier>(
    teacher: &mut C,
    train: &[LabeledWindow],
    val: &[LabeledWindow],
    cfg: &DistillConfig,
) -> Result<TrainOutcome> {
    let mut job = TeacherJob {
        model: teacher,
        train,
        val,
        smoothing: cfg.label_smoothing,
    };
    fit(&mut job, train.len(), cfg)
}

fn features<S: Student>(model: &S, windows: &[LabeledWindow]) -> Result<Option<Tensor<f32>>> {
    let mut rows: Vec<f32> = Vec::new();
    let mut width = 0;
    for chunk in windows.chunks(256) {
        let refs: Vec<&LabeledWindow> = chunk.iter().collect();
        match model.frozen_features(&refs)? {
            Some(f) => {
                width = f.last_dim();
                rows.extend_from_slice(f.data());
            }
            None => return Ok(None),
        }
    }
    Ok(Some(Tensor::new(vec![windows.len(), width], rows)?))
}

/// Head-averaged class distributions, reusing precomputed frozen features.
pub fn student_probabilities<S: Student>(
    model: &S,
    windows: &[LabeledWindow],
    feats: Option<&Tensor<f32>>,
) -> Result<Vec<Vec<f64>>> {
    let k = model.classes();
    let mut out = Vec::with_capacity(windows.len());
    let idx: Vec<usize> = (0..windows.len()).collect();
    for chunk in idx.chunks(256) {
        let refs: Vec<&LabeledWindow> = chunk.iter().map(|&i| &windows[i]).collect();
        let f = feats.map(|f| gather(f, chunk));
        let mut tape = Tape::<f32>::new();
        let bound = model.params().bind(&mut tape);
        let (zc, zd) = model.forward_with_features(&mut tape, &bound, &refs, f.as_ref())?;
        let (zc, zd) = (tape.value(zc).to_f64_vec(), tape.value(zd).to_f64_vec());
        for (a, b) in zc.chunks(k).zip(zd.chunks(k)) {
            out.push(combine_heads(a, b));
        }
    }
    Ok(out)
}

struct StudentJob<'a, S> {
    model: &'a mut S,
    train: &'a [LabeledWindow],
    val: &'a [LabeledWindow],
    train_feats: Option<Tensor<f32>>,
    val_feats: Option<Tensor<f32>>,
    teacher_logits: Tensor<f32>,
    frozen_digest: String,
    cfg: &'a DistillConfig,
}

impl<S: Student> Job for StudentJob<'_, S> {
    fn params(&self) -> &ParamSet {
        self.model.params()
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        self.model.params_mut()
    }

    fn batch_loss(&self, tape: &mut Tape<f32>, bound: &Bound, idx: &[usize]) -> Result<Var> {
        let batch: Vec<&LabeledWindow> = idx.iter().map(|&i| &self.train[i]).collect();
        let labels: Vec<usize> = batch.iter().map(|w| w.label).collect();
        let feats = self.train_feats.as_ref().map(|f| gather(f, idx));
        let (zc, zd) = self.model.forward_with_features(tape, bound, &batch, feats.as_ref())?;
        let zt = gather(&self.teacher_logits, idx);
        combined_loss_tape(tape, zc, zd, &zt, &labels, self.cfg)
    }

    fn val_accuracy(&self) -> Result<f64> {
        let probs = student_probabilities(&*self.model, self.val, self.val_feats.as_ref())?;
        Ok(accuracy(probs.iter().map(|p| argmax(p)), self.val))
    }

    fn check_invariants(&self) -> Result<()> {
        let now = self.model.frozen_digest();
        if now != self.frozen_digest {
            return Err(DistillError::Invariant(format!(
                "frozen parameters changed during training ({} -> {now})",
                self.frozen_digest
            )));
        }
        Ok(())
    }
}

/// Soft distillation of `student` from a frozen `teacher`.
///
/// Teacher logits are computed once up front; with `alpha = 0` the teacher is
/// not evaluated at all. Keeps the parameters of the best validation epoch,
/// ties going to the earlier epoch.
pub fn distill_student<S: Student, C: Classifier>(
    student: &mut S,
    teacher: &C,
    train: &[LabeledWindow],
    val: &[LabeledWindow],
    cfg: &DistillConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if teacher.classes() != student.classes() {
        return Err(DistillError::Contract(format!(
            "teacher has {} classes, student {}",
            teacher.classes(),
            student.classes()
        )));
    }
    let k = student.classes();
    let teacher_digest = teacher.params().digest();
    let teacher_logits = if cfg.alpha > 0.0 {
        let rows: Vec<f64> = logits_batch(teacher, train)?.into_iter().flatten().collect();
        Tensor::from_f64(vec![train.len(), k], &rows)?
    } else {
        Tensor::zeros(vec![train.len(), k])
    };
    let mut job = StudentJob {
        frozen_digest: student.frozen_digest(),
        train_feats: features(&*student, train)?,
        val_feats: features(&*student, val)?,
        model: student,
        train,
        val,
        teacher_logits,
        cfg,
    };
    let outcome = fit(&mut job, train.len(), cfg)?;
    if teacher.params().digest() != teacher_digest {
        return Err(DistillError::Invariant("teacher parameters changed during distillation".into()));
    }
    Ok(outcome)
}
