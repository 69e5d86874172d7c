use serde::{Deserialize, Serialize};

use super::{DistillError, Result};
use crate::data::LabeledWindow;
use crate::models::{argmax, logits_batch, predict_batch, Classifier, Student};

/// Accuracy plus macro-averaged precision, recall and F1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub support: Vec<usize>,
    /// Classes whose precision or recall is undefined (never predicted or
    /// absent from the data). Their undefined terms count as 0.
    pub flagged_classes: Vec<usize>,
}

pub fn evaluate_predictions(predicted: &[usize], labels: &[usize], classes: usize) -> Result<EvalReport> {
    if labels.is_empty() || predicted.len() != labels.len() {
        return Err(DistillError::Contract(format!(
            "{} predictions for {} labels",
            predicted.len(),
            labels.len()
        )));
    }
    if let Some(&bad) = predicted.iter().chain(labels).find(|&&c| c >= classes) {
        return Err(DistillError::Contract(format!("class {bad} outside 0..{classes}")));
    }
    let mut confusion = vec![vec![0usize; classes]; classes];
    for (&p, &y) in predicted.iter().zip(labels) {
        confusion[y][p] += 1;
    }
    let support: Vec<usize> = confusion.iter().map(|r| r.iter().sum()).collect();
    let correct: usize = (0..classes).map(|c| confusion[c][c]).sum();

    let mut flagged = Vec::new();
    let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
    for c in 0..classes {
        let tp = confusion[c][c] as f64;
        let predicted_c: usize = confusion.iter().map(|r| r[c]).sum();
        let precision = if predicted_c > 0 { tp / predicted_c as f64 } else { 0.0 };
        let recall = if support[c] > 0 { tp / support[c] as f64 } else { 0.0 };
        if predicted_c == 0 || support[c] == 0 {
            flagged.push(c);
        }
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        p_sum += precision;
        r_sum += recall;
        f_sum += f1;
    }
    let k = classes as f64;
    Ok(EvalReport {
        accuracy: correct as f64 / labels.len() as f64,
        macro_precision: p_sum / k,
        macro_recall: r_sum / k,
        macro_f1: f_sum / k,
        confusion,
        support,
        flagged_classes: flagged,
    })
}

/// Predict every window with the head-averaged distribution and score it.
pub fn evaluate<S: Student>(model: &S, test: &[LabeledWindow]) -> Result<EvalReport> {
    let probs = predict_batch(model, test)?;
    let predicted: Vec<usize> = probs.iter().map(|p| argmax(p)).collect();
    let labels: Vec<usize> = test.iter().map(|w| w.label).collect();
    evaluate_predictions(&predicted, &labels, model.classes())
}

/// Score a single-head classifier by the argmax of its logits.
pub fn evaluate_classifier<C: Classifier>(model: &C, test: &[LabeledWindow]) -> Result<EvalReport> {
    let logits = logits_batch(model, test)?;
    let predicted: Vec<usize> = logits.iter().map(|z| argmax(z)).collect();
    let labels: Vec<usize> = test.iter().map(|w| w.label).collect();
    evaluate_predictions(&predicted, &labels, model.classes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let y = [0, 1, 2, 2, 1];
        let r = evaluate_predictions(&y, &y, 3).unwrap();
        assert_eq!((r.accuracy, r.macro_precision, r.macro_recall, r.macro_f1), (1.0, 1.0, 1.0, 1.0));
        assert!(r.flagged_classes.is_empty());
    }

    #[test]
    fn constant_predictor_flags_unpredicted_class() {
        let r = evaluate_predictions(&[0; 4], &[0, 1, 0, 1], 2).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.macro_recall, 0.5);
        assert_eq!(r.macro_precision, 0.25);
        assert_eq!(r.flagged_classes, vec![1]);
    }

    #[test]
    fn contrived_three_class_matrix() {
        // rows = truth: [3,1,0], [1,2,1], [0,0,2]
        let truth = [0, 0, 0, 0, 1, 1, 1, 1, 2, 2];
        let pred = [0, 0, 0, 1, 0, 1, 1, 2, 2, 2];
        let r = evaluate_predictions(&pred, &truth, 3).unwrap();
        assert_eq!(r.confusion, vec![vec![3, 1, 0], vec![1, 2, 1], vec![0, 0, 2]]);
        let (p, rc) = ([3.0 / 4.0, 2.0 / 3.0, 2.0 / 3.0], [3.0 / 4.0, 2.0 / 4.0, 1.0]);
        let f1: f64 = (0..3).map(|i| 2.0 * p[i] * rc[i] / (p[i] + rc[i])).sum::<f64>() / 3.0;
        assert!((r.macro_f1 - f1).abs() < 1e-9);
        assert_eq!(r.support, vec![4, 4, 2]);
        assert!((r.accuracy - 0.7).abs() < 1e-12);
    }

    #[test]
    fn absent_class_is_flagged() {
        let r = evaluate_predictions(&[0, 1], &[0, 1], 3).unwrap();
        assert_eq!(r.flagged_classes, vec![2]);
        assert!((r.macro_recall - 2.0 / 3.0).abs() < 1e-12);
    }
}
