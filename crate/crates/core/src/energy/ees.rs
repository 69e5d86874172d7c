use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{EnergyError, ModelMetrics, Result};

pub const AER_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EesWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl EesWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let w = Self { alpha, beta, gamma };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.alpha, self.beta, self.gamma];
        if parts.iter().any(|v| !(*v >= 0.0)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(EnergyError::Contract(format!(
                "weights must be non-negative and sum to 1, got {parts:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Balanced,
    MemorySaving,
    PowerSaving,
    StorageOptimized,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Self::Balanced, Self::MemorySaving, Self::PowerSaving, Self::StorageOptimized];

    pub fn weights(self) -> EesWeights {
        let (alpha, beta, gamma) = match self {
            Self::Balanced => (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
            Self::MemorySaving => (0.2, 0.5, 0.3),
            Self::PowerSaving => (0.7, 0.2, 0.1),
            Self::StorageOptimized => (0.2, 0.2, 0.6),
        };
        EesWeights { alpha, beta, gamma }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Balanced => "balanced",
            Self::MemorySaving => "memory_saving",
            Self::PowerSaving => "power_saving",
            Self::StorageOptimized => "storage_optimized",
        }
    }
}

impl FromStr for Preset {
    type Err = EnergyError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| EnergyError::UnknownPreset(s.to_string()))
    }
}

/// `log(1 + v)` then min-max scaling to `[0, 1]`; a constant column maps to 0.
pub fn normalize_column(values: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = values.iter().map(|v| v.ln_1p()).collect();
    let min = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return vec![0.0; values.len()];
    }
    logs.iter().map(|v| (v - min) / (max - min)).collect()
}

fn columns(metrics: &[ModelMetrics]) -> Result<[Vec<f64>; 3]> {
    if metrics.is_empty() {
        return Err(EnergyError::Contract("at least one model is required".into()));
    }
    for m in metrics {
        m.validate()?;
    }
    let col = |f: fn(&ModelMetrics) -> f64| normalize_column(&metrics.iter().map(f).collect::<Vec<_>>());
    Ok([col(|m| m.flops), col(|m| m.heap_mb), col(|m| m.footprint_mb)])
}

/// Energy-efficiency score per model, in input order. Lower is better.
pub fn compute_ees(metrics: &[ModelMetrics], w: &EesWeights) -> Result<Vec<f64>> {
    w.validate()?;
    let [f, h, s] = columns(metrics)?;
    Ok((0..metrics.len())
        .map(|i| w.alpha * f[i] + w.beta * h[i] + w.gamma * s[i])
        .collect())
}

pub fn compute_aer(ees: f64, accuracy: f64) -> f64 {
    accuracy / (ees + AER_EPS)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EesRow {
    pub name: String,
    pub flops_norm: f64,
    pub heap_norm: f64,
    pub footprint_norm: f64,
    pub ees: f64,
    pub accuracy: f64,
    pub aer: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EesReport {
    pub preset: String,
    pub weights: EesWeights,
    /// Sorted by AER, highest first; ties by name.
    pub rows: Vec<EesRow>,
}

pub fn report(metrics: &[ModelMetrics], preset: &str, w: &EesWeights) -> Result<EesReport> {
    let ees = compute_ees(metrics, w)?;
    let [f, h, s] = columns(metrics)?;
    let mut rows: Vec<EesRow> = metrics
        .iter()
        .enumerate()
        .map(|(i, m)| EesRow {
            name: m.name.clone(),
            flops_norm: f[i],
            heap_norm: h[i],
            footprint_norm: s[i],
            ees: ees[i],
            accuracy: m.accuracy,
            aer: compute_aer(ees[i], m.accuracy),
        })
        .collect();
    rows.sort_by(|a, b| b.aer.total_cmp(&a.aer).then_with(|| a.name.cmp(&b.name)));
    Ok(EesReport {
        preset: preset.to_string(),
        weights: *w,
        rows,
    })
}

impl EesReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("preset,model,flops_norm,heap_norm,footprint_norm,ees,accuracy,aer\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                self.preset, r.name, r.flops_norm, r.heap_norm, r.footprint_norm, r.ees, r.accuracy, r.aer
            );
        }
        out
    }

    pub fn to_table(&self) -> String {
        let w = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(5);
        let mut out = format!(
            "{} (alpha={:.3}, beta={:.3}, gamma={:.3})\n{:<w$}  {:>8}  {:>8}  {:>9}  {:>8}  {:>8}  {:>10}\n",
            self.preset, self.weights.alpha, self.weights.beta, self.weights.gamma, "model", "flops", "heap", "footprint", "ees", "accuracy", "aer"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<w$}  {:>8.4}  {:>8.4}  {:>9.4}  {:>8.4}  {:>8.3}  {:>10.2}",
                r.name, r.flops_norm, r.heap_norm, r.footprint_norm, r.ees, r.accuracy, r.aer
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(name: &str, f: f64, h: f64, s: f64, acc: f64) -> ModelMetrics {
        ModelMetrics {
            name: name.into(),
            flops: f,
            heap_mb: h,
            footprint_mb: s,
            accuracy: acc,
        }
    }

    #[test]
    fn single_model_scores_zero() {
        let ees = compute_ees(&[m("a", 10.0, 5.0, 1.0, 0.9)], &Preset::Balanced.weights()).unwrap();
        assert_eq!(ees, vec![0.0]);
        assert!((compute_aer(0.0, 0.9) / 0.9e6 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extremes_score_zero_and_one() {
        let set = [m("lo", 1.0, 1.0, 1.0, 0.5), m("mid", 5.0, 2.0, 9.0, 0.5), m("hi", 10.0, 3.0, 20.0, 0.5)];
        let ees = compute_ees(&set, &Preset::MemorySaving.weights()).unwrap();
        assert_eq!(ees[0], 0.0);
        assert!((ees[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn presets() {
        for p in Preset::ALL {
            p.weights().validate().unwrap();
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert_eq!(Preset::PowerSaving.weights().alpha, 0.7);
        let mem = Preset::MemorySaving.weights();
        assert!(mem.beta > mem.alpha && mem.beta > mem.gamma);
        assert!(matches!("eco".parse::<Preset>(), Err(EnergyError::UnknownPreset(_))));
    }

    #[test]
    fn negative_metric_rejected() {
        let set = [m("a", -1.0, 1.0, 1.0, 0.5)];
        assert!(compute_ees(&set, &Preset::Balanced.weights()).is_err());
        assert!(EesWeights::new(0.5, 0.5, 0.5).is_err());
    }

    #[test]
    fn report_sorted_by_aer() {
        let set = [m("a", 1.0, 1.0, 1.0, 0.5), m("b", 10.0, 3.0, 20.0, 0.9), m("c", 5.0, 2.0, 9.0, 0.8)];
        let r = report(&set, "balanced", &Preset::Balanced.weights()).unwrap();
        assert!(r.rows.windows(2).all(|w| w[0].aer >= w[1].aer));
        assert_eq!(r.rows[0].name, "a");
        assert_eq!(r.to_csv().lines().count(), 4);
        assert_eq!(r.to_table().lines().count(), 5);
    }
}
