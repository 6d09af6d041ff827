//! Predictive and interpretability measures.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Rows are actual classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        ConfusionMatrix { counts: vec![vec![0; num_classes]; num_classes] }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if k == 0 || counts.iter().any(|r| r.len() != k) {
            return param("confusion matrix must be square and non-empty");
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn from_predictions(actual: &[usize], predicted: &[usize], num_classes: usize) -> Result<Self> {
        if actual.len() != predicted.len() {
            return param(format!("{} labels against {} predictions", actual.len(), predicted.len()));
        }
        let mut m = ConfusionMatrix::new(num_classes);
        for (&a, &p) in actual.iter().zip(predicted) {
            if a >= num_classes || p >= num_classes {
                return param(format!("class index out of range for {num_classes} classes"));
            }
            m.counts[a][p] += 1;
        }
        Ok(m)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let n = cm.total();
    if n == 0 {
        return param("accuracy of an empty confusion matrix");
    }
    Ok(cm.trace() as f64 / n as f64)
}

/// Cohen's kappa. When chance agreement is 1 the value is defined as 0.
pub fn kappa(cm: &ConfusionMatrix) -> Result<f64> {
    let n = cm.total();
    if n == 0 {
        return param("kappa of an empty confusion matrix");
    }
    let n = n as f64;
    let k = cm.counts.len();
    let po = cm.trace() as f64 / n;
    let pe: f64 = (0..k)
        .map(|i| {
            let row: u64 = cm.counts[i].iter().sum();
            let col: u64 = cm.counts.iter().map(|r| r[i]).sum();
            row as f64 * col as f64
        })
        .sum::<f64>()
        / (n * n);
    if pe >= 1.0 {
        debug!("chance agreement is 1; kappa set to 0");
        return Ok(0.0);
    }
    Ok((po - pe) / (1.0 - pe))
}

/// Rules of the grey box relative to the labeled-only white box.
pub fn relative_growth(grey_rules: usize, white_rules: usize) -> Result<f64> {
    if white_rules == 0 {
        return param("white-box rule count must be positive");
    }
    Ok(grey_rules as f64 / white_rules as f64)
}

/// Generalized logistic with upper asymptote 1 and lower asymptote 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimplicityParams {
    pub lambda: f64,
    pub eta: f64,
    pub nu: f64,
}

impl Default for SimplicityParams {
    fn default() -> Self {
        SimplicityParams { lambda: 0.1, eta: 30.0, nu: 0.5 }
    }
}

impl SimplicityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !(self.nu > 0.0) || !self.eta.is_finite() {
            return param("simplicity needs lambda > 0, nu > 0 and a finite eta");
        }
        Ok(())
    }
}

/// `1 - (1 + exp(-lambda (rules - eta)))^(-1/nu)`, evaluated with `ln_1p` and
/// `exp_m1` so large rule counts stay positive.
pub fn simplicity(rules: usize, p: &SimplicityParams) -> f64 {
    let e = (-p.lambda * (rules as f64 - p.eta)).exp();
    -(-e.ln_1p() / p.nu).exp_m1()
}

/// `alpha * (kappa + 1) / 2 + (1 - alpha) * simplicity`.
pub fn utility(kappa_value: f64, simplicity_value: f64, alpha: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&kappa_value) {
        return param(format!("kappa {kappa_value} outside [-1, 1]"));
    }
    if !(0.0..=1.0).contains(&simplicity_value) {
        return param(format!("simplicity {simplicity_value} outside [0, 1]"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return param(format!("alpha {alpha} outside [0, 1]"));
    }
    Ok(alpha * (kappa_value + 1.0) / 2.0 + (1.0 - alpha) * simplicity_value)
}
