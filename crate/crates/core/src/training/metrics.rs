use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtterancePrediction {
    pub id: String,
    #[serde(rename = "true")]
    pub truth: usize,
    pub pred: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub support: usize,
    /// Zero when the class is never predicted.
    pub precision: f64,
    /// Zero when the class never occurs.
    pub recall: f64,
}

/// Classification report. `weighted_accuracy` is support-weighted
/// per-class recall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub num_utterances: usize,
    pub accuracy: f64,
    pub weighted_accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    /// `confusion[true][pred]`.
    pub confusion: Vec<Vec<usize>>,
    pub utterances: Vec<UtterancePrediction>,
}

impl EvalReport {
    pub fn from_predictions(utterances: Vec<UtterancePrediction>, num_classes: usize) -> Result<Self> {
        if utterances.is_empty() {
            return Err(Error::Contract("cannot evaluate on zero utterances".into()));
        }
        let mut confusion = vec![vec![0usize; num_classes]; num_classes];
        for u in &utterances {
            if u.truth >= num_classes || u.pred >= num_classes {
                return Err(Error::Data(format!(
                    "utterance `{}` has label {} / prediction {} outside {num_classes} classes",
                    u.id, u.truth, u.pred
                )));
            }
            confusion[u.truth][u.pred] += 1;
        }
        let n = utterances.len();
        let correct: usize = (0..num_classes).map(|c| confusion[c][c]).sum();
        let per_class: Vec<ClassMetrics> = (0..num_classes)
            .map(|c| {
                let support: usize = confusion[c].iter().sum();
                let predicted: usize = confusion.iter().map(|row| row[c]).sum();
                let tp = confusion[c][c] as f64;
                ClassMetrics {
                    class: c,
                    support,
                    precision: if predicted == 0 { 0.0 } else { tp / predicted as f64 },
                    recall: if support == 0 { 0.0 } else { tp / support as f64 },
                }
            })
            .collect();
        let weighted_accuracy = per_class.iter().map(|m| m.support as f64 / n as f64 * m.recall).sum();
        Ok(EvalReport {
            num_utterances: n,
            accuracy: correct as f64 / n as f64,
            weighted_accuracy,
            per_class,
            confusion,
            utterances,
        })
    }

    pub fn predictions(&self) -> Vec<usize> {
        self.utterances.iter().map(|u| u.pred).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.utterances.iter().map(|u| u.truth).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    /// Pairs where only system A is right.
    pub n_plus: usize,
    /// Pairs where only system B is right.
    pub n_minus: usize,
    pub p_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// `ln C(n, k)` as a sum of logs.
fn ln_choose(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// Two-sided exact binomial tail `2·Σ_{k≤min(n₊,n₋)} C(n,k)/2ⁿ`, clamped to 1.
pub fn sign_test_counts(n_plus: usize, n_minus: usize) -> SignTest {
    let n = n_plus + n_minus;
    if n == 0 {
        return SignTest { n_plus, n_minus, p_value: 1.0, note: Some("no discordant pairs".into()) };
    }
    let terms: Vec<f64> = (0..=n_plus.min(n_minus)).map(|k| ln_choose(n, k)).collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ln_sum = top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln();
    let p = (std::f64::consts::LN_2 + ln_sum - n as f64 * std::f64::consts::LN_2).exp();
    SignTest { n_plus, n_minus, p_value: p.min(1.0), note: None }
}

/// Paired sign test of system A against system B; pairs where both are
/// right or both wrong are dropped.
pub fn sign_test(preds_a: &[usize], preds_b: &[usize], labels: &[usize]) -> Result<SignTest> {
    if preds_a.len() != labels.len() || preds_b.len() != labels.len() {
        return Err(Error::Contract(format!(
            "sign test needs paired predictions: {} / {} / {} entries",
            preds_a.len(),
            preds_b.len(),
            labels.len()
        )));
    }
    let mut n_plus = 0;
    let mut n_minus = 0;
    for ((a, b), y) in preds_a.iter().zip(preds_b).zip(labels) {
        match (a == y, b == y) {
            (true, false) => n_plus += 1,
            (false, true) => n_minus += 1,
            _ => {}
        }
    }
    Ok(sign_test_counts(n_plus, n_minus))
}
