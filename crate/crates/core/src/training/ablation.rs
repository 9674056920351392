use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::metrics::{sign_test, SignTest};
use super::train::{build_model, evaluate, train};
use crate::data::Dataset;
use crate::error::{Error, Result};

pub const WITH_BACKWARD: &str = "with_backward";
pub const WITHOUT_BACKWARD: &str = "without_backward";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRun {
    pub variant: String,
    pub seed: u64,
    pub accuracy: Option<f64>,
    pub weighted_accuracy: Option<f64>,
    pub error: Option<String>,
    #[serde(skip)]
    predictions: Vec<usize>,
    #[serde(skip)]
    labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: String,
    pub completed: usize,
    pub mean_weighted_accuracy: f64,
    pub sd_weighted_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub seeds: Vec<u64>,
    pub runs: Vec<AblationRun>,
    pub summary: Vec<VariantSummary>,
    /// With-backward (A) against without-backward (B) on test predictions
    /// pooled over seeds where both variants finished.
    pub sign_test: SignTest,
    /// True when some run failed.
    pub partial: bool,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() < 2 { 0.0 } else { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() };
    (mean, sd)
}

fn run_one(dataset: &Dataset, cfg: &TrainConfig, backward: bool, seed: u64) -> AblationRun {
    let variant = if backward { WITH_BACKWARD } else { WITHOUT_BACKWARD }.to_string();
    let mut cfg = cfg.clone();
    cfg.seed = seed;
    cfg.model.backward = backward;
    let result = build_model(&cfg, &dataset.schema)
        .and_then(|m| train(m, &dataset.train, &dataset.valid, &cfg))
        .and_then(|out| evaluate(&out.model, &dataset.test));
    match result {
        Ok(report) => {
            log::info!("{variant} seed {seed}: test weighted accuracy {:.4}", report.weighted_accuracy);
            AblationRun {
                variant,
                seed,
                accuracy: Some(report.accuracy),
                weighted_accuracy: Some(report.weighted_accuracy),
                error: None,
                predictions: report.predictions(),
                labels: report.labels(),
            }
        }
        Err(e) => {
            log::error!("{variant} seed {seed} failed: {e}");
            AblationRun {
                variant,
                seed,
                accuracy: None,
                weighted_accuracy: None,
                error: Some(e.to_string()),
                predictions: Vec::new(),
                labels: Vec::new(),
            }
        }
    }
}

/// Trains both variants for every seed and compares their test scores.
/// Failed runs are recorded and the rest still reported.
pub fn run_ablation(dataset: &Dataset, cfg: &TrainConfig, seeds: &[u64]) -> Result<AblationReport> {
    cfg.validate()?;
    if seeds.is_empty() {
        return Err(Error::Config("ablation needs at least one seed".into()));
    }
    if dataset.test.is_empty() {
        return Err(Error::Contract("ablation needs test videos".into()));
    }
    let jobs: Vec<(bool, u64)> = [true, false].iter().flat_map(|&b| seeds.iter().map(move |&s| (b, s))).collect();
    let runs: Vec<AblationRun> = jobs.par_iter().map(|&(b, s)| run_one(dataset, cfg, b, s)).collect();

    let summary = [WITH_BACKWARD, WITHOUT_BACKWARD]
        .iter()
        .map(|v| {
            let scores: Vec<f64> = runs.iter().filter(|r| r.variant == *v).filter_map(|r| r.weighted_accuracy).collect();
            let (mean, sd) = mean_sd(&scores);
            VariantSummary {
                variant: v.to_string(),
                completed: scores.len(),
                mean_weighted_accuracy: mean,
                sd_weighted_accuracy: sd,
            }
        })
        .collect();

    let (mut a, mut b, mut y) = (Vec::new(), Vec::new(), Vec::new());
    let k = seeds.len();
    for (with, without) in runs[..k].iter().zip(&runs[k..]) {
        if with.error.is_none() && without.error.is_none() {
            a.extend(&with.predictions);
            b.extend(&without.predictions);
            y.extend(&with.labels);
        }
    }
    let partial = runs.iter().any(|r| r.error.is_some());
    Ok(AblationReport { seeds: seeds.to_vec(), runs, summary, sign_test: sign_test(&a, &b, &y)?, partial })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "".into(), |v| format!("{v:.6}"))
}

impl AblationReport {
    pub fn runs_csv(&self) -> String {
        let mut out = String::from("variant,seed,accuracy,weighted_accuracy,error\n");
        for r in &self.runs {
            let err = r.error.as_deref().unwrap_or("").replace(['"', '\n'], " ");
            out += &format!("{},{},{},{},\"{err}\"\n", r.variant, r.seed, opt(r.accuracy), opt(r.weighted_accuracy));
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("variant,completed,mean_weighted_accuracy,sd_weighted_accuracy,sign_test_p\n");
        for s in &self.summary {
            out += &format!(
                "{},{},{:.6},{:.6},{:.6}\n",
                s.variant, s.completed, s.mean_weighted_accuracy, s.sd_weighted_accuracy, self.sign_test.p_value
            );
        }
        out
    }

    pub fn markdown(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let mut out = format!("# Backward translation ablation\n\nSeeds: {}\n\n", seeds.join(", "));
        out += "| Variant | Runs | Weighted accuracy (mean ± sd) | Sign test p |\n|---|---|---|---|\n";
        for s in &self.summary {
            out += &format!(
                "| {} | {}/{} | {:.4} ± {:.4} | {:.4} |\n",
                s.variant,
                s.completed,
                self.seeds.len(),
                s.mean_weighted_accuracy,
                s.sd_weighted_accuracy,
                self.sign_test.p_value
            );
        }
        out += &format!(
            "\nSign test: n+ = {} (only with-backward right), n- = {} (only without-backward right), p = {:.6}",
            self.sign_test.n_plus, self.sign_test.n_minus, self.sign_test.p_value
        );
        if let Some(note) = &self.sign_test.note {
            out += &format!(" ({note})");
        }
        out += "\n\n| Variant | Seed | Accuracy | Weighted accuracy |\n|---|---|---|---|\n";
        for r in &self.runs {
            let wa = r.error.as_ref().map_or_else(|| opt(r.weighted_accuracy), |e| format!("failed: {e}"));
            out += &format!("| {} | {} | {} | {} |\n", r.variant, r.seed, opt(r.accuracy), wa);
        }
        if self.partial {
            out += "\nSome runs failed; the summary covers completed runs only.\n";
        }
        out
    }
}
