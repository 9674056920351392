use super::adam::{adam_step, AdamConfig, AdamState};
use super::metrics::{EvalReport, UtterancePrediction};
use crate::autodiff::Tensor;
use crate::data::{Modality, VideoSample};
use crate::error::{Error, Result};
use crate::layers::{DenseLayer, Initializer, ParamStore, Session};
use crate::model::{classification_loss, predict};

/// Multinomial logistic regression on one modality's raw utterance features.
#[derive(Debug, Clone)]
pub struct LogisticBaseline {
    pub modality: Modality,
    pub params: ParamStore,
    pub layer: DenseLayer,
}

struct Rows {
    ids: Vec<String>,
    x: Tensor,
    labels: Vec<usize>,
}

fn rows(videos: &[VideoSample], m: Modality) -> Result<Rows> {
    let mut ids = Vec::new();
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    for u in videos.iter().flat_map(|v| &v.utterances) {
        let f = u
            .features
            .get(&m)
            .ok_or_else(|| Error::Contract(format!("utterance `{}` has no `{m}` features", u.utterance_id)))?;
        ids.push(u.utterance_id.clone());
        feats.push(f.clone());
        labels.push(u.label);
    }
    if feats.is_empty() {
        return Err(Error::Contract("no utterances for the logistic baseline".into()));
    }
    Ok(Rows { ids, x: Tensor::from_rows(&feats)?, labels })
}

impl LogisticBaseline {
    /// Full-batch Adam on mean cross-entropy.
    pub fn fit(train: &[VideoSample], m: Modality, num_classes: usize, steps: usize, seed: u64) -> Result<Self> {
        let data = rows(train, m)?;
        let d = data.x.shape()[1];
        let mut params = ParamStore::new();
        let layer = DenseLayer::new(&mut params, &mut Initializer::new(seed), &format!("logistic_{m}"), d, num_classes);
        let mut state = AdamState::new(&params);
        let adam = AdamConfig { learning_rate: 0.05, ..AdamConfig::default() };
        let mask = vec![true; data.labels.len()];
        for _ in 0..steps {
            let mut s = Session::new(&params);
            let x = s.constant(data.x.clone());
            let logits = layer.forward(&mut s, x)?;
            let loss = classification_loss(&mut s.graph, logits, &data.labels, &mask, &data.ids)?;
            s.graph.backward(loss)?;
            let grads = s.param_grads()?;
            drop(s);
            adam_step(&mut params, &grads, &mut state, &adam)?;
        }
        Ok(LogisticBaseline { modality: m, params, layer })
    }

    pub fn evaluate(&self, videos: &[VideoSample]) -> Result<EvalReport> {
        let data = rows(videos, self.modality)?;
        let mut s = Session::new(&self.params);
        let x = s.constant(data.x);
        let logits = self.layer.forward(&mut s, x)?;
        let preds = predict(s.graph.value(logits))?;
        let utts = data
            .ids
            .into_iter()
            .zip(data.labels)
            .zip(preds)
            .map(|((id, truth), pred)| UtterancePrediction { id, truth, pred })
            .collect();
        EvalReport::from_predictions(utts, self.layer.d_out)
    }
}

/// Test accuracy of the best single-modality logistic model, with the
/// modality that achieved it.
pub fn best_unimodal_accuracy(
    train: &[VideoSample],
    test: &[VideoSample],
    modalities: &[Modality],
    num_classes: usize,
    seed: u64,
) -> Result<(Modality, f64)> {
    let mut best: Option<(Modality, f64)> = None;
    for &m in modalities {
        let acc = LogisticBaseline::fit(train, m, num_classes, 300, seed)?.evaluate(test)?.accuracy;
        log::info!("logistic baseline on `{m}`: test accuracy {acc:.4}");
        if best.is_none_or(|(_, b)| acc > b) {
            best = Some((m, acc));
        }
    }
    best.ok_or_else(|| Error::Contract("no modalities for the baseline".into()))
}
