use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::config::TrainConfig;
use super::metrics::{EvalReport, UtterancePrediction};
use crate::data::{Schema, VideoInput, VideoSample};
use crate::error::{Error, Result};
use crate::layers::{DropoutState, Session};
use crate::model::{predict, Direction, JointLossWeights, TransModality};

/// SplitMix64 finalizer over `base` and `parts`, for per-step RNG streams.
pub(crate) fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ p))
}

/// Fresh model for `schema` with the config's architecture and seed.
pub fn build_model(cfg: &TrainConfig, schema: &Schema) -> Result<TransModality> {
    TransModality::new(&cfg.model, &schema.dims, schema.num_classes, cfg.seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Joint loss averaged over training utterances.
    pub train_loss: f64,
    pub cls_loss: f64,
    /// Per-direction translation losses, in [`History::directions`] order.
    pub trans_losses: Vec<f64>,
    pub valid_loss: f64,
    pub valid_weighted_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub directions: Vec<Direction>,
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut header = vec!["epoch".to_string(), "train_loss".into(), "cls_loss".into()];
        header.extend(self.directions.iter().map(|d| format!("trans_{}", d.key())));
        header.extend(["valid_loss".into(), "valid_weighted_acc".into()]);
        let mut out = header.join(",") + "\n";
        for r in &self.records {
            let mut cells = vec![r.epoch.to_string(), r.train_loss.to_string(), r.cls_loss.to_string()];
            cells.extend(r.trans_losses.iter().map(f64::to_string));
            cells.extend([r.valid_loss.to_string(), r.valid_weighted_acc.to_string()]);
            out += &(cells.join(",") + "\n");
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation weighted accuracy.
    pub model: TransModality,
    pub history: History,
}

struct VideoStep {
    grads: Vec<Vec<f64>>,
    joint: f64,
    cls: f64,
    trans: Vec<f64>,
    valid: usize,
}

fn inputs(videos: &[VideoSample]) -> Result<Vec<VideoInput>> {
    videos.iter().map(VideoInput::from_sample).collect()
}

fn video_step(
    model: &TransModality,
    video: &VideoInput,
    weights: &JointLossWeights,
    share: f64,
    dropout: DropoutState,
) -> Result<VideoStep> {
    let mut s = Session::training(&model.params, dropout);
    let loss = model.video_loss(&mut s, video, weights)?;
    let joint = s.graph.value(loss.joint).item();
    if !joint.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss on video `{}`", video.video_id)));
    }
    let scaled = s.graph.scale(loss.joint, share);
    s.graph.backward(scaled)?;
    Ok(VideoStep {
        grads: s.param_grads()?,
        joint,
        cls: s.graph.value(loss.cls).item(),
        trans: loss.trans.iter().map(|(_, v)| s.graph.value(*v).item()).collect(),
        valid: video.num_valid(),
    })
}

/// Per-utterance predictions and the utterance-averaged joint loss, with
/// dropout off.
fn score(model: &TransModality, videos: &[VideoInput], weights: &JointLossWeights) -> Result<(Vec<UtterancePrediction>, f64)> {
    let per_video = videos
        .par_iter()
        .map(|video| {
            let mut s = Session::new(&model.params);
            let loss = model.video_loss(&mut s, video, weights)?;
            let preds = predict(s.graph.value(loss.logits))?;
            let rows: Vec<UtterancePrediction> = (0..video.n())
                .filter(|&i| video.mask[i])
                .map(|i| UtterancePrediction { id: video.utterance_ids[i].clone(), truth: video.labels[i], pred: preds[i] })
                .collect();
            Ok((rows, s.graph.value(loss.joint).item() * video.num_valid() as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut total = 0.0;
    for (r, l) in per_video {
        rows.extend(r);
        total += l;
    }
    let n = rows.len().max(1) as f64;
    Ok((rows, total / n))
}

/// Predictions of `model` on `videos` (dropout off).
pub fn evaluate(model: &TransModality, videos: &[VideoSample]) -> Result<EvalReport> {
    if videos.is_empty() {
        return Err(Error::Contract("cannot evaluate on zero videos".into()));
    }
    let (rows, _) = score(model, &inputs(videos)?, &JointLossWeights::default())?;
    EvalReport::from_predictions(rows, model.num_classes)
}

/// Adam on the joint loss, averaged over the valid utterances of each
/// batch of videos. Stops after `patience` epochs without a gain in
/// validation weighted accuracy and returns the best parameters. With no
/// validation videos, the training set is used for selection.
pub fn train(mut model: TransModality, train: &[VideoSample], valid: &[VideoSample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Contract("training split is empty".into()));
    }
    let train_in = inputs(train)?;
    let valid_in = if valid.is_empty() {
        log::warn!("no validation videos; selecting the model on the training split");
        train_in.clone()
    } else {
        inputs(valid)?
    };
    let adam = AdamConfig { learning_rate: cfg.learning_rate, beta1: cfg.beta1, beta2: cfg.beta2, eps: cfg.adam_eps };
    let mut state = AdamState::new(&model.params);
    let directions = model.directions();
    let total_utts: usize = train_in.iter().map(VideoInput::num_valid).sum();

    let mut history = History { directions: directions.clone(), records: Vec::new(), best_epoch: 0 };
    let mut best: Option<(f64, crate::layers::ParamStore)> = None;
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..train_in.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[1, epoch as u64])));
        let mut sums = (0.0, 0.0, vec![0.0; directions.len()]);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let batch_utts: usize = batch.iter().map(|&i| train_in[i].num_valid()).sum();
            let steps = batch
                .par_iter()
                .map(|&i| {
                    let video = &train_in[i];
                    let seed = derive_seed(cfg.seed, &[2, epoch as u64, i as u64]);
                    let share = video.num_valid() as f64 / batch_utts as f64;
                    video_step(&model, video, &cfg.weights, share, DropoutState::new(cfg.model.dropout, seed))
                })
                .collect::<Vec<_>>();
            let mut grads: Option<Vec<Vec<f64>>> = None;
            for step in steps {
                let step = step.map_err(|e| match e {
                    Error::Numeric(msg) => Error::Numeric(format!("epoch {epoch}, batch {b}: {msg}")),
                    other => other,
                })?;
                let w = step.valid as f64;
                sums.0 += step.joint * w;
                sums.1 += step.cls * w;
                for (acc, t) in sums.2.iter_mut().zip(&step.trans) {
                    *acc += t * w;
                }
                match grads.as_mut() {
                    None => grads = Some(step.grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&step.grads) {
                            for (x, y) in a.iter_mut().zip(g) {
                                *x += y;
                            }
                        }
                    }
                }
            }
            let grads = grads.expect("non-empty batch");
            adam_step(&mut model.params, &grads, &mut state, &adam)
                .map_err(|e| match e {
                    Error::Training(msg) => Error::Training(format!("epoch {epoch}, batch {b}: {msg}")),
                    other => other,
                })?;
        }

        let (rows, valid_loss) = score(&model, &valid_in, &cfg.weights)?;
        let report = EvalReport::from_predictions(rows, model.num_classes)?;
        let n = total_utts as f64;
        let record = EpochRecord {
            epoch,
            train_loss: sums.0 / n,
            cls_loss: sums.1 / n,
            trans_losses: sums.2.iter().map(|x| x / n).collect(),
            valid_loss,
            valid_weighted_acc: report.weighted_accuracy,
        };
        log::info!(
            "epoch {epoch}: train loss {:.5} (cls {:.5}), valid loss {:.5}, valid wacc {:.4}",
            record.train_loss,
            record.cls_loss,
            record.valid_loss,
            record.valid_weighted_acc
        );
        history.records.push(record);

        if best.as_ref().is_none_or(|(acc, _)| report.weighted_accuracy > *acc) {
            best = Some((report.weighted_accuracy, model.params.clone()));
            history.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                log::info!("early stop after epoch {epoch}; best epoch {}", history.best_epoch);
                break;
            }
        }
    }
    if let Some((_, params)) = best {
        model.params = params;
    }
    Ok(TrainOutcome { model, history })
}
