use std::collections::BTreeMap;

use super::schema::{Modality, VideoSample};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Model input for one video: `[N×d]` features per modality plus labels and
/// the real-utterance mask (padding trails).
#[derive(Debug, Clone, PartialEq)]
pub struct VideoInput {
    pub video_id: String,
    pub utterance_ids: Vec<String>,
    pub features: BTreeMap<Modality, Tensor>,
    pub labels: Vec<usize>,
    pub mask: Vec<bool>,
}

impl VideoInput {
    pub fn from_sample(video: &VideoSample) -> Result<Self> {
        let batch = pad_batch(std::slice::from_ref(video))?;
        Ok(batch.video(0))
    }

    pub fn n(&self) -> usize {
        self.mask.len()
    }

    pub fn num_valid(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn features(&self, m: Modality) -> Result<&Tensor> {
        self.features
            .get(&m)
            .ok_or_else(|| Error::Contract(format!("video `{}` has no `{m}` features", self.video_id)))
    }

    /// Copy with `extra` trailing padded utterances holding `fill` features.
    pub fn with_padding(&self, extra: usize, fill: f64) -> Self {
        let mut out = self.clone();
        for t in out.features.values_mut() {
            let (n, d) = t.dims2().expect("video features are matrices");
            let mut data = t.data().to_vec();
            data.extend(std::iter::repeat_n(fill, extra * d));
            *t = Tensor::new(vec![n + extra, d], data).expect("consistent shape");
        }
        out.labels.extend(std::iter::repeat_n(0, extra));
        out.mask.extend(std::iter::repeat_n(false, extra));
        out.utterance_ids.extend((0..extra).map(|i| format!("<pad{i}>")));
        out
    }
}

/// Videos padded to a common utterance count.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub video_ids: Vec<String>,
    pub utterance_ids: Vec<Vec<String>>,
    /// `[B×N_max×d]` per modality.
    pub features: BTreeMap<Modality, Tensor>,
    /// `[B×N_max]`, zero at padding.
    pub labels: Vec<usize>,
    /// `[B×N_max]`, true for real utterances.
    pub mask: Vec<bool>,
    pub n_max: usize,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.video_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.video_ids.is_empty()
    }

    pub fn video(&self, b: usize) -> VideoInput {
        let n = self.n_max;
        let features = self
            .features
            .iter()
            .map(|(m, t)| {
                let d = t.shape()[2];
                let data = t.data()[b * n * d..(b + 1) * n * d].to_vec();
                (*m, Tensor::new(vec![n, d], data).expect("consistent shape"))
            })
            .collect();
        VideoInput {
            video_id: self.video_ids[b].clone(),
            utterance_ids: self.utterance_ids[b].clone(),
            features,
            labels: self.labels[b * n..(b + 1) * n].to_vec(),
            mask: self.mask[b * n..(b + 1) * n].to_vec(),
        }
    }

    /// Drops padding, returning each video's per-modality feature rows.
    pub fn unpad(&self) -> Vec<BTreeMap<Modality, Vec<Vec<f64>>>> {
        (0..self.len())
            .map(|b| {
                let v = self.video(b);
                v.features
                    .iter()
                    .map(|(m, t)| {
                        let rows = (0..v.n()).filter(|&i| v.mask[i]).map(|i| t.row(i).to_vec()).collect();
                        (*m, rows)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Pads videos to the longest one with trailing zero rows.
pub fn pad_batch(videos: &[VideoSample]) -> Result<Batch> {
    let first = videos.first().ok_or_else(|| Error::Contract("cannot batch zero videos".into()))?;
    let first_utt = first
        .utterances
        .first()
        .ok_or_else(|| Error::Contract(format!("video `{}` has no utterances", first.video_id)))?;
    let dims: BTreeMap<Modality, usize> = first_utt.features.iter().map(|(m, f)| (*m, f.len())).collect();
    let n_max = videos.iter().map(VideoSample::n).max().unwrap_or(0);
    let b = videos.len();

    let mut buffers: BTreeMap<Modality, Vec<f64>> = dims.iter().map(|(m, d)| (*m, vec![0.0; b * n_max * d])).collect();
    let mut labels = vec![0; b * n_max];
    let mut mask = vec![false; b * n_max];
    let mut utterance_ids = Vec::with_capacity(b);
    for (vi, video) in videos.iter().enumerate() {
        let mut ids = Vec::with_capacity(n_max);
        for (ui, u) in video.utterances.iter().enumerate() {
            let slot = vi * n_max + ui;
            for (m, d) in &dims {
                let f = u.features.get(m).filter(|f| f.len() == *d).ok_or_else(|| {
                    Error::Dimension(format!("utterance `{}` does not match batch dims {dims:?}", u.utterance_id))
                })?;
                buffers.get_mut(m).expect("known modality")[slot * d..(slot + 1) * d].copy_from_slice(f);
            }
            if u.features.len() != dims.len() {
                return Err(Error::Dimension(format!("utterance `{}` has extra modalities", u.utterance_id)));
            }
            labels[slot] = u.label;
            mask[slot] = true;
            ids.push(u.utterance_id.clone());
        }
        ids.extend((video.n()..n_max).map(|i| format!("<pad{i}>")));
        utterance_ids.push(ids);
    }
    let features = buffers
        .into_iter()
        .map(|(m, data)| (m, Tensor::new(vec![b, n_max, dims[&m]], data).expect("consistent shape")))
        .collect();
    Ok(Batch {
        video_ids: videos.iter().map(|v| v.video_id.clone()).collect(),
        utterance_ids,
        features,
        labels,
        mask,
        n_max,
    })
}
