use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::schema::{Modality, UtteranceRecord, VideoSample};
use crate::error::{Error, Result};

/// Settings for the XOR-fusion task: each utterance draws independent bits
/// for text and audio, and its label is their XOR.
#[derive(Debug, Clone, PartialEq)]
pub struct XorFusionParams {
    pub num_videos: usize,
    pub utterances: usize,
    pub d_t: usize,
    pub d_a: usize,
    /// Magnitude of the class-dependent mean on the first coordinate.
    pub separation: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for XorFusionParams {
    fn default() -> Self {
        XorFusionParams { num_videos: 500, utterances: 5, d_t: 4, d_a: 4, separation: 2.0, noise: 1.0, seed: 7 }
    }
}

fn features(rng: &mut ChaCha8Rng, bit: bool, d: usize, p: &XorFusionParams) -> Vec<f64> {
    let mut f: Vec<f64> = (0..d).map(|_| p.noise * rng.sample::<f64, _>(StandardNormal)).collect();
    f[0] += if bit { p.separation } else { -p.separation };
    f
}

pub fn generate_xor_fusion(p: &XorFusionParams) -> Result<Vec<VideoSample>> {
    if p.d_t < 2 || p.d_a < 2 {
        return Err(Error::Config(format!("xor_fusion needs dims >= 2, got d_t={} d_a={}", p.d_t, p.d_a)));
    }
    if p.utterances == 0 {
        return Err(Error::Config("xor_fusion needs at least one utterance per video".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let videos = (0..p.num_videos)
        .map(|vi| {
            let video_id = format!("xor{vi:05}");
            let utterances = (0..p.utterances)
                .map(|ui| {
                    let s_t: bool = rng.random();
                    let s_a: bool = rng.random();
                    let mut feats = BTreeMap::new();
                    feats.insert(Modality::Text, features(&mut rng, s_t, p.d_t, p));
                    feats.insert(Modality::Acoustic, features(&mut rng, s_a, p.d_a, p));
                    UtteranceRecord {
                        utterance_id: format!("{video_id}_u{ui}"),
                        features: feats,
                        label: usize::from(s_t ^ s_a),
                    }
                })
                .collect();
            VideoSample { video_id, utterances }
        })
        .collect();
    Ok(videos)
}
