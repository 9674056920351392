use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "t")]
    Text,
    #[serde(rename = "v")]
    Visual,
    #[serde(rename = "a")]
    Acoustic,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Text, Modality::Visual, Modality::Acoustic];

    pub fn key(self) -> &'static str {
        match self {
            Modality::Text => "t",
            Modality::Visual => "v",
            Modality::Acoustic => "a",
        }
    }

    /// Parses a comma-separated list such as `t,v,a`, keeping order.
    pub fn parse_list(s: &str) -> Result<Vec<Modality>> {
        let mods: Vec<Modality> = s.split(',').map(|p| p.trim().parse()).collect::<Result<_>>()?;
        for (i, m) in mods.iter().enumerate() {
            if mods[..i].contains(m) {
                return Err(Error::Config(format!("modality `{m}` listed twice in `{s}`")));
            }
        }
        Ok(mods)
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t" => Ok(Modality::Text),
            "v" => Ok(Modality::Visual),
            "a" => Ok(Modality::Acoustic),
            other => Err(Error::Schema(format!("unknown modality key `{other}` (expected t, v or a)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceRecord {
    pub utterance_id: String,
    pub features: BTreeMap<Modality, Vec<f64>>,
    pub label: usize,
}

/// One video: its utterances in temporal order.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSample {
    pub video_id: String,
    pub utterances: Vec<UtteranceRecord>,
}

impl VideoSample {
    pub fn n(&self) -> usize {
        self.utterances.len()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.utterances.iter().map(|u| u.label).collect()
    }
}

/// What every utterance in a dataset shares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub modalities: Vec<Modality>,
    pub dims: BTreeMap<Modality, usize>,
    pub num_classes: usize,
}

impl Schema {
    pub fn dim(&self, m: Modality) -> Result<usize> {
        self.dims
            .get(&m)
            .copied()
            .ok_or_else(|| Error::Schema(format!("dataset has no `{m}` features")))
    }

    /// Infers dims, modality set and class count from videos, rejecting
    /// inconsistent records.
    pub fn infer<'a>(videos: impl IntoIterator<Item = &'a VideoSample>, declared_classes: Option<usize>) -> Result<Schema> {
        let mut dims: Option<BTreeMap<Modality, usize>> = None;
        let mut max_label = None;
        for video in videos {
            if video.utterances.is_empty() {
                return Err(Error::Schema(format!("video `{}` has no utterances", video.video_id)));
            }
            for u in &video.utterances {
                let these: BTreeMap<Modality, usize> = u.features.iter().map(|(m, f)| (*m, f.len())).collect();
                match &dims {
                    None => dims = Some(these),
                    Some(expected) if *expected != these => {
                        return Err(Error::Schema(format!(
                            "utterance `{}` of video `{}` has feature dims {} but the dataset uses {}",
                            u.utterance_id,
                            video.video_id,
                            describe(&these),
                            describe(expected)
                        )))
                    }
                    Some(_) => {}
                }
                if u.features.values().flatten().any(|x| !x.is_finite()) {
                    return Err(Error::Schema(format!("utterance `{}` has non-finite features", u.utterance_id)));
                }
                max_label = max_label.max(Some(u.label));
            }
        }
        let dims = dims.ok_or_else(|| Error::Schema("dataset has no videos".into()))?;
        if dims.is_empty() {
            return Err(Error::Schema("utterances carry no modality features".into()));
        }
        let inferred = max_label.map_or(0, |l| l + 1);
        let num_classes = match declared_classes {
            Some(c) if c < inferred => {
                return Err(Error::Schema(format!("label {} outside the declared {c} classes", inferred - 1)))
            }
            Some(c) => c,
            None => inferred,
        };
        Ok(Schema { modalities: dims.keys().copied().collect(), dims, num_classes })
    }
}

fn describe(dims: &BTreeMap<Modality, usize>) -> String {
    let parts: Vec<String> = dims.iter().map(|(m, d)| format!("{m}={d}")).collect();
    format!("{{{}}}", parts.join(", "))
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<VideoSample>,
    pub valid: Vec<VideoSample>,
    pub test: Vec<VideoSample>,
    pub schema: Schema,
}

impl Dataset {
    pub fn all_videos(&self) -> impl Iterator<Item = &VideoSample> {
        self.train.iter().chain(&self.valid).chain(&self.test)
    }

    pub fn num_utterances(&self) -> usize {
        self.all_videos().map(VideoSample::n).sum()
    }
}
