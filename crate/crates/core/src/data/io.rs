//! On-disk layout: a JSON manifest naming one JSON-lines file per video,
//! one utterance per line:
//!
//! ```text
//! {"id": "u1", "label": 1, "t": [..], "v": [..], "a": [..]}
//! ```
//!
//! Files ending in `.gz` are gzip-compressed.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::schema::{Dataset, Modality, Schema, UtteranceRecord, VideoSample};
use crate::error::{Error, Result};

pub const MANIFEST_FORMAT: &str = "transmodality-manifest";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoEntry {
    pub id: String,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Declared {
    pub videos: usize,
    pub utterances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_classes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared: Option<Declared>,
    pub train: Vec<VideoEntry>,
    #[serde(default)]
    pub valid: Vec<VideoEntry>,
    #[serde(default)]
    pub test: Vec<VideoEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading manifest {}", path.display()), e))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::Schema(format!("malformed manifest {}: {e}", path.display())))?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(Error::Schema(format!("manifest format `{}` is not `{MANIFEST_FORMAT}`", manifest.format)));
        }
        if manifest.version != 1 {
            return Err(Error::Schema(format!("unsupported manifest version {}", manifest.version)));
        }
        Ok(manifest)
    }
}

fn open_lines(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    Ok(Box::new(BufReader::new(reader)))
}

fn parse_utterance(line: &str, video_id: &str, line_no: usize) -> Result<UtteranceRecord> {
    let at = || format!("video `{video_id}` line {line_no}");
    let value: Value = serde_json::from_str(line).map_err(|e| Error::Schema(format!("{}: {e}", at())))?;
    let Value::Object(map) = value else {
        return Err(Error::Schema(format!("{}: expected a JSON object", at())));
    };
    let mut id = None;
    let mut label = None;
    let mut features = BTreeMap::new();
    for (key, v) in map {
        match key.as_str() {
            "id" => id = Some(v.as_str().ok_or_else(|| Error::Schema(format!("{}: `id` must be a string", at())))?.to_owned()),
            "label" => {
                label = Some(v.as_u64().ok_or_else(|| {
                    Error::Data(format!("{}: label {v} is not a non-negative integer", at()))
                })? as usize)
            }
            other => {
                let modality: Modality = other
                    .parse()
                    .map_err(|_| Error::Schema(format!("{}: unknown modality key `{other}`", at())))?;
                let Value::Array(items) = v else {
                    return Err(Error::Schema(format!("{}: `{other}` must be an array", at())));
                };
                let vals = items
                    .iter()
                    .map(|x| x.as_f64().ok_or_else(|| Error::Schema(format!("{}: non-numeric `{other}` feature", at()))))
                    .collect::<Result<Vec<f64>>>()?;
                features.insert(modality, vals);
            }
        }
    }
    Ok(UtteranceRecord {
        utterance_id: id.ok_or_else(|| Error::Schema(format!("{}: missing `id`", at())))?,
        label: label.ok_or_else(|| Error::Schema(format!("{}: missing `label`", at())))?,
        features,
    })
}

pub fn read_video(path: &Path, video_id: &str) -> Result<VideoSample> {
    let mut utterances = Vec::new();
    for (i, line) in open_lines(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        utterances.push(parse_utterance(&line, video_id, i + 1)?);
    }
    if utterances.is_empty() {
        return Err(Error::Schema(format!("video `{video_id}` ({}) has no utterances", path.display())));
    }
    Ok(VideoSample { video_id: video_id.to_owned(), utterances })
}

fn load_split(base: &Path, entries: &[VideoEntry]) -> Result<Vec<VideoSample>> {
    entries.par_iter().map(|e| read_video(&base.join(&e.file), &e.id)).collect()
}

/// Loads and validates the dataset a manifest describes.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let manifest = Manifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let mut seen = HashSet::new();
    for e in manifest.train.iter().chain(&manifest.valid).chain(&manifest.test) {
        if !seen.insert(e.id.as_str()) {
            return Err(Error::Schema(format!("video id `{}` appears more than once across splits", e.id)));
        }
    }

    let train = load_split(base, &manifest.train)?;
    let valid = load_split(base, &manifest.valid)?;
    let test = load_split(base, &manifest.test)?;
    let schema = Schema::infer(train.iter().chain(&valid).chain(&test), manifest.num_classes)?;
    let dataset = Dataset { train, valid, test, schema };

    if let Some(declared) = &manifest.declared {
        let videos = dataset.all_videos().count();
        let utterances = dataset.num_utterances();
        if videos != declared.videos || utterances != declared.utterances {
            return Err(Error::Schema(format!(
                "manifest declares {} videos / {} utterances, found {videos} / {utterances}",
                declared.videos, declared.utterances
            )));
        }
    }
    log::info!(
        "loaded {} videos ({} utterances), {} classes, dims {:?}",
        dataset.all_videos().count(),
        dataset.num_utterances(),
        dataset.schema.num_classes,
        dataset.schema.dims
    );
    Ok(dataset)
}

/// Decimal with 17 significant digits, so parsing recovers the exact bits.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn utterance_line(u: &UtteranceRecord) -> String {
    let mut line = format!("{{\"id\":{},\"label\":{}", Value::String(u.utterance_id.clone()), u.label);
    for (m, vals) in &u.features {
        let nums: Vec<String> = vals.iter().map(|&x| fmt_f64(x)).collect();
        line.push_str(&format!(",\"{m}\":[{}]", nums.join(",")));
    }
    line.push('}');
    line
}

pub fn write_video(path: &Path, video: &VideoSample) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut out: Box<dyn Write> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(GzEncoder::new(file, Compression::default()))
    } else {
        Box::new(BufWriter::new(file))
    };
    for u in &video.utterances {
        writeln!(out, "{}", utterance_line(u)).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    }
    out.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Options for [`write_dataset`].
#[derive(Debug, Clone, Default)]
pub struct WriteOptions {
    pub name: Option<String>,
    pub num_classes: Option<usize>,
    pub declare_counts: bool,
    pub gzip: bool,
}

/// Writes `videos/<id>.jsonl[.gz]` files plus `manifest.json` under `dir`,
/// returning the manifest path.
pub fn write_dataset(
    dir: &Path,
    train: &[VideoSample],
    valid: &[VideoSample],
    test: &[VideoSample],
    opts: &WriteOptions,
) -> Result<PathBuf> {
    let videos_dir = dir.join("videos");
    fs::create_dir_all(&videos_dir).map_err(|e| Error::io(format!("creating {}", videos_dir.display()), e))?;
    let ext = if opts.gzip { "jsonl.gz" } else { "jsonl" };
    let entries = |split: &[VideoSample]| -> Result<Vec<VideoEntry>> {
        split
            .iter()
            .map(|v| {
                let file = format!("videos/{}.{ext}", v.video_id);
                write_video(&dir.join(&file), v)?;
                Ok(VideoEntry { id: v.video_id.clone(), file })
            })
            .collect()
    };
    let all = || train.iter().chain(valid).chain(test);
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: 1,
        name: opts.name.clone(),
        num_classes: opts.num_classes,
        declared: opts
            .declare_counts
            .then(|| Declared { videos: all().count(), utterances: all().map(VideoSample::n).sum() }),
        train: entries(train)?,
        valid: entries(valid)?,
        test: entries(test)?,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json("serializing manifest", e))?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(path)
}
