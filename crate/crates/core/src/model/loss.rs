use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor, Var};
use crate::data::Modality;
use crate::error::{dim_err, Error, Result};

/// A translation direction, source to target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Direction {
    pub from: Modality,
    pub to: Modality,
}

impl Direction {
    pub fn new(from: Modality, to: Modality) -> Self {
        Direction { from, to }
    }

    /// Compact form such as `tv`, used in config keys and CSV headers.
    pub fn key(self) -> String {
        format!("{}{}", self.from, self.to)
    }

    pub fn parse_key(s: &str) -> Result<Direction> {
        let mut chars = s.chars();
        let (Some(a), Some(b), None) = (chars.next(), chars.next(), chars.next()) else {
            return Err(Error::Config(format!("translation direction `{s}` should look like `tv`")));
        };
        let parse = |c: char| c.to_string().parse::<Modality>().map_err(|e| Error::Config(e.to_string()));
        let (from, to) = (parse(a)?, parse(b)?);
        if from == to {
            return Err(Error::Config(format!("translation direction `{s}` maps a modality to itself")));
        }
        Ok(Direction { from, to })
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.from, self.to)
    }
}

/// Weights of the joint loss. Directions without an entry weigh 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointLossWeights {
    pub w_trans: BTreeMap<Direction, f64>,
    pub w_cls: f64,
}

impl Default for JointLossWeights {
    fn default() -> Self {
        JointLossWeights { w_trans: BTreeMap::new(), w_cls: 1.0 }
    }
}

impl JointLossWeights {
    pub fn trans(&self, dir: Direction) -> f64 {
        self.w_trans.get(&dir).copied().unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (dir, w) in &self.w_trans {
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::Config(format!("translation weight for {dir} is {w}, must be nonnegative")));
            }
        }
        if !(self.w_cls.is_finite() && self.w_cls > 0.0) {
            return Err(Error::Config(format!("classification weight is {}, must be positive", self.w_cls)));
        }
        Ok(())
    }
}

fn valid_count(mask: &[bool], rows: usize) -> Result<usize> {
    if mask.len() != rows {
        return Err(dim_err(format!("mask of length {} for {rows} rows", mask.len())));
    }
    Ok(mask.iter().filter(|&&m| m).count())
}

fn row_mask(g: &mut Graph, mask: &[bool], d: usize) -> Result<Var> {
    let data = mask.iter().flat_map(|&m| std::iter::repeat_n(if m { 1.0 } else { 0.0 }, d)).collect();
    Ok(g.constant(Tensor::new(vec![mask.len(), d], data)?))
}

/// Mean absolute error per utterance, `(1/d)·Σ_j |recon − target|`,
/// averaged over valid utterances.
pub fn translation_loss(g: &mut Graph, recon: Var, target: Var, mask: &[bool]) -> Result<Var> {
    let shape = g.shape(recon).to_vec();
    if shape.len() != 2 || g.shape(target) != shape.as_slice() {
        return Err(dim_err(format!("translation loss of {:?} against {:?}", shape, g.shape(target))));
    }
    let (n, d) = (shape[0], shape[1]);
    let valid = valid_count(mask, n)?;
    if valid == 0 {
        return Err(Error::Contract("translation loss over a video with no valid utterances".into()));
    }
    let diff = g.sub(recon, target)?;
    let abs = g.abs(diff);
    let keep = row_mask(g, mask, d)?;
    let kept = g.mul(abs, keep)?;
    let total = g.sum(kept);
    Ok(g.scale(total, 1.0 / (d * valid) as f64))
}

/// Mean over valid utterances of `−log softmax(logits)[label]`.
/// `utterance_ids` name offending rows in errors.
pub fn classification_loss(
    g: &mut Graph,
    logits: Var,
    labels: &[usize],
    mask: &[bool],
    utterance_ids: &[String],
) -> Result<Var> {
    let (n, d) = g.value(logits).dims2()?;
    let valid = valid_count(mask, n)?;
    if labels.len() != n {
        return Err(dim_err(format!("{} labels for {n} rows", labels.len())));
    }
    if valid == 0 {
        return Err(Error::Contract("classification loss over a video with no valid utterances".into()));
    }
    let mut picks = Vec::with_capacity(valid);
    for i in (0..n).filter(|&i| mask[i]) {
        if labels[i] >= d {
            let id = utterance_ids.get(i).map_or("?", String::as_str);
            return Err(Error::Data(format!("utterance `{id}` has label {} but the model has {d} classes", labels[i])));
        }
        picks.push(i * d + labels[i]);
    }
    let log_p = g.log_softmax(logits)?;
    let picked = g.gather(log_p, &picks)?;
    let mean = g.mean(picked);
    Ok(g.scale(mean, -1.0))
}

/// `w_cls·cls + Σ_dir w_dir·trans_dir`.
pub fn joint_loss(g: &mut Graph, trans: &[(Direction, Var)], cls: Var, weights: &JointLossWeights) -> Result<Var> {
    weights.validate()?;
    let mut total = g.scale(cls, weights.w_cls);
    for &(dir, loss) in trans {
        let term = g.scale(loss, weights.trans(dir));
        total = g.add(total, term)?;
    }
    Ok(total)
}

/// Row-wise argmax; ties go to the lowest index.
pub fn predict(logits: &Tensor) -> Result<Vec<usize>> {
    let (_, d) = logits.dims2()?;
    Ok(logits
        .data()
        .chunks(d.max(1))
        .map(|row| {
            let mut best = 0;
            for (j, &x) in row.iter().enumerate() {
                if x > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect())
}
