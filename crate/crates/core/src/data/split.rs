use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::schema::VideoSample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Partitions {
    pub train: Vec<VideoSample>,
    pub valid: Vec<VideoSample>,
    pub test: Vec<VideoSample>,
}

/// Per-part counts: floor of each share, then the remainder goes one at a
/// time to the largest fractional parts (earlier parts win ties).
pub fn split_counts(n: usize, ratios: [f64; 3]) -> Result<[usize; 3]> {
    let total: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| *r < 0.0 || !r.is_finite()) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios {ratios:?} must be nonnegative and sum to 1")));
    }
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    // Guard against 0.1 * 10 landing a hair under 1.
    let mut counts: [usize; 3] = std::array::from_fn(|i| (exact[i] + 1e-9).floor() as usize);
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - counts[a] as f64;
        let fb = exact[b] - counts[b] as f64;
        fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    Ok(counts)
}

/// Seeded shuffle of whole videos, then partition by `ratios` (train, valid, test).
pub fn split_dataset(videos: &[VideoSample], ratios: [f64; 3], seed: u64) -> Result<Partitions> {
    let [n_train, n_valid, _] = split_counts(videos.len(), ratios)?;
    let mut shuffled = videos.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = shuffled.split_off(n_train + n_valid);
    let valid = shuffled.split_off(n_train);
    Ok(Partitions { train: shuffled, valid, test })
}
