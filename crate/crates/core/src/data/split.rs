use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{RatingDataset, RatingRecord};
use crate::error::{Error, Result};

/// Disjoint train/test partition of a dataset's ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub train: RatingDataset,
    pub test: RatingDataset,
    pub seed: u64,
    pub ratio: f64,
}

/// Number of a user's `n` ratings kept for training: `ratio * n` rounded half up.
pub fn train_share(ratio: f64, n: usize) -> usize {
    // The epsilon absorbs representation error in products such as 0.9 * 5.
    let kept = (ratio * n as f64 + 0.5 + 1e-9).floor() as usize;
    kept.min(n)
}

/// Per-user seeded random split.
///
/// Each user's ratings are shuffled with a single ChaCha8 stream (users in
/// ascending id order) and the first `train_share(ratio, n)` go to training.
pub fn split_train_test(ds: &RatingDataset, ratio: f64, seed: u64) -> Result<SplitPair> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!("split ratio {ratio} outside (0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(ds.num_ratings());
    let mut test = Vec::new();
    let mut shuffled: Vec<RatingRecord> = Vec::new();
    for (_, profile) in ds.profiles() {
        shuffled.clear();
        shuffled.extend_from_slice(profile);
        shuffled.shuffle(&mut rng);
        let keep = train_share(ratio, profile.len());
        train.extend_from_slice(&shuffled[..keep]);
        test.extend_from_slice(&shuffled[keep..]);
    }
    Ok(SplitPair {
        train: ds.with_ratings(train)?,
        test: ds.with_ratings(test)?,
        seed,
        ratio,
    })
}
