//! Per-user profile factors, outcome metrics and correlation.
//!
//! Everything here is a pure function of immutable inputs.

mod calibration;
mod correlation;
mod factors;

pub use calibration::{genre_distribution, miscalibration, GenreDistribution};
pub use correlation::pearson_correlation;
pub use factors::{
    anomaly_with_means, entropy_of, item_means, profile_anomaly, profile_entropy, profile_size, user_factors,
    ItemMeans, UserFactors,
};

use std::collections::HashSet;

use crate::data::ItemId;
use crate::error::{Error, Result};
use crate::recommenders::RecommendationList;

/// Fraction of the first `k` recommended items found in `test_items`.
///
/// The denominator is always `k`, even when the list is shorter.
pub fn precision_at_k(rec: &RecommendationList, test_items: &HashSet<ItemId>, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("precision cutoff k must be at least 1".into()));
    }
    let hits = rec
        .entries
        .iter()
        .take(k)
        .filter(|(item, _)| test_items.contains(item))
        .count();
    Ok(hits as f64 / k as f64)
}
