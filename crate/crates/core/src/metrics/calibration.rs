//! Genre distributions and the KL-divergence miscalibration measure.

use std::sync::Arc;

use crate::data::{ItemId, RatingDataset};
use crate::error::{Error, Result};

/// Probability mass over a fixed, sorted genre universe.
#[derive(Debug, Clone, PartialEq)]
pub struct GenreDistribution {
    universe: Arc<[String]>,
    probs: Vec<f64>,
}

impl GenreDistribution {
    /// Normalizes non-negative `weights` over `universe`.
    pub fn from_weights(universe: Arc<[String]>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != universe.len() {
            return Err(Error::InvalidArgument("weight vector does not match genre universe".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument("genre weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidArgument("genre weights sum to zero".into()));
        }
        let probs = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { universe, probs })
    }

    pub fn universe(&self) -> &[String] {
        &self.universe
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, genre: &str) -> f64 {
        self.universe
            .binary_search_by(|g| g.as_str().cmp(genre))
            .map_or(0.0, |p| self.probs[p])
    }
}

/// Genre distribution of a weighted item list: each item's weight is split
/// evenly across its genres, then the total is normalized to 1.
pub fn genre_distribution(items: &[(ItemId, f64)], ds: &RatingDataset) -> Result<GenreDistribution> {
    if items.is_empty() {
        return Err(Error::InvalidArgument("genre distribution of an empty item list".into()));
    }
    let universe = ds.genre_universe();
    let mut weights = vec![0.0; universe.len()];
    for &(id, weight) in items {
        let item = ds.item(id).ok_or(Error::UnknownItem(id))?;
        if item.genres.is_empty() {
            return Err(Error::InvalidArgument(format!("item {id} has no genres")));
        }
        let share = weight / item.genres.len() as f64;
        for g in &item.genres {
            let slot = universe
                .binary_search_by(|u| u.as_str().cmp(g))
                .expect("universe holds every item genre");
            weights[slot] += share;
        }
    }
    GenreDistribution::from_weights(Arc::clone(universe), weights)
}

/// `KL(p || (1 - alpha) q + alpha p)` in nats.
///
/// `p` is the reference (profile) distribution and `q` the distribution of
/// the recommendations. Genres with `p = 0` contribute nothing.
pub fn miscalibration(p: &GenreDistribution, q: &GenreDistribution, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("smoothing alpha {alpha} outside (0, 1)")));
    }
    if !Arc::ptr_eq(&p.universe, &q.universe) && p.universe != q.universe {
        return Err(Error::InvalidArgument("genre distributions over different universes".into()));
    }
    let kl = p
        .probs
        .iter()
        .zip(&q.probs)
        .filter(|(&pg, _)| pg > 0.0)
        .map(|(&pg, &qg)| {
            // (1 - alpha) q + alpha p, written so that q == p gives p exactly.
            let smoothed = pg + (1.0 - alpha) * (qg - pg);
            pg * (pg / smoothed).ln()
        })
        .sum::<f64>();
    Ok(kl.max(0.0))
}
