use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{ItemId, RatingDataset, RatingRecord, RatingScale, UserId};
use crate::error::{Error, Result};

/// Profile anomaly, entropy and size of one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserFactors {
    pub user: UserId,
    pub anomaly: f64,
    /// Shannon entropy in nats of the user's rating-value distribution.
    pub entropy: f64,
    pub size: usize,
}

/// Mean rating of every rated item.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemMeans(HashMap<ItemId, f64>);

impl ItemMeans {
    pub fn get(&self, item: ItemId) -> Option<f64> {
        self.0.get(&item).copied()
    }
}

pub fn item_means(ds: &RatingDataset) -> ItemMeans {
    let mut acc: HashMap<ItemId, (f64, usize)> = HashMap::new();
    for r in ds.ratings() {
        let e = acc.entry(r.item).or_default();
        e.0 += f64::from(r.value);
        e.1 += 1;
    }
    ItemMeans(acc.into_iter().map(|(i, (s, n))| (i, s / n as f64)).collect())
}

/// Mean absolute deviation of the profile's ratings from the item means.
///
/// Items missing from `means` are an error; callers pass means computed on a
/// dataset that contains the profile.
pub fn anomaly_with_means(profile: &[RatingRecord], means: &ItemMeans) -> Result<f64> {
    let first = profile
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty profile".into()))?;
    let mut total = 0.0;
    for r in profile {
        let mean = means.get(r.item).ok_or(Error::UnknownItem(r.item))?;
        total += (f64::from(r.value) - mean).abs();
    }
    debug_assert!(profile.iter().all(|r| r.user == first.user));
    Ok(total / profile.len() as f64)
}

/// Entropy (nats) of the distribution of rating values in `profile`.
/// Values absent from the profile contribute nothing.
pub fn entropy_of(profile: &[RatingRecord], scale: &RatingScale) -> f64 {
    let mut counts = vec![0usize; scale.len()];
    for r in profile {
        if let Some(v) = scale.index_of(r.value) {
            counts[v] += 1;
        }
    }
    let n = profile.len() as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

fn profile_of(user: UserId, ds: &RatingDataset) -> Result<&[RatingRecord]> {
    let profile = ds.user_ratings(user).ok_or(Error::UnknownUser(user))?;
    if profile.is_empty() {
        return Err(Error::EmptyProfile(user));
    }
    Ok(profile)
}

/// Profile anomaly of `user` with item means taken over all of `ds`.
///
/// Recomputes the item means on every call; use [`user_factors`] for a whole
/// population.
pub fn profile_anomaly(user: UserId, ds: &RatingDataset) -> Result<f64> {
    let profile = profile_of(user, ds)?;
    anomaly_with_means(profile, &item_means(ds))
}

pub fn profile_entropy(user: UserId, ds: &RatingDataset) -> Result<f64> {
    Ok(entropy_of(profile_of(user, ds)?, ds.scale()))
}

pub fn profile_size(user: UserId, ds: &RatingDataset) -> Result<usize> {
    ds.user_ratings(user).map(<[_]>::len).ok_or(Error::UnknownUser(user))
}

/// Factors of every user with at least one rating, in ascending user id order.
pub fn user_factors(ds: &RatingDataset) -> Vec<UserFactors> {
    let means = item_means(ds);
    ds.profiles()
        .filter(|(_, p)| !p.is_empty())
        .map(|(u, p)| UserFactors {
            user: u.id,
            anomaly: anomaly_with_means(p, &means).expect("means cover every rated item"),
            entropy: entropy_of(p, ds.scale()),
            size: p.len(),
        })
        .collect()
}
