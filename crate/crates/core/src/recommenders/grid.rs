//! Exhaustive hyperparameter search scored by validation precision@k.

use std::collections::HashSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_indexed, fit_mf_snapshots, Algorithm, HyperParams, KnnParams, KnnScoring, MfParams, RecommenderModel};
use super::index::TrainingIndex;
use crate::data::{ItemId, RatingDataset, UserId};
use crate::error::{Error, Result};
use crate::metrics::precision_at_k;

/// Candidate values per hyperparameter. Neighborhood models use the first
/// three lists, factor models the last four.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParamGrid {
    pub neighbors: Vec<usize>,
    pub shrinkage: Vec<f64>,
    pub knn_scoring: Vec<KnnScoring>,
    pub factors: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub regularization: Vec<f64>,
    pub epochs: Vec<usize>,
}

impl Default for HyperParamGrid {
    fn default() -> Self {
        Self {
            neighbors: vec![10, 30, 50, 80],
            shrinkage: vec![0.0],
            knn_scoring: vec![KnnScoring::Rating, KnnScoring::SimilaritySum],
            factors: vec![20, 50, 100],
            learning_rates: vec![0.005, 0.01, 0.05],
            regularization: vec![0.01, 0.1],
            epochs: vec![30, 100],
        }
    }
}

impl HyperParamGrid {
    /// Configurations for `algorithm` in grid order (last list varies
    /// fastest).
    pub fn configs(&self, algorithm: Algorithm) -> Vec<HyperParams> {
        let mut out = Vec::new();
        if algorithm.is_neighborhood() {
            for &neighbors in &self.neighbors {
                for &shrinkage in &self.shrinkage {
                    for &scoring in &self.knn_scoring {
                        out.push(HyperParams::Knn(KnnParams {
                            neighbors,
                            shrinkage,
                            scoring,
                        }));
                    }
                }
            }
        } else {
            for &factors in &self.factors {
                for &learning_rate in &self.learning_rates {
                    for &regularization in &self.regularization {
                        for &epochs in &self.epochs {
                            out.push(HyperParams::Mf(MfParams {
                                factors,
                                learning_rate,
                                regularization,
                                epochs,
                            }));
                        }
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self, algorithm: Algorithm) -> Result<()> {
        let configs = self.configs(algorithm);
        if configs.is_empty() {
            return Err(Error::InvalidHyperParams(format!("empty grid for {algorithm}")));
        }
        configs.iter().try_for_each(|c| c.validate(algorithm))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub params: HyperParams,
    pub precision: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchOutcome {
    pub algorithm: Algorithm,
    /// One entry per configuration, in grid order.
    pub entries: Vec<GridEntry>,
    pub best_index: usize,
    pub best: HyperParams,
    pub best_precision: f64,
}

/// Held-out items of `user` in `truth`, keeping only ratings of at least
/// `min_rating` when given.
pub fn relevant_items(truth: &RatingDataset, user: UserId, min_rating: Option<u8>) -> HashSet<ItemId> {
    truth
        .user_ratings(user)
        .unwrap_or_default()
        .iter()
        .filter(|r| min_rating.is_none_or(|m| r.value >= m))
        .map(|r| r.item)
        .collect()
}

/// Mean precision@k over users known to the model with at least one relevant
/// item in `truth`. `None` when no user qualifies.
pub fn mean_precision(
    model: &RecommenderModel,
    truth: &RatingDataset,
    k: usize,
    min_rating: Option<u8>,
) -> Result<Option<f64>> {
    let mut total = 0.0;
    let mut users = 0usize;
    for user in truth.users() {
        if !model.knows_user(user.id) {
            continue;
        }
        let relevant = relevant_items(truth, user.id, min_rating);
        if relevant.is_empty() {
            continue;
        }
        total += precision_at_k(&model.recommend(user.id, k)?, &relevant, k)?;
        users += 1;
    }
    Ok((users > 0).then(|| total / users as f64))
}

fn score(model: &RecommenderModel, validation: &RatingDataset, k: usize, min_rating: Option<u8>) -> Result<f64> {
    mean_precision(model, validation, k, min_rating)?
        .ok_or_else(|| Error::InvalidArgument("no validation user overlaps the training users".into()))
}

/// Trains every configuration of `grid` on `train` and scores it on
/// `validation`. Returns the highest-precision configuration (first in grid
/// order on ties) along with the full table.
///
/// Factor-model configurations that differ only in epoch count share one
/// training run, snapshotted at each requested epoch; this gives the same
/// models as independent fits. Independent runs execute in parallel and
/// results are ordered by grid index.
pub fn grid_search(
    algorithm: Algorithm,
    train: &RatingDataset,
    validation: &RatingDataset,
    grid: &HyperParamGrid,
    k: usize,
    seed: u64,
    min_rating: Option<u8>,
) -> Result<GridSearchOutcome> {
    grid.validate(algorithm)?;
    if train.num_ratings() == 0 {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    let configs = grid.configs(algorithm);
    let index = Arc::new(TrainingIndex::new(train));

    let results: Vec<Result<f64>> = if algorithm.is_neighborhood() {
        configs
            .par_iter()
            .map(|hp| {
                let model = fit_indexed(algorithm, Arc::clone(&index), hp, seed)?;
                score(&model, validation, k, min_rating)
            })
            .collect()
    } else {
        // Group by everything except the epoch count, in first-seen order.
        let mut groups: Vec<(MfParams, Vec<usize>)> = Vec::new();
        for (n, hp) in configs.iter().enumerate() {
            let HyperParams::Mf(p) = hp else { unreachable!() };
            let key = MfParams { epochs: 0, ..p.clone() };
            match groups.iter_mut().find(|(g, _)| *g == key) {
                Some((_, members)) => members.push(n),
                None => groups.push((key, vec![n])),
            }
        }
        let per_group: Vec<Vec<(usize, Result<f64>)>> = groups
            .par_iter()
            .map(|(base, members)| {
                let epoch_of = |n: usize| match &configs[n] {
                    HyperParams::Mf(p) => p.epochs,
                    HyperParams::Knn(_) => unreachable!(),
                };
                let mut wanted: Vec<usize> = members.iter().map(|&n| epoch_of(n)).collect();
                wanted.sort_unstable();
                wanted.dedup();
                let mut scored: Vec<(usize, Result<f64>)> = Vec::new();
                let run = fit_mf_snapshots(algorithm, Arc::clone(&index), base, &wanted, seed, |model| {
                    let epochs = epoch_of_model(&model);
                    let s = score(&model, validation, k, min_rating);
                    scored.extend(
                        members
                            .iter()
                            .filter(|&&n| epoch_of(n) == epochs)
                            .map(|&n| (n, s.as_ref().copied().map_err(clone_error))),
                    );
                });
                if let Err(e) = run {
                    let message = e.to_string();
                    for &n in members {
                        if !scored.iter().any(|(m, _)| *m == n) {
                            scored.push((n, Err(Error::NoViableConfig(message.clone()))));
                        }
                    }
                }
                scored
            })
            .collect();
        let mut slots: Vec<Option<Result<f64>>> = configs.iter().map(|_| None).collect();
        for (n, r) in per_group.into_iter().flatten() {
            slots[n] = Some(r);
        }
        slots.into_iter().map(|s| s.expect("every config scored")).collect()
    };

    let entries: Vec<GridEntry> = configs
        .into_iter()
        .zip(&results)
        .map(|(params, r)| GridEntry {
            params,
            precision: r.as_ref().ok().copied(),
            error: r.as_ref().err().map(|e| e.to_string()),
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (n, e) in entries.iter().enumerate() {
        if let Some(p) = e.precision {
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((n, p));
            }
        }
    }
    let Some((best_index, best_precision)) = best else {
        let reasons: Vec<String> = entries.iter().filter_map(|e| e.error.clone()).collect();
        return Err(Error::NoViableConfig(reasons.join("; ")));
    };
    for e in &entries {
        log::info!(
            "{algorithm} {}: {}",
            e.params,
            e.precision.map_or_else(|| e.error.clone().unwrap_or_default(), |p| format!("{p:.4}"))
        );
    }
    Ok(GridSearchOutcome {
        algorithm,
        best: entries[best_index].params.clone(),
        entries,
        best_index,
        best_precision,
    })
}

fn epoch_of_model(model: &RecommenderModel) -> usize {
    match &model.hyper {
        HyperParams::Mf(p) => p.epochs,
        HyperParams::Knn(_) => 0,
    }
}

fn clone_error(e: &Error) -> Error {
    Error::NoViableConfig(e.to_string())
}
