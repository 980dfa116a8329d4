//! The four collaborative-filtering recommenders behind one fit/recommend
//! interface, plus grid search and model checkpoints.

mod checkpoint;
mod grid;
mod index;
mod knn;
mod listrank;
mod mf;
mod svdpp;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{ItemId, RatingDataset, UserId};
use crate::error::{Error, Result};

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use grid::{
    grid_search, mean_precision, relevant_items, GridEntry, GridSearchOutcome, HyperParamGrid,
};
pub use index::TrainingIndex;
pub use knn::{item_similarity, similarity_from_sums, user_similarity, KnnModel, KnnScoring, Neighbor};
pub use listrank::{
    entropy_floor, listrankmf_loss_and_grad, listrankmf_objective, logistic, target_distribution, ListRankParams,
};
pub use mf::{Observation, INIT_RANGE};
pub use svdpp::{svdpp_loss_and_grad, svdpp_objective, SvdPpParams};

use listrank::ListRankTrainer;
use mf::{train_epochs, EpochTrainer};
use svdpp::SvdPpTrainer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "UserKNN")]
    UserKnn,
    #[serde(rename = "ItemKNN")]
    ItemKnn,
    #[serde(rename = "SVDpp")]
    SvdPp,
    #[serde(rename = "ListRankMF")]
    ListRankMf,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::UserKnn, Algorithm::ItemKnn, Algorithm::SvdPp, Algorithm::ListRankMf];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::UserKnn => "UserKNN",
            Algorithm::ItemKnn => "ItemKNN",
            Algorithm::SvdPp => "SVDpp",
            Algorithm::ListRankMf => "ListRankMF",
        }
    }

    /// Lower-case tag used in file names.
    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::UserKnn => "userknn",
            Algorithm::ItemKnn => "itemknn",
            Algorithm::SvdPp => "svdpp",
            Algorithm::ListRankMf => "listrankmf",
        }
    }

    pub fn is_neighborhood(self) -> bool {
        matches!(self, Algorithm::UserKnn | Algorithm::ItemKnn)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "userknn" => Ok(Algorithm::UserKnn),
            "itemknn" => Ok(Algorithm::ItemKnn),
            "svdpp" | "svd++" => Ok(Algorithm::SvdPp),
            "listrankmf" => Ok(Algorithm::ListRankMf),
            _ => Err(Error::InvalidArgument(format!("unknown algorithm `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub neighbors: usize,
    #[serde(default)]
    pub shrinkage: f64,
    #[serde(default = "default_scoring")]
    pub scoring: KnnScoring,
}

fn default_scoring() -> KnnScoring {
    KnnScoring::Rating
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfParams {
    pub factors: usize,
    pub learning_rate: f64,
    pub regularization: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HyperParams {
    Knn(KnnParams),
    Mf(MfParams),
}

impl HyperParams {
    pub fn validate(&self, algorithm: Algorithm) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidHyperParams(m));
        match (self, algorithm.is_neighborhood()) {
            (HyperParams::Knn(p), true) => {
                if p.neighbors == 0 {
                    return bad("neighborhood size must be at least 1".into());
                }
                if !(p.shrinkage.is_finite() && p.shrinkage >= 0.0) {
                    return bad(format!("shrinkage {} must be finite and non-negative", p.shrinkage));
                }
                Ok(())
            }
            (HyperParams::Mf(p), false) => {
                if p.factors == 0 {
                    return bad("factor count must be at least 1".into());
                }
                if !(p.learning_rate.is_finite() && p.learning_rate > 0.0) {
                    return bad(format!("learning rate {} must be positive", p.learning_rate));
                }
                if !(p.regularization.is_finite() && p.regularization >= 0.0) {
                    return bad(format!("regularization {} must be non-negative", p.regularization));
                }
                Ok(())
            }
            _ => bad(format!("{self} does not apply to {algorithm}")),
        }
    }
}

impl fmt::Display for HyperParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperParams::Knn(p) => write!(
                f,
                "neighbors={} shrinkage={} scoring={:?}",
                p.neighbors, p.shrinkage, p.scoring
            ),
            HyperParams::Mf(p) => write!(
                f,
                "factors={} learning_rate={} regularization={} epochs={}",
                p.factors, p.learning_rate, p.regularization, p.epochs
            ),
        }
    }
}

/// Ranked top-k recommendations for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationList {
    pub user: UserId,
    /// `(item, score)`, scores non-increasing, ties by ascending item id.
    pub entries: Vec<(ItemId, f64)>,
}

impl RecommendationList {
    pub fn items(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.entries.iter().map(|(i, _)| *i)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelParams {
    Knn(KnnModel),
    SvdPp(SvdPpParams),
    ListRank(ListRankParams),
}

/// A fitted, immutable recommender.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommenderModel {
    pub algorithm: Algorithm,
    pub hyper: HyperParams,
    pub seed: u64,
    /// Hex SHA-256 of the training ratings.
    pub fingerprint: String,
    /// Training objective before training and after each epoch (MF only).
    pub loss_history: Vec<f64>,
    index: Arc<TrainingIndex>,
    params: ModelParams,
}

/// Trains `algorithm` on `train`. Deterministic in `(train, hp, seed)`.
pub fn fit(algorithm: Algorithm, train: &RatingDataset, hp: &HyperParams, seed: u64) -> Result<RecommenderModel> {
    hp.validate(algorithm)?;
    if train.num_ratings() == 0 {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    fit_indexed(algorithm, Arc::new(TrainingIndex::new(train)), hp, seed)
}

pub(crate) fn fit_indexed(
    algorithm: Algorithm,
    index: Arc<TrainingIndex>,
    hp: &HyperParams,
    seed: u64,
) -> Result<RecommenderModel> {
    hp.validate(algorithm)?;
    let (params, history) = match (algorithm, hp) {
        (Algorithm::UserKnn, HyperParams::Knn(p)) => (ModelParams::Knn(knn::fit_user_knn(&index, p)), Vec::new()),
        (Algorithm::ItemKnn, HyperParams::Knn(p)) => (ModelParams::Knn(knn::fit_item_knn(&index, p)), Vec::new()),
        (Algorithm::SvdPp, HyperParams::Mf(p)) => {
            let mut trainer = SvdPpTrainer::new(&index, p, seed);
            let history = train_epochs(&mut trainer, p.epochs, |_, _, _| Ok(()))?;
            (ModelParams::SvdPp(trainer.params), history)
        }
        (Algorithm::ListRankMf, HyperParams::Mf(p)) => {
            let mut trainer = ListRankTrainer::new(&index, p, seed);
            let history = train_epochs(&mut trainer, p.epochs, |_, _, _| Ok(()))?;
            (ModelParams::ListRank(trainer.params), history)
        }
        _ => unreachable!("validated above"),
    };
    RecommenderModel::from_parts(algorithm, hp.clone(), seed, index, params, history)
}

/// Trains one MF configuration up to the largest of `epochs`, yielding a
/// model snapshot at every requested epoch count (ascending). A divergence
/// ends the run; snapshots taken before it are kept.
pub(crate) fn fit_mf_snapshots(
    algorithm: Algorithm,
    index: Arc<TrainingIndex>,
    base: &MfParams,
    epochs: &[usize],
    seed: u64,
    mut on_snapshot: impl FnMut(RecommenderModel),
) -> Result<()> {
    let max = epochs.iter().copied().max().unwrap_or(0);
    let hp_at = |e: usize| {
        HyperParams::Mf(MfParams {
            epochs: e,
            ..base.clone()
        })
    };
    HyperParams::Mf(base.clone()).validate(algorithm)?;

    fn drive<T: EpochTrainer>(
        trainer: &mut T,
        max: usize,
        epochs: &[usize],
        mut snapshot: impl FnMut(usize, &T, &[f64]) -> Result<()>,
    ) -> Result<()> {
        if epochs.contains(&0) {
            snapshot(0, trainer, &[trainer.objective()])?;
        }
        train_epochs(trainer, max, |e, t, h| {
            if epochs.contains(&e) {
                snapshot(e, t, h)?;
            }
            Ok(())
        })
        .map(|_| ())
    }

    match algorithm {
        Algorithm::SvdPp => {
            let mut trainer = SvdPpTrainer::new(&index, base, seed);
            drive(&mut trainer, max, epochs, |e, t, h| {
                let model = RecommenderModel::from_parts(
                    algorithm,
                    hp_at(e),
                    seed,
                    Arc::clone(&index),
                    ModelParams::SvdPp(t.params.clone()),
                    h.to_vec(),
                )?;
                on_snapshot(model);
                Ok(())
            })
        }
        Algorithm::ListRankMf => {
            let mut trainer = ListRankTrainer::new(&index, base, seed);
            drive(&mut trainer, max, epochs, |e, t, h| {
                let model = RecommenderModel::from_parts(
                    algorithm,
                    hp_at(e),
                    seed,
                    Arc::clone(&index),
                    ModelParams::ListRank(t.params.clone()),
                    h.to_vec(),
                )?;
                on_snapshot(model);
                Ok(())
            })
        }
        _ => Err(Error::InvalidHyperParams(format!("{algorithm} is not a factor model"))),
    }
}

impl RecommenderModel {
    fn from_parts(
        algorithm: Algorithm,
        hyper: HyperParams,
        seed: u64,
        index: Arc<TrainingIndex>,
        params: ModelParams,
        loss_history: Vec<f64>,
    ) -> Result<Self> {
        let finite = match &params {
            ModelParams::Knn(m) => m.neighbors.iter().flatten().all(|n| n.sim.is_finite()),
            ModelParams::SvdPp(p) => p.is_finite(),
            ModelParams::ListRank(p) => p.is_finite(),
        };
        if !finite {
            return Err(Error::NonFiniteParams);
        }
        Ok(Self {
            algorithm,
            hyper,
            seed,
            fingerprint: index.fingerprint(),
            loss_history,
            index,
            params,
        })
    }

    pub fn index(&self) -> &TrainingIndex {
        &self.index
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn knows_user(&self, user: UserId) -> bool {
        self.index.user_index(user).is_some()
    }

    fn dense_user(&self, user: UserId) -> Result<usize> {
        self.index.user_index(user).ok_or(Error::UnknownUser(user))
    }

    fn knn_scoring(&self) -> KnnScoring {
        match &self.hyper {
            HyperParams::Knn(p) => p.scoring,
            HyperParams::Mf(_) => KnnScoring::Rating,
        }
    }

    /// Ranking score of every dense item for dense user `u`.
    fn scores(&self, u: usize) -> Vec<Option<f64>> {
        match (&self.params, self.algorithm) {
            (ModelParams::Knn(m), Algorithm::UserKnn) => m.scores_user_based(&self.index, u, self.knn_scoring()),
            (ModelParams::Knn(m), _) => m.scores_item_based(&self.index, u, self.knn_scoring()),
            (ModelParams::SvdPp(p), _) => p.scores(&self.index, u).into_iter().map(Some).collect(),
            (ModelParams::ListRank(p), _) => p.scores(&self.index, u).into_iter().map(Some).collect(),
        }
    }

    /// Predicted rating (neighborhood and SVD++ models) or ranking score
    /// (ListRankMF) of `item` for `user`. `Ok(None)` marks an unscorable
    /// pair: the item was never seen in training, or no neighbor covers it.
    pub fn predict(&self, user: UserId, item: ItemId) -> Result<Option<f64>> {
        let u = self.dense_user(user)?;
        let Some(i) = self.index.item_index(item) else {
            return Ok(None);
        };
        Ok(match &self.params {
            ModelParams::Knn(m) if self.algorithm == Algorithm::UserKnn => m.predict_user_based(&self.index, u, i),
            ModelParams::Knn(m) => m.predict_item_based(&self.index, u, i),
            ModelParams::SvdPp(p) => Some(p.predict(&self.index, u, i)),
            ModelParams::ListRank(p) => Some(p.score(u, i)),
        })
    }

    /// Top-`k` unrated training items for `user` by score, ties broken by
    /// ascending item id. Users absent from training are an error.
    pub fn recommend(&self, user: UserId, k: usize) -> Result<RecommendationList> {
        if k == 0 {
            return Err(Error::InvalidArgument("list length k must be at least 1".into()));
        }
        let u = self.dense_user(user)?;
        let mut scores = self.scores(u);
        for &i in self.index.user_row(u).0 {
            scores[i as usize] = None;
        }
        let mut ranked: Vec<(usize, f64)> = scores
            .into_iter()
            .enumerate()
            .filter_map(|(i, s)| s.filter(|v| v.is_finite()).map(|v| (i, v)))
            .collect();
        let order = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        if ranked.len() > k {
            ranked.select_nth_unstable_by(k, order);
            ranked.truncate(k);
        }
        ranked.sort_unstable_by(order);
        Ok(RecommendationList {
            user,
            entries: ranked.into_iter().map(|(i, s)| (self.index.item_id(i), s)).collect(),
        })
    }
}

/// Mean-centered Pearson neighbor prediction of a user-based model.
pub fn predict_userknn(model: &RecommenderModel, user: UserId, item: ItemId) -> Result<Option<f64>> {
    if model.algorithm != Algorithm::UserKnn {
        return Err(Error::InvalidArgument(format!("{} is not a UserKNN model", model.algorithm)));
    }
    model.predict(user, item)
}

/// Similarity-weighted average prediction of an item-based model.
pub fn predict_itemknn(model: &RecommenderModel, user: UserId, item: ItemId) -> Result<Option<f64>> {
    if model.algorithm != Algorithm::ItemKnn {
        return Err(Error::InvalidArgument(format!("{} is not an ItemKNN model", model.algorithm)));
    }
    model.predict(user, item)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};

    fn knn(neighbors: usize) -> HyperParams {
        HyperParams::Knn(KnnParams {
            neighbors,
            shrinkage: 0.0,
            scoring: KnnScoring::Rating,
        })
    }

    fn mf(epochs: usize) -> HyperParams {
        HyperParams::Mf(MfParams {
            factors: 4,
            learning_rate: 0.01,
            regularization: 0.05,
            epochs,
        })
    }

    #[test]
    fn algorithm_tags_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.tag().parse::<Algorithm>().unwrap(), a);
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("SVD++".parse::<Algorithm>().unwrap(), Algorithm::SvdPp);
        assert!("bpr".parse::<Algorithm>().is_err());
    }

    #[test]
    fn hyperparameter_validation() {
        assert!(knn(10).validate(Algorithm::UserKnn).is_ok());
        assert!(knn(0).validate(Algorithm::ItemKnn).is_err());
        assert!(knn(10).validate(Algorithm::SvdPp).is_err());
        assert!(mf(5).validate(Algorithm::ListRankMf).is_ok());
        let mut bad = MfParams {
            factors: 4,
            learning_rate: -1.0,
            regularization: 0.0,
            epochs: 1,
        };
        assert!(HyperParams::Mf(bad.clone()).validate(Algorithm::SvdPp).is_err());
        bad.learning_rate = 0.1;
        bad.factors = 0;
        assert!(HyperParams::Mf(bad).validate(Algorithm::SvdPp).is_err());
    }

    #[test]
    fn untrained_svdpp_predicts_global_mean() {
        let ds = generate_synthetic(&SyntheticSpec::small(12, 15, 3)).unwrap();
        let model = fit(Algorithm::SvdPp, &ds, &mf(0), 1).unwrap();
        let mean = model.index().global_mean();
        // Biases start at zero; the factor term is bounded by the init range.
        let bound = 4.0 * INIT_RANGE * (2.0 * INIT_RANGE);
        for u in ds.users() {
            for item in ds.items() {
                let p = model.predict(u.id, item.id).unwrap().unwrap();
                assert!((p - mean).abs() <= bound, "{p} vs {mean}");
            }
        }
        let ModelParams::SvdPp(params) = model.params() else { panic!() };
        assert!(params.user_bias.iter().chain(&params.item_bias).all(|&b| b == 0.0));
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let ds = generate_synthetic(&SyntheticSpec::small(3, 3, 3)).unwrap();
        let empty = ds.with_ratings(vec![]).unwrap();
        assert!(fit(Algorithm::UserKnn, &empty, &knn(5), 0).is_err());
    }

    #[test]
    fn user_who_rated_everything_gets_nothing() {
        let mut spec = SyntheticSpec::small(6, 8, 4);
        spec.ratings_per_user = (8, 8);
        let ds = generate_synthetic(&spec).unwrap();
        for algorithm in Algorithm::ALL {
            let hp = if algorithm.is_neighborhood() { knn(3) } else { mf(2) };
            let model = fit(algorithm, &ds, &hp, 0).unwrap();
            assert!(model.recommend(1, 5).unwrap().is_empty());
        }
    }

    #[test]
    fn unknown_user_and_bad_k() {
        let ds = generate_synthetic(&SyntheticSpec::small(6, 10, 4)).unwrap();
        let model = fit(Algorithm::ItemKnn, &ds, &knn(3), 0).unwrap();
        assert!(matches!(model.recommend(999, 5), Err(Error::UnknownUser(999))));
        assert!(model.recommend(1, 0).is_err());
        assert!(predict_userknn(&model, 1, 1).is_err());
    }

    #[test]
    fn snapshots_equal_independent_fits() {
        let ds = generate_synthetic(&SyntheticSpec::small(15, 20, 9)).unwrap();
        let index = Arc::new(TrainingIndex::new(&ds));
        let HyperParams::Mf(base) = mf(0) else { unreachable!() };
        for algorithm in [Algorithm::SvdPp, Algorithm::ListRankMf] {
            let mut snapshots = Vec::new();
            fit_mf_snapshots(algorithm, Arc::clone(&index), &base, &[0, 2, 5], 7, |m| snapshots.push(m)).unwrap();
            assert_eq!(snapshots.len(), 3);
            for snap in snapshots {
                let direct = fit(algorithm, &ds, &snap.hyper, 7).unwrap();
                assert_eq!(snap, direct);
            }
        }
    }
}
