//! Group-level audit: per-gender, factor-sorted bucketing of users and
//! per-bucket aggregation of an outcome metric.

mod report;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Gender, RatingDataset, SplitPair, UserId};
use crate::error::{Error, Result};
use crate::metrics::{genre_distribution, miscalibration, pearson_correlation, precision_at_k, user_factors, UserFactors};
use crate::recommenders::{relevant_items, RecommenderModel};

pub use report::{read_report, write_report, ReportMeta, ReportSidecar};

pub const DEFAULT_BUCKETS: usize = 20;
pub const DEFAULT_ALPHA: f64 = 0.01;

/// User profile factor used to order a population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    Anomaly,
    Entropy,
    Size,
}

impl Factor {
    pub const ALL: [Factor; 3] = [Factor::Anomaly, Factor::Entropy, Factor::Size];

    pub fn tag(self) -> &'static str {
        match self {
            Factor::Anomaly => "anomaly",
            Factor::Entropy => "entropy",
            Factor::Size => "size",
        }
    }

    pub fn value(self, f: &UserFactors) -> f64 {
        match self {
            Factor::Anomaly => f.anomaly,
            Factor::Entropy => f.entropy,
            Factor::Size => f.size as f64,
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Factor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Factor::ALL
            .into_iter()
            .find(|f| f.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown factor '{s}' (expected anomaly, entropy or size)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeMetric {
    Precision,
    Miscalibration,
}

impl OutcomeMetric {
    pub const ALL: [OutcomeMetric; 2] = [OutcomeMetric::Precision, OutcomeMetric::Miscalibration];

    pub fn tag(self) -> &'static str {
        match self {
            OutcomeMetric::Precision => "precision",
            OutcomeMetric::Miscalibration => "miscalibration",
        }
    }
}

impl fmt::Display for OutcomeMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for OutcomeMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OutcomeMetric::ALL
            .into_iter()
            .find(|m| m.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric '{s}' (expected precision or miscalibration)")))
    }
}

/// Which ratings the profile factors are computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorBasis {
    /// Every rating of the dataset; item means over the whole dataset.
    #[default]
    Full,
    /// Training ratings only.
    Train,
}

impl FromStr for FactorBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(FactorBasis::Full),
            "train" => Ok(FactorBasis::Train),
            _ => Err(Error::InvalidArgument(format!("unknown factor basis '{s}' (expected full or train)"))),
        }
    }
}

/// Profile factors of every user with ratings, on the chosen basis.
pub fn factors_on(basis: FactorBasis, ds: &RatingDataset, split: &SplitPair) -> Vec<UserFactors> {
    match basis {
        FactorBasis::Full => user_factors(ds),
        FactorBasis::Train => user_factors(&split.train),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketSpec {
    pub factor: Factor,
    pub num_buckets: usize,
    pub gender: Gender,
}

impl BucketSpec {
    pub fn new(factor: Factor, gender: Gender) -> Self {
        Self {
            factor,
            num_buckets: DEFAULT_BUCKETS,
            gender,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_buckets < 2 {
            return Err(Error::InvalidArgument(format!(
                "bucket count {} must be at least 2",
                self.num_buckets
            )));
        }
        Ok(())
    }
}

/// Sorts `population` by factor value (ties by user id) and cuts it into
/// `num_buckets` contiguous groups. The first `N mod B` buckets hold one
/// user more than the rest.
pub fn bucket_users(population: &[(UserId, f64)], num_buckets: usize) -> Result<Vec<Vec<(UserId, f64)>>> {
    if num_buckets == 0 {
        return Err(Error::InvalidArgument("bucket count must be positive".into()));
    }
    if population.len() < num_buckets {
        return Err(Error::InvalidArgument(format!(
            "population of {} users is smaller than {num_buckets} buckets",
            population.len()
        )));
    }
    if let Some((u, v)) = population.iter().find(|(_, v)| v.is_nan()) {
        return Err(Error::InvalidArgument(format!("factor value {v} of user {u}")));
    }
    let mut sorted = population.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let (base, extra) = (sorted.len() / num_buckets, sorted.len() % num_buckets);
    let mut rest = sorted.as_slice();
    let mut out = Vec::with_capacity(num_buckets);
    for b in 0..num_buckets {
        let (head, tail) = rest.split_at(base + usize::from(b < extra));
        out.push(head.to_vec());
        rest = tail;
    }
    Ok(out)
}

/// One row of a group report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub bucket: usize,
    pub mean_factor: f64,
    /// `None` when no user of the bucket has an outcome.
    pub mean_outcome: Option<f64>,
    pub user_count: usize,
}

/// Per-bucket means of factor values and of outcomes. Bucketed users without
/// an outcome are left out of the outcome mean; a bucket with none at all
/// gets an empty outcome.
pub fn group_aggregate(buckets: &[Vec<(UserId, f64)>], outcomes: &HashMap<UserId, f64>) -> Vec<BucketRow> {
    buckets
        .iter()
        .enumerate()
        .map(|(bucket, members)| {
            let mean_factor = members.iter().map(|(_, v)| v).sum::<f64>() / members.len().max(1) as f64;
            let values: Vec<f64> = members.iter().filter_map(|(u, _)| outcomes.get(u).copied()).collect();
            let mean_outcome = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
            BucketRow {
                bucket,
                mean_factor,
                mean_outcome,
                user_count: members.len(),
            }
        })
        .collect()
}

/// Pearson correlation of `(mean_factor, mean_outcome)` over rows with an
/// outcome. `None` when fewer than two such rows exist or either side is
/// constant.
pub fn rows_correlation(rows: &[BucketRow]) -> Result<Option<f64>> {
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| r.mean_outcome.map(|o| (r.mean_factor, o)))
        .unzip();
    if x.len() < 2 {
        return Ok(None);
    }
    pearson_correlation(&x, &y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub spec: BucketSpec,
    pub outcome_metric: OutcomeMetric,
    pub rows: Vec<BucketRow>,
    pub correlation: Option<f64>,
}

/// Outcomes of one user under one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserOutcome {
    pub user: UserId,
    pub gender: Gender,
    pub precision: f64,
    /// `None` when the model produced an empty list for the user.
    pub miscalibration: Option<f64>,
}

impl UserOutcome {
    pub fn get(&self, metric: OutcomeMetric) -> Option<f64> {
        match metric {
            OutcomeMetric::Precision => Some(self.precision),
            OutcomeMetric::Miscalibration => self.miscalibration,
        }
    }
}

/// Per-user outcomes of a model over the test-covered users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub k: usize,
    pub alpha: f64,
    /// Ascending user id.
    pub outcomes: Vec<UserOutcome>,
}

impl Evaluation {
    pub fn outcome_map(&self, metric: OutcomeMetric) -> HashMap<UserId, f64> {
        self.outcomes
            .iter()
            .filter_map(|o| o.get(metric).map(|v| (o.user, v)))
            .collect()
    }

    /// Mean outcome over users of `gender` (all users when `None`).
    pub fn mean(&self, metric: OutcomeMetric, gender: Option<Gender>) -> Option<f64> {
        let values: Vec<f64> = self
            .outcomes
            .iter()
            .filter(|o| gender.is_none_or(|g| o.gender == g))
            .filter_map(|o| o.get(metric))
            .collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Scores `model` on every user that has test ratings and is known to the
/// model. Precision counts held-out items as relevant (optionally only those
/// rated at least `min_rating`); miscalibration compares the genre
/// distribution of the user's training profile with that of the top-`k` list.
pub fn evaluate(
    split: &SplitPair,
    model: &RecommenderModel,
    k: usize,
    alpha: f64,
    min_rating: Option<u8>,
) -> Result<Evaluation> {
    if k == 0 {
        return Err(Error::InvalidArgument("list length k must be at least 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("smoothing alpha {alpha} outside (0, 1)")));
    }
    let covered: Vec<(UserId, Gender)> = split
        .test
        .profiles()
        .filter(|(u, p)| !p.is_empty() && model.knows_user(u.id))
        .map(|(u, _)| (u.id, u.gender))
        .collect();
    let outcomes = covered
        .par_iter()
        .map(|&(user, gender)| {
            let list = model.recommend(user, k)?;
            let relevant = relevant_items(&split.test, user, min_rating);
            let precision = precision_at_k(&list, &relevant, k)?;
            let miscalibration = if list.is_empty() {
                None
            } else {
                let profile: Vec<_> = split
                    .train
                    .user_ratings(user)
                    .unwrap_or_default()
                    .iter()
                    .map(|r| (r.item, 1.0))
                    .collect();
                let p = genre_distribution(&profile, &split.train)?;
                let q = genre_distribution(&list.items().map(|i| (i, 1.0)).collect::<Vec<_>>(), &split.train)?;
                Some(miscalibration(&p, &q, alpha)?)
            };
            Ok(UserOutcome {
                user,
                gender,
                precision,
                miscalibration,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation { k, alpha, outcomes })
}

/// Buckets the users of `spec.gender` that have both factors and an outcome
/// for `metric`, and aggregates each bucket.
pub fn build_report(
    spec: &BucketSpec,
    metric: OutcomeMetric,
    factors: &[UserFactors],
    evaluation: &Evaluation,
) -> Result<GroupReport> {
    spec.validate()?;
    let outcomes = evaluation.outcome_map(metric);
    let genders: HashMap<UserId, Gender> = evaluation.outcomes.iter().map(|o| (o.user, o.gender)).collect();
    let population: Vec<(UserId, f64)> = factors
        .iter()
        .filter(|f| genders.get(&f.user) == Some(&spec.gender) && outcomes.contains_key(&f.user))
        .map(|f| (f.user, spec.factor.value(f)))
        .collect();
    let buckets = bucket_users(&population, spec.num_buckets)?;
    let rows = group_aggregate(&buckets, &outcomes);
    let correlation = rows_correlation(&rows)?;
    Ok(GroupReport {
        spec: *spec,
        outcome_metric: metric,
        rows,
        correlation,
    })
}

/// Full audit of one model: factors on all of `ds`, outcomes on the test
/// part of `split`, with the default smoothing alpha.
pub fn audit_report(
    ds: &RatingDataset,
    split: &SplitPair,
    model: &RecommenderModel,
    spec: &BucketSpec,
    metric: OutcomeMetric,
    k: usize,
) -> Result<GroupReport> {
    let evaluation = evaluate(split, model, k, DEFAULT_ALPHA, None)?;
    build_report(spec, metric, &user_factors(ds), &evaluation)
}
