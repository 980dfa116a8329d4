//! Run configuration: a single JSON document, with command-line overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audit::{Factor, FactorBasis, OutcomeMetric, DEFAULT_ALPHA, DEFAULT_BUCKETS};
use crate::data::{load_dataset, read_canonical, RatingDataset, RatingScale, ML1M_MOVIES, ML1M_RATINGS, ML1M_USERS};
use crate::error::{Error, Result};
use crate::recommenders::{Algorithm, HyperParamGrid, HyperParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding either the MovieLens-1M `.dat` files or the
    /// canonical CSV files written by `ingest`.
    pub data_dir: PathBuf,
    pub split_ratio: f64,
    /// Share of the training part kept for fitting during grid search; the
    /// rest is the validation set.
    pub validation_ratio: f64,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub grid: HyperParamGrid,
    /// Fixed hyperparameters; algorithms listed here skip the grid search.
    pub params: BTreeMap<Algorithm, HyperParams>,
    pub k: usize,
    pub factors: Vec<Factor>,
    pub metrics: Vec<OutcomeMetric>,
    pub buckets: usize,
    pub alpha: f64,
    /// Minimum held-out rating counted as relevant; every held-out item when
    /// unset.
    pub relevance_threshold: Option<u8>,
    pub factor_basis: FactorBasis,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data/ml-1m"),
            split_ratio: 0.8,
            validation_ratio: 0.9,
            seed: 42,
            algorithms: Algorithm::ALL.to_vec(),
            grid: HyperParamGrid::default(),
            params: BTreeMap::new(),
            k: 10,
            factors: Factor::ALL.to_vec(),
            metrics: OutcomeMetric::ALL.to_vec(),
            buckets: DEFAULT_BUCKETS,
            alpha: DEFAULT_ALPHA,
            relevance_threshold: None,
            factor_basis: FactorBasis::Full,
            out_dir: PathBuf::from("runs"),
        }
    }
}

/// Seeds of the individual random stages, all derived from the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub split: u64,
    pub validation: u64,
    pub model: u64,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn seeds(&self) -> Seeds {
        Seeds {
            split: self.seed,
            validation: self.seed.wrapping_add(1),
            model: self.seed.wrapping_add(2),
        }
    }

    /// Checks ranges and that the data directory exists.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !self.data_dir.is_dir() {
            return bad(format!("data directory {} does not exist", self.data_dir.display()));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio <= 1.0) {
            return bad(format!("split_ratio {} outside (0, 1]", self.split_ratio));
        }
        if !(self.validation_ratio > 0.0 && self.validation_ratio < 1.0) {
            return bad(format!("validation_ratio {} outside (0, 1)", self.validation_ratio));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.buckets < 2 {
            return bad(format!("buckets {} must be at least 2", self.buckets));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} outside (0, 1)", self.alpha));
        }
        if self.algorithms.is_empty() || self.factors.is_empty() || self.metrics.is_empty() {
            return bad("algorithms, factors and metrics must be non-empty".into());
        }
        for &algorithm in &self.algorithms {
            match self.params.get(&algorithm) {
                Some(hp) => hp.validate(algorithm)?,
                None => self.grid.validate(algorithm)?,
            }
        }
        Ok(())
    }

    pub fn load_dataset(&self) -> Result<RatingDataset> {
        load_data_dir(&self.data_dir)
    }
}

/// Loads MovieLens-1M files when present, canonical CSV files otherwise.
pub fn load_data_dir(dir: &Path) -> Result<RatingDataset> {
    if dir.join(ML1M_RATINGS).is_file() {
        load_dataset(&dir.join(ML1M_RATINGS), &dir.join(ML1M_USERS), &dir.join(ML1M_MOVIES))
    } else if dir.join("ratings.csv").is_file() {
        read_canonical(dir, RatingScale::five_star())
    } else {
        Err(Error::Config(format!(
            "{} holds neither {ML1M_RATINGS} nor ratings.csv",
            dir.display()
        )))
    }
}
