//! Fairness auditing for collaborative-filtering recommenders.
//!
//! The crate trains four recommenders (user- and item-based KNN, SVD++ and
//! ListRankMF) on MovieLens-style rating data, measures per-user profile
//! factors (anomaly, entropy, size) together with outcome metrics
//! (precision@k and genre miscalibration), and aggregates both into
//! gender-separated, factor-sorted bucket reports with a Pearson correlation
//! per report.
//!
//! Module map:
//! - [`data`]: dataset types, the MovieLens-1M loader, seeded splits and a
//!   synthetic generator.
//! - [`metrics`]: profile factors, outcome metrics and correlation.
//! - [`recommenders`]: the four models, grid search and checkpoints.
//! - [`audit`]: per-user evaluation, bucketing and group reports.
//! - [`cli`]: run configuration and the pipeline driver behind the binary.

pub mod audit;
pub mod cli;
pub mod data;
pub mod error;
pub mod metrics;
pub mod recommenders;

pub use error::{Error, Result};
