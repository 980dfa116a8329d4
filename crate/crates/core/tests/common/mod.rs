#![allow(dead_code)]

pub mod grad;
pub mod knn;

use std::path::Path;

use recfair::cli::RunConfig;
use recfair::data::{generate_synthetic, write_canonical, RatingDataset, SyntheticSpec};
use recfair::recommenders::{HyperParamGrid, KnnScoring};

pub fn synthetic(users: usize, items: usize, seed: u64) -> RatingDataset {
    let mut spec = SyntheticSpec::small(users, items, seed);
    spec.ratings_per_user = (10, 40);
    generate_synthetic(&spec).unwrap()
}

/// A grid small enough for a test run.
pub fn tiny_grid() -> HyperParamGrid {
    HyperParamGrid {
        neighbors: vec![10, 20],
        shrinkage: vec![0.0],
        knn_scoring: vec![KnnScoring::SimilaritySum],
        factors: vec![5],
        learning_rates: vec![0.01],
        regularization: vec![0.05],
        epochs: vec![3, 6],
    }
}

/// Writes a synthetic dataset under `root/data` and returns a config that
/// reads it and writes runs under `root/runs`.
pub fn synthetic_config(root: &Path, users: usize, items: usize, seed: u64) -> RunConfig {
    let data = root.join("data");
    write_canonical(&synthetic(users, items, seed), &data).unwrap();
    RunConfig {
        data_dir: data,
        out_dir: root.join("runs"),
        grid: tiny_grid(),
        buckets: 5,
        ..RunConfig::default()
    }
}
