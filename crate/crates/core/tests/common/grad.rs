//! Finite-difference helpers for the factor-model objectives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recfair::data::{generate_synthetic, SyntheticSpec};
use recfair::recommenders::{
    entropy_floor, listrankmf_loss_and_grad, svdpp_loss_and_grad, ListRankParams, Observation, SvdPpParams,
    TrainingIndex,
};

pub const STEP: f64 = 1e-6;

pub fn index(seed: u64) -> TrainingIndex {
    let mut spec = SyntheticSpec::small(6, 8, seed);
    spec.ratings_per_user = (2, 6);
    TrainingIndex::new(&generate_synthetic(&spec).unwrap())
}

pub fn observations(index: &TrainingIndex) -> Vec<Observation> {
    let mut out = Vec::new();
    for u in 0..index.num_users() {
        let (items, values) = index.user_row(u);
        for (&i, &r) in items.iter().zip(values) {
            out.push(Observation {
                user: u as u32,
                item: i,
                rating: r,
            });
        }
    }
    out
}

pub fn randomize(blocks: [&mut Vec<f64>; 5], rng: &mut ChaCha8Rng) {
    for block in blocks {
        for v in block.iter_mut() {
            *v = rng.gen_range(-0.5..0.5);
        }
    }
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-300)
}

pub fn flatten(blocks: &[&[f64]]) -> Vec<f64> {
    blocks.iter().flat_map(|b| b.iter().copied()).collect()
}

/// Central differences of `loss` over every coordinate of every block.
pub fn numeric_gradient<P: Clone>(
    params: &P,
    block_count: usize,
    blocks_mut: impl Fn(&mut P) -> Vec<&mut Vec<f64>>,
    loss: impl Fn(&P) -> f64,
) -> Vec<f64> {
    let mut out = Vec::new();
    for b in 0..block_count {
        let len = blocks_mut(&mut params.clone())[b].len();
        for n in 0..len {
            let mut plus = params.clone();
            blocks_mut(&mut plus)[b][n] += STEP;
            let mut minus = params.clone();
            blocks_mut(&mut minus)[b][n] -= STEP;
            out.push((loss(&plus) - loss(&minus)) / (2.0 * STEP));
        }
    }
    out
}

/// Relative gradient error of the SVD++ objective at random point `point`.
pub fn svdpp_error(point: u64) -> f64 {
    let index = index(10 + point);
    let mut rng = ChaCha8Rng::seed_from_u64(100 + point);
    let mut params = SvdPpParams::init(&index, 3, &mut rng);
    randomize(params.blocks_mut(), &mut rng);
    let batch = observations(&index);
    let reg = 0.05;
    let (_, grad) = svdpp_loss_and_grad(&params, &index, &batch, reg).unwrap();
    let numeric = numeric_gradient(
        &params,
        5,
        |p| p.blocks_mut().into_iter().collect(),
        |p| svdpp_loss_and_grad(p, &index, &batch, reg).unwrap().0,
    );
    relative_error(&flatten(&grad.blocks()), &numeric)
}

/// Relative gradient error of the ListRankMF objective at random point
/// `point`.
pub fn listrankmf_error(point: u64) -> f64 {
    let index = index(20 + point);
    let mut rng = ChaCha8Rng::seed_from_u64(200 + point);
    let mut params = ListRankParams::init(&index, 3, &mut rng);
    for block in params.blocks_mut() {
        for v in block.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    let users: Vec<u32> = (0..index.num_users() as u32).collect();
    let reg = 0.05;
    let (loss, grad) = listrankmf_loss_and_grad(&params, &index, &users, reg).unwrap();
    assert!(loss >= entropy_floor(&index, &users));
    let numeric = numeric_gradient(
        &params,
        2,
        |p| p.blocks_mut().into_iter().collect(),
        |p| listrankmf_loss_and_grad(p, &index, &users, reg).unwrap().0,
    );
    relative_error(&flatten(&grad.blocks()), &numeric)
}
