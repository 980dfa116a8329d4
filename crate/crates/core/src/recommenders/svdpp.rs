//! SVD++: biased matrix factorization with implicit feedback.
//!
//! `r̂(u,i) = μ + b_u + b_i + q_i · (p_u + |N(u)|^-½ Σ_{j∈N(u)} y_j)` where
//! `N(u)` is the set of items `u` rated in training. The objective sums, over
//! the observed ratings, the squared error plus
//! `λ (b_u² + b_i² + |p_u|² + |q_i|² + Σ_{j∈N(u)} |y_j|²)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::index::TrainingIndex;
use super::mf::{all_finite, dot, row, row_mut, squared_norm, uniform_factors, EpochTrainer, Observation};
use super::MfParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvdPpParams {
    pub factors: usize,
    /// Fixed at the training mean; not learned.
    pub global_mean: f64,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    /// `num_users × factors`, row-major.
    pub user_factors: Vec<f64>,
    /// `num_items × factors`, row-major.
    pub item_factors: Vec<f64>,
    /// Implicit item factors `y`, `num_items × factors`.
    pub implicit_factors: Vec<f64>,
}

impl SvdPpParams {
    /// Zero biases; factors uniform in ±0.01 drawn in the order user, item,
    /// implicit.
    pub fn init(index: &TrainingIndex, factors: usize, rng: &mut ChaCha8Rng) -> Self {
        let (nu, ni) = (index.num_users(), index.num_items());
        Self {
            factors,
            global_mean: index.global_mean(),
            user_bias: vec![0.0; nu],
            item_bias: vec![0.0; ni],
            user_factors: uniform_factors(rng, nu * factors),
            item_factors: uniform_factors(rng, ni * factors),
            implicit_factors: uniform_factors(rng, ni * factors),
        }
    }

    /// Same shape, all zeros (also used as a gradient accumulator).
    pub fn zeros_like(&self) -> Self {
        Self {
            factors: self.factors,
            global_mean: 0.0,
            user_bias: vec![0.0; self.user_bias.len()],
            item_bias: vec![0.0; self.item_bias.len()],
            user_factors: vec![0.0; self.user_factors.len()],
            item_factors: vec![0.0; self.item_factors.len()],
            implicit_factors: vec![0.0; self.implicit_factors.len()],
        }
    }

    /// Learned parameter blocks, in a fixed order.
    pub fn blocks(&self) -> [&[f64]; 5] {
        [
            &self.user_bias,
            &self.item_bias,
            &self.user_factors,
            &self.item_factors,
            &self.implicit_factors,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [
            &mut self.user_bias,
            &mut self.item_bias,
            &mut self.user_factors,
            &mut self.item_factors,
            &mut self.implicit_factors,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.global_mean.is_finite() && all_finite(self.blocks())
    }

    /// `|N(u)|^-½ Σ_{j∈N(u)} y_j`.
    pub fn implicit_sum(&self, index: &TrainingIndex, u: usize) -> Vec<f64> {
        let f = self.factors;
        let (items, _) = index.user_row(u);
        let mut z = vec![0.0; f];
        for &j in items {
            for (acc, y) in z.iter_mut().zip(row(&self.implicit_factors, j as usize, f)) {
                *acc += y;
            }
        }
        if !items.is_empty() {
            let scale = 1.0 / (items.len() as f64).sqrt();
            z.iter_mut().for_each(|v| *v *= scale);
        }
        z
    }

    /// `p_u + |N(u)|^-½ Σ y_j`.
    pub fn user_vector(&self, index: &TrainingIndex, u: usize) -> Vec<f64> {
        let mut z = self.implicit_sum(index, u);
        for (v, p) in z.iter_mut().zip(row(&self.user_factors, u, self.factors)) {
            *v += p;
        }
        z
    }

    pub fn predict(&self, index: &TrainingIndex, u: usize, i: usize) -> f64 {
        let uv = self.user_vector(index, u);
        self.predict_with(&uv, u, i)
    }

    #[inline]
    pub(crate) fn predict_with(&self, user_vector: &[f64], u: usize, i: usize) -> f64 {
        self.global_mean
            + self.user_bias[u]
            + self.item_bias[i]
            + dot(row(&self.item_factors, i, self.factors), user_vector)
    }

    /// Predicted ratings of every dense item for user `u`.
    pub fn scores(&self, index: &TrainingIndex, u: usize) -> Vec<f64> {
        let uv = self.user_vector(index, u);
        (0..index.num_items()).map(|i| self.predict_with(&uv, u, i)).collect()
    }

    fn implicit_norm(&self, index: &TrainingIndex, u: usize) -> f64 {
        let (items, _) = index.user_row(u);
        items
            .iter()
            .map(|&j| squared_norm(row(&self.implicit_factors, j as usize, self.factors)))
            .sum()
    }

    fn example_penalty(&self, u: usize, i: usize, implicit_norm: f64) -> f64 {
        let f = self.factors;
        self.user_bias[u].powi(2)
            + self.item_bias[i].powi(2)
            + squared_norm(row(&self.user_factors, u, f))
            + squared_norm(row(&self.item_factors, i, f))
            + implicit_norm
    }
}

/// Objective and gradient over a batch of observations.
pub fn svdpp_loss_and_grad(
    params: &SvdPpParams,
    index: &TrainingIndex,
    batch: &[Observation],
    reg: f64,
) -> Result<(f64, SvdPpParams)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if !params.is_finite() {
        return Err(Error::NonFiniteParams);
    }
    let f = params.factors;
    let mut grad = params.zeros_like();
    let mut loss = 0.0;
    for obs in batch {
        let (u, i) = (obs.user as usize, obs.item as usize);
        let (items, _) = index.user_row(u);
        let scale = if items.is_empty() { 0.0 } else { 1.0 / (items.len() as f64).sqrt() };
        let z = params.implicit_sum(index, u);
        let p = row(&params.user_factors, u, f);
        let q = row(&params.item_factors, i, f);
        let uv: Vec<f64> = p.iter().zip(&z).map(|(a, b)| a + b).collect();
        let err = obs.rating - params.predict_with(&uv, u, i);
        loss += err * err + reg * params.example_penalty(u, i, params.implicit_norm(index, u));

        grad.user_bias[u] += -2.0 * err + 2.0 * reg * params.user_bias[u];
        grad.item_bias[i] += -2.0 * err + 2.0 * reg * params.item_bias[i];
        for k in 0..f {
            row_mut(&mut grad.user_factors, u, f)[k] += -2.0 * err * q[k] + 2.0 * reg * p[k];
            row_mut(&mut grad.item_factors, i, f)[k] += -2.0 * err * uv[k] + 2.0 * reg * q[k];
        }
        for &j in items {
            let y = row(&params.implicit_factors, j as usize, f);
            let g = row_mut(&mut grad.implicit_factors, j as usize, f);
            for k in 0..f {
                g[k] += -2.0 * err * scale * q[k] + 2.0 * reg * y[k];
            }
        }
    }
    Ok((loss, grad))
}

/// Objective over every training rating.
pub fn svdpp_objective(params: &SvdPpParams, index: &TrainingIndex, reg: f64) -> f64 {
    let mut loss = 0.0;
    for u in 0..index.num_users() {
        let uv = params.user_vector(index, u);
        let implicit = params.implicit_norm(index, u);
        let (items, values) = index.user_row(u);
        for (&i, &r) in items.iter().zip(values) {
            let err = r - params.predict_with(&uv, u, i as usize);
            loss += err * err + reg * params.example_penalty(u, i as usize, implicit);
        }
    }
    loss
}

/// Stochastic gradient descent over users in shuffled order.
///
/// Within a user, ratings are visited in shuffled order with the implicit
/// sum held fixed; the implicit factors of `N(u)` receive the accumulated
/// gradient once per user, with the per-rating weight decay compounded.
pub(crate) struct SvdPpTrainer<'a> {
    pub(crate) index: &'a TrainingIndex,
    pub(crate) params: SvdPpParams,
    config: MfParams,
    rng: ChaCha8Rng,
    user_order: Vec<usize>,
    rating_order: Vec<usize>,
}

impl<'a> SvdPpTrainer<'a> {
    pub(crate) fn new(index: &'a TrainingIndex, config: &MfParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = SvdPpParams::init(index, config.factors, &mut rng);
        Self {
            index,
            params,
            config: config.clone(),
            rng,
            user_order: (0..index.num_users()).collect(),
            rating_order: Vec::new(),
        }
    }
}

impl EpochTrainer for SvdPpTrainer<'_> {
    fn run_epoch(&mut self) {
        let f = self.config.factors;
        let (lr, reg) = (self.config.learning_rate, self.config.regularization);
        let p = &mut self.params;
        self.user_order.shuffle(&mut self.rng);
        let mut acc = vec![0.0; f];
        for &u in &self.user_order {
            let (items, values) = self.index.user_row(u);
            let scale = 1.0 / (items.len() as f64).sqrt();
            let z = p.implicit_sum(self.index, u);
            acc.iter_mut().for_each(|v| *v = 0.0);
            self.rating_order.clear();
            self.rating_order.extend(0..items.len());
            self.rating_order.shuffle(&mut self.rng);
            for &k in &self.rating_order {
                let i = items[k] as usize;
                let uf = row_mut(&mut p.user_factors, u, f);
                let qf = row_mut(&mut p.item_factors, i, f);
                let mut pred = p.global_mean + p.user_bias[u] + p.item_bias[i];
                for d in 0..f {
                    pred += qf[d] * (uf[d] + z[d]);
                }
                let err = values[k] - pred;
                for d in 0..f {
                    let (pu, qi) = (uf[d], qf[d]);
                    uf[d] += lr * (err * qi - reg * pu);
                    qf[d] += lr * (err * (pu + z[d]) - reg * qi);
                    acc[d] += err * scale * qi;
                }
                p.user_bias[u] += lr * (err - reg * p.user_bias[u]);
                p.item_bias[i] += lr * (err - reg * p.item_bias[i]);
            }
            let decay = (1.0 - lr * reg).powi(items.len() as i32);
            for &j in items {
                for (y, a) in row_mut(&mut p.implicit_factors, j as usize, f).iter_mut().zip(&acc) {
                    *y = *y * decay + lr * a;
                }
            }
        }
    }

    fn objective(&self) -> f64 {
        svdpp_objective(&self.params, self.index, self.config.regularization)
    }
}
