//! ListRankMF: list-wise matrix factorization with top-one probabilities.
//!
//! For a user with rated items `I_u`, the target top-one probability of item
//! `i` is `softmax_{I_u}(σ(r_ui))` and the modeled one is
//! `softmax_{I_u}(σ(U_u · V_i))`, with σ the logistic function. The loss of a
//! user is the cross-entropy between the two plus
//! `λ/2 (|U_u|² + Σ_{i∈I_u} |V_i|²)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::index::TrainingIndex;
use super::mf::{all_finite, dot, row, row_mut, squared_norm, uniform_factors, EpochTrainer};
use super::MfParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListRankParams {
    pub factors: usize,
    /// `num_users × factors`, row-major.
    pub user_factors: Vec<f64>,
    /// `num_items × factors`, row-major.
    pub item_factors: Vec<f64>,
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Softmax with max-shift.
fn softmax(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Target top-one probabilities of a user's rated items.
pub fn target_distribution(ratings: &[f64]) -> Vec<f64> {
    softmax(&ratings.iter().map(|&r| logistic(r)).collect::<Vec<_>>())
}

impl ListRankParams {
    pub fn init(index: &TrainingIndex, factors: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            factors,
            user_factors: uniform_factors(rng, index.num_users() * factors),
            item_factors: uniform_factors(rng, index.num_items() * factors),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            factors: self.factors,
            user_factors: vec![0.0; self.user_factors.len()],
            item_factors: vec![0.0; self.item_factors.len()],
        }
    }

    pub fn blocks(&self) -> [&[f64]; 2] {
        [&self.user_factors, &self.item_factors]
    }

    pub fn blocks_mut(&mut self) -> [&mut Vec<f64>; 2] {
        [&mut self.user_factors, &mut self.item_factors]
    }

    pub fn is_finite(&self) -> bool {
        all_finite(self.blocks())
    }

    pub fn score(&self, u: usize, i: usize) -> f64 {
        dot(row(&self.user_factors, u, self.factors), row(&self.item_factors, i, self.factors))
    }

    pub fn scores(&self, index: &TrainingIndex, u: usize) -> Vec<f64> {
        (0..index.num_items()).map(|i| self.score(u, i)).collect()
    }

    /// Loss of user `u` and the derivative of its cross-entropy term with
    /// respect to each rated item's score.
    fn user_loss(&self, index: &TrainingIndex, u: usize, reg: f64) -> (f64, Vec<f64>) {
        let f = self.factors;
        let (items, values) = index.user_row(u);
        let target = target_distribution(values);
        let g: Vec<f64> = items.iter().map(|&i| logistic(self.score(u, i as usize))).collect();
        let model = softmax(&g);
        let cross_entropy: f64 = target.iter().zip(&model).map(|(p, q)| -p * q.ln()).sum();
        let penalty = squared_norm(row(&self.user_factors, u, f))
            + items
                .iter()
                .map(|&i| squared_norm(row(&self.item_factors, i as usize, f)))
                .sum::<f64>();
        let delta = target
            .iter()
            .zip(&model)
            .zip(&g)
            .map(|((p, q), g)| (q - p) * g * (1.0 - g))
            .collect();
        (cross_entropy + 0.5 * reg * penalty, delta)
    }
}

/// Objective and gradient over a batch of dense users.
pub fn listrankmf_loss_and_grad(
    params: &ListRankParams,
    index: &TrainingIndex,
    users: &[u32],
    reg: f64,
) -> Result<(f64, ListRankParams)> {
    if users.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if !params.is_finite() {
        return Err(Error::NonFiniteParams);
    }
    let f = params.factors;
    let mut grad = params.zeros_like();
    let mut loss = 0.0;
    for &u in users {
        let u = u as usize;
        let (items, _) = index.user_row(u);
        if items.is_empty() {
            return Err(Error::InvalidArgument(format!("user index {u} has no training ratings")));
        }
        let (l, delta) = params.user_loss(index, u, reg);
        loss += l;
        let uf = row(&params.user_factors, u, f);
        for (&i, d) in items.iter().zip(&delta) {
            let vf = row(&params.item_factors, i as usize, f);
            let gu = row_mut(&mut grad.user_factors, u, f);
            for k in 0..f {
                gu[k] += d * vf[k];
            }
            let gv = row_mut(&mut grad.item_factors, i as usize, f);
            for k in 0..f {
                gv[k] += d * uf[k] + reg * vf[k];
            }
        }
        let gu = row_mut(&mut grad.user_factors, u, f);
        for k in 0..f {
            gu[k] += reg * uf[k];
        }
    }
    Ok((loss, grad))
}

pub fn listrankmf_objective(params: &ListRankParams, index: &TrainingIndex, reg: f64) -> f64 {
    (0..index.num_users()).map(|u| params.user_loss(index, u, reg).0).sum()
}

/// Sum over users of the entropy of their target distribution: a lower bound
/// of the objective.
pub fn entropy_floor(index: &TrainingIndex, users: &[u32]) -> f64 {
    users
        .iter()
        .map(|&u| {
            let (_, values) = index.user_row(u as usize);
            -target_distribution(values).iter().map(|p| p * p.ln()).sum::<f64>()
        })
        .sum()
}

/// Per-user gradient steps over users in shuffled order.
pub(crate) struct ListRankTrainer<'a> {
    pub(crate) index: &'a TrainingIndex,
    pub(crate) params: ListRankParams,
    config: MfParams,
    rng: ChaCha8Rng,
    order: Vec<usize>,
}

impl<'a> ListRankTrainer<'a> {
    pub(crate) fn new(index: &'a TrainingIndex, config: &MfParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ListRankParams::init(index, config.factors, &mut rng);
        Self {
            index,
            params,
            config: config.clone(),
            rng,
            order: (0..index.num_users()).collect(),
        }
    }
}

impl EpochTrainer for ListRankTrainer<'_> {
    fn run_epoch(&mut self) {
        let f = self.config.factors;
        let (lr, reg) = (self.config.learning_rate, self.config.regularization);
        self.order.shuffle(&mut self.rng);
        let mut grad_u = vec![0.0; f];
        for &u in &self.order {
            let p = &mut self.params;
            let (items, _) = self.index.user_row(u);
            let (_, delta) = p.user_loss(self.index, u, reg);
            let uf: Vec<f64> = row(&p.user_factors, u, f).to_vec();
            for (k, g) in grad_u.iter_mut().enumerate() {
                *g = reg * uf[k];
            }
            for (&i, d) in items.iter().zip(&delta) {
                let vf = row_mut(&mut p.item_factors, i as usize, f);
                for k in 0..f {
                    grad_u[k] += d * vf[k];
                    vf[k] -= lr * (d * uf[k] + reg * vf[k]);
                }
            }
            for (w, g) in row_mut(&mut p.user_factors, u, f).iter_mut().zip(&grad_u) {
                *w -= lr * g;
            }
        }
    }

    fn objective(&self) -> f64 {
        listrankmf_objective(&self.params, self.index, self.config.regularization)
    }
}
