//! Shared machinery of the two latent-factor models.

use rand::distributions::{Distribution, Uniform};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One training rating in dense indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub user: u32,
    pub item: u32,
    pub rating: f64,
}

/// Half-width of the uniform factor initialization.
pub const INIT_RANGE: f64 = 0.01;

pub(crate) fn uniform_factors(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let dist = Uniform::new(-INIT_RANGE, INIT_RANGE);
    (0..len).map(|_| dist.sample(rng)).collect()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn squared_norm(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub(crate) fn row(data: &[f64], r: usize, width: usize) -> &[f64] {
    &data[r * width..(r + 1) * width]
}

#[inline]
pub(crate) fn row_mut(data: &mut [f64], r: usize, width: usize) -> &mut [f64] {
    &mut data[r * width..(r + 1) * width]
}

pub(crate) fn all_finite<'a>(blocks: impl IntoIterator<Item = &'a [f64]>) -> bool {
    blocks.into_iter().all(|b| b.iter().all(|v| v.is_finite()))
}

/// A model trained one SGD epoch at a time.
pub(crate) trait EpochTrainer {
    fn run_epoch(&mut self);
    /// Full training objective at the current parameters.
    fn objective(&self) -> f64;
}

/// Runs `epochs` epochs, recording the objective before training and after
/// every epoch. `after_epoch` sees the trainer after each completed epoch.
pub(crate) fn train_epochs<T: EpochTrainer>(
    trainer: &mut T,
    epochs: usize,
    mut after_epoch: impl FnMut(usize, &T, &[f64]) -> Result<()>,
) -> Result<Vec<f64>> {
    let initial = trainer.objective();
    if !initial.is_finite() {
        return Err(Error::Diverged {
            epoch: 0,
            loss: initial,
        });
    }
    let mut history = vec![initial];
    for epoch in 1..=epochs {
        trainer.run_epoch();
        let loss = trainer.objective();
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        history.push(loss);
        log::debug!("epoch {epoch}: objective {loss:.6}");
        after_epoch(epoch, trainer, &history)?;
    }
    Ok(history)
}
