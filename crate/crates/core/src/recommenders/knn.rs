//! Neighborhood models.
//!
//! User-based: mean-centered Pearson similarity between users (centering by
//! each user's mean over all of their training ratings, sums over co-rated
//! items). Item-based: adjusted cosine between items (ratings centered by the
//! rating user's mean, sums over co-rating users). Pairs sharing fewer than
//! two co-ratings get similarity 0; an optional shrinkage multiplies the
//! similarity by `n / (n + shrinkage)` for `n` co-ratings.

use serde::{Deserialize, Serialize};

use super::index::TrainingIndex;
use super::KnnParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub index: u32,
    pub sim: f64,
}

/// How a neighborhood model turns neighbor evidence into a ranking score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnnScoring {
    /// Rank by the predicted rating.
    Rating,
    /// Rank by the summed similarity of the neighbors that contribute.
    SimilaritySum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    /// Top-n neighbor list per user (user-based) or per item (item-based),
    /// sorted by similarity descending then index ascending. Zero
    /// similarities are never stored.
    pub neighbors: Vec<Vec<Neighbor>>,
    pub user_means: Vec<f64>,
}

/// Similarity from co-rating sums.
pub fn similarity_from_sums(dot: f64, sq_a: f64, sq_b: f64, count: usize, shrinkage: f64) -> f64 {
    if count < 2 || sq_a <= 0.0 || sq_b <= 0.0 {
        return 0.0;
    }
    let sim = dot / (sq_a * sq_b).sqrt();
    if shrinkage > 0.0 {
        sim * count as f64 / (count as f64 + shrinkage)
    } else {
        sim
    }
}

fn user_means(index: &TrainingIndex) -> Vec<f64> {
    (0..index.num_users()).map(|u| index.user_mean(u)).collect()
}

fn merged_similarity(a: (&[u32], &[f64]), b: (&[u32], &[f64]), shrinkage: f64) -> f64 {
    let (mut x, mut y) = (0, 0);
    let (mut dot, mut sq_a, mut sq_b, mut count) = (0.0, 0.0, 0.0, 0usize);
    while x < a.0.len() && y < b.0.len() {
        match a.0[x].cmp(&b.0[y]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                let (ca, cb) = (a.1[x], b.1[y]);
                dot += ca * cb;
                sq_a += ca * ca;
                sq_b += cb * cb;
                count += 1;
                x += 1;
                y += 1;
            }
        }
    }
    similarity_from_sums(dot, sq_a, sq_b, count, shrinkage)
}

/// Centered rating matrix in both orientations.
struct Centered {
    by_user: Vec<f64>,
    by_item: Vec<f64>,
    user_offsets: Vec<usize>,
    item_offsets: Vec<usize>,
}

impl Centered {
    /// Ratings centered by the rating user's mean.
    fn new(index: &TrainingIndex, means: &[f64]) -> Self {
        let mut by_user = Vec::with_capacity(index.num_ratings());
        let mut user_offsets = vec![0];
        for u in 0..index.num_users() {
            by_user.extend(index.user_row(u).1.iter().map(|v| v - means[u]));
            user_offsets.push(by_user.len());
        }
        let mut by_item = Vec::with_capacity(index.num_ratings());
        let mut item_offsets = vec![0];
        for i in 0..index.num_items() {
            let (users, values) = index.item_column(i);
            by_item.extend(users.iter().zip(values).map(|(&u, v)| v - means[u as usize]));
            item_offsets.push(by_item.len());
        }
        Self {
            by_user,
            by_item,
            user_offsets,
            item_offsets,
        }
    }

    fn user<'a>(&'a self, index: &'a TrainingIndex, u: usize) -> (&'a [u32], &'a [f64]) {
        (index.user_row(u).0, &self.by_user[self.user_offsets[u]..self.user_offsets[u + 1]])
    }

    fn item<'a>(&'a self, index: &'a TrainingIndex, i: usize) -> (&'a [u32], &'a [f64]) {
        (index.item_column(i).0, &self.by_item[self.item_offsets[i]..self.item_offsets[i + 1]])
    }
}

/// Mean-centered Pearson similarity between dense users `a` and `b`.
pub fn user_similarity(index: &TrainingIndex, a: usize, b: usize, shrinkage: f64) -> f64 {
    let means = [index.user_mean(a), index.user_mean(b)];
    let center = |u: usize, mean: f64| -> (Vec<u32>, Vec<f64>) {
        let (items, values) = index.user_row(u);
        (items.to_vec(), values.iter().map(|v| v - mean).collect())
    };
    let (ia, va) = center(a, means[0]);
    let (ib, vb) = center(b, means[1]);
    merged_similarity((&ia, &va), (&ib, &vb), shrinkage)
}

/// Adjusted-cosine similarity between dense items `i` and `j`.
pub fn item_similarity(index: &TrainingIndex, i: usize, j: usize, shrinkage: f64) -> f64 {
    let center = |item: usize| -> (Vec<u32>, Vec<f64>) {
        let (users, values) = index.item_column(item);
        let centered = users
            .iter()
            .zip(values)
            .map(|(&u, v)| v - index.user_mean(u as usize))
            .collect();
        (users.to_vec(), centered)
    };
    let (ui, vi) = center(i);
    let (uj, vj) = center(j);
    merged_similarity((&ui, &vi), (&uj, &vj), shrinkage)
}

/// Keeps the `n` strongest neighbors, ordered by similarity descending and
/// index ascending.
fn select_top(mut candidates: Vec<Neighbor>, n: usize) -> Vec<Neighbor> {
    let order = |a: &Neighbor, b: &Neighbor| b.sim.total_cmp(&a.sim).then(a.index.cmp(&b.index));
    if candidates.len() > n {
        candidates.select_nth_unstable_by(n, order);
        candidates.truncate(n);
    }
    candidates.sort_unstable_by(order);
    candidates
}

/// Top-n neighbors of every entity of one orientation.
///
/// `rows(a)` lists the features of entity `a` and `cols(f)` the entities
/// carrying feature `f`, both with centered values and ascending indices.
/// For each pair the co-rating sums run over shared features in ascending
/// order, the same order [`merged_similarity`] uses, so both routes agree
/// exactly and the result is symmetric.
fn neighborhoods<'a>(
    entities: usize,
    rows: impl Fn(usize) -> (&'a [u32], &'a [f64]),
    cols: impl Fn(usize) -> (&'a [u32], &'a [f64]),
    params: &KnnParams,
) -> Vec<Vec<Neighbor>> {
    let mut dot = vec![0.0; entities];
    let mut sq_a = vec![0.0; entities];
    let mut sq_b = vec![0.0; entities];
    let mut count = vec![0usize; entities];
    let mut touched = Vec::new();
    (0..entities)
        .map(|a| {
            let (features, va) = rows(a);
            for (&f, &ca) in features.iter().zip(va) {
                let (others, vb) = cols(f as usize);
                for (&b, &cb) in others.iter().zip(vb) {
                    let b = b as usize;
                    if b == a {
                        continue;
                    }
                    if count[b] == 0 {
                        touched.push(b);
                    }
                    dot[b] += ca * cb;
                    sq_a[b] += ca * ca;
                    sq_b[b] += cb * cb;
                    count[b] += 1;
                }
            }
            let mut candidates = Vec::with_capacity(touched.len());
            for &b in &touched {
                let sim = similarity_from_sums(dot[b], sq_a[b], sq_b[b], count[b], params.shrinkage);
                if sim != 0.0 {
                    candidates.push(Neighbor { index: b as u32, sim });
                }
                dot[b] = 0.0;
                sq_a[b] = 0.0;
                sq_b[b] = 0.0;
                count[b] = 0;
            }
            touched.clear();
            select_top(candidates, params.neighbors)
        })
        .collect()
}

pub fn fit_user_knn(index: &TrainingIndex, params: &KnnParams) -> KnnModel {
    let means = user_means(index);
    let centered = Centered::new(index, &means);
    let neighbors = neighborhoods(
        index.num_users(),
        |u| centered.user(index, u),
        |i| centered.item(index, i),
        params,
    );
    KnnModel {
        neighbors,
        user_means: means,
    }
}

pub fn fit_item_knn(index: &TrainingIndex, params: &KnnParams) -> KnnModel {
    let means = user_means(index);
    let centered = Centered::new(index, &means);
    let neighbors = neighborhoods(
        index.num_items(),
        |i| centered.item(index, i),
        |u| centered.user(index, u),
        params,
    );
    KnnModel {
        neighbors,
        user_means: means,
    }
}

/// Evidence gathered for one `(user, item)` pair.
#[derive(Debug, Clone, Copy, Default)]
struct Evidence {
    weighted: f64,
    abs_sim: f64,
    sim_sum: f64,
}

impl Evidence {
    fn add(&mut self, sim: f64, value: f64) {
        self.weighted += sim * value;
        self.abs_sim += sim.abs();
        self.sim_sum += sim;
    }
}

impl KnnModel {
    /// `r̄_u + Σ sim(u,v)(r_vi − r̄_v) / Σ |sim(u,v)|` over the neighbors of
    /// `u` that rated `i`; `None` when none did.
    pub fn predict_user_based(&self, index: &TrainingIndex, u: usize, i: usize) -> Option<f64> {
        let mut ev = Evidence::default();
        for n in &self.neighbors[u] {
            let v = n.index as usize;
            if let Some(r) = index.rating(v, i) {
                ev.add(n.sim, r - self.user_means[v]);
            }
        }
        (ev.abs_sim > 0.0).then(|| self.user_means[u] + ev.weighted / ev.abs_sim)
    }

    /// `Σ sim(i,j) r_uj / Σ |sim(i,j)|` over the neighbors of `i` rated by
    /// `u`; `None` when `u` rated none of them.
    pub fn predict_item_based(&self, index: &TrainingIndex, u: usize, i: usize) -> Option<f64> {
        let mut ev = Evidence::default();
        for n in &self.neighbors[i] {
            if let Some(r) = index.rating(u, n.index as usize) {
                ev.add(n.sim, r);
            }
        }
        (ev.abs_sim > 0.0).then(|| ev.weighted / ev.abs_sim)
    }

    /// Ranking scores of every dense item for user `u` (user-based).
    pub fn scores_user_based(&self, index: &TrainingIndex, u: usize, scoring: KnnScoring) -> Vec<Option<f64>> {
        let mut evidence = vec![Evidence::default(); index.num_items()];
        for n in &self.neighbors[u] {
            let v = n.index as usize;
            let (items, values) = index.user_row(v);
            for (&i, &r) in items.iter().zip(values) {
                evidence[i as usize].add(n.sim, r - self.user_means[v]);
            }
        }
        let mean = self.user_means[u];
        evidence
            .into_iter()
            .map(|ev| {
                (ev.abs_sim > 0.0).then(|| match scoring {
                    KnnScoring::Rating => mean + ev.weighted / ev.abs_sim,
                    KnnScoring::SimilaritySum => ev.sim_sum,
                })
            })
            .collect()
    }

    /// Ranking scores of every dense item for user `u` (item-based).
    pub fn scores_item_based(&self, index: &TrainingIndex, u: usize, scoring: KnnScoring) -> Vec<Option<f64>> {
        let mut rated = vec![None; index.num_items()];
        let (items, values) = index.user_row(u);
        for (&i, &r) in items.iter().zip(values) {
            rated[i as usize] = Some(r);
        }
        self.neighbors
            .iter()
            .map(|neighbors| {
                let mut ev = Evidence::default();
                for n in neighbors {
                    if let Some(r) = rated[n.index as usize] {
                        ev.add(n.sim, r);
                    }
                }
                (ev.abs_sim > 0.0).then(|| match scoring {
                    KnnScoring::Rating => ev.weighted / ev.abs_sim,
                    KnnScoring::SimilaritySum => ev.sim_sum,
                })
            })
            .collect()
    }
}
