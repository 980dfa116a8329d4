//! Brute-force neighborhood formulas evaluated straight from a rating map.

use std::collections::BTreeMap;

use proptest::prelude::*;
use recfair::data::{Gender, ItemRecord, RatingDataset, RatingRecord, RatingScale, UserRecord};
use recfair::recommenders::{HyperParams, KnnParams, KnnScoring};

type Matrix = BTreeMap<(u32, u32), f64>;

pub fn dataset(cells: &[(u32, u32, u8)], num_items: u32) -> RatingDataset {
    let mut users: Vec<u32> = cells.iter().map(|c| c.0).collect();
    users.dedup();
    RatingDataset::new(
        users
            .iter()
            .map(|&id| UserRecord {
                id,
                gender: if id % 2 == 0 { Gender::Female } else { Gender::Male },
            })
            .collect(),
        (1..=num_items)
            .map(|id| ItemRecord {
                id,
                title: format!("item {id}"),
                genres: vec!["Drama".into()],
            })
            .collect(),
        cells
            .iter()
            .map(|&(user, item, value)| RatingRecord {
                user,
                item,
                value,
                timestamp: 0,
            })
            .collect(),
        RatingScale::five_star(),
    )
    .unwrap()
}

pub struct Oracle {
    m: Matrix,
    pub users: Vec<u32>,
    pub items: Vec<u32>,
}

impl Oracle {
    pub fn new(cells: &[(u32, u32, u8)]) -> Self {
        let m: Matrix = cells.iter().map(|&(u, i, v)| ((u, i), f64::from(v))).collect();
        let mut users: Vec<u32> = cells.iter().map(|c| c.0).collect();
        let mut items: Vec<u32> = cells.iter().map(|c| c.1).collect();
        users.sort_unstable();
        users.dedup();
        items.sort_unstable();
        items.dedup();
        Self { m, users, items }
    }

    fn r(&self, u: u32, i: u32) -> Option<f64> {
        self.m.get(&(u, i)).copied()
    }

    pub fn mean(&self, u: u32) -> f64 {
        let v: Vec<f64> = self.items.iter().filter_map(|&i| self.r(u, i)).collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    fn cosine(pairs: &[(f64, f64)], shrinkage: f64) -> f64 {
        if pairs.len() < 2 {
            return 0.0;
        }
        let dot: f64 = pairs.iter().map(|(a, b)| a * b).sum();
        let sa: f64 = pairs.iter().map(|(a, _)| a * a).sum();
        let sb: f64 = pairs.iter().map(|(_, b)| b * b).sum();
        if sa <= 0.0 || sb <= 0.0 {
            return 0.0;
        }
        let n = pairs.len() as f64;
        dot / (sa * sb).sqrt() * if shrinkage > 0.0 { n / (n + shrinkage) } else { 1.0 }
    }

    pub fn user_sim(&self, a: u32, b: u32, shrinkage: f64) -> f64 {
        let (ma, mb) = (self.mean(a), self.mean(b));
        let pairs: Vec<(f64, f64)> = self
            .items
            .iter()
            .filter_map(|&i| Some((self.r(a, i)? - ma, self.r(b, i)? - mb)))
            .collect();
        Self::cosine(&pairs, shrinkage)
    }

    pub fn item_sim(&self, i: u32, j: u32, shrinkage: f64) -> f64 {
        let pairs: Vec<(f64, f64)> = self
            .users
            .iter()
            .filter_map(|&u| {
                let m = self.mean(u);
                Some((self.r(u, i)? - m, self.r(u, j)? - m))
            })
            .collect();
        Self::cosine(&pairs, shrinkage)
    }

    /// Top-`n` non-zero neighbors, similarity descending then id ascending.
    fn top(candidates: &[u32], me: u32, n: usize, sim: impl Fn(u32) -> f64) -> Vec<(u32, f64)> {
        let mut out: Vec<(u32, f64)> = candidates
            .iter()
            .filter(|&&c| c != me)
            .map(|&c| (c, sim(c)))
            .filter(|(_, s)| *s != 0.0)
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out.truncate(n);
        out
    }

    pub fn predict_user(&self, u: u32, i: u32, n: usize, shrinkage: f64) -> Option<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for (v, s) in Self::top(&self.users, u, n, |v| self.user_sim(u, v, shrinkage)) {
            if let Some(r) = self.r(v, i) {
                num += s * (r - self.mean(v));
                den += s.abs();
            }
        }
        (den > 0.0).then(|| self.mean(u) + num / den)
    }

    pub fn predict_item(&self, u: u32, i: u32, n: usize, shrinkage: f64) -> Option<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for (j, s) in Self::top(&self.items, i, n, |j| self.item_sim(i, j, shrinkage)) {
            if let Some(r) = self.r(u, j) {
                num += s * r;
                den += s.abs();
            }
        }
        (den > 0.0).then(|| num / den)
    }
}

pub fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() <= 1e-10 * b.abs().max(1.0),
        (None, None) => true,
        _ => false,
    }
}

pub fn knn(neighbors: usize, shrinkage: f64) -> HyperParams {
    HyperParams::Knn(KnnParams {
        neighbors,
        shrinkage,
        scoring: KnnScoring::Rating,
    })
}

pub fn small_matrix() -> impl Strategy<Value = Vec<(u32, u32, u8)>> {
    (1usize..=5, 1usize..=6)
        .prop_flat_map(|(nu, ni)| proptest::collection::vec(proptest::option::weighted(0.7, 1u8..=5), nu * ni).prop_map(move |cells| (ni, cells)))
        .prop_map(|(ni, cells)| {
            cells
                .into_iter()
                .enumerate()
                .filter_map(|(n, v)| v.map(|v| ((n / ni) as u32 + 1, (n % ni) as u32 + 1, v)))
                .collect::<Vec<_>>()
        })
        .prop_filter("at least one rating", |c| !c.is_empty())
}
