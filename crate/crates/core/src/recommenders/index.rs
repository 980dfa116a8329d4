//! Dense, compressed views of a training set shared by all models.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{ItemId, RatingDataset, UserId};

/// Row-compressed rating matrix in both orientations.
///
/// Dense user and item indices follow ascending external ids, so ordering by
/// dense item index is ordering by item id. Only users and items with at
/// least one training rating are indexed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingIndex {
    user_ids: Vec<UserId>,
    item_ids: Vec<ItemId>,
    user_offsets: Vec<usize>,
    user_items: Vec<u32>,
    user_values: Vec<f64>,
    item_offsets: Vec<usize>,
    item_users: Vec<u32>,
    item_values: Vec<f64>,
    global_mean: f64,
}

impl TrainingIndex {
    pub fn new(train: &RatingDataset) -> Self {
        let mut item_ids: Vec<ItemId> = train.ratings().iter().map(|r| r.item).collect();
        item_ids.sort_unstable();
        item_ids.dedup();
        let user_ids: Vec<UserId> = train
            .profiles()
            .filter(|(_, p)| !p.is_empty())
            .map(|(u, _)| u.id)
            .collect();

        let dense_item = |id: ItemId| item_ids.binary_search(&id).expect("indexed item") as u32;

        let mut user_offsets = Vec::with_capacity(user_ids.len() + 1);
        let mut user_items = Vec::with_capacity(train.num_ratings());
        let mut user_values = Vec::with_capacity(train.num_ratings());
        user_offsets.push(0);
        let mut item_counts = vec![0usize; item_ids.len()];
        for (_, profile) in train.profiles().filter(|(_, p)| !p.is_empty()) {
            // Profiles are sorted by item id, hence by dense index too.
            for r in profile {
                let i = dense_item(r.item);
                user_items.push(i);
                user_values.push(f64::from(r.value));
                item_counts[i as usize] += 1;
            }
            user_offsets.push(user_items.len());
        }

        let mut item_offsets = Vec::with_capacity(item_ids.len() + 1);
        item_offsets.push(0);
        for c in &item_counts {
            item_offsets.push(item_offsets.last().unwrap() + c);
        }
        let mut cursor = item_offsets[..item_ids.len()].to_vec();
        let mut item_users = vec![0u32; user_items.len()];
        let mut item_values = vec![0.0; user_items.len()];
        for u in 0..user_ids.len() {
            for k in user_offsets[u]..user_offsets[u + 1] {
                let i = user_items[k] as usize;
                item_users[cursor[i]] = u as u32;
                item_values[cursor[i]] = user_values[k];
                cursor[i] += 1;
            }
        }

        let global_mean = if user_values.is_empty() {
            0.0
        } else {
            user_values.iter().sum::<f64>() / user_values.len() as f64
        };

        Self {
            user_ids,
            item_ids,
            user_offsets,
            user_items,
            user_values,
            item_offsets,
            item_users,
            item_values,
            global_mean,
        }
    }

    pub fn num_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn num_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn num_ratings(&self) -> usize {
        self.user_items.len()
    }

    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }

    pub fn user_index(&self, id: UserId) -> Option<usize> {
        self.user_ids.binary_search(&id).ok()
    }

    pub fn item_index(&self, id: ItemId) -> Option<usize> {
        self.item_ids.binary_search(&id).ok()
    }

    pub fn user_id(&self, u: usize) -> UserId {
        self.user_ids[u]
    }

    pub fn item_id(&self, i: usize) -> ItemId {
        self.item_ids[i]
    }

    pub fn user_ids(&self) -> &[UserId] {
        &self.user_ids
    }

    /// Dense item indices (ascending) and ratings of user `u`.
    pub fn user_row(&self, u: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.user_offsets[u], self.user_offsets[u + 1]);
        (&self.user_items[a..b], &self.user_values[a..b])
    }

    /// Dense user indices (ascending) and ratings of item `i`.
    pub fn item_column(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.item_offsets[i], self.item_offsets[i + 1]);
        (&self.item_users[a..b], &self.item_values[a..b])
    }

    pub fn rating(&self, u: usize, i: usize) -> Option<f64> {
        let (items, values) = self.user_row(u);
        items.binary_search(&(i as u32)).ok().map(|k| values[k])
    }

    pub fn user_mean(&self, u: usize) -> f64 {
        let (_, values) = self.user_row(u);
        values.iter().sum::<f64>() / values.len() as f64
    }

    /// Hex SHA-256 over the `(user, item, rating)` triples.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for u in 0..self.num_users() {
            let (items, values) = self.user_row(u);
            for (&i, &v) in items.iter().zip(values) {
                hasher.update(self.user_ids[u].to_le_bytes());
                hasher.update(self.item_ids[i as usize].to_le_bytes());
                hasher.update(v.to_le_bytes());
            }
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
