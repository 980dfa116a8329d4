//! Rating datasets with user gender and item genre metadata.
//!
//! A [`RatingDataset`] is validated once at construction and never mutated
//! afterwards. Ratings are kept sorted by `(user, item)` so a user's profile
//! is a contiguous slice.

mod movielens;
mod split;
mod synthetic;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use movielens::{load_dataset, read_canonical, write_canonical, ML1M_MOVIES, ML1M_RATINGS, ML1M_USERS};
pub use split::{split_train_test, SplitPair};
pub use synthetic::{generate_synthetic, SyntheticSpec};

pub type UserId = u32;
pub type ItemId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Gender {
    #[serde(rename = "M")]
    Male,
    #[serde(rename = "F")]
    Female,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Male, Gender::Female];

    pub fn code(self) -> &'static str {
        match self {
            Gender::Male => "M",
            Gender::Female => "F",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "M" | "m" | "male" | "Male" => Ok(Gender::Male),
            "F" | "f" | "female" | "Female" => Ok(Gender::Female),
            other => Err(Error::InvalidArgument(format!("unknown gender `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub id: UserId,
    pub gender: Gender,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub id: ItemId,
    pub title: String,
    pub genres: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub user: UserId,
    pub item: ItemId,
    pub value: u8,
    /// Seconds since the epoch. Carried through, never used.
    pub timestamp: i64,
}

/// Ordered set of permitted rating values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingScale {
    values: Vec<u8>,
}

impl RatingScale {
    pub fn new(values: impl IntoIterator<Item = u8>) -> Result<Self> {
        let values: Vec<u8> = values.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        if values.is_empty() {
            return Err(Error::InvalidDataset("empty rating scale".into()));
        }
        Ok(Self { values })
    }

    /// Integer stars 1..=5, as used by MovieLens-1M.
    pub fn five_star() -> Self {
        Self {
            values: vec![1, 2, 3, 4, 5],
        }
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> u8 {
        self.values[0]
    }

    pub fn max(&self) -> u8 {
        self.values[self.values.len() - 1]
    }

    pub fn index_of(&self, value: u8) -> Option<usize> {
        self.values.binary_search(&value).ok()
    }

    pub fn contains(&self, value: u8) -> bool {
        self.index_of(value).is_some()
    }
}

impl Default for RatingScale {
    fn default() -> Self {
        Self::five_star()
    }
}

/// Immutable, validated collection of users, items and ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingDataset {
    users: Vec<UserRecord>,
    items: Vec<ItemRecord>,
    ratings: Vec<RatingRecord>,
    scale: RatingScale,
    genres: Arc<[String]>,
    user_pos: HashMap<UserId, usize>,
    item_pos: HashMap<ItemId, usize>,
    // Range into `ratings` for each entry of `users`.
    spans: Vec<(usize, usize)>,
}

impl RatingDataset {
    /// Validates and sorts the records.
    ///
    /// Fails on duplicate user or item ids, items without genres, ratings
    /// that reference unknown users or items, duplicate `(user, item)` pairs
    /// and values outside `scale`.
    pub fn new(
        mut users: Vec<UserRecord>,
        mut items: Vec<ItemRecord>,
        ratings: Vec<RatingRecord>,
        scale: RatingScale,
    ) -> Result<Self> {
        users.sort_by_key(|u| u.id);
        items.sort_by_key(|i| i.id);
        if let Some(w) = users.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::InvalidDataset(format!("duplicate user id {}", w[0].id)));
        }
        if let Some(w) = items.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::InvalidDataset(format!("duplicate item id {}", w[0].id)));
        }
        if let Some(item) = items.iter().find(|i| i.genres.is_empty()) {
            return Err(Error::InvalidDataset(format!("item {} has no genres", item.id)));
        }
        let genres: BTreeSet<&str> = items
            .iter()
            .flat_map(|i| i.genres.iter().map(String::as_str))
            .collect();
        let genres: Arc<[String]> = genres.into_iter().map(str::to_owned).collect();
        let user_pos = users.iter().enumerate().map(|(p, u)| (u.id, p)).collect();
        let item_pos = items.iter().enumerate().map(|(p, i)| (i.id, p)).collect();
        let mut ds = Self {
            users,
            items,
            ratings: Vec::new(),
            scale,
            genres,
            user_pos,
            item_pos,
            spans: Vec::new(),
        };
        ds.install_ratings(ratings)?;
        Ok(ds)
    }

    /// Same users, items and scale with a different rating set.
    pub fn with_ratings(&self, ratings: Vec<RatingRecord>) -> Result<Self> {
        let mut ds = Self {
            users: self.users.clone(),
            items: self.items.clone(),
            ratings: Vec::new(),
            scale: self.scale.clone(),
            genres: Arc::clone(&self.genres),
            user_pos: self.user_pos.clone(),
            item_pos: self.item_pos.clone(),
            spans: Vec::new(),
        };
        ds.install_ratings(ratings)?;
        Ok(ds)
    }

    fn install_ratings(&mut self, mut ratings: Vec<RatingRecord>) -> Result<()> {
        for r in &ratings {
            if !self.user_pos.contains_key(&r.user) {
                return Err(Error::UnknownUser(r.user));
            }
            if !self.item_pos.contains_key(&r.item) {
                return Err(Error::UnknownItem(r.item));
            }
            if !self.scale.contains(r.value) {
                return Err(Error::RatingOutOfDomain {
                    user: r.user,
                    item: r.item,
                    value: r.value,
                });
            }
        }
        ratings.sort_by_key(|r| (r.user, r.item));
        if let Some(w) = ratings
            .windows(2)
            .find(|w| (w[0].user, w[0].item) == (w[1].user, w[1].item))
        {
            return Err(Error::DuplicateRating {
                user: w[0].user,
                item: w[0].item,
            });
        }
        let mut spans = Vec::with_capacity(self.users.len());
        let mut start = 0;
        for user in &self.users {
            let len = ratings[start..].partition_point(|r| r.user == user.id);
            spans.push((start, start + len));
            start += len;
        }
        debug_assert_eq!(start, ratings.len());
        self.ratings = ratings;
        self.spans = spans;
        Ok(())
    }

    pub fn users(&self) -> &[UserRecord] {
        &self.users
    }

    pub fn items(&self) -> &[ItemRecord] {
        &self.items
    }

    pub fn ratings(&self) -> &[RatingRecord] {
        &self.ratings
    }

    pub fn scale(&self) -> &RatingScale {
        &self.scale
    }

    /// Sorted, de-duplicated genre labels over all items.
    pub fn genre_universe(&self) -> &Arc<[String]> {
        &self.genres
    }

    pub fn num_ratings(&self) -> usize {
        self.ratings.len()
    }

    pub fn user(&self, id: UserId) -> Option<&UserRecord> {
        self.user_pos.get(&id).map(|&p| &self.users[p])
    }

    pub fn item(&self, id: ItemId) -> Option<&ItemRecord> {
        self.item_pos.get(&id).map(|&p| &self.items[p])
    }

    /// The user's ratings sorted by item id, or `None` for an unknown user.
    pub fn user_ratings(&self, id: UserId) -> Option<&[RatingRecord]> {
        self.user_pos.get(&id).map(|&p| {
            let (a, b) = self.spans[p];
            &self.ratings[a..b]
        })
    }

    /// Iterates `(user, profile)` pairs in ascending user id order.
    pub fn profiles(&self) -> impl Iterator<Item = (&UserRecord, &[RatingRecord])> {
        self.users
            .iter()
            .zip(&self.spans)
            .map(move |(u, &(a, b))| (u, &self.ratings[a..b]))
    }

    pub fn users_with_gender(&self, gender: Gender) -> impl Iterator<Item = &UserRecord> {
        self.users.iter().filter(move |u| u.gender == gender)
    }

    /// Number of ratings given by users of `gender`.
    pub fn ratings_by_gender(&self, gender: Gender) -> usize {
        self.profiles()
            .filter(|(u, _)| u.gender == gender)
            .map(|(_, p)| p.len())
            .sum()
    }

    /// Number of distinct items that received at least one rating.
    pub fn num_rated_items(&self) -> usize {
        let mut seen = vec![false; self.items.len()];
        for r in &self.ratings {
            seen[self.item_pos[&r.item]] = true;
        }
        seen.into_iter().filter(|&s| s).count()
    }
}
