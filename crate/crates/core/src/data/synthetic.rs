use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Gender, ItemRecord, RatingDataset, RatingRecord, RatingScale, UserRecord};
use crate::error::{Error, Result};

const GENRES: [&str; 18] = [
    "Action",
    "Adventure",
    "Animation",
    "Children's",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Fantasy",
    "Film-Noir",
    "Horror",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Thriller",
    "War",
    "Western",
];

/// Parameters of a generated dataset on the 1..=5 star scale.
///
/// Every user gets one preferred genre: items of that genre are drawn more
/// often and rated somewhat higher, which gives the recommenders real
/// structure to find.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_users: usize,
    pub num_items: usize,
    /// Fraction of users that are male; the male count is rounded half up.
    pub gender_ratio: f64,
    /// Relative weights of the star values 1..=5.
    pub rating_distribution: Vec<f64>,
    /// Inclusive range of profile sizes, clamped to `num_items`.
    pub ratings_per_user: (usize, usize),
    /// Zipf exponent of item popularity.
    pub popularity_skew: f64,
    /// Extra sampling weight of items in the user's preferred genre.
    pub genre_affinity: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn small(num_users: usize, num_items: usize, seed: u64) -> Self {
        Self {
            num_users,
            num_items,
            gender_ratio: 0.5,
            rating_distribution: vec![0.06, 0.11, 0.26, 0.35, 0.22],
            ratings_per_user: (5, 30),
            popularity_skew: 0.8,
            genre_affinity: 3.0,
            seed,
        }
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<RatingDataset> {
    let scale = RatingScale::five_star();
    if spec.num_users == 0 || spec.num_items == 0 {
        return Err(Error::InvalidArgument("synthetic dataset needs at least one user and one item".into()));
    }
    if !(0.0..=1.0).contains(&spec.gender_ratio) {
        return Err(Error::InvalidArgument(format!("gender ratio {} outside [0, 1]", spec.gender_ratio)));
    }
    if spec.rating_distribution.len() != scale.len() {
        return Err(Error::InvalidArgument(format!(
            "rating distribution needs {} weights, got {}",
            scale.len(),
            spec.rating_distribution.len()
        )));
    }
    let value_dist = WeightedIndex::new(&spec.rating_distribution)
        .map_err(|e| Error::InvalidArgument(format!("rating distribution: {e}")))?;
    let (lo, hi) = spec.ratings_per_user;
    if lo == 0 || lo > hi {
        return Err(Error::InvalidArgument(format!("invalid profile size range {lo}..={hi}")));
    }
    if !(spec.popularity_skew.is_finite() && spec.genre_affinity >= 0.0) {
        return Err(Error::InvalidArgument("invalid popularity skew or genre affinity".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let items: Vec<ItemRecord> = (0..spec.num_items)
        .map(|i| {
            let count = rng.gen_range(1..=3);
            let mut genres: Vec<String> = GENRES
                .choose_multiple(&mut rng, count)
                .map(|g| g.to_string())
                .collect();
            genres.sort();
            ItemRecord {
                id: i as u32 + 1,
                title: format!("Synthetic item {}", i + 1),
                genres,
            }
        })
        .collect();

    let males = (spec.gender_ratio * spec.num_users as f64 + 0.5).floor() as usize;
    let mut genders: Vec<Gender> = (0..spec.num_users)
        .map(|u| if u < males { Gender::Male } else { Gender::Female })
        .collect();
    genders.shuffle(&mut rng);
    let users: Vec<UserRecord> = genders
        .iter()
        .enumerate()
        .map(|(u, &gender)| UserRecord { id: u as u32 + 1, gender })
        .collect();

    let mut popularity_rank: Vec<usize> = (0..spec.num_items).collect();
    popularity_rank.shuffle(&mut rng);
    let base_weight: Vec<f64> = popularity_rank
        .iter()
        .map(|&rank| 1.0 / ((rank + 1) as f64).powf(spec.popularity_skew))
        .collect();

    let top = scale.len() - 1;
    let mut ratings = Vec::new();
    let mut timestamp = 956_703_932i64;
    for user in &users {
        let preferred = GENRES[rng.gen_range(0..GENRES.len())];
        let in_genre: Vec<bool> = items.iter().map(|i| i.genres.iter().any(|g| g == preferred)).collect();
        let weight = |i: usize| base_weight[i] * if in_genre[i] { 1.0 + spec.genre_affinity } else { 1.0 };
        let size = rng.gen_range(lo.min(spec.num_items)..=hi.min(spec.num_items));
        let chosen = index::sample_weighted(&mut rng, spec.num_items, weight, size)
            .map_err(|e| Error::InvalidArgument(format!("sampling failed: {e}")))?;
        let mut chosen = chosen.into_vec();
        chosen.sort_unstable();
        for i in chosen {
            let mut v = value_dist.sample(&mut rng);
            if in_genre[i] && v < top && rng.gen_bool(0.5) {
                v += 1;
            }
            timestamp += rng.gen_range(1..600);
            ratings.push(RatingRecord {
                user: user.id,
                item: items[i].id,
                value: scale.values()[v],
                timestamp,
            });
        }
    }
    RatingDataset::new(users, items, ratings, scale)
}
