mod common;

use std::collections::HashSet;

use proptest::prelude::*;
use recfair::data::{
    generate_synthetic, read_canonical, split_train_test, write_canonical, Gender, RatingScale, SyntheticSpec,
};
use recfair::metrics::{precision_at_k, profile_size};
use recfair::recommenders::{
    fit, grid_search, load_checkpoint, relevant_items, save_checkpoint, Algorithm, HyperParamGrid, HyperParams,
    KnnParams, KnnScoring, MfParams, RecommenderModel,
};

fn params_for(algorithm: Algorithm) -> HyperParams {
    if algorithm.is_neighborhood() {
        HyperParams::Knn(KnnParams {
            neighbors: 8,
            shrinkage: 0.0,
            scoring: KnnScoring::SimilaritySum,
        })
    } else {
        HyperParams::Mf(MfParams {
            factors: 4,
            learning_rate: 0.02,
            regularization: 0.05,
            epochs: 4,
        })
    }
}

fn algorithm() -> impl Strategy<Value = Algorithm> {
    prop_oneof![
        Just(Algorithm::UserKnn),
        Just(Algorithm::ItemKnn),
        Just(Algorithm::SvdPp),
        Just(Algorithm::ListRankMf)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lists_exclude_training_items_and_are_ordered(
        algorithm in algorithm(),
        seed in any::<u64>(),
        k in 1usize..15,
    ) {
        let ds = generate_synthetic(&SyntheticSpec::small(25, 30, seed)).unwrap();
        let model = fit(algorithm, &ds, &params_for(algorithm), seed).unwrap();
        for (user, profile) in ds.profiles() {
            let list = model.recommend(user.id, k).unwrap();
            prop_assert!(list.len() <= k);
            let rated: HashSet<u32> = profile.iter().map(|r| r.item).collect();
            let mut seen = HashSet::new();
            for (item, _) in &list.entries {
                prop_assert!(!rated.contains(item));
                prop_assert!(seen.insert(*item));
            }
            for w in list.entries.windows(2) {
                prop_assert!(w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0));
            }
            if !algorithm.is_neighborhood() {
                // Factor models score every unrated item.
                prop_assert_eq!(list.len(), k.min(ds.num_rated_items() - rated.len()));
            }
        }
    }

    #[test]
    fn fitting_is_deterministic(algorithm in algorithm(), seed in any::<u64>()) {
        let ds = generate_synthetic(&SyntheticSpec::small(20, 25, seed)).unwrap();
        let a = fit(algorithm, &ds, &params_for(algorithm), 7).unwrap();
        let b = fit(algorithm, &ds, &params_for(algorithm), 7).unwrap();
        prop_assert_eq!(&a, &b);
        for user in ds.users() {
            prop_assert_eq!(a.recommend(user.id, 5).unwrap(), b.recommend(user.id, 5).unwrap());
        }
    }

    #[test]
    fn split_partitions_every_profile(
        seed in any::<u64>(),
        data_seed in any::<u64>(),
        ratio in 0.05f64..=1.0,
    ) {
        let ds = generate_synthetic(&SyntheticSpec::small(15, 20, data_seed)).unwrap();
        let split = split_train_test(&ds, ratio, seed).unwrap();
        prop_assert_eq!(split.train.num_ratings() + split.test.num_ratings(), ds.num_ratings());
        let train: HashSet<(u32, u32)> = split.train.ratings().iter().map(|r| (r.user, r.item)).collect();
        for r in split.test.ratings() {
            prop_assert!(!train.contains(&(r.user, r.item)));
        }
        let mut merged: Vec<_> = split.train.ratings().iter().chain(split.test.ratings()).cloned().collect();
        merged.sort_by_key(|r| (r.user, r.item));
        prop_assert_eq!(merged.as_slice(), ds.ratings());
        for (user, profile) in ds.profiles() {
            let n = profile.len();
            let want = ((ratio * n as f64 + 0.5 + 1e-9).floor() as usize).min(n);
            prop_assert_eq!(split.train.user_ratings(user.id).unwrap_or_default().len(), want);
        }
        prop_assert_eq!(split, split_train_test(&ds, ratio, seed).unwrap());
    }

    #[test]
    fn canonical_files_round_trip(seed in any::<u64>(), users in 1usize..20, items in 1usize..20) {
        let ds = generate_synthetic(&SyntheticSpec::small(users, items, seed)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_canonical(&ds, dir.path()).unwrap();
        prop_assert_eq!(read_canonical(dir.path(), RatingScale::five_star()).unwrap(), ds);
    }
}

#[test]
fn split_examples() {
    let ds = common::synthetic(30, 50, 1);
    let whole = split_train_test(&ds, 1.0, 9).unwrap();
    assert_eq!(whole.test.num_ratings(), 0);
    assert_eq!(whole.train, ds);

    let mut spec = SyntheticSpec::small(1, 20, 4);
    spec.ratings_per_user = (10, 10);
    let ten = generate_synthetic(&spec).unwrap();
    let split = split_train_test(&ten, 0.8, 42).unwrap();
    assert_eq!((split.train.num_ratings(), split.test.num_ratings()), (8, 2));
    assert!(split_train_test(&ten, 0.0, 1).is_err());
    assert!(split_train_test(&ten, 1.2, 1).is_err());
}

#[test]
fn synthetic_examples() {
    let one = generate_synthetic(&SyntheticSpec::small(1, 1, 7)).unwrap();
    assert_eq!(one.num_ratings(), 1);

    let spec = SyntheticSpec::small(100, 40, 3);
    let ds = generate_synthetic(&spec).unwrap();
    assert_eq!(ds.users_with_gender(Gender::Male).count(), 50);
    assert_eq!(ds.users_with_gender(Gender::Female).count(), 50);
    assert_eq!(ds, generate_synthetic(&spec).unwrap());

    let mut spec = SyntheticSpec::small(3, 60, 8);
    spec.ratings_per_user = (37, 37);
    let ds = generate_synthetic(&spec).unwrap();
    assert_eq!(profile_size(2, &ds).unwrap(), 37);
    assert!(generate_synthetic(&SyntheticSpec::small(3, 0, 1)).is_err());
}

#[test]
fn full_profile_gets_empty_list_and_unknown_users_fail() {
    let mut spec = SyntheticSpec::small(6, 8, 2);
    spec.ratings_per_user = (8, 8);
    let ds = generate_synthetic(&spec).unwrap();
    for algorithm in Algorithm::ALL {
        let model = fit(algorithm, &ds, &params_for(algorithm), 1).unwrap();
        assert!(model.recommend(1, 10).unwrap().is_empty());
        assert!(model.recommend(999, 10).is_err());
    }
}

#[test]
fn checkpoints_reproduce_recommendations() {
    let ds = common::synthetic(30, 40, 6);
    let dir = tempfile::tempdir().unwrap();
    for algorithm in Algorithm::ALL {
        let model = fit(algorithm, &ds, &params_for(algorithm), 3).unwrap();
        let path = dir.path().join(format!("{}.json", algorithm.tag()));
        save_checkpoint(&model, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        for user in ds.users() {
            assert_eq!(model.recommend(user.id, 10).unwrap(), back.recommend(user.id, 10).unwrap());
        }
    }
}

/// Mean precision over validation users known to the model, from the lists
/// directly.
fn precision_oracle(model: &RecommenderModel, validation: &recfair::data::RatingDataset, k: usize) -> f64 {
    let mut values = Vec::new();
    for user in validation.users() {
        let truth = relevant_items(validation, user.id, None);
        if truth.is_empty() || !model.knows_user(user.id) {
            continue;
        }
        values.push(precision_at_k(&model.recommend(user.id, k).unwrap(), &truth, k).unwrap());
    }
    values.iter().sum::<f64>() / values.len() as f64
}

#[test]
fn grid_search_follows_precision_oracle() {
    let ds = common::synthetic(80, 60, 12);
    let split = split_train_test(&ds, 0.8, 5).unwrap();
    let grid = HyperParamGrid {
        neighbors: vec![5, 25],
        knn_scoring: vec![KnnScoring::Rating, KnnScoring::SimilaritySum],
        factors: vec![3, 6],
        learning_rates: vec![0.02],
        regularization: vec![0.05],
        epochs: vec![2, 5],
        ..HyperParamGrid::default()
    };
    for algorithm in Algorithm::ALL {
        let outcome = grid_search(algorithm, &split.train, &split.test, &grid, 10, 4, None).unwrap();
        let configs = grid.configs(algorithm);
        assert_eq!(outcome.entries.len(), configs.len());
        let mut best = (0, f64::NEG_INFINITY);
        for (n, (entry, hp)) in outcome.entries.iter().zip(&configs).enumerate() {
            assert_eq!(&entry.params, hp);
            // Independent fit per configuration, even where the search shared
            // one run across epoch counts.
            let model = fit(algorithm, &split.train, hp, 4).unwrap();
            let want = precision_oracle(&model, &split.test, 10);
            assert_eq!(entry.precision, Some(want), "{algorithm} {hp}");
            if want > best.1 {
                best = (n, want);
            }
        }
        assert_eq!((outcome.best_index, outcome.best_precision), best);
        assert_eq!(outcome.best, configs[best.0]);
    }
}

#[test]
fn grid_search_edge_cases() {
    let ds = common::synthetic(40, 40, 2);
    let split = split_train_test(&ds, 0.8, 1).unwrap();
    let single = HyperParamGrid {
        neighbors: vec![7],
        knn_scoring: vec![KnnScoring::SimilaritySum],
        ..HyperParamGrid::default()
    };
    let outcome = grid_search(Algorithm::UserKnn, &split.train, &split.test, &single, 10, 0, None).unwrap();
    assert_eq!(outcome.entries.len(), 1);
    assert_eq!(outcome.best, single.configs(Algorithm::UserKnn)[0]);

    // Identical configurations tie; the first wins.
    let twice = HyperParamGrid {
        neighbors: vec![7, 7],
        ..single.clone()
    };
    let outcome = grid_search(Algorithm::UserKnn, &split.train, &split.test, &twice, 10, 0, None).unwrap();
    assert_eq!(outcome.entries[0].precision, outcome.entries[1].precision);
    assert_eq!(outcome.best_index, 0);

    // Every configuration diverges.
    let hopeless = HyperParamGrid {
        factors: vec![3],
        learning_rates: vec![1e6],
        regularization: vec![0.0],
        epochs: vec![5],
        ..HyperParamGrid::default()
    };
    let e = grid_search(Algorithm::SvdPp, &split.train, &split.test, &hopeless, 10, 0, None).unwrap_err();
    assert_eq!(e.exit_code(), 4);

    let empty = HyperParamGrid {
        neighbors: vec![],
        ..single
    };
    assert!(grid_search(Algorithm::ItemKnn, &split.train, &split.test, &empty, 10, 0, None).is_err());
}

/// Target user 1 rated items 30 and 31 (5 and 1) and holds out 18, 19, 20.
/// Users 2 and 3 rate 30 and 31 the same way (similarity exactly 1), and ten
/// further items at 3 each: user 2 rates 11..=20, user 3 rates 1..=9 and 18.
fn two_neighbor_fixture() -> (recfair::data::RatingDataset, recfair::data::RatingDataset) {
    use recfair::data::{ItemRecord, RatingDataset, RatingRecord, UserRecord};
    let mut cells = vec![(1, 30, 5), (1, 31, 1)];
    for user in [2, 3] {
        cells.extend([(user, 30, 5), (user, 31, 1)]);
    }
    cells.extend((11..=20).map(|i| (2, i, 3)));
    cells.extend((1..=9).chain([18]).map(|i| (3, i, 3)));
    let record = |(user, item, value)| RatingRecord {
        user,
        item,
        value,
        timestamp: 0,
    };
    let train = RatingDataset::new(
        (1..=3)
            .map(|id| UserRecord {
                id,
                gender: Gender::Female,
            })
            .collect(),
        (1..=31)
            .map(|id| ItemRecord {
                id,
                title: String::new(),
                genres: vec!["Drama".into()],
            })
            .collect(),
        cells.into_iter().map(record).collect(),
        RatingScale::five_star(),
    )
    .unwrap();
    let validation = train
        .with_ratings([(1, 18, 4), (1, 19, 4), (1, 20, 4)].into_iter().map(record).collect())
        .unwrap();
    (train, validation)
}

#[test]
fn grid_search_picks_the_higher_precision() {
    let (train, validation) = two_neighbor_fixture();
    let grid = HyperParamGrid {
        neighbors: vec![1, 2],
        knn_scoring: vec![KnnScoring::SimilaritySum],
        ..HyperParamGrid::default()
    };
    // One neighbor (user 2) recommends 11..=20: three hits. Two neighbors put
    // item 18 first, then 1..=9: one hit.
    let outcome = grid_search(Algorithm::UserKnn, &train, &validation, &grid, 10, 0, None).unwrap();
    let precisions: Vec<Option<f64>> = outcome.entries.iter().map(|e| e.precision).collect();
    assert_eq!(precisions, vec![Some(0.3), Some(0.1)]);
    assert_eq!(outcome.best_index, 0);
    assert_eq!(outcome.best, grid.configs(Algorithm::UserKnn)[0]);
}
