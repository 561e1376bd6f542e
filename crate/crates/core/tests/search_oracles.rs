use std::collections::BTreeMap;

use autothorax_core::data::{FeatureConfig, FeatureVector, Label};
use autothorax_core::search::{classify, knn, SearchIndex, SearchOptions};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vectors(rows: &[Vec<f32>], ids: &[String]) -> Vec<FeatureVector> {
    rows.iter()
        .zip(ids)
        .map(|(r, id)| FeatureVector::new(id.clone(), r.clone(), FeatureConfig::C1, "t").unwrap())
        .collect()
}

/// Full sort over every archive row by (distance, id).
fn oracle(rows: &[Vec<f32>], ids: &[String], q: &[f32], k: usize) -> Vec<(String, f64)> {
    let mut all: Vec<(f64, &String)> = rows
        .iter()
        .zip(ids)
        .map(|(r, id)| {
            let d2: f64 = r.iter().zip(q).map(|(&a, &b)| (f64::from(a) - f64::from(b)).powi(2)).sum();
            (d2, id)
        })
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(b.1)));
    all.into_iter().take(k).map(|(d2, id)| (id.clone(), d2.sqrt())).collect()
}

#[test]
fn knn_matches_full_sort_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..50 {
        let n = rng.gen_range(1..=2000);
        let dim = rng.gen_range(1..=64);
        let k = rng.gen_range(1..=n);
        // Coarse grids in half the cases force distance ties.
        let levels = if case % 2 == 0 { 3.0 } else { 1e6 };
        let draw = |rng: &mut ChaCha8Rng| ((rng.gen::<f64>() * levels).floor() / levels) as f32;
        let rows: Vec<Vec<f32>> = (0..n).map(|_| (0..dim).map(|_| draw(&mut rng)).collect()).collect();
        let mut ids: Vec<String> = (0..n).map(|i| format!("r{:05}", i * 7919 % 100_003)).collect();
        ids.shuffle(&mut rng);
        let labels: BTreeMap<String, Label> = ids.iter().map(|id| (id.clone(), Label::from_bool(rng.gen()))).collect();
        let index = SearchIndex::from_labels(&vectors(&rows, &ids), &labels, SearchOptions::default()).unwrap();
        let q: Vec<f32> = (0..dim).map(|_| draw(&mut rng)).collect();
        let got = knn(&index, &q, None, k).unwrap();
        let got: Vec<(String, f64)> = got.hits.into_iter().map(|h| (h.id, h.distance)).collect();
        assert_eq!(got, oracle(&rows, &ids, &q, k), "case {case} n={n} dim={dim} k={k}");
    }
}

#[test]
fn likelihood_is_vote_share() {
    let rows: Vec<Vec<f32>> = (0..9).map(|i| vec![i as f32]).collect();
    let ids: Vec<String> = (0..9).map(|i| format!("{i}")).collect();
    let labels: BTreeMap<String, Label> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), Label::from_bool(i % 3 == 0)))
        .collect();
    let index = SearchIndex::from_labels(&vectors(&rows, &ids), &labels, SearchOptions::default()).unwrap();
    let ns = knn(&index, &[0.0], None, 5).unwrap();
    // neighbors 0..=4: positives 0 and 3
    assert_eq!(ns.vote_m, 2);
    assert_eq!(ns.likelihood, 0.4);
    assert_eq!(classify(ns.likelihood, 0.4), Label::Positive);
    assert_eq!(classify(ns.likelihood, 0.41), Label::Negative);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Signed coordinate permutations and integer translations are exact
    /// isometries on small integer data, so neighbor sets and votes must not
    /// move.
    #[test]
    fn votes_survive_isometries(seed in any::<u64>(), n in 2usize..40, dim in 1usize..6, k in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = k.min(n);
        let rows: Vec<Vec<f32>> = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-8..8) as f32).collect()).collect();
        let q: Vec<f32> = (0..dim).map(|_| rng.gen_range(-8..8) as f32).collect();
        let ids: Vec<String> = (0..n).map(|i| format!("{i:03}")).collect();
        let labels: BTreeMap<String, Label> = ids.iter().map(|id| (id.clone(), Label::from_bool(rng.gen()))).collect();

        let mut perm: Vec<usize> = (0..dim).collect();
        perm.shuffle(&mut rng);
        let signs: Vec<f32> = (0..dim).map(|_| if rng.gen() { 1.0 } else { -1.0 }).collect();
        let shift: Vec<f32> = (0..dim).map(|_| rng.gen_range(-50..50) as f32).collect();
        let map = |v: &[f32]| -> Vec<f32> { (0..dim).map(|j| signs[j] * v[perm[j]] + shift[j]).collect() };

        let a = SearchIndex::from_labels(&vectors(&rows, &ids), &labels, SearchOptions::default()).unwrap();
        let moved: Vec<Vec<f32>> = rows.iter().map(|r| map(r)).collect();
        let b = SearchIndex::from_labels(&vectors(&moved, &ids), &labels, SearchOptions::default()).unwrap();
        let x = knn(&a, &q, None, k).unwrap();
        let y = knn(&b, &map(&q), None, k).unwrap();
        prop_assert_eq!(x.likelihood, y.likelihood);
        prop_assert_eq!(x.hits, y.hits);
    }

    /// Archive order never matters.
    #[test]
    fn archive_order_irrelevant(seed in any::<u64>(), n in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f32>> = (0..n).map(|_| (0..3).map(|_| rng.gen_range(0..3) as f32).collect()).collect();
        let ids: Vec<String> = (0..n).map(|i| format!("{i:03}")).collect();
        let labels: BTreeMap<String, Label> = ids.iter().map(|id| (id.clone(), Label::from_bool(rng.gen()))).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let shuffled_rows: Vec<Vec<f32>> = order.iter().map(|&i| rows[i].clone()).collect();
        let shuffled_ids: Vec<String> = order.iter().map(|&i| ids[i].clone()).collect();
        let a = SearchIndex::from_labels(&vectors(&rows, &ids), &labels, SearchOptions::default()).unwrap();
        let b = SearchIndex::from_labels(&vectors(&shuffled_rows, &shuffled_ids), &labels, SearchOptions::default()).unwrap();
        let q = [1.0f32, 1.0, 1.0];
        prop_assert_eq!(knn(&a, &q, None, n).unwrap(), knn(&b, &q, None, n).unwrap());
    }
}
