mod common;

use common::doc;
use mmpm::corpus::EmbeddingTable;
use mmpm::stopwords::StopLists;
use mmpm::text_tx::{
    build_vocabulary, caption_to_itemset, kmeans_cluster, kmeans_cluster_detailed, KMeansParams, TextVocabulary,
};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

fn words(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i:03}")).collect()
}

fn vocab_of(words: &[String]) -> TextVocabulary {
    build_vocabulary(&[doc("all", &words.join(" "))], &StopLists::empty(), 1).unwrap()
}

fn random_table(words: &[String], dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut t = EmbeddingTable::new(dim);
    for w in words {
        t.insert(w.clone(), (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect()).unwrap();
    }
    t
}

fn normalized(v: &[f32]) -> Vec<f64> {
    let n = v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    v.iter().map(|x| f64::from(*x) / n).collect()
}

fn sse(points: &[Vec<f64>], assign: &[usize], k: usize) -> f64 {
    let dim = points[0].len();
    let mut total = 0.0;
    for c in 0..k {
        let members: Vec<&Vec<f64>> = points.iter().zip(assign).filter(|(_, a)| **a == c).map(|(p, _)| p).collect();
        if members.is_empty() {
            continue;
        }
        let mean: Vec<f64> = (0..dim).map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64).collect();
        total += members
            .iter()
            .map(|p| p.iter().zip(&mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .sum::<f64>();
    }
    total
}

#[test]
fn objective_never_increases() {
    for seed in 0..10 {
        let ws = words(80);
        let table = random_table(&ws, 8, seed);
        let run = kmeans_cluster_detailed(
            &vocab_of(&ws),
            &table,
            &KMeansParams {
                k: 7,
                seed,
                max_iters: 100,
            },
        )
        .unwrap();
        assert!(!run.objective_log.is_empty());
        for w in run.objective_log.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "objective rose: {:?}", run.objective_log);
        }
        for c in 0..7 {
            assert!(!run.model.members(c).is_empty(), "cluster {c} empty");
        }
    }
}

#[test]
fn two_blobs_match_the_optimal_two_clustering() {
    let ws = words(12);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(5);
    let mut table = EmbeddingTable::new(3);
    for (i, w) in ws.iter().enumerate() {
        let centre = if i % 2 == 0 { [1.0f32, 0.2, 0.0] } else { [0.0f32, 0.3, 1.0] };
        let v = centre.iter().map(|c| c + rng.random_range(-0.05f32..0.05)).collect();
        table.insert(w.clone(), v).unwrap();
    }
    let model = kmeans_cluster(&vocab_of(&ws), &table, 2, 0).unwrap();

    let points: Vec<Vec<f64>> = ws.iter().map(|w| normalized(table.get(w).unwrap())).collect();
    let mut best = (f64::INFINITY, 0u32);
    for mask in 1u32..(1 << (ws.len() - 1)) {
        let assign: Vec<usize> = (0..ws.len()).map(|i| (mask >> i & 1) as usize).collect();
        let cost = sse(&points, &assign, 2);
        if cost < best.0 {
            best = (cost, mask);
        }
    }
    let got: Vec<usize> = ws.iter().map(|w| model.cluster_of(w).unwrap() as usize).collect();
    let got_cost = sse(&points, &got, 2);
    assert!((got_cost - best.0).abs() < 1e-9, "{got_cost} vs optimum {}", best.0);
    for i in 0..ws.len() {
        for j in 0..ws.len() {
            assert_eq!(got[i] == got[j], i % 2 == j % 2);
        }
    }
}

#[test]
fn same_seed_same_model() {
    let ws = words(50);
    let table = random_table(&ws, 6, 1);
    let a = kmeans_cluster(&vocab_of(&ws), &table, 5, 42).unwrap();
    let b = kmeans_cluster(&vocab_of(&ws), &table, 5, 42).unwrap();
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn duplicate_vectors_recover_their_groups_exactly() {
    let groups: Vec<Vec<String>> = (0..6).map(|g| (0..4).map(|i| format!("g{g}w{i}")).collect()).collect();
    let all: Vec<String> = groups.iter().flatten().cloned().collect();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(9);
    let mut table = EmbeddingTable::new(10);
    for g in &groups {
        let v: Vec<f32> = (0..10).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        for w in g {
            table.insert(w.clone(), v.clone()).unwrap();
        }
    }
    let model = kmeans_cluster(&vocab_of(&all), &table, 6, 3).unwrap();
    for g in &groups {
        let c = model.cluster_of(&g[0]).unwrap();
        assert!(g.iter().all(|w| model.cluster_of(w) == Some(c)));
    }
    let distinct: std::collections::BTreeSet<u32> = groups.iter().map(|g| model.cluster_of(&g[0]).unwrap()).collect();
    assert_eq!(distinct.len(), 6);
}

#[test]
fn captions_become_sorted_cluster_itemsets() {
    let ws = words(6);
    let table = random_table(&ws, 4, 2);
    let vocab = vocab_of(&ws);
    let model = kmeans_cluster(&vocab, &table, 6, 0).unwrap();
    let d = doc("x", "w003 unknown w001 w003 the");
    let items = caption_to_itemset(&d, &vocab, &model).items;
    let mut expect = vec![model.cluster_of("w003").unwrap(), model.cluster_of("w001").unwrap()];
    expect.sort_unstable();
    assert_eq!(items, expect);
}

#[test]
fn too_few_embedded_words_is_an_error() {
    let ws = words(3);
    let table = random_table(&ws[..2], 4, 0);
    let err = kmeans_cluster(&vocab_of(&ws), &table, 3, 0).unwrap_err();
    assert!(err.to_string().contains("lack embeddings"), "{err}");
}
