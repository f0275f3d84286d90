//! Caption-side items: a document-frequency filtered vocabulary, k-means word
//! clusters over unit-normalized embeddings, and per-caption cluster itemsets.
//!
//! Clustering is reproducible across platforms: seeding and k-means++ draws
//! come from a xoshiro256++ generator initialised with
//! `Xoshiro256PlusPlus::seed_from_u64(seed)` (SplitMix64 state expansion), and
//! every reduction runs in a fixed order.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, EmbeddingTable};
use crate::error::{Error, Result};
use crate::stopwords::StopLists;

pub const DEFAULT_MIN_CAPTION_DF: u32 = 10;
pub const DEFAULT_CLUSTERS: usize = 1000;
pub const DEFAULT_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextVocabulary {
    words: Vec<String>,
    doc_freq: BTreeMap<String, u32>,
}

impl TextVocabulary {
    /// Sorted words.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn doc_freq(&self, word: &str) -> Option<u32> {
        self.doc_freq.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words
            .binary_search_by(|w| w.as_str().cmp(word))
            .is_ok()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Words outside the stop lists that occur in at least `min_caption_df`
/// distinct captions.
pub fn build_vocabulary(
    docs: &[Document],
    stop_lists: &StopLists,
    min_caption_df: u32,
) -> Result<TextVocabulary> {
    let mut df: BTreeMap<String, u32> = BTreeMap::new();
    for doc in docs {
        let distinct: BTreeSet<&str> = doc
            .tokens
            .iter()
            .map(String::as_str)
            .filter(|t| !stop_lists.contains(t))
            .collect();
        for w in distinct {
            *df.entry(w.to_string()).or_default() += 1;
        }
    }
    df.retain(|_, n| *n >= min_caption_df);
    if df.is_empty() {
        return Err(Error::Config(format!(
            "empty vocabulary: no word appears in {min_caption_df} or more captions"
        )));
    }
    Ok(TextVocabulary {
        words: df.keys().cloned().collect(),
        doc_freq: df,
    })
}

/// Word-to-cluster assignment with centroids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ClusterModelRepr", into = "ClusterModelRepr")]
pub struct ClusterModel {
    k: usize,
    seed: u64,
    words: Vec<String>,
    assign: Vec<u32>,
    centroids: Vec<Vec<f64>>,
    index: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct ClusterModelRepr {
    k: usize,
    seed: u64,
    words: Vec<String>,
    assign: Vec<u32>,
    centroids: Vec<Vec<f64>>,
}

impl TryFrom<ClusterModelRepr> for ClusterModel {
    type Error = String;

    fn try_from(r: ClusterModelRepr) -> std::result::Result<Self, String> {
        ClusterModel::new(r.k, r.seed, r.words, r.assign, r.centroids).map_err(|e| e.to_string())
    }
}

impl From<ClusterModel> for ClusterModelRepr {
    fn from(m: ClusterModel) -> Self {
        ClusterModelRepr {
            k: m.k,
            seed: m.seed,
            words: m.words,
            assign: m.assign,
            centroids: m.centroids,
        }
    }
}

impl ClusterModel {
    pub fn new(
        k: usize,
        seed: u64,
        words: Vec<String>,
        assign: Vec<u32>,
        centroids: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if words.len() != assign.len() {
            return Err(Error::InvalidInput("words and assign differ in length".into()));
        }
        if centroids.len() != k {
            return Err(Error::InvalidInput(format!(
                "expected {k} centroids, got {}",
                centroids.len()
            )));
        }
        if let Some(a) = assign.iter().find(|a| **a as usize >= k) {
            return Err(Error::InvalidInput(format!("cluster index {a} out of range 0..{k}")));
        }
        if centroids.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite centroid".into()));
        }
        let index = words
            .iter()
            .cloned()
            .zip(assign.iter().copied())
            .collect();
        Ok(ClusterModel {
            k,
            seed,
            words,
            assign,
            centroids,
            index,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn cluster_of(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    /// Words assigned to `cluster`, sorted.
    pub fn members(&self, cluster: u32) -> Vec<&str> {
        self.words
            .iter()
            .zip(&self.assign)
            .filter(|(_, a)| **a == cluster)
            .map(|(w, _)| w.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            k: DEFAULT_CLUSTERS,
            seed: 0,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

/// Output of a clustering run, including diagnostics that do not belong in
/// the persisted model.
#[derive(Debug, Clone)]
pub struct ClusterRun {
    pub model: ClusterModel,
    /// Objective (sum of squared distances) after each Lloyd update.
    pub objective_log: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Vocabulary words without an embedding.
    pub dropped: Vec<String>,
}

impl ClusterRun {
    pub fn objective(&self) -> f64 {
        self.objective_log.last().copied().unwrap_or(0.0)
    }
}

pub fn kmeans_cluster(
    vocab: &TextVocabulary,
    emb: &EmbeddingTable,
    k: usize,
    seed: u64,
) -> Result<ClusterModel> {
    let params = KMeansParams {
        k,
        seed,
        ..KMeansParams::default()
    };
    kmeans_cluster_detailed(vocab, emb, &params).map(|r| r.model)
}

/// Lloyd's algorithm with k-means++ seeding over L2-normalized embeddings of
/// the vocabulary words.
pub fn kmeans_cluster_detailed(
    vocab: &TextVocabulary,
    emb: &EmbeddingTable,
    params: &KMeansParams,
) -> Result<ClusterRun> {
    let k = params.k;
    if k == 0 {
        return Err(Error::Config("cluster count must be positive".into()));
    }
    let mut words = Vec::new();
    let mut points = Vec::new();
    let mut dropped = Vec::new();
    for w in vocab.words() {
        match emb.get(w) {
            Some(v) => {
                words.push(w.clone());
                points.push(normalize(v));
            }
            None => dropped.push(w.clone()),
        }
    }
    if !dropped.is_empty() {
        log::info!("{} vocabulary words have no embedding and were dropped", dropped.len());
    }
    if points.len() < k {
        return Err(Error::InvalidInput(format!(
            "only {} embedded vocabulary words for {} clusters ({} words lack embeddings)",
            points.len(),
            k,
            dropped.len()
        )));
    }

    let mut rng = Xoshiro256PlusPlus::seed_from_u64(params.seed);
    let seeds = kmeans_pp_seeds(&points, k, &mut rng);
    let mut centroids: Vec<Vec<f64>> = seeds.iter().map(|&i| points[i].clone()).collect();
    let mut assign: Vec<u32> = Vec::new();
    let mut objective_log = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_iters {
        let next = assign_nearest(&points, &centroids);
        if next == assign {
            converged = true;
            break;
        }
        assign = next;
        iterations += 1;
        reseed_empty(&points, &mut centroids, &mut assign);
        update_centroids(&points, &assign, &mut centroids);
        objective_log.push(objective(&points, &assign, &centroids));
    }
    if !converged && assign_nearest(&points, &centroids) == assign {
        converged = true;
    }

    let model = ClusterModel::new(k, params.seed, words, assign, centroids)?;
    Ok(ClusterRun {
        model,
        objective_log,
        iterations,
        converged,
        dropped,
    })
}

fn normalize(v: &[f32]) -> Vec<f64> {
    let norm = v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    v.iter().map(|x| f64::from(*x) / norm).collect()
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_pp_seeds(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let n = points.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                acc += d;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            // every remaining point coincides with a chosen seed
            (0..n).find(|i| !chosen.contains(i)).expect("n >= k")
        };
        chosen.push(pick);
        for (i, p) in points.iter().enumerate() {
            let d = sq_dist(p, &points[pick]);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    chosen
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> u32 {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best as u32
}

fn assign_nearest(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<u32> {
    points.par_iter().map(|p| nearest(p, centroids)).collect()
}

/// Moves the point farthest from its centroid into each empty cluster.
fn reseed_empty(points: &[Vec<f64>], centroids: &mut [Vec<f64>], assign: &mut [u32]) {
    let k = centroids.len();
    let mut counts = vec![0usize; k];
    for a in assign.iter() {
        counts[*a as usize] += 1;
    }
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let mut far: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            let a = assign[i] as usize;
            if counts[a] < 2 {
                continue;
            }
            let d = sq_dist(p, &centroids[a]);
            if far.is_none_or(|(_, fd)| d > fd) {
                far = Some((i, d));
            }
        }
        if let Some((i, _)) = far {
            counts[assign[i] as usize] -= 1;
            assign[i] = j as u32;
            counts[j] = 1;
            centroids[j] = points[i].clone();
        }
    }
}

fn update_centroids(points: &[Vec<f64>], assign: &[u32], centroids: &mut [Vec<f64>]) {
    let dim = points.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; dim]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (p, &a) in points.iter().zip(assign) {
        counts[a as usize] += 1;
        for (s, x) in sums[a as usize].iter_mut().zip(p) {
            *s += x;
        }
    }
    for ((c, s), n) in centroids.iter_mut().zip(sums).zip(counts) {
        if n > 0 {
            *c = s.into_iter().map(|x| x / n as f64).collect();
        }
    }
}

fn objective(points: &[Vec<f64>], assign: &[u32], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(assign)
        .map(|(p, &a)| sq_dist(p, &centroids[a as usize]))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextItemset {
    pub doc_id: String,
    pub items: Vec<u32>,
}

/// Cluster ids of the caption's vocabulary words, deduplicated and sorted.
pub fn caption_to_itemset(doc: &Document, vocab: &TextVocabulary, model: &ClusterModel) -> TextItemset {
    let items: BTreeSet<u32> = doc
        .tokens
        .iter()
        .filter(|t| vocab.contains(t))
        .filter_map(|t| model.cluster_of(t))
        .collect();
    TextItemset {
        doc_id: doc.doc_id.clone(),
        items: items.into_iter().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, caption: &str) -> Document {
        Document {
            doc_id: id.to_string(),
            caption_raw: caption.to_string(),
            tokens: crate::corpus::tokenize(caption),
            events: BTreeSet::new(),
            feature_ref: String::new(),
        }
    }

    #[test]
    fn vocabulary_counts_distinct_captions() {
        let mut docs: Vec<Document> = (0..12)
            .map(|i| doc(&format!("d{i}"), "the police police"))
            .collect();
        for d in docs.iter_mut().take(9) {
            d.tokens.push("rare".into());
        }
        let v = build_vocabulary(&docs, &StopLists::standard(), 10).unwrap();
        assert_eq!(v.words(), &["police".to_string()]);
        assert_eq!(v.doc_freq("police"), Some(12));
        assert!(!v.contains("the"));
        assert!(!v.contains("rare"));
    }

    #[test]
    fn empty_vocabulary_is_config_error() {
        let docs = vec![doc("a", "riot")];
        assert!(matches!(
            build_vocabulary(&docs, &StopLists::standard(), 10),
            Err(Error::Config(_))
        ));
    }

    fn vocab_of(words: &[&str]) -> TextVocabulary {
        TextVocabulary {
            words: words.iter().map(|s| s.to_string()).collect(),
            doc_freq: words.iter().map(|s| (s.to_string(), 10)).collect(),
        }
    }

    fn table(entries: &[(&str, Vec<f32>)]) -> EmbeddingTable {
        let mut t = EmbeddingTable::new(entries[0].1.len());
        for (w, v) in entries {
            t.insert(*w, v.clone()).unwrap();
        }
        t
    }

    #[test]
    fn saturated_k_gives_zero_objective() {
        let words = ["a", "b", "c", "d"];
        let emb = table(&[
            ("a", vec![1.0, 0.0]),
            ("b", vec![0.0, 1.0]),
            ("c", vec![1.0, 1.0]),
            ("d", vec![-1.0, 0.2]),
        ]);
        let run = kmeans_cluster_detailed(
            &vocab_of(&words),
            &emb,
            &KMeansParams {
                k: 4,
                seed: 3,
                max_iters: 100,
            },
        )
        .unwrap();
        assert!(run.objective().abs() < 1e-12);
        let distinct: BTreeSet<_> = words.iter().map(|w| run.model.cluster_of(w).unwrap()).collect();
        assert_eq!(distinct.len(), 4);
    }

    #[test]
    fn too_few_words_aborts() {
        let emb = table(&[("a", vec![1.0, 0.0])]);
        let err = kmeans_cluster(&vocab_of(&["a", "b"]), &emb, 2, 0).unwrap_err();
        assert!(err.to_string().contains("only 1"));
    }

    #[test]
    fn dedup_and_synonym_collapse() {
        let model = ClusterModel::new(
            8,
            0,
            vec!["pastor".into(), "police".into(), "priest".into(), "riot".into()],
            vec![3, 7, 3, 7],
            vec![vec![0.0]; 8],
        )
        .unwrap();
        let vocab = vocab_of(&["pastor", "police", "priest", "riot"]);
        let t = caption_to_itemset(&doc("d", "riot police riot"), &vocab, &model);
        assert_eq!(t.items, vec![7]);
        let t = caption_to_itemset(&doc("d", "priest pastor"), &vocab, &model);
        assert_eq!(t.items, vec![3]);
        assert!(caption_to_itemset(&doc("d", "weather"), &vocab, &model).items.is_empty());
    }

    #[test]
    fn model_json_round_trip() {
        let model = ClusterModel::new(
            2,
            9,
            vec!["a".into(), "b".into()],
            vec![1, 0],
            vec![vec![0.5, 0.25], vec![1.0, 0.0]],
        )
        .unwrap();
        let s = serde_json::to_string(&model).unwrap();
        assert!(s.starts_with(r#"{"k":2,"seed":9,"words":["a","b"],"assign":[1,0],"centroids""#));
        let back: ClusterModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.cluster_of("a"), Some(1));
        assert!(serde_json::from_str::<ClusterModel>(
            r#"{"k":1,"seed":0,"words":["a"],"assign":[4],"centroids":[[0.0]]}"#
        )
        .is_err());
    }
}
