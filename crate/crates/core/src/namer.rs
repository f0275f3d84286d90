//! Pattern naming by summed tf-idf over the captions that support a pattern.
//!
//! Candidate names are the unigrams and adjacent bigrams of stop-word
//! cleaned captions that occur at least `min_gram_occ` times in the corpus
//! and contain a word clustered into one of the pattern's text items. Each
//! candidate scores `Σ tf(g, caption) · idf(g)` over the member captions,
//! with `idf(g) = ln((1 + m) / (1 + df(g))) + 1`, and the best one wins.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, EventId};
use crate::miner::Pattern;
use crate::ratio::Ratio;
use crate::stopwords::StopLists;
use crate::text_tx::ClusterModel;
use crate::transactions::TransactionStore;

pub const DEFAULT_MIN_GRAM_OCC: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramInfo {
    pub occ: u64,
    pub caption_df: u64,
    pub idf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramStats {
    grams: BTreeMap<String, GramInfo>,
    caption_count: u64,
    stop_lists: StopLists,
}

/// Unigrams followed by adjacent bigrams (space-joined) of a cleaned token
/// sequence.
pub fn grams_of(cleaned: &[&str]) -> Vec<String> {
    let mut out: Vec<String> = cleaned.iter().map(|w| w.to_string()).collect();
    out.extend(cleaned.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    out
}

pub fn build_ngram_stats(docs: &[Document], stop_lists: &StopLists, min_gram_occ: u64) -> NgramStats {
    let mut occ: HashMap<String, u64> = HashMap::new();
    let mut df: HashMap<String, u64> = HashMap::new();
    for doc in docs {
        let grams = grams_of(&stop_lists.clean(&doc.tokens));
        let distinct: BTreeSet<&String> = grams.iter().collect();
        for g in distinct {
            *df.entry(g.clone()).or_default() += 1;
        }
        for g in grams {
            *occ.entry(g).or_default() += 1;
        }
    }
    let m = docs.len() as u64;
    let grams = occ
        .into_iter()
        .filter(|(_, n)| *n >= min_gram_occ)
        .map(|(g, n)| {
            let caption_df = df[&g];
            let idf = ((1 + m) as f64 / (1 + caption_df) as f64).ln() + 1.0;
            (
                g,
                GramInfo {
                    occ: n,
                    caption_df,
                    idf,
                },
            )
        })
        .collect();
    NgramStats {
        grams,
        caption_count: m,
        stop_lists: stop_lists.clone(),
    }
}

impl NgramStats {
    pub fn get(&self, gram: &str) -> Option<&GramInfo> {
        self.grams.get(gram)
    }

    pub fn contains(&self, gram: &str) -> bool {
        self.grams.contains_key(gram)
    }

    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn caption_count(&self) -> u64 {
        self.caption_count
    }

    pub fn stop_lists(&self) -> &StopLists {
        &self.stop_lists
    }

    pub fn grams(&self) -> impl Iterator<Item = (&str, &GramInfo)> {
        self.grams.iter().map(|(g, i)| (g.as_str(), i))
    }

    /// Raw counts of retained grams in one caption.
    pub fn term_counts(&self, doc: &Document) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        for g in grams_of(&self.stop_lists.clean(&doc.tokens)) {
            if self.grams.contains_key(&g) {
                *out.entry(g).or_default() += 1;
            }
        }
        out
    }
}

/// How member transactions map onto the captions that are summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CaptionSum {
    /// Each supporting document counts once.
    #[default]
    DistinctDocuments,
    /// Each supporting transaction counts, so a document with several
    /// member patches contributes its caption several times.
    Transactions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedGram {
    pub gram: String,
    pub score: f64,
    pub caption_df: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternName {
    pub pattern: usize,
    pub event: EventId,
    pub name: String,
    pub score: f64,
    pub runner_up: Option<RankedGram>,
    /// The original best name was removed by the event blacklist and
    /// `name` is the runner-up.
    pub blacklisted: bool,
}

/// Documents behind a pattern's member transactions, one entry per
/// transaction (so documents repeat when several of their patches match).
pub fn member_documents<'a>(
    p: &Pattern,
    store: &TransactionStore,
    docs: &HashMap<&str, &'a Document>,
) -> Vec<&'a Document> {
    p.member_tx
        .iter()
        .filter_map(|&t| store.get(t))
        .filter_map(|tx| docs.get(tx.doc_id.as_str()).copied())
        .collect()
}

fn candidate(gram: &str, text_items: &[u32], model: &ClusterModel) -> bool {
    gram.split(' ')
        .filter_map(|w| model.cluster_of(w))
        .any(|c| text_items.binary_search(&c).is_ok())
}

/// All candidate grams with positive score, best first.
pub fn rank_candidates(
    p: &Pattern,
    stats: &NgramStats,
    model: &ClusterModel,
    members: &[&Document],
    mode: CaptionSum,
) -> Vec<RankedGram> {
    let mut seen = BTreeSet::new();
    let mut tf: BTreeMap<String, u64> = BTreeMap::new();
    for doc in members {
        if mode == CaptionSum::DistinctDocuments && !seen.insert(doc.doc_id.as_str()) {
            continue;
        }
        for (g, n) in stats.term_counts(doc) {
            if candidate(&g, &p.text_items, model) {
                *tf.entry(g).or_default() += n;
            }
        }
    }
    let mut ranked: Vec<RankedGram> = tf
        .into_iter()
        .filter_map(|(g, n)| {
            let info = stats.get(&g)?;
            let score = n as f64 * info.idf;
            (score > 0.0).then_some(RankedGram {
                gram: g,
                score,
                caption_df: info.caption_df,
            })
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(b.caption_df.cmp(&a.caption_df))
            .then_with(|| a.gram.cmp(&b.gram))
    });
    ranked
}

/// Best-scoring candidate name for a pattern, if any candidate scores above
/// zero.
pub fn name_pattern(
    pattern_index: usize,
    p: &Pattern,
    stats: &NgramStats,
    model: &ClusterModel,
    members: &[&Document],
    mode: CaptionSum,
) -> Option<PatternName> {
    let mut ranked = rank_candidates(p, stats, model, members, mode).into_iter();
    let best = ranked.next()?;
    Some(PatternName {
        pattern: pattern_index,
        event: p.event,
        name: best.gram,
        score: best.score,
        runner_up: ranked.next(),
        blacklisted: false,
    })
}

/// Per-event caption counts and retained-gram document frequencies.
#[derive(Debug, Clone, Default)]
pub struct EventGramIndex {
    captions: HashMap<EventId, u64>,
    df: HashMap<EventId, HashMap<String, u64>>,
}

impl EventGramIndex {
    pub fn build(docs: &[Document], stats: &NgramStats) -> Self {
        let mut idx = EventGramIndex::default();
        for doc in docs {
            if doc.events.is_empty() {
                continue;
            }
            let grams: BTreeSet<String> = stats.term_counts(doc).into_keys().collect();
            for &e in &doc.events {
                *idx.captions.entry(e).or_default() += 1;
                let per = idx.df.entry(e).or_default();
                for g in &grams {
                    *per.entry(g.clone()).or_default() += 1;
                }
            }
        }
        idx
    }

    pub fn event_captions(&self, event: EventId) -> u64 {
        self.captions.get(&event).copied().unwrap_or(0)
    }

    pub fn gram_captions(&self, event: EventId, gram: &str) -> u64 {
        self.df
            .get(&event)
            .and_then(|m| m.get(gram))
            .copied()
            .unwrap_or(0)
    }

    /// True when `gram` appears in strictly more than `threshold` of the
    /// event's captions.
    pub fn too_common(&self, event: EventId, gram: &str, threshold: Ratio) -> bool {
        let total = self.event_captions(event);
        total > 0 && threshold.lt_fraction(self.gram_captions(event, gram), total)
    }
}

/// Removes names that are too common within their event. A removed name is
/// replaced by its runner-up when that one passes; otherwise the pattern is
/// left unnamed and dropped from the output.
pub fn blacklist_names(names: Vec<PatternName>, index: &EventGramIndex, threshold: Ratio) -> Vec<PatternName> {
    names
        .into_iter()
        .filter_map(|mut n| {
            if !index.too_common(n.event, &n.name, threshold) {
                return Some(n);
            }
            let next = n.runner_up.take()?;
            if index.too_common(n.event, &next.gram, threshold) {
                return None;
            }
            n.name = next.gram;
            n.score = next.score;
            n.blacklisted = true;
            Some(n)
        })
        .collect()
}
