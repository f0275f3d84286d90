//! Constrained association-rule mining.
//!
//! A rule `t* → y` is reported when `t* ∪ {y}` is contained in at least
//! `min_support_count` transactions, `count(t* ∪ {y}) / count(t*) >= c_min`,
//! `t*` holds at least one visual and one text item and no event item, and
//! `y` is a single event item. Every threshold comparison is done on integer
//! counts.
//!
//! [`mine`] is a level-wise apriori search over tid lists; [`brute_force_mine`]
//! enumerates the whole lattice of a small item universe and serves as its
//! oracle.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::EventId;
use crate::error::{Error, Result};
use crate::ratio::Ratio;
use crate::transactions::{intersect_sorted, Item, ItemSpace, Modality, TransactionStore};

pub const DEFAULT_MIN_SUPPORT_COUNT: u64 = 30;
pub const DEFAULT_MAX_ITEMSET_LEN: usize = 6;
pub const BRUTE_FORCE_MAX_ITEMS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiningConfig {
    pub c_min: Ratio,
    pub min_support_count: u64,
    pub max_itemset_len: usize,
    pub space: ItemSpace,
    /// Count supporting documents instead of supporting transactions.
    pub count_distinct_docs: bool,
}

impl MiningConfig {
    pub fn new(space: ItemSpace) -> Self {
        MiningConfig {
            c_min: Ratio { num: 4, den: 5 },
            min_support_count: DEFAULT_MIN_SUPPORT_COUNT,
            max_itemset_len: DEFAULT_MAX_ITEMSET_LEN,
            space,
            count_distinct_docs: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c_min.num == 0 || self.c_min.num > self.c_min.den {
            return Err(Error::Config(format!("c_min must be in (0, 1], got {}", self.c_min)));
        }
        if self.min_support_count == 0 {
            return Err(Error::Config("min_support_count must be at least 1".into()));
        }
        if self.max_itemset_len < 3 {
            return Err(Error::Config(format!(
                "max_itemset_len must be at least 3, got {}",
                self.max_itemset_len
            )));
        }
        Ok(())
    }
}

/// A mined rule `visual_items ∪ text_items → event`. Item indices are local
/// to their modality (filter and cluster numbers).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub event: EventId,
    pub visual_items: Vec<u32>,
    pub text_items: Vec<u32>,
    pub support_count: u64,
    pub antecedent_count: u64,
    pub confidence: f64,
    pub member_tx: Vec<u32>,
    pub name: Option<String>,
    #[serde(default)]
    pub name_score: Option<f64>,
    #[serde(default)]
    pub name_blacklisted: bool,
}

impl Pattern {
    /// Antecedent as global item ids, sorted.
    pub fn antecedent(&self, space: &ItemSpace) -> Vec<Item> {
        self.visual_items
            .iter()
            .map(|&v| space.visual_item(v))
            .chain(self.text_items.iter().map(|&t| space.text_item(t)))
            .collect()
    }

    pub fn confidence_ratio(&self) -> Ratio {
        Ratio {
            num: self.support_count,
            den: self.antecedent_count,
        }
    }
}

/// Fraction of transactions containing `itemset`.
pub fn support(itemset: &[Item], store: &TransactionStore) -> Result<Ratio> {
    if store.is_empty() {
        return Err(Error::InvalidInput("support of an empty transaction store".into()));
    }
    Ratio::new(store.cover(itemset).len() as u64, store.len() as u64)
}

/// `s(antecedent ∪ {y}) / s(antecedent)` as a count ratio.
pub fn confidence(antecedent: &[Item], y: Item, store: &TransactionStore) -> Result<Ratio> {
    let ante = store.cover(antecedent);
    if ante.is_empty() {
        return Err(Error::InvalidInput(
            "confidence is undefined for an antecedent with zero support".into(),
        ));
    }
    let with_y = ante.iter().filter(|&&t| store.get(t).is_some_and(|tx| tx.contains(y))).count();
    Ratio::new(with_y as u64, ante.len() as u64)
}

fn count_of(store: &TransactionStore, tids: &[u32], distinct_docs: bool) -> u64 {
    if distinct_docs {
        store.distinct_docs(tids) as u64
    } else {
        tids.len() as u64
    }
}

#[derive(Default)]
struct Shape {
    visual: usize,
    text: usize,
    event: Option<Item>,
    events: usize,
}

fn shape(items: &[Item], space: &ItemSpace) -> Shape {
    let mut s = Shape::default();
    for &it in items {
        match space.modality(it) {
            Some(Modality::Visual) => s.visual += 1,
            Some(Modality::Text) => s.text += 1,
            Some(Modality::Event) => {
                s.events += 1;
                s.event = Some(it);
            }
            None => {}
        }
    }
    s
}

fn make_pattern(
    items: &[Item],
    y: Item,
    count: u64,
    ante_count: u64,
    member_tx: Vec<u32>,
    space: &ItemSpace,
) -> Pattern {
    let mut visual_items = Vec::new();
    let mut text_items = Vec::new();
    for &it in items.iter().filter(|&&it| it != y) {
        match space.decode(it) {
            Some((Modality::Visual, i)) => visual_items.push(i),
            Some((Modality::Text, i)) => text_items.push(i),
            _ => {}
        }
    }
    let event = space.decode(y).map(|(_, e)| e).unwrap_or_default();
    Pattern {
        event,
        visual_items,
        text_items,
        support_count: count,
        antecedent_count: ante_count,
        confidence: count as f64 / ante_count as f64,
        member_tx,
        name: None,
        name_score: None,
        name_blacklisted: false,
    }
}

/// Orders by event, descending support, then antecedent items.
pub fn sort_patterns(patterns: &mut [Pattern]) {
    patterns.sort_by(|a, b| {
        a.event
            .cmp(&b.event)
            .then(b.support_count.cmp(&a.support_count))
            .then_with(|| a.visual_items.cmp(&b.visual_items))
            .then_with(|| a.text_items.cmp(&b.text_items))
    });
}

/// Frequent itemsets found at each level, for inspecting a mining run.
#[derive(Debug, Clone, Default)]
pub struct MiningTrace {
    /// `levels[l]` holds the frequent itemsets of size `l + 1` with counts.
    pub levels: Vec<Vec<(Vec<Item>, u64)>>,
    pub candidates_evaluated: usize,
}

struct Frequent {
    items: Vec<Item>,
    tids: Vec<u32>,
    count: u64,
}

pub fn mine(store: &TransactionStore, cfg: &MiningConfig) -> Result<Vec<Pattern>> {
    mine_traced(store, cfg).map(|(p, _)| p)
}

/// Apriori with tid-list intersection; also returns the per-level frequent
/// itemsets.
pub fn mine_traced(store: &TransactionStore, cfg: &MiningConfig) -> Result<(Vec<Pattern>, MiningTrace)> {
    cfg.validate()?;
    let space = &cfg.space;
    let mut trace = MiningTrace::default();
    let mut patterns = Vec::new();
    let mut counts: HashMap<Vec<Item>, u64> = HashMap::new();

    let mut level: Vec<Frequent> = store
        .items()
        .into_iter()
        .filter(|&it| it < space.len())
        .filter_map(|it| {
            let tids = store.tidlist(it).to_vec();
            let count = count_of(store, &tids, cfg.count_distinct_docs);
            (count >= cfg.min_support_count).then_some(Frequent {
                items: vec![it],
                tids,
                count,
            })
        })
        .collect();

    let mut size = 1;
    while !level.is_empty() {
        for f in &level {
            counts.insert(f.items.clone(), f.count);
        }
        trace
            .levels
            .push(level.iter().map(|f| (f.items.clone(), f.count)).collect());

        if size >= 3 {
            for f in &level {
                let s = shape(&f.items, space);
                if s.events != 1 || s.visual == 0 || s.text == 0 {
                    continue;
                }
                let y = s.event.expect("one event item");
                let ante: Vec<Item> = f.items.iter().copied().filter(|&it| it != y).collect();
                let ante_count = counts[&ante];
                if cfg.c_min.le_fraction(f.count, ante_count) {
                    patterns.push(make_pattern(&f.items, y, f.count, ante_count, f.tids.clone(), space));
                }
            }
        }

        if size >= cfg.max_itemset_len {
            break;
        }
        let candidates = join_level(&level, space);
        trace.candidates_evaluated += candidates.len();
        let next: Vec<Frequent> = candidates
            .par_iter()
            .filter_map(|&(a, b)| {
                let (fa, fb) = (&level[a], &level[b]);
                let tids = intersect_sorted(&fa.tids, &fb.tids);
                let count = count_of(store, &tids, cfg.count_distinct_docs);
                if count < cfg.min_support_count {
                    return None;
                }
                let mut items = fa.items.clone();
                items.push(*fb.items.last().expect("nonempty"));
                Some(Frequent { items, tids, count })
            })
            .collect();
        level = next;
        size += 1;
    }

    sort_patterns(&mut patterns);
    Ok((patterns, trace))
}

/// Candidate pairs `(a, b)` sharing all but their last item, surviving the
/// subset check. Itemsets with more than one event item are never formed.
fn join_level(level: &[Frequent], space: &ItemSpace) -> Vec<(usize, usize)> {
    let known: HashSet<&[Item]> = level.iter().map(|f| f.items.as_slice()).collect();
    let is_event = |it: Item| space.modality(it) == Some(Modality::Event);
    let mut out = Vec::new();
    let mut start = 0;
    while start < level.len() {
        let prefix = &level[start].items[..level[start].items.len() - 1];
        let mut end = start + 1;
        while end < level.len() && &level[end].items[..prefix.len()] == prefix {
            end += 1;
        }
        for a in start..end {
            let last_a = *level[a].items.last().expect("nonempty");
            for b in a + 1..end {
                let last_b = *level[b].items.last().expect("nonempty");
                let events = level[a].items.iter().filter(|&&i| is_event(i)).count()
                    + usize::from(is_event(last_b));
                if events > 1 {
                    continue;
                }
                let mut cand = level[a].items.clone();
                cand.push(last_b);
                debug_assert!(last_a < last_b);
                // every subset dropping one of the first len-2 items must be frequent
                let all_frequent = (0..cand.len() - 2).all(|drop| {
                    let sub: Vec<Item> = cand
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != drop)
                        .map(|(_, &it)| it)
                        .collect();
                    known.contains(sub.as_slice())
                });
                if all_frequent {
                    out.push((a, b));
                }
            }
        }
        start = end;
    }
    out
}

/// Exhaustive oracle for [`mine`] over stores with at most
/// [`BRUTE_FORCE_MAX_ITEMS`] distinct items.
pub fn brute_force_mine(store: &TransactionStore, cfg: &MiningConfig) -> Result<Vec<Pattern>> {
    cfg.validate()?;
    if store.is_empty() {
        return Err(Error::InvalidInput("support of an empty transaction store".into()));
    }
    let universe = store.items();
    if universe.len() > BRUTE_FORCE_MAX_ITEMS {
        return Err(Error::InvalidInput(format!(
            "{} distinct items exceeds the enumeration bound of {}",
            universe.len(),
            BRUTE_FORCE_MAX_ITEMS
        )));
    }
    let masks: Vec<u32> = store
        .transactions()
        .iter()
        .map(|tx| {
            tx.items
                .iter()
                .map(|it| 1u32 << universe.binary_search(it).expect("item in universe"))
                .fold(0, |a, b| a | b)
        })
        .collect();
    let count_mask = |m: u32| -> (u64, Vec<u32>) {
        let tids: Vec<u32> = masks
            .iter()
            .enumerate()
            .filter(|(_, &tm)| tm & m == m)
            .map(|(i, _)| i as u32)
            .collect();
        let docs: HashSet<u32> = tids.iter().map(|&t| store.doc_index(t)).collect();
        let c = if cfg.count_distinct_docs { docs.len() } else { tids.len() };
        (c as u64, tids)
    };

    let space = &cfg.space;
    let mut patterns = Vec::new();
    for m in 1u32..(1u32 << universe.len()) {
        if m.count_ones() as usize > cfg.max_itemset_len {
            continue;
        }
        let items: Vec<Item> = (0..universe.len())
            .filter(|b| m & (1 << b) != 0)
            .map(|b| universe[b])
            .collect();
        let s = shape(&items, space);
        if s.events != 1 || s.visual == 0 || s.text == 0 || items.iter().any(|&i| i >= space.len()) {
            continue;
        }
        let y = s.event.expect("one event item");
        let y_bit = 1u32 << universe.binary_search(&y).expect("in universe");
        let (count, tids) = count_mask(m);
        if count < cfg.min_support_count {
            continue;
        }
        let (ante_count, _) = count_mask(m & !y_bit);
        if cfg.c_min.le_fraction(count, ante_count) {
            patterns.push(make_pattern(&items, y, count, ante_count, tids, space));
        }
    }
    sort_patterns(&mut patterns);
    Ok(patterns)
}

/// Drops patterns whose antecedent is strictly contained in the antecedent of
/// another pattern with the same event.
pub fn maximal_only(patterns: &[Pattern]) -> Vec<Pattern> {
    let is_subset = |a: &[u32], b: &[u32]| a.iter().all(|x| b.binary_search(x).is_ok());
    patterns
        .iter()
        .filter(|p| {
            !patterns.iter().any(|q| {
                q.event == p.event
                    && (q.visual_items.len() + q.text_items.len())
                        > (p.visual_items.len() + p.text_items.len())
                    && is_subset(&p.visual_items, &q.visual_items)
                    && is_subset(&p.text_items, &q.text_items)
            })
        })
        .cloned()
        .collect()
}
