#![allow(dead_code)]

use mmpm::corpus::Document;
use mmpm::ratio::Ratio;
use mmpm::transactions::{ItemSpace, Transaction, TransactionStore};
use mmpm::visual_tx::PatchCell;
use mmpm::miner::MiningConfig;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// 5 filters, 4 clusters and 3 events: twelve items in all.
pub const SPACE: ItemSpace = ItemSpace {
    visual: 5,
    text: 4,
    events: 3,
};

/// A random store whose transactions mix a few correlated motifs with
/// background noise, so that rules of several sizes pass the thresholds.
pub fn random_store(seed: u64) -> (TransactionStore, MiningConfig) {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let n_tx = rng.random_range(50..=300);
    let n_docs = rng.random_range(n_tx / 3..=n_tx);
    let motifs: Vec<Vec<u32>> = (0..3)
        .map(|_| {
            let mut m: Vec<u32> = (0..SPACE.len()).filter(|_| rng.random_bool(0.3)).collect();
            m.push(SPACE.event_item(rng.random_range(0..SPACE.events)));
            m.sort_unstable();
            m.dedup();
            m
        })
        .collect();
    let noise = rng.random_range(0.05..0.3);
    let txs = (0..n_tx)
        .map(|i| {
            let mut items: Vec<u32> = Vec::new();
            if rng.random_bool(0.7) {
                let m = &motifs[rng.random_range(0..motifs.len())];
                items.extend(m.iter().copied().filter(|_| rng.random_bool(0.9)));
            }
            items.extend((0..SPACE.len()).filter(|_| rng.random_bool(noise)));
            items.sort_unstable();
            items.dedup();
            Transaction {
                tx_id: i as u32,
                doc_id: format!("d{}", rng.random_range(0..n_docs)),
                cell: PatchCell::new(0, 0),
                items,
            }
        })
        .collect();
    let store = TransactionStore::new(Some(SPACE), txs).expect("valid store");
    let (num, den) = [(1, 2), (2, 3), (4, 5), (1, 1)][rng.random_range(0..4)];
    let c_min = Ratio::new(num, den).unwrap();
    let cfg = MiningConfig {
        c_min,
        min_support_count: rng.random_range(3..=30),
        max_itemset_len: rng.random_range(3..=6),
        count_distinct_docs: rng.random_bool(0.25),
        ..MiningConfig::new(SPACE)
    };
    (store, cfg)
}

pub fn doc(id: &str, caption: &str) -> Document {
    Document {
        doc_id: id.to_string(),
        caption_raw: caption.to_string(),
        tokens: mmpm::corpus::tokenize(caption),
        events: Default::default(),
        feature_ref: String::new(),
    }
}

/// Activation vectors for `classes` events where each event owns two
/// patterns that always fire on its images; four shared patterns fire at
/// random. Linearly separable by construction.
pub fn separable_activations(classes: usize, per_class: usize, seed: u64) -> Vec<mmpm::midlevel::Sample> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let features = 2 * classes + 4;
    let mut out = Vec::new();
    for c in 0..classes {
        for _ in 0..per_class {
            let mut x = vec![0.0; features];
            x[2 * c] = 1.0;
            x[2 * c + 1] = 1.0;
            for v in &mut x[2 * classes..] {
                *v = f64::from(u8::from(rng.random_bool(0.5)));
            }
            // occasionally a foreign pattern fires too
            if rng.random_bool(0.2) {
                x[rng.random_range(0..2 * classes)] = 1.0;
            }
            out.push(mmpm::midlevel::Sample { x, label: c as u32 });
        }
    }
    out
}

/// Largest relative error between the analytic gradient and central
/// differences, over every weight and bias.
pub fn gradient_check(model: &mmpm::midlevel::SoftmaxModel, data: &[mmpm::midlevel::Sample], l2: f64) -> f64 {
    let (_, g) = model.loss_and_gradient(data, l2);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let rel = |a: f64, n: f64| (a - n).abs() / (a.abs() + n.abs()).max(1e-8);
    for i in 0..model.weights.len() {
        let (mut plus, mut minus) = (model.clone(), model.clone());
        plus.weights[i] += h;
        minus.weights[i] -= h;
        let n = (plus.loss_and_gradient(data, l2).0 - minus.loss_and_gradient(data, l2).0) / (2.0 * h);
        worst = worst.max(rel(g.weights[i], n));
    }
    for i in 0..model.bias.len() {
        let (mut plus, mut minus) = (model.clone(), model.clone());
        plus.bias[i] += h;
        minus.bias[i] -= h;
        let n = (plus.loss_and_gradient(data, l2).0 - minus.loss_and_gradient(data, l2).0) / (2.0 * h);
        worst = worst.max(rel(g.bias[i], n));
    }
    worst
}

/// A model with small random parameters, away from the symmetric start.
pub fn random_model(classes: usize, features: usize, seed: u64) -> mmpm::midlevel::SoftmaxModel {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut m = mmpm::midlevel::SoftmaxModel::zeros(classes, features);
    for w in m.weights.iter_mut() {
        *w = rng.random_range(-0.5..0.5);
    }
    for b in m.bias.iter_mut() {
        *b = rng.random_range(-0.5..0.5);
    }
    m
}

/// Subset-indicator reference for pattern activations.
pub fn naive_activations(patches: &[Vec<u32>], bank: &[Vec<u32>]) -> Vec<u8> {
    bank.iter()
        .map(|pat| {
            let mut fired = 0;
            for patch in patches {
                let mut all = true;
                for f in pat {
                    if !patch.contains(f) {
                        all = false;
                    }
                }
                if all {
                    fired = 1;
                }
            }
            fired
        })
        .collect()
}

/// Purely alphabetic token for index `n`, unlikely to be a stop word.
pub fn word(prefix: &str, mut n: usize) -> String {
    let mut s = String::from(prefix);
    loop {
        s.push((b'a' + (n % 26) as u8) as char);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    s
}

pub struct NamingFixture {
    pub docs: Vec<Document>,
    pub members: Vec<usize>,
    pub model: mmpm::text_tx::ClusterModel,
    pub pattern: mmpm::miner::Pattern,
    pub expected: String,
}

/// Two hundred captions of one event. The pattern's member captions carry
/// the planted bigram `A B`; `A` and `B` also occur alone elsewhere, and a
/// third cluster word `C` decorates ten members. With `blacklisted`, fifteen
/// extra captions repeat `A B`, pushing it above a tenth of the event's
/// captions, so the expected name is the runner-up `C`.
pub fn naming_fixture(index: usize, blacklisted: bool) -> NamingFixture {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(1000 + index as u64);
    let a = word("zqa", index);
    let b = word("zqb", index);
    let c = word("zqc", index);
    let noise: Vec<String> = (0..40).map(|n| word("zn", n + 26 * index)).collect();
    let pick = |k: usize, rng: &mut Xoshiro256PlusPlus| -> Vec<String> {
        (0..k).map(|_| noise[rng.random_range(0..noise.len())].clone()).collect()
    };
    let n_members = if blacklisted { 15 } else { 15 + index % 4 };
    let mut captions: Vec<String> = Vec::new();
    for i in 0..n_members {
        let mut w = vec![pick(1, &mut rng).remove(0), a.clone(), b.clone()];
        w.extend(pick(2, &mut rng));
        if i < 10 {
            w.push(c.clone());
        }
        captions.push(w.join(" "));
    }
    let members: Vec<usize> = (0..n_members).collect();
    if blacklisted {
        for _ in 0..15 {
            let mut w = pick(1, &mut rng);
            w.extend([a.clone(), b.clone()]);
            w.extend(pick(2, &mut rng));
            captions.push(w.join(" "));
        }
    }
    for solo in [&a, &b] {
        for _ in 0..15 {
            let mut w = pick(1, &mut rng);
            w.push(solo.clone());
            w.extend(pick(2, &mut rng));
            captions.push(w.join(" "));
        }
    }
    while captions.len() < 200 {
        captions.push(pick(3, &mut rng).join(" "));
    }
    let docs: Vec<Document> = captions
        .iter()
        .enumerate()
        .map(|(i, cap)| {
            let mut d = doc(&format!("n{index}_{i}"), cap);
            d.events.insert(0);
            d
        })
        .collect();

    let mut words: Vec<String> = vec![a.clone(), b.clone(), c.clone()];
    words.extend(noise.iter().cloned());
    words.sort();
    words.dedup();
    let assign = words.iter().map(|w| u32::from(!(w == &a || w == &b || w == &c))).collect();
    let model = mmpm::text_tx::ClusterModel::new(2, 0, words, assign, vec![vec![0.0], vec![1.0]]).unwrap();
    let pattern = mmpm::miner::Pattern {
        event: 0,
        visual_items: vec![index as u32],
        text_items: vec![0],
        support_count: n_members as u64,
        antecedent_count: n_members as u64,
        confidence: 1.0,
        member_tx: (0..n_members as u32).collect(),
        name: None,
        name_score: None,
        name_blacklisted: false,
    };
    NamingFixture {
        docs,
        members,
        model,
        pattern,
        expected: if blacklisted { c } else { format!("{a} {b}") },
    }
}

/// Names a fixture the way the pipeline does: rank, then apply the event
/// blacklist at one tenth.
pub fn name_fixture(f: &NamingFixture) -> Option<mmpm::namer::PatternName> {
    use mmpm::namer::{blacklist_names, build_ngram_stats, name_pattern, CaptionSum, EventGramIndex};
    let stats = build_ngram_stats(&f.docs, &mmpm::stopwords::StopLists::standard(), 10);
    let members: Vec<&Document> = f.members.iter().map(|&i| &f.docs[i]).collect();
    let named = name_pattern(0, &f.pattern, &stats, &f.model, &members, CaptionSum::DistinctDocuments)?;
    let index = EventGramIndex::build(&f.docs, &stats);
    blacklist_names(vec![named], &index, Ratio::new(1, 10).unwrap()).pop()
}

/// A random map with many exact ties and zeros.
pub fn random_map(seed: u64) -> mmpm::corpus::FeatureMap {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let h = rng.random_range(1..=7);
    let w = rng.random_range(1..=7);
    let f = rng.random_range(1..=40);
    let values = (0..h * w * f)
        .map(|_| if rng.random_bool(0.4) { 0.0 } else { f32::from(rng.random_range(1u8..=8)) * 0.25 })
        .collect();
    mmpm::corpus::FeatureMap::new(h, w, f, values).unwrap()
}

/// Per-filter argmax written filter by filter: the first cell in row-major
/// order holding the maximum keeps its value, every other cell is zeroed.
pub fn naive_nms(map: &mmpm::corpus::FeatureMap) -> mmpm::corpus::FeatureMap {
    let (h, w, f) = map.dims();
    let mut out = mmpm::corpus::FeatureMap::zeros(h, w, f);
    for filter in 0..f {
        let mut best: Option<(usize, usize, f32)> = None;
        for r in 0..h {
            for c in 0..w {
                let v = map.get(r, c, filter);
                if v > 0.0 && best.is_none_or(|(_, _, b)| v > b) {
                    best = Some((r, c, v));
                }
            }
        }
        if let Some((r, c, v)) = best {
            out.set(r, c, filter, v);
        }
    }
    out
}

/// Top-k by repeated selection: take the largest remaining value, lowest
/// filter index first among equals.
pub fn naive_binarize(map: &mmpm::corpus::FeatureMap, k_top: usize) -> Vec<((u32, u32), Vec<u32>)> {
    let (h, w, f) = map.dims();
    let mut out = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let mut taken = vec![false; f];
            let mut items = Vec::new();
            for _ in 0..k_top {
                let mut pick: Option<usize> = None;
                for (i, &used) in taken.iter().enumerate() {
                    let v = map.get(r, c, i);
                    if !used && v != 0.0 && pick.is_none_or(|p| v > map.get(r, c, p)) {
                        pick = Some(i);
                    }
                }
                match pick {
                    Some(p) => {
                        taken[p] = true;
                        items.push(p as u32);
                    }
                    None => break,
                }
            }
            if !items.is_empty() {
                items.sort_unstable();
                out.push(((r as u32, c as u32), items));
            }
        }
    }
    out
}
