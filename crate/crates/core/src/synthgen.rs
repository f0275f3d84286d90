//! Synthetic corpora with planted multimodal patterns.
//!
//! Every document contributes `cells_per_doc` transactions. A plant's carrier
//! documents get the plant's filters at one designated cell and the plant's
//! words, in order, inside the caption. All other designated cells receive
//! independent Bernoulli noise over the filters no plant uses (a cell that
//! draws nothing gets one random noise filter so it still yields a
//! transaction). Each active filter also gets weaker responses at a couple of
//! other cells, which per-filter non-max suppression removes again.
//!
//! Caption words come in groups that share one embedding vector: one group
//! per event (its trigger words), one per plant, and a set of noise groups.
//! Plant words also leak one at a time into non-carrier captions, never
//! adjacent, so the planted bigram carries a higher idf than its parts.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, EmbeddingTable, EventDef, EventId, EventOntology, FeatureMap};
use crate::error::{Error, Result};
use crate::stopwords::StopLists;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    /// Filters that fire together at the carrier cell.
    pub visual_items: Vec<u32>,
    /// Caption template words; they form one word cluster and appear
    /// adjacently in carrier captions.
    pub words: Vec<String>,
    pub event: EventId,
    pub carrier_count: usize,
}

impl PlantSpec {
    pub fn gram(&self) -> String {
        self.words.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub total_tx: usize,
    pub cells_per_doc: usize,
    pub seed: u64,
    /// Per-filter inclusion probability at a non-carrier cell.
    pub noise_p: f64,
    pub height: usize,
    pub width: usize,
    pub filters: usize,
    pub k_top: usize,
    pub embedding_dim: usize,
    pub events: Vec<(String, Vec<String>)>,
    pub noise_groups: usize,
    pub words_per_noise_group: usize,
    pub noise_words_per_caption: usize,
    /// Probability that a non-carrier caption mentions a given plant's
    /// first (and, separately, last) word.
    pub plant_word_leak: f64,
    /// Carriers must reach this count so the miner can find each plant.
    pub min_support_count: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let ev = |name: &str, trig: &[&str]| (name.to_string(), trig.iter().map(|s| s.to_string()).collect());
        SynthConfig {
            total_tx: 2000,
            cells_per_doc: 1,
            seed: 0,
            noise_p: 0.01,
            height: 6,
            width: 6,
            filters: 256,
            k_top: 20,
            embedding_dim: 50,
            events: vec![
                ev("demonstrate", &["protest", "rally"]),
                ev("attack", &["attack", "bomb"]),
                ev("meet", &["summit", "meeting"]),
                ev("die", &["funeral", "mourn"]),
                ev("elect", &["election", "vote"]),
            ],
            noise_groups: 20,
            words_per_noise_group: 10,
            noise_words_per_caption: 6,
            plant_word_leak: 0.05,
            min_support_count: 30,
        }
    }
}

/// The five plants of the default fixture, one per default event.
pub fn default_plants() -> Vec<PlantSpec> {
    let plant = |v: [u32; 2], w: [&str; 2], event| PlantSpec {
        visual_items: v.to_vec(),
        words: w.iter().map(|s| s.to_string()).collect(),
        event,
        carrier_count: 36,
    };
    vec![
        plant([17, 42], ["riot", "police"], 0),
        plant([63, 88], ["air", "strike"], 1),
        plant([101, 130], ["world", "leaders"], 2),
        plant([150, 177], ["coffin", "carried"], 3),
        plant([200, 231], ["ballot", "box"], 4),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantTruth {
    pub spec: PlantSpec,
    pub gram: String,
    pub carrier_docs: Vec<String>,
}

/// What a generator run wrote, relative to its output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub corpus: String,
    pub ontology: String,
    pub embeddings: String,
    pub features_dir: String,
    pub documents: usize,
    pub transactions: usize,
    /// Word groups whose words reach `min_caption_df` captions: the number
    /// of clusters that recovers the groups exactly.
    pub recommended_clusters: usize,
    pub plants: Vec<PlantTruth>,
}

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const ONTOLOGY_FILE: &str = "ontology.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.txt";
pub const PLANTS_FILE: &str = "plants.json";
pub const FEATURES_DIR: &str = "features";

fn noise_word(i: usize) -> String {
    format!("tok{i:04}")
}

fn validate(specs: &[PlantSpec], cfg: &SynthConfig) -> Result<(usize, EventOntology)> {
    let bad = |m: String| Err(Error::InvalidInput(m));
    if cfg.cells_per_doc == 0 || cfg.cells_per_doc > cfg.height * cfg.width {
        return bad(format!(
            "cells_per_doc must be in 1..={}, got {}",
            cfg.height * cfg.width,
            cfg.cells_per_doc
        ));
    }
    if cfg.total_tx == 0 || !cfg.total_tx.is_multiple_of(cfg.cells_per_doc) {
        return bad(format!(
            "total_tx {} must be a positive multiple of cells_per_doc {}",
            cfg.total_tx, cfg.cells_per_doc
        ));
    }
    if !(0.0..=1.0).contains(&cfg.noise_p) || !(0.0..=1.0).contains(&cfg.plant_word_leak) {
        return bad("probabilities must lie in [0, 1]".into());
    }
    if cfg.noise_groups == 0 || cfg.words_per_noise_group == 0 || cfg.noise_words_per_caption < 2 {
        return bad("need at least one noise group and two noise words per caption".into());
    }
    let ontology = EventOntology::new(
        cfg.events
            .iter()
            .enumerate()
            .map(|(i, (name, triggers))| EventDef {
                id: i as EventId,
                name: name.clone(),
                triggers: triggers.iter().cloned().collect(),
            })
            .collect(),
    )?;
    let carriers: usize = specs.iter().map(|s| s.carrier_count).sum();
    if carriers > cfg.total_tx {
        return bad(format!("{carriers} carriers exceed {} transactions", cfg.total_tx));
    }
    let docs = cfg.total_tx / cfg.cells_per_doc;
    let stop = StopLists::standard();
    let mut used = BTreeSet::new();
    let mut plant_words = BTreeSet::new();
    for (i, s) in specs.iter().enumerate() {
        if s.visual_items.is_empty() || s.words.is_empty() {
            return bad(format!("plant {i} needs visual items and words"));
        }
        if s.visual_items.len() > cfg.k_top {
            return bad(format!("plant {i} has more filters than k_top={}", cfg.k_top));
        }
        if s.event as usize >= ontology.len() {
            return bad(format!("plant {i} uses unknown event {}", s.event));
        }
        if s.carrier_count < cfg.min_support_count {
            return bad(format!(
                "plant {i} has {} carriers, below the minimum support of {}",
                s.carrier_count, cfg.min_support_count
            ));
        }
        for &v in &s.visual_items {
            if v as usize >= cfg.filters {
                return bad(format!("plant {i} filter {v} is outside 0..{}", cfg.filters));
            }
            if !used.insert(v) {
                return bad(format!("filter {v} is planted twice"));
            }
        }
        for w in &s.words {
            if tokenize(w) != [w.clone()] || stop.contains(w) {
                return bad(format!("plant word {w:?} must be a single lowercase non-stop token"));
            }
            if !plant_words.insert(w.clone()) {
                return bad(format!("plant word {w:?} is used twice"));
            }
        }
    }
    if used.len() >= cfg.filters {
        return bad("plants use every filter; nothing is left for noise".into());
    }
    let triggers: Vec<&String> = ontology.events().iter().flat_map(|e| &e.triggers).collect();
    let noise_words = (0..cfg.noise_groups * cfg.words_per_noise_group).map(noise_word);
    for w in plant_words.iter().cloned().chain(noise_words) {
        if let Some(t) = triggers.iter().find(|t| w.starts_with(t.as_str())) {
            return bad(format!("caption word {w:?} would match trigger {t:?}"));
        }
    }
    for e in 0..ontology.len() as EventId {
        let per_event = docs / ontology.len() + usize::from((e as usize) < docs % ontology.len());
        let need: usize = specs.iter().filter(|s| s.event == e).map(|s| s.carrier_count).sum();
        if need > per_event {
            return bad(format!(
                "event {e} has {per_event} documents but its plants need {need} carriers"
            ));
        }
    }
    Ok((docs, ontology))
}

#[derive(Serialize)]
struct CorpusLine<'a> {
    doc_id: &'a str,
    caption: &'a str,
    features: &'a str,
}

/// Writes a complete corpus (JSONL, ontology, embeddings, feature maps and
/// the planted ground truth) into `out_dir`.
pub fn generate(specs: &[PlantSpec], cfg: &SynthConfig, out_dir: &Path) -> Result<SynthManifest> {
    let (n_docs, ontology) = validate(specs, cfg)?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(cfg.seed);
    let n_events = ontology.len();
    let cells = cfg.height * cfg.width;

    // balanced event labels, then carriers drawn from each plant's event
    let mut doc_event: Vec<EventId> = (0..n_docs).map(|i| (i % n_events) as EventId).collect();
    doc_event.shuffle(&mut rng);
    let mut carrier_of: Vec<Option<usize>> = vec![None; n_docs];
    for (pi, spec) in specs.iter().enumerate() {
        let mut pool: Vec<usize> = (0..n_docs)
            .filter(|&d| doc_event[d] == spec.event && carrier_of[d].is_none())
            .collect();
        pool.shuffle(&mut rng);
        for &d in pool.iter().take(spec.carrier_count) {
            carrier_of[d] = Some(pi);
        }
    }

    let planted: BTreeSet<u32> = specs.iter().flat_map(|s| s.visual_items.iter().copied()).collect();
    let noise_filters: Vec<u32> = (0..cfg.filters as u32).filter(|f| !planted.contains(f)).collect();
    let noise_vocab: Vec<String> = (0..cfg.noise_groups * cfg.words_per_noise_group)
        .map(noise_word)
        .collect();

    let features_dir = out_dir.join(FEATURES_DIR);
    fs::create_dir_all(&features_dir).map_err(|e| Error::io(&features_dir, e))?;
    let corpus_path = out_dir.join(CORPUS_FILE);
    let mut corpus_out = std::io::BufWriter::new(
        fs::File::create(&corpus_path).map_err(|e| Error::io(&corpus_path, e))?,
    );
    let mut carrier_docs: Vec<Vec<String>> = vec![Vec::new(); specs.len()];
    let mut captions = Vec::with_capacity(n_docs);

    for d in 0..n_docs {
        let doc_id = format!("d{d:05}");
        let event = doc_event[d];
        let carrier = carrier_of[d];

        let mut map = FeatureMap::zeros(cfg.height, cfg.width, cfg.filters);
        let mut designated: Vec<usize> = (0..cells).collect();
        designated.shuffle(&mut rng);
        designated.truncate(cfg.cells_per_doc);
        let mut used_filters = BTreeSet::new();
        for (slot, &cell) in designated.iter().enumerate() {
            let mut active: Vec<u32> = Vec::new();
            if slot == 0 {
                if let Some(pi) = carrier {
                    active.extend(&specs[pi].visual_items);
                }
            }
            for &f in &noise_filters {
                if active.len() >= cfg.k_top {
                    break;
                }
                if rng.random::<f64>() < cfg.noise_p && !used_filters.contains(&f) {
                    active.push(f);
                }
            }
            if active.is_empty() {
                let free: Vec<u32> = noise_filters
                    .iter()
                    .copied()
                    .filter(|f| !used_filters.contains(f))
                    .collect();
                if let Some(&f) = free.choose(&mut rng) {
                    active.push(f);
                }
            }
            for &f in &active {
                used_filters.insert(f);
                let peak = 1.0 + rng.random::<f32>();
                map.set(cell / cfg.width, cell % cfg.width, f as usize, peak);
                for _ in 0..2 {
                    let other = rng.random_range(0..cells);
                    if other != cell && map.get(other / cfg.width, other % cfg.width, f as usize) == 0.0 {
                        let weak = peak * (0.1 + 0.5 * rng.random::<f32>());
                        map.set(other / cfg.width, other % cfg.width, f as usize, weak);
                    }
                }
            }
        }
        let feature_ref = format!("{FEATURES_DIR}/{doc_id}.bin");
        map.save(&out_dir.join(&feature_ref))?;

        let mut noise: Vec<&String> = noise_vocab
            .choose_multiple(&mut rng, cfg.noise_words_per_caption)
            .collect();
        noise.shuffle(&mut rng);
        let trigger = ontology.events()[event as usize]
            .triggers
            .iter()
            .collect::<Vec<_>>()
            .choose(&mut rng)
            .map(|t| t.to_string())
            .expect("nonempty triggers");
        let mut words: Vec<String> = Vec::new();
        match carrier {
            Some(pi) => {
                words.push(noise[0].clone());
                words.extend(specs[pi].words.iter().cloned());
                words.extend(noise[1..].iter().map(|w| w.to_string()));
                words.push(trigger);
                carrier_docs[pi].push(doc_id.clone());
            }
            None => {
                let mut head = Vec::new();
                let mut tail = Vec::new();
                for spec in specs {
                    if rng.random::<f64>() < cfg.plant_word_leak {
                        head.push(spec.words[0].clone());
                    }
                    if rng.random::<f64>() < cfg.plant_word_leak {
                        tail.push(spec.words[spec.words.len() - 1].clone());
                    }
                }
                words.extend(head);
                let mid = noise.len() / 2;
                words.extend(noise[..mid].iter().map(|w| w.to_string()));
                words.push(trigger);
                words.extend(noise[mid..].iter().map(|w| w.to_string()));
                words.extend(tail);
            }
        }
        let caption = words.join(" ");
        let line = serde_json::to_string(&CorpusLine {
            doc_id: &doc_id,
            caption: &caption,
            features: &feature_ref,
        })
        .expect("serializable");
        writeln!(corpus_out, "{line}").map_err(|e| Error::io(&corpus_path, e))?;
        captions.push(tokenize(&caption));
    }
    corpus_out.flush().map_err(|e| Error::io(&corpus_path, e))?;

    // word groups and their shared vectors
    let mut groups: Vec<Vec<String>> = ontology
        .events()
        .iter()
        .map(|e| e.triggers.iter().cloned().collect())
        .collect();
    groups.extend(specs.iter().map(|s| s.words.clone()));
    groups.extend(noise_vocab.chunks(cfg.words_per_noise_group).map(|c| c.to_vec()));

    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for toks in &captions {
        for w in toks.iter().collect::<BTreeSet<_>>() {
            *df.entry(w.as_str()).or_default() += 1;
        }
    }
    let min_df = crate::text_tx::DEFAULT_MIN_CAPTION_DF as usize;
    let recommended_clusters = groups
        .iter()
        .filter(|g| g.iter().any(|w| df.get(w.as_str()).copied().unwrap_or(0) >= min_df))
        .count();

    let mut table = EmbeddingTable::new(cfg.embedding_dim);
    for group in &groups {
        let v: Vec<f32> = loop {
            let v: Vec<f32> = (0..cfg.embedding_dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
            if v.iter().any(|x| *x != 0.0) {
                break v;
            }
        };
        for w in group {
            table.insert(w.clone(), v.clone())?;
        }
    }
    table.save(&out_dir.join(EMBEDDINGS_FILE))?;

    let ontology_path = out_dir.join(ONTOLOGY_FILE);
    write_json(&ontology_path, &ontology)?;

    let plants: Vec<PlantTruth> = specs
        .iter()
        .zip(carrier_docs)
        .map(|(s, carrier_docs)| PlantTruth {
            spec: s.clone(),
            gram: s.gram(),
            carrier_docs,
        })
        .collect();
    write_json(&out_dir.join(PLANTS_FILE), &plants)?;

    Ok(SynthManifest {
        corpus: CORPUS_FILE.into(),
        ontology: ONTOLOGY_FILE.into(),
        embeddings: EMBEDDINGS_FILE.into(),
        features_dir: FEATURES_DIR.into(),
        documents: n_docs,
        transactions: n_docs * cfg.cells_per_doc,
        recommended_clusters,
        plants,
    })
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Json {
        path: path.to_owned(),
        source: e,
    })?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inconsistent_specs() {
        let cfg = SynthConfig::default();
        let mut plants = default_plants();
        plants[1].visual_items = vec![17];
        assert!(validate(&plants, &cfg).unwrap_err().to_string().contains("planted twice"));

        let mut plants = default_plants();
        plants[0].carrier_count = 10;
        assert!(validate(&plants, &cfg).is_err());

        let mut plants = default_plants();
        plants[0].words = vec!["protesters".into()];
        assert!(validate(&plants, &cfg).unwrap_err().to_string().contains("trigger"));

        let small = SynthConfig {
            total_tx: 100,
            ..SynthConfig::default()
        };
        assert!(validate(&default_plants(), &small).is_err());
        assert!(validate(&default_plants(), &cfg).is_ok());
    }
}
