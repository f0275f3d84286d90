//! Workspace-staged pipeline.
//!
//! Each stage reads the artifacts of earlier stages from a workspace
//! directory and writes its own under fixed names, so stages can be re-run
//! independently. Paths recorded in artifacts are relative to the workspace
//! when they point inside it.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::corpus::{
    assign_events, event_witnesses, load_corpus, load_embeddings, Document, EventOntology, EventWitness,
    FeatureStore, RecordError,
};
use crate::error::{Error, Result};
use crate::midlevel::{self, activations, train_softmax, PatternBank, Sample, SoftmaxModel};
use crate::miner::{maximal_only, mine, MiningConfig, Pattern};
use crate::namer::{
    blacklist_names, build_ngram_stats, member_documents, name_pattern, EventGramIndex, RankedGram,
};
use crate::report::{event_counts, render_html, RoiRef};
use crate::stopwords::StopLists;
use crate::synthgen::{self, write_json, PlantSpec, SynthConfig, SynthManifest};
use crate::text_tx::{
    build_vocabulary, caption_to_itemset, kmeans_cluster_detailed, ClusterModel, KMeansParams, TextVocabulary,
};
use crate::transactions::{fuse, ItemSpace, TransactionStore};
use crate::visual_tx::{cell_to_roi, visual_itemsets, VisualItemset};

pub const CONFIG_FILE: &str = "mmpm.conf";
pub const CORPUS_DIR: &str = "corpus";
pub const INGEST_MANIFEST: &str = "ingest.json";
pub const DOCUMENTS: &str = "documents.json";
pub const WITNESSES: &str = "witnesses.json";
pub const ONTOLOGY: &str = "ontology.json";
pub const VOCABULARY: &str = "vocabulary.json";
pub const CLUSTERS: &str = "clusters.json";
pub const CLUSTER_LOG: &str = "cluster_log.json";
pub const VISUAL: &str = "visual.json";
pub const TRANSACTIONS: &str = "transactions.bin";
pub const PATTERNS: &str = "patterns.json";
pub const NAMES: &str = "names.json";
pub const MODEL: &str = "model.json";
pub const ACTIVATIONS: &str = "activations.bin";
pub const CLASSIFY: &str = "classify.json";
pub const EVENT_COUNTS: &str = "event_counts.json";
pub const ROIS: &str = "rois.json";
pub const REPORT: &str = "report.html";

#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
    pub config: PipelineConfig,
}

impl Workspace {
    /// Opens (creating if needed) a workspace. The configuration comes from
    /// `config_path`, else `<root>/mmpm.conf` when present, else defaults.
    pub fn open(root: impl Into<PathBuf>, config_path: Option<&Path>) -> Result<Self> {
        let root = std::path::absolute(root.into()).map_err(|e| Error::io(".", e))?;
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        let default_conf = root.join(CONFIG_FILE);
        let config = match config_path {
            Some(p) => PipelineConfig::load(p)?,
            None if default_conf.exists() => PipelineConfig::load(&default_conf)?,
            None => PipelineConfig::default(),
        };
        Ok(Workspace { root, config })
    }

    pub fn with_config(root: impl Into<PathBuf>, config: PipelineConfig) -> Result<Self> {
        let root = std::path::absolute(root.into()).map_err(|e| Error::io(".", e))?;
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        config.validate()?;
        Ok(Workspace { root, config })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn require(&self, name: &str, stage: &'static str) -> Result<PathBuf> {
        let p = self.path(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(Error::MissingStage {
                artifact: name.to_string(),
                stage,
            })
        }
    }

    fn read<T: DeserializeOwned>(&self, name: &str, stage: &'static str) -> Result<T> {
        let path = self.require(name, stage)?;
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::Json { path, source: e })
    }

    fn write<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<()> {
        write_json(&self.path(name), value)
    }

    /// Workspace-relative text for paths inside the workspace.
    fn record_path(&self, p: &Path) -> Result<String> {
        let abs = std::path::absolute(p).map_err(|e| Error::io(p, e))?;
        Ok(match abs.strip_prefix(&self.root) {
            Ok(rel) => rel.to_string_lossy().into_owned(),
            Err(_) => abs.to_string_lossy().into_owned(),
        })
    }

    fn resolve(&self, recorded: &str) -> PathBuf {
        let p = Path::new(recorded);
        if p.is_absolute() {
            p.to_owned()
        } else {
            self.root.join(p)
        }
    }

    fn documents(&self, stage_hint: &'static str) -> Result<Vec<Document>> {
        let _ = stage_hint;
        self.read(DOCUMENTS, "ingest")
    }

    fn manifest(&self) -> Result<IngestManifest> {
        self.read(INGEST_MANIFEST, "ingest")
    }

    fn ontology(&self) -> Result<EventOntology> {
        let p = self.require(ONTOLOGY, "ingest")?;
        EventOntology::load(&p)
    }

    fn store(&self) -> Result<TransactionStore> {
        TransactionStore::load(&self.require(TRANSACTIONS, "transact")?)
    }

    fn patterns(&self) -> Result<Vec<Pattern>> {
        self.read(PATTERNS, "mine")
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestArgs {
    pub corpus: Option<PathBuf>,
    pub features_dir: Option<PathBuf>,
    pub ontology: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedLine {
    pub line: usize,
    pub message: String,
}

impl From<RecordError> for SkippedLine {
    fn from(r: RecordError) -> Self {
        SkippedLine {
            line: r.line,
            message: r.message,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestManifest {
    pub corpus: String,
    pub features_dir: String,
    pub ontology: String,
    pub embeddings: String,
    pub dims: Option<(u32, u32, u32)>,
    pub embedding_dim: usize,
    pub embedding_words: usize,
    pub documents: usize,
    pub labeled: usize,
    pub skipped: Vec<SkippedLine>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocWitnesses {
    pub doc_id: String,
    pub witnesses: Vec<EventWitness>,
}

pub fn ingest(ws: &Workspace, args: &IngestArgs) -> Result<IngestManifest> {
    let corpus_dir = ws.path(CORPUS_DIR);
    let corpus = args
        .corpus
        .clone()
        .unwrap_or_else(|| corpus_dir.join(synthgen::CORPUS_FILE));
    let features_dir = args
        .features_dir
        .clone()
        .or_else(|| corpus.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    let ontology_path = args
        .ontology
        .clone()
        .unwrap_or_else(|| corpus_dir.join(synthgen::ONTOLOGY_FILE));
    let embeddings = args
        .embeddings
        .clone()
        .unwrap_or_else(|| corpus_dir.join(synthgen::EMBEDDINGS_FILE));

    let ontology = EventOntology::load(&ontology_path)?;
    let table = load_embeddings(&embeddings)?;
    let loaded = load_corpus(&corpus, &features_dir, ws.config.ingest_mode)?;
    let mut documents = loaded.documents;
    let mut witnesses = Vec::with_capacity(documents.len());
    for doc in documents.iter_mut() {
        doc.events = assign_events(&doc.tokens, &ontology);
        witnesses.push(DocWitnesses {
            doc_id: doc.doc_id.clone(),
            witnesses: event_witnesses(&doc.tokens, &ontology),
        });
    }
    if let Some((h, w, _)) = loaded.features.dims() {
        ws.config.geometry.validate(h, w)?;
    }

    let manifest = IngestManifest {
        corpus: ws.record_path(&corpus)?,
        features_dir: ws.record_path(&features_dir)?,
        ontology: ws.record_path(&ontology_path)?,
        embeddings: ws.record_path(&embeddings)?,
        dims: loaded.features.dims(),
        embedding_dim: table.dim(),
        embedding_words: table.len(),
        documents: documents.len(),
        labeled: documents.iter().filter(|d| !d.events.is_empty()).count(),
        skipped: loaded.skipped.into_iter().map(SkippedLine::from).collect(),
    };
    ws.write(DOCUMENTS, &documents)?;
    ws.write(WITNESSES, &witnesses)?;
    ws.write(ONTOLOGY, &ontology)?;
    ws.write(INGEST_MANIFEST, &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLog {
    pub vocabulary: usize,
    pub clustered: usize,
    pub dropped: Vec<String>,
    pub iterations: usize,
    pub converged: bool,
    pub objective_log: Vec<f64>,
}

pub fn cluster(ws: &Workspace) -> Result<ClusterLog> {
    let docs = ws.documents("cluster")?;
    let manifest = ws.manifest()?;
    let table = load_embeddings(&ws.resolve(&manifest.embeddings))?;
    let vocab = build_vocabulary(&docs, &StopLists::standard(), ws.config.min_caption_df)?;
    let run = kmeans_cluster_detailed(
        &vocab,
        &table,
        &KMeansParams {
            k: ws.config.clusters,
            seed: ws.config.kmeans_seed,
            max_iters: ws.config.kmeans_max_iters,
        },
    )?;
    let log = ClusterLog {
        vocabulary: vocab.len(),
        clustered: run.model.words().len(),
        dropped: run.dropped.clone(),
        iterations: run.iterations,
        converged: run.converged,
        objective_log: run.objective_log.clone(),
    };
    ws.write(VOCABULARY, &vocab)?;
    ws.write(CLUSTERS, &run.model)?;
    ws.write(CLUSTER_LOG, &log)?;
    Ok(log)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocVisual {
    pub doc_id: String,
    pub patches: Vec<VisualItemset>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactSummary {
    pub documents: usize,
    pub transactions: usize,
    pub space: ItemSpace,
}

pub fn transact(ws: &Workspace) -> Result<TransactSummary> {
    let docs = ws.documents("transact")?;
    let manifest = ws.manifest()?;
    let ontology = ws.ontology()?;
    let vocab: TextVocabulary = ws.read(VOCABULARY, "cluster")?;
    let model: ClusterModel = ws.read(CLUSTERS, "cluster")?;
    let features = match manifest.dims {
        Some(d) => FeatureStore::with_dims(ws.resolve(&manifest.features_dir), d),
        None => FeatureStore::new(ws.resolve(&manifest.features_dir)),
    };
    let filters = manifest.dims.map_or(0, |d| d.2);
    let space = ItemSpace::new(filters, model.k() as u32, ontology.len() as u32);
    let k_top = ws.config.k_top;

    let per_doc: Vec<(DocVisual, Vec<crate::transactions::Transaction>)> = docs
        .par_iter()
        .map(|doc| {
            let map = features.load(&doc.feature_ref)?;
            let patches = visual_itemsets(&map, k_top);
            let text = caption_to_itemset(doc, &vocab, &model);
            let txs = fuse(doc, &patches, &text, &space);
            Ok((
                DocVisual {
                    doc_id: doc.doc_id.clone(),
                    patches,
                },
                txs,
            ))
        })
        .collect::<Result<_>>()?;

    let mut visual = Vec::with_capacity(per_doc.len());
    let mut txs = Vec::new();
    for (v, t) in per_doc {
        visual.push(v);
        txs.extend(t);
    }
    let store = TransactionStore::new(Some(space), txs)?;
    store.save(&ws.path(TRANSACTIONS))?;
    ws.write(VISUAL, &visual)?;
    Ok(TransactSummary {
        documents: docs.len(),
        transactions: store.len(),
        space,
    })
}

pub fn mining_config(ws: &Workspace, space: ItemSpace) -> MiningConfig {
    MiningConfig {
        c_min: ws.config.c_min,
        min_support_count: ws.config.min_support_count,
        max_itemset_len: ws.config.max_itemset_len,
        space,
        count_distinct_docs: ws.config.support_distinct_docs,
    }
}

pub fn mine_stage(ws: &Workspace) -> Result<Vec<Pattern>> {
    let store = ws.store()?;
    let space = *store
        .space()
        .ok_or_else(|| Error::format(ws.path(TRANSACTIONS), "transaction stream has no item space"))?;
    let mut patterns = mine(&store, &mining_config(ws, space))?;
    if ws.config.maximal_only {
        patterns = maximal_only(&patterns);
    }
    ws.write(PATTERNS, &patterns)?;
    Ok(patterns)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NameRecord {
    pub pattern: usize,
    pub name: Option<String>,
    pub name_score: Option<f64>,
    pub name_blacklisted: bool,
    pub runner_up: Option<RankedGram>,
}

pub fn name_stage(ws: &Workspace) -> Result<Vec<NameRecord>> {
    let patterns = ws.patterns()?;
    let docs = ws.documents("name")?;
    let model: ClusterModel = ws.read(CLUSTERS, "cluster")?;
    let store = ws.store()?;
    let stats = build_ngram_stats(&docs, &StopLists::standard(), ws.config.min_gram_occ);
    let by_id: HashMap<&str, &Document> = docs.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let mode = ws.config.name_sum;

    let names: Vec<_> = patterns
        .par_iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let members = member_documents(p, &store, &by_id);
            name_pattern(i, p, &stats, &model, &members, mode)
        })
        .collect();
    let before: BTreeMap<usize, _> = names.iter().map(|n| (n.pattern, n.runner_up.clone())).collect();
    let index = EventGramIndex::build(&docs, &stats);
    let kept = blacklist_names(names, &index, ws.config.blacklist_threshold);
    let kept: BTreeMap<usize, _> = kept.into_iter().map(|n| (n.pattern, n)).collect();

    let records: Vec<NameRecord> = (0..patterns.len())
        .map(|i| match kept.get(&i) {
            Some(n) => NameRecord {
                pattern: i,
                name: Some(n.name.clone()),
                name_score: Some(n.score),
                name_blacklisted: n.blacklisted,
                runner_up: before.get(&i).cloned().flatten(),
            },
            None => NameRecord {
                pattern: i,
                name: None,
                name_score: None,
                name_blacklisted: before.contains_key(&i),
                runner_up: before.get(&i).cloned().flatten(),
            },
        })
        .collect();
    ws.write(NAMES, &records)?;
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifySummary {
    pub patterns: usize,
    pub documents: Vec<String>,
    pub labels: Vec<u32>,
    pub train_accuracy: f64,
    pub final_loss: f64,
}

#[derive(Serialize, Deserialize)]
pub struct StoredModel {
    pub bank: PatternBank,
    pub model: SoftmaxModel,
}

/// Trains the classifier on documents carrying exactly one event.
pub fn classify(ws: &Workspace) -> Result<ClassifySummary> {
    let patterns = ws.patterns()?;
    let visual: Vec<DocVisual> = ws.read(VISUAL, "transact")?;
    let docs = ws.documents("classify")?;
    let ontology = ws.ontology()?;
    if patterns.is_empty() {
        return Err(Error::InvalidInput("no mined patterns to build activation features from".into()));
    }
    let bank = PatternBank::from_patterns(&patterns)?;
    let patches: HashMap<&str, &[VisualItemset]> =
        visual.iter().map(|v| (v.doc_id.as_str(), v.patches.as_slice())).collect();

    let labeled: Vec<(&Document, u32)> = docs
        .iter()
        .filter(|d| d.events.len() == 1)
        .map(|d| (d, *d.events.iter().next().expect("one event")))
        .collect();
    let acts: Vec<_> = labeled
        .par_iter()
        .map(|(d, _)| activations(&d.doc_id, patches.get(d.doc_id.as_str()).copied().unwrap_or(&[]), &bank))
        .collect();
    let samples: Vec<Sample> = acts
        .iter()
        .zip(&labeled)
        .map(|(a, (_, y))| Sample {
            x: a.features(),
            label: *y,
        })
        .collect();
    let model = train_softmax(&samples, ontology.len(), &ws.config.classify)?;
    let train_accuracy = midlevel::accuracy(&model, &samples)?;

    let act_path = ws.path(ACTIVATIONS);
    let mut buf = Vec::new();
    for a in &acts {
        a.to_feature_map()?.write_to(&mut buf).map_err(|e| Error::io(&act_path, e))?;
    }
    fs::write(&act_path, buf).map_err(|e| Error::io(&act_path, e))?;

    let summary = ClassifySummary {
        patterns: bank.len(),
        documents: labeled.iter().map(|(d, _)| d.doc_id.clone()).collect(),
        labels: labeled.iter().map(|(_, y)| *y).collect(),
        train_accuracy,
        final_loss: model.train_log.last().copied().unwrap_or(f64::NAN),
    };
    ws.write(MODEL, &StoredModel { bank, model })?;
    ws.write(CLASSIFY, &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRois {
    pub pattern: usize,
    pub rois: Vec<RoiRef>,
}

/// Merges names into `patterns.json` and writes the per-event counts, ROI
/// references and the HTML page.
pub fn report(ws: &Workspace) -> Result<Vec<crate::report::EventCount>> {
    let mut patterns = ws.patterns()?;
    let ontology = ws.ontology()?;
    let store = ws.store()?;
    if ws.path(NAMES).exists() {
        let names: Vec<NameRecord> = ws.read(NAMES, "name")?;
        for p in patterns.iter_mut() {
            p.name = None;
            p.name_score = None;
            p.name_blacklisted = false;
        }
        for n in names {
            if let Some(p) = patterns.get_mut(n.pattern) {
                p.name = n.name;
                p.name_score = n.name_score;
                p.name_blacklisted = n.name_blacklisted;
            }
        }
    }
    let geom = ws.config.geometry;
    let rois: Vec<Vec<RoiRef>> = patterns
        .iter()
        .map(|p| {
            p.member_tx
                .iter()
                .filter_map(|&t| store.get(t))
                .map(|tx| {
                    let r = cell_to_roi(tx.cell, &geom)?;
                    Ok(RoiRef {
                        doc_id: tx.doc_id.clone(),
                        row: tx.cell.row,
                        col: tx.cell.col,
                        x0: r.x0,
                        y0: r.y0,
                        x1: r.x1,
                        y1: r.y1,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let counts = event_counts(&patterns, &ontology);
    let html = render_html(&patterns, &rois, &ontology);

    ws.write(PATTERNS, &patterns)?;
    ws.write(EVENT_COUNTS, &counts)?;
    let pattern_rois: Vec<PatternRois> = rois
        .into_iter()
        .enumerate()
        .map(|(pattern, rois)| PatternRois { pattern, rois })
        .collect();
    ws.write(ROIS, &pattern_rois)?;
    let report_path = ws.path(REPORT);
    fs::write(&report_path, html).map_err(|e| Error::io(&report_path, e))?;
    Ok(counts)
}

/// Generates a synthetic corpus under `<workspace>/corpus` and writes a
/// matching `mmpm.conf` (cluster count set to the generated word groups).
pub fn synth(ws: &mut Workspace, specs: &[PlantSpec], cfg: &SynthConfig) -> Result<SynthManifest> {
    let dir = ws.path(CORPUS_DIR);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let manifest = synthgen::generate(specs, cfg, &dir)?;
    ws.config.clusters = manifest.recommended_clusters;
    ws.config.k_top = cfg.k_top;
    ws.config.min_support_count = cfg.min_support_count as u64;
    let conf = ws.path(CONFIG_FILE);
    fs::write(&conf, ws.config.render()).map_err(|e| Error::io(&conf, e))?;
    Ok(manifest)
}
