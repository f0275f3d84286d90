//! Python bindings: `import mmpm_py`.
//!
//! Values cross the boundary as plain Python types. Feature maps are flat
//! row-major `(row, col, filter)` float lists with explicit dimensions;
//! transactions are lists of global item ids laid out as visual filters,
//! then text clusters, then events; ratios are `(numerator, denominator)`
//! tuples.

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mmpm::corpus::{self, Document, EventDef, EventOntology, FeatureMap};
use mmpm::midlevel::{self, PatternBank, Sample, SoftmaxModel, TrainConfig};
use mmpm::miner::{self, MiningConfig, Pattern};
use mmpm::namer::{self, CaptionSum};
use mmpm::ratio::Ratio;
use mmpm::stopwords::StopLists;
use mmpm::synthgen::{self, SynthConfig};
use mmpm::text_tx::ClusterModel;
use mmpm::transactions::{ItemSpace, TransactionStore};
use mmpm::visual_tx::{self, PatchCell, PatchGeometry, VisualItemset};
use mmpm::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn ratio_tuple(r: Ratio) -> (u64, u64) {
    (r.num, r.den)
}

fn feature_map(values: Vec<f32>, height: usize, width: usize, filters: usize) -> PyResult<FeatureMap> {
    FeatureMap::new(height, width, filters, values).map_err(to_py)
}

fn ontology(events: Vec<(u32, String, Vec<String>)>) -> PyResult<EventOntology> {
    EventOntology::new(
        events
            .into_iter()
            .map(|(id, name, triggers)| EventDef {
                id,
                name,
                triggers: triggers.into_iter().collect(),
            })
            .collect(),
    )
    .map_err(to_py)
}

fn sorted(mut v: Vec<u32>) -> Vec<u32> {
    v.sort_unstable();
    v.dedup();
    v
}

fn store(transactions: Vec<Vec<u32>>, space: Option<ItemSpace>) -> PyResult<TransactionStore> {
    match space {
        None => Ok(TransactionStore::from_itemsets(transactions.into_iter().map(sorted))),
        Some(_) => {
            let plain = TransactionStore::from_itemsets(transactions.into_iter().map(sorted));
            TransactionStore::new(space, plain.transactions().to_vec()).map_err(to_py)
        }
    }
}

/// Lowercased word tokens of a caption.
#[pyfunction]
fn tokenize(caption: &str) -> Vec<String> {
    corpus::tokenize(caption)
}

/// Event ids whose triggers match a token exactly or as a prefix.
/// `events` is a list of `(id, name, triggers)`.
#[pyfunction]
fn assign_events(tokens: Vec<String>, events: Vec<(u32, String, Vec<String>)>) -> PyResult<Vec<u32>> {
    let onto = ontology(events)?;
    Ok(corpus::assign_events(&tokens, &onto).into_iter().collect())
}

/// Keeps each filter's maximum cell (first in row-major order on ties).
#[pyfunction]
fn nms_per_filter(values: Vec<f32>, height: usize, width: usize, filters: usize) -> PyResult<Vec<f32>> {
    let map = feature_map(values, height, width, filters)?;
    Ok(visual_tx::nms_per_filter(&map).values().to_vec())
}

/// `((row, col), filters)` for one feature-map cell.
type CellItems = ((u32, u32), Vec<u32>);

/// Per-cell itemsets after suppression and top-k binarization:
/// a list of `((row, col), filters)` for cells with at least one item.
#[pyfunction]
#[pyo3(signature = (values, height, width, filters, k_top = visual_tx::DEFAULT_K_TOP))]
fn visual_itemsets(
    values: Vec<f32>,
    height: usize,
    width: usize,
    filters: usize,
    k_top: usize,
) -> PyResult<Vec<CellItems>> {
    let map = feature_map(values, height, width, filters)?;
    Ok(visual_tx::visual_itemsets(&map, k_top)
        .into_iter()
        .map(|v| ((v.cell.row, v.cell.col), v.items))
        .collect())
}

/// Pixel rectangle `(x0, y0, x1, y1)` (half-open) behind a feature-map cell.
#[pyfunction]
#[pyo3(signature = (row, col, image_side = 227, patch_side = 196, stride = 32, pad = 64))]
fn cell_to_roi(row: u32, col: u32, image_side: u32, patch_side: u32, stride: u32, pad: u32) -> PyResult<(u32, u32, u32, u32)> {
    let geom = PatchGeometry {
        image_side,
        patch_side,
        stride,
        pad,
    };
    let r = visual_tx::cell_to_roi(PatchCell::new(row, col), &geom).map_err(to_py)?;
    Ok((r.x0, r.y0, r.x1, r.y1))
}

/// Exact support of `itemset` as `(count, transactions)`.
#[pyfunction]
fn support(itemset: Vec<u32>, transactions: Vec<Vec<u32>>) -> PyResult<(u64, u64)> {
    let s = store(transactions, None)?;
    miner::support(&sorted(itemset), &s).map(ratio_tuple).map_err(to_py)
}

/// Exact confidence of `antecedent → y` as a reduced fraction.
#[pyfunction]
fn confidence(antecedent: Vec<u32>, y: u32, transactions: Vec<Vec<u32>>) -> PyResult<(u64, u64)> {
    let s = store(transactions, None)?;
    miner::confidence(&sorted(antecedent), y, &s).map(ratio_tuple).map_err(to_py)
}

fn pattern_dict<'py>(py: Python<'py>, p: &Pattern) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("event", p.event)?;
    d.set_item("visual_items", p.visual_items.clone())?;
    d.set_item("text_items", p.text_items.clone())?;
    d.set_item("support_count", p.support_count)?;
    d.set_item("antecedent_count", p.antecedent_count)?;
    d.set_item("confidence", p.confidence)?;
    d.set_item("member_tx", p.member_tx.clone())?;
    Ok(d)
}

#[allow(clippy::too_many_arguments)]
fn run_miner<'py>(
    py: Python<'py>,
    transactions: Vec<Vec<u32>>,
    visual: u32,
    text: u32,
    events: u32,
    c_min: &str,
    min_support_count: u64,
    max_itemset_len: usize,
    brute: bool,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let space = ItemSpace::new(visual, text, events);
    let s = store(transactions, Some(space))?;
    let cfg = MiningConfig {
        c_min: Ratio::from_decimal(c_min).map_err(to_py)?,
        min_support_count,
        max_itemset_len,
        ..MiningConfig::new(space)
    };
    let patterns = if brute {
        miner::brute_force_mine(&s, &cfg)
    } else {
        miner::mine(&s, &cfg)
    }
    .map_err(to_py)?;
    patterns.iter().map(|p| pattern_dict(py, p)).collect()
}

/// Mines multimodal `antecedent → event` rules. Items `0..visual` are
/// filters, the next `text` ids are word clusters, the last `events` ids are
/// events.
#[pyfunction]
#[pyo3(signature = (transactions, visual, text, events, c_min = "0.8", min_support_count = 30, max_itemset_len = 6))]
#[allow(clippy::too_many_arguments)]
fn mine<'py>(
    py: Python<'py>,
    transactions: Vec<Vec<u32>>,
    visual: u32,
    text: u32,
    events: u32,
    c_min: &str,
    min_support_count: u64,
    max_itemset_len: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    run_miner(py, transactions, visual, text, events, c_min, min_support_count, max_itemset_len, false)
}

/// Exhaustive reference miner (at most 20 distinct items).
#[pyfunction]
#[pyo3(signature = (transactions, visual, text, events, c_min = "0.8", min_support_count = 30, max_itemset_len = 6))]
#[allow(clippy::too_many_arguments)]
fn brute_force_mine<'py>(
    py: Python<'py>,
    transactions: Vec<Vec<u32>>,
    visual: u32,
    text: u32,
    events: u32,
    c_min: &str,
    min_support_count: u64,
    max_itemset_len: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    run_miner(py, transactions, visual, text, events, c_min, min_support_count, max_itemset_len, true)
}

/// Ranks candidate names `(gram, score)` for a pattern whose supporting
/// captions are `corpus[i]` for `i` in `members`. `word_clusters` maps words
/// to cluster ids and `text_items` lists the pattern's clusters.
#[pyfunction]
#[pyo3(signature = (corpus, members, word_clusters, text_items, min_gram_occ = namer::DEFAULT_MIN_GRAM_OCC))]
fn rank_names(
    corpus: Vec<String>,
    members: Vec<usize>,
    word_clusters: HashMap<String, u32>,
    text_items: Vec<u32>,
    min_gram_occ: u64,
) -> PyResult<Vec<(String, f64)>> {
    let docs: Vec<Document> = corpus
        .iter()
        .enumerate()
        .map(|(i, c)| Document {
            doc_id: format!("c{i}"),
            caption_raw: c.clone(),
            tokens: corpus::tokenize(c),
            events: BTreeSet::new(),
            feature_ref: String::new(),
        })
        .collect();
    if let Some(&bad) = members.iter().find(|&&m| m >= docs.len()) {
        return Err(PyValueError::new_err(format!("member {bad} out of range")));
    }
    let mut words: Vec<(String, u32)> = word_clusters.into_iter().collect();
    words.sort();
    let k = words.iter().map(|(_, c)| *c as usize + 1).max().unwrap_or(0);
    let model = ClusterModel::new(
        k,
        0,
        words.iter().map(|(w, _)| w.clone()).collect(),
        words.iter().map(|(_, c)| *c).collect(),
        vec![Vec::new(); k],
    )
    .map_err(to_py)?;
    let stats = namer::build_ngram_stats(&docs, &StopLists::standard(), min_gram_occ);
    let pattern = Pattern {
        event: 0,
        visual_items: Vec::new(),
        text_items: sorted(text_items),
        support_count: 0,
        antecedent_count: 0,
        confidence: 0.0,
        member_tx: Vec::new(),
        name: None,
        name_score: None,
        name_blacklisted: false,
    };
    let member_docs: Vec<&Document> = members.iter().map(|&m| &docs[m]).collect();
    Ok(
        namer::rank_candidates(&pattern, &stats, &model, &member_docs, CaptionSum::DistinctDocuments)
            .into_iter()
            .map(|g| (g.gram, g.score))
            .collect(),
    )
}

/// Pattern-activation bits of one image: `patches` is a list of filter
/// itemsets, `bank` a list of pattern filter sets.
#[pyfunction]
fn activations(patches: Vec<Vec<u32>>, bank: Vec<Vec<u32>>) -> PyResult<Vec<u32>> {
    let bank = PatternBank::new(bank).map_err(to_py)?;
    let patches: Vec<VisualItemset> = patches
        .into_iter()
        .map(|items| VisualItemset {
            cell: PatchCell::new(0, 0),
            items: sorted(items),
        })
        .collect();
    Ok(midlevel::activations("", &patches, &bank)
        .bits
        .into_iter()
        .map(u32::from)
        .collect())
}

/// Softmax event classifier over pattern-activation vectors.
#[pyclass(name = "SoftmaxModel", frozen)]
struct PySoftmaxModel {
    inner: SoftmaxModel,
}

#[pymethods]
impl PySoftmaxModel {
    #[new]
    #[pyo3(signature = (xs, labels, classes, lr = 0.5, l2 = 1e-4, epochs = 500))]
    fn train(xs: Vec<Vec<f64>>, labels: Vec<u32>, classes: usize, lr: f64, l2: f64, epochs: usize) -> PyResult<Self> {
        if xs.len() != labels.len() {
            return Err(PyValueError::new_err("xs and labels differ in length"));
        }
        let data: Vec<Sample> = xs.into_iter().zip(labels).map(|(x, label)| Sample { x, label }).collect();
        let cfg = TrainConfig {
            lr,
            l2,
            epochs,
            seed: 0,
        };
        let inner = midlevel::train_softmax(&data, classes, &cfg).map_err(to_py)?;
        Ok(PySoftmaxModel { inner })
    }

    fn probabilities(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.probabilities(&x).map_err(to_py)
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<u32> {
        midlevel::predict(&self.inner, &x).map(|p| p.event).map_err(to_py)
    }

    #[getter]
    fn train_log(&self) -> Vec<f64> {
        self.inner.train_log.clone()
    }
}

/// Writes a synthetic corpus with the default planted patterns into
/// `out_dir` and returns its manifest as a JSON string.
#[pyfunction]
#[pyo3(signature = (out_dir, seed = 0, total_tx = 2000, noise_p = 0.01))]
fn synth_generate(out_dir: PathBuf, seed: u64, total_tx: usize, noise_p: f64) -> PyResult<String> {
    let cfg = SynthConfig {
        seed,
        total_tx,
        noise_p,
        ..SynthConfig::default()
    };
    let m = synthgen::generate(&synthgen::default_plants(), &cfg, &out_dir).map_err(to_py)?;
    serde_json::to_string(&m).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn mmpm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(assign_events, m)?)?;
    m.add_function(wrap_pyfunction!(nms_per_filter, m)?)?;
    m.add_function(wrap_pyfunction!(visual_itemsets, m)?)?;
    m.add_function(wrap_pyfunction!(cell_to_roi, m)?)?;
    m.add_function(wrap_pyfunction!(support, m)?)?;
    m.add_function(wrap_pyfunction!(confidence, m)?)?;
    m.add_function(wrap_pyfunction!(mine, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_mine, m)?)?;
    m.add_function(wrap_pyfunction!(rank_names, m)?)?;
    m.add_function(wrap_pyfunction!(activations, m)?)?;
    m.add_function(wrap_pyfunction!(synth_generate, m)?)?;
    m.add_class::<PySoftmaxModel>()?;
    Ok(())
}
