//! Corpus ingestion: documents, the event ontology, feature maps and word
//! embeddings, plus weak event labelling through trigger words.
//!
//! Feature map files use a small binary layout:
//!
//! ```text
//! b"MMPM"  u32 height  u32 width  u32 filters  (f32 × height·width·filters)
//! ```
//!
//! All integers and floats are little-endian and values are stored row-major
//! as (row, col, filter) with the filter index varying fastest.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type EventId = u32;

pub const FEATURE_MAGIC: &[u8; 4] = b"MMPM";

/// Lowercases a caption and splits it on runs of non-alphanumeric characters.
pub fn tokenize(caption: &str) -> Vec<String> {
    caption
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// One image-caption pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub caption_raw: String,
    pub tokens: Vec<String>,
    pub events: BTreeSet<EventId>,
    pub feature_ref: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventDef {
    pub id: EventId,
    pub name: String,
    pub triggers: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventOntology {
    events: Vec<EventDef>,
}

impl EventOntology {
    /// Builds an ontology, checking that ids are dense `0..E` in order and
    /// that every trigger set is nonempty and whitespace free.
    pub fn new(mut events: Vec<EventDef>) -> Result<Self> {
        events.sort_by_key(|e| e.id);
        for (i, ev) in events.iter_mut().enumerate() {
            if ev.id as usize != i {
                return Err(Error::InvalidInput(format!(
                    "event ids must be dense from 0; found id {} at position {}",
                    ev.id, i
                )));
            }
            if ev.triggers.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "event {} ({}) has no trigger words",
                    ev.id, ev.name
                )));
            }
            let lowered: BTreeSet<String> = ev.triggers.iter().map(|t| t.to_lowercase()).collect();
            if let Some(bad) = lowered.iter().find(|t| t.is_empty() || t.chars().any(char::is_whitespace)) {
                return Err(Error::InvalidInput(format!(
                    "event {} has an invalid trigger {:?}",
                    ev.id, bad
                )));
            }
            ev.triggers = lowered;
        }
        Ok(EventOntology { events })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let events: Vec<EventDef> = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_owned(),
            source: e,
        })?;
        Self::new(events).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn events(&self) -> &[EventDef] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn name(&self, id: EventId) -> Option<&str> {
        self.events.get(id as usize).map(|e| e.name.as_str())
    }
}

/// A (token, trigger) pair that justified assigning `event`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventWitness {
    pub event: EventId,
    pub token: String,
    pub trigger: String,
}

fn trigger_matches(token: &str, trigger: &str) -> bool {
    token.starts_with(trigger)
}

/// Every (event, token, trigger) match for the given tokens, sorted.
pub fn event_witnesses(tokens: &[String], ontology: &EventOntology) -> Vec<EventWitness> {
    let mut out = BTreeSet::new();
    for ev in ontology.events() {
        for token in tokens {
            for trigger in &ev.triggers {
                if trigger_matches(token, trigger) {
                    out.insert(EventWitness {
                        event: ev.id,
                        token: token.clone(),
                        trigger: trigger.clone(),
                    });
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Assigns every event with a trigger equal to, or a prefix of, some token.
pub fn assign_events(tokens: &[String], ontology: &EventOntology) -> BTreeSet<EventId> {
    ontology
        .events()
        .iter()
        .filter(|ev| {
            tokens
                .iter()
                .any(|tok| ev.triggers.iter().any(|tr| trigger_matches(tok, tr)))
        })
        .map(|ev| ev.id)
        .collect()
}

/// H×W×F grid of non-negative filter responses.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    filters: usize,
    values: Vec<f32>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, filters: usize, values: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || filters == 0 {
            return Err(Error::InvalidInput("feature map dimensions must be positive".into()));
        }
        if values.len() != height * width * filters {
            return Err(Error::InvalidInput(format!(
                "feature map {}x{}x{} needs {} values, got {}",
                height,
                width,
                filters,
                height * width * filters,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "feature map values must be finite and non-negative, found {v}"
            )));
        }
        Ok(FeatureMap {
            height,
            width,
            filters,
            values,
        })
    }

    pub fn zeros(height: usize, width: usize, filters: usize) -> Self {
        FeatureMap {
            height,
            width,
            filters,
            values: vec![0.0; height * width * filters],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn filters(&self) -> usize {
        self.filters
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.filters)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    fn offset(&self, row: usize, col: usize, filter: usize) -> usize {
        (row * self.width + col) * self.filters + filter
    }

    pub fn get(&self, row: usize, col: usize, filter: usize) -> f32 {
        self.values[self.offset(row, col, filter)]
    }

    /// Panics on a negative or non-finite value.
    pub fn set(&mut self, row: usize, col: usize, filter: usize, value: f32) {
        assert!(value.is_finite() && value >= 0.0, "invalid response {value}");
        let i = self.offset(row, col, filter);
        self.values[i] = value;
    }

    /// The filter responses of one cell.
    pub fn cell(&self, row: usize, col: usize) -> &[f32] {
        let start = self.offset(row, col, 0);
        &self.values[start..start + self.filters]
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(FEATURE_MAGIC)?;
        w.write_u32::<LittleEndian>(self.height as u32)?;
        w.write_u32::<LittleEndian>(self.width as u32)?;
        w.write_u32::<LittleEndian>(self.filters as u32)?;
        let bytes: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        w.write_all(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    /// Reads one map; `Ok(None)` on a clean end of stream.
    pub fn read_from<R: Read>(mut r: R) -> std::io::Result<Option<Self>> {
        let mut magic = [0u8; 4];
        match r.read_exact(&mut magic) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(e),
        }
        if &magic != FEATURE_MAGIC {
            return Err(invalid_data("bad magic bytes"));
        }
        let (h, w, f) = read_dims(&mut r)?;
        let n = (h as usize)
            .checked_mul(w as usize)
            .and_then(|x| x.checked_mul(f as usize))
            .ok_or_else(|| invalid_data("dimensions overflow"))?;
        let mut values = vec![0f32; n];
        r.read_f32_into::<LittleEndian>(&mut values)?;
        FeatureMap::new(h as usize, w as usize, f as usize, values)
            .map(Some)
            .map_err(|e| invalid_data(&e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        match FeatureMap::read_from(BufReader::new(f)) {
            Ok(Some(m)) => Ok(m),
            Ok(None) => Err(Error::format(path, "empty feature file")),
            Err(e) => Err(Error::format(path, e.to_string())),
        }
    }
}

fn invalid_data(msg: &str) -> std::io::Error {
    std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string())
}

fn read_dims<R: Read>(r: &mut R) -> std::io::Result<(u32, u32, u32)> {
    Ok((
        r.read_u32::<LittleEndian>()?,
        r.read_u32::<LittleEndian>()?,
        r.read_u32::<LittleEndian>()?,
    ))
}

/// Reads only the header of a feature map file.
pub fn read_feature_header(path: &Path) -> Result<(u32, u32, u32)> {
    let mut f = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    if &magic != FEATURE_MAGIC {
        return Err(Error::format(path, "bad magic bytes"));
    }
    read_dims(&mut f).map_err(|e| Error::io(path, e))
}

/// Feature map files of a corpus, all sharing one (H, W, F).
#[derive(Debug, Clone)]
pub struct FeatureStore {
    root: PathBuf,
    dims: Option<(u32, u32, u32)>,
}

impl FeatureStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FeatureStore {
            root: root.into(),
            dims: None,
        }
    }

    pub fn with_dims(root: impl Into<PathBuf>, dims: (u32, u32, u32)) -> Self {
        FeatureStore {
            root: root.into(),
            dims: Some(dims),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// (height, width, filters) shared by every map, once known.
    pub fn dims(&self) -> Option<(u32, u32, u32)> {
        self.dims
    }

    pub fn path_of(&self, feature_ref: &str) -> PathBuf {
        self.root.join(feature_ref)
    }

    fn check(&mut self, path: &Path, found: (u32, u32, u32)) -> Result<()> {
        match self.dims {
            None => {
                self.dims = Some(found);
                Ok(())
            }
            Some(expected) if expected == found => Ok(()),
            Some(expected) => Err(Error::Dimension {
                path: path.to_owned(),
                expected,
                found,
            }),
        }
    }

    pub fn load(&self, feature_ref: &str) -> Result<FeatureMap> {
        let path = self.path_of(feature_ref);
        let map = FeatureMap::load(&path)?;
        let (h, w, f) = map.dims();
        let found = (h as u32, w as u32, f as u32);
        match self.dims {
            Some(expected) if expected != found => Err(Error::Dimension {
                path,
                expected,
                found,
            }),
            _ => Ok(map),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadMode {
    #[default]
    Strict,
    SkipAndReport,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug)]
pub struct LoadedCorpus {
    pub documents: Vec<Document>,
    pub features: FeatureStore,
    pub skipped: Vec<RecordError>,
}

#[derive(Deserialize)]
struct CorpusLine {
    doc_id: String,
    caption: String,
    features: String,
}

/// Loads a JSONL corpus. Documents come back with empty event sets; label
/// them with [`assign_events`]. Line numbers in errors are 1-based.
pub fn load_corpus(jsonl_path: &Path, tensor_dir: &Path, mode: LoadMode) -> Result<LoadedCorpus> {
    let file = File::open(jsonl_path).map_err(|e| Error::io(jsonl_path, e))?;
    let mut features = FeatureStore::new(tensor_dir);
    let mut documents = Vec::new();
    let mut skipped = Vec::new();
    let mut seen = HashSet::new();

    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(jsonl_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<CorpusLine>(&line)
            .map_err(|e| e.to_string())
            .and_then(|rec| {
                if rec.doc_id.is_empty() {
                    Err("empty doc_id".to_string())
                } else if seen.contains(&rec.doc_id) {
                    Err(format!("duplicate doc_id {:?}", rec.doc_id))
                } else {
                    Ok(rec)
                }
            });
        let rec = match parsed {
            Ok(rec) => rec,
            Err(message) => match mode {
                LoadMode::Strict => {
                    return Err(Error::Record {
                        path: jsonl_path.to_owned(),
                        line: lineno,
                        message,
                    })
                }
                LoadMode::SkipAndReport => {
                    log::warn!("{}:{}: skipping record: {}", jsonl_path.display(), lineno, message);
                    skipped.push(RecordError { line: lineno, message });
                    continue;
                }
            },
        };

        let fpath = features.path_of(&rec.features);
        let dims = read_feature_header(&fpath)?;
        features.check(&fpath, dims)?;

        seen.insert(rec.doc_id.clone());
        documents.push(Document {
            tokens: tokenize(&rec.caption),
            doc_id: rec.doc_id,
            caption_raw: rec.caption,
            events: BTreeSet::new(),
            feature_ref: rec.features,
        });
    }

    Ok(LoadedCorpus {
        documents,
        features,
        skipped,
    })
}

/// Word vectors read from word2vec text format.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    entries: HashMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            entries: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    /// Inserts a vector, returning the previous one for the word if any.
    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f32>) -> Result<Option<Vec<f32>>> {
        let word = word.into();
        if vector.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "vector for {:?} has length {}, expected {}",
                word,
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("vector for {word:?} is not finite")));
        }
        if vector.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidInput(format!("vector for {word:?} is all zero")));
        }
        Ok(self.entries.insert(word, vector))
    }

    /// Words in sorted order.
    pub fn words(&self) -> Vec<&str> {
        let mut w: Vec<&str> = self.entries.keys().map(String::as_str).collect();
        w.sort_unstable();
        w
    }

    /// Writes word2vec text format with a header line, words sorted.
    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
            writeln!(w, "{} {}", self.entries.len(), self.dim)?;
            for word in self.words() {
                write!(w, "{word}")?;
                for v in &self.entries[word] {
                    write!(w, " {v}")?;
                }
                writeln!(w)?;
            }
            w.flush()
        };
        write(&mut w).map_err(|e| Error::io(path, e))
    }
}

/// Loads word2vec text embeddings, taking the dimension from the optional
/// `N dim` header or else from the first entry.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    load_embeddings_impl(path, None)
}

/// Like [`load_embeddings`] but every vector must have length `dim`.
pub fn load_embeddings_with_dim(path: &Path, dim: usize) -> Result<EmbeddingTable> {
    load_embeddings_impl(path, Some(dim))
}

fn load_embeddings_impl(path: &Path, want_dim: Option<usize>) -> Result<EmbeddingTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut table: Option<EmbeddingTable> = want_dim.map(EmbeddingTable::new);
    let record_err = |line: usize, message: String| Error::Record {
        path: path.to_owned(),
        line,
        message,
    };

    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();

        if lineno == 1 && rest.len() == 1 {
            if let (Ok(_), Ok(dim)) = (word.parse::<usize>(), rest[0].parse::<usize>()) {
                match &table {
                    Some(t) if t.dim() != dim => {
                        return Err(record_err(
                            lineno,
                            format!("header dimension {} does not match expected {}", dim, t.dim()),
                        ))
                    }
                    Some(_) => {}
                    None => table = Some(EmbeddingTable::new(dim)),
                }
                continue;
            }
        }

        let vector = rest
            .iter()
            .map(|s| s.parse::<f32>())
            .collect::<std::result::Result<Vec<f32>, _>>()
            .map_err(|e| record_err(lineno, format!("word {word:?}: {e}")))?;
        let table = table.get_or_insert_with(|| EmbeddingTable::new(vector.len()));
        if vector.len() != table.dim() {
            return Err(record_err(
                lineno,
                format!(
                    "word {:?} has {} values, expected {}",
                    word,
                    vector.len(),
                    table.dim()
                ),
            ));
        }
        match table.insert(word, vector) {
            Ok(Some(_)) => log::warn!(
                "{}:{}: duplicate embedding for {:?}; keeping the later entry",
                path.display(),
                lineno,
                word
            ),
            Ok(None) => {}
            Err(e) => return Err(record_err(lineno, e.to_string())),
        }
    }

    table.ok_or_else(|| Error::format(path, "no embeddings found"))
}
