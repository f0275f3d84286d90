//! Multimodal transactions over a partitioned integer item space, and the
//! indexed store the miner counts against.
//!
//! Binary stream layout (`transactions.bin`), all integers u32 little-endian:
//!
//! ```text
//! b"MMTX"  version=1
//! visual_count  text_count  event_count
//! doc_count  { byte_len  utf8_doc_id }*
//! tx_count   { doc_index  row  col  item_count  item* }*
//! ```
//!
//! Items within a record are strictly increasing; a transaction's id is its
//! position in the stream.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, EventId};
use crate::error::{Error, Result};
use crate::text_tx::TextItemset;
use crate::visual_tx::{PatchCell, VisualItemset};

pub type Item = u32;

pub const TX_MAGIC: &[u8; 4] = b"MMTX";
const TX_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modality {
    Visual,
    Text,
    Event,
}

/// Item ids `[0, F)` are filters, `[F, F+K)` word clusters and
/// `[F+K, F+K+E)` events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ItemSpace {
    pub visual: u32,
    pub text: u32,
    pub events: u32,
}

impl ItemSpace {
    pub fn new(visual: u32, text: u32, events: u32) -> Self {
        ItemSpace { visual, text, events }
    }

    pub fn len(&self) -> u32 {
        self.visual + self.text + self.events
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn visual_item(&self, filter: u32) -> Item {
        debug_assert!(filter < self.visual);
        filter
    }

    pub fn text_item(&self, cluster: u32) -> Item {
        debug_assert!(cluster < self.text);
        self.visual + cluster
    }

    pub fn event_item(&self, event: EventId) -> Item {
        debug_assert!(event < self.events);
        self.visual + self.text + event
    }

    pub fn modality(&self, item: Item) -> Option<Modality> {
        if item < self.visual {
            Some(Modality::Visual)
        } else if item < self.visual + self.text {
            Some(Modality::Text)
        } else if item < self.len() {
            Some(Modality::Event)
        } else {
            None
        }
    }

    /// Splits an item into its modality and index within that modality.
    pub fn decode(&self, item: Item) -> Option<(Modality, u32)> {
        self.modality(item).map(|m| match m {
            Modality::Visual => (m, item),
            Modality::Text => (m, item - self.visual),
            Modality::Event => (m, item - self.visual - self.text),
        })
    }

    pub fn encode(&self, modality: Modality, index: u32) -> Option<Item> {
        let (limit, base) = match modality {
            Modality::Visual => (self.visual, 0),
            Modality::Text => (self.text, self.visual),
            Modality::Event => (self.events, self.visual + self.text),
        };
        (index < limit).then_some(base + index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub tx_id: u32,
    pub doc_id: String,
    pub cell: PatchCell,
    pub items: Vec<Item>,
}

impl Transaction {
    pub fn contains(&self, item: Item) -> bool {
        self.items.binary_search(&item).is_ok()
    }
}

/// One transaction per nonempty visual cell: the cell's filters plus the
/// document's text clusters and events, offset into `space`. Documents
/// without events produce nothing. `tx_id`s are left at zero; the store
/// numbers transactions when they are collected.
pub fn fuse(
    doc: &Document,
    visual: &[VisualItemset],
    text: &TextItemset,
    space: &ItemSpace,
) -> Vec<Transaction> {
    if doc.events.is_empty() {
        return Vec::new();
    }
    let shared: Vec<Item> = text
        .items
        .iter()
        .map(|&c| space.text_item(c))
        .chain(doc.events.iter().map(|&e| space.event_item(e)))
        .collect();
    visual
        .iter()
        .filter(|v| !v.items.is_empty())
        .map(|v| {
            let mut items: Vec<Item> = v.items.iter().map(|&f| space.visual_item(f)).collect();
            items.extend_from_slice(&shared);
            items.sort_unstable();
            items.dedup();
            Transaction {
                tx_id: 0,
                doc_id: doc.doc_id.clone(),
                cell: v.cell,
                items,
            }
        })
        .collect()
}

/// Read-only transaction collection with per-item tid lists.
#[derive(Debug, Clone)]
pub struct TransactionStore {
    space: Option<ItemSpace>,
    transactions: Vec<Transaction>,
    doc_ids: Vec<String>,
    tx_doc: Vec<u32>,
    tidlists: HashMap<Item, Vec<u32>>,
}

impl TransactionStore {
    /// Collects transactions, renumbering them `0..n`. With a space, every
    /// item must fall inside it.
    pub fn new(space: Option<ItemSpace>, mut transactions: Vec<Transaction>) -> Result<Self> {
        let mut doc_ids: Vec<String> = Vec::new();
        let mut doc_index: HashMap<String, u32> = HashMap::new();
        let mut tx_doc = Vec::with_capacity(transactions.len());
        let mut tidlists: HashMap<Item, Vec<u32>> = HashMap::new();
        for (i, tx) in transactions.iter_mut().enumerate() {
            tx.tx_id = i as u32;
            if tx.items.windows(2).any(|w| w[0] >= w[1]) {
                tx.items.sort_unstable();
                tx.items.dedup();
            }
            if let Some(space) = &space {
                if let Some(bad) = tx.items.iter().find(|&&it| it >= space.len()) {
                    return Err(Error::InvalidInput(format!(
                        "transaction {i} has item {bad} outside the {}-item space",
                        space.len()
                    )));
                }
            }
            let next = doc_ids.len() as u32;
            let d = *doc_index.entry(tx.doc_id.clone()).or_insert_with(|| {
                doc_ids.push(tx.doc_id.clone());
                next
            });
            tx_doc.push(d);
            for &it in &tx.items {
                tidlists.entry(it).or_default().push(i as u32);
            }
        }
        Ok(TransactionStore {
            space,
            transactions,
            doc_ids,
            tx_doc,
            tidlists,
        })
    }

    /// Store over bare itemsets, one synthetic document per transaction.
    pub fn from_itemsets<I>(itemsets: I) -> Self
    where
        I: IntoIterator<Item = Vec<Item>>,
    {
        let txs = itemsets
            .into_iter()
            .enumerate()
            .map(|(i, items)| Transaction {
                tx_id: i as u32,
                doc_id: format!("t{i}"),
                cell: PatchCell::new(0, 0),
                items,
            })
            .collect();
        TransactionStore::new(None, txs).expect("no space to violate")
    }

    pub fn space(&self) -> Option<&ItemSpace> {
        self.space.as_ref()
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    pub fn transactions(&self) -> &[Transaction] {
        &self.transactions
    }

    pub fn get(&self, tx_id: u32) -> Option<&Transaction> {
        self.transactions.get(tx_id as usize)
    }

    /// Index of the transaction's document in first-seen order.
    pub fn doc_index(&self, tx_id: u32) -> u32 {
        self.tx_doc[tx_id as usize]
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    /// Sorted ids of transactions containing `item`.
    pub fn tidlist(&self, item: Item) -> &[u32] {
        self.tidlists.get(&item).map_or(&[], Vec::as_slice)
    }

    /// Items present in at least one transaction, sorted.
    pub fn items(&self) -> Vec<Item> {
        let mut v: Vec<Item> = self.tidlists.keys().copied().collect();
        v.sort_unstable();
        v
    }

    /// Ids of transactions containing every item of `itemset`.
    pub fn cover(&self, itemset: &[Item]) -> Vec<u32> {
        let mut lists: Vec<&[u32]> = itemset.iter().map(|&i| self.tidlist(i)).collect();
        if lists.is_empty() {
            return (0..self.len() as u32).collect();
        }
        lists.sort_by_key(|l| l.len());
        let mut acc = lists[0].to_vec();
        for l in &lists[1..] {
            acc = intersect_sorted(&acc, l);
            if acc.is_empty() {
                break;
            }
        }
        acc
    }

    /// Distinct documents among the given transactions.
    pub fn distinct_docs(&self, tids: &[u32]) -> usize {
        tids.iter().map(|&t| self.tx_doc[t as usize]).collect::<BTreeSet<_>>().len()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let space = self.space.unwrap_or(ItemSpace::new(0, 0, 0));
        w.write_all(TX_MAGIC)?;
        w.write_u32::<LittleEndian>(TX_VERSION)?;
        w.write_u32::<LittleEndian>(space.visual)?;
        w.write_u32::<LittleEndian>(space.text)?;
        w.write_u32::<LittleEndian>(space.events)?;
        w.write_u32::<LittleEndian>(self.doc_ids.len() as u32)?;
        for d in &self.doc_ids {
            w.write_u32::<LittleEndian>(d.len() as u32)?;
            w.write_all(d.as_bytes())?;
        }
        w.write_u32::<LittleEndian>(self.transactions.len() as u32)?;
        for (tx, &d) in self.transactions.iter().zip(&self.tx_doc) {
            w.write_u32::<LittleEndian>(d)?;
            w.write_u32::<LittleEndian>(tx.cell.row)?;
            w.write_u32::<LittleEndian>(tx.cell.col)?;
            w.write_u32::<LittleEndian>(tx.items.len() as u32)?;
            for &it in &tx.items {
                w.write_u32::<LittleEndian>(it)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> std::io::Result<Self> {
        let bad = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != TX_MAGIC {
            return Err(bad("bad magic bytes"));
        }
        if r.read_u32::<LittleEndian>()? != TX_VERSION {
            return Err(bad("unsupported version"));
        }
        let space = ItemSpace::new(
            r.read_u32::<LittleEndian>()?,
            r.read_u32::<LittleEndian>()?,
            r.read_u32::<LittleEndian>()?,
        );
        let n_docs = r.read_u32::<LittleEndian>()? as usize;
        let mut docs = Vec::with_capacity(n_docs.min(1 << 20));
        for _ in 0..n_docs {
            let len = r.read_u32::<LittleEndian>()? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            docs.push(String::from_utf8(buf).map_err(|_| bad("doc id is not utf-8"))?);
        }
        let n_tx = r.read_u32::<LittleEndian>()? as usize;
        let mut txs = Vec::with_capacity(n_tx.min(1 << 20));
        for i in 0..n_tx {
            let d = r.read_u32::<LittleEndian>()? as usize;
            let row = r.read_u32::<LittleEndian>()?;
            let col = r.read_u32::<LittleEndian>()?;
            let n = r.read_u32::<LittleEndian>()? as usize;
            let mut items = vec![0u32; n];
            r.read_u32_into::<LittleEndian>(&mut items)?;
            if items.windows(2).any(|w| w[0] >= w[1]) {
                return Err(bad("items not strictly increasing"));
            }
            let doc_id = docs.get(d).ok_or_else(|| bad("doc index out of range"))?.clone();
            txs.push(Transaction {
                tx_id: i as u32,
                doc_id,
                cell: PatchCell::new(row, col),
                items,
            });
        }
        let space = (!space.is_empty()).then_some(space);
        TransactionStore::new(space, txs).map_err(|e| bad(&e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        TransactionStore::read_from(BufReader::new(f)).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Intersection of two strictly increasing lists.
pub fn intersect_sorted(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}
