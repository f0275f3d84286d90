//! Multimodal event pattern mining over image-caption corpora.
//!
//! Feature maps and captions become patch-level transactions, constrained
//! association rules predict event categories from joint visual and text
//! items, and each rule is named from the captions that support it.

pub mod config;
pub mod corpus;
pub mod error;
pub mod midlevel;
pub mod miner;
pub mod namer;
pub mod pipeline;
pub mod ratio;
pub mod report;
pub mod stopwords;
pub mod synthgen;
pub mod text_tx;
pub mod transactions;
pub mod visual_tx;

pub use error::{Error, Result};
