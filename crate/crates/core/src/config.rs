//! Pipeline configuration: a flat `key = value` text file.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is
//! optional; unknown or repeated keys are rejected.
//!
//! | key                     | default     | meaning                                        |
//! |-------------------------|-------------|------------------------------------------------|
//! | `k_top`                 | 20          | filters kept per patch after binarization      |
//! | `clusters`              | 1000        | k-means word clusters                          |
//! | `kmeans_seed`           | 0           | seed for k-means++ (xoshiro256++)              |
//! | `kmeans_max_iters`      | 100         | Lloyd iteration cap                            |
//! | `min_caption_df`        | 10          | captions a word needs to enter the vocabulary  |
//! | `min_gram_occ`          | 10          | corpus occurrences a name candidate needs      |
//! | `c_min`                 | 0.8         | minimum rule confidence (exact decimal)        |
//! | `min_support_count`     | 30          | minimum supporting transactions                |
//! | `max_itemset_len`       | 6           | largest antecedent-plus-event itemset          |
//! | `support_distinct_docs` | false       | count supporting documents instead             |
//! | `maximal_only`          | false       | keep only maximal antecedents per event        |
//! | `blacklist_threshold`   | 0.10        | max share of an event's captions for a name    |
//! | `name_sum`              | documents   | `documents` or `transactions`                  |
//! | `classify_seed`         | 0           | classifier seed                                |
//! | `classify_lr`           | 0.5         | gradient step size                             |
//! | `classify_l2`           | 0.0001      | L2 penalty on weights                          |
//! | `classify_epochs`       | 500         | full-batch iterations                          |
//! | `ingest_mode`           | strict      | `strict` or `skip` for malformed corpus lines  |
//! | `image_side`            | 227         | input image side in pixels                     |
//! | `patch_side`            | 196         | receptive field side in pixels                 |
//! | `stride`                | 32          | receptive field stride                         |
//! | `pad`                   | 64          | zero padding around the image                  |

use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::LoadMode;
use crate::error::{Error, Result};
use crate::midlevel::TrainConfig;
use crate::namer::CaptionSum;
use crate::ratio::Ratio;
use crate::visual_tx::PatchGeometry;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub k_top: usize,
    pub clusters: usize,
    pub kmeans_seed: u64,
    pub kmeans_max_iters: usize,
    pub min_caption_df: u32,
    pub min_gram_occ: u64,
    pub c_min: Ratio,
    pub min_support_count: u64,
    pub max_itemset_len: usize,
    pub support_distinct_docs: bool,
    pub maximal_only: bool,
    pub blacklist_threshold: Ratio,
    pub name_sum: CaptionSum,
    pub classify: TrainConfig,
    pub ingest_mode: LoadMode,
    pub geometry: PatchGeometry,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k_top: 20,
            clusters: 1000,
            kmeans_seed: 0,
            kmeans_max_iters: 100,
            min_caption_df: 10,
            min_gram_occ: 10,
            c_min: Ratio { num: 4, den: 5 },
            min_support_count: 30,
            max_itemset_len: 6,
            support_distinct_docs: false,
            maximal_only: false,
            blacklist_threshold: Ratio { num: 1, den: 10 },
            name_sum: CaptionSum::DistinctDocuments,
            classify: TrainConfig::default(),
            ingest_mode: LoadMode::Strict,
            geometry: PatchGeometry::default(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

fn parse_ratio(key: &str, value: &str) -> Result<Ratio> {
    Ratio::from_decimal(value).map_err(|_| Error::Config(format!("{key}: expected a decimal, got {value:?}")))
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key {key}", i + 1)));
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "k_top" => self.k_top = parse_num(key, value)?,
            "clusters" => self.clusters = parse_num(key, value)?,
            "kmeans_seed" => self.kmeans_seed = parse_num(key, value)?,
            "kmeans_max_iters" => self.kmeans_max_iters = parse_num(key, value)?,
            "min_caption_df" => self.min_caption_df = parse_num(key, value)?,
            "min_gram_occ" => self.min_gram_occ = parse_num(key, value)?,
            "c_min" => self.c_min = parse_ratio(key, value)?,
            "min_support_count" => self.min_support_count = parse_num(key, value)?,
            "max_itemset_len" => self.max_itemset_len = parse_num(key, value)?,
            "support_distinct_docs" => self.support_distinct_docs = parse_bool(key, value)?,
            "maximal_only" => self.maximal_only = parse_bool(key, value)?,
            "blacklist_threshold" => self.blacklist_threshold = parse_ratio(key, value)?,
            "name_sum" => {
                self.name_sum = match value {
                    "documents" => CaptionSum::DistinctDocuments,
                    "transactions" => CaptionSum::Transactions,
                    _ => return Err(Error::Config(format!("name_sum: unknown mode {value:?}"))),
                }
            }
            "classify_seed" => self.classify.seed = parse_num(key, value)?,
            "classify_lr" => self.classify.lr = parse_num(key, value)?,
            "classify_l2" => self.classify.l2 = parse_num(key, value)?,
            "classify_epochs" => self.classify.epochs = parse_num(key, value)?,
            "ingest_mode" => {
                self.ingest_mode = match value {
                    "strict" => LoadMode::Strict,
                    "skip" => LoadMode::SkipAndReport,
                    _ => return Err(Error::Config(format!("ingest_mode: unknown mode {value:?}"))),
                }
            }
            "image_side" => self.geometry.image_side = parse_num(key, value)?,
            "patch_side" => self.geometry.patch_side = parse_num(key, value)?,
            "stride" => self.geometry.stride = parse_num(key, value)?,
            "pad" => self.geometry.pad = parse_num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.k_top == 0 {
            return fail("k_top must be at least 1");
        }
        if self.clusters == 0 {
            return fail("clusters must be at least 1");
        }
        if self.c_min.num == 0 || self.c_min.num > self.c_min.den {
            return fail("c_min must be in (0, 1]");
        }
        if self.min_support_count == 0 {
            return fail("min_support_count must be at least 1");
        }
        if self.max_itemset_len < 3 {
            return fail("max_itemset_len must be at least 3");
        }
        if self.blacklist_threshold.num > self.blacklist_threshold.den {
            return fail("blacklist_threshold must be in [0, 1]");
        }
        if !(self.classify.lr.is_finite() && self.classify.lr > 0.0) {
            return fail("classify_lr must be positive");
        }
        if !(self.classify.l2.is_finite() && self.classify.l2 >= 0.0) {
            return fail("classify_l2 must be non-negative");
        }
        Ok(())
    }

    /// Renders every key, parseable by [`PipelineConfig::parse`].
    pub fn render(&self) -> String {
        let ratio = |r: Ratio| {
            let s = format!("{}", r.to_f64());
            if Ratio::from_decimal(&s).is_ok_and(|p| p == r) {
                s
            } else {
                format!("{:.18}", r.to_f64())
            }
        };
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("k_top", self.k_top.to_string());
        kv("clusters", self.clusters.to_string());
        kv("kmeans_seed", self.kmeans_seed.to_string());
        kv("kmeans_max_iters", self.kmeans_max_iters.to_string());
        kv("min_caption_df", self.min_caption_df.to_string());
        kv("min_gram_occ", self.min_gram_occ.to_string());
        kv("c_min", ratio(self.c_min));
        kv("min_support_count", self.min_support_count.to_string());
        kv("max_itemset_len", self.max_itemset_len.to_string());
        kv("support_distinct_docs", self.support_distinct_docs.to_string());
        kv("maximal_only", self.maximal_only.to_string());
        kv("blacklist_threshold", ratio(self.blacklist_threshold));
        kv(
            "name_sum",
            match self.name_sum {
                CaptionSum::DistinctDocuments => "documents",
                CaptionSum::Transactions => "transactions",
            }
            .into(),
        );
        kv("classify_seed", self.classify.seed.to_string());
        kv("classify_lr", format!("{:?}", self.classify.lr));
        kv("classify_l2", format!("{:?}", self.classify.l2));
        kv("classify_epochs", self.classify.epochs.to_string());
        kv(
            "ingest_mode",
            match self.ingest_mode {
                LoadMode::Strict => "strict",
                LoadMode::SkipAndReport => "skip",
            }
            .into(),
        );
        kv("image_side", self.geometry.image_side.to_string());
        kv("patch_side", self.geometry.patch_side.to_string());
        kv("stride", self.geometry.stride.to_string());
        kv("pad", self.geometry.pad.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = PipelineConfig::parse("# comment\n\nclusters = 30\nc_min=0.9\nname_sum = transactions\n").unwrap();
        assert_eq!(c.clusters, 30);
        assert_eq!(c.c_min, Ratio { num: 9, den: 10 });
        assert_eq!(c.name_sum, CaptionSum::Transactions);
        assert_eq!(c.k_top, 20);
        assert_eq!(c.min_support_count, 30);
    }

    #[test]
    fn rejects_unknown_duplicate_and_invalid() {
        assert!(PipelineConfig::parse("colour = red").is_err());
        assert!(PipelineConfig::parse("k_top = 3\nk_top = 4").is_err());
        assert!(PipelineConfig::parse("max_itemset_len = 2").is_err());
        assert!(PipelineConfig::parse("c_min = 1.5").is_err());
        assert!(PipelineConfig::parse("k_top").is_err());
    }

    #[test]
    fn render_round_trips() {
        let mut c = PipelineConfig {
            clusters: 17,
            c_min: Ratio::from_decimal("0.75").unwrap(),
            ..PipelineConfig::default()
        };
        c.classify.l2 = 0.25;
        assert_eq!(PipelineConfig::parse(&c.render()).unwrap(), c);
        assert_eq!(PipelineConfig::parse(&PipelineConfig::default().render()).unwrap(), PipelineConfig::default());
    }
}
