//! Pattern-activation features and a softmax classifier on top of them.
//!
//! A mined visual pattern fires for an image when some patch itemset of the
//! image contains all of the pattern's filters. The resulting binary vector
//! feeds a multinomial logistic regression trained by full-batch gradient
//! descent on L2-regularized cross-entropy.

use serde::{Deserialize, Serialize};

use crate::corpus::{EventId, FeatureMap};
use crate::error::{Error, Result};
use crate::miner::Pattern;
use crate::visual_tx::VisualItemset;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternBank {
    patterns: Vec<Vec<u32>>,
}

impl PatternBank {
    /// Deduplicates itemsets, keeping first-seen order. Empty itemsets are
    /// rejected.
    pub fn new(itemsets: impl IntoIterator<Item = Vec<u32>>) -> Result<Self> {
        let mut patterns: Vec<Vec<u32>> = Vec::new();
        for mut set in itemsets {
            set.sort_unstable();
            set.dedup();
            if set.is_empty() {
                return Err(Error::InvalidInput("empty pattern itemset".into()));
            }
            if !patterns.contains(&set) {
                patterns.push(set);
            }
        }
        Ok(PatternBank { patterns })
    }

    pub fn from_patterns(patterns: &[Pattern]) -> Result<Self> {
        Self::new(patterns.iter().map(|p| p.visual_items.clone()))
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&[u32]> {
        self.patterns.get(id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.patterns.iter().map(Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivationVector {
    pub doc_id: String,
    pub bits: Vec<u8>,
}

impl ActivationVector {
    pub fn features(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| f64::from(b)).collect()
    }

    /// The vector as a 1×1×M feature map.
    pub fn to_feature_map(&self) -> Result<FeatureMap> {
        FeatureMap::new(1, 1, self.bits.len(), self.bits.iter().map(|&b| f32::from(b)).collect())
    }
}

fn is_subset(small: &[u32], big: &[u32]) -> bool {
    let mut it = big.iter();
    small.iter().all(|s| it.by_ref().any(|b| b == s))
}

/// Bit `j` is set when some patch contains every filter of bank pattern `j`.
pub fn activations(doc_id: &str, patches: &[VisualItemset], bank: &PatternBank) -> ActivationVector {
    let bits = bank
        .iter()
        .map(|pat| u8::from(patches.iter().any(|p| is_subset(pat, &p.items))))
        .collect();
    ActivationVector {
        doc_id: doc_id.to_string(),
        bits,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub l2: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.5,
            l2: 1e-4,
            epochs: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub label: EventId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxModel {
    pub classes: usize,
    pub features: usize,
    /// `classes × features`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub config: TrainConfig,
    pub train_log: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub event: EventId,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

impl SoftmaxModel {
    pub fn zeros(classes: usize, features: usize) -> Self {
        SoftmaxModel {
            classes,
            features,
            weights: vec![0.0; classes * features],
            bias: vec![0.0; classes],
            config: TrainConfig::default(),
            train_log: Vec::new(),
        }
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        (0..self.classes)
            .map(|c| {
                let row = &self.weights[c * self.features..(c + 1) * self.features];
                self.bias[c] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.features {
            return Err(Error::InvalidInput(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.features
            )));
        }
        let mut z = self.logits(x);
        softmax_in_place(&mut z);
        Ok(z)
    }

    /// Mean cross-entropy plus `l2/2 · ‖W‖²` (bias unregularized), with its
    /// gradient.
    pub fn loss_and_gradient(&self, data: &[Sample], l2: f64) -> (f64, Gradient) {
        let n = data.len().max(1) as f64;
        let mut gw = vec![0.0; self.weights.len()];
        let mut gb = vec![0.0; self.classes];
        let mut loss = 0.0;
        for s in data {
            let mut p = self.logits(&s.x);
            softmax_in_place(&mut p);
            let y = s.label as usize;
            loss -= p[y].max(f64::MIN_POSITIVE).ln();
            p[y] -= 1.0;
            for (c, d) in p.iter().enumerate() {
                gb[c] += d;
                let row = &mut gw[c * self.features..(c + 1) * self.features];
                for (g, v) in row.iter_mut().zip(&s.x) {
                    *g += d * v;
                }
            }
        }
        loss /= n;
        let reg: f64 = self.weights.iter().map(|w| w * w).sum();
        loss += 0.5 * l2 * reg;
        for (g, w) in gw.iter_mut().zip(&self.weights) {
            *g = *g / n + l2 * w;
        }
        for g in gb.iter_mut() {
            *g /= n;
        }
        (loss, Gradient { weights: gw, bias: gb })
    }
}

/// Full-batch gradient descent from zero weights. The loss before each step
/// and after the last one is recorded in `train_log`.
pub fn train_softmax(data: &[Sample], classes: usize, cfg: &TrainConfig) -> Result<SoftmaxModel> {
    let features = data.first().map_or(0, |s| s.x.len());
    if let Some(s) = data.iter().find(|s| s.x.len() != features) {
        return Err(Error::InvalidInput(format!(
            "sample has {} features, expected {}",
            s.x.len(),
            features
        )));
    }
    if let Some(s) = data.iter().find(|s| s.label as usize >= classes) {
        return Err(Error::InvalidInput(format!("label {} out of range 0..{classes}", s.label)));
    }
    let present: std::collections::BTreeSet<EventId> = data.iter().map(|s| s.label).collect();
    if present.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "training needs at least two classes, found {}",
            present.len()
        )));
    }
    if !(cfg.lr.is_finite() && cfg.lr > 0.0 && cfg.l2.is_finite() && cfg.l2 >= 0.0) {
        return Err(Error::Config("lr must be positive and l2 non-negative".into()));
    }

    let mut model = SoftmaxModel::zeros(classes, features);
    model.config = *cfg;
    for _ in 0..cfg.epochs {
        let (loss, g) = model.loss_and_gradient(data, cfg.l2);
        model.train_log.push(loss);
        for (w, d) in model.weights.iter_mut().zip(&g.weights) {
            *w -= cfg.lr * d;
        }
        for (b, d) in model.bias.iter_mut().zip(&g.bias) {
            *b -= cfg.lr * d;
        }
    }
    let (loss, _) = model.loss_and_gradient(data, cfg.l2);
    model.train_log.push(loss);
    Ok(model)
}

pub fn predict(model: &SoftmaxModel, x: &[f64]) -> Result<Prediction> {
    let probabilities = model.probabilities(x)?;
    let mut best = 0;
    for (i, p) in probabilities.iter().enumerate() {
        if *p > probabilities[best] {
            best = i;
        }
    }
    Ok(Prediction {
        event: best as EventId,
        probabilities,
    })
}

/// Fraction of samples whose predicted class matches the label.
pub fn accuracy(model: &SoftmaxModel, data: &[Sample]) -> Result<f64> {
    let mut correct = 0usize;
    for s in data {
        if predict(model, &s.x)?.event == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::visual_tx::PatchCell;

    fn patch(items: &[u32]) -> VisualItemset {
        VisualItemset {
            cell: PatchCell::new(0, 0),
            items: items.to_vec(),
        }
    }

    #[test]
    fn activation_examples() {
        let bank = PatternBank::new(vec![vec![3, 7]]).unwrap();
        assert_eq!(activations("d", &[patch(&[3, 7, 9]), patch(&[1, 2])], &bank).bits, vec![1]);
        assert_eq!(activations("d", &[patch(&[3, 9]), patch(&[2, 7])], &bank).bits, vec![0]);
        assert_eq!(activations("d", &[], &bank).bits, vec![0]);
    }

    #[test]
    fn bank_dedups_and_rejects_empty() {
        let bank = PatternBank::new(vec![vec![7, 3], vec![3, 7], vec![1]]).unwrap();
        assert_eq!(bank.len(), 2);
        assert_eq!(bank.get(0), Some(&[3, 7][..]));
        assert!(PatternBank::new(vec![vec![]]).is_err());
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = SoftmaxModel::zeros(4, 3);
        let p = predict(&m, &[1.0, 0.0, 1.0]).unwrap();
        for v in p.probabilities {
            assert!((v - 0.25).abs() < 1e-15);
        }
        assert!(predict(&m, &[1.0]).is_err());
    }

    #[test]
    fn single_class_is_rejected() {
        let data = vec![
            Sample {
                x: vec![1.0],
                label: 0,
            };
            3
        ];
        assert!(train_softmax(&data, 2, &TrainConfig::default()).is_err());
    }

    #[test]
    fn activation_map_layout() {
        let av = ActivationVector {
            doc_id: "d".into(),
            bits: vec![1, 0, 1],
        };
        let m = av.to_feature_map().unwrap();
        assert_eq!(m.dims(), (1, 1, 3));
        assert_eq!(m.values(), &[1.0, 0.0, 1.0]);
    }
}
