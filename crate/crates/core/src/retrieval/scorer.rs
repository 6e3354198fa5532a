//! Trainable logistic scorer over [`FeatureVector`]s.
//!
//! A pair's score is `sigmoid(w · f + b)`. Training minimises the mean
//! binary cross-entropy of gold (positive) and randomly drawn (negative)
//! sentences with full-batch gradient descent from a zero start, so a fresh
//! model scores everything 0.5 and a small enough step size gives a
//! non-increasing loss trace.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{extract_features, FEATURE_NAMES};
use super::{RetrieverKind, Scorer};
use crate::corpus::{CommonGenEntry, ConceptSet, SentenceRecord};
use crate::error::{Error, Result};
use crate::textnorm::LemmaLexicon;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

// log(1 + e^z) without overflow
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// One labelled (concept set, sentence) example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    #[serde(rename = "concepts")]
    pub concept_set: ConceptSet,
    #[serde(rename = "sentence")]
    pub sentence_text: String,
    pub label: u8,
}

/// One positive per (concept set, target) and `neg_per_pos` negatives drawn
/// uniformly from targets of other concept sets. No sentence that is a
/// target of the same concept set anywhere in `entries` becomes a negative.
pub fn build_pairs(
    entries: &[CommonGenEntry],
    neg_per_pos: usize,
    seed: u64,
) -> Result<Vec<TrainingPair>> {
    if entries.len() < 2 {
        return Err(Error::NotEnoughEntries(entries.len()));
    }
    let pool: Vec<(usize, &str)> = entries
        .iter()
        .enumerate()
        .flat_map(|(i, e)| e.targets.iter().map(move |t| (i, t.as_str())))
        .collect();
    let keys: Vec<String> = entries.iter().map(|e| e.concept_set.key()).collect();
    let mut targets_by_key: HashMap<&str, HashSet<&str>> = HashMap::new();
    for (key, e) in keys.iter().zip(entries) {
        targets_by_key
            .entry(key.as_str())
            .or_default()
            .extend(e.targets.iter().map(String::as_str));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(pool.len() * (1 + neg_per_pos));

    for (i, entry) in entries.iter().enumerate() {
        let own = &targets_by_key[keys[i].as_str()];
        let allowed = |&(j, text): &(usize, &str)| keys[j] != keys[i] && !own.contains(text);
        let mut fallback: Option<Vec<&str>> = None;
        for target in &entry.targets {
            pairs.push(TrainingPair {
                concept_set: entry.concept_set.clone(),
                sentence_text: target.clone(),
                label: 1,
            });
            for _ in 0..neg_per_pos {
                // rejection sampling, then an explicit filtered list if that stalls
                let mut negative = None;
                for _ in 0..64 {
                    let cand = pool[rng.gen_range(0..pool.len())];
                    if allowed(&cand) {
                        negative = Some(cand.1);
                        break;
                    }
                }
                let negative = match negative {
                    Some(n) => n,
                    None => {
                        let list = fallback.get_or_insert_with(|| {
                            pool.iter().filter(|c| allowed(c)).map(|c| c.1).collect()
                        });
                        if list.is_empty() {
                            return Err(Error::Usage(format!(
                                "no negative sentence available for concept set {}",
                                entry.concept_set
                            )));
                        }
                        list[rng.gen_range(0..list.len())]
                    }
                };
                pairs.push(TrainingPair {
                    concept_set: entry.concept_set.clone(),
                    sentence_text: negative.to_string(),
                    label: 0,
                });
            }
        }
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub examples: usize,
    /// Mean cross-entropy after each epoch.
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerModel {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub training_meta: TrainingMeta,
}

impl ScorerModel {
    /// All-zero model over the standard features.
    pub fn zeros() -> Self {
        Self::zeros_with(FEATURE_NAMES.iter().map(|s| s.to_string()).collect())
    }

    pub fn zeros_with(feature_names: Vec<String>) -> Self {
        ScorerModel {
            weights: vec![0.0; feature_names.len()],
            feature_names,
            bias: 0.0,
            training_meta: TrainingMeta {
                seed: 0,
                epochs: 0,
                learning_rate: 0.0,
                examples: 0,
                loss_trace: Vec::new(),
            },
        }
    }

    pub fn logit(&self, features: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(features)
            .map(|(w, f)| w * f)
            .sum::<f64>()
            + self.bias
    }

    pub fn score_features(&self, features: &[f64]) -> f64 {
        sigmoid(self.logit(features))
    }

    /// Fails unless the model was trained on the standard feature layout.
    pub fn check_features(&self) -> Result<()> {
        if self
            .feature_names
            .iter()
            .map(String::as_str)
            .ne(FEATURE_NAMES)
        {
            return Err(Error::FeatureMismatch {
                expected: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
                found: self.feature_names.clone(),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::json("scorer model", e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: ScorerModel =
            serde_json::from_str(text).map_err(|e| Error::json("scorer model", e))?;
        if model.weights.len() != model.feature_names.len() {
            return Err(Error::LengthMismatch {
                what: "scorer weights",
                expected: model.feature_names.len(),
                found: model.weights.len(),
            });
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// `sigmoid(w · f + b)` for one pair.
pub fn score(model: &ScorerModel, concepts: &ConceptSet, record: &SentenceRecord) -> Result<f64> {
    model.check_features()?;
    Ok(model.score_features(&extract_features(concepts, record).to_vec()))
}

/// Mean binary cross-entropy and its gradient with respect to weights and
/// bias.
pub fn loss_and_gradient(
    weights: &[f64],
    bias: f64,
    data: &[(Vec<f64>, f64)],
) -> (f64, Vec<f64>, f64) {
    let n = data.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (x, y) in data {
        let z = weights.iter().zip(x).map(|(w, f)| w * f).sum::<f64>() + bias;
        loss += softplus(z) - y * z;
        let residual = sigmoid(z) - y;
        for (g, f) in grad_w.iter_mut().zip(x) {
            *g += residual * f;
        }
        grad_b += residual;
    }
    grad_w.iter_mut().for_each(|g| *g /= n);
    (loss / n, grad_w, grad_b / n)
}

/// Fits a logistic model on explicit feature vectors with 0/1 labels.
pub fn train_on_features(
    feature_names: Vec<String>,
    data: &[(Vec<f64>, f64)],
    config: &TrainConfig,
) -> Result<ScorerModel> {
    if data.is_empty() {
        return Err(Error::EmptyInput("training pairs".to_string()));
    }
    let has_pos = data.iter().any(|(_, y)| *y > 0.5);
    let has_neg = data.iter().any(|(_, y)| *y <= 0.5);
    if !(has_pos && has_neg) {
        return Err(Error::SingleLabel);
    }
    if let Some((x, _)) = data.iter().find(|(x, _)| x.len() != feature_names.len()) {
        return Err(Error::LengthMismatch {
            what: "feature vector",
            expected: feature_names.len(),
            found: x.len(),
        });
    }
    let mut model = ScorerModel::zeros_with(feature_names);
    let mut trace = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let (_, grad_w, grad_b) = loss_and_gradient(&model.weights, model.bias, data);
        for (w, g) in model.weights.iter_mut().zip(&grad_w) {
            *w -= config.learning_rate * g;
        }
        model.bias -= config.learning_rate * grad_b;
        trace.push(loss_and_gradient(&model.weights, model.bias, data).0);
    }
    model.training_meta = TrainingMeta {
        seed: config.seed,
        epochs: config.epochs,
        learning_rate: config.learning_rate,
        examples: data.len(),
        loss_trace: trace,
    };
    Ok(model)
}

/// Trains the feature scorer on labelled pairs.
pub fn train_scorer(
    pairs: &[TrainingPair],
    config: &TrainConfig,
    lexicon: &LemmaLexicon,
) -> Result<ScorerModel> {
    let data: Vec<(Vec<f64>, f64)> = pairs
        .iter()
        .map(|p| {
            let record = SentenceRecord::from_text(&p.sentence_text, lexicon);
            (
                extract_features(&p.concept_set, &record).to_vec(),
                f64::from(p.label),
            )
        })
        .collect();
    train_on_features(
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        &data,
        config,
    )
}

/// Probability that a random positive outscores a random negative, ties
/// counting half.
pub fn pairwise_auc(positive: &[f64], negative: &[f64]) -> f64 {
    if positive.is_empty() || negative.is_empty() {
        return f64::NAN;
    }
    let mut neg = negative.to_vec();
    neg.sort_by(f64::total_cmp);
    let mut wins = 0.0;
    for p in positive {
        let below = neg.partition_point(|n| n < p);
        let not_above = neg.partition_point(|n| n <= p);
        wins += below as f64 + 0.5 * (not_above - below) as f64;
    }
    wins / (positive.len() as f64 * neg.len() as f64)
}

/// [`Scorer`] backed by a trained [`ScorerModel`].
#[derive(Debug, Clone)]
pub struct FeatureScorer {
    model: ScorerModel,
}

impl FeatureScorer {
    pub fn new(model: ScorerModel) -> Result<Self> {
        model.check_features()?;
        Ok(FeatureScorer { model })
    }

    pub fn model(&self) -> &ScorerModel {
        &self.model
    }
}

impl Scorer for FeatureScorer {
    fn kind(&self) -> RetrieverKind {
        RetrieverKind::Feature
    }

    fn score_batch(&self, concepts: &ConceptSet, records: &[&SentenceRecord]) -> Result<Vec<f64>> {
        Ok(records
            .iter()
            .map(|r| {
                self.model
                    .score_features(&extract_features(concepts, r).to_vec())
            })
            .collect())
    }
}
