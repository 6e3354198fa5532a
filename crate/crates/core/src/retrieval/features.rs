use serde::{Deserialize, Serialize};

use crate::corpus::{ConceptSet, SentenceRecord};
use crate::index::match_count;

/// Feature order used by [`FeatureVector::to_vec`] and stored scorer models.
pub const FEATURE_NAMES: [&str; 6] = [
    "concept_coverage",
    "match_count",
    "candidate_len_tokens",
    "inverse_length",
    "jaccard",
    "all_concepts_flag",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub concept_coverage: f64,
    pub match_count: f64,
    pub candidate_len_tokens: f64,
    pub inverse_length: f64,
    pub jaccard: f64,
    pub all_concepts_flag: f64,
}

impl FeatureVector {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.concept_coverage,
            self.match_count,
            self.candidate_len_tokens,
            self.inverse_length,
            self.jaccard,
            self.all_concepts_flag,
        ]
    }
}

/// Lexical overlap features of a sentence with respect to a concept set.
/// Jaccard is taken over the concept lemmas and the sentence's full lemma
/// set.
pub fn extract_features(concepts: &ConceptSet, record: &SentenceRecord) -> FeatureVector {
    let matched = match_count(record, concepts);
    let n = concepts.len().max(1) as f64;
    let len = record.tokens.len();
    let union = concepts.len() + record.lemma_set.len() - matched;
    let coverage = matched as f64 / n;
    FeatureVector {
        concept_coverage: coverage,
        match_count: matched as f64,
        candidate_len_tokens: len as f64,
        inverse_length: if len == 0 { 0.0 } else { 1.0 / len as f64 },
        jaccard: if union == 0 {
            0.0
        } else {
            matched as f64 / union as f64
        },
        all_concepts_flag: if matched == concepts.len() { 1.0 } else { 0.0 },
    }
}
