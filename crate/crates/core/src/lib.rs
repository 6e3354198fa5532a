//! Prototype retrieval for concept-to-text generation.
//!
//! A sentence corpus is lemmatized into a [`corpus::SentenceStore`], indexed
//! by lemma in an [`index::InvertedIndex`], and queried with concept sets.
//! Candidates are turned into prototype lists by the matching retriever or a
//! scorer ([`retrieval`]), and those lists are packed into seq2seq training
//! examples ([`dataset`]). [`metrics`] scores generated sentences.

pub mod corpus;
pub mod dataset;
pub mod error;
pub mod index;
pub mod metrics;
pub mod retrieval;
pub mod textnorm;

pub use error::{Error, ErrorCategory, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/store.md")]
    pub struct Store;
    #[doc = include_str!("../../../book/src/retrieval.md")]
    pub struct Retrieval;
    #[doc = include_str!("../../../book/src/scorers.md")]
    pub struct Scorers;
    #[doc = include_str!("../../../book/src/datasets.md")]
    pub struct Datasets;
    #[doc = include_str!("../../../book/src/metrics.md")]
    pub struct Metrics;
    #[doc = include_str!("../../../book/src/pipeline.md")]
    pub struct Pipeline;
    #[doc = include_str!("../../../book/src/adapter.md")]
    pub struct Adapter;
}

/// Derives an independent per-item seed (splitmix64 finalizer over the pair).
pub fn mix_seed(seed: u64, x: u64) -> u64 {
    let mut z = seed ^ x.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::mix_seed;
    use std::collections::HashSet;

    #[test]
    fn mix_seed_spreads_neighbouring_inputs() {
        let seeds: HashSet<u64> = (0..10_000).map(|i| mix_seed(42, i)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(mix_seed(1, 2), mix_seed(2, 1));
        assert_eq!(mix_seed(7, 9), mix_seed(7, 9));
    }
}
