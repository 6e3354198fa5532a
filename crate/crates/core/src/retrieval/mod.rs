//! Prototype selection from a candidate set.
//!
//! Two routes pick the `k` prototypes:
//!
//! * [`matching_retrieve`] fills the output from the candidates containing
//!   the most concepts downward, sampling uniformly only inside the last,
//!   partially taken count group.
//! * [`rank_retrieve`] scores every candidate with a [`Scorer`] and keeps the
//!   top `k`, breaking score ties by match count (descending) and then by
//!   sentence id (ascending).

pub mod features;
pub mod protocol;
pub mod scorer;

use std::cmp::Reverse;
use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ConceptSet, SentenceId, SentenceRecord, SentenceStore};
use crate::error::{Error, Result};
use crate::index::{Candidate, CandidateSet};

pub use features::{extract_features, FeatureVector, FEATURE_NAMES};
pub use protocol::ExternalScorer;
pub use scorer::{
    build_pairs, train_scorer, FeatureScorer, ScorerModel, TrainConfig, TrainingPair,
};

/// Number of prototypes retrieved per concept set unless configured.
pub const DEFAULT_K: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrieverKind {
    Matching,
    Feature,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prototype {
    pub id: SentenceId,
    pub text: String,
    /// Scorer output, or the match count for the matching retriever.
    pub score: f64,
    pub match_count: usize,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeList {
    pub k: usize,
    pub retriever: RetrieverKind,
    /// Fewer than `k` candidates were available.
    pub short: bool,
    pub prototypes: Vec<Prototype>,
}

impl PrototypeList {
    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    pub fn ids(&self) -> Vec<SentenceId> {
        self.prototypes.iter().map(|p| p.id).collect()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.prototypes.iter().map(|p| p.text.as_str()).collect()
    }
}

/// Scores (concept set, sentence) pairs. Implementations must be pure
/// with respect to their inputs.
pub trait Scorer: Sync {
    fn kind(&self) -> RetrieverKind;

    /// One score per record, in order.
    fn score_batch(&self, concepts: &ConceptSet, records: &[&SentenceRecord]) -> Result<Vec<f64>>;
}

/// Adapts a closure into a [`Scorer`].
pub struct FnScorer<F>(pub F);

impl<F> Scorer for FnScorer<F>
where
    F: Fn(&ConceptSet, &SentenceRecord) -> Result<f64> + Sync,
{
    fn kind(&self) -> RetrieverKind {
        RetrieverKind::Feature
    }

    fn score_batch(&self, concepts: &ConceptSet, records: &[&SentenceRecord]) -> Result<Vec<f64>> {
        records.iter().map(|r| (self.0)(concepts, r)).collect()
    }
}

fn lookup(store: &SentenceStore, id: SentenceId) -> Result<&SentenceRecord> {
    store
        .get(id)
        .ok_or_else(|| Error::Usage(format!("candidate {id} is not in the store")))
}

fn prototype(record: &SentenceRecord, score: f64, match_count: usize) -> Prototype {
    Prototype {
        id: record.id,
        text: record.text.clone(),
        score,
        match_count,
        source: record.source.clone(),
    }
}

/// Chooses candidates by descending match count; only the boundary group is
/// sampled, uniformly without replacement.
pub fn matching_select(cands: &CandidateSet, k: usize, seed: u64) -> Vec<Candidate> {
    let mut groups: BTreeMap<Reverse<usize>, Vec<Candidate>> = BTreeMap::new();
    for c in &cands.entries {
        groups.entry(Reverse(c.match_count)).or_default().push(*c);
    }
    let mut out = Vec::with_capacity(k.min(cands.len()));
    for (_, mut group) in groups {
        let remaining = k - out.len();
        if remaining == 0 {
            break;
        }
        group.sort_by_key(|c| c.id);
        if group.len() <= remaining {
            out.extend(group);
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked: Vec<usize> =
                rand::seq::index::sample(&mut rng, group.len(), remaining).into_vec();
            picked.sort_unstable();
            out.extend(picked.into_iter().map(|i| group[i]));
            break;
        }
    }
    out
}

pub fn matching_retrieve(
    cands: &CandidateSet,
    store: &SentenceStore,
    k: usize,
    seed: u64,
) -> Result<PrototypeList> {
    let prototypes = matching_select(cands, k, seed)
        .into_iter()
        .map(|c| {
            Ok(prototype(
                lookup(store, c.id)?,
                c.match_count as f64,
                c.match_count,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PrototypeList {
        k,
        retriever: RetrieverKind::Matching,
        short: prototypes.len() < k,
        prototypes,
    })
}

/// Orders scored candidates: score descending, then match count
/// descending, then id ascending.
pub fn rank_scored(scored: &mut [(Candidate, f64)]) {
    scored.sort_by(|(a, sa), (b, sb)| {
        sb.total_cmp(sa)
            .then(b.match_count.cmp(&a.match_count))
            .then(a.id.cmp(&b.id))
    });
}

/// Scores every candidate and keeps the best `k`. Any scorer failure aborts
/// the whole call.
pub fn rank_retrieve(
    scorer: &dyn Scorer,
    cands: &CandidateSet,
    store: &SentenceStore,
    k: usize,
) -> Result<PrototypeList> {
    let records = cands
        .entries
        .iter()
        .map(|c| lookup(store, c.id))
        .collect::<Result<Vec<_>>>()?;
    let scores = if records.is_empty() || k == 0 {
        vec![0.0; records.len()]
    } else {
        scorer.score_batch(&cands.concept_set, &records)?
    };
    if scores.len() != records.len() {
        return Err(Error::LengthMismatch {
            what: "scorer output",
            expected: records.len(),
            found: scores.len(),
        });
    }
    if let Some((r, s)) = records.iter().zip(&scores).find(|(_, s)| !s.is_finite()) {
        return Err(Error::Scorer {
            sentence_id: r.id,
            message: format!("non-finite score {s}"),
        });
    }
    let mut scored: Vec<(Candidate, f64)> = cands.entries.iter().copied().zip(scores).collect();
    rank_scored(&mut scored);
    scored.truncate(k);
    let prototypes = scored
        .into_iter()
        .map(|(c, s)| Ok(prototype(lookup(store, c.id)?, s, c.match_count)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PrototypeList {
        k,
        retriever: scorer.kind(),
        short: prototypes.len() < k,
        prototypes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;
    use crate::textnorm::LemmaLexicon;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn cands(counts: &[usize]) -> CandidateSet {
        CandidateSet {
            concept_set: ConceptSet::new(["x"]).unwrap(),
            min_overlap: 1,
            entries: counts
                .iter()
                .enumerate()
                .map(|(i, &m)| Candidate {
                    id: i as u64 + 1,
                    match_count: m,
                })
                .collect(),
        }
    }

    fn store_with(n: usize) -> SentenceStore {
        let mut store = SentenceStore::new();
        for i in 0..n {
            store
                .add_text(
                    &format!("sentence {i}"),
                    "s",
                    Split::External,
                    LemmaLexicon::shipped(),
                )
                .unwrap();
        }
        store.seal();
        store
    }

    #[test]
    fn matching_fills_whole_groups_in_order() {
        let c = cands(&[2, 3, 4, 1, 3]);
        let picked = matching_select(&c, 3, 9);
        assert_eq!(
            picked.iter().map(|c| c.id).collect::<Vec<_>>(),
            vec![3, 2, 5]
        );
        assert!(matching_select(&c, 0, 9).is_empty());
        let store = store_with(5);
        let list = matching_retrieve(&c, &store, 3, 9).unwrap();
        assert_eq!(list.ids(), vec![3, 2, 5]);
        assert_eq!(list.prototypes[0].score, 4.0);
        assert!(!list.short);
        let all = matching_retrieve(&c, &store, 10, 9).unwrap();
        assert_eq!(all.len(), 5);
        assert!(all.short);
    }

    #[test]
    fn matching_partial_group_is_uniform() {
        let c = cands(&[3, 3, 3, 3]);
        let mut hits: HashMap<u64, usize> = HashMap::new();
        let trials = 10_000;
        for seed in 0..trials {
            let picked = matching_select(&c, 2, seed);
            assert_eq!(picked.len(), 2);
            for p in picked {
                *hits.entry(p.id).or_default() += 1;
            }
        }
        for id in 1..=4 {
            let freq = hits[&id] as f64 / trials as f64;
            assert!((freq - 0.5).abs() <= 0.02, "id {id}: {freq}");
        }
    }

    #[test]
    fn rank_examples() {
        let c = cands(&[2, 2, 2]);
        let store = store_with(3);
        let scores = [0.9, 0.2, 0.7];
        let scorer = FnScorer(|_: &ConceptSet, r: &SentenceRecord| Ok(scores[r.id as usize - 1]));
        assert_eq!(
            rank_retrieve(&scorer, &c, &store, 2).unwrap().ids(),
            vec![1, 3]
        );
        let all = rank_retrieve(&scorer, &c, &store, 5).unwrap();
        assert_eq!(all.ids(), vec![1, 3, 2]);
        assert!(all.short);

        let tie = cands(&[2, 3, 3]);
        let flat = FnScorer(|_: &ConceptSet, _: &SentenceRecord| Ok(0.5));
        assert_eq!(
            rank_retrieve(&flat, &tie, &store, 1).unwrap().ids(),
            vec![2]
        );
    }

    #[test]
    fn rank_aborts_on_scorer_failure() {
        let c = cands(&[2, 2, 2]);
        let store = store_with(3);
        let failing = FnScorer(|_: &ConceptSet, r: &SentenceRecord| {
            if r.id == 2 {
                Err(Error::Scorer {
                    sentence_id: r.id,
                    message: "boom".into(),
                })
            } else {
                Ok(0.1)
            }
        });
        match rank_retrieve(&failing, &c, &store, 2) {
            Err(Error::Scorer { sentence_id, .. }) => assert_eq!(sentence_id, 2),
            other => panic!("unexpected {other:?}"),
        }
        let nan = FnScorer(|_: &ConceptSet, _: &SentenceRecord| Ok(f64::NAN));
        assert!(matches!(
            rank_retrieve(&nan, &c, &store, 2),
            Err(Error::Scorer { .. })
        ));
    }

    proptest! {
        #[test]
        fn matching_dominance(counts in proptest::collection::vec(1usize..6, 0..30), k in 0usize..10, seed: u64) {
            let c = cands(&counts);
            let picked = matching_select(&c, k, seed);
            prop_assert_eq!(picked.len(), k.min(counts.len()));
            let chosen: std::collections::HashSet<u64> = picked.iter().map(|p| p.id).collect();
            prop_assert_eq!(chosen.len(), picked.len());
            let min_sel = picked.iter().map(|p| p.match_count).min();
            let max_unsel = c.entries.iter().filter(|e| !chosen.contains(&e.id)).map(|e| e.match_count).max();
            if let (Some(lo), Some(hi)) = (min_sel, max_unsel) {
                prop_assert!(lo >= hi);
            }
            prop_assert_eq!(matching_select(&c, k, seed), picked);
        }

        #[test]
        fn logit_and_sigmoid_rank_identically(logits in proptest::collection::vec(-8.0f64..8.0, 1..20), counts in proptest::collection::vec(1usize..4, 20)) {
            let c = cands(&counts[..logits.len()]);
            let store = store_with(logits.len());
            let raw = FnScorer(|_: &ConceptSet, r: &SentenceRecord| Ok(logits[r.id as usize - 1]));
            let squashed = FnScorer(|_: &ConceptSet, r: &SentenceRecord| Ok(scorer::sigmoid(logits[r.id as usize - 1])));
            let k = logits.len();
            prop_assert_eq!(rank_retrieve(&raw, &c, &store, k).unwrap().ids(), rank_retrieve(&squashed, &c, &store, k).unwrap().ids());
        }
    }
}
