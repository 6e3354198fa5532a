//! Inverted index from lemma to sentence ids, and candidate-set extraction.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ConceptSet, SentenceId, SentenceRecord, SentenceStore};
use crate::error::{Error, Result};

/// Candidates must contain at least this many input concepts by default.
pub const DEFAULT_MIN_OVERLAP: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InvertedIndex {
    postings: HashMap<String, Vec<SentenceId>>,
    doc_count: usize,
    store_checksum: String,
}

#[derive(Serialize, Deserialize)]
struct StoredIndex {
    store_checksum: String,
    doc_count: usize,
    postings: BTreeMap<String, Vec<SentenceId>>,
}

impl InvertedIndex {
    /// Indexes every retrievable record of a sealed store.
    pub fn build(store: &SentenceStore) -> Result<Self> {
        Self::build_sharded(store, 1)
    }

    /// Builds `shards` partial indexes in parallel and merges them. The
    /// result does not depend on the shard count.
    pub fn build_sharded(store: &SentenceStore, shards: usize) -> Result<Self> {
        if !store.is_sealed() {
            return Err(Error::Usage("index build needs a sealed store".to_string()));
        }
        let records: Vec<&SentenceRecord> = store.retrievable().collect();
        let chunk = records.len().div_ceil(shards.max(1)).max(1);
        let partials: Vec<HashMap<String, Vec<SentenceId>>> = records
            .par_chunks(chunk)
            .map(|part| {
                let mut postings: HashMap<String, Vec<SentenceId>> = HashMap::new();
                for r in part {
                    for lemma in &r.lemma_set {
                        postings.entry(lemma.clone()).or_default().push(r.id);
                    }
                }
                postings
            })
            .collect();

        let mut postings: HashMap<String, Vec<SentenceId>> = HashMap::new();
        for partial in partials {
            for (lemma, ids) in partial {
                postings.entry(lemma).or_default().extend(ids);
            }
        }
        for ids in postings.values_mut() {
            ids.sort_unstable();
            ids.dedup();
        }
        Ok(InvertedIndex {
            postings,
            doc_count: records.len(),
            store_checksum: store.checksum(),
        })
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn store_checksum(&self) -> &str {
        &self.store_checksum
    }

    pub fn postings(&self, lemma: &str) -> &[SentenceId] {
        self.postings.get(lemma).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    /// Fails when the index was built from a different store state.
    pub fn verify(&self, store: &SentenceStore) -> Result<()> {
        let current = store.checksum();
        if current != self.store_checksum {
            return Err(Error::Usage(format!(
                "index was built from store {} but the store is now {}; rebuild the index",
                self.store_checksum, current
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let stored = StoredIndex {
            store_checksum: self.store_checksum.clone(),
            doc_count: self.doc_count,
            postings: self
                .postings
                .iter()
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        };
        let text = serde_json::to_string(&stored).map_err(|e| Error::json("index", e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let stored: StoredIndex =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        for (lemma, ids) in &stored.postings {
            if ids.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Schema {
                    index: 0,
                    message: format!("postings for {lemma:?} are not strictly ascending"),
                });
            }
        }
        Ok(InvertedIndex {
            postings: stored.postings.into_iter().collect(),
            doc_count: stored.doc_count,
            store_checksum: stored.store_checksum,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: SentenceId,
    pub match_count: usize,
}

/// The candidate set for one concept set, ordered by sentence id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    pub concept_set: ConceptSet,
    pub min_overlap: usize,
    pub entries: Vec<Candidate>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = SentenceId> + '_ {
        self.entries.iter().map(|c| c.id)
    }

    /// The same set minus one sentence.
    pub fn without(&self, id: SentenceId) -> CandidateSet {
        CandidateSet {
            concept_set: self.concept_set.clone(),
            min_overlap: self.min_overlap,
            entries: self
                .entries
                .iter()
                .copied()
                .filter(|c| c.id != id)
                .collect(),
        }
    }

    /// Keeps the `cap` candidates with the most matched concepts (ties by
    /// lower id); order by id is preserved.
    pub fn truncate_by_match(&self, cap: usize) -> CandidateSet {
        if self.entries.len() <= cap {
            return self.clone();
        }
        let mut ranked = self.entries.clone();
        ranked.sort_by_key(|c| (Reverse(c.match_count), c.id));
        ranked.truncate(cap);
        ranked.sort_by_key(|c| c.id);
        CandidateSet {
            concept_set: self.concept_set.clone(),
            min_overlap: self.min_overlap,
            entries: ranked,
        }
    }
}

/// Number of distinct concepts present in the record's lemma set.
pub fn match_count(record: &SentenceRecord, concepts: &ConceptSet) -> usize {
    concepts
        .iter()
        .filter(|c| record.lemma_set.contains(*c))
        .count()
}

/// Sentences containing at least `min_overlap` of the concepts, computed by
/// merging the concepts' posting lists.
pub fn candidates(
    index: &InvertedIndex,
    concepts: &ConceptSet,
    min_overlap: usize,
) -> Result<CandidateSet> {
    if min_overlap == 0 {
        return Err(Error::Usage("min_overlap must be at least 1".to_string()));
    }
    let lists: Vec<&[SentenceId]> = concepts
        .iter()
        .map(|c| index.postings(c))
        .filter(|p| !p.is_empty())
        .collect();

    let mut entries = Vec::new();
    if lists.len() >= min_overlap {
        // k-way merge; heap holds (next id, list, position)
        let mut heap: BinaryHeap<Reverse<(SentenceId, usize, usize)>> = lists
            .iter()
            .enumerate()
            .map(|(i, l)| Reverse((l[0], i, 0)))
            .collect();
        let mut current: Option<(SentenceId, usize)> = None;
        while let Some(Reverse((id, list, pos))) = heap.pop() {
            match current {
                Some((cur, n)) if cur == id => current = Some((cur, n + 1)),
                Some((cur, n)) => {
                    if n >= min_overlap {
                        entries.push(Candidate {
                            id: cur,
                            match_count: n,
                        });
                    }
                    current = Some((id, 1));
                }
                None => current = Some((id, 1)),
            }
            if let Some(&next) = lists[list].get(pos + 1) {
                heap.push(Reverse((next, list, pos + 1)));
            }
        }
        if let Some((cur, n)) = current {
            if n >= min_overlap {
                entries.push(Candidate {
                    id: cur,
                    match_count: n,
                });
            }
        }
    }
    Ok(CandidateSet {
        concept_set: concepts.clone(),
        min_overlap,
        entries,
    })
}
