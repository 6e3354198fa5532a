//! Pre-training and fine-tuning dataset construction.
//!
//! Pre-training examples turn an external sentence into its own target:
//! the sentence's nouns, proper nouns and verbs (restricted to a concept
//! vocabulary) form a pseudo concept set, prototypes come from the matching
//! retriever over every other sentence, and pseudo sets that coincide with
//! a held-out concept set are dropped. Fine-tuning examples pair each
//! CommonGen concept set with prototypes from a trained scorer.

mod source;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use source::{parse_source, serialize_source, DELIMITER};

use crate::corpus::{CommonGenEntry, ConceptSet, SentenceId, SentenceRecord, SentenceStore};
use crate::error::{Error, ErrorCategory, Result};
use crate::index::{candidates, InvertedIndex};
use crate::mix_seed;
use crate::retrieval::{matching_retrieve, rank_retrieve, PrototypeList, Scorer};

/// Single-word lemmas admitted as pseudo concepts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConceptVocabulary {
    lemmas: HashSet<String>,
}

impl ConceptVocabulary {
    /// Multi-word entries (containing whitespace or `_`) are ignored.
    pub fn new<I, S>(lemmas: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let lemmas = lemmas
            .into_iter()
            .map(|l| l.as_ref().trim().to_lowercase())
            .filter(|l| !l.is_empty() && !l.contains('_') && !l.chars().any(char::is_whitespace))
            .collect();
        ConceptVocabulary { lemmas }
    }

    /// One lemma per line.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let lines = BufReader::new(file)
            .lines()
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(|e| Error::io(path, e))?;
        Ok(Self::new(lines))
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.lemmas.contains(lemma)
    }

    pub fn len(&self) -> usize {
        self.lemmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lemmas.is_empty()
    }
}

/// Distinct NOUN/PROPN/VERB lemmas in the vocabulary, in first-occurrence
/// order.
pub fn extract_pseudo_concepts(record: &SentenceRecord, vocab: &ConceptVocabulary) -> Vec<String> {
    let mut seen = HashSet::new();
    record
        .tokens
        .iter()
        .filter(|t| t.pos.is_content() && vocab.contains(&t.lemma))
        .filter(|t| seen.insert(t.lemma.as_str()))
        .map(|t| t.lemma.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeakageMode {
    /// Drop a pseudo set equal (as an unordered set) to a held-out set.
    #[default]
    Exact,
    /// Also drop pseudo sets that contain a held-out set.
    Subset,
}

/// Precomputed held-out concept sets for fast leakage checks.
#[derive(Debug, Clone)]
pub struct LeakageFilter {
    mode: LeakageMode,
    exact: HashSet<BTreeSet<String>>,
    // lemma -> ids of held-out sets containing it
    by_lemma: HashMap<String, Vec<usize>>,
    sizes: Vec<usize>,
}

impl LeakageFilter {
    pub fn new<'a, I>(held_out: I, mode: LeakageMode) -> Self
    where
        I: IntoIterator<Item = &'a ConceptSet>,
    {
        let mut exact = HashSet::new();
        let mut by_lemma: HashMap<String, Vec<usize>> = HashMap::new();
        let mut sizes = Vec::new();
        for set in held_out {
            let lemmas: BTreeSet<String> = set.iter().map(str::to_string).collect();
            if exact.insert(lemmas.clone()) {
                let id = sizes.len();
                sizes.push(lemmas.len());
                for l in lemmas {
                    by_lemma.entry(l).or_default().push(id);
                }
            }
        }
        LeakageFilter {
            mode,
            exact,
            by_lemma,
            sizes,
        }
    }

    pub fn mode(&self) -> LeakageMode {
        self.mode
    }

    pub fn should_drop(&self, pseudo: &[String]) -> bool {
        if pseudo.is_empty() {
            return false;
        }
        let set: BTreeSet<String> = pseudo.iter().cloned().collect();
        if self.exact.contains(&set) {
            return true;
        }
        if self.mode == LeakageMode::Subset {
            let mut hits: HashMap<usize, usize> = HashMap::new();
            for lemma in &set {
                for &id in self.by_lemma.get(lemma).map(Vec::as_slice).unwrap_or(&[]) {
                    let h = hits.entry(id).or_insert(0);
                    *h += 1;
                    if *h == self.sizes[id] {
                        return true;
                    }
                }
            }
        }
        false
    }
}

/// True when the pseudo set must be dropped.
pub fn leakage_filter(pseudo: &[String], test_sets: &[ConceptSet], mode: LeakageMode) -> bool {
    LeakageFilter::new(test_sets, mode).should_drop(pseudo)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    #[serde(rename = "PRETRAIN")]
    Pretrain,
    #[serde(rename = "FINETUNE")]
    Finetune,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seq2SeqExample {
    pub source: String,
    /// Empty for test-split examples.
    pub target: String,
    pub concepts: ConceptSet,
    pub prototype_ids: Vec<SentenceId>,
    pub origin: Origin,
    /// Fewer than `k` prototypes were available.
    #[serde(default)]
    pub short: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub inputs: usize,
    pub emitted: usize,
    pub skipped_leakage: usize,
    pub skipped_size: usize,
    pub skipped_missing: usize,
    pub short_prototypes: usize,
    pub empty_prototypes: usize,
    pub scorer_fallbacks: usize,
    /// Prototype count by corpus source.
    pub prototype_sources: BTreeMap<String, usize>,
}

impl DatasetStats {
    fn record_prototypes(&mut self, list: &PrototypeList) {
        if list.short {
            self.short_prototypes += 1;
        }
        if list.is_empty() && list.k > 0 {
            self.empty_prototypes += 1;
        }
        for p in &list.prototypes {
            *self.prototype_sources.entry(p.source.clone()).or_insert(0) += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub k: usize,
    pub min_overlap: usize,
    pub min_concepts: usize,
    pub max_concepts: usize,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            k: crate::retrieval::DEFAULT_K,
            min_overlap: crate::index::DEFAULT_MIN_OVERLAP,
            min_concepts: 3,
            max_concepts: 7,
            seed: 0,
        }
    }
}

enum PretrainOutcome {
    Emitted(Seq2SeqExample, PrototypeList),
    Leakage,
    Size,
    Missing,
}

/// Builds pre-training examples for every pool sentence, in pool order.
pub fn build_pretrain(
    pool: &[SentenceId],
    store: &SentenceStore,
    index: &InvertedIndex,
    vocab: &ConceptVocabulary,
    leakage: &LeakageFilter,
    config: &PretrainConfig,
) -> Result<(Vec<Seq2SeqExample>, DatasetStats)> {
    let outcomes: Vec<Result<PretrainOutcome>> = pool
        .par_iter()
        .map(|&id| {
            let Some(record) = store.get(id).filter(|r| r.is_retrievable()) else {
                return Ok(PretrainOutcome::Missing);
            };
            let pseudo = extract_pseudo_concepts(record, vocab);
            if leakage.should_drop(&pseudo) {
                return Ok(PretrainOutcome::Leakage);
            }
            if pseudo.len() < config.min_concepts
                || pseudo.len() > config.max_concepts
                || pseudo.is_empty()
            {
                return Ok(PretrainOutcome::Size);
            }
            let concepts = ConceptSet::new(pseudo)?;
            let cands = candidates(index, &concepts, config.min_overlap)?.without(id);
            let list = matching_retrieve(&cands, store, config.k, mix_seed(config.seed, id))?;
            let source = serialize_source(&concepts, &list.texts())?;
            Ok(PretrainOutcome::Emitted(
                Seq2SeqExample {
                    source,
                    target: record.text.clone(),
                    concepts,
                    prototype_ids: list.ids(),
                    origin: Origin::Pretrain,
                    short: list.short,
                },
                list,
            ))
        })
        .collect();

    let mut stats = DatasetStats {
        inputs: pool.len(),
        ..Default::default()
    };
    let mut examples = Vec::new();
    for outcome in outcomes {
        match outcome? {
            PretrainOutcome::Emitted(example, list) => {
                stats.record_prototypes(&list);
                examples.push(example);
            }
            PretrainOutcome::Leakage => stats.skipped_leakage += 1,
            PretrainOutcome::Size => stats.skipped_size += 1,
            PretrainOutcome::Missing => stats.skipped_missing += 1,
        }
    }
    stats.emitted = examples.len();
    Ok((examples, stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Train,
    Dev,
    Test,
}

/// How fine-tuning prototypes are chosen.
#[derive(Clone, Copy)]
pub enum FinetuneRetriever<'a> {
    Matching {
        seed: u64,
    },
    Ranked {
        scorer: &'a dyn Scorer,
        /// Pre-truncate candidates to this many by match count.
        max_candidates: Option<usize>,
        /// Fall back to the matching retriever with this seed when the
        /// scorer fails; `None` aborts instead.
        fallback_seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub k: usize,
    pub min_overlap: usize,
    pub split: SplitKind,
}

/// One example per (concept set, target), or one target-less example per
/// concept set for the test split. Prototypes are retrieved once per
/// concept set.
pub fn build_finetune(
    entries: &[CommonGenEntry],
    store: &SentenceStore,
    index: &InvertedIndex,
    retriever: FinetuneRetriever<'_>,
    config: &FinetuneConfig,
) -> Result<(Vec<Seq2SeqExample>, DatasetStats)> {
    let retrieved: Vec<Result<(PrototypeList, bool)>> = entries
        .par_iter()
        .enumerate()
        .map(|(i, entry)| {
            let cands = candidates(index, &entry.concept_set, config.min_overlap)?;
            match retriever {
                FinetuneRetriever::Matching { seed } => Ok((
                    matching_retrieve(&cands, store, config.k, mix_seed(seed, i as u64))?,
                    false,
                )),
                FinetuneRetriever::Ranked {
                    scorer,
                    max_candidates,
                    fallback_seed,
                } => {
                    let cands = match max_candidates {
                        Some(cap) => cands.truncate_by_match(cap),
                        None => cands,
                    };
                    match rank_retrieve(scorer, &cands, store, config.k) {
                        Ok(list) => Ok((list, false)),
                        Err(e) if e.category() == ErrorCategory::ScorerProtocol => {
                            match fallback_seed {
                                Some(seed) => Ok((
                                    matching_retrieve(
                                        &cands,
                                        store,
                                        config.k,
                                        mix_seed(seed, i as u64),
                                    )?,
                                    true,
                                )),
                                None => Err(e),
                            }
                        }
                        Err(e) => Err(e),
                    }
                }
            }
        })
        .collect();

    let mut stats = DatasetStats {
        inputs: entries.len(),
        ..Default::default()
    };
    let mut examples = Vec::new();
    for (entry, result) in entries.iter().zip(retrieved) {
        let (list, fell_back) = result?;
        if fell_back {
            stats.scorer_fallbacks += 1;
        }
        stats.record_prototypes(&list);
        let source = serialize_source(&entry.concept_set, &list.texts())?;
        let make = |target: &str| Seq2SeqExample {
            source: source.clone(),
            target: target.to_string(),
            concepts: entry.concept_set.clone(),
            prototype_ids: list.ids(),
            origin: Origin::Finetune,
            short: list.short,
        };
        match config.split {
            SplitKind::Test => examples.push(make("")),
            SplitKind::Train | SplitKind::Dev => {
                if entry.targets.is_empty() {
                    return Err(Error::Schema {
                        index: examples.len(),
                        message: format!("concept set {} has no targets", entry.concept_set),
                    });
                }
                examples.extend(entry.targets.iter().map(|t| make(t)));
            }
        }
    }
    stats.emitted = examples.len();
    Ok((examples, stats))
}

pub fn write_examples(path: &Path, examples: &[Seq2SeqExample]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for ex in examples {
        serde_json::to_writer(&mut out, ex).map_err(|e| Error::json("example", e))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_examples(path: &Path) -> Result<Vec<Seq2SeqExample>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::json(format!("{} line {}", path.display(), i + 1), e))?,
        );
    }
    Ok(out)
}
