//! Sentence store, CommonGen loading, target exclusion and pool sampling.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::textnorm::{self, LemmaLexicon, Pos, Token};

pub type SentenceId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Split {
    #[serde(rename = "EXTERNAL")]
    External,
    #[serde(rename = "CG_TRAIN")]
    CgTrain,
    #[serde(rename = "CG_DEV")]
    CgDev,
    #[serde(rename = "CG_TEST")]
    CgTest,
}

/// One stored corpus sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceRecord {
    pub id: SentenceId,
    pub text: String,
    pub tokens: Vec<Token>,
    pub lemma_set: BTreeSet<String>,
    pub source: String,
    pub split: Split,
    pub excluded: bool,
}

impl SentenceRecord {
    pub fn new(
        id: SentenceId,
        text: String,
        tokens: Vec<Token>,
        source: String,
        split: Split,
    ) -> Self {
        let lemma_set = tokens.iter().map(|t| t.lemma.clone()).collect();
        SentenceRecord {
            id,
            text,
            tokens,
            lemma_set,
            source,
            split,
            excluded: false,
        }
    }

    /// Builds a transient record (id 0) from raw text.
    pub fn from_text(text: &str, lexicon: &LemmaLexicon) -> Self {
        let tokens = textnorm::analyze(text, lexicon);
        SentenceRecord::new(
            0,
            text.trim().to_string(),
            tokens,
            String::new(),
            Split::External,
        )
    }

    /// Eligible for candidate sets and sampling.
    pub fn is_retrievable(&self) -> bool {
        self.split == Split::External && !self.excluded
    }
}

/// Lowercased, tokenized, single-space-joined form used for text equality.
pub fn normalize_text(text: &str) -> String {
    textnorm::tokenize(text).join(" ")
}

/// An input concept set: distinct lemmas in their given order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptSet {
    concepts: Vec<String>,
}

impl ConceptSet {
    /// Takes already-lemmatized concepts; duplicates are dropped keeping the
    /// first occurrence.
    pub fn new<I, S>(concepts: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for c in concepts {
            let c: String = c.into();
            if c.is_empty() || c.chars().any(char::is_whitespace) {
                return Err(Error::Usage(format!("concept {c:?} is not a single word")));
            }
            if seen.insert(c.clone()) {
                out.push(c);
            }
        }
        if out.is_empty() {
            return Err(Error::EmptyConceptSet);
        }
        Ok(ConceptSet { concepts: out })
    }

    /// Lowercases and lemmatizes raw concept words.
    pub fn from_raw<I, S>(raw: I, lexicon: &LemmaLexicon) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let lemmas: Vec<String> = raw
            .into_iter()
            .map(|c| lexicon.lemmatize(&c.as_ref().trim().to_lowercase()))
            .collect();
        ConceptSet::new(lemmas)
    }

    pub fn concepts(&self) -> &[String] {
        &self.concepts
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.concepts.iter().map(String::as_str)
    }

    pub fn as_set(&self) -> BTreeSet<&str> {
        self.iter().collect()
    }

    /// Order-independent key: sorted lemmas joined by spaces.
    pub fn key(&self) -> String {
        let mut sorted: Vec<&str> = self.iter().collect();
        sorted.sort_unstable();
        sorted.join(" ")
    }
}

impl fmt::Display for ConceptSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.concepts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommonGenEntry {
    pub concept_set: ConceptSet,
    pub targets: Vec<String>,
}

#[derive(Deserialize)]
struct RawEntry {
    concepts: Option<Vec<String>>,
    // Original release layout: "ski#mountain#skier" plus "scene".
    concept_set: Option<String>,
    targets: Option<Vec<String>>,
    scene: Option<Vec<String>>,
}

/// Reads CommonGen JSONL (`{"concepts": [...], "targets": [...]}` per line).
pub fn load_commongen(path: &Path, lexicon: &LemmaLexicon) -> Result<Vec<CommonGenEntry>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    load_commongen_reader(BufReader::new(file), lexicon).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn load_commongen_reader<R: BufRead>(
    reader: R,
    lexicon: &LemmaLexicon,
) -> Result<Vec<CommonGenEntry>> {
    let mut entries = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io("<commongen>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let index = entries.len();
        let raw: RawEntry = serde_json::from_str(&line).map_err(|e| Error::Schema {
            index,
            message: e.to_string(),
        })?;
        let concepts = match (raw.concepts, raw.concept_set) {
            (Some(c), _) => c,
            (None, Some(joined)) => joined.split('#').map(str::to_string).collect(),
            (None, None) => {
                return Err(Error::Schema {
                    index,
                    message: "missing `concepts` field".to_string(),
                })
            }
        };
        let concept_set = ConceptSet::from_raw(&concepts, lexicon).map_err(|e| Error::Schema {
            index,
            message: e.to_string(),
        })?;
        let targets: Vec<String> = raw
            .targets
            .or(raw.scene)
            .unwrap_or_default()
            .into_iter()
            .map(|t| t.trim().to_string())
            .collect();
        if targets.iter().any(String::is_empty) {
            return Err(Error::Schema {
                index,
                message: "empty target sentence".to_string(),
            });
        }
        entries.push(CommonGenEntry {
            concept_set,
            targets,
        });
    }
    Ok(entries)
}

/// Per-split totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SplitStats {
    pub concept_sets: usize,
    pub targets: usize,
}

pub fn split_stats(entries: &[CommonGenEntry]) -> SplitStats {
    SplitStats {
        concept_sets: entries.len(),
        targets: entries.iter().map(|e| e.targets.len()).sum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// One sentence per line.
    Lines,
    /// `surface<TAB>lemma<TAB>pos` rows, blank line between sentences.
    PreTagged,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceCounts {
    pub records: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolProvenance {
    pub seed: u64,
    pub size: usize,
    pub per_source: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub record_count: usize,
    pub excluded_count: usize,
    pub next_id: SentenceId,
    pub per_source: BTreeMap<String, SourceCounts>,
    pub pool: Option<PoolProvenance>,
}

#[derive(Serialize, Deserialize)]
struct StoredRecord {
    id: SentenceId,
    text: String,
    tokens: Vec<String>,
    lemmas: Vec<String>,
    pos: Vec<Pos>,
    source: String,
    split: Split,
    excluded: bool,
}

impl From<&SentenceRecord> for StoredRecord {
    fn from(r: &SentenceRecord) -> Self {
        StoredRecord {
            id: r.id,
            text: r.text.clone(),
            tokens: r.tokens.iter().map(|t| t.surface.clone()).collect(),
            lemmas: r.tokens.iter().map(|t| t.lemma.clone()).collect(),
            pos: r.tokens.iter().map(|t| t.pos).collect(),
            source: r.source.clone(),
            split: r.split,
            excluded: r.excluded,
        }
    }
}

impl StoredRecord {
    fn into_record(self, line: usize) -> Result<SentenceRecord> {
        if self.tokens.len() != self.lemmas.len() || self.tokens.len() != self.pos.len() {
            return Err(Error::Schema {
                index: line,
                message: "tokens, lemmas and pos differ in length".to_string(),
            });
        }
        let tokens = self
            .tokens
            .into_iter()
            .zip(self.lemmas)
            .zip(self.pos)
            .enumerate()
            .map(|(index, ((surface, lemma), pos))| Token {
                surface,
                lemma,
                pos,
                index,
            })
            .collect();
        let mut record = SentenceRecord::new(self.id, self.text, tokens, self.source, self.split);
        record.excluded = self.excluded;
        Ok(record)
    }
}

pub const RECORDS_FILE: &str = "records.jsonl";
pub const META_FILE: &str = "meta.json";

/// Append-only sentence store. Once sealed it accepts no new sentences.
#[derive(Debug, Clone, Default)]
pub struct SentenceStore {
    records: Vec<SentenceRecord>,
    by_id: HashMap<SentenceId, usize>,
    seen: HashSet<(String, String)>,
    next_id: SentenceId,
    sealed: bool,
    pool: Option<PoolProvenance>,
}

impl SentenceStore {
    pub fn new() -> Self {
        SentenceStore {
            next_id: 1,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    pub fn seal(&mut self) {
        self.sealed = true;
    }

    /// Reopens a sealed store for further ingestion.
    pub fn unseal(&mut self) {
        self.sealed = false;
    }

    pub fn records(&self) -> &[SentenceRecord] {
        &self.records
    }

    pub fn get(&self, id: SentenceId) -> Option<&SentenceRecord> {
        self.by_id.get(&id).map(|&i| &self.records[i])
    }

    pub fn retrievable(&self) -> impl Iterator<Item = &SentenceRecord> {
        self.records.iter().filter(|r| r.is_retrievable())
    }

    pub fn pool_provenance(&self) -> Option<&PoolProvenance> {
        self.pool.as_ref()
    }

    pub fn set_pool_provenance(&mut self, pool: PoolProvenance) {
        self.pool = Some(pool);
    }

    fn check_writable(&self) -> Result<()> {
        if self.sealed {
            return Err(Error::Usage("store is sealed".to_string()));
        }
        Ok(())
    }

    /// Adds an analysed sentence; returns `None` for an exact duplicate text
    /// within the same source.
    pub fn add_tokens(
        &mut self,
        text: &str,
        tokens: Vec<Token>,
        source: &str,
        split: Split,
    ) -> Result<Option<SentenceId>> {
        self.check_writable()?;
        let text = text.trim();
        if text.is_empty() || tokens.is_empty() {
            return Ok(None);
        }
        if !self.seen.insert((source.to_string(), text.to_string())) {
            return Ok(None);
        }
        let id = self.next_id;
        self.next_id += 1;
        self.by_id.insert(id, self.records.len());
        self.records.push(SentenceRecord::new(
            id,
            text.to_string(),
            tokens,
            source.to_string(),
            split,
        ));
        Ok(Some(id))
    }

    pub fn add_text(
        &mut self,
        text: &str,
        source: &str,
        split: Split,
        lexicon: &LemmaLexicon,
    ) -> Result<Option<SentenceId>> {
        let tokens = textnorm::analyze(text, lexicon);
        self.add_tokens(text, tokens, source, split)
    }

    pub fn ingest_reader<R: BufRead>(
        &mut self,
        reader: R,
        source: &str,
        format: CorpusFormat,
        lexicon: &LemmaLexicon,
    ) -> Result<usize> {
        self.check_writable()?;
        let mut added = 0;
        match format {
            CorpusFormat::Lines => {
                for line in reader.lines() {
                    let line = line.map_err(|e| Error::io("<corpus>", e))?;
                    if self
                        .add_text(&line, source, Split::External, lexicon)?
                        .is_some()
                    {
                        added += 1;
                    }
                }
            }
            CorpusFormat::PreTagged => {
                for tokens in textnorm::parse_pretagged(reader)? {
                    let text = tokens
                        .iter()
                        .map(|t| t.surface.as_str())
                        .collect::<Vec<_>>()
                        .join(" ");
                    if self
                        .add_tokens(&text, tokens, source, Split::External)?
                        .is_some()
                    {
                        added += 1;
                    }
                }
            }
        }
        Ok(added)
    }

    /// Marks every external sentence whose normalized text equals a
    /// normalized CommonGen target. Returns how many records were newly
    /// marked.
    pub fn exclude_targets(&mut self, entries: &[CommonGenEntry]) -> usize {
        let targets: HashSet<String> = entries
            .iter()
            .flat_map(|e| e.targets.iter())
            .map(|t| normalize_text(t))
            .collect();
        let mut removed = 0;
        for record in &mut self.records {
            if record.split == Split::External
                && !record.excluded
                && targets.contains(&normalize_text(&record.text))
            {
                record.excluded = true;
                removed += 1;
            }
        }
        removed
    }

    pub fn meta(&self) -> StoreMeta {
        let mut per_source: BTreeMap<String, SourceCounts> = BTreeMap::new();
        for r in &self.records {
            let c = per_source.entry(r.source.clone()).or_default();
            c.records += 1;
            if r.excluded {
                c.excluded += 1;
            }
        }
        StoreMeta {
            record_count: self.records.len(),
            excluded_count: self.records.iter().filter(|r| r.excluded).count(),
            next_id: self.next_id,
            per_source,
            pool: self.pool.clone(),
        }
    }

    fn write_records<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for record in &self.records {
            serde_json::to_writer(&mut out, &StoredRecord::from(record))?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    /// SHA-256 of the serialized records, identifying exactly what an index
    /// was built from.
    pub fn checksum(&self) -> String {
        let mut buf = Vec::new();
        self.write_records(&mut buf).expect("writing to memory");
        hex::encode(Sha256::digest(&buf))
    }

    /// Persists the store and seals it.
    pub fn save(&mut self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let records_path = dir.join(RECORDS_FILE);
        let file = File::create(&records_path).map_err(|e| Error::io(&records_path, e))?;
        self.write_records(BufWriter::new(file))
            .map_err(|e| Error::io(&records_path, e))?;
        let meta_path = dir.join(META_FILE);
        let meta =
            serde_json::to_string_pretty(&self.meta()).map_err(|e| Error::json("meta", e))?;
        std::fs::write(&meta_path, meta + "\n").map_err(|e| Error::io(&meta_path, e))?;
        self.sealed = true;
        Ok(())
    }

    /// Loads a persisted store; the result is sealed.
    pub fn load(dir: &Path) -> Result<Self> {
        let records_path = dir.join(RECORDS_FILE);
        let file = File::open(&records_path).map_err(|e| Error::io(&records_path, e))?;
        let mut store = SentenceStore::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(&records_path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let stored: StoredRecord = serde_json::from_str(&line).map_err(|e| {
                Error::json(format!("{} line {}", records_path.display(), i + 1), e)
            })?;
            let record = stored.into_record(i)?;
            if store.by_id.contains_key(&record.id) {
                return Err(Error::Schema {
                    index: i,
                    message: format!("duplicate sentence id {}", record.id),
                });
            }
            store.next_id = store.next_id.max(record.id + 1);
            store
                .seen
                .insert((record.source.clone(), record.text.clone()));
            store.by_id.insert(record.id, store.records.len());
            store.records.push(record);
        }
        let meta_path = dir.join(META_FILE);
        if meta_path.exists() {
            let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
            let meta: StoreMeta = serde_json::from_str(&text)
                .map_err(|e| Error::json(meta_path.display().to_string(), e))?;
            store.next_id = store.next_id.max(meta.next_id);
            store.pool = meta.pool;
        }
        store.sealed = true;
        Ok(store)
    }
}

/// Reads a corpus file into the store.
pub fn ingest_corpus(
    path: &Path,
    source: &str,
    store: &mut SentenceStore,
    format: CorpusFormat,
    lexicon: &LemmaLexicon,
) -> Result<usize> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    store
        .ingest_reader(BufReader::new(file), source, format, lexicon)
        .map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
}

pub fn exclude_targets(store: &mut SentenceStore, entries: &[CommonGenEntry]) -> usize {
    store.exclude_targets(entries)
}

/// Uniform sample without replacement over retrievable sentences; the
/// returned ids are in ascending order.
pub fn sample_pool(store: &SentenceStore, size: usize, seed: u64) -> Result<Vec<SentenceId>> {
    let mut eligible: Vec<SentenceId> = store.retrievable().map(|r| r.id).collect();
    eligible.sort_unstable();
    if size > eligible.len() {
        return Err(Error::PoolTooLarge {
            requested: size,
            available: eligible.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<SentenceId> = rand::seq::index::sample(&mut rng, eligible.len(), size)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Per-source counts of a pool, for provenance.
pub fn pool_provenance(store: &SentenceStore, pool: &[SentenceId], seed: u64) -> PoolProvenance {
    let mut per_source = BTreeMap::new();
    for id in pool {
        if let Some(r) = store.get(*id) {
            *per_source.entry(r.source.clone()).or_insert(0) += 1;
        }
    }
    PoolProvenance {
        seed,
        size: pool.len(),
        per_source,
    }
}
