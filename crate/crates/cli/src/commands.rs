use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use protoret::corpus::{
    load_commongen, pool_provenance, sample_pool, CommonGenEntry, ConceptSet, CorpusFormat,
    PoolProvenance, SentenceId, SentenceRecord, SentenceStore, META_FILE, RECORDS_FILE,
};
use protoret::dataset::{
    build_finetune, build_pretrain, write_examples, ConceptVocabulary, DatasetStats,
    FinetuneConfig, FinetuneRetriever, LeakageFilter, PretrainConfig, SplitKind,
};
use protoret::index::{candidates, InvertedIndex};
use protoret::metrics;
use protoret::retrieval::protocol::serve;
use protoret::retrieval::{
    build_pairs, extract_features, matching_retrieve, rank_retrieve, train_scorer, ExternalScorer,
    FeatureScorer, Scorer, ScorerModel, TrainConfig, TrainingPair,
};
use protoret::textnorm::LemmaLexicon;

use crate::config::{config_error, require, PipelineConfig, RetrieverChoice};
use crate::manifest::{sibling, write_json, Manifest, StoreLock};
use crate::{
    BuildFinetuneArgs, BuildIndexArgs, BuildPairsArgs, BuildPretrainArgs, Command, EvaluateArgs,
    ExcludeArgs, IngestArgs, RetrieveArgs, SamplePoolArgs, ScorerArgs, ServeScorerArgs,
    TrainScorerArgs,
};

pub fn run(command: Command, config_path: Option<&Path>) -> Result<()> {
    let mut cfg = PipelineConfig::load(config_path)?;
    match command {
        Command::Ingest(a) => ingest(a, &mut cfg),
        Command::ExcludeTargets(a) => exclude(a, &mut cfg),
        Command::SamplePool(a) => sample(a, &mut cfg),
        Command::BuildIndex(a) => build_index(a, &mut cfg),
        Command::Retrieve(a) => retrieve(a, &mut cfg),
        Command::BuildPairs(a) => pairs(a, &mut cfg),
        Command::TrainScorer(a) => train(a, &mut cfg),
        Command::BuildPretrain(a) => pretrain(a, &mut cfg),
        Command::BuildFinetune(a) => finetune(a, &mut cfg),
        Command::Evaluate(a) => evaluate(a, &mut cfg),
        Command::ServeScorer(a) => serve_scorer(a, &mut cfg),
    }
}

fn lexicon() -> &'static LemmaLexicon {
    LemmaLexicon::shipped()
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_path(
    slot: &mut Option<PathBuf>,
    value: Option<PathBuf>,
    flag: &str,
    key: &str,
) -> Result<PathBuf> {
    if value.is_some() {
        *slot = value;
    }
    require(slot.clone(), flag, key)
}

fn load_store(path: &Path) -> Result<SentenceStore> {
    if !path.join(RECORDS_FILE).exists() {
        return Err(config_error(format!(
            "{} is not a sentence store (run `protoret ingest` first)",
            path.display()
        )));
    }
    Ok(SentenceStore::load(path)?)
}

fn load_index(path: &Path, store: &SentenceStore) -> Result<InvertedIndex> {
    let index = InvertedIndex::load(path)?;
    index.verify(store)?;
    Ok(index)
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut out = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| protoret::Error::io(path, e))?;
    let mut items = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| protoret::Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| protoret::Error::Schema {
            index: i,
            message: format!("{} line {}: {e}", path.display(), i + 1),
        })?;
        items.push(item);
    }
    Ok(items)
}

fn ingest(a: IngestArgs, cfg: &mut PipelineConfig) -> Result<()> {
    let store_dir = set_path(&mut cfg.paths.store, a.store, "--store", "paths.store")?;
    let mut corpora = Vec::new();
    for spec in &a.corpora {
        let (name, path) = spec
            .split_once('=')
            .filter(|(n, p)| !n.is_empty() && !p.is_empty())
            .ok_or_else(|| config_error(format!("--corpus {spec:?} is not NAME=PATH")))?;
        corpora.push((name.to_string(), PathBuf::from(path)));
    }
    fs::create_dir_all(&store_dir)
        .with_context(|| format!("cannot create {}", store_dir.display()))?;
    let _lock = StoreLock::acquire(&store_dir)?;
    if store_dir.join(RECORDS_FILE).exists() {
        if !a.force {
            return Err(config_error(format!(
                "{} already holds a store (pass --force to replace it)",
                store_dir.display()
            )));
        }
        fs::remove_file(store_dir.join(RECORDS_FILE))?;
        let _ = fs::remove_file(store_dir.join(META_FILE));
    }

    let format = if a.pretagged {
        CorpusFormat::PreTagged
    } else {
        CorpusFormat::Lines
    };
    let mut store = SentenceStore::new();
    let mut manifest = Manifest::new("ingest", cfg);
    for (name, path) in &corpora {
        let added = protoret::corpus::ingest_corpus(path, name, &mut store, format, lexicon())?;
        eprintln!("{name}: {added} sentences from {}", path.display());
        manifest.input(path)?;
    }
    store.save(&store_dir)?;
    manifest.output(&store_dir)?;
    manifest.write_beside(&store_dir)?;
    Ok(())
}

fn exclude(a: ExcludeArgs, cfg: &mut PipelineConfig) -> Result<()> {
    let store_dir = set_path(&mut cfg.paths.store, a.store, "--store", "paths.store")?;
    let files: Vec<PathBuf> = if a.commongen.is_empty() {
        [&cfg.paths.train, &cfg.paths.dev, &cfg.paths.test]
            .into_iter()
            .flatten()
            .cloned()
            .collect()
    } else {
        a.commongen
    };
    if files.is_empty() {
        return Err(config_error(
            "no CommonGen files given (--commongen or paths.train/dev/test)",
        ));
    }
    let _lock = StoreLock::acquire(&store_dir)?;
    let mut store = load_store(&store_dir)?;
    let mut manifest = Manifest::new("exclude-targets", cfg);
    let mut entries = Vec::new();
    for f in &files {
        entries.extend(load_commongen(f, lexicon())?);
        manifest.input(f)?;
    }
    let marked = store.exclude_targets(&entries);
    store.save(&store_dir)?;
    eprintln!(
        "excluded {marked} sentences ({} total)",
        store.meta().excluded_count
    );
    manifest.output(&store_dir)?;
    manifest.write_beside(&store_dir)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct PoolFile {
    #[serde(flatten)]
    provenance: PoolProvenance,
    ids: Vec<SentenceId>,
}

fn sample(a: SamplePoolArgs, cfg: &mut PipelineConfig) -> Result<()> {
    let store_dir = set_path(&mut cfg.paths.store, a.store, "--store", "paths.store")?;
    let out = set_path(&mut cfg.paths.pool, a.out, "--out", "paths.pool")?;
    set(&mut cfg.pool_size, a.size);
    set(&mut cfg.seed, a.seed);
    let _lock = StoreLock::acquire(&store_dir)?;
    let store = load_store(&store_dir)?;
    let ids = sample_pool(&store, cfg.pool_size, cfg.seed)?;
    let pool = PoolFile {
        provenance: pool_provenance(&store, &ids, cfg.seed),
        ids,
    };
    write_json(&out, &pool)?;
    let mut manifest = Manifest::new("sample-pool", cfg).seed("pool", cfg.seed);
    manifest.input(&store_dir)?;
    manifest.output(&out)?;
    manifest.write_beside(&out)?;
    Ok(())
}

fn build_index(a: BuildIndexArgs, cfg: &mut PipelineConfig) -> Result<()> {
    let store_dir = set_path(&mut cfg.paths.store, a.store, "--store", "paths.store")?;
    let out = set_path(&mut cfg.paths.index, a.out, "--out", "paths.index")?;
    let _lock = StoreLock::acquire(&store_dir)?;
    let store = load_store(&store_dir)?;
    let index = InvertedIndex::build_sharded(&store, rayon::current_num_threads())?;
    index.save(&out)?;
    eprintln!(
        "indexed {} sentences, {} lemmas",
        index.doc_count(),
        index.vocabulary_size()
    );
    let mut manifest = Manifest::new("build-index", cfg);
    manifest.input(&store_dir)?;
    manifest.output(&out)?;
    manifest.write_beside(&out)?;
    Ok(())
}

/// The scorer for a ranked retriever, or `None` for matching.
fn make_scorer(
    args: &ScorerArgs,
    cfg: &mut PipelineConfig,
    manifest_inputs: &mut Vec<PathBuf>,
) -> Result<Option<Box<dyn Scorer>>> {
    set(&mut cfg.retriever, args.retriever);
    if args.max_candidates.is_some() {
        cfg.max_candidates = args.max_candidates;
    }
    if args.scorer_cmd.is_some() {
        cfg.external.command = args.scorer_cmd.clone();
    }
    if args.scorer_addr.is_some() {
        cfg.external.address = args.scorer_addr.clone();
    }
    match cfg.retriever {
        RetrieverChoice::Matching => Ok(None),
        RetrieverChoice::Feature => {
            let path = set_path(
                &mut cfg.paths.model,
                args.model.clone(),
                "--model",
                "paths.model",
            )?;
            let model = ScorerModel::load(&path)?;
            manifest_inputs.push(path);
            Ok(Some(Box::new(FeatureScorer::new(model)?)))
        }
        RetrieverChoice::External => {
            let timeout = Duration::from_secs(cfg.external.timeout_secs);
            let scorer = match (&cfg.external.command, &cfg.external.address) {
                (Some(cmd), None) if !cmd.is_empty() => {
                    ExternalScorer::spawn(&cmd[0], &cmd[1..], timeout)?
                }
                (None, Some(addr)) => ExternalScorer::connect(addr, timeout)?,
                (Some(_), Some(_)) => {
                    return Err(config_error(
                        "give either a scorer command or a scorer address, not both",
                    ))
                }
                _ => {
                    return Err(config_error(
                        "external retriever needs --scorer-cmd or --scorer-addr",
                    ))
                }
            };
            Ok(Some(Box::new(
                scorer.with_batch_size(cfg.external.batch_size),
            )))
        }
    }
}

fn retrieve(a: RetrieveArgs, cfg: &mut PipelineConfig) -> Result<()> {
    let store_dir = set_path(&mut cfg.paths.store, a.store, "--store", "paths.store")?;
    let index_path = set_path(&mut cfg.paths.index, a.index, "--index", "paths.index")?;
    set(&mut cfg.k, a.k);
    set(&mut cfg.min_overlap, a.min_overlap);
    set(&mut cfg.seed, a.seed);
    cfg.validate()?;
    let raw: Vec<&str> = a
        .concepts
        .split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .collect();
    let concepts = ConceptSet::from_raw(&raw, lexicon())?;

    let mut inputs = vec![store_dir.clone(), index_path.clone()];
    let scorer = make_scorer(&a.scorer, cfg, &mut inputs)?;
    let _lock = StoreLock::acquire(&store_dir)?;
    let store = load_store(&store_dir)?;
    let index = load_index(&index_path, &store)?;
    let cands = candidates(&index, &concepts, cfg.min_overlap)?;
    let list = match &scorer {
        None => matching_retrieve(&cands, &store, cfg.k, cfg.seed)?,
        Some(s) => {
            let cands = match cfg.max_candidates {
                Some(cap) => cands.truncate_by_match(cap),
                None => cands,
            };
            rank_retrieve(s.as_ref(), &cands, &store, cfg.k)?
        }
    };
    match a.out {
        None => {
            let mut text = serde_json::to_string_pretty(&list)?;
            text.push('\n');
            io::stdout().write_all(text.as_bytes())?;
        }
        Some(out) => {
            write_json(&out, &list)?;
            let mut manifest = Manifest::new("retrieve", cfg).seed("retrieval", cfg.seed);
            for p in &inputs {
                manifest.input(p)?;
            }
            manifest.output(&out)?;
            manifest.write_beside(&out)?;
        }
    }
    Ok(())
}

fn pairs(a: BuildPairsArgs, cfg: &mut PipelineConfig) -> Result<()> {
    let train = set_path(
        &mut cfg.paths.train,
        a.commongen,
        "--commongen",
        "paths.train",
    )?;
    set(&mut cfg.neg_per_pos, a.neg_per_pos);
    set(&mut cfg.seed, a.seed);
    let entries = load_commongen(&train, lexicon())?;
    let pairs = build_pairs(&entries, cfg.neg_per_pos, cfg.seed)?;
    write_jsonl(&a.out, &pairs)?;
    eprintln!("{} pairs from {} concept sets", pairs.len(), entries.len());
    let mut manifest = Manifest::new("build-pairs", cfg).seed("negatives", cfg.seed);
    manifest.input(&train)?;
    manifest.output(&a.out)?;
    manifest.write_beside(&a.out)?;
    Ok(())
}

fn train(a: TrainScorerArgs, cfg: &mut PipelineConfig) -> Result<()> {
    let out = set_path(&mut cfg.paths.model, a.out, "--out", "paths.model")?;
    set(&mut cfg.epochs, a.epochs);
    set(&mut cfg.learning_rate, a.learning_rate);
    set(&mut cfg.seed, a.seed);
    cfg.validate()?;
    let pairs: Vec<TrainingPair> = read_jsonl(&a.pairs)?;
    let config = TrainConfig {
        epochs: cfg.epochs,
        learning_rate: cfg.learning_rate,
        seed: cfg.seed,
    };
    let model = train_scorer(&pairs, &config, lexicon())?;
    model.save(&out)?;
    if let Some(loss) = model.training_meta.loss_trace.last() {
        eprintln!("trained on {} pairs, final loss {loss:.6}", pairs.len());
    }
    let mut manifest = Manifest::new("train-scorer", cfg).seed("training", cfg.seed);
    manifest.input(&a.pairs)?;
    manifest.output(&out)?;
    manifest.write_beside(&out)?;
    Ok(())
}

fn load_sets(files: &[PathBuf], manifest: &mut Manifest) -> Result<Vec<CommonGenEntry>> {
    let mut entries = Vec::new();
    for f in files {
        entries.extend(load_commongen(f, lexicon())?);
        manifest.input(f)?;
    }
    Ok(entries)
}

fn write_dataset(
    out: &Path,
    examples: &[protoret::dataset::Seq2SeqExample],
    stats: &DatasetStats,
    manifest: &mut Manifest,
) -> Result<()> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_examples(out, examples)?;
    let stats_path = sibling(out, ".stats.json");
    write_json(&stats_path, stats)?;
    manifest.output(out)?;
    manifest.output(&stats_path)?;
    manifest.write_beside(out)?;
    eprintln!(
        "{} examples from {} inputs ({} leakage, {} size, {} short)",
        stats.emitted,
        stats.inputs,
        stats.skipped_leakage,
        stats.skipped_size,
        stats.short_prototypes
    );
    Ok(())
}

fn pretrain(a: BuildPretrainArgs, cfg: &mut PipelineConfig) -> Result<()> {
    let store_dir = set_path(&mut cfg.paths.store, a.store, "--store", "paths.store")?;
    let index_path = set_path(&mut cfg.paths.index, a.index, "--index", "paths.index")?;
    let pool_path = set_path(&mut cfg.paths.pool, a.pool, "--pool", "paths.pool")?;
    let vocab_path = set_path(&mut cfg.paths.vocab, a.vocab, "--vocab", "paths.vocab")?;
    set(&mut cfg.k, a.k);
    set(&mut cfg.min_overlap, a.min_overlap);
    set(&mut cfg.min_concepts, a.min_concepts);
    set(&mut cfg.max_concepts, a.max_concepts);
    set(&mut cfg.seed, a.seed);
    set(&mut cfg.leakage_mode, a.leakage_mode.map(Into::into));
    cfg.leakage_include_dev |= a.include_dev;
    cfg.validate()?;

    let mut held_out = a.held_out;
    if held_out.is_empty() {
        held_out.extend(cfg.paths.test.clone());
    }
    if cfg.leakage_include_dev {
        held_out.push(require(cfg.paths.dev.clone(), "paths.dev", "paths.dev")?);
    }
    if held_out.is_empty() {
        return Err(config_error(
            "no held-out concept sets for the leakage filter (--held-out or paths.test)",
        ));
    }

    let mut manifest = Manifest::new("build-pretrain", cfg).seed("retrieval", cfg.seed);
    let _lock = StoreLock::acquire(&store_dir)?;
    let store = load_store(&store_dir)?;
    let index = load_index(&index_path, &store)?;
    let pool: PoolFile = serde_json::from_str(
        &fs::read_to_string(&pool_path).map_err(|e| protoret::Error::io(&pool_path, e))?,
    )
    .map_err(|e| protoret::Error::json(pool_path.display().to_string(), e))?;
    let vocab = ConceptVocabulary::load(&vocab_path)?;
    for p in [&store_dir, &index_path, &pool_path, &vocab_path] {
        manifest.input(p)?;
    }
    let held = load_sets(&held_out, &mut manifest)?;
    let filter = LeakageFilter::new(held.iter().map(|e| &e.concept_set), cfg.leakage_mode);
    let config = PretrainConfig {
        k: cfg.k,
        min_overlap: cfg.min_overlap,
        min_concepts: cfg.min_concepts,
        max_concepts: cfg.max_concepts,
        seed: cfg.seed,
    };
    let (examples, stats) = build_pretrain(&pool.ids, &store, &index, &vocab, &filter, &config)?;
    write_dataset(&a.out, &examples, &stats, &mut manifest)
}

fn finetune(a: BuildFinetuneArgs, cfg: &mut PipelineConfig) -> Result<()> {
    let store_dir = set_path(&mut cfg.paths.store, a.store, "--store", "paths.store")?;
    let index_path = set_path(&mut cfg.paths.index, a.index, "--index", "paths.index")?;
    let split: SplitKind = a.split.into();
    let (slot, key) = match split {
        SplitKind::Train => (&mut cfg.paths.train, "paths.train"),
        SplitKind::Dev => (&mut cfg.paths.dev, "paths.dev"),
        SplitKind::Test => (&mut cfg.paths.test, "paths.test"),
    };
    let data_path = set_path(slot, a.commongen, "--commongen", key)?;
    set(&mut cfg.k, a.k);
    set(&mut cfg.min_overlap, a.min_overlap);
    set(&mut cfg.seed, a.seed);
    cfg.fallback_on_scorer_failure |= a.fallback;
    cfg.validate()?;

    let mut inputs = vec![store_dir.clone(), index_path.clone(), data_path.clone()];
    let scorer = make_scorer(&a.scorer, cfg, &mut inputs)?;
    let mut manifest = Manifest::new("build-finetune", cfg).seed("retrieval", cfg.seed);
    let _lock = StoreLock::acquire(&store_dir)?;
    let store = load_store(&store_dir)?;
    let index = load_index(&index_path, &store)?;
    let entries = load_commongen(&data_path, lexicon())?;
    for p in &inputs {
        manifest.input(p)?;
    }
    let retriever = match &scorer {
        None => FinetuneRetriever::Matching { seed: cfg.seed },
        Some(s) => FinetuneRetriever::Ranked {
            scorer: s.as_ref(),
            max_candidates: cfg.max_candidates,
            fallback_seed: cfg.fallback_on_scorer_failure.then_some(cfg.seed),
        },
    };
    let config = FinetuneConfig {
        k: cfg.k,
        min_overlap: cfg.min_overlap,
        split,
    };
    let (examples, stats) = build_finetune(&entries, &store, &index, retriever, &config)?;
    write_dataset(&a.out, &examples, &stats, &mut manifest)
}

fn evaluate(a: EvaluateArgs, cfg: &mut PipelineConfig) -> Result<()> {
    let refs = set_path(
        &mut cfg.paths.dev,
        a.references,
        "--references",
        "paths.dev",
    )?;
    let mut report = metrics::evaluate(&a.predictions, &refs, lexicon())?;
    if a.summary_only {
        report.per_instance = None;
    }
    match a.out {
        None => {
            let mut text = serde_json::to_string_pretty(&report)?;
            text.push('\n');
            io::stdout().write_all(text.as_bytes())?;
        }
        Some(out) => {
            write_json(&out, &report)?;
            let mut manifest = Manifest::new("evaluate", cfg);
            manifest.input(&a.predictions)?;
            manifest.input(&refs)?;
            manifest.output(&out)?;
            manifest.write_beside(&out)?;
        }
    }
    Ok(())
}

fn score_request(
    model: &ScorerModel,
    concepts: &[String],
    sentence: &str,
) -> std::result::Result<f64, String> {
    let concepts = ConceptSet::new(concepts.iter().cloned()).map_err(|e| e.to_string())?;
    let record = SentenceRecord::from_text(sentence, lexicon());
    Ok(model.score_features(&extract_features(&concepts, &record).to_vec()))
}

fn serve_scorer(a: ServeScorerArgs, cfg: &mut PipelineConfig) -> Result<()> {
    let path = set_path(&mut cfg.paths.model, a.model, "--model", "paths.model")?;
    let model = Arc::new(
        FeatureScorer::new(ScorerModel::load(&path)?)?
            .model()
            .clone(),
    );
    let Some(addr) = a.listen else {
        let stdin = io::stdin();
        serve(stdin.lock(), io::stdout().lock(), |c, s| {
            score_request(&model, c, s)
        })?;
        return Ok(());
    };
    let listener = TcpListener::bind(&addr).with_context(|| format!("cannot listen on {addr}"))?;
    eprintln!("listening on {}", listener.local_addr()?);
    for stream in listener.incoming() {
        let stream = stream?;
        let model = Arc::clone(&model);
        std::thread::spawn(move || {
            let Ok(reader) = stream.try_clone() else {
                return;
            };
            let _ = serve(BufReader::new(reader), stream, |c, s| {
                score_request(&model, c, s)
            });
        });
    }
    Ok(())
}
