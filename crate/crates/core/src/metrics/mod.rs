//! Corpus metrics for generated sentences. All text goes through
//! [`tokenize`](crate::textnorm::tokenize) first.

mod bleu;
mod cider;
mod rouge;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use bleu::{bleu4, bleu_stats, clipped_counts, BleuStats, MAX_ORDER};
pub use cider::{cider, cider_per_instance};
pub use rouge::{lcs_len, rouge_l};

use crate::corpus::{load_commongen, ConceptSet};
use crate::error::{Error, Result};
use crate::textnorm::{tokenize, LemmaLexicon};

pub const SPICE_NOTE: &str = "SPICE is not computed: it needs a scene-graph parser";

/// Fraction of concepts whose lemma occurs among the hypothesis token lemmas.
pub fn coverage<S: AsRef<str>>(
    hypothesis: &[S],
    concepts: &[String],
    lexicon: &LemmaLexicon,
) -> Result<f64> {
    if concepts.is_empty() {
        return Err(Error::EmptyConceptSet);
    }
    let lemmas: HashSet<String> = hypothesis
        .iter()
        .map(|t| lexicon.lemmatize(&t.as_ref().to_lowercase()))
        .collect();
    let wanted: BTreeSet<&str> = concepts.iter().map(String::as_str).collect();
    let hit = wanted.iter().filter(|c| lemmas.contains(**c)).count();
    Ok(hit as f64 / wanted.len() as f64)
}

/// One evaluated example.
#[derive(Debug, Clone)]
pub struct Instance {
    pub concepts: ConceptSet,
    pub prediction: String,
    pub references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceScores {
    pub key: String,
    pub rouge_l: f64,
    pub cider: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub instances: usize,
    pub bleu4: f64,
    pub rouge_l: f64,
    pub cider: f64,
    pub coverage: f64,
    pub spice: Option<f64>,
    pub spice_note: String,
    pub per_instance: Option<Vec<InstanceScores>>,
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    if n == 0 {
        0.0
    } else {
        values.sum::<f64>() / n as f64
    }
}

/// Scores a list of instances. BLEU is corpus-level; ROUGE-L, CIDEr and
/// coverage are per-instance means.
pub fn evaluate_instances(instances: &[Instance], lexicon: &LemmaLexicon) -> Result<MetricReport> {
    if instances.is_empty() {
        return Err(Error::EmptyInput("no instances to evaluate".to_string()));
    }
    let hyps: Vec<Vec<String>> = instances.iter().map(|i| tokenize(&i.prediction)).collect();
    let refs: Vec<Vec<Vec<String>>> = instances
        .iter()
        .map(|i| i.references.iter().map(|r| tokenize(r)).collect())
        .collect();

    let bleu = bleu4(&hyps, &refs)?;
    let ciders = cider_per_instance(&hyps, &refs)?;
    let mut per_instance = Vec::with_capacity(instances.len());
    for (i, inst) in instances.iter().enumerate() {
        per_instance.push(InstanceScores {
            key: inst.concepts.key(),
            rouge_l: rouge_l(&hyps[i], &refs[i]),
            cider: ciders[i],
            coverage: coverage(&hyps[i], inst.concepts.concepts(), lexicon)?,
        });
    }
    Ok(MetricReport {
        instances: instances.len(),
        bleu4: bleu,
        rouge_l: mean(per_instance.iter().map(|s| s.rouge_l)),
        cider: mean(per_instance.iter().map(|s| s.cider)),
        coverage: mean(per_instance.iter().map(|s| s.coverage)),
        spice: None,
        spice_note: SPICE_NOTE.to_string(),
        per_instance: Some(per_instance),
    })
}

#[derive(Deserialize)]
struct PredictionLine {
    concepts: Vec<String>,
    prediction: String,
}

pub fn load_predictions(path: &Path, lexicon: &LemmaLexicon) -> Result<Vec<(ConceptSet, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let index = out.len();
        let raw: PredictionLine = serde_json::from_str(&line).map_err(|e| Error::Schema {
            index,
            message: e.to_string(),
        })?;
        let concepts = ConceptSet::from_raw(&raw.concepts, lexicon).map_err(|e| Error::Schema {
            index,
            message: e.to_string(),
        })?;
        out.push((concepts, raw.prediction));
    }
    Ok(out)
}

/// Aligns predictions with references by concept-set key and scores them
/// in reference-file order.
pub fn evaluate(
    predictions: &Path,
    references: &Path,
    lexicon: &LemmaLexicon,
) -> Result<MetricReport> {
    let preds = load_predictions(predictions, lexicon)?;
    if preds.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{} has no predictions",
            predictions.display()
        )));
    }
    let refs = load_commongen(references, lexicon)?;

    let mut by_key: BTreeMap<String, String> = BTreeMap::new();
    let mut duplicates = Vec::new();
    for (concepts, text) in preds {
        let key = concepts.key();
        if by_key.insert(key.clone(), text).is_some() {
            duplicates.push(key);
        }
    }
    if !duplicates.is_empty() {
        return Err(Error::Usage(format!(
            "duplicate prediction keys: {}",
            duplicates.join(", ")
        )));
    }

    let mut instances = Vec::with_capacity(refs.len());
    let mut unmatched = Vec::new();
    for entry in refs {
        let key = entry.concept_set.key();
        match by_key.remove(&key) {
            Some(prediction) if !entry.targets.is_empty() => instances.push(Instance {
                concepts: entry.concept_set,
                prediction,
                references: entry.targets,
            }),
            _ => unmatched.push(key),
        }
    }
    unmatched.extend(by_key.into_keys());
    if !unmatched.is_empty() {
        unmatched.sort();
        return Err(Error::UnmatchedKeys(unmatched));
    }
    evaluate_instances(&instances, lexicon)
}
