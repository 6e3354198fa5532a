//! CIDEr: per-order tf-idf cosine between a hypothesis and each of its
//! references, averaged over references and over orders 1..=4, times 10.
//! Document frequency counts the instances whose reference set contains an
//! n-gram; idf is `ln(N / max(df, 1))`.

use std::collections::HashMap;

use rayon::prelude::*;

use super::bleu::{ngram_counts, MAX_ORDER};
use crate::error::{Error, Result};

type Vector<'a> = HashMap<Vec<&'a str>, f64>;

fn tfidf<'a>(
    counts: HashMap<Vec<&'a str>, usize>,
    df: &HashMap<Vec<&'a str>, usize>,
    log_n: f64,
) -> Vector<'a> {
    counts
        .into_iter()
        .map(|(g, c)| {
            let d = df.get(&g).copied().unwrap_or(0).max(1) as f64;
            (g, c as f64 * (log_n - d.ln()))
        })
        .collect()
}

fn cosine(a: &Vector<'_>, b: &Vector<'_>) -> f64 {
    let norm = |v: &Vector<'_>| v.values().map(|x| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small
        .iter()
        .filter_map(|(g, x)| large.get(g).map(|y| x * y))
        .sum();
    dot / (na * nb)
}

/// Per-instance CIDEr scores.
pub fn cider_per_instance<S: AsRef<str> + Sync>(
    hypotheses: &[Vec<S>],
    references: &[Vec<Vec<S>>],
) -> Result<Vec<f64>> {
    if hypotheses.len() != references.len() {
        return Err(Error::LengthMismatch {
            what: "CIDEr references",
            expected: hypotheses.len(),
            found: references.len(),
        });
    }
    let n_docs = hypotheses.len();
    if n_docs < 2 {
        return Err(Error::CorpusTooSmall(n_docs));
    }
    let log_n = (n_docs as f64).ln();

    let mut df: Vec<HashMap<Vec<&str>, usize>> = vec![HashMap::new(); MAX_ORDER];
    for refs in references {
        for (n, table) in df.iter_mut().enumerate() {
            let mut present: Vec<Vec<&str>> = refs
                .iter()
                .flat_map(|r| ngram_counts(r, n + 1).into_keys())
                .collect();
            present.sort_unstable();
            present.dedup();
            for g in present {
                *table.entry(g).or_insert(0) += 1;
            }
        }
    }

    Ok(hypotheses
        .par_iter()
        .zip(references.par_iter())
        .map(|(hyp, refs)| {
            let mut total = 0.0;
            for (n, table) in df.iter().enumerate() {
                let h = tfidf(ngram_counts(hyp, n + 1), table, log_n);
                let sims: f64 = refs
                    .iter()
                    .map(|r| cosine(&h, &tfidf(ngram_counts(r, n + 1), table, log_n)))
                    .sum();
                if !refs.is_empty() {
                    total += sims / refs.len() as f64;
                }
            }
            10.0 * total / MAX_ORDER as f64
        })
        .collect())
}

/// Corpus CIDEr: mean of the per-instance scores.
pub fn cider<S: AsRef<str> + Sync>(
    hypotheses: &[Vec<S>],
    references: &[Vec<Vec<S>>],
) -> Result<f64> {
    let scores = cider_per_instance(hypotheses, references)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
