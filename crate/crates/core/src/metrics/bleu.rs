use std::collections::HashMap;

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 4;

pub(crate) fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for window in tokens.windows(n) {
        let key: Vec<&str> = window.iter().map(AsRef::as_ref).collect();
        *counts.entry(key).or_insert(0) += 1;
    }
    counts
}

/// Clipped n-gram matches of `hypothesis` against the references, and the
/// hypothesis n-gram total.
pub fn clipped_counts<S: AsRef<str>>(
    hypothesis: &[S],
    references: &[Vec<S>],
    n: usize,
) -> (usize, usize) {
    let hyp = ngram_counts(hypothesis, n);
    let mut max_ref: HashMap<Vec<&str>, usize> = HashMap::new();
    for r in references {
        for (g, c) in ngram_counts(r, n) {
            let slot = max_ref.entry(g).or_insert(0);
            *slot = (*slot).max(c);
        }
    }
    let clipped = hyp
        .iter()
        .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
        .sum();
    (clipped, hypothesis.len().saturating_sub(n - 1))
}

/// Corpus-level sufficient statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub clipped: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    pub fn precisions(&self) -> [f64; MAX_ORDER] {
        std::array::from_fn(|i| {
            if self.totals[i] == 0 {
                0.0
            } else {
                self.clipped[i] as f64 / self.totals[i] as f64
            }
        })
    }

    pub fn brevity_penalty(&self) -> f64 {
        if self.hyp_len == 0 {
            0.0
        } else if self.hyp_len > self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        }
    }

    /// Uniform-weight geometric mean of the four precisions times the
    /// brevity penalty; zero if any order has no match.
    pub fn score(&self) -> f64 {
        let p = self.precisions();
        if p.contains(&0.0) {
            return 0.0;
        }
        let log_mean = p.iter().map(|x| x.ln()).sum::<f64>() / MAX_ORDER as f64;
        self.brevity_penalty() * log_mean.exp()
    }
}

// Reference length closest to the hypothesis length, shorter on ties.
fn closest_ref_len<S>(hyp_len: usize, references: &[Vec<S>]) -> usize {
    references
        .iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(hyp_len), r))
        .unwrap_or(0)
}

pub fn bleu_stats<S: AsRef<str>>(
    hypotheses: &[Vec<S>],
    references: &[Vec<Vec<S>>],
) -> Result<BleuStats> {
    if hypotheses.len() != references.len() {
        return Err(Error::LengthMismatch {
            what: "BLEU references",
            expected: hypotheses.len(),
            found: references.len(),
        });
    }
    let mut stats = BleuStats::default();
    for (i, (hyp, refs)) in hypotheses.iter().zip(references).enumerate() {
        if refs.is_empty() {
            return Err(Error::Schema {
                index: i,
                message: "instance has no references".to_string(),
            });
        }
        for n in 1..=MAX_ORDER {
            let (c, t) = clipped_counts(hyp, refs, n);
            stats.clipped[n - 1] += c;
            stats.totals[n - 1] += t;
        }
        stats.hyp_len += hyp.len();
        stats.ref_len += closest_ref_len(hyp.len(), refs);
    }
    Ok(stats)
}

/// Corpus BLEU-4, unsmoothed.
pub fn bleu4<S: AsRef<str>>(hypotheses: &[Vec<S>], references: &[Vec<Vec<S>>]) -> Result<f64> {
    Ok(bleu_stats(hypotheses, references)?.score())
}
