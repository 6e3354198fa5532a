/// Longest common subsequence length, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<S: AsRef<str>>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 (beta = 1), maximised over references.
pub fn rouge_l<S: AsRef<str>>(hypothesis: &[S], references: &[Vec<S>]) -> f64 {
    if hypothesis.is_empty() {
        return 0.0;
    }
    references
        .iter()
        .map(|r| {
            let lcs = lcs_len(hypothesis, r);
            if lcs == 0 {
                return 0.0;
            }
            let p = lcs as f64 / hypothesis.len() as f64;
            let rec = lcs as f64 / r.len() as f64;
            2.0 * p * rec / (p + rec)
        })
        .fold(0.0, f64::max)
}
