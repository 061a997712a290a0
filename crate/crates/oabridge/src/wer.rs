//! Word error rate scoring.
//!
//! Minimum-edit-distance alignment with unit costs, plus the deliberately
//! minimal text normalizer applied to both references and hypotheses. The
//! normalizer is part of the scoring contract: absolute WERs are only
//! comparable between runs that used the same one.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WerError {
    #[error("reference token list is empty; WER is undefined")]
    EmptyReference,
}

/// Error counts from one alignment (or a sum of several).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WerBreakdown {
    pub wer: f64,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub ref_words: usize,
}

impl WerBreakdown {
    /// Recomputes the rate from summed counts; used when aggregating
    /// per-utterance breakdowns into a condition-level figure.
    pub fn from_counts(substitutions: usize, deletions: usize, insertions: usize, ref_words: usize) -> Self {
        let wer = if ref_words == 0 {
            0.0
        } else {
            (substitutions + deletions + insertions) as f64 / ref_words as f64
        };
        Self { wer, substitutions, deletions, insertions, ref_words }
    }
}

/// Lowercases, strips everything except letters, digits, apostrophes, and
/// whitespace, then splits on whitespace runs.
pub fn normalize_text(s: &str) -> Vec<String> {
    s.to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || *c == '\'' || c.is_whitespace())
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

/// Word error rate `(S + D + I) / N` from a minimum-edit alignment.
///
/// Ties in the DP table are broken in favor of match/substitution, then
/// deletion, then insertion; the total edit count always equals the
/// Levenshtein distance, only the S/D/I split depends on the tie-break.
pub fn wer<R: AsRef<str>, H: AsRef<str>>(ref_tokens: &[R], hyp_tokens: &[H]) -> Result<WerBreakdown, WerError> {
    if ref_tokens.is_empty() {
        return Err(WerError::EmptyReference);
    }
    let n = ref_tokens.len();
    let m = hyp_tokens.len();

    // dist[i][j]: edit distance between ref[..i] and hyp[..j].
    let mut dist = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in dist.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        dist[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub_cost = usize::from(ref_tokens[i - 1].as_ref() != hyp_tokens[j - 1].as_ref());
            dist[i][j] = (dist[i - 1][j - 1] + sub_cost)
                .min(dist[i - 1][j] + 1)
                .min(dist[i][j - 1] + 1);
        }
    }

    let (mut substitutions, mut deletions, mut insertions) = (0usize, 0usize, 0usize);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let sub_cost = usize::from(ref_tokens[i - 1].as_ref() != hyp_tokens[j - 1].as_ref());
            if dist[i][j] == dist[i - 1][j - 1] + sub_cost {
                substitutions += sub_cost;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dist[i][j] == dist[i - 1][j] + 1 {
            deletions += 1;
            i -= 1;
        } else {
            insertions += 1;
            j -= 1;
        }
    }

    Ok(WerBreakdown::from_counts(substitutions, deletions, insertions, n))
}
