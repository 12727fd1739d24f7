use serde::{Deserialize, Serialize};

use super::tfidf::tfidf_matrix;
use super::{Document, TextError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordScore {
    pub term: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterKeywords {
    pub cluster: usize,
    pub size: usize,
    pub terms: Vec<KeywordScore>,
}

/// Top `top_m` terms per non-empty cluster by mean TF-IDF weight over the
/// cluster's documents; ties go to the lexicographically smaller term.
pub fn cluster_keywords(corpus: &[Document], labels: &[usize], top_m: usize) -> Result<Vec<ClusterKeywords>, TextError> {
    if corpus.len() != labels.len() {
        return Err(TextError::InvalidArgument(format!("{} labels for {} documents", labels.len(), corpus.len())));
    }
    let vectors = tfidf_matrix(corpus)?;
    let vocab = vectors.vocab.as_ref().expect("tf-idf has a vocabulary");
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sums = vec![vec![0.0; vocab.len()]; k];
    let mut sizes = vec![0usize; k];
    for (row, &l) in vectors.matrix.iter_rows().zip(labels) {
        sizes[l] += 1;
        sums[l].iter_mut().zip(row).for_each(|(s, w)| *s += w);
    }
    Ok((0..k)
        .filter(|&c| sizes[c] > 0)
        .map(|c| {
            let mut terms: Vec<KeywordScore> = sums[c]
                .iter()
                .zip(vocab)
                .filter(|(s, _)| **s > 0.0)
                .map(|(s, t)| KeywordScore { term: t.clone(), score: s / sizes[c] as f64 })
                .collect();
            terms.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.term.cmp(&b.term)));
            terms.truncate(top_m);
            ClusterKeywords { cluster: c, size: sizes[c], terms }
        })
        .collect())
}
