use std::collections::BTreeMap;

use super::linalg::Matrix;
use super::tokenize::tokenize;
use super::{Document, TextError, VectorSet, VectorSource};

/// Raw-count tf, smoothed idf `ln((1+N)/(1+df)) + 1`, L2-normalized rows.
/// Columns follow lexicographic term order.
pub fn tfidf_matrix(corpus: &[Document]) -> Result<VectorSet, TextError> {
    if corpus.is_empty() {
        return Err(TextError::EmptyCorpus);
    }
    let tokens: Vec<Vec<String>> = corpus.iter().map(|d| tokenize(&d.text)).collect();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in &tokens {
        let mut seen: Vec<&str> = doc.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_default() += 1;
        }
    }
    if df.is_empty() {
        return Err(TextError::EmptyVocabulary);
    }
    let n = corpus.len() as f64;
    let column: BTreeMap<&str, usize> = df.keys().enumerate().map(|(i, t)| (*t, i)).collect();
    let idf: Vec<f64> = df.values().map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect();

    let mut m = Matrix::zeros(corpus.len(), df.len());
    for (i, doc) in tokens.iter().enumerate() {
        let row = m.row_mut(i);
        for t in doc {
            row[column[t.as_str()]] += 1.0;
        }
        for (j, w) in row.iter_mut().enumerate() {
            *w *= idf[j];
        }
        let norm = row.iter().map(|w| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|w| *w /= norm);
        }
    }
    let vocab = df.keys().map(|t| t.to_string()).collect();
    VectorSet::new(m, Some(vocab), VectorSource::TfIdf)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::text::Condition;

    pub(crate) fn doc(i: usize, text: &str) -> Document {
        Document {
            doc_id: format!("d{i}"),
            run_id: "r".into(),
            persona: "thinker".into(),
            day: 1,
            condition: Condition::Normal,
            text: text.into(),
        }
    }

    #[test]
    fn disjoint_vocabulary_gets_zero_weight() {
        let v = tfidf_matrix(&[doc(0, "profit profit"), doc(1, "feelings")]).unwrap();
        let vocab = v.vocab.as_ref().unwrap();
        let p = vocab.iter().position(|t| t == "profit").unwrap();
        assert!(v.matrix.get(0, p) > 0.0);
        assert_eq!(v.matrix.get(1, p), 0.0);
    }

    #[test]
    fn identical_documents_have_identical_rows() {
        let v = tfidf_matrix(&[doc(0, "sell high buy low"), doc(1, "sell high buy low"), doc(2, "reserve")]).unwrap();
        assert_eq!(v.matrix.row(0), v.matrix.row(1));
        let cos: f64 = v.matrix.row(0).iter().zip(v.matrix.row(1)).map(|(a, b)| a * b).sum();
        assert!((cos - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_stopwords_is_empty_vocabulary() {
        assert!(matches!(tfidf_matrix(&[doc(0, "the a of"), doc(1, "and")]), Err(TextError::EmptyVocabulary)));
        assert!(matches!(tfidf_matrix(&[]), Err(TextError::EmptyCorpus)));
    }
}
