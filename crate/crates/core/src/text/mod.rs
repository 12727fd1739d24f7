//! Transcript analytics: vectorization, PCA, exact t-SNE, k-means, cluster
//! keywords and treatment/control cluster shifts.

mod embed;
mod kmeans;
mod keywords;
mod linalg;
mod metrics;
mod pca;
mod pipeline;
mod shift;
mod tfidf;
mod tokenize;
mod tsne;

pub use embed::{EmbeddingClient, EMBEDDINGS_PATH};
pub use kmeans::{kmeans, ClusterReport, KMeansParams};
pub use keywords::{cluster_keywords, ClusterKeywords};
pub use linalg::Matrix;
pub use metrics::adjusted_rand_index;
pub use pca::{pca, PcaResult};
pub use pipeline::{analyze, documents_from_records, write_points_csv, Analysis, AnalysisOptions, ClusterSpace};
pub use shift::{cluster_shift, ArmHistogram, PersonaShift, ShiftReport};
pub use tfidf::tfidf_matrix;
pub use tokenize::{stopwords, tokenize, STOPWORDS_VERSION};
pub use tsne::{tsne, TsneParams, TsneResult};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::backend::BackendError;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("no document contains a usable token")]
    EmptyVocabulary,
    #[error("t-SNE needs at least 5 points, got {0}")]
    TooFewPoints(usize),
    #[error("persona {persona} has no {missing} documents")]
    MissingCondition { persona: String, missing: Condition },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("matrix contains a non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Normal,
    Blackout,
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Condition::Normal => "normal",
            Condition::Blackout => "blackout",
        })
    }
}

/// One agent-day of text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub run_id: String,
    pub persona: String,
    pub day: u32,
    pub condition: Condition,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VectorSource {
    TfIdf,
    ExternalEmbedding { model: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorSet {
    pub matrix: Matrix,
    /// Column terms in TF-IDF mode.
    pub vocab: Option<Vec<String>>,
    pub source: VectorSource,
}

impl VectorSet {
    pub fn new(matrix: Matrix, vocab: Option<Vec<String>>, source: VectorSource) -> Result<VectorSet, TextError> {
        matrix.check_finite()?;
        Ok(VectorSet { matrix, vocab, source })
    }

    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.rows() == 0
    }
}
