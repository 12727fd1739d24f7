use std::path::Path;

use serde::{Deserialize, Serialize};

use super::keywords::cluster_keywords;
use super::kmeans::{kmeans, ClusterReport, KMeansParams};
use super::linalg::Matrix;
use super::pca::pca;
use super::shift::{cluster_shift, ShiftReport};
use super::tsne::{tsne, TsneParams, TsneResult};
use super::{Condition, Document, TextError, VectorSet, VectorSource};
use crate::storage::DayRecord;

/// Space in which k-means runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterSpace {
    /// The TF-IDF or embedding vectors.
    #[default]
    Vectors,
    /// The 2-D t-SNE layout.
    Tsne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub kmeans: KMeansParams,
    pub top_m: usize,
    pub tsne: TsneParams,
    /// Reduce to this many principal components before t-SNE; `None` skips PCA.
    pub pca_dims: Option<usize>,
    pub cluster_space: ClusterSpace,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions { kmeans: KMeansParams::default(), top_m: 9, tsne: TsneParams::default(), pca_dims: Some(50), cluster_space: ClusterSpace::Vectors }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub doc_ids: Vec<String>,
    pub source: VectorSource,
    pub pca_explained_variance_ratio: Vec<f64>,
    pub pca_rank_deficient: bool,
    pub tsne: TsneResult,
    pub clusters: ClusterReport,
    /// Absent unless some persona has documents in both arms.
    pub shift: Option<ShiftReport>,
}

/// One document per agent-day with non-empty text.
pub fn documents_from_records(records: &[DayRecord], condition: Condition) -> Vec<Document> {
    records
        .iter()
        .filter_map(|r| {
            let parts: Vec<&str> = [&r.thoughts, &r.reflection, &r.journal].into_iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
            (!parts.is_empty()).then(|| Document {
                doc_id: format!("{}/r{}/d{}", r.run_id, r.repetition, r.day),
                run_id: r.run_id.clone(),
                persona: r.persona.clone(),
                day: r.day,
                condition,
                text: parts.join(" "),
            })
        })
        .collect()
}

/// Layout, clusters, keywords and arm shifts for a corpus and its vectors.
pub fn analyze(corpus: &[Document], vectors: &VectorSet, opts: &AnalysisOptions) -> Result<Analysis, TextError> {
    if corpus.len() != vectors.len() {
        return Err(TextError::InvalidArgument(format!("{} vectors for {} documents", vectors.len(), corpus.len())));
    }
    let (n, d) = (vectors.matrix.rows(), vectors.matrix.cols());
    let (layout_input, ratios, deficient) = match opts.pca_dims {
        Some(dims) if dims < d => {
            let reduced = pca(vectors, dims.min(n).max(1))?;
            (reduced.scores, reduced.explained_variance_ratio, reduced.rank_deficient)
        }
        _ => (vectors.matrix.clone(), Vec::new(), false),
    };
    let layout = tsne(&layout_input, &opts.tsne)?;
    let cluster_input: &Matrix = match opts.cluster_space {
        ClusterSpace::Vectors => &vectors.matrix,
        ClusterSpace::Tsne => &layout.coords,
    };
    let mut clusters = kmeans(cluster_input, &opts.kmeans)?;
    clusters.keywords = cluster_keywords(corpus, &clusters.labels, opts.top_m)?;
    let shift = match cluster_shift(&clusters.labels, corpus, clusters.k) {
        Ok(s) => Some(s),
        Err(TextError::MissingCondition { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(Analysis {
        doc_ids: corpus.iter().map(|d| d.doc_id.clone()).collect(),
        source: vectors.source.clone(),
        pca_explained_variance_ratio: ratios,
        pca_rank_deficient: deficient,
        tsne: layout,
        clusters,
        shift,
    })
}

/// Writes `doc_id,x,y,label` rows for plotting.
pub fn write_points_csv(path: &Path, analysis: &Analysis) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["doc_id", "x", "y", "label"])?;
    for (i, id) in analysis.doc_ids.iter().enumerate() {
        let p = analysis.tsne.coords.row(i);
        w.write_record([id.clone(), format!("{:.6}", p[0]), format!("{:.6}", p[1]), analysis.clusters.labels[i].to_string()])?;
    }
    w.flush()?;
    Ok(())
}
