use std::io::Write;
use std::path::Path;

use agentlab_core::text::{analyze, documents_from_records, tfidf_matrix, Analysis, ClusterSpace, Condition, Document, EmbeddingClient};
use serde::Serialize;

use super::{create_dir, load_runs};
use crate::config::CliConfig;
use crate::error::CliError;
use crate::svg::{Figure, Panel, PanelBody};
use crate::{AnalyzeArgs, ClusterSpaceArg, VectorMode};

pub const POINTS_FILE: &str = "points.csv";

/// One point of the 2-D layout, as written to `points.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Point {
    pub doc_id: String,
    pub run_id: String,
    pub persona: String,
    pub condition: String,
    pub x: f64,
    pub y: f64,
    pub cluster: usize,
}

/// Analysis results keyed for JSON output; the layout itself is in `points.csv`.
#[derive(Serialize)]
struct Summary<'a> {
    documents: usize,
    dimensions: usize,
    source: &'a agentlab_core::text::VectorSource,
    pca_explained_variance_ratio: &'a [f64],
    pca_rank_deficient: bool,
    perplexity_used: f64,
    kl_trace: &'a [(usize, f64)],
    k: usize,
    cluster_sizes: Vec<usize>,
    inertia: f64,
    kmeans_iterations: usize,
    keywords: &'a [agentlab_core::text::ClusterKeywords],
    shift: &'a Option<agentlab_core::text::ShiftReport>,
}

pub struct AnalyzeOutput {
    pub corpus: Vec<Document>,
    pub analysis: Analysis,
    pub points: Vec<Point>,
}

/// Scatter of the layout colored by cluster, and by persona and arm.
pub fn tsne_figure(points: &[Point]) -> Figure {
    let mut clusters: Vec<usize> = points.iter().map(|p| p.cluster).collect();
    clusters.sort_unstable();
    clusters.dedup();
    let mut arms: Vec<String> = points.iter().map(|p| format!("{} / {}", p.persona, p.condition)).collect();
    arms.sort();
    arms.dedup();
    let by_cluster = points.iter().map(|p| (p.x, p.y, clusters.binary_search(&p.cluster).unwrap_or(0))).collect();
    let by_arm = points.iter().map(|p| (p.x, p.y, arms.binary_search(&format!("{} / {}", p.persona, p.condition)).unwrap_or(0))).collect();
    Figure {
        title: "t-SNE layout of agent transcripts".into(),
        columns: 2,
        panels: vec![
            Panel {
                title: "k-means clusters".into(),
                x_label: "t-SNE 1".into(),
                y_label: "t-SNE 2".into(),
                body: PanelBody::Scatter { points: by_cluster, groups: clusters.iter().map(|c| format!("cluster {c}")).collect() },
            },
            Panel { title: "persona / arm".into(), x_label: "t-SNE 1".into(), y_label: "t-SNE 2".into(), body: PanelBody::Scatter { points: by_arm, groups: arms } },
        ],
    }
}

pub fn read_points(path: &Path) -> Result<Vec<Point>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| CliError::io(path, e))).collect()
}

fn write_points(path: &Path, points: &[Point]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["doc_id", "run_id", "persona", "condition", "x", "y", "cluster"])?;
    for p in points {
        w.write_record([p.doc_id.clone(), p.run_id.clone(), p.persona.clone(), p.condition.clone(), format!("{:.6}", p.x), format!("{:.6}", p.y), p.cluster.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn write_keywords(path: &Path, analysis: &Analysis) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["cluster", "size", "rank", "term", "score"])?;
    for ck in &analysis.clusters.keywords {
        for (rank, t) in ck.terms.iter().enumerate() {
            w.write_record([ck.cluster.to_string(), ck.size.to_string(), (rank + 1).to_string(), t.term.clone(), format!("{:.6}", t.score)])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_shift(path: &Path, analysis: &Analysis) -> Result<(), CliError> {
    let Some(shift) = &analysis.shift else { return Ok(()) };
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["persona".to_string(), "row".to_string(), "n_docs".to_string()];
    header.extend((0..shift.k).map(|c| format!("cluster_{c}")));
    w.write_record(&header)?;
    for h in &shift.histograms {
        let mut row = vec![h.persona.clone(), h.condition.to_string(), h.n_docs.to_string()];
        row.extend(h.frequencies.iter().map(|f| format!("{f:.6}")));
        w.write_record(&row)?;
    }
    for p in &shift.personas {
        let mut row = vec![p.persona.clone(), "delta".to_string(), String::new()];
        row.extend(p.delta.iter().map(|f| format!("{f:.6}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(config: &CliConfig, args: &AnalyzeArgs, out: &mut dyn Write) -> Result<AnalyzeOutput, CliError> {
    let runs = load_runs(&args.runs)?;
    let mut corpus = Vec::new();
    for run in &runs {
        let condition = if run.manifest.spec.intervention.is_empty() { Condition::Normal } else { Condition::Blackout };
        corpus.extend(documents_from_records(&run.records, condition));
    }
    if corpus.is_empty() {
        return Err(CliError::Data("the runs contain no agent text (benchmark runs have none)".into()));
    }

    let mut opts = config.analysis_options();
    if let Some(k) = args.k {
        opts.kmeans.k = k;
    }
    if let Some(p) = args.perplexity {
        opts.tsne.perplexity = p;
    }
    if let Some(i) = args.iterations {
        opts.tsne.iterations = i;
    }
    opts.cluster_space = match args.cluster_space {
        ClusterSpaceArg::Vectors => ClusterSpace::Vectors,
        ClusterSpaceArg::Tsne => ClusterSpace::Tsne,
    };
    if opts.kmeans.k == 0 || opts.kmeans.k > corpus.len() {
        return Err(CliError::Config(format!("k = {} must be between 1 and the number of documents ({})", opts.kmeans.k, corpus.len())));
    }

    let vectors = match args.mode {
        VectorMode::Tfidf => tfidf_matrix(&corpus)?,
        VectorMode::Embed => EmbeddingClient::from_env(&config.backend.base_url, config.backend.embedding_model.clone())?.embed_corpus(&corpus)?,
    };
    let analysis = analyze(&corpus, &vectors, &opts)?;

    let dir = args.out.clone().unwrap_or_else(|| config.output_dir.join("analysis"));
    create_dir(&dir)?;
    let points: Vec<Point> = corpus
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let p = analysis.tsne.coords.row(i);
            Point { doc_id: d.doc_id.clone(), run_id: d.run_id.clone(), persona: d.persona.clone(), condition: d.condition.to_string(), x: p[0], y: p[1], cluster: analysis.clusters.labels[i] }
        })
        .collect();
    write_points(&dir.join(POINTS_FILE), &points)?;
    write_keywords(&dir.join("keywords.csv"), &analysis)?;
    write_shift(&dir.join("shift.csv"), &analysis)?;
    let summary = Summary {
        documents: corpus.len(),
        dimensions: vectors.matrix.cols(),
        source: &analysis.source,
        pca_explained_variance_ratio: &analysis.pca_explained_variance_ratio,
        pca_rank_deficient: analysis.pca_rank_deficient,
        perplexity_used: analysis.tsne.perplexity_used,
        kl_trace: &analysis.tsne.kl_trace,
        k: analysis.clusters.k,
        cluster_sizes: analysis.clusters.sizes(),
        inertia: analysis.clusters.inertia,
        kmeans_iterations: analysis.clusters.iterations,
        keywords: &analysis.clusters.keywords,
        shift: &analysis.shift,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Data(e.to_string()))?;
    std::fs::write(dir.join("analysis.json"), json + "\n")?;
    std::fs::write(dir.join("tsne.svg"), tsne_figure(&points).render())?;

    writeln!(out, "{} documents from {} runs, {} dimensions", corpus.len(), runs.len(), vectors.matrix.cols())?;
    if let Some(kl) = analysis.tsne.kl_trace.last() {
        writeln!(out, "t-SNE perplexity {:.1}, KL {:.4} at iteration {}", analysis.tsne.perplexity_used, kl.1, kl.0)?;
    }
    for ck in &analysis.clusters.keywords {
        let terms: Vec<&str> = ck.terms.iter().map(|t| t.term.as_str()).collect();
        writeln!(out, "cluster {} ({} docs): {}", ck.cluster, ck.size, terms.join(", "))?;
    }
    match &analysis.shift {
        Some(shift) => {
            for p in &shift.personas {
                writeln!(out, "{}: dominant cluster {} -> {} (delta {:+.3})", p.persona, p.dominant_normal, p.dominant_blackout, p.dominant_delta)?;
            }
        }
        None => writeln!(out, "no persona has both blackout and normal runs; shift report skipped")?,
    }
    writeln!(out, "output: {}", dir.display())?;
    Ok(AnalyzeOutput { corpus, analysis, points })
}
