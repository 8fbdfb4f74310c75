//! End-to-end diffusion run: window matrices, normalized nonsmooth NMF,
//! topic alignment, per-term posteriors, prefix divergence series and term
//! classification, plus the report files.
//!
//! For a run over `t` windows each term gets one divergence value per prefix
//! `m = 2..t`, computed over its first `m` aligned posteriors with equal
//! weights and compared against the threshold for `(k, m, alpha)`. Only the
//! final prefix decides convergent versus divergent.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{align_chain_with_audit, AlignmentError, AlignmentRecord};
use crate::corpus::{build_matrix, cumulative_windows, CorpusError, Dictionary, Document, Weighting, WindowPlan};
use crate::divergence::{gjs, gjs_threshold, uniform_weights, DivergenceError, ProbDist, ThresholdParams};
use crate::factorization::{fit, normalize, FitError, FitOptions, NormalizedModel};
use crate::posterior::{term_posterior, topic_prior, AssociationConfig, PosteriorError, TermPosterior};

pub const ARTIFACT_NAME: &str = env!("CARGO_PKG_NAME");
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("window {window}: {source}")]
    Fit {
        window: String,
        #[source]
        source: FitError,
    },
    #[error("window {window}: {source}")]
    Posterior {
        window: String,
        #[source]
        source: PosteriorError,
    },
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
    #[error("term {term}: posterior in window {window} is unsupported")]
    Unsupported { term: usize, window: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl PipelineError {
    /// Name of the stage that failed, for diagnostics.
    pub fn stage(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Corpus(_) => "corpus",
            Self::Fit { .. } => "factorization",
            Self::Posterior { .. } => "posterior",
            Self::Alignment(_) => "alignment",
            Self::Divergence(_) | Self::Unsupported { .. } => "divergence",
            Self::Io { .. } => "reports",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub fit: FitOptions,
    pub alpha: f64,
    pub epsilon: f64,
    pub windows: WindowPlan,
    pub weighting: Weighting,
    pub broadness_min_topics: usize,
    pub top_n: usize,
}

impl RunConfig {
    /// Defaults: k = 10, theta = 0.4, alpha = 0.01, tf-idf weighting.
    pub fn new(windows: WindowPlan) -> Self {
        Self {
            fit: FitOptions::default(),
            alpha: 0.01,
            epsilon: 1e-6,
            windows,
            weighting: Weighting::Tfidf,
            broadness_min_topics: 3,
            top_n: 10,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.fit
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.fit.k < 2 {
            return Err(PipelineError::Config("k must be at least 2".into()));
        }
        ThresholdParams::new(self.fit.k, self.windows.len(), self.alpha)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        AssociationConfig::new(self.epsilon).map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    fn association(&self) -> AssociationConfig {
        AssociationConfig::new(self.epsilon).expect("validated")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrefixRecord {
    pub prefix_m: usize,
    pub gjs: f64,
    pub threshold: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSeries {
    pub term: usize,
    pub records: Vec<PrefixRecord>,
    pub supported_windows: usize,
}

impl DiffusionSeries {
    pub fn final_record(&self) -> Option<&PrefixRecord> {
        self.records.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Broadness {
    Broad,
    Narrow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convergence {
    Convergent,
    Divergent,
}

impl std::fmt::Display for Broadness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Broad => "broad",
            Self::Narrow => "narrow",
        })
    }
}

impl std::fmt::Display for Convergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Convergent => "convergent",
            Self::Divergent => "divergent",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermClassification {
    pub term: usize,
    pub broadness: Broadness,
    pub convergence: Convergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedTerm {
    pub term: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub label: String,
    pub cutoff: NaiveDate,
    pub documents: usize,
    pub iterations: usize,
    pub final_objective: f64,
    pub model_file: String,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: RunConfig,
    pub terms: Vec<String>,
    pub windows: Vec<WindowSummary>,
    /// Aligned models, one per window.
    pub models: Vec<NormalizedModel>,
    pub alignment: Vec<AlignmentRecord>,
    /// `posteriors[window][term]`.
    pub posteriors: Vec<Vec<TermPosterior>>,
    pub series: Vec<DiffusionSeries>,
    pub classifications: Vec<TermClassification>,
    pub excluded: Vec<ExcludedTerm>,
}

fn prefix_thresholds(k: usize, t: usize, alpha: f64) -> Result<Vec<f64>, DivergenceError> {
    (2..=t)
        .map(|m| gjs_threshold(ThresholdParams::new(k, m, alpha)?))
        .collect()
}

fn diffusion_with_thresholds(
    posteriors: &[&TermPosterior],
    k: usize,
    thresholds: &[f64],
) -> Result<DiffusionSeries, PipelineError> {
    let term = posteriors.first().map_or(0, |p| p.term);
    let dists = posteriors
        .iter()
        .map(|p| {
            let dist = p.dist.as_ref().ok_or_else(|| PipelineError::Unsupported {
                term: p.term,
                window: p.window_label.clone(),
            })?;
            Ok(ProbDist::new(dist.clone())?)
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    if dists.len() < 2 {
        return Err(PipelineError::Config(
            "at least two posteriors are needed for a diffusion series".into(),
        ));
    }
    let records = (2..=dists.len())
        .map(|m| {
            let value = gjs(&dists[..m], &uniform_weights(m), k)?.value;
            let threshold = thresholds[m - 2];
            Ok(PrefixRecord {
                prefix_m: m,
                gjs: value,
                threshold,
                significant: value > threshold,
            })
        })
        .collect::<Result<Vec<_>, DivergenceError>>()?;
    Ok(DiffusionSeries {
        term,
        records,
        supported_windows: dists.len(),
    })
}

/// Prefix divergence series of one term's aligned per-window posteriors.
pub fn term_diffusion(
    posteriors: &[&TermPosterior],
    k: usize,
    alpha: f64,
) -> Result<DiffusionSeries, PipelineError> {
    let thresholds = prefix_thresholds(k, posteriors.len().max(2), alpha)?;
    diffusion_with_thresholds(posteriors, k, &thresholds)
}

/// Broad when the mean number of topics above `epsilon` reaches
/// `broadness_min_topics`; divergent when the final prefix is significant.
pub fn classify(
    series: &DiffusionSeries,
    posteriors: &[&TermPosterior],
    config: &RunConfig,
) -> TermClassification {
    let supported: Vec<&Vec<f64>> = posteriors.iter().filter_map(|p| p.dist.as_ref()).collect();
    let mean_topics = if supported.is_empty() {
        0.0
    } else {
        supported
            .iter()
            .map(|d| d.iter().filter(|&&v| v > config.epsilon).count() as f64)
            .sum::<f64>()
            / supported.len() as f64
    };
    let broadness = if mean_topics >= config.broadness_min_topics as f64 {
        Broadness::Broad
    } else {
        Broadness::Narrow
    };
    let convergence = match series.final_record() {
        Some(r) if r.significant => Convergence::Divergent,
        _ => Convergence::Convergent,
    };
    TermClassification {
        term: series.term,
        broadness,
        convergence,
    }
}

/// The `n` highest-weight terms of `topic`, descending, ties by dictionary
/// order. Zero-weight terms are never listed.
pub fn top_terms(model: &NormalizedModel, topic: usize, n: usize) -> Option<Vec<(usize, f64)>> {
    if topic >= model.k() {
        return None;
    }
    if model.empty_topics.contains(&topic) {
        return Some(Vec::new());
    }
    let row = model.h_hat.row(topic);
    let mut ranked: Vec<(usize, f64)> = row
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, w)| w > 0.0)
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(n);
    Some(ranked)
}

fn model_file_name(index: usize) -> String {
    format!("models/window_{index:02}.json")
}

pub fn run(docs: &[Document], dict: &Dictionary, config: &RunConfig) -> Result<RunResult, PipelineError> {
    config.validate()?;
    let windows = cumulative_windows(docs, &config.windows)?;
    let k = config.fit.k;
    let assoc = config.association();

    let fitted = windows
        .par_iter()
        .map(|(label, subset)| {
            let matrix = build_matrix(subset, dict, config.weighting, label)?;
            let model = fit(&matrix, &config.fit).map_err(|source| PipelineError::Fit {
                window: label.clone(),
                source,
            })?;
            Ok((normalize(&model, label), model.iterations_run, model.objective_trace.last().copied().unwrap_or(0.0)))
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;

    let summaries: Vec<WindowSummary> = windows
        .iter()
        .zip(&fitted)
        .zip(config.windows.boundaries())
        .enumerate()
        .map(|(i, (((label, subset), (_, iterations, objective)), cutoff))| WindowSummary {
            label: label.clone(),
            cutoff: *cutoff,
            documents: subset.len(),
            iterations: *iterations,
            final_objective: *objective,
            model_file: model_file_name(i),
        })
        .collect();
    let normalized: Vec<NormalizedModel> = fitted.into_iter().map(|(m, _, _)| m).collect();
    let (models, alignment) = align_chain_with_audit(&normalized)?;

    let posteriors = models
        .iter()
        .map(|model| {
            let label = &model.window_label;
            let wrap = |source| PipelineError::Posterior {
                window: label.clone(),
                source,
            };
            let prior = topic_prior(&model.w, &assoc).map_err(wrap)?;
            (0..dict.len())
                .map(|i| term_posterior(&model.h_hat, &prior, i, label, &assoc).map_err(wrap))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;

    let thresholds = prefix_thresholds(k, models.len(), config.alpha)?;
    let outcomes = (0..dict.len())
        .into_par_iter()
        .map(|i| {
            let per_window: Vec<&TermPosterior> = posteriors.iter().map(|w| &w[i]).collect();
            let missing: Vec<&str> = per_window
                .iter()
                .filter(|p| !p.is_supported())
                .map(|p| p.window_label.as_str())
                .collect();
            if !missing.is_empty() {
                return Ok(Err(ExcludedTerm {
                    term: dict.terms()[i].clone(),
                    reason: format!(
                        "insufficient support: supported in {} of {} windows (unsupported in {})",
                        per_window.len() - missing.len(),
                        per_window.len(),
                        missing.join(", ")
                    ),
                }));
            }
            let series = diffusion_with_thresholds(&per_window, k, &thresholds)?;
            let class = classify(&series, &per_window, config);
            Ok(Ok((series, class)))
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;

    let mut series = Vec::new();
    let mut classifications = Vec::new();
    let mut excluded = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok((s, c)) => {
                series.push(s);
                classifications.push(c);
            }
            Err(e) => excluded.push(e),
        }
    }

    Ok(RunResult {
        config: config.clone(),
        terms: dict.terms().to_vec(),
        windows: summaries,
        models,
        alignment,
        posteriors,
        series,
        classifications,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInputs {
    pub corpus: String,
    pub dictionary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<RunInputs>,
    pub config: RunConfig,
    pub dictionary_size: usize,
    pub windows: Vec<WindowSummary>,
    pub excluded_terms: Vec<ExcludedTerm>,
}

impl RunManifest {
    pub fn from_result(result: &RunResult) -> Self {
        Self {
            artifact: ARTIFACT_NAME.to_string(),
            version: ARTIFACT_VERSION.to_string(),
            inputs: None,
            config: result.config.clone(),
            dictionary_size: result.terms.len(),
            windows: result.windows.clone(),
            excluded_terms: result.excluded.clone(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Io {
            path: path.to_path_buf(),
            source: io::Error::new(io::ErrorKind::InvalidData, e),
        })
    }
}

pub const DIFFUSION_HEADER: [&str; 7] = [
    "term",
    "prefix_m",
    "gjs",
    "threshold",
    "significant",
    "broadness",
    "convergence",
];
pub const POSTERIOR_HEADER: [&str; 4] = ["term", "window_label", "topic_index", "probability"];
pub const TOP_TERMS_HEADER: [&str; 5] = ["window_label", "topic_index", "rank", "term", "weight"];

type CsvResult = Result<(), csv::Error>;

fn write_diffusion(w: &mut csv::Writer<fs::File>, result: &RunResult) -> CsvResult {
    w.write_record(DIFFUSION_HEADER)?;
    for (s, c) in result.series.iter().zip(&result.classifications) {
        for r in &s.records {
            w.write_record([
                result.terms[s.term].clone(),
                r.prefix_m.to_string(),
                r.gjs.to_string(),
                r.threshold.to_string(),
                r.significant.to_string(),
                c.broadness.to_string(),
                c.convergence.to_string(),
            ])?;
        }
    }
    Ok(())
}

fn write_posteriors(w: &mut csv::Writer<fs::File>, result: &RunResult) -> CsvResult {
    w.write_record(POSTERIOR_HEADER)?;
    for window in &result.posteriors {
        for post in window {
            if let Some(dist) = &post.dist {
                for (topic, p) in dist.iter().enumerate() {
                    w.write_record([
                        result.terms[post.term].as_str(),
                        post.window_label.as_str(),
                        &topic.to_string(),
                        &p.to_string(),
                    ])?;
                }
            }
        }
    }
    Ok(())
}

/// Append top-term rows for one model; shared with the CLI.
pub fn write_top_terms_rows<W: io::Write>(
    w: &mut csv::Writer<W>,
    model: &NormalizedModel,
    terms: &[String],
    topics: impl IntoIterator<Item = usize>,
    n: usize,
) -> CsvResult {
    for topic in topics {
        for (rank, (term, weight)) in top_terms(model, topic, n).unwrap_or_default().into_iter().enumerate() {
            w.write_record([
                model.window_label.as_str(),
                &topic.to_string(),
                &(rank + 1).to_string(),
                terms[term].as_str(),
                &weight.to_string(),
            ])?;
        }
    }
    Ok(())
}

fn write_top_terms(w: &mut csv::Writer<fs::File>, result: &RunResult) -> CsvResult {
    w.write_record(TOP_TERMS_HEADER)?;
    for model in &result.models {
        write_top_terms_rows(w, model, &result.terms, 0..model.k(), result.config.top_n)?;
    }
    Ok(())
}

fn write_csv(
    path: &Path,
    body: impl FnOnce(&mut csv::Writer<fs::File>) -> CsvResult,
) -> Result<(), PipelineError> {
    let to_io = |e: csv::Error| PipelineError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_path(path).map_err(to_io)?;
    body(&mut w).map_err(to_io)?;
    w.flush().map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Write `diffusion.csv`, `posteriors.csv`, `top_terms.csv`,
/// `alignment.json`, `run_manifest.json` and one model file per window
/// under `models/`.
pub fn emit_reports(result: &RunResult, out_dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    emit_reports_with_manifest(result, out_dir, &RunManifest::from_result(result))
}

pub fn emit_reports_with_manifest(
    result: &RunResult,
    out_dir: &Path,
    manifest: &RunManifest,
) -> Result<Vec<PathBuf>, PipelineError> {
    let models_dir = out_dir.join("models");
    fs::create_dir_all(&models_dir).map_err(|source| PipelineError::Io {
        path: models_dir.clone(),
        source,
    })?;
    let mut written = Vec::new();

    let path = out_dir.join("diffusion.csv");
    write_csv(&path, |w| write_diffusion(w, result))?;
    written.push(path);
    let path = out_dir.join("posteriors.csv");
    write_csv(&path, |w| write_posteriors(w, result))?;
    written.push(path);
    let path = out_dir.join("top_terms.csv");
    write_csv(&path, |w| write_top_terms(w, result))?;
    written.push(path);
    let path = out_dir.join("alignment.json");
    write_json(&path, &result.alignment)?;
    written.push(path);
    let path = out_dir.join("run_manifest.json");
    write_json(&path, manifest)?;
    written.push(path);

    for (model, summary) in result.models.iter().zip(&result.windows) {
        let path = out_dir.join(&summary.model_file);
        model.save(&path).map_err(|e| PipelineError::Io {
            path: path.clone(),
            source: io::Error::other(e.to_string()),
        })?;
        written.push(path);
    }
    Ok(written)
}
