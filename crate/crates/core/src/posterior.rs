//! Per-term topic posteriors `P(topic | term)` from a normalized model.

use ndarray::Array2;
use thiserror::Error;

use crate::divergence::SUM_TOLERANCE;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PosteriorError {
    #[error("association threshold must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("no document is associated with any topic")]
    DegenerateFactorization,
    #[error("invalid topic prior: {0}")]
    InvalidPrior(String),
    #[error("term index {term} out of range for {terms} terms")]
    TermOutOfRange { term: usize, terms: usize },
}

/// Entries strictly above `epsilon` count as "associated".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationConfig {
    epsilon: f64,
}

impl AssociationConfig {
    pub fn new(epsilon: f64) -> Result<Self, PosteriorError> {
        if epsilon <= 0.0 || !epsilon.is_finite() {
            return Err(PosteriorError::InvalidEpsilon(epsilon));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Default for AssociationConfig {
    fn default() -> Self {
        Self { epsilon: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicPrior(Vec<f64>);

impl TopicPrior {
    pub fn new(probs: Vec<f64>) -> Result<Self, PosteriorError> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(PosteriorError::InvalidPrior("negative or non-finite entry".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(PosteriorError::InvalidPrior(format!("entries sum to {sum}")));
        }
        Ok(Self(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermPrior(Vec<f64>);

impl TermPrior {
    pub fn probs(&self) -> &[f64] {
        &self.0
    }
}

/// Topic posterior of one term in one window. `dist` is `None` when the
/// term is associated with no topic.
#[derive(Debug, Clone, PartialEq)]
pub struct TermPosterior {
    pub term: usize,
    pub window_label: String,
    pub dist: Option<Vec<f64>>,
}

impl TermPosterior {
    pub fn is_supported(&self) -> bool {
        self.dist.is_some()
    }
}

/// Share of associated documents per topic, normalized over topics.
pub fn topic_prior(w: &Array2<f64>, cfg: &AssociationConfig) -> Result<TopicPrior, PosteriorError> {
    let counts: Vec<usize> = w
        .columns()
        .into_iter()
        .map(|col| col.iter().filter(|&&v| v > cfg.epsilon).count())
        .collect();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(PosteriorError::DegenerateFactorization);
    }
    Ok(TopicPrior(
        counts.iter().map(|&c| c as f64 / total as f64).collect(),
    ))
}

/// Fraction of topics each term is associated with.
pub fn term_prior(h_hat: &Array2<f64>, cfg: &AssociationConfig) -> TermPrior {
    let k = h_hat.nrows() as f64;
    TermPrior(
        h_hat
            .columns()
            .into_iter()
            .map(|col| col.iter().filter(|&&v| v > cfg.epsilon).count() as f64 / k)
            .collect(),
    )
}

/// Bayes inversion of column `term` of `Ĥ` under `prior`, renormalized over
/// topics.
pub fn term_posterior(
    h_hat: &Array2<f64>,
    prior: &TopicPrior,
    term: usize,
    window_label: &str,
    cfg: &AssociationConfig,
) -> Result<TermPosterior, PosteriorError> {
    if term >= h_hat.ncols() {
        return Err(PosteriorError::TermOutOfRange {
            term,
            terms: h_hat.ncols(),
        });
    }
    if prior.0.len() != h_hat.nrows() {
        return Err(PosteriorError::InvalidPrior(format!(
            "{} prior entries for {} topics",
            prior.0.len(),
            h_hat.nrows()
        )));
    }
    let column = h_hat.column(term);
    let associated = column.iter().any(|&v| v > cfg.epsilon);
    let numer: Vec<f64> = column.iter().zip(&prior.0).map(|(h, p)| h * p).collect();
    let total: f64 = numer.iter().sum();
    let dist = if associated && total > 0.0 {
        Some(numer.iter().map(|u| u / total).collect())
    } else {
        None
    };
    Ok(TermPosterior {
        term,
        window_label: window_label.to_string(),
        dist,
    })
}
