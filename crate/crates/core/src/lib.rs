//! Topic diffusion discovery over a timestamped document corpus.
//!
//! Each cumulative time window is turned into a document-term matrix and
//! factorized with a row-normalized nonsmooth NMF. Topics are matched
//! across windows by minimum-cost assignment on Jensen-Shannon divergences.
//! Terms whose topic posteriors drift beyond a chi-square derived threshold
//! of the generalized Jensen-Shannon divergence are flagged as divergent.
//!
//! The modules follow the data flow:
//!
//! - [`corpus`]: documents, dictionary, tokenization, tf-idf windows
//! - [`factorization`]: nonsmooth NMF and its normalized form
//! - [`posterior`]: per-term topic posteriors
//! - [`divergence`]: entropy, generalized JSD, chi-square threshold
//! - [`alignment`]: Hungarian topic matching across windows
//! - [`pipeline`]: end-to-end run, classification and reports
//! - [`cli`]: the `topic-diffusion` command
//! - [`synthetic`]: planted-topic corpora for experiments and tests

pub mod alignment;
pub mod cli;
pub mod corpus;
pub mod divergence;
pub mod factorization;
pub mod pipeline;
pub mod posterior;
pub mod synthetic;

pub use alignment::{align_chain, hungarian, topic_cost_matrix, Assignment, CostMatrix};
pub use corpus::{Dictionary, DocTermMatrix, Document, Weighting, WindowPlan};
pub use divergence::{chi2_quantile, gjs, gjs_threshold, jsd_pair, ProbDist, ThresholdParams};
pub use factorization::{fit, normalize, FactorModel, FitOptions, NormalizedModel};
pub use pipeline::{run, RunConfig, RunResult};
