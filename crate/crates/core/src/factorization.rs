//! Nonsmooth non-negative matrix factorization `X ≈ W S H` and its
//! row-normalized form `X ≈ W Ŝ Ĥ`.
//!
//! `S = (1 - θ) I + (θ / k) 11ᵀ` is fixed by the rank and the smoothing
//! parameter. Fitting alternates Frobenius multiplicative updates: `H` is
//! updated against the basis `W S`, then `W` against the coefficients `S H`.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::{Array2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DocTermMatrix;

/// Added to multiplicative-update denominators.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("theta {0} is outside [0, 1]")]
    InvalidTheta(f64),
    #[error("rank k={k} must satisfy 1 <= k < min(n, p) = {limit}")]
    InvalidRank { k: usize, limit: usize },
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("input matrix has negative or non-finite entries")]
    InvalidInput,
    #[error("input matrix is all zeros")]
    ZeroMatrix,
    #[error("non-finite value produced at sweep {iteration}")]
    NonFinite { iteration: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("model file {path}: {message}")]
    Serialization { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub k: usize,
    pub theta: f64,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            k: 10,
            theta: 0.4,
            max_iter: 2000,
            rel_tol: 1e-6,
            seed: 0,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<(), FitError> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(FitError::InvalidTheta(self.theta));
        }
        if self.k == 0 {
            return Err(FitError::InvalidOptions("k must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(FitError::InvalidOptions("max_iter must be positive".into()));
        }
        if self.rel_tol <= 0.0 || !self.rel_tol.is_finite() {
            return Err(FitError::InvalidOptions("rel_tol must be a positive real".into()));
        }
        Ok(())
    }
}

/// `(1 - θ) I + (θ / k) 11ᵀ`.
pub fn smoothing_matrix(k: usize, theta: f64) -> Result<Array2<f64>, FitError> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(FitError::InvalidTheta(theta));
    }
    if k == 0 {
        return Err(FitError::InvalidOptions("k must be positive".into()));
    }
    let off = theta / k as f64;
    Ok(Array2::from_shape_fn((k, k), |(i, j)| {
        if i == j {
            1.0 - theta + off
        } else {
            off
        }
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModel {
    #[serde(with = "rows")]
    pub w: Array2<f64>,
    #[serde(with = "rows")]
    pub h: Array2<f64>,
    pub options: FitOptions,
    pub objective_trace: Vec<f64>,
    pub iterations_run: usize,
}

impl FactorModel {
    pub fn smoothing(&self) -> Array2<f64> {
        smoothing_matrix(self.options.k, self.options.theta)
            .expect("options validated at fit time")
    }

    /// `W S H`.
    pub fn reconstruct(&self) -> Array2<f64> {
        self.w.dot(&self.smoothing()).dot(&self.h)
    }
}

fn frobenius_sq(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// `½ ‖X − W S H‖²_F`.
fn objective(x: &Array2<f64>, w: &Array2<f64>, s: &Array2<f64>, h: &Array2<f64>) -> f64 {
    let residual = x - &w.dot(s).dot(h);
    0.5 * frobenius_sq(&residual)
}

fn multiplicative_step(target: &mut Array2<f64>, numer: &Array2<f64>, denom: &Array2<f64>) {
    Zip::from(target)
        .and(numer)
        .and(denom)
        .for_each(|t, &n, &d| *t *= n / (d + DENOMINATOR_FLOOR));
}

/// Seeded uniform draws in `(0, 1]`, W row-major then H row-major.
fn initial_factors(n: usize, p: usize, k: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || 1.0 - rng.random::<f64>();
    let w = Array2::from_shape_simple_fn((n, k), &mut draw);
    let h = Array2::from_shape_simple_fn((k, p), &mut draw);
    (w, h)
}

/// Fit `X ≈ W S H` by alternating multiplicative updates.
pub fn fit(x: &DocTermMatrix, opts: &FitOptions) -> Result<FactorModel, FitError> {
    fit_array(&x.values, opts)
}

pub fn fit_array(x: &Array2<f64>, opts: &FitOptions) -> Result<FactorModel, FitError> {
    opts.validate()?;
    let (n, p) = x.dim();
    let limit = n.min(p);
    if opts.k >= limit {
        return Err(FitError::InvalidRank { k: opts.k, limit });
    }
    if x.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(FitError::InvalidInput);
    }
    if x.iter().all(|&v| v == 0.0) {
        return Err(FitError::ZeroMatrix);
    }

    let s = smoothing_matrix(opts.k, opts.theta)?;
    let (mut w, mut h) = initial_factors(n, p, opts.k, opts.seed);
    let mut trace: Vec<f64> = Vec::new();
    let mut iterations = 0;

    for sweep in 1..=opts.max_iter {
        // H against basis A = W S
        let a = w.dot(&s);
        let numer = a.t().dot(x);
        let denom = a.t().dot(&a).dot(&h);
        multiplicative_step(&mut h, &numer, &denom);

        // W against coefficients B = S H
        let b = s.dot(&h);
        let numer = x.dot(&b.t());
        let denom = w.dot(&b.dot(&b.t()));
        multiplicative_step(&mut w, &numer, &denom);

        debug_assert!(w.iter().chain(h.iter()).all(|&v| v >= 0.0 || v.is_nan()));
        let obj = objective(x, &w, &s, &h);
        if !obj.is_finite() || w.iter().chain(h.iter()).any(|v| !v.is_finite()) {
            return Err(FitError::NonFinite { iteration: sweep });
        }
        iterations = sweep;
        let prev = trace.last().copied();
        trace.push(obj);
        if let Some(prev) = prev {
            if prev <= 0.0 || (prev - obj).abs() / prev < opts.rel_tol {
                break;
            }
        }
    }

    Ok(FactorModel {
        w,
        h,
        options: opts.clone(),
        objective_trace: trace,
        iterations_run: iterations,
    })
}

/// `‖X − W S H‖_F`.
pub fn reconstruction_error(model: &FactorModel, x: &DocTermMatrix) -> Result<f64, FitError> {
    reconstruction_error_array(model, &x.values)
}

pub fn reconstruction_error_array(model: &FactorModel, x: &Array2<f64>) -> Result<f64, FitError> {
    let expected = (model.w.nrows(), model.h.ncols());
    if x.dim() != expected {
        return Err(FitError::DimensionMismatch(format!(
            "matrix is {:?}, model reconstructs {:?}",
            x.dim(),
            expected
        )));
    }
    Ok(frobenius_sq(&(x - &model.reconstruct())).sqrt())
}

/// Row-normalized factorization: `Ĥ = D⁻¹ H` with `D` the row sums of `H`,
/// and `Ŝ = S D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedModel {
    pub window_label: String,
    pub options: FitOptions,
    #[serde(with = "rows")]
    pub w: Array2<f64>,
    #[serde(with = "rows")]
    pub s_hat: Array2<f64>,
    #[serde(with = "rows")]
    pub h_hat: Array2<f64>,
    pub empty_topics: BTreeSet<usize>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    documents: usize,
    terms: usize,
    topics: usize,
    #[serde(flatten)]
    model: NormalizedModel,
}

impl NormalizedModel {
    pub fn k(&self) -> usize {
        self.h_hat.nrows()
    }

    pub fn num_terms(&self) -> usize {
        self.h_hat.ncols()
    }

    /// `W Ŝ Ĥ`.
    pub fn reconstruct(&self) -> Array2<f64> {
        self.w.dot(&self.s_hat).dot(&self.h_hat)
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            documents: self.w.nrows(),
            terms: self.num_terms(),
            topics: self.k(),
            model: self.clone(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, FitError> {
        let err = |message: String| FitError::Serialization {
            path: "<memory>".into(),
            message,
        };
        let file: ModelFile = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
        let m = file.model;
        let dims_ok = m.w.dim() == (file.documents, file.topics)
            && m.s_hat.dim() == (file.topics, file.topics)
            && m.h_hat.dim() == (file.topics, file.terms)
            && m.empty_topics.iter().all(|&t| t < file.topics);
        if !dims_ok {
            return Err(err("matrix shapes disagree with declared dimensions".into()));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), FitError> {
        std::fs::write(path, self.to_json()).map_err(|e| FitError::Serialization {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, FitError> {
        let text = std::fs::read_to_string(path).map_err(|e| FitError::Serialization {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text).map_err(|e| match e {
            FitError::Serialization { message, .. } => FitError::Serialization {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }
}

/// Normalize `H` to unit row sums. All-zero rows stay zero, keep a unit
/// scale, and are listed in `empty_topics`.
pub fn normalize(model: &FactorModel, window_label: &str) -> NormalizedModel {
    let s = model.smoothing();
    let row_sums = model.h.sum_axis(Axis(1));
    let mut empty_topics = BTreeSet::new();
    let scale: Vec<f64> = row_sums
        .iter()
        .enumerate()
        .map(|(t, &sum)| {
            if sum > 0.0 {
                sum
            } else {
                empty_topics.insert(t);
                1.0
            }
        })
        .collect();

    let mut h_hat = model.h.clone();
    for (mut row, &d) in h_hat.rows_mut().into_iter().zip(&scale) {
        row.mapv_inplace(|v| v / d);
    }
    let mut s_hat = s;
    for (mut col, &d) in s_hat.columns_mut().into_iter().zip(&scale) {
        col.mapv_inplace(|v| v * d);
    }
    NormalizedModel {
        window_label: window_label.to_string(),
        options: model.options.clone(),
        w: model.w.clone(),
        s_hat,
        h_hat,
        empty_topics,
    }
}

/// Serde adapter: matrices as arrays of row arrays.
pub(crate) mod rows {
    use ndarray::Array2;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Array2<f64>, ser: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.rows().into_iter().map(|r| r.to_vec()).collect();
        rows.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Array2<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(de)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Array2::from_shape_vec((nrows, ncols), flat).map_err(D::Error::custom)
    }
}
