//! Topic matching across windows: minimum-cost assignment over pairwise
//! Jensen-Shannon divergences of topic term distributions.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::divergence::{jsd_pair, ProbDist};
use crate::factorization::NormalizedModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignmentError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("cost matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("cost matrix must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("no models to align")]
    Empty,
    #[error("topic {0} row is not a distribution: {1}")]
    InvalidTopic(usize, String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub values: Array2<f64>,
    pub row_window: String,
    pub col_window: String,
}

impl CostMatrix {
    pub fn new(values: Array2<f64>) -> Self {
        Self {
            values,
            row_window: String::new(),
            col_window: String::new(),
        }
    }
}

/// `perm[a]` is the later topic matched to earlier topic `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub perm: Vec<usize>,
    pub total_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub earlier_window: String,
    pub later_window: String,
    pub permutation: Vec<usize>,
    pub total_cost: f64,
}

fn topic_row(model: &NormalizedModel, t: usize) -> Result<Option<ProbDist>, AlignmentError> {
    if model.empty_topics.contains(&t) {
        return Ok(None);
    }
    ProbDist::new(model.h_hat.row(t).to_vec())
        .map(Some)
        .map_err(|e| AlignmentError::InvalidTopic(t, e.to_string()))
}

/// Entry `(a, b)` is the JSD between earlier topic `a` and later topic `b`.
/// Empty topics cost 1 against non-empty ones and 0 against each other.
pub fn topic_cost_matrix(
    earlier: &NormalizedModel,
    later: &NormalizedModel,
) -> Result<CostMatrix, AlignmentError> {
    if earlier.h_hat.dim() != later.h_hat.dim() {
        return Err(AlignmentError::DimensionMismatch(format!(
            "{:?} vs {:?}",
            earlier.h_hat.dim(),
            later.h_hat.dim()
        )));
    }
    let k = earlier.k();
    let rows: Vec<_> = (0..k).map(|t| topic_row(earlier, t)).collect::<Result<_, _>>()?;
    let cols: Vec<_> = (0..k).map(|t| topic_row(later, t)).collect::<Result<_, _>>()?;
    let mut values = Array2::zeros((k, k));
    for (a, ra) in rows.iter().enumerate() {
        for (b, cb) in cols.iter().enumerate() {
            values[[a, b]] = match (ra, cb) {
                (Some(p), Some(q)) => jsd_pair(p, q).expect("equal lengths checked"),
                (None, None) => 0.0,
                _ => 1.0,
            };
        }
    }
    Ok(CostMatrix {
        values,
        row_window: earlier.window_label.clone(),
        col_window: later.window_label.clone(),
    })
}

/// Shortest augmenting path Hungarian method with row/column potentials.
/// Returns `row -> col`.
fn solve_rows(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

fn assignment_cost(cost: &[Vec<f64>], perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(r, &c)| cost[r][c]).sum()
}

fn tie_tolerance(scale: f64) -> f64 {
    1e-12 * (1.0 + scale.abs())
}

/// Minimum-cost perfect matching. Among optimal matchings the
/// lexicographically smallest permutation is returned.
pub fn hungarian(cost: &CostMatrix) -> Result<Assignment, AlignmentError> {
    let (n, m) = cost.values.dim();
    if n != m {
        return Err(AlignmentError::NotSquare(n, m));
    }
    if let Some(((row, col), _)) = cost.values.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(AlignmentError::NonFinite { row, col });
    }
    let full: Vec<Vec<f64>> = cost.values.rows().into_iter().map(|r| r.to_vec()).collect();
    let best = assignment_cost(&full, &solve_rows(&full));
    let tol = tie_tolerance(best);

    // Fix rows in order, taking the smallest column that still admits an
    // optimal completion.
    let mut perm = Vec::with_capacity(n);
    let mut free_cols: Vec<usize> = (0..n).collect();
    let mut fixed_cost = 0.0;
    for row in 0..n {
        let rest_rows: Vec<usize> = (row + 1..n).collect();
        let mut chosen = None;
        for (slot, &col) in free_cols.iter().enumerate() {
            let remaining: Vec<usize> = free_cols
                .iter()
                .copied()
                .filter(|&c| c != col)
                .collect();
            let sub: Vec<Vec<f64>> = rest_rows
                .iter()
                .map(|&r| remaining.iter().map(|&c| full[r][c]).collect())
                .collect();
            let sub_perm = solve_rows(&sub);
            let completion = fixed_cost + full[row][col] + assignment_cost(&sub, &sub_perm);
            if completion <= best + tol {
                chosen = Some((slot, col));
                break;
            }
        }
        // the optimal column always qualifies; fall back only on rounding trouble
        let (slot, col) = chosen.unwrap_or((0, free_cols[0]));
        fixed_cost += full[row][col];
        perm.push(col);
        free_cols.remove(slot);
    }
    let total_cost = assignment_cost(&full, &perm);
    Ok(Assignment { perm, total_cost })
}

/// Reorder topics so that output topic `a` is input topic `perm[a]`.
pub fn permute_topics(model: &NormalizedModel, perm: &[usize]) -> NormalizedModel {
    let k = model.k();
    debug_assert_eq!(perm.len(), k);
    let w = Array2::from_shape_fn((model.w.nrows(), k), |(d, a)| model.w[[d, perm[a]]]);
    let s_hat = Array2::from_shape_fn((k, k), |(a, b)| model.s_hat[[perm[a], perm[b]]]);
    let h_hat = Array2::from_shape_fn((k, model.num_terms()), |(a, i)| model.h_hat[[perm[a], i]]);
    let empty_topics = (0..k)
        .filter(|&a| model.empty_topics.contains(&perm[a]))
        .collect();
    NormalizedModel {
        window_label: model.window_label.clone(),
        options: model.options.clone(),
        w,
        s_hat,
        h_hat,
        empty_topics,
    }
}

/// Align each window to its already-aligned predecessor.
pub fn align_chain_with_audit(
    models: &[NormalizedModel],
) -> Result<(Vec<NormalizedModel>, Vec<AlignmentRecord>), AlignmentError> {
    let first = models.first().ok_or(AlignmentError::Empty)?;
    let (k, p) = first.h_hat.dim();
    let mut aligned = vec![first.clone()];
    let mut audit = Vec::new();
    for model in &models[1..] {
        if model.h_hat.dim() != (k, p) || model.s_hat.dim() != (k, k) || model.w.ncols() != k {
            return Err(AlignmentError::DimensionMismatch(format!(
                "window {} has shape {:?}, expected {:?}",
                model.window_label,
                model.h_hat.dim(),
                (k, p)
            )));
        }
        let prev = aligned.last().expect("non-empty");
        let cost = topic_cost_matrix(prev, model)?;
        let assignment = hungarian(&cost)?;
        audit.push(AlignmentRecord {
            earlier_window: prev.window_label.clone(),
            later_window: model.window_label.clone(),
            permutation: assignment.perm.clone(),
            total_cost: assignment.total_cost,
        });
        aligned.push(permute_topics(model, &assignment.perm));
    }
    Ok((aligned, audit))
}

pub fn align_chain(models: &[NormalizedModel]) -> Result<Vec<NormalizedModel>, AlignmentError> {
    align_chain_with_audit(models).map(|(m, _)| m)
}
