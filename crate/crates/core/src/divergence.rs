//! Entropy, generalized Jensen-Shannon divergence and its chi-square
//! significance threshold.
//!
//! Entropies here are taken with an explicit logarithm base. With base `k`
//! over a `k`-outcome distribution the uniform distribution has entropy 1,
//! which bounds the generalized divergence to `[0, 1]`.

use thiserror::Error;

/// Tolerance used when validating that a distribution sums to one.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Excursions outside `[0, 1]` smaller than this are treated as rounding.
const CLAMP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DivergenceError {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("distribution lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("at least one distribution is required")]
    Empty,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid logarithm base {base} for {len} outcomes and {count} distributions")]
    InvalidBase { base: usize, len: usize, count: usize },
    #[error("invalid threshold parameters: {0}")]
    InvalidParams(String),
    #[error("chi-square quantile did not converge for df={df}, p={prob}")]
    NoConvergence { df: u64, prob: f64 },
}

/// A discrete probability distribution: non-negative entries summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbDist(Vec<f64>);

impl ProbDist {
    pub fn new(values: Vec<f64>) -> Result<Self, DivergenceError> {
        if values.is_empty() {
            return Err(DivergenceError::InvalidDistribution("empty".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(DivergenceError::InvalidDistribution(format!(
                "entry {bad} is negative or non-finite"
            )));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(DivergenceError::InvalidDistribution(format!(
                "entries sum to {sum}"
            )));
        }
        Ok(Self(values))
    }

    pub fn uniform(len: usize) -> Self {
        Self(vec![1.0 / len as f64; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl AsRef<[f64]> for ProbDist {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Shannon entropy with logarithm base `base`, using `0 log 0 = 0`.
fn entropy_base(values: &[f64], base: f64) -> f64 {
    let ln_base = base.ln();
    -values
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
        / ln_base
}

/// k-ary Shannon entropy of `dist`. Shorter distributions are treated as
/// zero-padded up to `k` outcomes.
pub fn entropy_k(dist: &ProbDist, k: usize) -> Result<f64, DivergenceError> {
    if k < 2 || dist.len() > k {
        return Err(DivergenceError::InvalidBase {
            base: k,
            len: dist.len(),
            count: 1,
        });
    }
    Ok(entropy_base(dist.values(), k as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GjsResult {
    pub value: f64,
    pub base: usize,
    pub weights: Vec<f64>,
}

/// Equal weights `1/t` for `t` distributions.
pub fn uniform_weights(t: usize) -> Vec<f64> {
    vec![1.0 / t as f64; t]
}

/// Generalized Jensen-Shannon divergence: entropy of the weighted mixture
/// minus the weighted mean of the component entropies, logarithm base `base`.
///
/// `base` must be at least 2 and at least one of the outcome count or the
/// number of distributions must not exceed it; either condition caps the
/// value at 1.
pub fn gjs(dists: &[ProbDist], weights: &[f64], base: usize) -> Result<GjsResult, DivergenceError> {
    let first = dists.first().ok_or(DivergenceError::Empty)?;
    let len = first.len();
    if let Some(d) = dists.iter().find(|d| d.len() != len) {
        return Err(DivergenceError::LengthMismatch(len, d.len()));
    }
    if weights.len() != dists.len() {
        return Err(DivergenceError::InvalidWeights(format!(
            "{} weights for {} distributions",
            weights.len(),
            dists.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0)
        || (weights.iter().sum::<f64>() - 1.0).abs() > SUM_TOLERANCE
    {
        return Err(DivergenceError::InvalidWeights(
            "weights must be non-negative and sum to 1".into(),
        ));
    }
    if base < 2 || len.min(dists.len()) > base {
        return Err(DivergenceError::InvalidBase {
            base,
            len,
            count: dists.len(),
        });
    }

    let mut mixture = vec![0.0; len];
    for (d, &w) in dists.iter().zip(weights) {
        for (m, &p) in mixture.iter_mut().zip(d.values()) {
            *m += w * p;
        }
    }
    let b = base as f64;
    let mean_entropy: f64 = dists
        .iter()
        .zip(weights)
        .map(|(d, &w)| w * entropy_base(d.values(), b))
        .sum();
    let raw = entropy_base(&mixture, b) - mean_entropy;
    let value = if raw < 0.0 && raw > -CLAMP_TOLERANCE {
        0.0
    } else if raw > 1.0 && raw < 1.0 + CLAMP_TOLERANCE {
        1.0
    } else {
        raw
    };
    Ok(GjsResult {
        value,
        base,
        weights: weights.to_vec(),
    })
}

/// Two-distribution Jensen-Shannon divergence, base 2, equal weights.
pub fn jsd_pair(p: &ProbDist, q: &ProbDist) -> Result<f64, DivergenceError> {
    if p.len() != q.len() {
        return Err(DivergenceError::LengthMismatch(p.len(), q.len()));
    }
    Ok(gjs(&[p.clone(), q.clone()], &[0.5, 0.5], 2)?.value)
}

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 100_000;

/// Regularized lower incomplete gamma function `P(a, x)`.
pub fn regularized_gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // series
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * GAMMA_EPS {
                break;
            }
        }
        (sum * log_prefix.exp()).min(1.0)
    } else {
        // continued fraction for Q(a, x), modified Lentz
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < GAMMA_EPS {
                break;
            }
        }
        (1.0 - log_prefix.exp() * h).max(0.0)
    }
}

fn chi2_cdf(df: f64, x: f64) -> f64 {
    regularized_gamma_p(df / 2.0, x / 2.0)
}

fn chi2_pdf(df: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let a = df / 2.0;
    ((a - 1.0) * (x / 2.0).ln() - x / 2.0 - ln_gamma(a)).exp() / 2.0
}

/// Quantile of the chi-square distribution: the `x` at which the CDF with
/// `df` degrees of freedom equals `prob`.
///
/// Inverts the regularized incomplete gamma function by Newton steps kept
/// inside a shrinking bisection bracket.
pub fn chi2_quantile(df: u64, prob: f64) -> Result<f64, DivergenceError> {
    if df == 0 {
        return Err(DivergenceError::InvalidParams("df must be at least 1".into()));
    }
    if !(prob > 0.0 && prob < 1.0) {
        return Err(DivergenceError::InvalidParams(format!(
            "probability {prob} is outside (0, 1)"
        )));
    }
    let k = df as f64;
    let mut lo = 0.0_f64;
    let mut hi = k + 10.0 * (2.0 * k).sqrt() + 10.0;
    let mut guard = 0;
    while chi2_cdf(k, hi) < prob {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(DivergenceError::NoConvergence { df, prob });
        }
    }

    let mut x = 0.5 * (lo + hi);
    for _ in 0..500 {
        let f = chi2_cdf(k, x) - prob;
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let pdf = chi2_pdf(k, x);
        let newton = if pdf > 0.0 { x - f / pdf } else { f64::NAN };
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 1e-14 * x.max(1e-300) || hi - lo <= 1e-14 * hi {
            return Ok(next);
        }
        x = next;
    }
    Err(DivergenceError::NoConvergence { df, prob })
}

/// Parameters of the divergence significance threshold for `k` topics
/// observed over `t` windows at significance level `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdParams {
    k: usize,
    t: usize,
    alpha: f64,
}

impl ThresholdParams {
    pub fn new(k: usize, t: usize, alpha: f64) -> Result<Self, DivergenceError> {
        if k < 2 {
            return Err(DivergenceError::InvalidParams(format!("k={k} must be >= 2")));
        }
        if t < 2 {
            return Err(DivergenceError::InvalidParams(format!("t={t} must be >= 2")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(DivergenceError::InvalidParams(format!(
                "alpha={alpha} must lie in (0, 1)"
            )));
        }
        Ok(Self { k, t, alpha })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Degrees of freedom `(k - 1)(t - 1)`.
    pub fn df(&self) -> u64 {
        ((self.k - 1) * (self.t - 1)) as u64
    }

    /// Number of cells `k * t`.
    pub fn cells(&self) -> u64 {
        (self.k * self.t) as u64
    }
}

/// Significance threshold `chi2_{df, 1 - alpha} / (2 N ln k)`.
pub fn gjs_threshold(params: ThresholdParams) -> Result<f64, DivergenceError> {
    let q = chi2_quantile(params.df(), 1.0 - params.alpha)?;
    Ok(q / (2.0 * params.cells() as f64 * (params.k as f64).ln()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pd(v: &[f64]) -> ProbDist {
        ProbDist::new(v.to_vec()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy_k(&ProbDist::uniform(4), 4).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(entropy_k(&pd(&[1.0, 0.0, 0.0, 0.0]), 4).unwrap(), 0.0);
        let h = entropy_k(&pd(&[2.0 / 3.0, 1.0 / 3.0]), 2).unwrap();
        assert!((h - 0.9183).abs() < 1e-4, "{h}");
    }

    #[test]
    fn zero_log_zero_is_zero() {
        // padded zeros contribute nothing
        let a = entropy_k(&pd(&[0.5, 0.5]), 4).unwrap();
        let b = entropy_k(&pd(&[0.5, 0.0, 0.5, 0.0]), 4).unwrap();
        assert_eq!(a, b);
        assert!((a - 0.5).abs() < 1e-12);
    }

    #[test]
    fn entropy_rejects_too_many_outcomes() {
        assert!(entropy_k(&ProbDist::uniform(5), 4).is_err());
        assert!(entropy_k(&ProbDist::uniform(1), 1).is_err());
    }

    #[test]
    fn prob_dist_validation() {
        assert!(ProbDist::new(vec![0.5, 0.6]).is_err());
        assert!(ProbDist::new(vec![-0.1, 1.1]).is_err());
        assert!(ProbDist::new(vec![f64::NAN, 1.0]).is_err());
        assert!(ProbDist::new(vec![]).is_err());
    }

    #[test]
    fn gjs_examples() {
        let p = pd(&[0.3, 0.7]);
        let r = gjs(&[p.clone(), p.clone(), p], &uniform_weights(3), 2).unwrap();
        assert_eq!(r.value, 0.0);

        let r = gjs(&[pd(&[1.0, 0.0]), pd(&[0.0, 1.0])], &[0.5, 0.5], 2).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);

        let r = gjs(
            &[pd(&[0.5, 0.5]), pd(&[0.5, 0.5]), pd(&[1.0, 0.0])],
            &uniform_weights(3),
            2,
        )
        .unwrap();
        assert!((r.value - 0.2516).abs() < 1e-4, "{}", r.value);
    }

    #[test]
    fn gjs_errors() {
        assert_eq!(gjs(&[], &[], 2).unwrap_err(), DivergenceError::Empty);
        assert!(matches!(
            gjs(&[pd(&[1.0]), pd(&[0.5, 0.5])], &[0.5, 0.5], 2),
            Err(DivergenceError::LengthMismatch(1, 2))
        ));
        assert!(gjs(&[pd(&[0.5, 0.5])], &[0.7], 2).is_err());
        // three outcomes and three distributions exceed base 2
        let u = ProbDist::uniform(3);
        assert!(gjs(&[u.clone(), u.clone(), u], &uniform_weights(3), 2).is_err());
    }

    #[test]
    fn jsd_pair_examples() {
        let p = pd(&[0.2, 0.3, 0.5]);
        assert_eq!(jsd_pair(&p, &p).unwrap(), 0.0);
        assert!((jsd_pair(&pd(&[1.0, 0.0]), &pd(&[0.0, 1.0])).unwrap() - 1.0).abs() < 1e-12);
        assert!(jsd_pair(&pd(&[1.0]), &pd(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn chi2_table_values() {
        assert!((chi2_quantile(1, 0.95).unwrap() - 3.8415).abs() < 1e-3);
        assert!((chi2_quantile(45, 0.99).unwrap() - 69.957).abs() < 1e-2);
        assert!((chi2_quantile(2, 0.5).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-4);
    }

    #[test]
    fn chi2_quantile_inverts_cdf() {
        for &df in &[1u64, 2, 3, 10, 45, 100, 1000, 10_000] {
            for &p in &[1e-6, 0.01, 0.5, 0.95, 0.99, 1.0 - 1e-9] {
                let x = chi2_quantile(df, p).unwrap();
                let back = chi2_cdf(df as f64, x);
                assert!((back - p).abs() < 1e-9 * p.max(1e-3), "df={df} p={p} x={x} back={back}");
            }
        }
    }

    #[test]
    fn chi2_quantile_rejects_bad_input() {
        assert!(chi2_quantile(0, 0.5).is_err());
        assert!(chi2_quantile(3, 0.0).is_err());
        assert!(chi2_quantile(3, 1.0).is_err());
    }

    #[test]
    fn threshold_examples() {
        let t = gjs_threshold(ThresholdParams::new(10, 6, 0.01).unwrap()).unwrap();
        assert!((t - 0.2532).abs() < 1e-3, "{t}");
        let t = gjs_threshold(ThresholdParams::new(2, 2, 0.05).unwrap()).unwrap();
        assert!((t - 0.6928).abs() < 1e-3, "{t}");
        let t6 = gjs_threshold(ThresholdParams::new(10, 6, 0.01).unwrap()).unwrap();
        let t7 = gjs_threshold(ThresholdParams::new(10, 7, 0.01).unwrap()).unwrap();
        assert!(t7 < t6);
    }

    #[test]
    fn threshold_params_derived_fields() {
        let p = ThresholdParams::new(10, 6, 0.01).unwrap();
        assert_eq!(p.df(), 45);
        assert_eq!(p.cells(), 60);
        assert!(ThresholdParams::new(1, 6, 0.01).is_err());
        assert!(ThresholdParams::new(3, 1, 0.01).is_err());
        assert!(ThresholdParams::new(3, 3, 1.0).is_err());
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-13);
        assert!(ln_gamma(2.0).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
        // ln(10!) = ln Γ(11)
        assert!((ln_gamma(11.0) - 3_628_800f64.ln()).abs() < 1e-10);
    }
}
