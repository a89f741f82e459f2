//! Studentized range distribution and Tukey-Kramer pairwise comparisons.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::anova::{mean, sum_sq};
use crate::error::{Error, Result};
use crate::special::{ln_gamma, norm_cdf, norm_pdf};

const GL_ORDER: usize = 16;

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
fn gauss_legendre() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_ORDER;
        (0..n)
            .map(|i| {
                let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
                let mut dp = 0.0;
                for _ in 0..100 {
                    let (mut p0, mut p1) = (1.0, x);
                    for j in 2..=n {
                        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                        p0 = p1;
                        p1 = p2;
                    }
                    dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    let dx = p1 / dp;
                    x -= dx;
                    if dx.abs() < 1e-16 {
                        break;
                    }
                }
                (x, 2.0 / ((1.0 - x * x) * dp * dp))
            })
            .collect()
    })
}

/// Composite Gauss-Legendre rule over `panels` equal sub-intervals.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let rule = gauss_legendre();
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let mid = a + (i as f64 + 0.5) * h;
        total += rule.iter().map(|&(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h;
    }
    total
}

const Z_LIMIT: f64 = 8.0;
const INNER_PANELS: usize = 12;
const OUTER_PANELS: usize = 12;

/// Nodes `(z, w·φ(z), Φ(z))` of the rule over [-8, 8].
fn inner_nodes() -> &'static [(f64, f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| {
        let rule = gauss_legendre();
        let h = 2.0 * Z_LIMIT / INNER_PANELS as f64;
        let mut out = Vec::with_capacity(INNER_PANELS * rule.len());
        for i in 0..INNER_PANELS {
            let mid = -Z_LIMIT + (i as f64 + 0.5) * h;
            for &(x, w) in rule {
                let z = mid + 0.5 * h * x;
                out.push((z, 0.5 * h * w * norm_pdf(z), norm_cdf(z)));
            }
        }
        out
    })
}

/// P(range of k standard normals ≤ w).
fn normal_range_cdf(w: f64, k: usize) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let km1 = (k - 1) as i32;
    let inner: f64 = inner_nodes().iter().map(|&(z, wp, cz)| wp * (cz - norm_cdf(z - w)).max(0.0).powi(km1)).sum();
    (k as f64 * inner).clamp(0.0, 1.0)
}

/// Degrees of freedom beyond which the chi scale factor is treated as 1.
const LARGE_DF: f64 = 5_000.0;

/// CDF of the studentized range with `k` groups and `df` error degrees of
/// freedom: the normal-range CDF averaged over the density of `s = √(χ²/df)`.
pub fn studentized_range_cdf(q: f64, k: usize, df: f64) -> Result<f64> {
    if k < 2 || !(df >= 1.0) || q.is_nan() || q < 0.0 {
        return Err(Error::InvalidInput(format!("studentized range needs q ≥ 0, k ≥ 2, df ≥ 1 (q={q}, k={k}, df={df})")));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    if q.is_infinite() {
        return Ok(1.0);
    }
    if df > LARGE_DF {
        return Ok(normal_range_cdf(q, k));
    }
    let half = df / 2.0;
    let ln_norm = half * df.ln() - ln_gamma(half) - (half - 1.0) * 2f64.ln();
    let density = |s: f64| if s <= 0.0 { 0.0 } else { (ln_norm + (df - 1.0) * s.ln() - half * s * s).exp() };
    let spread = 12.0 / (2.0 * df).sqrt();
    let lo = (1.0 - spread).max(0.0);
    let hi = 1.0 + spread;
    let p = integrate(|s| density(s) * normal_range_cdf(q * s, k), lo, hi, OUTER_PANELS);
    Ok(p.clamp(0.0, 1.0))
}

/// Inverse of [`studentized_range_cdf`] in `q`.
pub fn studentized_range_quantile(p: f64, k: usize, df: f64) -> Result<f64> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::InvalidInput(format!("probability must be in (0,1), got {p}")));
    }
    let f = |q: f64| studentized_range_cdf(q, k, df).map(|c| c - p);
    let (mut a, mut fa) = (0.0, -p);
    let (mut b, mut fb) = (10.0, f(10.0)?);
    while fb < 0.0 {
        (a, fa) = (b, fb);
        b *= 2.0;
        fb = f(b)?;
    }
    // Illinois variant of regula falsi
    let mut side = 0;
    for _ in 0..100 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c)?;
        if fc == 0.0 || (b - a).abs() < 1e-9 * c.max(1.0) {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            (b, fb) = (c, fc);
            if side == -1 {
                fa /= 2.0;
            }
            side = -1;
        } else {
            (a, fa) = (c, fc);
            if side == 1 {
                fb /= 2.0;
            }
            side = 1;
        }
        if (b - a).abs() < 1e-9 * b.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyPair {
    pub group_a: usize,
    pub group_b: usize,
    /// mean(a) − mean(b)
    pub diff: f64,
    pub p_adj: f64,
    pub lower: f64,
    pub upper: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyResult {
    pub alpha: f64,
    pub q_crit: f64,
    pub df: usize,
    pub mse: f64,
    pub pairs: Vec<TukeyPair>,
}

/// All pairwise comparisons, with the Tukey-Kramer standard error for
/// unequal group sizes.
pub fn tukey_hsd(groups: &[Vec<f64>], alpha: f64) -> Result<TukeyResult> {
    if groups.len() < 2 {
        return Err(Error::Degenerate("Tukey HSD needs at least 2 groups".into()));
    }
    if let Some(i) = groups.iter().position(|g| g.len() < 2) {
        return Err(Error::InvalidInput(format!("group {i} has fewer than 2 samples")));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must be in (0,1), got {alpha}")));
    }
    let k = groups.len();
    let n: usize = groups.iter().map(Vec::len).sum();
    let df = n - k;
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let ssw: f64 = groups.iter().zip(&means).map(|(g, &m)| sum_sq(g, m)).sum();
    if ssw <= 0.0 {
        return Err(Error::Degenerate("zero within-group variance".into()));
    }
    let mse = ssw / df as f64;
    let q_crit = studentized_range_quantile(1.0 - alpha, k, df as f64)?;
    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in a + 1..k {
            let diff = means[a] - means[b];
            let se = (mse / 2.0 * (1.0 / groups[a].len() as f64 + 1.0 / groups[b].len() as f64)).sqrt();
            let q = diff.abs() / se;
            let p_adj = (1.0 - studentized_range_cdf(q, k, df as f64)?).clamp(0.0, 1.0);
            pairs.push(TukeyPair {
                group_a: a,
                group_b: b,
                diff,
                p_adj,
                lower: diff - q_crit * se,
                upper: diff + q_crit * se,
                reject: p_adj < alpha,
            });
        }
    }
    Ok(TukeyResult { alpha, q_crit, df, mse, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let v = integrate(|x| x.powi(7) + 3.0 * x * x, -1.0, 2.0, 1);
        let exact = (2f64.powi(8) - 1.0) / 8.0 + (8.0 + 1.0);
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn cdf_limits_and_errors() {
        assert_eq!(studentized_range_cdf(0.0, 3, 10.0).unwrap(), 0.0);
        assert_eq!(studentized_range_cdf(f64::INFINITY, 3, 10.0).unwrap(), 1.0);
        assert!(studentized_range_cdf(1.0, 1, 10.0).is_err());
        assert!(studentized_range_cdf(-1.0, 3, 10.0).is_err());
        assert!(studentized_range_cdf(1.0, 3, 0.5).is_err());
    }

    #[test]
    fn two_group_range_is_scaled_t() {
        // with k = 2, Q = √2·|T|
        for &(q, df) in &[(1.0, 5.0), (2.5, 12.0), (4.0, 30.0)] {
            let t = q / 2f64.sqrt();
            let expected = 2.0 * crate::special::t_cdf(t, df) - 1.0;
            assert!((studentized_range_cdf(q, 2, df).unwrap() - expected).abs() < 1e-6);
        }
    }

    #[test]
    fn tabulated_critical_values() {
        // q(0.05; 3, 10) = 3.877, q(0.05; 4, 20) = 3.958, q(0.05; 5, ∞) = 3.858
        assert!((studentized_range_quantile(0.95, 3, 10.0).unwrap() - 3.877).abs() < 2e-3);
        assert!((studentized_range_quantile(0.95, 4, 20.0).unwrap() - 3.958).abs() < 2e-3);
        assert!((studentized_range_quantile(0.95, 5, 1e6).unwrap() - 3.858).abs() < 2e-3);
    }

    #[test]
    fn identical_groups_are_not_different() {
        let r = tukey_hsd(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]], 0.05).unwrap();
        assert_eq!(r.pairs[0].diff, 0.0);
        assert!((r.pairs[0].p_adj - 1.0).abs() < 1e-6);
        assert!(r.pairs[0].lower <= 0.0 && r.pairs[0].upper >= 0.0);
        assert!(tukey_hsd(&[vec![1.0], vec![2.0, 3.0]], 0.05).is_err());
        assert!(tukey_hsd(&[vec![1.0, 1.0], vec![2.0, 2.0]], 0.05).is_err());
    }
}
