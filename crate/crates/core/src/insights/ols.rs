//! Ordinary least squares by Householder QR.

use serde::{Deserialize, Serialize};

use super::anova::{mean, sum_sq};
use crate::error::{Error, Result};
use crate::special::{t_quantile, t_two_sided_p};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsResult {
    pub names: Vec<String>,
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub r2: f64,
    pub n: usize,
    pub df_resid: usize,
    pub residuals: Vec<f64>,
}

impl OlsResult {
    pub fn coef_of(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.coef[i])
    }
}

/// Relative size of a diagonal entry of R below which the column is taken
/// to be a combination of the earlier ones.
const RANK_TOL: f64 = 1e-10;

/// Least squares of `y` on the columns of `x` (row-major, `names` labels
/// the columns). No intercept is added.
pub fn ols(names: &[String], x: &[Vec<f64>], y: &[f64]) -> Result<OlsResult> {
    let n = x.len();
    let p = names.len();
    if n != y.len() {
        return Err(Error::ShapeMismatch { expected: n, got: y.len() });
    }
    if p == 0 {
        return Err(Error::InvalidInput("no regressors".into()));
    }
    if let Some(row) = x.iter().find(|r| r.len() != p) {
        return Err(Error::ShapeMismatch { expected: p, got: row.len() });
    }
    if n <= p {
        return Err(Error::Degenerate(format!("{n} rows for {p} columns")));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression data".into()));
    }

    // column-major working copy
    let mut a: Vec<Vec<f64>> = (0..p).map(|j| x.iter().map(|r| r[j]).collect()).collect();
    let mut qty = y.to_vec();
    let col_norms: Vec<f64> = a.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let mut r = vec![vec![0.0; p]; p];
    for j in 0..p {
        let norm = a[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 > 0.0 {
            for col in a.iter_mut().skip(j) {
                let dot: f64 = v.iter().zip(&col[j..]).map(|(a, b)| a * b).sum();
                let f = 2.0 * dot / vnorm2;
                for (c, vi) in col[j..].iter_mut().zip(&v) {
                    *c -= f * vi;
                }
            }
            let dot: f64 = v.iter().zip(&qty[j..]).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            for (c, vi) in qty[j..].iter_mut().zip(&v) {
                *c -= f * vi;
            }
        }
        for i in 0..=j {
            r[i][j] = a[j][i];
        }
    }

    let dependent: Vec<usize> = (0..p).filter(|&j| r[j][j].abs() <= RANK_TOL * col_norms[j].max(f64::MIN_POSITIVE)).collect();
    if let Some(&j) = dependent.first() {
        // express column j through the earlier (independent) columns
        let mut involved = vec![j];
        let b = back_substitute(&r, j, &(0..j).map(|i| r[i][j]).collect::<Vec<_>>());
        involved.extend((0..j).filter(|&i| b[i].abs() > 1e-8));
        involved.sort_unstable();
        return Err(Error::RankDeficient { columns: involved.into_iter().map(|i| names[i].clone()).collect() });
    }

    let coef = back_substitute(&r, p, &qty[..p]);
    let residuals: Vec<f64> = x.iter().zip(y).map(|(row, &yi)| yi - row.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>()).collect();
    let df_resid = n - p;
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let sigma2 = rss / df_resid as f64;

    // diag((RᵀR)⁻¹) = row norms of R⁻¹
    let mut rinv = vec![vec![0.0; p]; p];
    for col in 0..p {
        let e: Vec<f64> = (0..p).map(|i| if i == col { 1.0 } else { 0.0 }).collect();
        let c = back_substitute(&r, p, &e);
        for i in 0..p {
            rinv[i][col] = c[i];
        }
    }
    let tcrit = t_quantile(0.975, df_resid as f64);
    let mut se = Vec::with_capacity(p);
    let mut t = Vec::with_capacity(p);
    let mut pv = Vec::with_capacity(p);
    let mut lower = Vec::with_capacity(p);
    let mut upper = Vec::with_capacity(p);
    for i in 0..p {
        let s = (sigma2 * rinv[i].iter().map(|v| v * v).sum::<f64>()).sqrt();
        let ti = if s > 0.0 { coef[i] / s } else if coef[i] == 0.0 { 0.0 } else { f64::INFINITY * coef[i].signum() };
        se.push(s);
        t.push(ti);
        pv.push(t_two_sided_p(ti, df_resid as f64));
        lower.push(coef[i] - tcrit * s);
        upper.push(coef[i] + tcrit * s);
    }
    let tss = sum_sq(y, mean(y));
    let r2 = if tss > 0.0 { (1.0 - rss / tss).max(0.0) } else { 0.0 };
    Ok(OlsResult { names: names.to_vec(), coef, se, t, p: pv, lower, upper, r2, n, df_resid, residuals })
}

/// Solves the leading `m×m` upper-triangular system `R b = rhs`.
fn back_substitute(r: &[Vec<f64>], m: usize, rhs: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; m];
    for i in (0..m).rev() {
        let s: f64 = (i + 1..m).map(|k| r[i][k] * b[k]).sum();
        b[i] = (rhs[i] - s) / r[i][i];
    }
    b
}

/// [`ols`] with an `intercept` column appended after the named regressors.
pub fn ols_with_intercept(names: &[&str], x: &[Vec<f64>], y: &[f64]) -> Result<OlsResult> {
    let mut all: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    all.push("intercept".into());
    let rows: Vec<Vec<f64>> = x
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.push(1.0);
            r
        })
        .collect();
    ols(&all, &rows, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_line() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..6).map(|i| 2.0 * i as f64 + 1.0).collect();
        let r = ols_with_intercept(&["x"], &x, &y).unwrap();
        assert!((r.coef[0] - 2.0).abs() < 1e-12 && (r.coef[1] - 1.0).abs() < 1e-12);
        assert!((r.r2 - 1.0).abs() < 1e-12);
        assert!(r.lower[0] <= r.coef[0] && r.coef[0] <= r.upper[0]);
    }

    #[test]
    fn intercept_only() {
        let y = [3.0, 5.0, 4.0, 8.0];
        let r = ols(&["intercept".into()], &vec![vec![1.0]; 4], &y).unwrap();
        assert!((r.coef[0] - 5.0).abs() < 1e-12);
        assert_eq!(r.r2, 0.0);
    }

    #[test]
    fn collinear_columns_named() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, (i * i) as f64, 2.0 * i as f64]).collect();
        let y: Vec<f64> = (0..8).map(|i| i as f64).collect();
        match ols(&["a".into(), "b".into(), "c".into()], &x, &y) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec!["a".to_string(), "c".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn textbook_standard_errors() {
        // y = β0 + β1 x on five points; se(β1) = s / √Sxx
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [1.1, 1.9, 3.2, 3.8, 5.1];
        let r = ols_with_intercept(&["x"], &xs.iter().map(|&v| vec![v]).collect::<Vec<_>>(), &ys).unwrap();
        let (mx, my) = (3.0, ys.iter().sum::<f64>() / 5.0);
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let b1 = sxy / sxx;
        let b0 = my - b1 * mx;
        let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - b0 - b1 * x).powi(2)).sum();
        let s = (rss / 3.0).sqrt();
        assert!((r.coef[0] - b1).abs() < 1e-12);
        assert!((r.se[0] - s / sxx.sqrt()).abs() < 1e-12);
        assert!((r.se[1] - s * (1.0 / 5.0 + mx * mx / sxx).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn too_few_rows() {
        assert!(ols_with_intercept(&["x"], &[vec![1.0], vec![2.0]], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn residuals_orthogonal_to_columns(rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 6..30),
                                           noise in prop::collection::vec(-1.0f64..1.0, 30)) {
            let y: Vec<f64> = rows.iter().zip(&noise).map(|(r, e)| 0.5 * r[0] - r[1] + 2.0 * r[2] + e).collect();
            if let Ok(res) = ols_with_intercept(&["a", "b", "c"], &rows, &y) {
                for j in 0..3 {
                    let dot: f64 = rows.iter().zip(&res.residuals).map(|(r, e)| r[j] * e).sum();
                    prop_assert!(dot.abs() < 1e-8);
                }
                prop_assert!(res.residuals.iter().sum::<f64>().abs() < 1e-8);
            }
        }
    }
}
