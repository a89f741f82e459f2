//! One-way analysis of variance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::CompensatedSum;
use crate::special::f_sf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p: f64,
    pub eta2: f64,
    pub ss_between: f64,
    pub ss_within: f64,
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    let mut s = CompensatedSum::new();
    xs.iter().for_each(|&x| s.add(x));
    s.value() / xs.len() as f64
}

/// Sum of squared deviations from `about`.
pub(crate) fn sum_sq(xs: &[f64], about: f64) -> f64 {
    let mut s = CompensatedSum::new();
    xs.iter().for_each(|&x| s.add((x - about) * (x - about)));
    s.value()
}

pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<AnovaResult> {
    if groups.len() < 2 {
        return Err(Error::Degenerate(format!("ANOVA needs at least 2 groups, got {}", groups.len())));
    }
    if let Some(i) = groups.iter().position(|g| g.is_empty()) {
        return Err(Error::InvalidInput(format!("group {i} is empty")));
    }
    if groups.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("ANOVA sample".into()));
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    let k = groups.len();
    if n <= k {
        return Err(Error::Degenerate("no within-group degrees of freedom".into()));
    }
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let grand = mean(&all);
    let mut ssb = CompensatedSum::new();
    let mut ssw = CompensatedSum::new();
    for g in groups {
        let m = mean(g);
        ssb.add(g.len() as f64 * (m - grand) * (m - grand));
        ssw.add(sum_sq(g, m));
    }
    let (ssb, ssw) = (ssb.value(), ssw.value());
    // Deviations below this are rounding noise of the centred sums.
    let noise = 1e-24 * sum_sq(&all, 0.0).max(f64::MIN_POSITIVE);
    let (ssb, ssw) = (if ssb <= noise { 0.0 } else { ssb }, if ssw <= noise { 0.0 } else { ssw });
    if ssb == 0.0 && ssw == 0.0 {
        return Err(Error::Degenerate("all values identical".into()));
    }
    let (dfb, dfw) = (k - 1, n - k);
    let f = if ssw == 0.0 { f64::INFINITY } else { (ssb / dfb as f64) / (ssw / dfw as f64) };
    Ok(AnovaResult {
        f,
        df_between: dfb,
        df_within: dfw,
        p: f_sf(f, dfb as f64, dfw as f64),
        eta2: ssb / (ssb + ssw),
        ss_between: ssb,
        ss_within: ssw,
    })
}
