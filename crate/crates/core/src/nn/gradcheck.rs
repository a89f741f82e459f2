//! Central finite-difference gradient checking.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::Serialize;

use super::params::{ParamId, ParamStore};
use crate::error::Result;

/// Floor on the denominator of the relative error, so entries whose true
/// gradient is ~0 are judged on absolute error instead.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckEntry {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub step: f64,
    pub tolerance: f64,
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub worst: Option<GradCheckEntry>,
    pub per_param: Vec<(String, usize, f64)>,
    pub passed: bool,
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERROR_FLOOR)
}

/// Compares `analytic` against central differences of `loss` at the
/// given coordinates.
pub fn grad_check_at<F>(
    params: &ParamStore<f64>,
    analytic: &ParamStore<f64>,
    coords: &[(ParamId, usize)],
    step: f64,
    tolerance: f64,
    mut loss: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore<f64>) -> Result<f64>,
{
    params.check_same_layout(analytic)?;
    let mut work = params.clone();
    let mut max_rel = 0.0_f64;
    let mut max_abs = 0.0_f64;
    let mut worst: Option<GradCheckEntry> = None;
    let mut per_param: Vec<(String, usize, f64)> = Vec::new();
    for &(id, idx) in coords {
        let orig = params.data(id)[idx];
        work.data_mut(id)[idx] = orig + step;
        let up = loss(&work)?;
        work.data_mut(id)[idx] = orig - step;
        let down = loss(&work)?;
        work.data_mut(id)[idx] = orig;
        let numeric = (up - down) / (2.0 * step);
        let a = analytic.data(id)[idx];
        let rel = relative_error(a, numeric);
        max_abs = max_abs.max((a - numeric).abs());
        let name = &params.get(id).name;
        match per_param.iter_mut().find(|(n, _, _)| n == name) {
            Some(entry) => {
                entry.1 += 1;
                entry.2 = entry.2.max(rel);
            }
            None => per_param.push((name.clone(), 1, rel)),
        }
        if rel >= max_rel {
            max_rel = rel;
            worst = Some(GradCheckEntry { param: name.clone(), index: idx, analytic: a, numeric, rel_error: rel });
        }
    }
    Ok(GradCheckReport {
        step,
        tolerance,
        checked: coords.len(),
        max_rel_error: max_rel,
        max_abs_error: max_abs,
        worst,
        per_param,
        passed: max_rel < tolerance,
    })
}

/// Picks up to `per_param` random coordinates from every parameter, or from
/// the listed rows only for parameters in `row_restrict`.
pub fn sample_coords<R: Rng>(
    params: &ParamStore<f64>,
    per_param: usize,
    row_restrict: &[(ParamId, Vec<usize>)],
    rng: &mut R,
) -> Vec<(ParamId, usize)> {
    let mut coords = Vec::new();
    for id in params.ids() {
        let p = params.get(id);
        let candidates: Vec<usize> = match row_restrict.iter().find(|(rid, _)| *rid == id) {
            Some((_, rows)) => {
                let width = p.shape[1];
                rows.iter().flat_map(|r| (r * width)..((r + 1) * width)).collect()
            }
            None => (0..p.data.len()).collect(),
        };
        coords.extend(candidates.choose_multiple(rng, per_param.min(candidates.len())).map(|&i| (id, i)));
    }
    coords
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::ParamKind;

    fn linear_store() -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.add("w", vec![3], ParamKind::Weight, vec![0.4, -1.1, 2.0]);
        s
    }

    const XS: [[f64; 3]; 3] = [[1.0, 2.0, 0.5], [-1.0, 0.3, 2.0], [0.2, 0.2, -0.7]];
    const YS: [f64; 3] = [1.0, -2.0, 0.5];

    fn sq_loss(s: &ParamStore<f64>) -> f64 {
        let w = s.data(ParamId(0));
        XS.iter()
            .zip(YS)
            .map(|(x, y)| {
                let r: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() - y;
                0.5 * r * r
            })
            .sum()
    }

    fn sq_grad(s: &ParamStore<f64>) -> ParamStore<f64> {
        let w = s.data(ParamId(0)).to_vec();
        let mut g = s.zeros_like();
        for (x, y) in XS.iter().zip(YS) {
            let r: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() - y;
            for j in 0..3 {
                g.data_mut(ParamId(0))[j] += r * x[j];
            }
        }
        g
    }

    #[test]
    fn quadratic_loss_is_exact() {
        let s = linear_store();
        let g = sq_grad(&s);
        let coords: Vec<_> = (0..3).map(|i| (ParamId(0), i)).collect();
        let rep = grad_check_at(&s, &g, &coords, 1e-5, 1e-9, |p| Ok(sq_loss(p))).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.max_rel_error < 1e-9);
    }

    #[test]
    fn corrupted_gradient_fails() {
        let s = linear_store();
        let mut g = sq_grad(&s);
        g.data_mut(ParamId(0))[1] *= 1.01;
        let coords: Vec<_> = (0..3).map(|i| (ParamId(0), i)).collect();
        let rep = grad_check_at(&s, &g, &coords, 1e-5, 1e-4, |p| Ok(sq_loss(p))).unwrap();
        assert!(!rep.passed);
        assert_eq!(rep.worst.unwrap().index, 1);
    }
}
