//! Distribution-level evaluation metrics over ordered classes.

use serde::{Deserialize, Serialize};

use crate::distribution::{argmax, ClassDistribution};
use crate::error::{check_len, Error, Result};
use crate::nn::ops::LOG_CLAMP;
use crate::scalar::{CompensatedSum, Scalar};

/// Earth mover's distance with unit cost between neighbouring classes:
/// the L1 distance between the two CDFs.
pub fn wasserstein1<S: Scalar>(p: &ClassDistribution<S>, q: &ClassDistribution<S>) -> Result<S> {
    check_len(p.k(), q.k())?;
    let (mut cp, mut cq) = (S::zero(), S::zero());
    let mut total = CompensatedSum::new();
    for (&a, &b) in p.probs().iter().zip(q.probs()).take(p.k() - 1) {
        cp += a;
        cq += b;
        total.add((cp - cq).abs());
    }
    Ok(total.value())
}

/// `-Σ gt ln pred`, with `pred` clamped away from zero.
pub fn cross_entropy<S: Scalar>(gt: &ClassDistribution<S>, pred: &ClassDistribution<S>) -> Result<S> {
    check_len(gt.k(), pred.k())?;
    let clamp = S::of(LOG_CLAMP);
    Ok(gt
        .probs()
        .iter()
        .zip(pred.probs())
        .filter(|(&g, _)| g > S::zero())
        .map(|(&g, &p)| -g * p.max(clamp).ln())
        .sum())
}

/// `Σ gt ln(gt/pred)` with `0 ln 0 = 0`.
pub fn kl_div<S: Scalar>(gt: &ClassDistribution<S>, pred: &ClassDistribution<S>) -> Result<S> {
    check_len(gt.k(), pred.k())?;
    let clamp = S::of(LOG_CLAMP);
    Ok(gt
        .probs()
        .iter()
        .zip(pred.probs())
        .filter(|(&g, _)| g > S::zero())
        .map(|(&g, &p)| g * (g.ln() - p.max(clamp).ln()))
        .sum())
}

/// Mean absolute difference per class.
pub fn mae<S: Scalar>(gt: &ClassDistribution<S>, pred: &ClassDistribution<S>) -> Result<S> {
    check_len(gt.k(), pred.k())?;
    let s: S = gt.probs().iter().zip(pred.probs()).map(|(&g, &p)| (g - p).abs()).sum();
    Ok(s / S::of(gt.k() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopK {
    pub top1: bool,
    pub top2: bool,
    pub adjacent: bool,
}

/// Indices of the two largest entries, ties to the lower index.
fn top_two<S: Scalar>(xs: &[S]) -> (usize, Option<usize>) {
    let first = argmax(xs);
    let second = (0..xs.len()).filter(|&i| i != first).fold(None, |best: Option<usize>, i| match best {
        Some(b) if xs[b] >= xs[i] => Some(b),
        _ => Some(i),
    });
    (first, second)
}

pub fn top_k_and_adjacent<S: Scalar>(gt: &ClassDistribution<S>, pred: &ClassDistribution<S>) -> Result<TopK> {
    check_len(gt.k(), pred.k())?;
    let g = gt.argmax();
    let (p1, p2) = top_two(pred.probs());
    Ok(TopK { top1: p1 == g, top2: p1 == g || p2 == Some(g), adjacent: p1.abs_diff(g) <= 1 })
}

/// Per-pair averages of every metric plus the top-1 confusion matrix
/// (rows are ground truth, columns predictions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(rename = "WD")]
    pub wd: f64,
    #[serde(rename = "CE")]
    pub ce: f64,
    #[serde(rename = "MAE")]
    pub mae: f64,
    #[serde(rename = "KL")]
    pub kl: f64,
    pub top1_acc: f64,
    pub top2_acc: f64,
    pub adjacent_acc: f64,
    #[serde(rename = "top1_macro_F1")]
    pub top1_macro_f1: f64,
    pub n: usize,
    pub confusion: Vec<Vec<u64>>,
}

impl MetricsReport {
    /// Confusion matrix as CSV text with a header row of predicted classes.
    pub fn confusion_csv(&self) -> String {
        let k = self.confusion.len();
        let mut out = String::from("gt\\pred");
        for j in 0..k {
            out.push_str(&format!(",{j}"));
        }
        out.push('\n');
        for (i, row) in self.confusion.iter().enumerate() {
            out.push_str(&i.to_string());
            for c in row {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Macro F1 from a confusion matrix; classes with no support and no
/// predictions score 0.
pub fn macro_f1(confusion: &[Vec<u64>]) -> f64 {
    let k = confusion.len();
    if k == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for c in 0..k {
        let tp = confusion[c][c] as f64;
        let support: u64 = confusion[c].iter().sum();
        let predicted: u64 = confusion.iter().map(|row| row[c]).sum();
        let denom = support as f64 + predicted as f64;
        if denom > 0.0 {
            sum += 2.0 * tp / denom;
        }
    }
    sum / k as f64
}

/// Scores `preds` against `gts` pair by pair.
pub fn evaluate<S: Scalar>(gts: &[ClassDistribution<S>], preds: &[ClassDistribution<S>]) -> Result<MetricsReport> {
    check_len(gts.len(), preds.len())?;
    let Some(first) = gts.first() else {
        return Err(Error::InvalidInput("empty evaluation set".into()));
    };
    let k = first.k();
    let mut sums = [CompensatedSum::<f64>::new(); 4];
    let (mut top1, mut top2, mut adj) = (0usize, 0usize, 0usize);
    let mut confusion = vec![vec![0u64; k]; k];
    for (gt, pred) in gts.iter().zip(preds) {
        check_len(k, gt.k())?;
        check_len(k, pred.k())?;
        sums[0].add(wasserstein1(gt, pred)?.as_f64());
        sums[1].add(cross_entropy(gt, pred)?.as_f64());
        sums[2].add(mae(gt, pred)?.as_f64());
        sums[3].add(kl_div(gt, pred)?.as_f64());
        let t = top_k_and_adjacent(gt, pred)?;
        top1 += t.top1 as usize;
        top2 += t.top2 as usize;
        adj += t.adjacent as usize;
        confusion[gt.argmax()][pred.argmax()] += 1;
    }
    let n = gts.len() as f64;
    Ok(MetricsReport {
        wd: sums[0].value() / n,
        ce: sums[1].value() / n,
        mae: sums[2].value() / n,
        kl: sums[3].value() / n,
        top1_acc: top1 as f64 / n,
        top2_acc: top2 as f64 / n,
        adjacent_acc: adj as f64 / n,
        top1_macro_f1: macro_f1(&confusion),
        n: gts.len(),
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(v: &[f64]) -> ClassDistribution<f64> {
        ClassDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn wasserstein_examples() {
        let p = d(&[0.1, 0.2, 0.3, 0.2, 0.2]);
        assert_eq!(wasserstein1(&p, &p).unwrap(), 0.0);
        let a = ClassDistribution::<f64>::one_hot(5, 0);
        let b = ClassDistribution::<f64>::one_hot(5, 4);
        assert_eq!(wasserstein1(&a, &b).unwrap(), 4.0);
        let x = d(&[0.5, 0.5, 0.0, 0.0, 0.0]);
        let y = d(&[0.0, 0.0, 0.0, 0.5, 0.5]);
        assert!((wasserstein1(&x, &y).unwrap() - 3.0).abs() < 1e-12);
        assert!(wasserstein1(&x, &d(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn entropy_examples() {
        let u = ClassDistribution::<f64>::uniform(5);
        assert!((cross_entropy(&u, &u).unwrap() - 5f64.ln()).abs() < 1e-12);
        assert!(kl_div(&u, &u).unwrap().abs() < 1e-15);
        assert_eq!(mae(&u, &u).unwrap(), 0.0);
        let kl = kl_div(&d(&[1.0, 0.0, 0.0, 0.0, 0.0]), &d(&[0.5, 0.5, 0.0, 0.0, 0.0])).unwrap();
        assert!((kl - 2f64.ln()).abs() < 1e-12);
        let ce = cross_entropy(&d(&[0.5, 0.5, 0.0, 0.0, 0.0]), &d(&[0.25, 0.25, 0.25, 0.25, 0.0])).unwrap();
        assert!((ce - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn topk_examples() {
        let gt = ClassDistribution::<f64>::one_hot(5, 3);
        let t = top_k_and_adjacent(&gt, &d(&[0.1, 0.1, 0.5, 0.2, 0.1])).unwrap();
        assert!(t.adjacent && !t.top1 && t.top2);
        let gt2 = ClassDistribution::<f64>::one_hot(5, 2);
        let t = top_k_and_adjacent(&gt2, &d(&[0.6, 0.1, 0.1, 0.1, 0.1])).unwrap();
        assert!(!t.adjacent && !t.top1);
        let p = d(&[0.1, 0.2, 0.3, 0.2, 0.2]);
        let t = top_k_and_adjacent(&p, &p).unwrap();
        assert!(t.top1 && t.top2 && t.adjacent);
    }

    #[test]
    fn top_two_breaks_ties_low() {
        assert_eq!(top_two(&[0.2_f64, 0.4, 0.2, 0.2]), (1, Some(0)));
        assert_eq!(top_two(&[0.5_f64]), (0, None));
    }

    #[test]
    fn evaluate_perfect_and_uniform() {
        let gts: Vec<_> = (0..5).map(|c| ClassDistribution::<f64>::one_hot(5, c)).collect();
        let r = evaluate(&gts, &gts).unwrap();
        assert_eq!(r.wd, 0.0);
        assert_eq!(r.ce, 0.0);
        assert_eq!((r.top1_acc, r.top2_acc, r.adjacent_acc, r.top1_macro_f1), (1.0, 1.0, 1.0, 1.0));
        assert_eq!(r.confusion.iter().flatten().sum::<u64>(), 5);

        let uni = vec![ClassDistribution::<f64>::uniform(5); 5];
        let r = evaluate(&gts, &uni).unwrap();
        assert!((r.ce - 5f64.ln()).abs() < 1e-12);
        for (i, row) in r.confusion.iter().enumerate() {
            assert_eq!(row.iter().sum::<u64>(), 1, "row {i}");
        }
        assert!(evaluate::<f64>(&[], &[]).is_err());
    }

    #[test]
    fn macro_f1_counts_absent_classes_as_zero() {
        // two classes present and perfectly predicted, three absent
        let mut c = vec![vec![0u64; 5]; 5];
        c[0][0] = 3;
        c[1][1] = 2;
        assert!((macro_f1(&c) - 0.4).abs() < 1e-12);
    }

    fn dist(k: usize) -> impl Strategy<Value = ClassDistribution<f64>> {
        prop::collection::vec(0.0f64..1.0, k).prop_filter_map("nonzero", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-6).then(|| ClassDistribution::new(v.iter().map(|x| x / s).collect()).ok()).flatten()
        })
    }

    proptest! {
        #[test]
        fn wasserstein_is_a_metric(p in dist(5), q in dist(5), r in dist(5)) {
            let pq = wasserstein1(&p, &q).unwrap();
            prop_assert!((pq - wasserstein1(&q, &p).unwrap()).abs() < 1e-12);
            prop_assert!(pq <= wasserstein1(&p, &r).unwrap() + wasserstein1(&r, &q).unwrap() + 1e-9);
            prop_assert!(pq >= 0.0);
        }

        #[test]
        fn kl_non_negative(p in dist(5), q in dist(5)) {
            prop_assert!(kl_div(&p, &q).unwrap() >= -1e-12);
        }

        #[test]
        fn adjacent_at_least_top1(gts in prop::collection::vec(dist(5), 1..20), preds in prop::collection::vec(dist(5), 20)) {
            let preds = &preds[..gts.len()];
            let r = evaluate(&gts, preds).unwrap();
            prop_assert!(r.adjacent_acc >= r.top1_acc);
            prop_assert!(r.top2_acc >= r.top1_acc);
        }
    }
}
