use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{stable_sum, Scalar};

/// Probability vector over `K` ordered classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassDistribution<S> {
    probs: Vec<S>,
}

pub(crate) fn sum_tolerance<S: Scalar>() -> f64 {
    (64.0 * S::epsilon().as_f64()).max(1e-9)
}

impl<S: Scalar> ClassDistribution<S> {
    /// Validates that `probs` lies on the simplex.
    pub fn new(probs: Vec<S>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::NotADistribution("no classes".into()));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < S::zero() || p > S::one() {
                return Err(Error::NotADistribution(format!("entry {i} = {p} outside [0,1]")));
            }
        }
        let total = stable_sum(&probs).as_f64();
        if (total - 1.0).abs() > sum_tolerance::<S>() {
            return Err(Error::NotADistribution(format!("sums to {total}")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(k: usize) -> Self {
        let p = S::one() / S::of(k as f64);
        Self { probs: vec![p; k] }
    }

    /// Point mass at `class`.
    pub fn one_hot(k: usize, class: usize) -> Self {
        let mut probs = vec![S::zero(); k];
        probs[class] = S::one();
        Self { probs }
    }

    /// Trusts the caller; used for softmax outputs which are valid by
    /// construction.
    pub(crate) fn from_softmax(probs: Vec<S>) -> Self {
        Self { probs }
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn into_inner(self) -> Vec<S> {
        self.probs
    }

    /// Index of the largest probability; ties go to the lower index.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }

    pub fn cast<T: Scalar>(&self) -> ClassDistribution<T> {
        ClassDistribution { probs: self.probs.iter().map(|p| T::of(p.as_f64())).collect() }
    }
}

pub(crate) fn argmax<S: Scalar>(xs: &[S]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}
