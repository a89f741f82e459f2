//! Named parameter arrays with a flat view for gradient exchange.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    /// Dense weight matrix; the only kind subject to L1.
    Weight,
    Bias,
    /// Per-entity embedding table.
    Kernel,
}

/// Index of a parameter inside its [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param<S> {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: ParamKind,
    pub data: Vec<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: ParamKind,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<S> {
    params: Vec<Param<S>>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, shape: Vec<usize>, kind: ParamKind, data: Vec<S>) -> ParamId {
        let name = name.into();
        assert_eq!(shape.iter().product::<usize>(), data.len(), "data length for {name}");
        assert!(self.params.iter().all(|p| p.name != name), "duplicate parameter {name}");
        self.params.push(Param { name, shape, kind, data });
        ParamId(self.params.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Param<S> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param<S> {
        &mut self.params[id.0]
    }

    pub fn data(&self, id: ParamId) -> &[S] {
        &self.params[id.0].data
    }

    pub fn data_mut(&mut self, id: ParamId) -> &mut [S] {
        &mut self.params[id.0].data
    }

    /// Mutable access to two distinct parameters at once.
    pub fn pair_mut(&mut self, a: ParamId, b: ParamId) -> (&mut [S], &mut [S]) {
        assert_ne!(a, b, "pair_mut needs distinct parameters");
        if a.0 < b.0 {
            let (lo, hi) = self.params.split_at_mut(b.0);
            (&mut lo[a.0].data, &mut hi[0].data)
        } else {
            let (lo, hi) = self.params.split_at_mut(a.0);
            (&mut hi[0].data, &mut lo[b.0].data)
        }
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<S>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<S>> {
        self.params.iter_mut()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Total scalar count.
    pub fn len(&self) -> usize {
        self.params.iter().map(|p| p.data.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn layout(&self) -> Vec<ParamEntry> {
        self.params
            .iter()
            .map(|p| ParamEntry { name: p.name.clone(), shape: p.shape.clone(), kind: p.kind })
            .collect()
    }

    /// Same layout, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self {
            params: self
                .params
                .iter()
                .map(|p| Param { name: p.name.clone(), shape: p.shape.clone(), kind: p.kind, data: vec![S::zero(); p.data.len()] })
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for p in &mut self.params {
            p.data.iter_mut().for_each(|x| *x = S::zero());
        }
    }

    /// Concatenation of every parameter in store order.
    pub fn flatten(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.len());
        for p in &self.params {
            out.extend_from_slice(&p.data);
        }
        out
    }

    pub fn unflatten(&mut self, flat: &[S]) -> Result<()> {
        check_len(self.len(), flat.len())?;
        let mut off = 0;
        for p in &mut self.params {
            let n = p.data.len();
            p.data.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    /// `self += alpha * other`; layouts must match.
    pub fn add_scaled(&mut self, other: &ParamStore<S>, alpha: S) -> Result<()> {
        self.check_same_layout(other)?;
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            for (x, &y) in a.data.iter_mut().zip(&b.data) {
                *x += alpha * y;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: S) {
        for p in &mut self.params {
            p.data.iter_mut().for_each(|x| *x *= alpha);
        }
    }

    pub fn check_same_layout(&self, other: &ParamStore<S>) -> Result<()> {
        if self.params.len() != other.params.len() {
            return Err(Error::ShapeMismatch { expected: self.params.len(), got: other.params.len() });
        }
        for (a, b) in self.params.iter().zip(&other.params) {
            if a.shape != b.shape {
                return Err(Error::InvalidInput(format!(
                    "parameter {} has shape {:?} vs {:?}",
                    a.name, a.shape, b.shape
                )));
            }
        }
        Ok(())
    }

    /// Appends rows to a 2-D parameter (kernel tables grow append-only).
    pub fn append_rows(&mut self, id: ParamId, rows: &[S]) {
        let p = &mut self.params[id.0];
        assert_eq!(p.shape.len(), 2, "append_rows on non-matrix {}", p.name);
        let width = p.shape[1];
        assert_eq!(rows.len() % width, 0);
        p.data.extend_from_slice(rows);
        p.shape[0] += rows.len() / width;
    }

    pub fn cast<T: Scalar>(&self) -> ParamStore<T> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    kind: p.kind,
                    data: p.data.iter().map(|&x| T::of(x.as_f64())).collect(),
                })
                .collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.data.iter().all(|x| x.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn store(a: Vec<f64>, b: Vec<f64>) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.add("w", vec![a.len()], ParamKind::Weight, a);
        s.add("b", vec![b.len()], ParamKind::Bias, b);
        s
    }

    proptest! {
        #[test]
        fn flatten_unflatten_roundtrip(a in prop::collection::vec(-1e6f64..1e6, 1..20),
                                       b in prop::collection::vec(-1e6f64..1e6, 1..20)) {
            let s = store(a, b);
            let flat = s.flatten();
            let mut t = s.zeros_like();
            t.unflatten(&flat).unwrap();
            prop_assert_eq!(t, s);
        }
    }

    #[test]
    fn unflatten_checks_length() {
        let mut s = store(vec![1.0], vec![2.0]);
        assert!(s.unflatten(&[1.0]).is_err());
    }

    #[test]
    fn append_rows_grows_first_dim() {
        let mut s = ParamStore::<f64>::new();
        let id = s.add("k", vec![1, 2], ParamKind::Kernel, vec![1.0, 2.0]);
        s.append_rows(id, &[3.0, 4.0, 5.0, 6.0]);
        assert_eq!(s.get(id).shape, vec![3, 2]);
        assert_eq!(s.data(id)[..2], [1.0, 2.0]);
    }
}
