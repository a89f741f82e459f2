//! Parameter blobs: little-endian f32 arrays in store order.

use std::fs;
use std::path::Path;

use super::params::{ParamEntry, ParamStore};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn params_to_bytes<S: Scalar>(store: &ParamStore<S>) -> Vec<u8> {
    let mut out = Vec::with_capacity(store.len() * 4);
    for p in store.iter() {
        for &x in &p.data {
            out.extend_from_slice(&(x.as_f64() as f32).to_le_bytes());
        }
    }
    out
}

/// Rebuilds a store from a layout and the matching byte blob.
pub fn params_from_bytes<S: Scalar>(layout: &[ParamEntry], bytes: &[u8]) -> Result<ParamStore<S>> {
    let expected: usize = layout.iter().map(|e| e.shape.iter().product::<usize>()).sum();
    if bytes.len() != expected * 4 {
        return Err(Error::ShapeMismatch { expected: expected * 4, got: bytes.len() });
    }
    let mut values = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    let mut store = ParamStore::new();
    for e in layout {
        let n: usize = e.shape.iter().product();
        let data: Vec<S> = values.by_ref().take(n).map(|v| S::of(v as f64)).collect();
        if let Some(bad) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("{}[{bad}] in checkpoint", e.name)));
        }
        if store.find(&e.name).is_some() {
            return Err(Error::parse("checkpoint layout", format!("duplicate parameter {}", e.name)));
        }
        store.add(e.name.clone(), e.shape.clone(), e.kind, data);
    }
    Ok(store)
}

pub fn write_params<S: Scalar>(path: &Path, store: &ParamStore<S>) -> Result<()> {
    fs::write(path, params_to_bytes(store)).map_err(|e| Error::io(path, e))
}

pub fn read_params<S: Scalar>(path: &Path, layout: &[ParamEntry]) -> Result<ParamStore<S>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    params_from_bytes(layout, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ParamKind;

    #[test]
    fn roundtrip_through_f32() {
        let mut s = ParamStore::<f64>::new();
        s.add("a", vec![2, 2], ParamKind::Weight, vec![1.0, -0.5, 0.25, 3.0]);
        s.add("b", vec![1], ParamKind::Bias, vec![0.1]);
        let bytes = params_to_bytes(&s);
        assert_eq!(bytes.len(), 20);
        let back: ParamStore<f64> = params_from_bytes(&s.layout(), &bytes).unwrap();
        assert_eq!(back.data(crate::nn::ParamId(0)), &[1.0, -0.5, 0.25, 3.0]);
        assert_eq!(back.data(crate::nn::ParamId(1))[0], 0.1f32 as f64);
        assert!(params_from_bytes::<f64>(&s.layout(), &bytes[..16]).is_err());
    }
}
