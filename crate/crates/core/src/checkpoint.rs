//! Model checkpoints: `manifest.json`, `params.bin` (little-endian f32 in
//! manifest order) and, when known, the encoding `schema.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::SoftmaxRegressor;
use crate::error::{Error, Result};
use crate::features::EncodingSchema;
use crate::lkk::{ArchConfig, GatePolicy, IdTable, LkkModel};
use crate::nn::checkpoint::{params_from_bytes, params_to_bytes};
use crate::nn::ParamEntry;
use crate::scalar::Scalar;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARAMS_FILE: &str = "params.bin";
pub const SCHEMA_FILE: &str = "schema.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lkk,
    SoftmaxRegression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub model: ModelKind,
    pub num_classes: usize,
    pub schema_hash: Option<String>,
    pub arch: Option<ArchConfig>,
    pub layout: Vec<ParamEntry>,
    pub player_ids: Vec<String>,
    pub game_ids: Vec<String>,
    pub gate: Option<GatePolicy>,
}

#[derive(Debug, Clone)]
pub enum Checkpoint<S> {
    Lkk { model: LkkModel<S>, gate: GatePolicy },
    Softmax(SoftmaxRegressor<S>),
}

#[derive(Debug, Clone)]
pub struct Loaded<S> {
    pub manifest: Manifest,
    pub checkpoint: Checkpoint<S>,
    pub schema: Option<EncodingSchema>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::parse(path.display().to_string(), e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
}

fn write_all(dir: &Path, manifest: &Manifest, params: Vec<u8>, schema: Option<&EncodingSchema>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(&dir.join(MANIFEST_FILE), manifest)?;
    let p = dir.join(PARAMS_FILE);
    fs::write(&p, params).map_err(|e| Error::io(&p, e))?;
    if let Some(s) = schema {
        write_json(&dir.join(SCHEMA_FILE), s)?;
    }
    Ok(())
}

pub fn save_lkk<S: Scalar>(dir: &Path, model: &LkkModel<S>, gate: &GatePolicy, schema: Option<&EncodingSchema>) -> Result<()> {
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        model: ModelKind::Lkk,
        num_classes: model.num_classes(),
        schema_hash: schema.map(EncodingSchema::hash),
        arch: Some(*model.arch()),
        layout: model.params().layout(),
        player_ids: model.players().ids().to_vec(),
        game_ids: model.games().ids().to_vec(),
        gate: Some(gate.clone()),
    };
    write_all(dir, &manifest, params_to_bytes(model.params()), schema)
}

pub fn save_softmax<S: Scalar>(dir: &Path, model: &SoftmaxRegressor<S>, schema: Option<&EncodingSchema>) -> Result<()> {
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        model: ModelKind::SoftmaxRegression,
        num_classes: model.num_classes(),
        schema_hash: schema.map(EncodingSchema::hash),
        arch: None,
        layout: model.params().layout(),
        player_ids: vec![],
        game_ids: vec![],
        gate: None,
    };
    write_all(dir, &manifest, params_to_bytes(model.params()), schema)
}

pub fn load<S: Scalar>(dir: &Path) -> Result<Loaded<S>> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST_FILE))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::parse("checkpoint manifest", format!("unsupported format_version {}", manifest.format_version)));
    }
    let p = dir.join(PARAMS_FILE);
    let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
    let params = params_from_bytes::<S>(&manifest.layout, &bytes)?;
    let schema_path = dir.join(SCHEMA_FILE);
    let schema: Option<EncodingSchema> = if schema_path.exists() { Some(read_json(&schema_path)?) } else { None };
    if let (Some(s), Some(h)) = (&schema, &manifest.schema_hash) {
        if &s.hash() != h {
            return Err(Error::InvalidInput("schema.json does not match the manifest schema hash".into()));
        }
    }
    let checkpoint = match manifest.model {
        ModelKind::Lkk => {
            let arch = manifest.arch.ok_or_else(|| Error::parse("checkpoint manifest", "lkk model without arch"))?;
            let model = LkkModel::from_parts(
                arch,
                params,
                IdTable::from_ids(manifest.player_ids.clone())?,
                IdTable::from_ids(manifest.game_ids.clone())?,
            )?;
            let gate = manifest.gate.clone().unwrap_or_default();
            Checkpoint::Lkk { model, gate }
        }
        ModelKind::SoftmaxRegression => Checkpoint::Softmax(SoftmaxRegressor::from_params(params)?),
    };
    if checkpoint_classes(&checkpoint) != manifest.num_classes {
        return Err(Error::parse("checkpoint manifest", "num_classes disagrees with the parameters"));
    }
    Ok(Loaded { manifest, checkpoint, schema })
}

fn checkpoint_classes<S: Scalar>(c: &Checkpoint<S>) -> usize {
    match c {
        Checkpoint::Lkk { model, .. } => model.num_classes(),
        Checkpoint::Softmax(m) => m.num_classes(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lkk::Path as KernelPath;

    #[test]
    fn lkk_roundtrip_matches_f32_rounding() {
        let arch = ArchConfig { input_dim: 6, ..ArchConfig::default() };
        let mut m = LkkModel::<f64>::new(arch, 5).unwrap();
        m.register_player("p1");
        m.register_game("g1");
        let mut gate = GatePolicy::default();
        for g in ["g1", "g2", "g3"] {
            gate.record("p1", g);
        }
        let dir = tempfile::tempdir().unwrap();
        save_lkk(dir.path(), &m, &gate, None).unwrap();
        let loaded = load::<f64>(dir.path()).unwrap();
        let Checkpoint::Lkk { model, gate: g2 } = loaded.checkpoint else { panic!("wrong kind") };
        assert_eq!(g2.path_for("p1", "g1"), KernelPath::Wp);
        for (a, b) in m.params().iter().zip(model.params().iter()) {
            assert_eq!(a.name, b.name);
            for (x, y) in a.data.iter().zip(&b.data) {
                assert_eq!(*x as f32 as f64, *y);
            }
        }
        assert_eq!(model.players().ids(), ["p1".to_string()]);
    }

    #[test]
    fn truncated_params_rejected() {
        let m = SoftmaxRegressor::<f64>::zeros(3, 5);
        let dir = tempfile::tempdir().unwrap();
        save_softmax(dir.path(), &m, None).unwrap();
        let p = dir.path().join(PARAMS_FILE);
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 4]).unwrap();
        assert!(load::<f64>(dir.path()).is_err());
    }
}
