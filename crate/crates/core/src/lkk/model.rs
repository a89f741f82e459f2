//! Encoder/decoder backbone with player and game knowledge kernels.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gate::{GatePolicy, Path};
use crate::dataset::EncodedPair;
use crate::distribution::ClassDistribution;
use crate::error::{check_len, Error, Result};
use crate::nn::{
    l1_penalty_and_grad, soft_cross_entropy, softce_loss_and_grad, softmax_forward, DenseLayer, Init, Mlp, MlpCache,
    ParamId, ParamKind, ParamStore,
};
use crate::rng::{stream, substream, Stream};
use crate::scalar::{CompensatedSum, Scalar};

/// Samples per parallel work unit when computing batch gradients. Fixed so
/// that the reduction order, and therefore the result, never depends on the
/// thread count.
pub const GRAD_CHUNK: usize = 32;

const PLAYER_KERNEL_STREAM: u64 = 1 << 40;
const GAME_KERNEL_STREAM: u64 = 2 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    /// Encoded feature width; 0 means "take it from the data".
    pub input_dim: usize,
    pub encoder_hidden: usize,
    pub latent_dim: usize,
    pub decoder_hidden: usize,
    pub kernel_dim: usize,
    pub num_classes: usize,
    /// Kernel entries start uniform in `[-kernel_init, kernel_init]`.
    pub kernel_init: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            input_dim: 0,
            encoder_hidden: 128,
            latent_dim: 64,
            decoder_hidden: 64,
            kernel_dim: 16,
            num_classes: 5,
            kernel_init: 0.01,
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [self.input_dim, self.encoder_hidden, self.latent_dim, self.decoder_hidden, self.kernel_dim];
        if dims.contains(&0) {
            return Err(Error::Config(format!("all layer widths must be positive: {self:?}")));
        }
        if self.num_classes < 2 {
            return Err(Error::Config("num_classes must be at least 2".into()));
        }
        if !(self.kernel_init >= 0.0 && self.kernel_init.is_finite()) {
            return Err(Error::Config("kernel_init must be a non-negative number".into()));
        }
        Ok(())
    }
}

/// Append-only map from external id to kernel row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdTable {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdTable {
    pub fn get(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Row for `id`, and whether it was just created.
    fn insert(&mut self, id: &str) -> (usize, bool) {
        if let Some(&row) = self.index.get(id) {
            return (row, false);
        }
        let row = self.ids.len();
        self.ids.push(id.to_owned());
        self.index.insert(id.to_owned(), row);
        (row, true)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn from_ids(ids: Vec<String>) -> Result<Self> {
        let mut t = IdTable::default();
        for id in &ids {
            if !t.insert(id).1 {
                return Err(Error::InvalidInput(format!("duplicate id {id:?}")));
            }
        }
        Ok(t)
    }
}

/// The four path outputs for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct PathOutputs<S> {
    pub wo: ClassDistribution<S>,
    pub wp: ClassDistribution<S>,
    pub wg: ClassDistribution<S>,
    pub wb: ClassDistribution<S>,
}

impl<S: Scalar> PathOutputs<S> {
    pub fn get(&self, path: Path) -> &ClassDistribution<S> {
        match path {
            Path::Wo => &self.wo,
            Path::Wp => &self.wp,
            Path::Wg => &self.wg,
            Path::Wb => &self.wb,
        }
    }
}

/// Mean of the training criterion over the four paths.
pub fn four_case_loss<S: Scalar>(paths: &PathOutputs<S>, gt: &ClassDistribution<S>) -> S {
    let total: S = Path::ALL.iter().map(|&p| soft_cross_entropy(paths.get(p).probs(), gt.probs())).sum();
    total / S::of(4.0)
}

/// Intermediate values of one forward pass, kept for backpropagation.
struct Trace<S> {
    enc: MlpCache<S>,
    mp_in: Vec<S>,
    mg_in_g: Vec<S>,
    mg_in_b: Vec<S>,
    dec: [MlpCache<S>; 4],
}

#[derive(Debug, Clone)]
pub struct LkkModel<S> {
    arch: ArchConfig,
    params: ParamStore<S>,
    encoder: Mlp,
    decoder: Mlp,
    merge_p: DenseLayer,
    merge_g: DenseLayer,
    kernel_p: ParamId,
    kernel_g: ParamId,
    players: IdTable,
    games: IdTable,
    kernel_seed: u64,
}

fn concat<S: Copy>(a: &[S], b: &[S]) -> Vec<S> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

fn add_into<S: Scalar>(acc: &mut [S], x: &[S]) {
    for (a, &b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

impl<S: Scalar> LkkModel<S> {
    /// Fresh model: He/Xavier backbone, zero merge layers, empty kernel
    /// tables.
    pub fn new(arch: ArchConfig, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = stream(seed, Stream::Init);
        let mut params = ParamStore::new();
        let (l, kd) = (arch.latent_dim, arch.kernel_dim);
        let encoder = Mlp {
            layers: vec![
                DenseLayer::new(&mut params, "encoder.0", arch.input_dim, arch.encoder_hidden, Init::HeUniform, &mut rng),
                DenseLayer::new(&mut params, "encoder.1", arch.encoder_hidden, l, Init::HeUniform, &mut rng),
            ],
            relu_last: true,
        };
        let decoder = Mlp {
            layers: vec![
                DenseLayer::new(&mut params, "decoder.0", l, arch.decoder_hidden, Init::HeUniform, &mut rng),
                DenseLayer::new(&mut params, "decoder.1", arch.decoder_hidden, arch.num_classes, Init::XavierUniform, &mut rng),
            ],
            relu_last: false,
        };
        let merge_p = DenseLayer::new(&mut params, "merge_p", l + kd, l, Init::Zeros, &mut rng);
        let merge_g = DenseLayer::new(&mut params, "merge_g", l + kd, l, Init::Zeros, &mut rng);
        let kernel_p = params.add("kernel_p", vec![0, kd], ParamKind::Kernel, Vec::new());
        let kernel_g = params.add("kernel_g", vec![0, kd], ParamKind::Kernel, Vec::new());
        Ok(Self {
            arch,
            params,
            encoder,
            decoder,
            merge_p,
            merge_g,
            kernel_p,
            kernel_g,
            players: IdTable::default(),
            games: IdTable::default(),
            kernel_seed: rng.random(),
        })
    }

    /// Rebuilds a model from stored parameters and id tables.
    pub fn from_parts(arch: ArchConfig, params: ParamStore<S>, players: IdTable, games: IdTable) -> Result<Self> {
        let mut m = Self::new(arch, 0)?;
        for id in players.ids() {
            m.register_player(id);
        }
        for id in games.ids() {
            m.register_game(id);
        }
        if m.params.layout() != params.layout() {
            return Err(Error::InvalidInput("stored parameter layout does not match the architecture".into()));
        }
        m.params = params;
        Ok(m)
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    pub fn num_classes(&self) -> usize {
        self.arch.num_classes
    }

    pub fn params(&self) -> &ParamStore<S> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<S> {
        &mut self.params
    }

    pub fn players(&self) -> &IdTable {
        &self.players
    }

    pub fn games(&self) -> &IdTable {
        &self.games
    }

    pub fn kernel_ids(&self) -> (ParamId, ParamId) {
        (self.kernel_p, self.kernel_g)
    }

    pub fn merge_layers(&self) -> (DenseLayer, DenseLayer) {
        (self.merge_p, self.merge_g)
    }

    fn new_kernel_row(&self, stream_base: u64, row: usize) -> Vec<S> {
        let mut rng = substream(self.kernel_seed, Stream::Init, stream_base + row as u64);
        let b = self.arch.kernel_init;
        (0..self.arch.kernel_dim)
            .map(|_| if b > 0.0 { S::of(rng.random_range(-b..=b)) } else { S::zero() })
            .collect()
    }

    /// Kernel row for `id`, appending a fresh one on first sight.
    pub fn register_player(&mut self, id: &str) -> usize {
        let (row, fresh) = self.players.insert(id);
        if fresh {
            let init = self.new_kernel_row(PLAYER_KERNEL_STREAM, row);
            self.params.append_rows(self.kernel_p, &init);
        }
        row
    }

    pub fn register_game(&mut self, id: &str) -> usize {
        let (row, fresh) = self.games.insert(id);
        if fresh {
            let init = self.new_kernel_row(GAME_KERNEL_STREAM, row);
            self.params.append_rows(self.kernel_g, &init);
        }
        row
    }

    /// Registers every id in `pairs`, in sorted order so that row
    /// assignment does not depend on input order.
    pub fn register_all(&mut self, pairs: &[EncodedPair<S>]) {
        let mut ps: Vec<&str> = pairs.iter().map(|p| p.player_guid.as_str()).collect();
        let mut gs: Vec<&str> = pairs.iter().map(|p| p.game_id.as_str()).collect();
        ps.sort_unstable();
        gs.sort_unstable();
        ps.dedup();
        gs.dedup();
        for p in ps {
            self.register_player(p);
        }
        for g in gs {
            self.register_game(g);
        }
    }

    fn kernel_row(&self, params: &ParamStore<S>, table: ParamId, row: Option<usize>) -> Vec<S> {
        let kd = self.arch.kernel_dim;
        match row {
            Some(r) => params.data(table)[r * kd..(r + 1) * kd].to_vec(),
            None => vec![S::zero(); kd],
        }
    }

    fn trace(&self, params: &ParamStore<S>, x: &[S], prow: Option<usize>, grow: Option<usize>) -> Result<Trace<S>> {
        check_len(self.arch.input_dim, x.len())?;
        let enc = self.encoder.forward(params, x)?;
        let h = enc.output();
        let kp = self.kernel_row(params, self.kernel_p, prow);
        let kg = self.kernel_row(params, self.kernel_g, grow);
        let mp_in = concat(h, &kp);
        let a_p = self.merge_p.forward(params, &mp_in)?;
        let mg_in_g = concat(h, &kg);
        let a_g = self.merge_g.forward(params, &mg_in_g)?;
        let mg_in_b = concat(&a_p, &kg);
        let a_b = self.merge_g.forward(params, &mg_in_b)?;

        let z_wo = h.to_vec();
        let mut z_wp = h.to_vec();
        add_into(&mut z_wp, &a_p);
        let mut z_wg = h.to_vec();
        add_into(&mut z_wg, &a_g);
        let mut z_wb = z_wp.clone();
        add_into(&mut z_wb, &a_b);
        let dec = [
            self.decoder.forward(params, &z_wo)?,
            self.decoder.forward(params, &z_wp)?,
            self.decoder.forward(params, &z_wg)?,
            self.decoder.forward(params, &z_wb)?,
        ];
        Ok(Trace { enc, mp_in, mg_in_g, mg_in_b, dec })
    }

    fn outputs_from(trace: &Trace<S>) -> PathOutputs<S> {
        let d = |i: usize| ClassDistribution::from_softmax(softmax_forward(trace.dec[i].output()));
        PathOutputs { wo: d(0), wp: d(1), wg: d(2), wb: d(3) }
    }

    fn rows(&self, player: &str, game: &str) -> (Option<usize>, Option<usize>) {
        (self.players.get(player), self.games.get(game))
    }

    /// All four path outputs. Ids without a kernel row use a zero kernel.
    pub fn forward_paths(&self, x: &[S], player: &str, game: &str) -> Result<PathOutputs<S>> {
        let (p, g) = self.rows(player, game);
        Ok(Self::outputs_from(&self.trace(&self.params, x, p, g)?))
    }

    pub fn forward_paths_with(&self, params: &ParamStore<S>, x: &[S], player: &str, game: &str) -> Result<PathOutputs<S>> {
        let (p, g) = self.rows(player, game);
        Ok(Self::outputs_from(&self.trace(params, x, p, g)?))
    }

    /// Gated prediction.
    pub fn predict(&self, x: &[S], player: &str, game: &str, gate: &GatePolicy) -> Result<(ClassDistribution<S>, Path)> {
        let path = gate.path_for(player, game);
        Ok((self.forward_paths(x, player, game)?.get(path).clone(), path))
    }

    /// Backpropagates the four-case loss of one sample, scaled by `scale`,
    /// into `grads`. Returns the unscaled loss.
    fn sample_backward(
        &self,
        params: &ParamStore<S>,
        sample: &EncodedPair<S>,
        scale: S,
        grads: &mut ParamStore<S>,
    ) -> Result<S> {
        let (prow, grow) = self.rows(&sample.player_guid, &sample.game_id);
        let tr = self.trace(params, &sample.x, prow, grow)?;
        let l = self.arch.latent_dim;
        let quarter = scale / S::of(4.0);
        let mut loss = S::zero();
        let mut dz: Vec<Vec<S>> = Vec::with_capacity(4);
        for cache in &tr.dec {
            let (lk, mut d) = softce_loss_and_grad(cache.output(), sample.target.probs())?;
            loss += lk;
            d.iter_mut().for_each(|v| *v *= quarter);
            dz.push(self.decoder.backward(params, grads, cache, &d, true)?.expect("input gradient requested"));
        }
        let [dz_wo, dz_wp, dz_wg, dz_wb] = <[Vec<S>; 4]>::try_from(dz).expect("four paths");

        let dx_b = self.merge_g.backward(params, grads, &tr.mg_in_b, &dz_wb, true)?.expect("requested");
        let dx_g = self.merge_g.backward(params, grads, &tr.mg_in_g, &dz_wg, true)?.expect("requested");
        let mut da_p = dz_wp.clone();
        add_into(&mut da_p, &dz_wb);
        add_into(&mut da_p, &dx_b[..l]);
        let dx_p = self.merge_p.backward(params, grads, &tr.mp_in, &da_p, true)?.expect("requested");

        let mut dh = dz_wo;
        add_into(&mut dh, &dz_wp);
        add_into(&mut dh, &dz_wg);
        add_into(&mut dh, &dz_wb);
        add_into(&mut dh, &dx_g[..l]);
        add_into(&mut dh, &dx_p[..l]);
        self.encoder.backward(params, grads, &tr.enc, &dh, false)?;

        let kd = self.arch.kernel_dim;
        if let Some(r) = prow {
            add_into(&mut grads.data_mut(self.kernel_p)[r * kd..(r + 1) * kd], &dx_p[l..]);
        }
        if let Some(r) = grow {
            let row = &mut grads.data_mut(self.kernel_g)[r * kd..(r + 1) * kd];
            add_into(row, &dx_b[l..]);
            add_into(row, &dx_g[l..]);
        }
        let loss = loss / S::of(4.0);
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss for sample ({}, {})",
                sample.player_guid, sample.game_id
            )));
        }
        Ok(loss)
    }

    /// Mean four-case loss plus L1 over `batch`, and its gradient.
    pub fn batch_gradient(&self, batch: &[&EncodedPair<S>], l1: f64) -> Result<(S, ParamStore<S>)> {
        self.batch_gradient_with(&self.params, batch, l1)
    }

    /// As [`Self::batch_gradient`], evaluated at `params` instead of the
    /// model's own parameters (which must share their layout).
    pub fn batch_gradient_with(&self, params: &ParamStore<S>, batch: &[&EncodedPair<S>], l1: f64) -> Result<(S, ParamStore<S>)> {
        if batch.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        params.check_same_layout(&self.params)?;
        let scale = S::one() / S::of(batch.len() as f64);
        let partials: Vec<Result<(S, ParamStore<S>)>> = batch
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| {
                let mut g = params.zeros_like();
                let mut loss = S::zero();
                for s in chunk {
                    loss += self.sample_backward(params, s, scale, &mut g)?;
                }
                Ok((loss, g))
            })
            .collect();
        let mut total = CompensatedSum::new();
        let mut grads: Option<ParamStore<S>> = None;
        for part in partials {
            let (loss, g) = part?;
            total.add(loss);
            match grads.as_mut() {
                Some(acc) => acc.add_scaled(&g, S::one())?,
                None => grads = Some(g),
            }
        }
        let mut grads = grads.expect("non-empty batch");
        let penalty = l1_penalty_and_grad(params, l1, &mut grads)?;
        Ok((total.value() * scale + penalty, grads))
    }

    /// Loss only (no gradient), at `params`.
    pub fn batch_loss_with(&self, params: &ParamStore<S>, batch: &[&EncodedPair<S>], l1: f64) -> Result<S> {
        if batch.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let mut total = CompensatedSum::new();
        for s in batch {
            let (p, g) = self.rows(&s.player_guid, &s.game_id);
            let out = Self::outputs_from(&self.trace(params, &s.x, p, g)?);
            total.add(four_case_loss(&out, &s.target));
        }
        let penalty = crate::nn::l1_penalty(params, l1);
        Ok(total.value() / S::of(batch.len() as f64) + penalty)
    }

    pub fn cast<T: Scalar>(&self) -> LkkModel<T> {
        LkkModel {
            arch: self.arch,
            params: self.params.cast(),
            encoder: self.encoder.clone(),
            decoder: self.decoder.clone(),
            merge_p: self.merge_p,
            merge_g: self.merge_g,
            kernel_p: self.kernel_p,
            kernel_g: self.kernel_g,
            players: self.players.clone(),
            games: self.games.clone(),
            kernel_seed: self.kernel_seed,
        }
    }
}
