//! Simulated federated training: per-player clients send mean gradients,
//! the server averages them by sample count and takes one Adam step.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::EncodedPair;
use crate::error::{check_len, Error, Result};
use crate::lkk::{GatePolicy, LkkModel};
use crate::nn::{Adam, ParamStore};
use crate::rng::{substream, Stream};
use crate::scalar::{CompensatedSum, Scalar};
use crate::train::{validation, TrainConfig, Trained};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoundConfig {
    pub rounds: usize,
    /// Clients sampled per round; `None` means every client.
    pub clients_per_round: Option<usize>,
    /// Packets required before the server steps; `None` means all sampled.
    pub aggregation_threshold: Option<usize>,
    pub local_steps: usize,
    /// Step size of the local SGD updates between local steps. Unused when
    /// `local_steps == 1`.
    pub local_lr: f64,
    /// Local mini-batch size; `None` means the whole shard.
    pub local_batch: Option<usize>,
}

impl Default for RoundConfig {
    fn default() -> Self {
        Self {
            rounds: 300,
            clients_per_round: None,
            aggregation_threshold: None,
            local_steps: 1,
            local_lr: 0.01,
            local_batch: None,
        }
    }
}

impl RoundConfig {
    pub fn validate(&self, n_clients: usize) -> Result<()> {
        let per_round = self.per_round(n_clients);
        if per_round == 0 {
            return Err(Error::Config("clients_per_round must be positive".into()));
        }
        if self.threshold(n_clients) > per_round {
            return Err(Error::Config(format!(
                "aggregation_threshold {} exceeds clients_per_round {per_round}",
                self.threshold(n_clients)
            )));
        }
        if self.local_steps == 0 || self.local_batch == Some(0) {
            return Err(Error::Config("local_steps and local_batch must be positive".into()));
        }
        Ok(())
    }

    fn per_round(&self, n_clients: usize) -> usize {
        self.clients_per_round.unwrap_or(n_clients).min(n_clients)
    }

    fn threshold(&self, n_clients: usize) -> usize {
        self.aggregation_threshold.unwrap_or_else(|| self.per_round(n_clients))
    }
}

/// One client's local data.
#[derive(Debug, Clone)]
pub struct ClientShard<S> {
    pub client_id: usize,
    pub player_guid: String,
    pub pairs: Vec<EncodedPair<S>>,
}

/// The only thing a client sends to the server.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPacket<S> {
    pub client_id: usize,
    pub round: usize,
    pub sample_count: usize,
    pub gradient: Vec<S>,
}

/// A packet plus the client's local loss, which stays in the simulator's log.
#[derive(Debug, Clone)]
pub struct ClientOutcome<S> {
    pub packet: GradientPacket<S>,
    pub local_loss: f64,
}

/// One shard per player, ordered by player id.
pub fn partition<S: Scalar>(pairs: &[EncodedPair<S>]) -> Vec<ClientShard<S>> {
    let mut by_player: BTreeMap<&str, Vec<EncodedPair<S>>> = BTreeMap::new();
    for p in pairs {
        by_player.entry(&p.player_guid).or_default().push(p.clone());
    }
    by_player
        .into_iter()
        .enumerate()
        .map(|(client_id, (player, pairs))| ClientShard { client_id, player_guid: player.to_owned(), pairs })
        .collect()
}

/// Local work for one client at the current global weights. Returns `None`
/// for an empty shard.
pub fn client_round<S: Scalar>(
    global: &LkkModel<S>,
    shard: &ClientShard<S>,
    rc: &RoundConfig,
    train: &TrainConfig,
    round: usize,
) -> Result<Option<ClientOutcome<S>>> {
    if shard.pairs.is_empty() {
        log::info!("client {} has no data; skipped", shard.client_id);
        return Ok(None);
    }
    let n = shard.pairs.len();
    let mut rng = substream(train.seed, Stream::Batching, ((round as u64) << 32) | shard.client_id as u64);
    let mut local: Option<ParamStore<S>> = None;
    let mut grad_sum: Option<ParamStore<S>> = None;
    let mut loss_sum = 0.0;
    for step in 0..rc.local_steps {
        let batch: Vec<&EncodedPair<S>> = match rc.local_batch {
            Some(b) if b < n => {
                let mut idx = sample(&mut rng, n, b).into_vec();
                idx.sort_unstable();
                idx.into_iter().map(|i| &shard.pairs[i]).collect()
            }
            _ => shard.pairs.iter().collect(),
        };
        let params = local.as_ref().unwrap_or_else(|| global.params());
        let (loss, grads) = global.batch_gradient_with(params, &batch, train.l1)?;
        loss_sum += loss.as_f64();
        if step + 1 < rc.local_steps {
            let mut next = params.clone();
            next.add_scaled(&grads, S::of(-rc.local_lr))?;
            local = Some(next);
        }
        match grad_sum.as_mut() {
            Some(acc) => acc.add_scaled(&grads, S::one())?,
            None => grad_sum = Some(grads),
        }
    }
    let mut grads = grad_sum.expect("at least one local step");
    if rc.local_steps > 1 {
        grads.scale(S::one() / S::of(rc.local_steps as f64));
    }
    Ok(Some(ClientOutcome {
        packet: GradientPacket { client_id: shard.client_id, round, sample_count: n, gradient: grads.flatten() },
        local_loss: loss_sum / rc.local_steps as f64,
    }))
}

/// Sample-count-weighted mean of the packet gradients. Packets are reduced
/// in client-id order with compensated sums, so the result does not depend
/// on arrival order.
pub fn server_aggregate<S: Scalar>(packets: &[GradientPacket<S>], threshold: usize) -> Result<Vec<S>> {
    if packets.len() < threshold.max(1) {
        return Err(Error::ShortRound { got: packets.len(), threshold });
    }
    let mut sorted: Vec<&GradientPacket<S>> = packets.iter().collect();
    sorted.sort_by_key(|p| (p.client_id, p.round));
    let dim = sorted[0].gradient.len();
    let mut total_n = 0usize;
    for p in &sorted {
        check_len(dim, p.gradient.len())?;
        if p.sample_count == 0 {
            return Err(Error::InvalidInput(format!("packet from client {} has no samples", p.client_id)));
        }
        total_n += p.sample_count;
    }
    let denom = S::of(total_n as f64);
    Ok((0..dim)
        .map(|j| {
            let mut acc = CompensatedSum::new();
            for p in &sorted {
                acc.add(S::of(p.sample_count as f64) * p.gradient[j]);
            }
            acc.value() / denom
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub clients: usize,
    pub train_loss: f64,
    #[serde(rename = "val_WD")]
    pub val_wd: Option<f64>,
    #[serde(rename = "val_CE")]
    pub val_ce: Option<f64>,
    pub wall_ms: u64,
}

/// Rounds of: sample clients, local gradients in parallel, weighted
/// aggregation, one global Adam step.
pub fn run_federated<S: Scalar>(
    train: &[EncodedPair<S>],
    val: &[EncodedPair<S>],
    cfg: &TrainConfig,
    rc: &RoundConfig,
) -> Result<Trained<S, RoundLog>> {
    cfg.validate()?;
    let shards = partition(train);
    rc.validate(shards.len())?;
    let mut model = cfg.init_model(train)?;
    let mut gate = GatePolicy::new(cfg.gate.player_min_records, cfg.gate.game_min_records);
    let mut adam = Adam::new(cfg.adam);
    let per_round = rc.per_round(shards.len());
    let threshold = rc.threshold(shards.len());
    let mut log = Vec::with_capacity(rc.rounds);
    for round in 0..rc.rounds {
        let start = Instant::now();
        let mut chosen: Vec<usize> = if per_round == shards.len() {
            (0..shards.len()).collect()
        } else {
            sample(&mut substream(cfg.seed, Stream::ClientSampling, round as u64), shards.len(), per_round).into_vec()
        };
        chosen.sort_unstable();
        let outcomes: Vec<Option<ClientOutcome<S>>> = chosen
            .par_iter()
            .map(|&c| client_round(&model, &shards[c], rc, cfg, round))
            .collect::<Result<_>>()?;
        let outcomes: Vec<ClientOutcome<S>> = outcomes.into_iter().flatten().collect();
        let packets: Vec<GradientPacket<S>> = outcomes.iter().map(|o| o.packet.clone()).collect();
        let g = server_aggregate(&packets, threshold)?;
        let mut grads = model.params().zeros_like();
        grads.unflatten(&g)?;
        adam.step(model.params_mut(), &grads)?;
        for &c in &chosen {
            for p in &shards[c].pairs {
                gate.record(&p.player_guid, &p.game_id);
            }
        }
        let n: usize = outcomes.iter().map(|o| o.packet.sample_count).sum();
        let train_loss = outcomes.iter().map(|o| o.local_loss * o.packet.sample_count as f64).sum::<f64>() / n as f64;
        let due = cfg.eval_every > 0 && ((round + 1) % cfg.eval_every == 0 || round + 1 == rc.rounds);
        let (val_wd, val_ce) = validation(&model, val, &gate, due)?;
        log.push(RoundLog { round, clients: packets.len(), train_loss, val_wd, val_ce, wall_ms: start.elapsed().as_millis() as u64 });
        log::debug!("round {round}: {} clients, loss {train_loss:.5}", packets.len());
    }
    Ok(Trained { model, gate, log })
}
