use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, ModelState};
use super::config::TrainConfig;
use super::early_stop::EarlyStopping;
use super::loss::{bce_loss, l2_penalty};
use crate::data::{InteractionDataset, NegativeSampler, ProfileBuilder, ProfileExample, Split};
use crate::error::{Error, Result};
use crate::eval::{evaluate, AttListScorer, MetricsReport};
use crate::model::{forward_batch, Cardinalities, Dropout, ParameterSet};
use crate::numeric::rng::{stream_rng, streams};
use crate::numeric::{adam_step, AdamState, Tape, Var};

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    /// Mean cross-entropy per training example, penalty excluded.
    pub train_loss: f64,
    pub val_ndcg_at_10: f64,
    pub val_precision_at_10: f64,
    pub elapsed_secs: f64,
}

/// State to continue from: the last checkpoint of an earlier run and, if
/// it was saved, that run's best checkpoint.
#[derive(Clone, Debug)]
pub struct Resume {
    pub last: Checkpoint,
    pub best: Option<Checkpoint>,
}

#[derive(Default)]
pub struct TrainOptions<'a> {
    pub resume: Option<Resume>,
    /// Accept a resume checkpoint whose config or dataset differs.
    pub force: bool,
    /// Poisons the output layer before the given (epoch, batch), so the
    /// divergence path can be exercised end to end.
    pub inject_nan: Option<(u64, usize)>,
    pub on_epoch: Option<Box<dyn FnMut(&EpochRecord) + 'a>>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub log: Vec<EpochRecord>,
}

impl TrainOutcome {
    pub fn best_params(&self) -> &ParameterSet {
        match &self.best.model {
            ModelState::Attlist(p) => p,
            _ => unreachable!("attlist training produces attlist checkpoints"),
        }
    }

    pub fn last_params(&self) -> &ParameterSet {
        match &self.last.model {
            ModelState::Attlist(p) => p,
            _ => unreachable!("attlist training produces attlist checkpoints"),
        }
    }
}

/// Positives of the train split followed by fresh negatives, shuffled.
/// Everything is keyed on `(seed, epoch)`.
pub fn epoch_examples(
    ds: &InteractionDataset,
    sampler: &NegativeSampler,
    rho: usize,
    seed: u64,
    epoch: u64,
) -> Vec<(usize, usize, f64)> {
    let mut out: Vec<(usize, usize, f64)> = ds
        .interactions()
        .iter()
        .filter(|it| it.split == Split::Train)
        .map(|it| (it.user, it.list, 1.0))
        .collect();
    for user in 0..ds.n_users() {
        out.extend(sampler.sample(user, rho, seed, epoch).into_iter().map(|l| (user, l, 0.0)));
    }
    out.shuffle(&mut stream_rng(seed, &[streams::SHUFFLE, epoch]));
    out
}

/// Records the full objective for a batch: summed cross-entropy plus the
/// attention-weight penalty. Returns `(objective, cross-entropy)`.
pub fn loss_on_tape(
    tape: &mut Tape<'_>,
    params: &ParameterSet,
    batch: &[ProfileExample],
    lambda: f64,
    drop: &mut Dropout,
) -> Result<(Var, Var)> {
    let out = forward_batch(tape, params, batch, drop)?;
    let labels: Vec<f64> = batch.iter().map(|e| e.label).collect();
    let bce = bce_loss(tape, out.scores, &labels)?;
    let penalty = l2_penalty(tape, params, lambda)?;
    let total = tape.add(bce, penalty)?;
    Ok((total, bce))
}

/// Objective value without touching gradients.
pub fn batch_loss(params: &ParameterSet, batch: &[ProfileExample], lambda: f64, drop: &mut Dropout) -> Result<f64> {
    let mut tape = Tape::new(&params.store);
    let (total, _) = loss_on_tape(&mut tape, params, batch, lambda, drop)?;
    Ok(tape.scalar(total))
}

/// One Adam update on `batch`; returns the batch cross-entropy before the
/// update. The padding embedding row never moves.
pub fn train_step(
    params: &mut ParameterSet,
    adam: &mut AdamState,
    batch: &[ProfileExample],
    cfg: &TrainConfig,
    drop: &mut Dropout,
) -> Result<f64> {
    let (total, bce, grads) = {
        let mut tape = Tape::new(&params.store);
        let (total, bce) = loss_on_tape(&mut tape, params, batch, cfg.l2, drop)?;
        let grads = tape.backward(total)?;
        (tape.scalar(total), tape.scalar(bce), grads)
    };
    if !total.is_finite() {
        return Err(Error::Divergence {
            epoch: 0,
            batch: 0,
            loss: total,
        });
    }
    params.store.set_gradients(grads)?;
    params.freeze_padding_grad();
    if let Some(max) = cfg.clip_norm {
        params.store.clip_gradients(max);
    }
    adam_step(&mut params.store, adam)?;
    Ok(bce)
}

fn validate(params: &ParameterSet, ds: &InteractionDataset, cfg: &TrainConfig) -> Result<MetricsReport> {
    let scorer = AttListScorer::new(params, ds)?;
    evaluate(&scorer, ds, Split::Validation, cfg.candidates, "AttList")
}

pub fn cardinalities(ds: &InteractionDataset) -> Cardinalities {
    Cardinalities {
        users: ds.n_users(),
        lists: ds.n_lists(),
        items: ds.n_items(),
    }
}

pub fn train(ds: &InteractionDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(ds, cfg, TrainOptions::default())
}

/// Epoch loop with early stopping on validation NDCG@10.
pub fn train_with(ds: &InteractionDataset, cfg: &TrainConfig, mut opts: TrainOptions<'_>) -> Result<TrainOutcome> {
    cfg.validate()?;
    if ds.split_count(Split::Train) == 0 {
        return Err(Error::Validation("no train interactions".into()));
    }
    if ds.split_count(Split::Validation) == 0 {
        log::warn!("validation split is empty; early stopping will keep the first epoch");
    }
    let fingerprint = ds.fingerprint();
    let (mut params, mut adam, mut stopper, start, mut best) = match opts.resume.take() {
        Some(Resume { last, best }) => {
            last.check_config(cfg, opts.force)?;
            last.check_dataset(&fingerprint, opts.force)?;
            let ModelState::Attlist(params) = last.model.clone() else {
                return Err(Error::Validation(format!("cannot resume attlist from a {} checkpoint", last.kind())));
            };
            let adam = last
                .adam
                .clone()
                .ok_or_else(|| Error::Validation("resume checkpoint has no optimizer state".into()))?;
            let stopper = EarlyStopping {
                patience: cfg.patience,
                best_epoch: last.best_epoch,
                best_metric: last.best_metric,
            };
            let best = best.unwrap_or_else(|| last.clone());
            (params, adam, stopper, last.epoch + 1, best)
        }
        None => {
            let params = ParameterSet::init(cfg.model(), cardinalities(ds), cfg.seed)?;
            let adam = AdamState::new(&params.store, cfg.learning_rate);
            let best = Checkpoint::new(cfg, fingerprint.clone(), ModelState::Attlist(params.clone()));
            (params, adam, EarlyStopping::new(cfg.patience), 1, best)
        }
    };
    let sampler = NegativeSampler::new(ds);
    let builder = ProfileBuilder::new(ds, cfg.max_lists, cfg.max_items);
    let mut log = Vec::new();
    let mut epoch = start - 1;

    for e in start..=cfg.max_epochs {
        if stopper.should_stop(e - 1) {
            break;
        }
        epoch = e;
        let t0 = Instant::now();
        let examples = epoch_examples(ds, &sampler, cfg.rho, cfg.seed, e);
        let mut bce_sum = 0.0;
        for (b, chunk) in examples.chunks(cfg.batch_size).enumerate() {
            if opts.inject_nan == Some((e, b)) {
                params.store.get_mut(params.ids.w2).data_mut()[0] = f64::NAN;
            }
            let batch = builder.batch(chunk).examples;
            let mut drop = Dropout::training(cfg.dropout, cfg.seed, &[e, b as u64])?;
            match train_step(&mut params, &mut adam, &batch, cfg, &mut drop) {
                Ok(bce) => bce_sum += bce,
                Err(Error::Divergence { loss, .. }) => {
                    return Err(Error::Divergence { epoch: e, batch: b, loss });
                }
                Err(err) => return Err(err),
            }
        }
        let report = validate(&params, ds, cfg)?;
        let record = EpochRecord {
            epoch: e,
            train_loss: bce_sum / examples.len().max(1) as f64,
            val_ndcg_at_10: report.ndcg_at_10,
            val_precision_at_10: report.precision_at_10,
            elapsed_secs: t0.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {e}: loss {:.5} val N@10 {:.3} P@10 {:.3} ({:.1}s)",
            record.train_loss,
            record.val_ndcg_at_10,
            record.val_precision_at_10,
            record.elapsed_secs
        );
        if stopper.observe(e, report.ndcg_at_10) {
            best = snapshot(cfg, &fingerprint, &params, &adam, e, &stopper);
        }
        if let Some(f) = opts.on_epoch.as_mut() {
            f(&record);
        }
        log.push(record);
    }

    let last = snapshot(cfg, &fingerprint, &params, &adam, epoch, &stopper);
    best.best_epoch = stopper.best_epoch;
    best.best_metric = stopper.best_metric;
    Ok(TrainOutcome { best, last, log })
}

fn snapshot(
    cfg: &TrainConfig,
    fingerprint: &str,
    params: &ParameterSet,
    adam: &AdamState,
    epoch: u64,
    stopper: &EarlyStopping,
) -> Checkpoint {
    let mut ck = Checkpoint::new(cfg, fingerprint.to_string(), ModelState::Attlist(params.clone()));
    ck.epoch = epoch;
    ck.best_epoch = stopper.best_epoch;
    ck.best_metric = stopper.best_metric;
    ck.adam = Some(adam.clone());
    ck
}
