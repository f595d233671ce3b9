//! Matrix factorisation trained with squared error (MF) or pairwise
//! ranking loss (BPR).

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{InteractionDataset, NegativeSampler, Split};
use crate::error::{Error, Result};
use crate::eval::{evaluate, Scorer};
use crate::numeric::rng::{stream_rng, streams};
use crate::numeric::{adam_step, AdamState, ParamId, ParamStore, Tape, Tensor, Var};
use crate::training::{epoch_examples, Checkpoint, EarlyStopping, EpochRecord, ModelState, TrainConfig};

const INIT_SCALE: f64 = 0.1;

/// User and list factors, plus optional per-list biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorModel {
    pub store: ParamStore,
    pub users: ParamId,
    pub lists: ParamId,
    pub bias: Option<ParamId>,
}

impl FactorModel {
    pub fn init(n_users: usize, n_lists: usize, dim: usize, with_bias: bool, seed: u64) -> Result<Self> {
        if n_users == 0 || n_lists == 0 || dim == 0 {
            return Err(Error::Config("factor model needs users, lists and a positive dimension".into()));
        }
        let mut rng = stream_rng(seed, &[streams::INIT]);
        let mut store = ParamStore::new();
        let mut uniform = |r: usize| Tensor::from_fn(&[r, dim], |_| rng.gen_range(-INIT_SCALE..=INIT_SCALE));
        let users = store.add("user_factors", uniform(n_users));
        let lists = store.add("list_factors", uniform(n_lists));
        let bias = with_bias.then(|| store.add("list_bias", Tensor::zeros(&[n_lists, 1])));
        Ok(FactorModel {
            store,
            users,
            lists,
            bias,
        })
    }

    pub fn dim(&self) -> usize {
        self.store.get(self.users).dims2().1
    }

    pub fn score(&self, user: usize, list: usize) -> f64 {
        let p = self.store.get(self.users).row(user);
        let q = self.store.get(self.lists).row(list);
        let b = self.bias.map_or(0.0, |b| self.store.get(b).data()[list]);
        p.iter().zip(q).map(|(a, b)| a * b).sum::<f64>() + b
    }
}

impl Scorer for FactorModel {
    fn score_lists(&self, user: usize, out: &mut [f64]) -> Result<()> {
        for (l, o) in out.iter_mut().enumerate() {
            *o = self.score(user, l);
        }
        Ok(())
    }
}

/// Row-wise `p_u · q_l (+ b_l)` on the tape; returns the `B × 1` scores and
/// the gathered factor rows.
fn scores_on_tape(tape: &mut Tape<'_>, m: &FactorModel, users: &[usize], lists: &[usize]) -> Result<(Var, Var, Var)> {
    let p = tape.gather(m.users, users)?;
    let q = tape.gather(m.lists, lists)?;
    let pq = tape.mul(p, q)?;
    let ones = tape.constant(m.dim(), 1, vec![1.0; m.dim()])?;
    let mut s = tape.matmul(pq, ones)?;
    if let Some(b) = m.bias {
        let b = tape.gather(b, lists)?;
        s = tape.add(s, b)?;
    }
    Ok((s, p, q))
}

/// `-ln σ(x⁺ - x⁻)`, evaluated stably.
pub fn bpr_triple_loss(x_pos: f64, x_neg: f64) -> f64 {
    let z = x_pos - x_neg;
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

#[derive(Clone, Debug)]
pub struct BaselineOutcome {
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub log: Vec<EpochRecord>,
}

impl BaselineOutcome {
    pub fn best_model(&self) -> &FactorModel {
        match &self.best.model {
            ModelState::Mf(m) | ModelState::Bpr(m) => m,
            _ => unreachable!("factor training produces factor checkpoints"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Objective {
    SquaredError,
    Pairwise,
}

impl Objective {
    fn wrap(self, m: FactorModel) -> ModelState {
        match self {
            Objective::SquaredError => ModelState::Mf(m),
            Objective::Pairwise => ModelState::Bpr(m),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Objective::SquaredError => "MF",
            Objective::Pairwise => "BPR",
        }
    }
}

/// MF: squared error on train positives (target 1) and `ρ` sampled
/// negatives per positive (target 0), Adam, early stopping on validation
/// NDCG@10.
pub fn mf_train(ds: &InteractionDataset, cfg: &TrainConfig) -> Result<BaselineOutcome> {
    fit(ds, cfg, Objective::SquaredError)
}

/// BPR: one sampled negative per train positive and epoch, pairwise
/// log-sigmoid loss with L2 on the factors touched, list biases.
pub fn bpr_train(ds: &InteractionDataset, cfg: &TrainConfig) -> Result<BaselineOutcome> {
    fit(ds, cfg, Objective::Pairwise)
}

fn fit(ds: &InteractionDataset, cfg: &TrainConfig, objective: Objective) -> Result<BaselineOutcome> {
    cfg.validate()?;
    if ds.split_count(Split::Train) == 0 {
        return Err(Error::Validation("no train interactions".into()));
    }
    let fingerprint = ds.fingerprint();
    let mut model = FactorModel::init(
        ds.n_users(),
        ds.n_lists(),
        cfg.dim,
        objective == Objective::Pairwise,
        cfg.seed,
    )?;
    let mut adam = AdamState::new(&model.store, cfg.learning_rate);
    let sampler = NegativeSampler::new(ds);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let snapshot = |m: &FactorModel, adam: &AdamState, epoch: u64, st: &EarlyStopping| {
        let mut ck = Checkpoint::new(cfg, fingerprint.clone(), objective.wrap(m.clone()));
        ck.epoch = epoch;
        ck.best_epoch = st.best_epoch;
        ck.best_metric = st.best_metric;
        ck.adam = Some(adam.clone());
        ck
    };
    let mut best = snapshot(&model, &adam, 0, &stopper);
    let mut log = Vec::new();
    let mut epoch = 0;

    for e in 1..=cfg.max_epochs {
        if stopper.should_stop(e - 1) {
            break;
        }
        epoch = e;
        let t0 = Instant::now();
        let (loss_sum, count) = match objective {
            Objective::SquaredError => mf_epoch(&mut model, &mut adam, ds, &sampler, cfg, e)?,
            Objective::Pairwise => bpr_epoch(&mut model, &mut adam, ds, &sampler, cfg, e)?,
        };
        let report = evaluate(&model, ds, Split::Validation, cfg.candidates, objective.name())?;
        let record = EpochRecord {
            epoch: e,
            train_loss: loss_sum / count.max(1) as f64,
            val_ndcg_at_10: report.ndcg_at_10,
            val_precision_at_10: report.precision_at_10,
            elapsed_secs: t0.elapsed().as_secs_f64(),
        };
        log::debug!("{} epoch {e}: loss {:.5} val N@10 {:.3}", objective.name(), record.train_loss, record.val_ndcg_at_10);
        if stopper.observe(e, report.ndcg_at_10) {
            best = snapshot(&model, &adam, e, &stopper);
        }
        log.push(record);
    }
    let last = snapshot(&model, &adam, epoch, &stopper);
    best.best_epoch = stopper.best_epoch;
    best.best_metric = stopper.best_metric;
    Ok(BaselineOutcome { best, last, log })
}

fn apply(model: &mut FactorModel, adam: &mut AdamState, grads: crate::numeric::Gradients, cfg: &TrainConfig) -> Result<()> {
    model.store.set_gradients(grads)?;
    if let Some(max) = cfg.clip_norm {
        model.store.clip_gradients(max);
    }
    adam_step(&mut model.store, adam)
}

fn mf_epoch(
    model: &mut FactorModel,
    adam: &mut AdamState,
    ds: &InteractionDataset,
    sampler: &NegativeSampler,
    cfg: &TrainConfig,
    epoch: u64,
) -> Result<(f64, usize)> {
    let examples = epoch_examples(ds, sampler, cfg.rho, cfg.seed, epoch);
    let mut total = 0.0;
    for (b, chunk) in examples.chunks(cfg.batch_size).enumerate() {
        let users: Vec<usize> = chunk.iter().map(|e| e.0).collect();
        let lists: Vec<usize> = chunk.iter().map(|e| e.1).collect();
        let targets: Vec<f64> = chunk.iter().map(|e| -e.2).collect();
        let (loss, grads) = {
            let mut tape = Tape::new(&model.store);
            let (s, _, _) = scores_on_tape(&mut tape, model, &users, &lists)?;
            let t = tape.constant(chunk.len(), 1, targets)?;
            let diff = tape.add(s, t)?;
            let loss = tape.sum_squares(diff);
            (tape.scalar(loss), tape.backward(loss)?)
        };
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, batch: b, loss });
        }
        total += loss;
        apply(model, adam, grads, cfg)?;
    }
    Ok((total, examples.len()))
}

fn bpr_epoch(
    model: &mut FactorModel,
    adam: &mut AdamState,
    ds: &InteractionDataset,
    sampler: &NegativeSampler,
    cfg: &TrainConfig,
    epoch: u64,
) -> Result<(f64, usize)> {
    let mut rng = stream_rng(cfg.seed, &[streams::BPR, epoch]);
    let mut triples: Vec<(usize, usize, usize)> = ds
        .interactions()
        .iter()
        .filter(|it| it.split == Split::Train)
        .filter_map(|it| sampler.sample_one(it.user, &mut rng).map(|neg| (it.user, it.list, neg)))
        .collect();
    triples.shuffle(&mut rng);
    let mut total = 0.0;
    for (b, chunk) in triples.chunks(cfg.batch_size).enumerate() {
        let users: Vec<usize> = chunk.iter().map(|t| t.0).collect();
        let pos: Vec<usize> = chunk.iter().map(|t| t.1).collect();
        let neg: Vec<usize> = chunk.iter().map(|t| t.2).collect();
        let (loss, grads) = {
            let mut tape = Tape::new(&model.store);
            let (sp, p, qp) = scores_on_tape(&mut tape, model, &users, &pos)?;
            let (sn, _, qn) = scores_on_tape(&mut tape, model, &users, &neg)?;
            let sn = tape.scale(sn, -1.0);
            let diff = tape.add(sp, sn)?;
            let prob = tape.sigmoid(diff);
            let nll = tape.bce(prob, &vec![1.0; chunk.len()])?;
            let mut reg = tape.sum_squares(p);
            for v in [qp, qn] {
                let s = tape.sum_squares(v);
                reg = tape.add(reg, s)?;
            }
            if let Some(bias) = model.bias {
                let bp = tape.gather(bias, &pos)?;
                let bn = tape.gather(bias, &neg)?;
                for v in [bp, bn] {
                    let s = tape.sum_squares(v);
                    reg = tape.add(reg, s)?;
                }
            }
            let reg = tape.scale(reg, cfg.l2);
            let loss = tape.add(nll, reg)?;
            (tape.scalar(nll), tape.backward(loss)?)
        };
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, batch: b, loss });
        }
        total += loss;
        apply(model, adam, grads, cfg)?;
    }
    Ok((total, triples.len()))
}
