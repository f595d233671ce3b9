//! Building blocks shared by both aggregation levels.

use rand_chacha::ChaCha8Rng;

use super::params::{ParameterSet, Projections};
use crate::error::{Error, Result};
use crate::numeric::rng::{stream_rng, streams};
use crate::numeric::{Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    Item,
    List,
}

/// Dropout rate, mode and randomness for one forward pass.
#[derive(Clone, Debug)]
pub struct Dropout {
    rate: f64,
    training: bool,
    rng: ChaCha8Rng,
}

impl Dropout {
    pub fn inference() -> Self {
        Dropout {
            rate: 0.0,
            training: false,
            rng: stream_rng(0, &[streams::DROPOUT]),
        }
    }

    pub fn training(rate: f64, seed: u64, stream: &[u64]) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        let mut key = vec![streams::DROPOUT];
        key.extend_from_slice(stream);
        Ok(Dropout {
            rate,
            training: true,
            rng: stream_rng(seed, &key),
        })
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    pub fn apply(&mut self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        tape.dropout(x, self.rate, self.training, &mut self.rng)
    }
}

/// `E[id_i] + O[i]` for each slot, or just `E[id_i]` without positions.
/// Dropout hits the item and position embeddings separately.
pub fn positional_item_repr(
    tape: &mut Tape<'_>,
    params: &ParameterSet,
    items: &[usize],
    drop: &mut Dropout,
) -> Result<Var> {
    if items.len() > params.config.max_items {
        return Err(Error::Index {
            what: "list slot",
            index: items.len() - 1,
            len: params.config.max_items,
        });
    }
    let e = tape.gather(params.ids.item_emb, items)?;
    let e = drop.apply(tape, e)?;
    if !params.config.ablation.use_position {
        return Ok(e);
    }
    let positions: Vec<usize> = (0..items.len()).collect();
    let o = tape.gather(params.ids.pos_emb, &positions)?;
    let o = drop.apply(tape, o)?;
    tape.add(e, o)
}

fn projections(params: &ParameterSet, level: Level) -> Option<Projections> {
    match level {
        Level::Item => params.ids.item_proj,
        Level::List => params.ids.list_proj,
    }
}

/// Scaled dot-product self-attention with optional residual connection.
///
/// Returns the output rows and the score matrix `F`, which is `None` when
/// self-attention is switched off (the layer is then the identity).
pub fn self_attention(
    tape: &mut Tape<'_>,
    params: &ParameterSet,
    z: Var,
    mask: &[bool],
    level: Level,
    drop: &mut Dropout,
) -> Result<(Var, Option<Var>)> {
    let ab = params.config.ablation;
    let (m, d) = tape.shape(z);
    if mask.len() != m {
        return Err(Error::Dimension {
            op: "self_attention mask",
            left: vec![m, d],
            right: vec![mask.len()],
        });
    }
    let live = !ab.mask_padding || mask.iter().any(|&b| b);
    if !live {
        return Err(Error::DegenerateInput("self-attention over fully masked rows"));
    }
    if !ab.use_self_attention {
        return Ok((z, None));
    }
    let (q, k, v) = match projections(params, level) {
        Some(p) if ab.use_linear_projections => {
            let wq = tape.param(p.q);
            let wk = tape.param(p.k);
            let wv = tape.param(p.v);
            (tape.matmul(z, wq)?, tape.matmul(z, wk)?, tape.matmul(z, wv)?)
        }
        _ => (z, z, z),
    };
    let scores = tape.matmul_t(q, k)?;
    let scores = tape.scale(scores, 1.0 / (d as f64).sqrt());
    let f = if ab.mask_padding {
        let grid: Vec<bool> = (0..m * m).map(|ij| mask[ij % m]).collect();
        tape.row_softmax(scores, Some(&grid))?
    } else {
        tape.row_softmax(scores, None)?
    };
    let f_drop = drop.apply(tape, f)?;
    let refined = tape.matmul(f_drop, v)?;
    let out = if ab.use_residual { tape.add(z, refined)? } else { refined };
    Ok((out, Some(f)))
}

/// Attention pooling: weights come from `refined`, the sum runs over
/// `values`. Without vanilla attention the weights are uniform over live
/// rows. Returns the `1 × d` pooled vector and the `1 × m` weights.
pub fn vanilla_aggregate(
    tape: &mut Tape<'_>,
    params: &ParameterSet,
    refined: Var,
    values: Var,
    mask: &[bool],
    level: Level,
) -> Result<(Var, Var)> {
    let ab = params.config.ablation;
    let (m, _) = tape.shape(refined);
    if tape.shape(values).0 != m || mask.len() != m {
        return Err(Error::Dimension {
            op: "vanilla_aggregate",
            left: vec![m],
            right: vec![tape.shape(values).0, mask.len()],
        });
    }
    let live: Vec<bool> = if ab.mask_padding { mask.to_vec() } else { vec![true; m] };
    let n_live = live.iter().filter(|&&b| b).count();
    if n_live == 0 {
        return Err(Error::DegenerateInput("attention pooling over fully masked rows"));
    }
    let weights = if ab.use_vanilla_attention {
        let (w, b, u) = match level {
            Level::Item => (params.ids.item_w, params.ids.item_b, params.ids.item_u),
            Level::List => (params.ids.list_w, params.ids.list_b, params.ids.list_u),
        };
        let w = tape.param(w);
        let b = tape.param(b);
        let u = tape.param(u);
        let h = tape.matmul_t(refined, w)?;
        let h = tape.add_row(h, b)?;
        let h = tape.tanh(h);
        let logits = tape.matmul_t(h, u)?;
        let logits = tape.transpose(logits);
        tape.row_softmax(logits, Some(&live))?
    } else {
        let share = 1.0 / n_live as f64;
        let data = live.iter().map(|&b| if b { share } else { 0.0 }).collect();
        tape.constant(1, m, data)?
    };
    let pooled = tape.matmul(weights, values)?;
    Ok((pooled, weights))
}
