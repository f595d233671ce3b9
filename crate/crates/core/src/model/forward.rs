//! End-to-end scoring of (user, list) pairs.

use serde::Serialize;

use super::layers::{positional_item_repr, self_attention, vanilla_aggregate, Dropout, Level};
use super::params::ParameterSet;
use crate::data::{ProfileBuilder, ProfileExample};
use crate::error::{Error, Result};
use crate::numeric::{sigmoid, Tape, Var};

/// Tape handles for one aggregated list.
#[derive(Clone, Debug)]
pub struct ListVars {
    pub list: Option<usize>,
    pub items: Vec<usize>,
    pub y: Var,
    pub f: Option<Var>,
    pub alpha: Option<Var>,
}

/// Tape handles for one aggregated user profile.
#[derive(Clone, Debug)]
pub struct UserVars {
    pub slots: Vec<ListVars>,
    pub g: Option<Var>,
    pub beta: Option<Var>,
    pub x: Var,
}

#[derive(Clone, Debug)]
pub struct ExampleVars {
    pub user: usize,
    pub candidate: ListVars,
    pub profile: UserVars,
    pub p: Var,
    pub q: Var,
    pub h0: Var,
}

/// Aggregates one padded list into its `1 × d` vector `y`. A list with no
/// live items (under padding masks) comes out as the zero vector.
pub fn list_on_tape(
    tape: &mut Tape<'_>,
    params: &ParameterSet,
    items: &[usize],
    mask: &[bool],
    list: Option<usize>,
    drop: &mut Dropout,
) -> Result<ListVars> {
    let ab = params.config.ablation;
    if ab.mask_padding && !mask.iter().any(|&b| b) {
        return Ok(ListVars {
            list,
            items: items.to_vec(),
            y: tape.zeros(1, params.d()),
            f: None,
            alpha: None,
        });
    }
    let z = positional_item_repr(tape, params, items, drop)?;
    let (refined, f) = self_attention(tape, params, z, mask, Level::Item, drop)?;
    let (y, alpha) = vanilla_aggregate(tape, params, refined, refined, mask, Level::Item)?;
    let y = drop.apply(tape, y)?;
    Ok(ListVars {
        list,
        items: items.to_vec(),
        y,
        f,
        alpha: Some(alpha),
    })
}

/// Aggregates the profile lists of an example into the user vector `x`.
pub fn user_on_tape(
    tape: &mut Tape<'_>,
    params: &ParameterSet,
    ex: &ProfileExample,
    drop: &mut Dropout,
) -> Result<UserVars> {
    let ab = params.config.ablation;
    let d = params.d();
    let mut slots = Vec::with_capacity(ex.max_lists());
    for s in 0..ex.max_lists() {
        if ex.profile_mask[s] || !ab.mask_padding {
            let (items, mask) = ex.profile_slot(s);
            slots.push(list_on_tape(tape, params, items, mask, ex.profile_lists[s], drop)?);
        } else {
            slots.push(ListVars {
                list: None,
                items: ex.profile_slot(s).0.to_vec(),
                y: tape.zeros(1, d),
                f: None,
                alpha: None,
            });
        }
    }
    if ab.mask_padding && !ex.profile_mask.iter().any(|&b| b) {
        return Ok(UserVars {
            slots,
            g: None,
            beta: None,
            x: tape.zeros(1, d),
        });
    }
    let ys: Vec<Var> = slots.iter().map(|s| s.y).collect();
    let stacked = tape.stack_rows(&ys)?;
    let (refined, g) = self_attention(tape, params, stacked, &ex.profile_mask, Level::List, drop)?;
    let values = if ab.aggregate_refined_at_list_level { refined } else { stacked };
    let (x, beta) = vanilla_aggregate(tape, params, refined, values, &ex.profile_mask, Level::List)?;
    let x = drop.apply(tape, x)?;
    Ok(UserVars {
        slots,
        g,
        beta: Some(beta),
        x,
    })
}

/// Adds ID embeddings and builds `h0 = [p ⊙ q; q; p]`.
fn combine(
    tape: &mut Tape<'_>,
    params: &ParameterSet,
    user: usize,
    list: usize,
    x: Var,
    y: Var,
) -> Result<(Var, Var, Var)> {
    let (p, q) = if params.config.ablation.use_id_embeddings {
        let eu = tape.gather(params.ids.user_emb, &[user])?;
        let el = tape.gather(params.ids.list_emb, &[list])?;
        (tape.add(x, eu)?, tape.add(y, el)?)
    } else {
        (x, y)
    };
    let pq = tape.mul(p, q)?;
    let h0 = tape.concat_cols(&[pq, q, p])?;
    Ok((p, q, h0))
}

/// Prediction network over stacked `h0` rows; returns a `B × 1` node.
pub fn head_on_tape(tape: &mut Tape<'_>, params: &ParameterSet, h0s: &[Var], drop: &mut Dropout) -> Result<Var> {
    let h0 = tape.stack_rows(h0s)?;
    let w1 = tape.param(params.ids.w1);
    let b1 = tape.param(params.ids.b1);
    let w2 = tape.param(params.ids.w2);
    let b2 = tape.param(params.ids.b2);
    let h1 = tape.matmul_t(h0, w1)?;
    let h1 = tape.add_row(h1, b1)?;
    let h1 = tape.relu(h1);
    let h1 = drop.apply(tape, h1)?;
    let out = tape.matmul_t(h1, w2)?;
    let out = tape.add_row(out, b2)?;
    Ok(tape.sigmoid(out))
}

pub fn example_on_tape(
    tape: &mut Tape<'_>,
    params: &ParameterSet,
    ex: &ProfileExample,
    drop: &mut Dropout,
) -> Result<ExampleVars> {
    check_example(params, ex)?;
    let candidate = list_on_tape(tape, params, &ex.list_items, &ex.list_mask, Some(ex.list), drop)?;
    let profile = user_on_tape(tape, params, ex, drop)?;
    let (p, q, h0) = combine(tape, params, ex.user, ex.list, profile.x, candidate.y)?;
    Ok(ExampleVars {
        user: ex.user,
        candidate,
        profile,
        p,
        q,
        h0,
    })
}

/// Records a whole batch; `scores` is the `B × 1` prediction node.
pub struct BatchVars {
    pub scores: Var,
    pub examples: Vec<ExampleVars>,
}

pub fn forward_batch(
    tape: &mut Tape<'_>,
    params: &ParameterSet,
    examples: &[ProfileExample],
    drop: &mut Dropout,
) -> Result<BatchVars> {
    if examples.is_empty() {
        return Err(Error::DegenerateInput("empty batch"));
    }
    let vars = examples
        .iter()
        .map(|ex| example_on_tape(tape, params, ex, drop))
        .collect::<Result<Vec<_>>>()?;
    let h0s: Vec<Var> = vars.iter().map(|v| v.h0).collect();
    let scores = head_on_tape(tape, params, &h0s, drop)?;
    Ok(BatchVars {
        scores,
        examples: vars,
    })
}

fn check_example(params: &ParameterSet, ex: &ProfileExample) -> Result<()> {
    let (n, m) = (params.config.max_lists, params.config.max_items);
    let ok = ex.list_items.len() == m
        && ex.list_mask.len() == m
        && ex.profile_mask.len() == n
        && ex.profile_lists.len() == n
        && ex.profile_items.len() == n * m
        && ex.profile_item_mask.len() == n * m;
    if !ok {
        return Err(Error::Dimension {
            op: "example layout",
            left: vec![n, m],
            right: vec![ex.profile_mask.len(), ex.list_items.len()],
        });
    }
    for (what, index, len) in [
        ("user", ex.user, params.sizes.users),
        ("list", ex.list, params.sizes.lists),
    ] {
        if index >= len {
            return Err(Error::Index { what, index, len });
        }
    }
    Ok(())
}

/// Inference-mode scores for a set of examples.
pub fn predict(params: &ParameterSet, examples: &[ProfileExample]) -> Result<Vec<f64>> {
    let mut tape = Tape::new(&params.store);
    let out = forward_batch(&mut tape, params, examples, &mut Dropout::inference())?;
    Ok(tape.value(out.scores).to_vec())
}

/// Attention scores and intermediate vectors of one aggregated list.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ListTrace {
    pub list: Option<usize>,
    /// Embedding rows (0 is padding).
    pub items: Vec<usize>,
    /// Row-major `M × M` self-attention scores; empty for an all-padding
    /// list. The identity when self-attention is off.
    pub f: Vec<f64>,
    pub alpha: Vec<f64>,
    pub y: Vec<f64>,
}

/// Everything a single forward pass computed, for inspection and export.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForwardTrace {
    pub user: usize,
    pub list: usize,
    pub candidate: ListTrace,
    pub profile: Vec<ListTrace>,
    /// Profile slot mask.
    pub profile_mask: Vec<bool>,
    /// Row-major `N × N` list-level self-attention scores; empty when the
    /// profile is empty.
    pub g: Vec<f64>,
    pub beta: Vec<f64>,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub score: f64,
}

fn identity(m: usize) -> Vec<f64> {
    (0..m * m).map(|ij| if ij / m == ij % m { 1.0 } else { 0.0 }).collect()
}

fn list_trace(tape: &Tape<'_>, v: &ListVars, self_attention_on: bool) -> ListTrace {
    let m = v.items.len();
    let f = match (v.f, v.alpha) {
        (Some(f), _) => tape.value(f).to_vec(),
        (None, Some(_)) if !self_attention_on => identity(m),
        _ => Vec::new(),
    };
    ListTrace {
        list: v.list,
        items: v.items.clone(),
        f,
        alpha: v.alpha.map(|a| tape.value(a).to_vec()).unwrap_or_default(),
        y: tape.value(v.y).to_vec(),
    }
}

/// Runs one example and extracts its [`ForwardTrace`]. With `training`
/// set, dropout at `rate` is drawn from `seed`.
pub fn forward(params: &ParameterSet, ex: &ProfileExample, training: bool, rate: f64, seed: u64) -> Result<ForwardTrace> {
    let mut drop = if training {
        Dropout::training(rate, seed, &[])?
    } else {
        Dropout::inference()
    };
    let mut tape = Tape::new(&params.store);
    let out = forward_batch(&mut tape, params, std::slice::from_ref(ex), &mut drop)?;
    let v = &out.examples[0];
    let sa = params.config.ablation.use_self_attention;
    let g = match (v.profile.g, v.profile.beta) {
        (Some(g), _) => tape.value(g).to_vec(),
        (None, Some(_)) if !sa => identity(ex.max_lists()),
        _ => Vec::new(),
    };
    Ok(ForwardTrace {
        user: ex.user,
        list: ex.list,
        candidate: list_trace(&tape, &v.candidate, sa),
        profile: v.profile.slots.iter().map(|s| list_trace(&tape, s, sa)).collect(),
        profile_mask: ex.profile_mask.clone(),
        g,
        beta: v.profile.beta.map(|b| tape.value(b).to_vec()).unwrap_or_default(),
        x: tape.value(v.profile.x).to_vec(),
        p: tape.value(v.p).to_vec(),
        q: tape.value(v.q).to_vec(),
        score: tape.value(out.scores)[0],
    })
}

/// `q_l` for a list, in inference mode.
pub fn encode_list(params: &ParameterSet, builder: &ProfileBuilder, list: usize) -> Result<Vec<f64>> {
    let mut tape = Tape::new(&params.store);
    let mut drop = Dropout::inference();
    let v = list_on_tape(&mut tape, params, builder.list_vector(list), &builder.list_mask(list), Some(list), &mut drop)?;
    let q = if params.config.ablation.use_id_embeddings {
        let el = tape.gather(params.ids.list_emb, &[list])?;
        tape.add(v.y, el)?
    } else {
        v.y
    };
    Ok(tape.value(q).to_vec())
}

/// `p_u` from the user's full train profile, in inference mode.
pub fn encode_user(params: &ParameterSet, builder: &ProfileBuilder, user: usize) -> Result<Vec<f64>> {
    let ex = builder.example_excluding(user, 0, 0.0, None);
    let mut tape = Tape::new(&params.store);
    let v = user_on_tape(&mut tape, params, &ex, &mut Dropout::inference())?;
    let p = if params.config.ablation.use_id_embeddings {
        let eu = tape.gather(params.ids.user_emb, &[user])?;
        tape.add(v.x, eu)?
    } else {
        v.x
    };
    Ok(tape.value(p).to_vec())
}

/// The prediction network on plain vectors.
pub fn head_score(params: &ParameterSet, p: &[f64], q: &[f64]) -> f64 {
    let d = params.d();
    let w1 = params.store.get(params.ids.w1).data();
    let b1 = params.store.get(params.ids.b1).data();
    let w2 = params.store.get(params.ids.w2).data();
    let b2 = params.store.get(params.ids.b2).data()[0];
    let width = 3 * d;
    let mut out = b2;
    for (r, (&b, &v)) in b1.iter().zip(w2).enumerate() {
        let row = &w1[r * width..(r + 1) * width];
        let mut h = b;
        for c in 0..d {
            h += row[c] * p[c] * q[c] + row[d + c] * q[c] + row[2 * d + c] * p[c];
        }
        out += v * h.max(0.0);
    }
    sigmoid(out)
}
