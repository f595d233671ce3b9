#![allow(dead_code)]

pub mod invariants;

use attlist::data::ProfileExample;
use attlist::model::{AblationConfig, Cardinalities, ModelConfig, ParameterSet};
use attlist::numeric::ParamId;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const SIZES: Cardinalities = Cardinalities {
    users: 6,
    lists: 7,
    items: 9,
};

pub fn tiny_config(ablation: AblationConfig) -> ModelConfig {
    ModelConfig {
        dim: 4,
        hidden: 5,
        max_lists: 2,
        max_items: 3,
        ablation,
    }
}

/// Parameters drawn wider than the initialiser so every nonlinearity is
/// exercised away from zero.
pub fn random_params(cfg: ModelConfig, seed: u64) -> ParameterSet {
    let mut p = ParameterSet::init(cfg, SIZES, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let ids: Vec<ParamId> = p.store.ids().collect();
    for id in ids {
        for v in p.store.get_mut(id).data_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    let d = p.d();
    p.store.get_mut(p.ids.item_emb).data_mut()[..d].fill(0.0);
    p
}

fn padded_list(rng: &mut ChaCha8Rng, m: usize, min_len: usize) -> (Vec<usize>, Vec<bool>) {
    let len = rng.gen_range(min_len..=m);
    let items: Vec<usize> = (0..m)
        .map(|i| if i < len { rng.gen_range(1..=SIZES.items) } else { 0 })
        .collect();
    let mask = items.iter().map(|&i| i != 0).collect();
    (items, mask)
}

/// A random well-formed example; lists and profiles may be partly or
/// entirely padding.
pub fn random_example(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> ProfileExample {
    let (n, m) = (cfg.max_lists, cfg.max_items);
    let (list_items, list_mask) = padded_list(rng, m, 0);
    let live_slots = rng.gen_range(0..=n);
    let mut profile_items = vec![0; n * m];
    let mut profile_item_mask = vec![false; n * m];
    let mut profile_lists = vec![None; n];
    for s in 0..live_slots {
        let (items, mask) = padded_list(rng, m, 1);
        profile_items[s * m..(s + 1) * m].copy_from_slice(&items);
        profile_item_mask[s * m..(s + 1) * m].copy_from_slice(&mask);
        profile_lists[s] = Some(rng.gen_range(0..SIZES.lists));
    }
    ProfileExample {
        user: rng.gen_range(0..SIZES.users),
        list: rng.gen_range(0..SIZES.lists),
        label: f64::from(rng.gen_range(0..2u8)),
        profile_mask: profile_lists.iter().map(Option::is_some).collect(),
        profile_lists,
        profile_items,
        profile_item_mask,
        list_items,
        list_mask,
    }
}

struct Mat<'a> {
    cols: usize,
    data: &'a [f64],
}

impl Mat<'_> {
    fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

fn mat(p: &ParameterSet, id: ParamId) -> Mat<'_> {
    let t = p.store.get(id);
    Mat {
        cols: t.dims2().1,
        data: t.data(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Softmax over the entries where `live` holds; zero elsewhere.
fn masked_softmax(logits: &[f64], live: &[bool]) -> Vec<f64> {
    let max = logits
        .iter()
        .zip(live)
        .filter(|(_, &l)| l)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits
        .iter()
        .zip(live)
        .map(|(&v, &l)| if l { (v - max).exp() } else { 0.0 })
        .collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Self-attention with residual, then attention pooling with `(w, b, u)`.
/// `pool_refined` picks whether the weighted sum runs over refined rows.
fn aggregate(rows: &[Vec<f64>], live: &[bool], w: &Mat, b: &[f64], u: &[f64], pool_refined: bool) -> Vec<f64> {
    let m = rows.len();
    let d = rows[0].len();
    let scale = (d as f64).sqrt();
    let mut refined = Vec::with_capacity(m);
    for i in 0..m {
        let scores: Vec<f64> = (0..m).map(|j| dot(&rows[i], &rows[j]) / scale).collect();
        let f = masked_softmax(&scores, live);
        let r: Vec<f64> = (0..d)
            .map(|c| rows[i][c] + (0..m).map(|j| f[j] * rows[j][c]).sum::<f64>())
            .collect();
        refined.push(r);
    }
    let logits: Vec<f64> = refined
        .iter()
        .map(|r| (0..d).map(|k| u[k] * (dot(w.row(k), r) + b[k]).tanh()).sum())
        .collect();
    let weights = masked_softmax(&logits, live);
    let values = if pool_refined { &refined } else { rows };
    (0..d)
        .map(|c| (0..m).map(|i| weights[i] * values[i][c]).sum())
        .collect()
}

fn list_vector(p: &ParameterSet, items: &[usize], mask: &[bool]) -> Vec<f64> {
    let d = p.d();
    if !mask.iter().any(|&b| b) {
        return vec![0.0; d];
    }
    let e = mat(p, p.ids.item_emb);
    let o = mat(p, p.ids.pos_emb);
    let z: Vec<Vec<f64>> = items
        .iter()
        .enumerate()
        .map(|(i, &it)| (0..d).map(|c| e.row(it)[c] + o.row(i)[c]).collect())
        .collect();
    let w = mat(p, p.ids.item_w);
    let b = p.store.get(p.ids.item_b).data();
    let u = p.store.get(p.ids.item_u).data();
    aggregate(&z, mask, &w, b, u, true)
}

/// The full model written out directly for the default architecture.
pub fn oracle_score(p: &ParameterSet, ex: &ProfileExample) -> f64 {
    let (d, m) = (p.d(), p.config.max_items);
    let y = list_vector(p, &ex.list_items, &ex.list_mask);
    let ys: Vec<Vec<f64>> = (0..p.config.max_lists)
        .map(|s| {
            let items = &ex.profile_items[s * m..(s + 1) * m];
            let mask = &ex.profile_item_mask[s * m..(s + 1) * m];
            if ex.profile_mask[s] {
                list_vector(p, items, mask)
            } else {
                vec![0.0; d]
            }
        })
        .collect();
    let x = if ex.profile_mask.iter().any(|&b| b) {
        let w = mat(p, p.ids.list_w);
        let b = p.store.get(p.ids.list_b).data();
        let u = p.store.get(p.ids.list_u).data();
        aggregate(&ys, &ex.profile_mask, &w, b, u, false)
    } else {
        vec![0.0; d]
    };
    let eu = mat(p, p.ids.user_emb);
    let el = mat(p, p.ids.list_emb);
    let pu: Vec<f64> = (0..d).map(|c| x[c] + eu.row(ex.user)[c]).collect();
    let ql: Vec<f64> = (0..d).map(|c| y[c] + el.row(ex.list)[c]).collect();
    let h0: Vec<f64> = (0..d)
        .map(|c| pu[c] * ql[c])
        .chain(ql.iter().copied())
        .chain(pu.iter().copied())
        .collect();
    let w1 = mat(p, p.ids.w1);
    let b1 = p.store.get(p.ids.b1).data();
    let w2 = p.store.get(p.ids.w2).data();
    let b2 = p.store.get(p.ids.b2).data()[0];
    let h1: Vec<f64> = (0..p.config.hidden)
        .map(|r| (dot(w1.row(r), &h0) + b1[r]).max(0.0))
        .collect();
    1.0 / (1.0 + (-(dot(w2, &h1) + b2)).exp())
}

/// Brute-force NDCG, precision and recall at `k`: walk the top `k` and
/// test membership by linear scan.
pub fn metric_oracle(ranked: &[usize], truth: &[usize], k: usize) -> (f64, f64, f64) {
    let mut hits = 0usize;
    let mut dcg = 0.0;
    for (pos, l) in ranked.iter().take(k).enumerate() {
        if truth.iter().any(|t| t == l) {
            hits += 1;
            dcg += 1.0 / (pos as f64 + 2.0).log2();
        }
    }
    let mut idcg = 0.0;
    for pos in 0..truth.len().min(k) {
        idcg += 1.0 / (pos as f64 + 2.0).log2();
    }
    let ndcg = if truth.is_empty() { 0.0 } else { dcg / idcg };
    let recall = if truth.is_empty() { 0.0 } else { hits as f64 / truth.len() as f64 };
    (ndcg, hits as f64 / k as f64, recall)
}
