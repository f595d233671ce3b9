use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::numeric::rng::{stream_rng, streams};
use crate::numeric::{ParamId, ParamStore, Tensor};

const EMBED_SCALE: f64 = 0.05;

/// Handles to each named parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamIds {
    pub item_emb: ParamId,
    pub pos_emb: ParamId,
    pub item_w: ParamId,
    pub item_b: ParamId,
    pub item_u: ParamId,
    pub list_w: ParamId,
    pub list_b: ParamId,
    pub list_u: ParamId,
    pub user_emb: ParamId,
    pub list_emb: ParamId,
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
    pub item_proj: Option<Projections>,
    pub list_proj: Option<Projections>,
}

/// Query, key and value matrices of one attention level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Projections {
    pub q: ParamId,
    pub k: ParamId,
    pub v: ParamId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cardinalities {
    pub users: usize,
    pub lists: usize,
    pub items: usize,
}

/// All trainable tensors of the model together with their shapes' origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub config: ModelConfig,
    pub sizes: Cardinalities,
    pub store: ParamStore,
    pub ids: ParamIds,
}

fn uniform<R: Rng>(rng: &mut R, shape: &[usize], scale: f64) -> Tensor {
    Tensor::from_fn(shape, |_| rng.gen_range(-scale..=scale))
}

fn glorot<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    uniform(rng, &[rows, cols], limit)
}

impl ParameterSet {
    /// Fresh parameters for a dataset of the given size. Item embedding
    /// row 0 is the padding item and starts (and stays) at zero.
    pub fn init(config: ModelConfig, sizes: Cardinalities, seed: u64) -> Result<Self> {
        config.validate()?;
        if sizes.users == 0 || sizes.lists == 0 {
            return Err(Error::Config("model needs at least one user and one list".into()));
        }
        let d = config.dim;
        let mut rng = stream_rng(seed, &[streams::INIT]);
        let mut store = ParamStore::new();

        let mut item_emb = uniform(&mut rng, &[sizes.items + 1, d], EMBED_SCALE);
        item_emb.row_mut(0).fill(0.0);
        let item_emb = store.add("item_emb", item_emb);
        let pos_emb = store.add("pos_emb", uniform(&mut rng, &[config.max_items, d], EMBED_SCALE));
        let item_w = store.add("item_w", glorot(&mut rng, d, d));
        let item_b = store.add("item_b", Tensor::zeros(&[1, d]));
        let item_u = store.add("item_u", uniform(&mut rng, &[1, d], EMBED_SCALE));
        let list_w = store.add("list_w", glorot(&mut rng, d, d));
        let list_b = store.add("list_b", Tensor::zeros(&[1, d]));
        let list_u = store.add("list_u", uniform(&mut rng, &[1, d], EMBED_SCALE));
        let user_emb = store.add("user_emb", uniform(&mut rng, &[sizes.users, d], EMBED_SCALE));
        let list_emb = store.add("list_emb", uniform(&mut rng, &[sizes.lists, d], EMBED_SCALE));
        let w1 = store.add("w1", glorot(&mut rng, config.hidden, 3 * d));
        let b1 = store.add("b1", Tensor::zeros(&[1, config.hidden]));
        let w2 = store.add("w2", glorot(&mut rng, 1, config.hidden));
        let b2 = store.add("b2", Tensor::zeros(&[1, 1]));

        let (item_proj, list_proj) = if config.ablation.use_linear_projections {
            let mut set = |level: &str| Projections {
                q: store.add(format!("{level}_q"), glorot(&mut rng, d, d)),
                k: store.add(format!("{level}_k"), glorot(&mut rng, d, d)),
                v: store.add(format!("{level}_v"), glorot(&mut rng, d, d)),
            };
            (Some(set("item")), Some(set("list")))
        } else {
            (None, None)
        };

        Ok(ParameterSet {
            config,
            sizes,
            store,
            ids: ParamIds {
                item_emb,
                pos_emb,
                item_w,
                item_b,
                item_u,
                list_w,
                list_b,
                list_u,
                user_emb,
                list_emb,
                w1,
                b1,
                w2,
                b2,
                item_proj,
                list_proj,
            },
        })
    }

    pub fn d(&self) -> usize {
        self.config.dim
    }

    pub fn parameter_count(&self) -> usize {
        self.store.iter().map(|(_, _, t)| t.len()).sum()
    }

    /// Zeroes the padding row's gradient so optimizer steps never move it.
    pub fn freeze_padding_grad(&mut self) {
        let d = self.d();
        if let Some(g) = self.store.get_mut(self.ids.item_emb).grad_mut() {
            g[..d].fill(0.0);
        }
    }

    pub fn padding_row(&self) -> &[f64] {
        self.store.get(self.ids.item_emb).row(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::AblationConfig;

    fn cfg(proj: bool) -> ModelConfig {
        ModelConfig {
            dim: 4,
            hidden: 5,
            max_lists: 2,
            max_items: 3,
            ablation: AblationConfig {
                use_linear_projections: proj,
                ..AblationConfig::default()
            },
        }
    }

    const SIZES: Cardinalities = Cardinalities {
        users: 7,
        lists: 9,
        items: 11,
    };

    #[test]
    fn shapes_follow_config() {
        let p = ParameterSet::init(cfg(false), SIZES, 3).unwrap();
        let shape = |id: ParamId| p.store.get(id).shape().to_vec();
        assert_eq!(shape(p.ids.item_emb), vec![12, 4]);
        assert_eq!(shape(p.ids.pos_emb), vec![3, 4]);
        assert_eq!(shape(p.ids.item_w), vec![4, 4]);
        assert_eq!(shape(p.ids.user_emb), vec![7, 4]);
        assert_eq!(shape(p.ids.list_emb), vec![9, 4]);
        assert_eq!(shape(p.ids.w1), vec![5, 12]);
        assert_eq!(shape(p.ids.w2), vec![1, 5]);
        assert_eq!(shape(p.ids.b2), vec![1, 1]);
        assert!(p.padding_row().iter().all(|&v| v == 0.0));
        assert!(p.ids.item_proj.is_none() && p.store.find("item_q").is_none());
    }

    #[test]
    fn projections_allocated_only_when_enabled() {
        let p = ParameterSet::init(cfg(true), SIZES, 3).unwrap();
        assert!(p.ids.item_proj.is_some() && p.ids.list_proj.is_some());
        for name in ["item_q", "item_k", "item_v", "list_q", "list_k", "list_v"] {
            assert_eq!(p.store.get(p.store.find(name).unwrap()).shape(), &[4, 4]);
        }
    }

    #[test]
    fn init_is_seeded() {
        let a = ParameterSet::init(cfg(false), SIZES, 3).unwrap();
        let b = ParameterSet::init(cfg(false), SIZES, 3).unwrap();
        let c = ParameterSet::init(cfg(false), SIZES, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
