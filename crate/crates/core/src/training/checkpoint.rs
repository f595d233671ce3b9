use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::baselines::{FactorModel, PopularityTable};
use crate::data::InteractionDataset;
use crate::error::{Error, Result};
use crate::eval::{AttListScorer, Scorer};
use crate::model::ParameterSet;
use crate::numeric::AdamState;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Trained state of any supported ranker.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "state", rename_all = "kebab-case")]
pub enum ModelState {
    Attlist(ParameterSet),
    Itempop(PopularityTable),
    Mf(FactorModel),
    Bpr(FactorModel),
}

impl ModelState {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelState::Attlist(_) => "attlist",
            ModelState::Itempop(_) => "itempop",
            ModelState::Mf(_) => "mf",
            ModelState::Bpr(_) => "bpr",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: TrainConfig,
    pub config_hash: String,
    pub dataset: String,
    /// Last completed epoch; 0 before any training.
    pub epoch: u64,
    pub best_epoch: u64,
    pub best_metric: f64,
    pub model: ModelState,
    pub adam: Option<AdamState>,
}

impl Checkpoint {
    pub fn new(config: &TrainConfig, dataset: String, model: ModelState) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: config.clone(),
            config_hash: config.hash(),
            dataset,
            epoch: 0,
            best_epoch: 0,
            best_metric: 0.0,
            model,
            adam: None,
        }
    }

    pub fn kind(&self) -> &'static str {
        self.model.kind()
    }

    /// A ranker over `ds` backed by this checkpoint's model.
    pub fn scorer<'a>(&'a self, ds: &InteractionDataset) -> Result<Box<dyn Scorer + 'a>> {
        Ok(match &self.model {
            ModelState::Attlist(p) => Box::new(AttListScorer::new(p, ds)?),
            ModelState::Itempop(t) => Box::new(t.clone()),
            ModelState::Mf(m) | ModelState::Bpr(m) => Box::new(m.clone()),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Validation(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        if ck.config.hash() != ck.config_hash {
            return Err(Error::ConfigHashMismatch {
                expected: ck.config_hash.clone(),
                found: ck.config.hash(),
            });
        }
        Ok(ck)
    }

    /// Refuses a checkpoint trained under a different configuration unless
    /// `force` is set.
    pub fn check_config(&self, config: &TrainConfig, force: bool) -> Result<()> {
        let found = config.hash();
        if found != self.config_hash && !force {
            return Err(Error::ConfigHashMismatch {
                expected: self.config_hash.clone(),
                found,
            });
        }
        Ok(())
    }

    pub fn check_dataset(&self, fingerprint: &str, force: bool) -> Result<()> {
        if self.dataset != fingerprint && !force {
            return Err(Error::Validation(format!(
                "checkpoint was trained on dataset {} but {} was given",
                short(&self.dataset),
                short(fingerprint)
            )));
        }
        Ok(())
    }
}

fn short(h: &str) -> &str {
    &h[..h.len().min(12)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_hash_guard() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let cfg = TrainConfig::default();
        let mut ck = Checkpoint::new(
            &cfg,
            "abc".into(),
            ModelState::Itempop(PopularityTable { counts: vec![3, 1, 0] }),
        );
        ck.best_metric = 0.1 + 0.2;
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.kind(), "itempop");

        let other = TrainConfig { seed: 9, ..cfg.clone() };
        assert!(matches!(back.check_config(&other, false), Err(Error::ConfigHashMismatch { .. })));
        back.check_config(&other, true).unwrap();
        back.check_config(&cfg, false).unwrap();
        assert!(back.check_dataset("xyz", false).is_err());
    }
}
