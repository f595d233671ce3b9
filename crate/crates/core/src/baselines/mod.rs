//! Reference rankers: popularity, MF and BPR.

mod factor;
mod itempop;

pub use factor::{bpr_train, bpr_triple_loss, mf_train, BaselineOutcome, FactorModel};
pub use itempop::{itempop, PopularityTable};
