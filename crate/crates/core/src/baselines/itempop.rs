use serde::{Deserialize, Serialize};

use crate::data::{InteractionDataset, Split};
use crate::error::Result;
use crate::eval::Scorer;

/// Train-split interaction count per list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopularityTable {
    pub counts: Vec<usize>,
}

/// Most-interacted lists first, identically for every user.
pub fn itempop(ds: &InteractionDataset) -> PopularityTable {
    let mut counts = vec![0; ds.n_lists()];
    for it in ds.interactions().iter().filter(|it| it.split == Split::Train) {
        counts[it.list] += 1;
    }
    PopularityTable { counts }
}

impl Scorer for PopularityTable {
    fn score_lists(&self, _user: usize, out: &mut [f64]) -> Result<()> {
        for (o, &c) in out.iter_mut().zip(&self.counts) {
            *o = c as f64;
        }
        Ok(())
    }
}
