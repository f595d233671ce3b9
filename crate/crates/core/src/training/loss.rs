use crate::error::Result;
use crate::model::ParameterSet;
use crate::numeric::{Tape, Var};

/// Summed binary cross-entropy of `pred` against 0/1 `labels`.
pub fn bce_loss(tape: &mut Tape<'_>, pred: Var, labels: &[f64]) -> Result<Var> {
    tape.bce(pred, labels)
}

/// `λ (‖W_I‖² + ‖W_L‖²)`. Nothing else is regularized.
pub fn l2_penalty(tape: &mut Tape<'_>, params: &ParameterSet, lambda: f64) -> Result<Var> {
    let wi = tape.param(params.ids.item_w);
    let wl = tape.param(params.ids.list_w);
    let a = tape.sum_squares(wi);
    let b = tape.sum_squares(wl);
    let s = tape.add(a, b)?;
    Ok(tape.scale(s, lambda))
}
