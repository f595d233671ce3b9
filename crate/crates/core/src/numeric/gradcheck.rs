//! Finite-difference verification of tape gradients.

use super::{ParamStore, Tape, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub elements: usize,
    pub max_relative_error: f64,
    pub worst_index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.max_relative_error)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_error() <= self.tolerance
    }
}

/// `|a - n| / max(1, |a|, |n|)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

/// Compares tape gradients against central differences with step `step`
/// for every element of every parameter in `params`.
///
/// `loss_fn` must build a scalar loss on the tape it is handed and must be
/// deterministic; two unperturbed evaluations that disagree are reported as
/// [`Error::NonDeterministic`].
pub fn gradient_check<F>(params: &mut ParamStore, loss_fn: F, step: f64, tolerance: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'_>) -> Result<Var>,
{
    let eval = |p: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new(p);
        let l = loss_fn(&mut tape)?;
        Ok(tape.scalar(l))
    };

    let (base, grads) = {
        let mut tape = Tape::new(params);
        let l = loss_fn(&mut tape)?;
        (tape.scalar(l), tape.backward(l)?)
    };
    let again = eval(params)?;
    if base.to_bits() != again.to_bits() {
        return Err(Error::NonDeterministic {
            first: base,
            second: again,
        });
    }

    let mut report = Vec::with_capacity(params.len());
    for id in params.ids().collect::<Vec<_>>() {
        let n = params.get(id).len();
        let analytic = grads.get(id).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
        let mut worst = (0.0, 0);
        for i in 0..n {
            let orig = params.get(id).data()[i];
            params.get_mut(id).data_mut()[i] = orig + step;
            let up = eval(params);
            params.get_mut(id).data_mut()[i] = orig - step;
            let down = eval(params);
            params.get_mut(id).data_mut()[i] = orig;
            let numeric = (up? - down?) / (2.0 * step);
            let err = relative_error(analytic[i], numeric);
            if err > worst.0 {
                worst = (err, i);
            }
        }
        report.push(ParamCheck {
            name: params.name(id).to_string(),
            elements: n,
            max_relative_error: worst.0,
            worst_index: worst.1,
        });
    }
    Ok(GradCheckReport {
        params: report,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Tensor;
    use crate::numeric::rng::stream_rng;
    use rand::Rng;

    #[test]
    fn sum_of_parameters_has_unit_gradients() {
        let mut s = ParamStore::new();
        let a = s.add("a", Tensor::from_fn(&[2, 3], |i| i as f64 * 0.1));
        let report = gradient_check(
            &mut s,
            |t| {
                let v = t.param(a);
                Ok(t.sum(v))
            },
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(report.passed());
        let grads = {
            let mut t = Tape::new(&s);
            let v = t.param(a);
            let l = t.sum(v);
            t.backward(l).unwrap()
        };
        assert!(grads.get(a).unwrap().iter().all(|&g| g == 1.0));
    }

    #[test]
    fn corrupted_backward_rule_is_reported() {
        let mut s = ParamStore::new();
        let a = s.add("a", Tensor::from_fn(&[1, 4], |i| 0.3 + i as f64 * 0.2));
        // cube with a deliberately wrong derivative (2x instead of 3x²)
        let report = gradient_check(
            &mut s,
            |t| {
                let v = t.param(a);
                let c = t.map(v, |x| x * x * x, |x| 2.0 * x);
                Ok(t.sum(c))
            },
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(!report.passed());
        assert!(report.max_error() > 1e-4);
    }

    #[test]
    fn nondeterministic_loss_is_detected() {
        use std::cell::Cell;
        let mut s = ParamStore::new();
        let a = s.add("a", Tensor::zeros(&[1]));
        let calls = Cell::new(0u32);
        let res = gradient_check(
            &mut s,
            |t| {
                calls.set(calls.get() + 1);
                let v = t.param(a);
                let noise = t.constant(1, 1, vec![calls.get() as f64])?;
                let x = t.add(v, noise)?;
                Ok(t.sum(x))
            },
            1e-5,
            1e-6,
        );
        assert!(matches!(res, Err(Error::NonDeterministic { .. })));
    }

    /// Every primitive against central differences on random inputs.
    #[test]
    fn primitives_match_finite_differences() {
        let mut rng = stream_rng(11, &[0]);
        let mut s = ParamStore::new();
        let a = s.add("a", Tensor::from_fn(&[3, 4], |_| rng.gen_range(-1.0..1.0)));
        let b = s.add("b", Tensor::from_fn(&[4, 2], |_| rng.gen_range(-1.0..1.0)));
        let c = s.add("c", Tensor::from_fn(&[3, 4], |_| rng.gen_range(-1.0..1.0)));
        let r = s.add("r", Tensor::from_fn(&[1, 4], |_| rng.gen_range(-1.0..1.0)));
        let p = s.add("p", Tensor::from_fn(&[3, 1], |_| rng.gen_range(0.1..0.9)));

        let cases: Vec<(&str, Box<dyn Fn(&mut Tape<'_>) -> Result<Var>>)> = vec![
            ("matmul", Box::new(|t| {
                let x = t.param(a);
                let y = t.param(b);
                let z = t.matmul(x, y)?;
                let z = t.tanh(z);
                Ok(t.sum(z))
            })),
            ("matmul_t", Box::new(|t| {
                let x = t.param(a);
                let y = t.param(c);
                let z = t.matmul_t(x, y)?;
                Ok(t.sum_squares(z))
            })),
            ("transpose", Box::new(|t| {
                let x = t.param(a);
                let y = t.transpose(x);
                let w = t.param(c);
                let z = t.matmul(w, y)?;
                let z = t.sigmoid(z);
                Ok(t.sum(z))
            })),
            ("add_mul_scale", Box::new(|t| {
                let x = t.param(a);
                let y = t.param(c);
                let z = t.add(x, y)?;
                let z = t.mul(z, x)?;
                let z = t.scale(z, 0.7);
                Ok(t.sum_squares(z))
            })),
            ("add_row_relu", Box::new(|t| {
                let x = t.param(a);
                let y = t.param(r);
                let z = t.add_row(x, y)?;
                let z = t.relu(z);
                Ok(t.sum_squares(z))
            })),
            ("masked_softmax", Box::new(|t| {
                let x = t.param(a);
                let mask: Vec<bool> = (0..12).map(|i| i % 4 != 1).collect();
                let y = t.row_softmax(x, Some(&mask))?;
                let w = t.param(c);
                let z = t.mul(y, w)?;
                Ok(t.sum(z))
            })),
            ("concat_stack", Box::new(|t| {
                let x = t.param(a);
                let y = t.param(c);
                let z = t.concat_cols(&[x, y])?;
                let v = t.param(r);
                let vv = t.concat_cols(&[v, v])?;
                let w = t.stack_rows(&[z, z])?;
                let w = t.tanh(w);
                let q = t.matmul_t(w, vv)?;
                Ok(t.sum_squares(q))
            })),
            ("bce", Box::new(|t| {
                let x = t.param(p);
                t.bce(x, &[1.0, 0.0, 1.0])
            })),
        ];

        for (name, f) in cases {
            let report = gradient_check(&mut s, f, 1e-5, 1e-6).unwrap();
            assert!(report.passed(), "{name}: {:?}", report.params);
        }
    }
}
