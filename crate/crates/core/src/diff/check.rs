//! Central finite-difference verification of recorded gradients.

use super::scalar::Scalar;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};

/// Per-coordinate comparison of analytic and numeric gradients.
#[derive(Debug, Clone)]
pub struct GradientCheck {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub max_rel_error: f64,
}

/// Pins a closure to the higher-ranked signature the checkers expect, so it
/// can be bound to a variable and reused.
pub fn scalar_fn<F>(f: F) -> F
where
    F: for<'t> Fn(&[Var<'t>]) -> Var<'t>,
{
    f
}

/// Evaluates `f` on constants only (no tape).
pub fn eval_plain<F>(f: &F, x: &[f64]) -> f64
where
    F: for<'t> Fn(&[Var<'t>]) -> Var<'t>,
{
    let xs: Vec<Var<'_>> = x.iter().map(|&v| Var::constant(v)).collect();
    f(&xs).val()
}

/// Gradient of `f` at `x` via one backward sweep.
pub fn gradient<F>(f: &F, x: &[f64]) -> Result<(f64, Vec<f64>)>
where
    F: for<'t> Fn(&[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::new();
    let xs = tape.vars(x);
    let y = f(&xs);
    let g = tape.backward(y)?;
    Ok((y.val(), g.wrt_all(&xs)))
}

/// Compares backward() against central differences with step
/// `h · max(1, |x_i|)` per coordinate. Relative error uses the denominator
/// `max(|analytic|, |numeric|, 1e-8)`.
pub fn finite_diff_check<F>(f: &F, x: &[f64], h: f64) -> Result<GradientCheck>
where
    F: for<'t> Fn(&[Var<'t>]) -> Var<'t>,
{
    let (_, analytic) = gradient(f, x)?;
    let mut numeric = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let step = h * x[i].abs().max(1.0);
        probe[i] = x[i] + step;
        let fp = eval_plain(f, &probe);
        probe[i] = x[i] - step;
        let fm = eval_plain(f, &probe);
        probe[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite { op: format!("probe of coordinate {i}"), node: i });
        }
        numeric.push((fp - fm) / (2.0 * step));
    }
    let max_rel_error = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-8))
        .fold(0.0, f64::max);
    Ok(GradientCheck { analytic, numeric, max_rel_error })
}
