//! Tape-based reverse-mode differentiation over 64-bit reals.
//!
//! A [`Tape`] records every operation applied to its [`Var`]s as a node with
//! a list of `(parent, local partial)` edges. [`Tape::backward`] then sweeps
//! the nodes in reverse recording order, which is a valid reverse topological
//! order because a node can only reference nodes recorded before it.
//!
//! Values that do not depend on any tape input are plain constants: a `Var`
//! with no tape attached. Operations between constants never touch a tape,
//! so large background buffers cost nothing to record.
//!
//! ```
//! use msfadv::diff::Tape;
//!
//! let tape = Tape::new();
//! let x = tape.var(3.0);
//! let y = x * x;
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.wrt(x), 6.0);
//! ```

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};

#[derive(Default)]
struct Inner {
    values: Vec<f64>,
    // node i owns edges[starts[i]..starts[i + 1]]
    starts: Vec<u32>,
    edges: Vec<(u32, f64)>,
    first_non_finite: Option<(usize, &'static str)>,
}

impl Inner {
    fn push(&mut self, value: f64, op: &'static str, edges: impl IntoIterator<Item = (u32, f64)>) -> u32 {
        let idx = self.values.len();
        if self.starts.is_empty() {
            self.starts.push(0);
        }
        self.edges.extend(edges);
        self.starts.push(self.edges.len() as u32);
        self.values.push(value);
        if !value.is_finite() && self.first_non_finite.is_none() {
            self.first_non_finite = Some((idx, op));
        }
        idx as u32
    }
}

/// Single-writer operation record. One tape per forward evaluation.
#[derive(Default)]
pub struct Tape {
    inner: RefCell<Inner>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("nodes", &self.len()).finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers an independent input.
    pub fn var(&self, value: f64) -> Var<'_> {
        let idx = self.inner.borrow_mut().push(value, "input", std::iter::empty());
        Var { tape: Some(self), idx, val: value }
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn record(&self, value: f64, op: &'static str, edges: &[(u32, f64)]) -> u32 {
        self.inner.borrow_mut().push(value, op, edges.iter().copied())
    }

    /// Reverse sweep from a scalar output.
    ///
    /// Fails if `output` was recorded on a different tape, or if any recorded
    /// node (up to and including the output) produced a non-finite value.
    pub fn backward(&self, output: Var<'_>) -> Result<Gradients> {
        let inner = self.inner.borrow();
        let n = inner.values.len();
        let mut adj = vec![0.0; n];
        let Some(tape) = output.tape else {
            // A constant output has a zero gradient with respect to everything.
            return Ok(Gradients { adj, tape_id: self as *const _ as usize });
        };
        if !std::ptr::eq(tape, self) || output.idx as usize >= n {
            return Err(Error::NotOnTape);
        }
        if let Some((node, op)) = inner.first_non_finite {
            if node <= output.idx as usize {
                return Err(Error::NonFinite { op: op.to_string(), node });
            }
        }
        adj[output.idx as usize] = 1.0;
        for i in (0..=output.idx as usize).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            let (s, e) = (inner.starts[i] as usize, inner.starts[i + 1] as usize);
            for &(p, partial) in &inner.edges[s..e] {
                adj[p as usize] += g * partial;
            }
        }
        Ok(Gradients { adj, tape_id: self as *const _ as usize })
    }
}

/// Adjoints of one backward sweep.
#[derive(Debug, Clone)]
pub struct Gradients {
    adj: Vec<f64>,
    tape_id: usize,
}

impl Gradients {
    /// Derivative of the swept output with respect to `v`. Constants and
    /// variables from other tapes have derivative zero.
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        match v.tape {
            Some(t) if t as *const _ as usize == self.tape_id => self.adj[v.idx as usize],
            _ => 0.0,
        }
    }

    pub fn wrt_all(&self, vs: &[Var<'_>]) -> Vec<f64> {
        vs.iter().map(|&v| self.wrt(v)).collect()
    }
}

/// A differentiable 64-bit value: either a tape node or a constant.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    idx: u32,
    val: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tape {
            Some(_) => write!(f, "Var#{}({})", self.idx, self.val),
            None => write!(f, "Const({})", self.val),
        }
    }
}

impl<'t> Var<'t> {
    pub fn constant(val: f64) -> Self {
        Var { tape: None, idx: 0, val }
    }

    pub fn value(self) -> f64 {
        self.val
    }

    pub fn is_constant(self) -> bool {
        self.tape.is_none()
    }

    fn unary(self, val: f64, partial: f64, op: &'static str) -> Self {
        match self.tape {
            None => Var::constant(val),
            Some(t) => Var { tape: Some(t), idx: t.record(val, op, &[(self.idx, partial)]), val },
        }
    }

    fn binary(self, other: Var<'t>, val: f64, da: f64, db: f64, op: &'static str) -> Self {
        match (self.tape, other.tape) {
            (None, None) => Var::constant(val),
            (Some(t), None) => Var { tape: Some(t), idx: t.record(val, op, &[(self.idx, da)]), val },
            (None, Some(t)) => Var { tape: Some(t), idx: t.record(val, op, &[(other.idx, db)]), val },
            (Some(t), Some(_)) => Var {
                tape: Some(t),
                idx: t.record(val, op, &[(self.idx, da), (other.idx, db)]),
                val,
            },
        }
    }

    /// Records a node with an explicit value and explicit partials. This is the
    /// hook for straight-through and other custom-adjoint operations.
    pub fn custom(val: f64, op: &'static str, partials: &[(Var<'t>, f64)]) -> Self {
        let tape = partials.iter().find_map(|(v, _)| v.tape);
        match tape {
            None => Var::constant(val),
            Some(t) => {
                let edges: Vec<(u32, f64)> =
                    partials.iter().filter(|(v, _)| v.tape.is_some()).map(|(v, p)| (v.idx, *p)).collect();
                Var { tape: Some(t), idx: t.record(val, op, &edges), val }
            }
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.val + rhs.val, 1.0, 1.0, "add")
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.val - rhs.val, 1.0, -1.0, "sub")
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.val * rhs.val, rhs.val, self.val, "mul")
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let q = self.val / rhs.val;
        self.binary(rhs, q, 1.0 / rhs.val, -q / rhs.val, "div")
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(-self.val, -1.0, "neg")
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Var<'t> {
        self.unary(self.val + rhs, 1.0, "add_const")
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Var<'t> {
        self.unary(self.val - rhs, 1.0, "sub_const")
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Var<'t> {
        self.unary(self.val * rhs, rhs, "mul_const")
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: f64) -> Var<'t> {
        self.unary(self.val / rhs, 1.0 / rhs, "div_const")
    }
}

impl<'t> AddAssign for Var<'t> {
    fn add_assign(&mut self, rhs: Var<'t>) {
        *self = *self + rhs;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        let tape = Tape::new();
        let x = tape.var(3.0);
        let g = tape.backward(x * x).unwrap();
        assert_eq!(g.wrt(x), 6.0);
    }

    #[test]
    fn product_rule() {
        let tape = Tape::new();
        let x = tape.var(2.0);
        let y = tape.var(5.0);
        let f = x * y + x;
        let g = tape.backward(f).unwrap();
        assert_eq!((g.wrt(x), g.wrt(y)), (6.0, 2.0));
    }

    #[test]
    fn foreign_output_rejected() {
        let a = Tape::new();
        let b = Tape::new();
        let x = b.var(1.0);
        assert!(matches!(a.backward(x * x), Err(Error::NotOnTape)));
    }

    #[test]
    fn non_finite_names_the_operation() {
        let tape = Tape::new();
        let x = tape.var(0.0);
        let y = Var::constant(1.0) / x;
        match tape.backward(y) {
            Err(Error::NonFinite { op, .. }) => assert_eq!(op, "div"),
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn constants_record_nothing() {
        let tape = Tape::new();
        let c = Var::constant(2.0) * Var::constant(4.0) + 1.0;
        assert!(c.is_constant());
        assert!(tape.is_empty());
    }

    #[test]
    fn repeated_backward_is_bit_identical() {
        let tape = Tape::new();
        let xs = tape.vars(&[0.3, -1.2, 2.5]);
        let mut acc = Var::constant(0.0);
        for &x in &xs {
            acc += x * x * 0.7 + x / (x * x + 1.0);
        }
        let g1 = tape.backward(acc).unwrap().wrt_all(&xs);
        let g2 = tape.backward(acc).unwrap().wrt_all(&xs);
        assert_eq!(g1.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), g2.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}
