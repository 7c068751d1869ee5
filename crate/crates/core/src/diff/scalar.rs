//! The numeric abstraction every differentiable routine is written against.
//!
//! Pipelines are generic over [`Scalar`] so the same code runs on plain `f64`
//! (fitness evaluation, hard oracles) and on [`Var`] (gradient evaluation).

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use super::tape::Var;

pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
{
    fn cst(v: f64) -> Self;
    fn val(self) -> f64;

    fn tanh(self) -> Self;
    fn abs(self) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn sigmoid(self) -> Self;

    /// Forward value `forward`, backward identity onto `self`.
    fn straight_through(self, forward: f64) -> Self;

    /// `c - self`
    fn rsub(self, c: f64) -> Self {
        -self + c
    }

    fn sum(items: &[Self]) -> Self {
        items.iter().fold(Self::cst(0.0), |acc, &x| acc + x)
    }

    /// Σ coefficient·item as one recorded node.
    fn linear(items: &[(Self, f64)]) -> Self {
        items.iter().fold(Self::cst(0.0), |acc, &(x, c)| acc + x * c)
    }

    fn sq(self) -> Self {
        self * self
    }

    /// Subgradient max: the larger operand is passed through unchanged.
    fn max(self, other: Self) -> Self {
        if other.val() > self.val() {
            other
        } else {
            self
        }
    }

    fn min(self, other: Self) -> Self {
        if other.val() < self.val() {
            other
        } else {
            self
        }
    }
}

fn sigmoid_f64(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn val(self) -> f64 {
        self
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn sigmoid(self) -> Self {
        sigmoid_f64(self)
    }
    fn straight_through(self, forward: f64) -> Self {
        forward
    }
    fn sum(items: &[Self]) -> Self {
        items.iter().sum()
    }
}

impl<'t> Scalar for Var<'t> {
    fn cst(v: f64) -> Self {
        Var::constant(v)
    }
    fn val(self) -> f64 {
        self.value()
    }
    fn tanh(self) -> Self {
        let t = self.value().tanh();
        Var::custom(t, "tanh", &[(self, 1.0 - t * t)])
    }
    fn abs(self) -> Self {
        let v = self.value();
        // subgradient +1 at the kink
        Var::custom(v.abs(), "abs", &[(self, if v < 0.0 { -1.0 } else { 1.0 })])
    }
    fn sqrt(self) -> Self {
        let s = self.value().sqrt();
        Var::custom(s, "sqrt", &[(self, 0.5 / s)])
    }
    fn exp(self) -> Self {
        let e = self.value().exp();
        Var::custom(e, "exp", &[(self, e)])
    }
    fn sigmoid(self) -> Self {
        let s = sigmoid_f64(self.value());
        Var::custom(s, "sigmoid", &[(self, s * (1.0 - s))])
    }
    fn straight_through(self, forward: f64) -> Self {
        Var::custom(forward, "straight_through", &[(self, 1.0)])
    }
    fn sum(items: &[Self]) -> Self {
        let v: f64 = items.iter().map(|x| x.value()).sum();
        let partials: Vec<(Var<'t>, f64)> = items.iter().map(|&x| (x, 1.0)).collect();
        Var::custom(v, "sum", &partials)
    }
    fn linear(items: &[(Self, f64)]) -> Self {
        let v: f64 = items.iter().map(|(x, c)| x.value() * c).sum();
        Var::custom(v, "linear", items)
    }
}
