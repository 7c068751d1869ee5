//! Small generic 3-vector used by the differentiable geometry code.

use std::ops::{Add, Mul, Sub};

use super::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct V3<S>(pub [S; 3]);

impl<S: Scalar> V3<S> {
    pub fn new(x: S, y: S, z: S) -> Self {
        V3([x, y, z])
    }

    pub fn cst(p: [f64; 3]) -> Self {
        V3([S::cst(p[0]), S::cst(p[1]), S::cst(p[2])])
    }

    pub fn x(&self) -> S {
        self.0[0]
    }
    pub fn y(&self) -> S {
        self.0[1]
    }
    pub fn z(&self) -> S {
        self.0[2]
    }

    pub fn val(&self) -> [f64; 3] {
        [self.0[0].val(), self.0[1].val(), self.0[2].val()]
    }

    pub fn dot(&self, o: &V3<S>) -> S {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    pub fn dot_f(&self, o: [f64; 3]) -> S {
        S::linear(&[(self.0[0], o[0]), (self.0[1], o[1]), (self.0[2], o[2])])
    }

    pub fn cross(&self, o: &V3<S>) -> V3<S> {
        let [a0, a1, a2] = self.0;
        let [b0, b1, b2] = o.0;
        V3([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])
    }

    pub fn norm(&self) -> S {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: S) -> V3<S> {
        V3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }

    pub fn scale_f(&self, s: f64) -> V3<S> {
        V3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl<S: Scalar> Add for V3<S> {
    type Output = V3<S>;
    fn add(self, o: V3<S>) -> V3<S> {
        V3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl<S: Scalar> Sub for V3<S> {
    type Output = V3<S>;
    fn sub(self, o: V3<S>) -> V3<S> {
        V3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl<S: Scalar> Mul<S> for V3<S> {
    type Output = V3<S>;
    fn mul(self, s: S) -> V3<S> {
        self.scale(s)
    }
}

pub fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale3(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}
