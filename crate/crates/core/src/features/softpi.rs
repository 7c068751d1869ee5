use crate::diff::Scalar;
use crate::error::{Error, Result};

use super::grid::CellGrid;

/// Steepness μ (per meter) of the tanh step approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TanhSharpness(f64);

impl TanhSharpness {
    pub const DEFAULT: TanhSharpness = TanhSharpness(100.0);

    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidArgument(format!("tanh sharpness must be positive, got {mu}")));
        }
        Ok(Self(mu))
    }

    pub fn mu(self) -> f64 {
        self.0
    }
}

impl Default for TanhSharpness {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Per-axis offsets `|u_m - u_i|` to the cell centre, or `None` when the
/// cell is not one of the 8 enclosing the point.
fn offsets<S: Scalar>(p: &[S; 3], grid: &CellGrid, cell: [usize; 3]) -> Option<[S; 3]> {
    let c = grid.center(cell);
    let mut out = [S::cst(0.0); 3];
    for d in 0..3 {
        let delta = p[d] - c[d];
        if delta.val().abs() >= grid.dims[d] {
            return None;
        }
        out[d] = delta.abs();
    }
    Some(out)
}

/// Trilinear inclusion weight `Π (1 - d/L)`.
pub fn soft_pi_trilinear<S: Scalar>(p: &[S; 3], grid: &CellGrid, cell: [usize; 3]) -> S {
    let Some(d) = offsets(p, grid, cell) else { return S::cst(0.0) };
    (0..3).fold(S::cst(1.0), |acc, k| acc * (d[k] / grid.dims[k]).rsub(1.0))
}

/// Inclusion weight with each distance pushed through a steep tanh step,
/// `d' = L/2 + (L/2) tanh(μ(d - L/2))`.
pub fn soft_pi_tanh<S: Scalar>(p: &[S; 3], grid: &CellGrid, cell: [usize; 3], sharpness: TanhSharpness) -> S {
    let Some(d) = offsets(p, grid, cell) else { return S::cst(0.0) };
    (0..3).fold(S::cst(1.0), |acc, k| {
        let half = 0.5 * grid.dims[k];
        // 1 - d'/L = (1 - tanh(z)) / 2 = sigmoid(-2z), without the cancellation near z >> 0
        acc * ((d[k] - half) * (-2.0 * sharpness.mu())).sigmoid()
    })
}
