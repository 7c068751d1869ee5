use crate::error::{Error, Result};

/// Axis-aligned lattice of cells; cell `(i, j, k)` spans
/// `origin + [i, i+1) * dims[0]` and so on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGrid {
    pub origin: [f64; 3],
    pub dims: [f64; 3],
    pub counts: [usize; 3],
}

impl CellGrid {
    pub fn new(origin: [f64; 3], dims: [f64; 3], counts: [usize; 3]) -> Result<Self> {
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidArgument("grid origin must be finite".into()));
        }
        if dims.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidArgument(format!("cell dims must be positive, got {dims:?}")));
        }
        if counts.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArgument(format!("cell counts must be positive, got {counts:?}")));
        }
        if counts.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n)).map_or(true, |n| n > 1 << 26) {
            return Err(Error::InvalidArgument("grid has too many cells".into()));
        }
        Ok(Self { origin, dims, counts })
    }

    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1] * self.counts[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn volume(&self) -> f64 {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn index(&self, c: [usize; 3]) -> usize {
        (c[0] * self.counts[1] + c[1]) * self.counts[2] + c[2]
    }

    pub fn cell(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.counts[2];
        let j = (idx / self.counts[2]) % self.counts[1];
        let i = idx / (self.counts[1] * self.counts[2]);
        [i, j, k]
    }

    pub fn center(&self, c: [usize; 3]) -> [f64; 3] {
        [0, 1, 2].map(|d| self.origin[d] + (c[d] as f64 + 0.5) * self.dims[d])
    }

    pub fn upper(&self) -> [f64; 3] {
        [0, 1, 2].map(|d| self.origin[d] + self.counts[d] as f64 * self.dims[d])
    }

    /// The up-to-8 cells whose centres enclose `p` (per axis, the two
    /// nearest centres), restricted to the grid.
    pub fn enclosing(&self, p: [f64; 3]) -> Vec<[usize; 3]> {
        let mut per_axis: [Vec<usize>; 3] = Default::default();
        for d in 0..3 {
            let u = (p[d] - self.origin[d]) / self.dims[d] - 0.5;
            let lo = u.floor();
            for c in [lo, lo + 1.0] {
                if c >= 0.0 && c < self.counts[d] as f64 {
                    per_axis[d].push(c as usize);
                }
            }
        }
        let mut out = Vec::with_capacity(8);
        for &i in &per_axis[0] {
            for &j in &per_axis[1] {
                for &k in &per_axis[2] {
                    out.push([i, j, k]);
                }
            }
        }
        out
    }

    /// Grid of the same footprint collapsed to one layer along z.
    pub fn columns(&self) -> CellGrid {
        CellGrid { counts: [self.counts[0], self.counts[1], 1], ..*self }
    }
}
