use std::fmt::Write as _;
use std::path::Path;

use crate::diff::Scalar;
use crate::error::{Error, Result};
use crate::sensor::{LidarPoint, PointCloud};

use super::grid::CellGrid;
use super::softpi::{soft_pi_tanh, TanhSharpness};

/// Inclusion weight above which a point takes part in per-cell minima.
pub const MIN_SUPPORT: f64 = 0.5;
/// Soft count above which a cell is reported occupied.
pub const OCCUPANCY_THRESHOLD: f64 = 0.5;
pub const DEFAULT_EPS_DIV: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Count,
    Density,
    Occupancy,
    HeightMin,
    HeightMax,
    HeightMean,
    IntensityMin,
    IntensityMax,
    IntensityMean,
}

impl Channel {
    pub const ALL: [Channel; 9] = [
        Channel::Count,
        Channel::Density,
        Channel::Occupancy,
        Channel::HeightMin,
        Channel::HeightMax,
        Channel::HeightMean,
        Channel::IntensityMin,
        Channel::IntensityMax,
        Channel::IntensityMean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Count => "count",
            Channel::Density => "density",
            Channel::Occupancy => "occupancy",
            Channel::HeightMin => "height_min",
            Channel::HeightMax => "height_max",
            Channel::HeightMean => "height_mean",
            Channel::IntensityMin => "intensity_min",
            Channel::IntensityMax => "intensity_max",
            Channel::IntensityMean => "intensity_mean",
        }
    }

    pub fn from_name(s: &str) -> Option<Channel> {
        Channel::ALL.into_iter().find(|c| c.name() == s)
    }

    fn slot(self) -> usize {
        self as usize
    }
}

/// Per-cell aggregated features, one lattice per [`Channel`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid<S = f64> {
    pub grid: CellGrid,
    channels: [Vec<S>; 9],
}

impl<S: Scalar> FeatureGrid<S> {
    pub fn zeros(grid: CellGrid) -> Self {
        Self { grid, channels: std::array::from_fn(|_| vec![S::cst(0.0); grid.len()]) }
    }

    pub fn channel(&self, c: Channel) -> &[S] {
        &self.channels[c.slot()]
    }

    pub fn channel_mut(&mut self, c: Channel) -> &mut [S] {
        &mut self.channels[c.slot()]
    }

    pub fn get(&self, c: Channel, cell: [usize; 3]) -> S {
        self.channels[c.slot()][self.grid.index(cell)]
    }

    pub fn value(&self) -> FeatureGrid<f64> {
        FeatureGrid { grid: self.grid, channels: std::array::from_fn(|i| self.channels[i].iter().map(|v| v.val()).collect()) }
    }
}

#[derive(Default)]
struct CellAcc<S> {
    weights: Vec<S>,
    heights: Vec<S>,
    intensities: Vec<S>,
    h_max: Option<S>,
    h_min: Option<S>,
    i_max: Option<S>,
    i_min: Option<S>,
}

fn fold_opt<S: Scalar>(slot: &mut Option<S>, v: S, f: fn(S, S) -> S) {
    *slot = Some(match *slot {
        None => v,
        Some(cur) => f(cur, v),
    });
}

/// Soft cell features of `points` on `grid`, with heights taken as the
/// point z coordinate.
pub fn derive_features<S: Scalar>(
    points: &[LidarPoint<S>],
    grid: &CellGrid,
    sharpness: TanhSharpness,
    eps_div: f64,
) -> Result<FeatureGrid<S>> {
    if !(eps_div > 0.0) {
        return Err(Error::InvalidArgument(format!("eps_div must be positive, got {eps_div}")));
    }
    let mut acc: Vec<Option<CellAcc<S>>> = (0..grid.len()).map(|_| None).collect();
    for p in points {
        let pv = p.xyz.map(|c| c.val());
        for cell in grid.enclosing(pv) {
            let w = soft_pi_tanh(&p.xyz, grid, cell, sharpness);
            let a = acc[grid.index(cell)].get_or_insert_with(|| CellAcc {
                weights: Vec::new(),
                heights: Vec::new(),
                intensities: Vec::new(),
                h_max: None,
                h_min: None,
                i_max: None,
                i_min: None,
            });
            let wh = w * p.xyz[2];
            let wi = w * p.intensity;
            a.weights.push(w);
            a.heights.push(wh);
            a.intensities.push(wi);
            fold_opt(&mut a.h_max, wh, S::max);
            fold_opt(&mut a.i_max, wi, S::max);
            if w.val() > MIN_SUPPORT {
                fold_opt(&mut a.h_min, wh, S::min);
                fold_opt(&mut a.i_min, wi, S::min);
            }
        }
    }
    let mut out = FeatureGrid::zeros(*grid);
    let vol = grid.volume();
    for (idx, a) in acc.into_iter().enumerate() {
        let Some(a) = a else { continue };
        let count = S::sum(&a.weights);
        let denom = count + eps_div;
        let occ = count.straight_through(if count.val() > OCCUPANCY_THRESHOLD { 1.0 } else { 0.0 });
        let zero = S::cst(0.0);
        let set = |out: &mut FeatureGrid<S>, c: Channel, v: S| out.channels[c.slot()][idx] = v;
        set(&mut out, Channel::Count, count);
        set(&mut out, Channel::Density, count / vol);
        set(&mut out, Channel::Occupancy, occ);
        // the all-points maximum includes the zero contribution of every non-member
        set(&mut out, Channel::HeightMax, a.h_max.map_or(zero, |m| m.max(zero)));
        set(&mut out, Channel::HeightMin, a.h_min.unwrap_or(zero));
        set(&mut out, Channel::HeightMean, S::sum(&a.heights) / denom);
        set(&mut out, Channel::IntensityMax, a.i_max.map_or(zero, |m| m.max(zero)));
        set(&mut out, Channel::IntensityMin, a.i_min.unwrap_or(zero));
        set(&mut out, Channel::IntensityMean, S::sum(&a.intensities) / denom);
    }
    Ok(out)
}

/// Exact per-cell membership counts. Points on a shared face go to the
/// lower-index cell; points on the grid's outer lower face go to cell 0.
pub fn hard_count_oracle(pc: &PointCloud, grid: &CellGrid) -> Vec<u32> {
    let mut out = vec![0u32; grid.len()];
    'points: for p in &pc.points {
        let mut c = [0usize; 3];
        for d in 0..3 {
            let u = (p.xyz[d] - grid.origin[d]) / grid.dims[d];
            if !(0.0..=grid.counts[d] as f64).contains(&u) {
                continue 'points;
            }
            c[d] = (u.ceil() as usize).saturating_sub(1);
        }
        out[grid.index(c)] += 1;
    }
    out
}

/// Collapses the z axis: counts and densities add, extremes take the
/// extreme over occupied cells, means are count-weighted.
pub fn bev_aggregate<S: Scalar>(f: &FeatureGrid<S>, eps_div: f64) -> FeatureGrid<S> {
    let g = f.grid;
    let cols = g.columns();
    let mut out = FeatureGrid::zeros(cols);
    for i in 0..g.counts[0] {
        for j in 0..g.counts[1] {
            let cells: Vec<usize> = (0..g.counts[2]).map(|k| g.index([i, j, k])).collect();
            let col = cols.index([i, j, 0]);
            let pick = |c: Channel| -> Vec<S> { cells.iter().map(|&x| f.channel(c)[x]).collect() };
            let counts = pick(Channel::Count);
            let count = S::sum(&counts);
            let occupied: Vec<usize> =
                (0..cells.len()).filter(|&k| counts[k].val() > OCCUPANCY_THRESHOLD).collect();
            let extreme = |c: Channel, take_max: bool| -> S {
                let vals = pick(c);
                let mut it = occupied.iter().map(|&k| vals[k]);
                let Some(first) = it.next() else { return S::cst(0.0) };
                it.fold(first, |a, b| if take_max { a.max(b) } else { a.min(b) })
            };
            let mean = |c: Channel| -> S {
                let vals = pick(c);
                let terms: Vec<S> = (0..cells.len()).map(|k| counts[k] * vals[k]).collect();
                S::sum(&terms) / (count + eps_div)
            };
            let vals = [
                (Channel::Count, count),
                (Channel::Density, S::sum(&pick(Channel::Density))),
                (Channel::Occupancy, count.straight_through(if count.val() > OCCUPANCY_THRESHOLD { 1.0 } else { 0.0 })),
                (Channel::HeightMax, extreme(Channel::HeightMax, true)),
                (Channel::HeightMin, extreme(Channel::HeightMin, false)),
                (Channel::HeightMean, mean(Channel::HeightMean)),
                (Channel::IntensityMax, extreme(Channel::IntensityMax, true)),
                (Channel::IntensityMin, extreme(Channel::IntensityMin, false)),
                (Channel::IntensityMean, mean(Channel::IntensityMean)),
            ];
            for (c, v) in vals {
                out.channel_mut(c)[col] = v;
            }
        }
    }
    out
}

/// Axis-aligned box used for region-of-interest cropping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Aabb {
    pub fn new(lo: [f64; 3], hi: [f64; 3]) -> Result<Self> {
        if (0..3).any(|d| !(lo[d] <= hi[d]) || !lo[d].is_finite() || !hi[d].is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid box {lo:?}..{hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|d| p[d] >= self.lo[d] && p[d] <= self.hi[d])
    }
}

/// Keeps points inside `region` (faces inclusive); selection is fixed,
/// coordinates of survivors pass through unchanged.
pub fn roi_filter<S: Scalar>(pc: &PointCloud<S>, region: &Aabb) -> PointCloud<S> {
    PointCloud { points: pc.points.iter().filter(|p| region.contains(p.xyz.map(|c| c.val()))).copied().collect() }
}

/// ASCII dump: header lines then one block per channel, one row per (i, j)
/// holding the `nz` values along z.
pub fn format_feature_grid(f: &FeatureGrid) -> String {
    let g = &f.grid;
    let mut s = String::from("featuregrid 1\n");
    let _ = writeln!(s, "origin {} {} {}", g.origin[0], g.origin[1], g.origin[2]);
    let _ = writeln!(s, "dims {} {} {}", g.dims[0], g.dims[1], g.dims[2]);
    let _ = writeln!(s, "counts {} {} {}", g.counts[0], g.counts[1], g.counts[2]);
    for c in Channel::ALL {
        let _ = writeln!(s, "channel {}", c.name());
        for row in f.channel(c).chunks(g.counts[2]) {
            let vals: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(s, "{}", vals.join(" "));
        }
    }
    s
}

fn finite(t: &str, ln: usize) -> Result<f64> {
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::parse(ln + 1, format!("bad number `{t}`"))),
    }
}

pub fn parse_feature_grid(text: &str) -> Result<FeatureGrid> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut next = |what: &str| lines.next().ok_or_else(|| Error::parse(0, format!("missing {what}")));
    let (ln, head) = next("header")?;
    if head.trim() != "featuregrid 1" {
        return Err(Error::parse(ln + 1, "expected `featuregrid 1`"));
    }
    let mut triple = |key: &str| -> Result<[f64; 3]> {
        let (ln, l) = next(key)?;
        let mut it = l.split_whitespace();
        if it.next() != Some(key) {
            return Err(Error::parse(ln + 1, format!("expected `{key}`")));
        }
        let v: Vec<f64> = it.map(|t| finite(t, ln)).collect::<Result<_>>()?;
        v.try_into().map_err(|_| Error::parse(ln + 1, format!("`{key}` needs 3 values")))
    };
    let origin = triple("origin")?;
    let dims = triple("dims")?;
    let counts = triple("counts")?;
    if counts.iter().any(|c| c.fract() != 0.0 || *c < 1.0 || *c > (1u64 << 26) as f64) {
        return Err(Error::parse(4, "counts must be positive integers"));
    }
    let grid = CellGrid::new(origin, dims, counts.map(|c| c as usize)).map_err(|e| Error::parse(4, e.to_string()))?;
    let mut out = FeatureGrid::<f64>::zeros(grid);
    for c in Channel::ALL {
        let (ln, l) = next("channel")?;
        if l.split_whitespace().collect::<Vec<_>>() != ["channel", c.name()] {
            return Err(Error::parse(ln + 1, format!("expected `channel {}`", c.name())));
        }
        let dst = out.channel_mut(c);
        for row in dst.chunks_mut(grid.counts[2]) {
            let (ln, l) = next("row")?;
            let vals: Vec<f64> = l.split_whitespace().map(|t| finite(t, ln)).collect::<Result<_>>()?;
            if vals.len() != row.len() {
                return Err(Error::parse(ln + 1, format!("expected {} values, found {}", row.len(), vals.len())));
            }
            row.copy_from_slice(&vals);
        }
    }
    Ok(out)
}

pub fn save_feature_grid(f: &FeatureGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_feature_grid(f)).map_err(|e| Error::io(path, e))
}
