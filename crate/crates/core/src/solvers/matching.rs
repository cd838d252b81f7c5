//! Exact nearest-neighbour correspondences between point maps.
//!
//! Distances are compared as squared norms and ties go to the smallest target
//! pixel index, so every search strategy returns the same answer as a full
//! scan.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{PointMap, Vec3};
use crate::numeric::median;

/// Targets up to this size are scanned exhaustively.
pub const BRUTE_FORCE_LIMIT: usize = 4096;
const MAX_GRID_CELLS: usize = 1 << 22;
const SPACING_SAMPLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub target: usize,
    pub distance: f64,
}

/// One entry per query pixel; `None` at invalid query pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Correspondence {
    pub matches: Vec<Option<Match>>,
}

impl Correspondence {
    pub fn matched_count(&self) -> usize {
        self.matches.iter().flatten().count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchStrategy {
    /// Full scan for small targets, spatial grid otherwise.
    #[default]
    Auto,
    BruteForce,
    Grid,
}

/// For every valid pixel of `query`, the valid pixel of `target` with the
/// nearest 3D point. Both maps must be expressed in the same frame.
pub fn match_points(query: &PointMap, target: &PointMap) -> Result<Correspondence> {
    match_points_with(query, target, SearchStrategy::Auto)
}

pub fn match_points_with(
    query: &PointMap,
    target: &PointMap,
    strategy: SearchStrategy,
) -> Result<Correspondence> {
    let (indices, points): (Vec<usize>, Vec<Vec3>) =
        target.valid_points().map(|(i, p)| (i, *p)).unzip();
    if indices.is_empty() {
        return Err(Error::EmptyTarget);
    }
    let use_grid = match strategy {
        SearchStrategy::Auto => points.len() > BRUTE_FORCE_LIMIT,
        SearchStrategy::BruteForce => false,
        SearchStrategy::Grid => true,
    };
    let index = use_grid.then(|| SpatialGrid::build(&points));
    let matches = query
        .points
        .par_iter()
        .zip(query.valid.par_iter())
        .map(|(q, valid)| {
            if !*valid {
                return None;
            }
            let (slot, d2) = match &index {
                Some(grid) => grid.nearest(q, &points),
                None => scan(q, &points, 0..points.len()),
            };
            Some(Match {
                target: indices[slot],
                distance: d2.sqrt(),
            })
        })
        .collect();
    Ok(Correspondence { matches })
}

#[inline]
fn dist2(a: &Vec3, b: &Vec3) -> f64 {
    let d = a - b;
    d.x * d.x + d.y * d.y + d.z * d.z
}

#[inline]
fn better(d2: f64, slot: usize, best: (usize, f64)) -> bool {
    d2 < best.1 || (d2 == best.1 && slot < best.0)
}

fn scan(q: &Vec3, points: &[Vec3], slots: impl Iterator<Item = usize>) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for s in slots {
        let d2 = dist2(q, &points[s]);
        if better(d2, s, best) {
            best = (s, d2);
        }
    }
    best
}

/// Uniform grid over the target's bounding box in compressed-row layout.
struct SpatialGrid {
    origin: Vec3,
    cell: f64,
    dims: [usize; 3],
    starts: Vec<u32>,
    slots: Vec<u32>,
}

impl SpatialGrid {
    fn build(points: &[Vec3]) -> Self {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let extent = (hi - lo).max();
        let mut cell = spacing_estimate(points).max(extent * 1e-9).max(f64::MIN_POSITIVE);
        let dims_for = |cell: f64| -> [usize; 3] {
            let d = (hi - lo) / cell;
            [0, 1, 2].map(|a| (d[a].floor() as usize).saturating_add(1))
        };
        let mut dims = dims_for(cell);
        while dims.iter().map(|d| *d as u128).product::<u128>() > MAX_GRID_CELLS as u128 {
            cell *= 2.0;
            dims = dims_for(cell);
        }
        let mut grid = SpatialGrid {
            origin: lo,
            cell,
            dims,
            starts: Vec::new(),
            slots: Vec::new(),
        };
        let n_cells = dims[0] * dims[1] * dims[2];
        let keys: Vec<usize> = points.iter().map(|p| grid.flat(grid.clamped_cell(p))).collect();
        let mut counts = vec![0u32; n_cells + 1];
        for k in &keys {
            counts[k + 1] += 1;
        }
        for c in 1..=n_cells {
            counts[c] += counts[c - 1];
        }
        let mut fill = counts.clone();
        let mut slots = vec![0u32; points.len()];
        for (s, k) in keys.iter().enumerate() {
            slots[fill[*k] as usize] = s as u32;
            fill[*k] += 1;
        }
        grid.starts = counts;
        grid.slots = slots;
        grid
    }

    /// Signed cell coordinates of `p`, unclamped.
    fn cell_of(&self, p: &Vec3) -> [i64; 3] {
        let d = (p - self.origin) / self.cell;
        [0, 1, 2].map(|a| d[a].floor().clamp(-1e15, 1e15) as i64)
    }

    fn clamped_cell(&self, p: &Vec3) -> [usize; 3] {
        let c = self.cell_of(p);
        [0, 1, 2].map(|a| c[a].clamp(0, self.dims[a] as i64 - 1) as usize)
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        (c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]
    }

    fn nearest(&self, q: &Vec3, points: &[Vec3]) -> (usize, f64) {
        let center = self.cell_of(q);
        let mut best = (usize::MAX, f64::INFINITY);
        // Shells of Chebyshev radius r around the query cell. After shell r,
        // anything unvisited is at least r cells away along some axis.
        let max_r = (0..3)
            .map(|a| {
                let lo = center[a];
                let hi = self.dims[a] as i64 - 1 - center[a];
                lo.abs().max(hi.abs())
            })
            .max()
            .unwrap_or(0);
        let margin = 1.0 - 1e-6;
        for r in 0..=max_r {
            self.visit_shell(center, r, |slots| {
                for &s in slots {
                    let s = s as usize;
                    let d2 = dist2(q, &points[s]);
                    if better(d2, s, best) {
                        best = (s, d2);
                    }
                }
            });
            let reach = r as f64 * self.cell * margin;
            if best.0 != usize::MAX && best.1 < reach * reach {
                break;
            }
        }
        best
    }

    fn visit_shell(&self, c: [i64; 3], r: i64, mut f: impl FnMut(&[u32])) {
        let range = |a: usize| {
            let lo = (c[a] - r).max(0);
            let hi = (c[a] + r).min(self.dims[a] as i64 - 1);
            lo..=hi
        };
        for z in range(2) {
            let dz = (z - c[2]).abs();
            for y in range(1) {
                let dy = (y - c[1]).abs();
                let on_face = dz == r || dy == r;
                for x in range(0) {
                    if !on_face && (x - c[0]).abs() != r {
                        continue;
                    }
                    let k = self.flat([x as usize, y as usize, z as usize]);
                    let (a, b) = (self.starts[k] as usize, self.starts[k + 1] as usize);
                    if a < b {
                        f(&self.slots[a..b]);
                    }
                }
            }
        }
    }
}

/// Median nearest-neighbour distance over an evenly strided sample.
fn spacing_estimate(points: &[Vec3]) -> f64 {
    let stride = (points.len() / SPACING_SAMPLES).max(1);
    let nn: Vec<f64> = (0..points.len())
        .step_by(stride)
        .map(|i| {
            points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, p)| dist2(&points[i], p))
                .filter(|d| *d > 0.0)
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .filter(|d| d.is_finite())
        .collect();
    median(&nn).unwrap_or(1.0)
}
