use std::collections::HashMap;

use super::cloud::{dist2, Point3};
use crate::error::{invalid, Error, Result};

/// Hash grid over reference points with cell edge equal to the query radius,
/// so every in-radius point sits in one of the 27 cells around a center.
pub struct VoxelGrid<'a> {
    points: &'a [Point3],
    cell: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl<'a> VoxelGrid<'a> {
    pub fn new(points: &'a [Point3], radius: f64) -> Self {
        // Slightly enlarged so rounding in the cell coordinate never skips a ring.
        let cell = radius * (1.0 + 1e-9);
        let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(cell, p)).or_default().push(i);
        }
        Self {
            points,
            cell,
            cells,
        }
    }

    fn key(cell: f64, p: &Point3) -> [i64; 3] {
        [
            (p[0] / cell).floor() as i64,
            (p[1] / cell).floor() as i64,
            (p[2] / cell).floor() as i64,
        ]
    }

    /// All points with squared distance `<= radius2`, as `(d2, index)` sorted ascending.
    pub fn within(&self, center: &Point3, radius2: f64) -> Vec<(f64, usize)> {
        let [kx, ky, kz] = Self::key(self.cell, center);
        let mut found = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(members) = self.cells.get(&[kx + dx, ky + dy, kz + dz]) {
                        for &i in members {
                            let d2 = dist2(center, &self.points[i]);
                            if d2 <= radius2 {
                                found.push((d2, i));
                            }
                        }
                    }
                }
            }
        }
        found.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        found
    }
}

/// `m × samples` table of reference indices plus a per-center fallback flag.
#[derive(Debug, Clone, PartialEq)]
pub struct BallQueryResult {
    pub samples: usize,
    pub indices: Vec<usize>,
    pub fallback: Vec<bool>,
}

impl BallQueryResult {
    pub fn num_centers(&self) -> usize {
        self.fallback.len()
    }

    pub fn row(&self, center: usize) -> &[usize] {
        &self.indices[center * self.samples..(center + 1) * self.samples]
    }
}

pub(crate) fn check_ball_params(radius: f64, samples: usize) -> Result<()> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid("radius", format!("must be positive, got {radius}")));
    }
    if samples == 0 {
        return Err(invalid("samples", "must be at least 1"));
    }
    Ok(())
}

/// Gathers up to `samples` references within `radius` of each center, nearest
/// first. Short rows repeat the nearest in-radius hit; empty balls fall back to
/// the globally nearest reference and set the flag.
pub fn ball_query(
    centers: &[Point3],
    refs: &[Point3],
    radius: f64,
    samples: usize,
) -> Result<BallQueryResult> {
    check_ball_params(radius, samples)?;
    if refs.is_empty() {
        return Err(Error::NoReferencePoints);
    }
    let grid = VoxelGrid::new(refs, radius);
    let r2 = radius * radius;
    let mut indices = Vec::with_capacity(centers.len() * samples);
    let mut fallback = Vec::with_capacity(centers.len());
    for c in centers {
        let hits = grid.within(c, r2);
        if hits.is_empty() {
            let nearest = global_nearest(c, refs);
            indices.extend(std::iter::repeat_n(nearest, samples));
            fallback.push(true);
        } else {
            let take = hits.len().min(samples);
            indices.extend(hits[..take].iter().map(|h| h.1));
            indices.extend(std::iter::repeat_n(hits[0].1, samples - take));
            fallback.push(false);
        }
    }
    Ok(BallQueryResult {
        samples,
        indices,
        fallback,
    })
}

fn global_nearest(c: &Point3, refs: &[Point3]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, r) in refs.iter().enumerate() {
        let d = dist2(c, r);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}
