//! Depth-map spatial transformer: lift a sparse depth map to a point cloud,
//! move it rigidly, and splat it back into a depth map.
//!
//! Splatting is a forward scatter with a z-buffer: when several points land
//! in one pixel the nearest survives. Pixels are keyed by the Cantor pairing
//! of `(row, col)` so duplicate writes collapse to one record before the map
//! is written.

use nalgebra::Vector2;

use crate::camera::{back_project_unchecked, project, CameraIntrinsics, PointCloud};
use crate::depthmap::{SparseDepthMap, NO_DATA};
use crate::error::Result;
use crate::lie::RigidTransform;

/// One surviving write of the scatter step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterRecord {
    /// Index of the point in the scattered cloud.
    pub source: usize,
    pub row: u32,
    pub col: u32,
    pub depth: f64,
    /// True when other points landed in the same pixel and were discarded.
    pub collision: bool,
}

/// Cantor pairing of two naturals; a bijection ℕ² → ℕ.
#[inline]
pub fn cantor_pair(a: u64, b: u64) -> u64 {
    (a + b) * (a + b + 1) / 2 + b
}

/// One point per valid pixel, back-projected from the pixel center, in
/// row-major order.
pub fn lift(m: &SparseDepthMap, k: &CameraIntrinsics) -> Result<PointCloud> {
    m.matches_camera(k)?;
    let points = m
        .valid_pixels()
        .map(|(r, c, d)| back_project_unchecked(&pixel_center(r, c), d, k))
        .collect();
    Ok(PointCloud::from_parts_unchecked(points, None))
}

#[inline]
pub fn pixel_center(row: u32, col: u32) -> Vector2<f64> {
    Vector2::new(col as f64 + 0.5, row as f64 + 0.5)
}

pub fn transform_cloud(c: &PointCloud, t: &RigidTransform) -> PointCloud {
    c.transformed(t)
}

/// Projects every point and keeps the nearest one per pixel. Records come out
/// sorted by pixel key; the result does not depend on input order.
pub fn scatter_records(c: &PointCloud, k: &CameraIntrinsics) -> Vec<ScatterRecord> {
    let mut hits: Vec<(u64, f64, usize, u32, u32)> = c
        .points()
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let proj = project(p, k)?;
            let (row, col) = proj.cell();
            Some((cantor_pair(row as u64, col as u64), proj.depth, i, row, col))
        })
        .collect();
    // Key, then depth, then index: the first entry per key is the z-buffer winner.
    hits.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut out: Vec<ScatterRecord> = Vec::with_capacity(hits.len());
    let mut last_key = None;
    for (key, depth, source, row, col) in hits {
        if last_key == Some(key) {
            if let Some(rec) = out.last_mut() {
                rec.collision = true;
            }
            continue;
        }
        last_key = Some(key);
        out.push(ScatterRecord {
            source,
            row,
            col,
            depth,
            collision: false,
        });
    }
    out
}

/// Rasterizes a cloud into a depth map with the z-buffer rule.
pub fn scatter(c: &PointCloud, k: &CameraIntrinsics) -> SparseDepthMap {
    write_records(&scatter_records(c, k), k)
}

pub(crate) fn write_records(records: &[ScatterRecord], k: &CameraIntrinsics) -> SparseDepthMap {
    let mut m = SparseDepthMap::for_camera(k);
    let w = k.width as usize;
    let values = m.values_mut();
    for r in records {
        values[r.row as usize * w + r.col as usize] = r.depth;
    }
    m
}

/// `scatter(transform_cloud(lift(m, K), T), K)`.
pub fn resample_depth_map(m: &SparseDepthMap, t: &RigidTransform, k: &CameraIntrinsics) -> Result<SparseDepthMap> {
    let cloud = lift(m, k)?;
    Ok(scatter(&transform_cloud(&cloud, t), k))
}

/// Bilinear interpolation between pixel centers using only valid neighbors;
/// the weights of the valid subset are renormalized to sum to one. Returns
/// `NO_DATA` outside the image or when no valid neighbor carries weight.
pub fn sparse_bilinear_sample(m: &SparseDepthMap, at: &Vector2<f64>) -> f64 {
    let (w, h) = (m.width() as f64, m.height() as f64);
    if !(at.x >= 0.0 && at.x < w && at.y >= 0.0 && at.y < h) {
        return NO_DATA;
    }
    let gx = at.x - 0.5;
    let gy = at.y - 0.5;
    let x0 = gx.floor();
    let y0 = gy.floor();
    let tx = gx - x0;
    let ty = gy - y0;

    let mut acc = 0.0;
    let mut weight = 0.0;
    for (dy, wy) in [(0.0, 1.0 - ty), (1.0, ty)] {
        let y = y0 + dy;
        if wy == 0.0 || y < 0.0 || y >= h {
            continue;
        }
        for (dx, wx) in [(0.0, 1.0 - tx), (1.0, tx)] {
            let x = x0 + dx;
            if wx == 0.0 || x < 0.0 || x >= w {
                continue;
            }
            let d = m.get(y as u32, x as u32);
            if d != NO_DATA {
                acc += wx * wy * d;
                weight += wx * wy;
            }
        }
    }
    if weight > 0.0 {
        acc / weight
    } else {
        NO_DATA
    }
}
