//! Pinhole camera model and point clouds.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::RigidTransform;

/// Points closer than this along the optical axis are treated as out of view.
pub const Z_MIN: f64 = 1e-3;

/// Pinhole intrinsics in pixels plus the image size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidIntrinsics(msg));
        if !(self.fx.is_finite() && self.fx > 0.0) {
            return bad(format!("fx must be positive, got {}", self.fx));
        }
        if !(self.fy.is_finite() && self.fy > 0.0) {
            return bad(format!("fy must be positive, got {}", self.fy));
        }
        if self.width < 1 || self.height < 1 {
            return bad(format!("image size {}x{} is empty", self.width, self.height));
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64) {
            return bad(format!("cx = {} outside (0, {})", self.cx, self.width));
        }
        if !(self.cy > 0.0 && self.cy < self.height as f64) {
            return bad(format!("cy = {} outside (0, {})", self.cy, self.height));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// A projected point: continuous pixel coordinates and metric depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub pixel: Vector2<f64>,
    pub depth: f64,
}

impl Projection {
    /// Integer `(row, col)` of the pixel containing the projection.
    /// Pixel `(i, j)` spans `[j, j+1) × [i, i+1)`.
    #[inline]
    pub fn cell(&self) -> (u32, u32) {
        (self.pixel.y.floor() as u32, self.pixel.x.floor() as u32)
    }
}

/// Perspective projection. Returns `None` for points behind `Z_MIN` or
/// outside `[0, width) × [0, height)`.
#[inline]
pub fn project(p: &Vector3<f64>, k: &CameraIntrinsics) -> Option<Projection> {
    let z = p.z;
    if !(z > Z_MIN) {
        return None;
    }
    let u = k.fx * p.x / z + k.cx;
    let v = k.fy * p.y / z + k.cy;
    if u >= 0.0 && u < k.width as f64 && v >= 0.0 && v < k.height as f64 {
        Some(Projection {
            pixel: Vector2::new(u, v),
            depth: z,
        })
    } else {
        None
    }
}

/// Inverse of [`project`] for a known depth.
pub fn back_project(pixel: &Vector2<f64>, depth: f64, k: &CameraIntrinsics) -> Result<Vector3<f64>> {
    if !(depth > 0.0) {
        return Err(Error::NonPositiveDepth(depth));
    }
    Ok(back_project_unchecked(pixel, depth, k))
}

#[inline]
pub(crate) fn back_project_unchecked(pixel: &Vector2<f64>, depth: f64, k: &CameraIntrinsics) -> Vector3<f64> {
    Vector3::new(
        (pixel.x - k.cx) * depth / k.fx,
        (pixel.y - k.cy) * depth / k.fy,
        depth,
    )
}

/// Rescales intrinsics for an image resized by `(sx, sy)`.
pub fn scale_intrinsics(k: &CameraIntrinsics, sx: f64, sy: f64) -> Result<CameraIntrinsics> {
    if !(sx > 0.0 && sy > 0.0 && sx.is_finite() && sy.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "scale factors must be positive, got ({sx}, {sy})"
        )));
    }
    let width = (k.width as f64 * sx).round().max(1.0) as u32;
    let height = (k.height as f64 * sy).round().max(1.0) as u32;
    CameraIntrinsics::new(k.fx * sx, k.fy * sy, k.cx * sx, k.cy * sy, width, height)
}

/// Unordered set of 3D points in meters with optional per-point intensity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Vector3<f64>>,
    intensity: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self> {
        check_points(&points)?;
        Ok(Self {
            points,
            intensity: None,
        })
    }

    pub fn with_intensity(points: Vec<Vector3<f64>>, intensity: Vec<f64>) -> Result<Self> {
        check_points(&points)?;
        if intensity.len() != points.len() {
            return Err(Error::SizeMismatch(points.len(), intensity.len()));
        }
        Ok(Self {
            points,
            intensity: Some(intensity),
        })
    }

    pub(crate) fn from_parts_unchecked(points: Vec<Vector3<f64>>, intensity: Option<Vec<f64>>) -> Self {
        Self { points, intensity }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn intensity(&self) -> Option<&[f64]> {
        self.intensity.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Vector3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        let sum: Vector3<f64> = self.points.iter().sum();
        Some(sum / self.points.len() as f64)
    }

    /// Keeps the points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            intensity: self
                .intensity
                .as_ref()
                .map(|v| indices.iter().map(|&i| v[i]).collect()),
        }
    }

    /// Pointwise `R·p + t`; order and intensities are preserved.
    pub fn transformed(&self, t: &RigidTransform) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| t.apply(p)).collect(),
            intensity: self.intensity.clone(),
        }
    }
}

fn check_points(points: &[Vector3<f64>]) -> Result<()> {
    match points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
        Some(i) => Err(Error::InvalidArgument(format!("point {i} has non-finite coordinates"))),
        None => Ok(()),
    }
}
