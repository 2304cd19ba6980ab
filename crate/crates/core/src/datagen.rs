//! Synthetic decalibration: random extrinsic perturbations, mis-calibrated /
//! target depth-map pairs, and procedurally generated scenes.
//!
//! Random draws use ChaCha8 seeded with the dataset seed and switched to the
//! stream of the sample index, so any sample can be regenerated on its own.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, PointCloud};
use crate::depthmap::SparseDepthMap;
use crate::error::{Error, Result};
use crate::lie::{inverse, to_transform, RigidTransform, Se3Params};
use crate::transformer::{scatter, scatter_records, write_records};

/// Camera height above the ground plane in the synthetic scenes (y points down).
pub const GROUND_HEIGHT: f64 = 1.65;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecalibrationSpec {
    /// Half-width of the per-axis rotation range, radians.
    pub rot_range: f64,
    /// Half-width of the per-axis translation range, meters.
    pub trans_range: f64,
    pub seed: u64,
    pub count: usize,
}

impl Default for DecalibrationSpec {
    fn default() -> Self {
        Self {
            rot_range: 10f64.to_radians(),
            trans_range: 0.2,
            seed: 0,
            count: 1,
        }
    }
}

impl DecalibrationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rot_range >= 0.0 && self.rot_range.is_finite() && self.trans_range >= 0.0 && self.trans_range.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "decalibration ranges must be finite and nonnegative (rot {}, trans {})",
                self.rot_range, self.trans_range
            )));
        }
        if self.count < 1 {
            return Err(Error::InvalidArgument("sample count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Generator for the stream belonging to `(seed, index)`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws `(vx, vy, vz, ωx, ωy, ωz)` independently and uniformly from their ranges.
pub fn sample_decalibration(spec: &DecalibrationSpec, index: u64) -> Result<Se3Params> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, index);
    let mut draw = |half: f64| {
        let u: f64 = rng.random();
        half * (2.0 * u - 1.0)
    };
    let v = Vector3::new(draw(spec.trans_range), draw(spec.trans_range), draw(spec.trans_range));
    let w = Vector3::new(draw(spec.rot_range), draw(spec.rot_range), draw(spec.rot_range));
    Se3Params::new(v, w)
}

/// A mis-calibrated input together with its target and the correcting transform.
#[derive(Debug, Clone)]
pub struct CalibrationSample {
    pub id: usize,
    pub xi: Se3Params,
    /// The decalibrated cloud, i.e. the LiDAR frame as the solver sees it.
    pub source_cloud: PointCloud,
    pub miscalib_map: SparseDepthMap,
    pub target_map: SparseDepthMap,
    /// `T_random⁻¹`: maps the decalibrated cloud back into the camera frame.
    pub ground_truth: RigidTransform,
    /// `ground_truth` applied to `source_cloud`, index-aligned with it.
    pub corresponded_target: PointCloud,
    pub k: CameraIntrinsics,
}

/// Decalibrates `cloud` by `to_transform(xi)` and builds the target map by
/// correcting the points visible in the mis-calibrated map with the inverse
/// transform, so both maps are drawn from the same field of view.
pub fn make_sample(cloud: &PointCloud, k: &CameraIntrinsics, xi: &Se3Params) -> Result<CalibrationSample> {
    sample_from_source(cloud.transformed(&to_transform(xi)), k, xi)
}

/// As [`make_sample`], for a scan that is already decalibrated by `xi`.
pub fn sample_from_source(source: PointCloud, k: &CameraIntrinsics, xi: &Se3Params) -> Result<CalibrationSample> {
    let decal = to_transform(xi);
    let records = scatter_records(&source, k);
    if records.is_empty() {
        return Err(Error::NoPointsInView);
    }
    let miscalib_map = write_records(&records, k);

    let ground_truth = inverse(&decal);
    let visible: Vec<usize> = records.iter().map(|r| r.source).collect();
    let target_map = scatter(&source.select(&visible).transformed(&ground_truth), k);
    if target_map.valid_count() == 0 {
        return Err(Error::NoPointsInView);
    }
    Ok(CalibrationSample {
        id: 0,
        xi: *xi,
        corresponded_target: source.transformed(&ground_truth),
        source_cloud: source,
        miscalib_map,
        target_map,
        ground_truth,
        k: *k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    GroundPlaneBoxes,
    Corridor,
    RandomClutter,
}

impl std::str::FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ground_plane_boxes" | "boxes" => Ok(SceneKind::GroundPlaneBoxes),
            "corridor" => Ok(SceneKind::Corridor),
            "random_clutter" | "clutter" => Ok(SceneKind::RandomClutter),
            other => Err(Error::InvalidArgument(format!("unknown scene kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceLabel {
    Ground,
    Box(usize),
    Wall,
    Clutter,
}

/// Camera used by the synthetic pipeline: 640×256, 360 px focal length.
pub fn default_camera() -> CameraIntrinsics {
    CameraIntrinsics {
        fx: 360.0,
        fy: 360.0,
        cx: 320.0,
        cy: 128.0,
        width: 640,
        height: 256,
    }
}

pub fn synth_scene(kind: SceneKind, density: usize, seed: u64) -> Result<PointCloud> {
    Ok(synth_scene_labeled(kind, density, seed)?.0)
}

/// Deterministic scene in the camera frame (x right, y down, z forward),
/// with one label per point.
pub fn synth_scene_labeled(kind: SceneKind, density: usize, seed: u64) -> Result<(PointCloud, Vec<SurfaceLabel>)> {
    if density < 100 {
        return Err(Error::InvalidArgument(format!("scene density must be at least 100, got {density}")));
    }
    let mut rng = stream_rng(seed, u64::MAX);
    let mut pts = Vec::with_capacity(density);
    let mut labels = Vec::with_capacity(density);
    match kind {
        SceneKind::GroundPlaneBoxes => ground_plane_boxes(&mut rng, density, &mut pts, &mut labels),
        SceneKind::Corridor => corridor(&mut rng, density, &mut pts, &mut labels),
        SceneKind::RandomClutter => {
            for _ in 0..density {
                pts.push(Vector3::new(
                    rng.random_range(-12.0..12.0),
                    rng.random_range(-3.0..GROUND_HEIGHT),
                    rng.random_range(3.0..40.0),
                ));
                labels.push(SurfaceLabel::Clutter);
            }
        }
    }
    debug_assert_eq!(pts.len(), density);
    Ok((PointCloud::from_parts_unchecked(pts, None), labels))
}

struct SceneBox {
    min: Vector3<f64>,
    max: Vector3<f64>,
}

impl SceneBox {
    fn faces(&self) -> [(f64, usize); 3] {
        let d = self.max - self.min;
        // area of the face orthogonal to each axis
        [(d.y * d.z, 0), (d.x * d.z, 1), (d.x * d.y, 2)]
    }

    fn area(&self) -> f64 {
        2.0 * self.faces().iter().map(|f| f.0).sum::<f64>()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vector3<f64> {
        let faces = self.faces();
        let total: f64 = faces.iter().map(|f| f.0).sum();
        let mut pick = rng.random::<f64>() * total;
        let mut axis = 2;
        for (area, a) in faces {
            if pick < area {
                axis = a;
                break;
            }
            pick -= area;
        }
        let mut p = Vector3::from_fn(|i, _| rng.random_range(self.min[i]..self.max[i]));
        p[axis] = if rng.random::<bool>() { self.min[axis] } else { self.max[axis] };
        p
    }
}

fn ground_plane_boxes(rng: &mut ChaCha8Rng, density: usize, pts: &mut Vec<Vector3<f64>>, labels: &mut Vec<SurfaceLabel>) {
    // Boxes spread over depth bands from 3 m to 40 m, standing on the ground.
    let bands = [(3.0, 6.0), (5.0, 9.0), (7.0, 12.0), (10.0, 16.0), (13.0, 20.0), (17.0, 25.0), (22.0, 31.0), (28.0, 40.0)];
    let mut boxes = Vec::new();
    for &(z_lo, z_hi) in &bands {
        for _ in 0..2 {
            let z: f64 = rng.random_range(z_lo..z_hi);
            let x: f64 = rng.random_range(-0.7..0.7) * z;
            let w: f64 = rng.random_range(0.8..2.5);
            let h: f64 = rng.random_range(1.0..3.5);
            let d: f64 = rng.random_range(0.8..2.5);
            boxes.push(SceneBox {
                min: Vector3::new(x - w / 2.0, GROUND_HEIGHT - h, z),
                max: Vector3::new(x + w / 2.0, GROUND_HEIGHT, z + d),
            });
        }
    }
    let ground_count = density * 2 / 5;
    for _ in 0..ground_count {
        let z: f64 = rng.random_range(3.0..45.0);
        let x: f64 = rng.random_range(-0.9..0.9) * (z + 2.0);
        pts.push(Vector3::new(x, GROUND_HEIGHT, z));
        labels.push(SurfaceLabel::Ground);
    }
    // Allocate the rest by box area, assigning rounding leftovers to the first boxes.
    let remaining = density - ground_count;
    let total_area: f64 = boxes.iter().map(SceneBox::area).sum();
    let mut counts: Vec<usize> = boxes
        .iter()
        .map(|b| (remaining as f64 * b.area() / total_area).floor() as usize)
        .collect();
    let left = remaining - counts.iter().sum::<usize>();
    let n_boxes = counts.len();
    for i in 0..left {
        counts[i % n_boxes] += 1;
    }
    for (i, (b, &count)) in boxes.iter().zip(&counts).enumerate() {
        for _ in 0..count {
            pts.push(b.sample(rng));
            labels.push(SurfaceLabel::Box(i));
        }
    }
}

fn corridor(rng: &mut ChaCha8Rng, density: usize, pts: &mut Vec<Vector3<f64>>, labels: &mut Vec<SurfaceLabel>) {
    let (half_width, ceiling) = (2.5, -1.5);
    let floor_count = density / 4;
    for i in 0..density {
        let z: f64 = rng.random_range(2.0..40.0);
        let p = if i < floor_count {
            labels.push(SurfaceLabel::Ground);
            Vector3::new(rng.random_range(-half_width..half_width), GROUND_HEIGHT, z)
        } else {
            labels.push(SurfaceLabel::Wall);
            match i % 3 {
                0 => Vector3::new(-half_width, rng.random_range(ceiling..GROUND_HEIGHT), z),
                1 => Vector3::new(half_width, rng.random_range(ceiling..GROUND_HEIGHT), z),
                _ => Vector3::new(rng.random_range(-half_width..half_width), ceiling, z),
            }
        };
        pts.push(p);
    }
}
