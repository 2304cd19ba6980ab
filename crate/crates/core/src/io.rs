//! File formats: KITTI-style LiDAR scans, rig configs, transform and journal
//! documents, millimeter depth PNGs and dataset manifests.
//!
//! Every structured document is TOML and carries a `schema_version`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma};
use log::warn;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, PointCloud};
use crate::datagen::SceneKind;
use crate::depthmap::SparseDepthMap;
use crate::error::{Error, Result};
use crate::lie::{RigidTransform, RotationMatrix, Se3Params, ROTATION_TOLERANCE};
use crate::solver::SolverReport;

pub const RIG_SCHEMA_VERSION: u32 = 1;
pub const TRANSFORM_SCHEMA_VERSION: u32 = 1;
pub const JOURNAL_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Bytes per LiDAR record: four little-endian f32 (x, y, z, reflectance).
pub const LIDAR_RECORD_BYTES: usize = 16;

/// Tolerance of the orthonormality check on configured extrinsics.
pub const CONFIG_ROTATION_TOLERANCE: f64 = 1e-3;

/// Largest depth a 16-bit millimeter PNG can hold, meters.
pub const MAX_PNG_DEPTH: f64 = u16::MAX as f64 / 1000.0;

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// LiDAR scans

/// One scan in the sensor frame.
#[derive(Debug, Clone)]
pub struct LidarFrame {
    /// Finite records only; reflectance is carried as intensity.
    pub points: PointCloud,
    pub path: PathBuf,
    /// Records dropped because a coordinate or the reflectance was not finite.
    pub rejected: usize,
}

impl LidarFrame {
    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    /// Total records in the file, accepted or not.
    pub fn record_count(&self) -> usize {
        self.points.len() + self.rejected
    }
}

pub fn read_lidar_bin(path: impl AsRef<Path>) -> Result<LidarFrame> {
    let path = path.as_ref();
    parse_lidar_bin(&read_bytes(path)?, path)
}

pub fn parse_lidar_bin(bytes: &[u8], path: impl Into<PathBuf>) -> Result<LidarFrame> {
    let path = path.into();
    if !bytes.len().is_multiple_of(LIDAR_RECORD_BYTES) {
        return Err(Error::parse(
            path,
            format!(
                "size {} bytes is not a multiple of the {LIDAR_RECORD_BYTES}-byte record",
                bytes.len()
            ),
        ));
    }
    let n = bytes.len() / LIDAR_RECORD_BYTES;
    let mut points = Vec::with_capacity(n);
    let mut intensity = Vec::with_capacity(n);
    let mut rejected = 0;
    for record in bytes.chunks_exact(LIDAR_RECORD_BYTES) {
        let f: Vec<f64> = record
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        if f.iter().all(|v| v.is_finite()) {
            points.push(Vector3::new(f[0], f[1], f[2]));
            intensity.push(f[3]);
        } else {
            rejected += 1;
        }
    }
    if rejected > 0 {
        warn!("{}: rejected {rejected} of {n} records with non-finite values", path.display());
    }
    Ok(LidarFrame {
        points: PointCloud::with_intensity(points, intensity)?,
        path,
        rejected,
    })
}

/// Writes `cloud` as f32 records; missing intensity is written as 0.
pub fn encode_lidar_bin(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * LIDAR_RECORD_BYTES);
    for (i, p) in cloud.points().iter().enumerate() {
        let r = cloud.intensity().map_or(0.0, |v| v[i]);
        for c in [p.x, p.y, p.z, r] {
            out.extend_from_slice(&(c as f32).to_le_bytes());
        }
    }
    out
}

pub fn write_lidar_bin(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_lidar_bin(cloud)).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Rig config

/// Camera intrinsics plus an optional reference LiDAR→camera extrinsic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigConfig {
    pub k: CameraIntrinsics,
    pub extrinsic: Option<RigidTransform>,
}

impl RigConfig {
    pub fn image_size(&self) -> (u32, u32) {
        (self.k.width, self.k.height)
    }
}

const RIG_KEYS: [&str; 8] = ["schema_version", "fx", "fy", "cx", "cy", "width", "height", "extrinsic"];

/// 1-based line of the first `key = ...` assignment in `text`.
fn key_line(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        l.trim_start()
            .strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

fn at_key(text: &str, key: &str, message: String) -> String {
    match key_line(text, key) {
        Some(line) => format!("line {line}: {message}"),
        None => message,
    }
}

pub fn read_rig_config(path: impl AsRef<Path>) -> Result<RigConfig> {
    let path = path.as_ref();
    let (cfg, warnings) = parse_rig_config(&read_text(path)?, path)?;
    for w in warnings {
        warn!("{}: {w}", path.display());
    }
    Ok(cfg)
}

/// Parses a rig config, returning it with any warnings about ignored keys.
///
/// ```toml
/// schema_version = 1
/// fx = 721.5
/// fy = 721.5
/// cx = 609.6
/// cy = 172.9
/// width = 1242
/// height = 375
/// # optional, LiDAR→camera [R | t] row-major, p_cam = R·p_lidar + t
/// extrinsic = [r00, r01, r02, t0, r10, r11, r12, t1, r20, r21, r22, t2]
/// ```
pub fn parse_rig_config(text: &str, path: impl Into<PathBuf>) -> Result<(RigConfig, Vec<String>)> {
    let path = path.into();
    let fail = |key: &str, msg: String| Error::parse(path.clone(), at_key(text, key, msg));
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::parse(path.clone(), e.to_string()))?;

    let mut warnings = Vec::new();
    for key in table.keys() {
        if !RIG_KEYS.contains(&key.as_str()) {
            warnings.push(at_key(text, key, format!("unknown key `{key}` ignored")));
        }
    }

    let number = |key: &str| -> Result<f64> {
        match table.get(key) {
            None => Err(Error::parse(path.clone(), format!("missing required key `{key}`"))),
            Some(toml::Value::Float(f)) => Ok(*f),
            Some(toml::Value::Integer(i)) => Ok(*i as f64),
            Some(v) => Err(fail(key, format!("`{key}` must be a number, found {}", v.type_str()))),
        }
    };
    let size = |key: &str| -> Result<u32> {
        match table.get(key) {
            None => Err(Error::parse(path.clone(), format!("missing required key `{key}`"))),
            Some(toml::Value::Integer(i)) if *i > 0 && *i <= u32::MAX as i64 => Ok(*i as u32),
            Some(v) => Err(fail(key, format!("`{key}` must be a positive integer, found {v}"))),
        }
    };

    let version = size("schema_version")?;
    if version != RIG_SCHEMA_VERSION {
        return Err(fail("schema_version", format!("unsupported schema_version {version}")));
    }
    let (fx, fy, cx, cy) = (number("fx")?, number("fy")?, number("cx")?, number("cy")?);
    let (width, height) = (size("width")?, size("height")?);
    let k = CameraIntrinsics::new(fx, fy, cx, cy, width, height).map_err(|e| {
        let key = if !(fx > 0.0) { "fx" } else if !(fy > 0.0) { "fy" } else { "cx" };
        fail(key, e.to_string())
    })?;

    let extrinsic = match table.get("extrinsic") {
        None => None,
        Some(v) => {
            let values = v
                .as_array()
                .filter(|a| a.len() == 12)
                .and_then(|a| {
                    a.iter()
                        .map(|x| x.as_float().or_else(|| x.as_integer().map(|i| i as f64)))
                        .collect::<Option<Vec<f64>>>()
                })
                .ok_or_else(|| fail("extrinsic", "`extrinsic` must be an array of 12 numbers (3×4 row-major)".into()))?;
            Some(extrinsic_from_rows(&values).map_err(|e| fail("extrinsic", e))?)
        }
    };
    Ok((RigConfig { k, extrinsic }, warnings))
}

fn extrinsic_from_rows(v: &[f64]) -> std::result::Result<RigidTransform, String> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err("extrinsic has non-finite entries".into());
    }
    let r = Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
    let t = Vector3::new(v[3], v[7], v[11]);
    let residual = (r.transpose() * r - Matrix3::identity()).norm();
    if residual > CONFIG_ROTATION_TOLERANCE {
        return Err(format!(
            "extrinsic rotation fails the orthonormality check: ‖RᵀR − I‖ = {residual:.3e} > {CONFIG_ROTATION_TOLERANCE:e}"
        ));
    }
    let rotation = RotationMatrix::from_approximate(r, CONFIG_ROTATION_TOLERANCE).map_err(|e| e.to_string())?;
    RigidTransform::new(rotation, t).map_err(|e| e.to_string())
}

#[rustfmt::skip]
fn rows(t: &RigidTransform) -> [f64; 12] {
    let r = t.rotation.matrix();
    let t = t.translation;
    [
        r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
        r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
        r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
    ]
}

pub fn rig_config_to_toml(cfg: &RigConfig) -> String {
    let k = &cfg.k;
    let mut s = format!(
        "schema_version = {RIG_SCHEMA_VERSION}\nfx = {:?}\nfy = {:?}\ncx = {:?}\ncy = {:?}\nwidth = {}\nheight = {}\n",
        k.fx, k.fy, k.cx, k.cy, k.width, k.height
    );
    if let Some(e) = &cfg.extrinsic {
        s.push_str("# LiDAR→camera [R | t], row-major: p_cam = R·p_lidar + t\n");
        let _ = writeln!(s, "extrinsic = {}", float_array(&rows(e)));
    }
    s
}

pub fn write_rig_config(path: impl AsRef<Path>, cfg: &RigConfig) -> Result<()> {
    write_text(path.as_ref(), &rig_config_to_toml(cfg))
}

fn float_array(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
    format!("[{}]", items.join(", "))
}

/// Builds a rig config from a KITTI `calib_cam_to_cam`/`calib.txt`-style
/// document (`KEY: v0 v1 ...` lines).
///
/// Intrinsics come from the rectified projection `P2` (or `P_rect_02`). The
/// extrinsic maps LiDAR points into the rectified left-color camera frame:
/// `R0_rect · Tr_velo_to_cam`, followed by the `P2` baseline offset
/// `(P2[0,3]/fx, P2[1,3]/fy, P2[2,3])`, so that `P2 · [p; 1] = K · (R·p + t)`.
pub fn convert_kitti_calib(text: &str, width: u32, height: u32) -> Result<RigConfig> {
    let src = PathBuf::from("<kitti calib>");
    let mut entries = std::collections::HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let Some((key, rest)) = line.split_once(':') else { continue };
        let values: std::result::Result<Vec<f64>, _> = rest.split_whitespace().map(str::parse::<f64>).collect();
        match values {
            Ok(v) => {
                entries.insert(key.trim().to_string(), v);
            }
            Err(_) => warn!("kitti calib line {}: skipping non-numeric entry `{}`", i + 1, key.trim()),
        }
    }
    let get = |names: &[&str], len: usize| -> Result<Vec<f64>> {
        names
            .iter()
            .find_map(|n| entries.get(*n))
            .filter(|v| v.len() == len)
            .cloned()
            .ok_or_else(|| Error::parse(src.clone(), format!("missing {}-value entry `{}`", len, names[0])))
    };
    let p2 = get(&["P2", "P_rect_02"], 12)?;
    let r0 = get(&["R0_rect", "R_rect_00", "R_rect"], 9)?;
    let tr = get(&["Tr_velo_to_cam", "Tr_velo_cam"], 12)?;

    let (fx, fy, cx, cy) = (p2[0], p2[5], p2[2], p2[6]);
    let k = CameraIntrinsics::new(fx, fy, cx, cy, width, height)?;
    let r0 = Matrix3::from_row_slice(&r0);
    let r_tr = Matrix3::new(tr[0], tr[1], tr[2], tr[4], tr[5], tr[6], tr[8], tr[9], tr[10]);
    let t_tr = Vector3::new(tr[3], tr[7], tr[11]);
    let baseline = Vector3::new((p2[3] - cx * p2[11]) / fx, (p2[7] - cy * p2[11]) / fy, p2[11]);
    let r = r0 * r_tr;
    let t = r0 * t_tr + baseline;
    let rotation = RotationMatrix::from_approximate(r, CONFIG_ROTATION_TOLERANCE)
        .map_err(|e| Error::parse(src.clone(), format!("R0_rect·Tr_velo_to_cam: {e}")))?;
    Ok(RigConfig {
        k,
        extrinsic: Some(RigidTransform::new(rotation, t)?),
    })
}

// ---------------------------------------------------------------------------
// Transform documents

#[derive(Debug, Serialize, Deserialize)]
struct TransformDoc {
    schema_version: u32,
    convention: String,
    /// `[R | t]` row by row.
    matrix: [[f64; 4]; 3],
    xi_translation_m: [f64; 3],
    xi_rotation_deg: [f64; 3],
}

const TRANSFORM_CONVENTION: &str = "lidar_to_camera";

const TRANSFORM_HEADER: &str = "\
# LiDAR→camera extrinsic.
# `matrix` is [R | t] row by row; points map as p_cam = R·p_lidar + t (meters).
# `xi_*` is the same transform as a twist (v, ω) with T = (exp(ω), v):
# translation in meters, rotation vector in degrees. `matrix` is authoritative.
";

pub fn transform_to_toml(t: &RigidTransform) -> String {
    let m = rows(t);
    let xi = t.to_params();
    let doc = TransformDoc {
        schema_version: TRANSFORM_SCHEMA_VERSION,
        convention: TRANSFORM_CONVENTION.into(),
        matrix: [
            [m[0], m[1], m[2], m[3]],
            [m[4], m[5], m[6], m[7]],
            [m[8], m[9], m[10], m[11]],
        ],
        xi_translation_m: xi.v.into(),
        xi_rotation_deg: xi.omega.vector().map(f64::to_degrees).into(),
    };
    let body = toml::to_string(&doc).expect("transform is always representable as TOML");
    format!("{TRANSFORM_HEADER}{body}")
}

pub fn transform_from_toml(text: &str, path: impl Into<PathBuf>) -> Result<RigidTransform> {
    let path = path.into();
    let doc: TransformDoc = toml::from_str(text).map_err(|e| Error::parse(path.clone(), e.to_string()))?;
    if doc.schema_version != TRANSFORM_SCHEMA_VERSION {
        return Err(Error::parse(path, format!("unsupported schema_version {}", doc.schema_version)));
    }
    if doc.convention != TRANSFORM_CONVENTION {
        return Err(Error::parse(path, format!("unsupported convention `{}`", doc.convention)));
    }
    let flat: Vec<f64> = doc.matrix.iter().flatten().copied().collect();
    let m = &flat;
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::parse(path, "matrix has non-finite entries"));
    }
    let r = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
    // Stored matrices are written from valid rotations; accept them verbatim
    // when they pass the tight check so the round trip is exact.
    let rotation = RotationMatrix::new(r)
        .or_else(|_| RotationMatrix::from_approximate(r, CONFIG_ROTATION_TOLERANCE))
        .map_err(|e| Error::parse(path.clone(), e.to_string()))?;
    const { assert!(ROTATION_TOLERANCE <= CONFIG_ROTATION_TOLERANCE) };
    RigidTransform::new(rotation, Vector3::new(m[3], m[7], m[11]))
}

pub fn write_transform(path: impl AsRef<Path>, t: &RigidTransform) -> Result<()> {
    write_text(path.as_ref(), &transform_to_toml(t))
}

pub fn read_transform(path: impl AsRef<Path>) -> Result<RigidTransform> {
    let path = path.as_ref();
    transform_from_toml(&read_text(path)?, path)
}

/// Twist in user units: translation in meters, rotation vector in degrees.
pub fn params_from_user_units(trans_m: [f64; 3], rot_deg: [f64; 3]) -> Result<Se3Params> {
    Se3Params::new(Vector3::from(trans_m), Vector3::from(rot_deg.map(f64::to_radians)))
}

// ---------------------------------------------------------------------------
// Solver journal

#[derive(Serialize)]
struct JournalDoc {
    schema_version: u32,
    converged: bool,
    outer_steps: usize,
    final_transform: [[f64; 4]; 3],
    step: Vec<JournalStep>,
    /// Kept apart: the only field that differs between identical runs.
    timing: Timing,
}

#[derive(Serialize)]
struct JournalStep {
    accepted: bool,
    inner_iterations: usize,
    loss_before: f64,
    loss: f64,
    photometric: f64,
    valid_pixel_overlap: usize,
    distance_exact: bool,
    step_xi_translation_m: [f64; 3],
    step_xi_rotation_deg: [f64; 3],
    gradient_norms: [f64; 6],
    curvature: [f64; 6],
}

#[derive(Serialize)]
struct Timing {
    wall_time_s: f64,
}

/// The report as a TOML journal. Wall time sits alone under `[timing]`
/// unless `include_timing` is false.
pub fn journal_to_toml(report: &SolverReport, include_timing: bool) -> String {
    let m = rows(&report.final_transform);
    let doc = JournalDoc {
        schema_version: JOURNAL_SCHEMA_VERSION,
        converged: report.converged,
        outer_steps: report.per_outer_step.len(),
        final_transform: [
            [m[0], m[1], m[2], m[3]],
            [m[4], m[5], m[6], m[7]],
            [m[8], m[9], m[10], m[11]],
        ],
        step: report
            .per_outer_step
            .iter()
            .map(|s| {
                let xi = s.step_transform.to_params();
                JournalStep {
                    accepted: s.accepted,
                    inner_iterations: s.inner_iterations,
                    loss_before: s.loss_before.combined,
                    loss: s.loss.combined,
                    photometric: s.loss.photometric,
                    valid_pixel_overlap: s.loss.valid_pixel_overlap,
                    distance_exact: s.loss.distance_exact,
                    step_xi_translation_m: xi.v.into(),
                    step_xi_rotation_deg: xi.omega.vector().map(f64::to_degrees).into(),
                    gradient_norms: s.gradient_norms,
                    curvature: s.curvature,
                }
            })
            .collect(),
        timing: Timing {
            wall_time_s: if include_timing { report.wall_time.as_secs_f64() } else { 0.0 },
        },
    };
    toml::to_string(&doc).expect("journal is always representable as TOML")
}

// ---------------------------------------------------------------------------
// Depth PNGs

/// Encodes depths as 16-bit millimeters. Valid depths round to at least 1 mm
/// so they never collide with the no-data value.
pub fn depth_to_image(m: &SparseDepthMap) -> Result<ImageBuffer<Luma<u16>, Vec<u16>>> {
    let mut data = Vec::with_capacity(m.values().len());
    for &d in m.values() {
        if d == 0.0 {
            data.push(0);
            continue;
        }
        if d > MAX_PNG_DEPTH + 0.0005 {
            return Err(Error::InvalidArgument(format!(
                "depth {d} m exceeds the 16-bit millimeter range ({MAX_PNG_DEPTH} m)"
            )));
        }
        data.push(((d * 1000.0).round() as u16).max(1));
    }
    Ok(ImageBuffer::from_raw(m.width(), m.height(), data).expect("buffer matches map size"))
}

pub fn depth_from_image(img: &ImageBuffer<Luma<u16>, Vec<u16>>) -> SparseDepthMap {
    let values = img.as_raw().iter().map(|&mm| mm as f64 / 1000.0).collect();
    SparseDepthMap::from_values(img.width(), img.height(), values).expect("millimeter depths are valid")
}

pub fn write_depth_png(path: impl AsRef<Path>, m: &SparseDepthMap) -> Result<()> {
    let path = path.as_ref();
    depth_to_image(m)?.save_with_format(path, image::ImageFormat::Png).map_err(|e| Error::Image {
        path: path.into(),
        source: e,
    })
}

pub fn read_depth_png(path: impl AsRef<Path>) -> Result<SparseDepthMap> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(e) => Error::io(path, e),
        e => Error::Image {
            path: path.into(),
            source: e,
        },
    })?;
    match img {
        image::DynamicImage::ImageLuma16(buf) => Ok(depth_from_image(&buf)),
        other => Err(Error::parse(
            path,
            format!("expected a 16-bit grayscale depth image, found {:?}", other.color()),
        )),
    }
}

// ---------------------------------------------------------------------------
// Overlays

pub type RgbImage = ImageBuffer<image::Rgb<u8>, Vec<u8>>;

/// Near-to-far color ramp: red at `t = 0`, through yellow and green, to blue at `t = 1`.
fn depth_color(t: f64) -> image::Rgb<u8> {
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 1.0 / 3.0 {
        (1.0, 3.0 * t, 0.0)
    } else if t < 2.0 / 3.0 {
        (2.0 - 3.0 * t, 1.0, 0.0)
    } else {
        (0.0, 3.0 - 3.0 * t, 3.0 * t - 2.0)
    };
    image::Rgb([(r * 255.0).round() as u8, (g * 255.0).round() as u8, (b * 255.0).round() as u8])
}

/// Paints every valid pixel of `m` onto `background` (black when absent),
/// colored by depth over `[near, far]` meters.
pub fn render_overlay(m: &SparseDepthMap, background: Option<&RgbImage>, near: f64, far: f64) -> Result<RgbImage> {
    let mut img = match background {
        Some(bg) => {
            if bg.width() != m.width() || bg.height() != m.height() {
                return Err(Error::DimensionMismatch {
                    left_w: bg.width(),
                    left_h: bg.height(),
                    right_w: m.width(),
                    right_h: m.height(),
                });
            }
            bg.clone()
        }
        None => RgbImage::new(m.width(), m.height()),
    };
    let span = (far - near).max(f64::EPSILON);
    for (row, col, d) in m.valid_pixels() {
        img.put_pixel(col, row, depth_color((d - near) / span));
    }
    Ok(img)
}

pub fn read_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(e) => Error::io(path, e),
        e => Error::Image {
            path: path.into(),
            source: e,
        },
    })?;
    Ok(img.to_rgb8())
}

pub fn write_rgb(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    let path = path.as_ref();
    img.save_with_format(path, image::ImageFormat::Png).map_err(|e| Error::Image {
        path: path.into(),
        source: e,
    })
}

// ---------------------------------------------------------------------------
// Dataset manifests

/// One generated sample. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: usize,
    /// Decalibrated LiDAR scan.
    pub cloud: String,
    pub target_depth: String,
    pub miscalib_depth: String,
    /// Transform document holding the correcting (ground-truth) extrinsic.
    pub ground_truth: String,
    /// Scan corrected by the ground truth, index-aligned with `cloud`.
    pub corresponded: String,
    pub decalibration_translation_m: [f64; 3],
    pub decalibration_rotation_deg: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    /// Rig config shared by all samples.
    pub config: String,
    pub scene: Option<SceneKind>,
    pub density: Option<usize>,
    pub seed: u64,
    pub rot_range_deg: f64,
    pub trans_range_m: f64,
    pub sample: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest is always representable as TOML")
    }

    pub fn from_toml(text: &str, path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let m: Manifest = toml::from_str(text).map_err(|e| Error::parse(path.clone(), e.to_string()))?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::parse(path, format!("unsupported schema_version {}", m.schema_version)));
        }
        Ok(m)
    }
}

pub fn write_manifest(path: impl AsRef<Path>, m: &Manifest) -> Result<()> {
    write_text(path.as_ref(), &m.to_toml())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    Manifest::from_toml(&read_text(path)?, path)
}
