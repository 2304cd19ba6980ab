//! Calibration error metrics and their aggregation over an evaluation set.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{log_so3, RigidTransform, RotationMatrix};

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

/// Pitch values within this distance of ±π/2 are rejected by [`euler_decompose`].
pub const GIMBAL_GUARD: f64 = 1e-6;

/// Geodesic distance on SO(3): `(1/√2)·‖log(RᵢᵀRⱼ)‖_F`, i.e. the angle of
/// the relative rotation.
pub fn geodesic_distance(ri: &RotationMatrix, rj: &RotationMatrix) -> f64 {
    let rel = RotationMatrix::from_product(ri.matrix().transpose() * rj.matrix());
    // ‖hat(ω)‖_F = √2·‖ω‖
    log_so3(&rel).angle()
}

pub fn translation_error(xi: &Vector3<f64>, xj: &Vector3<f64>) -> f64 {
    (xi - xj).norm()
}

/// Yaw (about z), pitch (about y), roll (about x) with `R = Rz·Ry·Rx`.
pub fn euler_decompose(r: &RotationMatrix) -> Result<(f64, f64, f64)> {
    let m = r.matrix();
    let pitch = (-m[(2, 0)]).clamp(-1.0, 1.0).asin();
    if FRAC_PI_2 - pitch.abs() < GIMBAL_GUARD {
        return Err(Error::GimbalLock { pitch });
    }
    let yaw = m[(1, 0)].atan2(m[(0, 0)]);
    let roll = m[(2, 1)].atan2(m[(2, 2)]);
    Ok((yaw, pitch, roll))
}

/// Inverse of [`euler_decompose`].
pub fn euler_compose(yaw: f64, pitch: f64, roll: f64) -> RotationMatrix {
    let (sy, cy) = yaw.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sr, cr) = roll.sin_cos();
    let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
    let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
    RotationMatrix::from_product(rz * ry * rx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationError {
    /// radians, in [0, π]
    pub geodesic_rot: f64,
    /// meters
    pub translation_err: f64,
    /// Signed yaw/pitch/roll of `R_est·R_gtᵀ`, radians.
    pub per_axis_rot: [f64; 3],
    /// Signed `t_est - t_gt`, meters.
    pub per_axis_trans: [f64; 3],
}

impl CalibrationError {
    pub fn between(estimate: &RigidTransform, ground_truth: &RigidTransform) -> Result<Self> {
        let delta = RotationMatrix::from_product(estimate.rotation.matrix() * ground_truth.rotation.matrix().transpose());
        let (yaw, pitch, roll) = euler_decompose(&delta)?;
        let dt = estimate.translation - ground_truth.translation;
        Ok(Self {
            geodesic_rot: geodesic_distance(&estimate.rotation, &ground_truth.rotation),
            translation_err: dt.norm(),
            per_axis_rot: [yaw, pitch, roll],
            per_axis_trans: [dt.x, dt.y, dt.z],
        })
    }
}

/// Bucket edges for the error histograms. Bucket `i` counts values in
/// `[edges[i], edges[i+1])`; a final bucket collects values `≥` the last edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramEdges {
    pub rotation_deg: Vec<f64>,
    pub translation_m: Vec<f64>,
}

impl Default for HistogramEdges {
    fn default() -> Self {
        Self {
            rotation_deg: vec![0.0, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0],
            translation_m: vec![0.0, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    fn build(edges: &[f64], values: impl Iterator<Item = f64>) -> Result<Self> {
        if edges.is_empty() || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("histogram edges must be non-empty and increasing".into()));
        }
        let mut counts = vec![0; edges.len()];
        for v in values {
            // values below the first edge land in the first bucket
            let i = edges.partition_point(|&e| e <= v).saturating_sub(1);
            counts[i] += 1;
        }
        Ok(Self {
            edges: edges.to_vec(),
            counts,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub count: usize,
    /// Mean absolute yaw/pitch/roll error, degrees.
    pub mae_rot_deg: [f64; 3],
    /// Mean absolute x/y/z translation error, meters.
    pub mae_trans_m: [f64; 3],
    pub mean_geodesic_deg: f64,
    pub median_geodesic_deg: f64,
    pub mean_translation_m: f64,
    pub median_translation_m: f64,
    pub rotation_histogram: Histogram,
    pub translation_histogram: Histogram,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn aggregate(errors: &[CalibrationError], edges: &HistogramEdges) -> Result<Summary> {
    if errors.is_empty() {
        return Err(Error::InvalidArgument("cannot aggregate an empty error list".into()));
    }
    let n = errors.len() as f64;
    let mean_abs = |f: &dyn Fn(&CalibrationError) -> f64| errors.iter().map(|e| f(e).abs()).sum::<f64>() / n;
    let rot_deg: Vec<f64> = errors.iter().map(|e| e.geodesic_rot.to_degrees()).collect();
    let trans: Vec<f64> = errors.iter().map(|e| e.translation_err).collect();

    Ok(Summary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        count: errors.len(),
        mae_rot_deg: [0, 1, 2].map(|i| mean_abs(&|e| e.per_axis_rot[i]).to_degrees()),
        mae_trans_m: [0, 1, 2].map(|i| mean_abs(&|e| e.per_axis_trans[i])),
        mean_geodesic_deg: rot_deg.iter().sum::<f64>() / n,
        median_geodesic_deg: median(rot_deg.clone()),
        mean_translation_m: trans.iter().sum::<f64>() / n,
        median_translation_m: median(trans.clone()),
        rotation_histogram: Histogram::build(&edges.rotation_deg, rot_deg.into_iter())?,
        translation_histogram: Histogram::build(&edges.translation_m, trans.into_iter())?,
    })
}

impl Summary {
    /// Machine-readable key-value document.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("summary is always representable as TOML")
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let summary: Summary = toml::from_str(s).map_err(|e| Error::parse("<summary>", e.to_string()))?;
        if summary.schema_version != SUMMARY_SCHEMA_VERSION {
            return Err(Error::parse(
                "<summary>",
                format!("unsupported schema_version {}", summary.schema_version),
            ));
        }
        Ok(summary)
    }

    pub fn to_report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "calibration error summary ({} samples)", self.count);
        let _ = writeln!(
            s,
            "  rotation MAE     yaw {:.4}°  pitch {:.4}°  roll {:.4}°",
            self.mae_rot_deg[0], self.mae_rot_deg[1], self.mae_rot_deg[2]
        );
        let _ = writeln!(
            s,
            "  translation MAE  x {:.2} cm  y {:.2} cm  z {:.2} cm",
            self.mae_trans_m[0] * 100.0,
            self.mae_trans_m[1] * 100.0,
            self.mae_trans_m[2] * 100.0
        );
        let _ = writeln!(
            s,
            "  geodesic         mean {:.4}°  median {:.4}°",
            self.mean_geodesic_deg, self.median_geodesic_deg
        );
        let _ = writeln!(
            s,
            "  translation      mean {:.2} cm  median {:.2} cm",
            self.mean_translation_m * 100.0,
            self.median_translation_m * 100.0
        );
        for (name, unit, scale, h) in [
            ("rotation", "°", 1.0, &self.rotation_histogram),
            ("translation", "cm", 100.0, &self.translation_histogram),
        ] {
            let _ = writeln!(s, "  {name} histogram");
            for (i, count) in h.counts.iter().enumerate() {
                let lo = h.edges[i] * scale;
                match h.edges.get(i + 1) {
                    Some(hi) => {
                        let _ = writeln!(s, "    [{lo:>6.2}, {:>6.2}) {unit}  {count}", hi * scale);
                    }
                    None => {
                        let _ = writeln!(s, "    [{lo:>6.2},    inf) {unit}  {count}");
                    }
                }
            }
        }
        s
    }
}
