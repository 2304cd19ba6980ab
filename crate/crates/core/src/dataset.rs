//! On-disk datasets: writing generated samples with a manifest, and
//! calibrating every manifest entry against its ground truth.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;

use crate::camera::{CameraIntrinsics, PointCloud};
use crate::datagen::{sample_decalibration, sample_from_source, synth_scene, DecalibrationSpec, SceneKind};
use crate::depthmap::SparseDepthMap;
use crate::error::{Error, Result};
use crate::io::{self, Manifest, ManifestEntry, RigConfig, MANIFEST_SCHEMA_VERSION, MAX_PNG_DEPTH};
use crate::lie::{to_transform, RigidTransform};
use crate::losses::DistanceKind;
use crate::metrics::{aggregate, CalibrationError, HistogramEdges, Summary};
use crate::solver::{calibrate, calibrate_with_correspondence, SolverConfig, SolverReport};

/// Scan points farther than this are dropped so every depth still fits the
/// 16-bit millimeter maps after decalibration.
pub const MAX_SCAN_RANGE: f64 = MAX_PNG_DEPTH - 5.0;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const RIG_FILE: &str = "rig.toml";

pub enum DatasetSource {
    Scene { kind: SceneKind, density: usize, seed: u64 },
    /// A real scan already expressed in the camera frame (reference extrinsic applied).
    Cloud(PointCloud),
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `spec.count` samples of `source` seen through `k` into `dir`,
/// followed by the rig config and the manifest. Returns the manifest path.
pub fn write_dataset(dir: &Path, source: DatasetSource, k: &CameraIntrinsics, spec: &DecalibrationSpec) -> Result<PathBuf> {
    spec.validate()?;
    let (scene, density, cloud) = match source {
        DatasetSource::Scene { kind, density, seed } => (Some(kind), Some(density), synth_scene(kind, density, seed)?),
        DatasetSource::Cloud(c) => (None, None, c),
    };
    let keep: Vec<usize> = (0..cloud.len())
        .filter(|&i| cloud.points()[i].norm() < MAX_SCAN_RANGE)
        .collect();
    let cloud = cloud.select(&keep);

    create_dir(dir)?;
    io::write_rig_config(
        dir.join(RIG_FILE),
        &RigConfig {
            k: *k,
            extrinsic: None,
        },
    )?;
    let mut entries = Vec::with_capacity(spec.count);
    for id in 0..spec.count {
        let xi = sample_decalibration(spec, id as u64)?;
        // Maps are derived from the scan as stored, so they agree with what
        // a reader of the f32 file will render.
        let source = f32_precision(&cloud.transformed(&to_transform(&xi)));
        let sample = sample_from_source(source, k, &xi)?;
        let name = |suffix: &str| format!("{id:04}_{suffix}");
        let entry = ManifestEntry {
            id,
            cloud: name("cloud.bin"),
            target_depth: name("target.png"),
            miscalib_depth: name("miscalib.png"),
            ground_truth: name("gt.toml"),
            corresponded: name("corresponded.bin"),
            decalibration_translation_m: xi.v.into(),
            decalibration_rotation_deg: xi.omega.vector().map(f64::to_degrees).into(),
        };
        io::write_lidar_bin(dir.join(&entry.cloud), &sample.source_cloud)?;
        io::write_depth_png(dir.join(&entry.target_depth), &sample.target_map)?;
        io::write_depth_png(dir.join(&entry.miscalib_depth), &sample.miscalib_map)?;
        io::write_transform(dir.join(&entry.ground_truth), &sample.ground_truth)?;
        io::write_lidar_bin(dir.join(&entry.corresponded), &sample.corresponded_target)?;
        entries.push(entry);
    }
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        config: RIG_FILE.into(),
        scene,
        density,
        seed: spec.seed,
        rot_range_deg: spec.rot_range.to_degrees(),
        trans_range_m: spec.trans_range,
        sample: entries,
    };
    let path = dir.join(MANIFEST_FILE);
    io::write_manifest(&path, &manifest)?;
    Ok(path)
}

fn f32_precision(c: &PointCloud) -> PointCloud {
    let round = |x: f64| x as f32 as f64;
    let points = c.points().iter().map(|p| p.map(round)).collect();
    match c.intensity() {
        Some(i) => PointCloud::with_intensity(points, i.iter().map(|&x| round(x)).collect()),
        None => PointCloud::new(points),
    }
    .expect("rounding keeps finite values finite")
}

/// Runs `calibrate`, or its corresponded variant when `expected` is given.
pub fn run_solver(
    cloud: &PointCloud,
    expected: Option<&PointCloud>,
    target: &SparseDepthMap,
    k: &CameraIntrinsics,
    initial: &RigidTransform,
    cfg: &SolverConfig,
) -> Result<SolverReport> {
    match expected {
        Some(e) => calibrate_with_correspondence(cloud, e, target, k, initial, cfg),
        None => calibrate(cloud, target, k, initial, cfg),
    }
}

#[derive(Debug, Clone)]
pub struct SampleResult {
    pub id: usize,
    pub estimate: RigidTransform,
    pub error: CalibrationError,
    pub converged: bool,
    pub outer_steps: usize,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub samples: Vec<SampleResult>,
    pub summary: Summary,
}

fn needs_correspondence(cfg: &SolverConfig) -> bool {
    cfg.stage_schedule
        .iter()
        .any(|s| s.weights.distance_kind == DistanceKind::CentroidIcp && s.weights.beta_dist > 0.0)
}

fn evaluate_entry(root: &Path, k: &CameraIntrinsics, e: &ManifestEntry, cfg: &SolverConfig) -> Result<SampleResult> {
    let cloud = io::read_lidar_bin(root.join(&e.cloud))?.points;
    let target = io::read_depth_png(root.join(&e.target_depth))?;
    let gt = io::read_transform(root.join(&e.ground_truth))?;
    let expected = if needs_correspondence(cfg) {
        Some(io::read_lidar_bin(root.join(&e.corresponded))?.points)
    } else {
        None
    };
    let report = run_solver(&cloud, expected.as_ref(), &target, k, &RigidTransform::identity(), cfg)?;
    let error = CalibrationError::between(&report.final_transform, &gt)?;
    info!(
        "sample {}: {:.4}° {:.2} cm{}",
        e.id,
        error.geodesic_rot.to_degrees(),
        error.translation_err * 100.0,
        if report.converged { "" } else { " (not converged)" }
    );
    Ok(SampleResult {
        id: e.id,
        estimate: report.final_transform,
        error,
        converged: report.converged,
        outer_steps: report.per_outer_step.len(),
    })
}

/// Calibrates every manifest entry from identity and summarizes the errors.
/// Entries are solved in parallel on `threads` workers (0 = all cores);
/// results keep manifest order, so the output does not depend on scheduling.
pub fn evaluate_manifest(manifest_path: &Path, cfg: &SolverConfig, threads: usize) -> Result<Evaluation> {
    cfg.validate()?;
    let manifest = io::read_manifest(manifest_path)?;
    if manifest.sample.is_empty() {
        return Err(Error::parse(manifest_path, "manifest has no samples"));
    }
    let root = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let rig = io::read_rig_config(root.join(&manifest.config))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let results: Vec<Result<SampleResult>> = pool.install(|| {
        manifest
            .sample
            .par_iter()
            .map(|e| evaluate_entry(&root, &rig.k, e, cfg))
            .collect()
    });
    let samples = manifest
        .sample
        .iter()
        .zip(results)
        .map(|(e, r)| r.map_err(|err| Error::InvalidArgument(format!("sample {}: {err}", e.id))))
        .collect::<Result<Vec<_>>>()?;
    let errors: Vec<CalibrationError> = samples.iter().map(|s| s.error).collect();
    let summary = aggregate(&errors, &HistogramEdges::default())?;
    Ok(Evaluation { samples, summary })
}
