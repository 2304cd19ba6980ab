use std::fs;
use std::path::Path;
use std::process::ExitCode;

use log::info;

use lidcam_core::datagen::{default_camera, DecalibrationSpec, SceneKind};
use lidcam_core::dataset::{evaluate_manifest, run_solver, write_dataset, DatasetSource};
use lidcam_core::io::{self, RigConfig};
use lidcam_core::losses::DistanceKind;
use lidcam_core::solver::{GradientMode, SolverConfig};
use lidcam_core::transformer::scatter;
use lidcam_core::{Error, Result, RigidTransform};

use crate::{CalibrateArgs, ConvertArgs, Distance, EvaluateArgs, GenerateArgs, Gradient, RenderArgs, SolverArgs};

fn solver_config(a: &SolverArgs) -> Result<SolverConfig> {
    let mut cfg = SolverConfig {
        max_outer_iterations: a.outer_iters,
        gradient_mode: match a.gradient {
            Gradient::Provided => GradientMode::Provided,
            Gradient::Fd => GradientMode::FiniteDifference,
        },
        seed: a.seed,
        ..SolverConfig::default()
    };
    let (rotation, translation) = match cfg.stage_schedule.as_mut_slice() {
        [r, t] => (r, t),
        _ => unreachable!("default schedule has two stages"),
    };
    if let Some(alpha) = a.alpha_ph {
        rotation.weights.alpha_ph = alpha;
    }
    if let Some(beta) = a.beta_dist {
        rotation.weights.beta_dist = beta;
        rotation.beta_ramp = None;
    }
    match a.distance {
        Distance::Emd => {}
        Distance::Chamfer => translation.weights.distance_kind = DistanceKind::Chamfer,
        Distance::Icp => {
            translation.weights.distance_kind = DistanceKind::CentroidIcp;
            translation.weights.centroids = 128;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.into(),
        source: e,
    })
}

pub fn calibrate(a: &CalibrateArgs) -> Result<ExitCode> {
    let cfg = solver_config(&a.solver)?;
    let rig = io::read_rig_config(&a.config)?;
    let frame = io::read_lidar_bin(&a.cloud)?;
    let target = io::read_depth_png(&a.target_depth)?;
    let corresponded = match &a.corresponded {
        Some(p) => Some(io::read_lidar_bin(p)?.points),
        None if matches!(a.solver.distance, Distance::Icp) => {
            return Err(Error::InvalidArgument("--distance icp needs --corresponded".into()))
        }
        None => None,
    };
    let initial = match &a.initial {
        Some(p) => io::read_transform(p)?,
        None => RigidTransform::identity(),
    };
    let background = a.image.as_ref().map(io::read_rgb).transpose()?;

    let report = run_solver(&frame.points, corresponded.as_ref(), &target, &rig.k, &initial, &cfg)?;
    io::write_transform(&a.out, &report.final_transform)?;
    if let Some(journal) = &a.journal {
        fs::write(journal, io::journal_to_toml(&report, !a.no_timing)).map_err(|e| Error::Io {
            path: journal.clone(),
            source: e,
        })?;
    }
    if let Some(dir) = &a.render_dir {
        create_dir(dir)?;
        for (name, t) in [("before.png", &initial), ("after.png", &report.final_transform)] {
            let map = scatter(&frame.points.transformed(t), &rig.k);
            let img = io::render_overlay(&map, background.as_ref(), 2.0, 40.0)?;
            io::write_rgb(dir.join(name), &img)?;
        }
    }

    let steps = report.per_outer_step.len();
    if report.converged {
        info!("converged after {steps} outer steps");
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("solver stopped after {steps} outer steps without converging");
        Ok(ExitCode::from(2))
    }
}

pub fn generate(a: &GenerateArgs) -> Result<ExitCode> {
    let spec = DecalibrationSpec {
        rot_range: a.rot_range_deg.to_radians(),
        trans_range: a.trans_range_m,
        seed: a.seed,
        count: a.count,
    };
    let rig = match &a.config {
        Some(p) => io::read_rig_config(p)?,
        None => RigConfig {
            k: default_camera(),
            extrinsic: None,
        },
    };
    let source = match &a.cloud {
        Some(path) => {
            let extrinsic = rig.extrinsic.ok_or_else(|| {
                Error::InvalidArgument("--cloud needs a --config with a reference extrinsic".into())
            })?;
            DatasetSource::Cloud(io::read_lidar_bin(path)?.points.transformed(&extrinsic))
        }
        None => DatasetSource::Scene {
            kind: a.scene.parse::<SceneKind>()?,
            density: a.density,
            seed: a.scene_seed,
        },
    };
    let path = write_dataset(&a.out_dir, source, &rig.k, &spec)?;
    println!("wrote {} samples to {}", a.count, path.display());
    Ok(ExitCode::SUCCESS)
}

pub fn evaluate(a: &EvaluateArgs) -> Result<ExitCode> {
    let cfg = solver_config(&a.solver)?;
    let evaluation = evaluate_manifest(&a.manifest, &cfg, a.threads)?;
    if let Some(dir) = &a.transforms_dir {
        create_dir(dir)?;
        for s in &evaluation.samples {
            io::write_transform(dir.join(format!("{:04}_estimate.toml", s.id)), &s.estimate)?;
        }
    }
    if let Some(out) = &a.out {
        fs::write(out, evaluation.summary.to_toml()).map_err(|e| Error::Io {
            path: out.clone(),
            source: e,
        })?;
    }
    print!("{}", evaluation.summary.to_report());
    Ok(ExitCode::SUCCESS)
}

pub fn render(a: &RenderArgs) -> Result<ExitCode> {
    let rig = io::read_rig_config(&a.config)?;
    let cloud = io::read_lidar_bin(&a.cloud)?.points;
    let t = match &a.transform {
        Some(p) => io::read_transform(p)?,
        None => RigidTransform::identity(),
    };
    let background = a.image.as_ref().map(io::read_rgb).transpose()?;
    let map = scatter(&cloud.transformed(&t), &rig.k);
    io::write_rgb(&a.out, &io::render_overlay(&map, background.as_ref(), a.near, a.far)?)?;
    println!("{} of {} points drawn", map.valid_count(), cloud.len());
    Ok(ExitCode::SUCCESS)
}

pub fn convert_kitti(a: &ConvertArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&a.calib).map_err(|e| Error::Io {
        path: a.calib.clone(),
        source: e,
    })?;
    let rig = io::convert_kitti_calib(&text, a.width, a.height)?;
    io::write_rig_config(&a.out, &rig)?;
    Ok(ExitCode::SUCCESS)
}
