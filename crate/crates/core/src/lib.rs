//! Targetless LiDAR-camera extrinsic calibration.
//!
//! The calibration is recovered by re-rendering the LiDAR depth map under a
//! candidate extrinsic and minimizing a weighted sum of a photometric depth
//! error and a point-cloud distance against a target depth map, with
//! iterative re-alignment of the input between solver passes.

pub mod camera;
pub mod datagen;
pub mod dataset;
pub mod depthmap;
pub mod error;
pub mod io;
pub mod lie;
pub mod losses;
pub mod metrics;
pub mod solver;
pub mod transformer;

pub use camera::{CameraIntrinsics, PointCloud};
pub use depthmap::SparseDepthMap;
pub use error::{Error, Result};
pub use lie::{RigidTransform, RotationMatrix, Se3Params, So3Vector};
