//! Alignment losses between a re-rendered depth map / point cloud and its
//! target: photometric depth error, Chamfer, Earth Mover's and centroid-ICP
//! distances, and their weighted combination.

mod centroid;
mod chamfer;
mod emd;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use centroid::{centroid_icp_distance, cluster_centroids};
pub(crate) use centroid::chunk_means;
pub use chamfer::{chamfer_distance, one_sided_chamfer, NearestNeighborIndex};
pub use emd::{emd_distance, solve_assignment, EmdResult, EMD_EXACT_CAP, EMD_MAX_RELATIVE_GAP};
pub(crate) use emd::emd_points;

use crate::camera::PointCloud;
use crate::depthmap::{SparseDepthMap, NO_DATA};
use crate::error::{Error, Result};
use crate::lie::RigidTransform;

/// Which point-cloud distance enters the combined loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Chamfer,
    Emd,
    CentroidIcp,
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceKind::Chamfer => "chamfer",
            DistanceKind::Emd => "emd",
            DistanceKind::CentroidIcp => "icp",
        })
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chamfer" => Ok(DistanceKind::Chamfer),
            "emd" => Ok(DistanceKind::Emd),
            "icp" | "centroid_icp" => Ok(DistanceKind::CentroidIcp),
            other => Err(Error::InvalidArgument(format!(
                "unknown distance `{other}` (expected chamfer, emd or icp)"
            ))),
        }
    }
}

/// Weights of `α·L_photo + β·d(S₁, S₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha_ph: f64,
    pub beta_dist: f64,
    pub distance_kind: DistanceKind,
    /// Cluster count used to reduce clouds for the EMD and centroid-ICP terms.
    pub centroids: usize,
}

impl LossWeights {
    pub fn new(alpha_ph: f64, beta_dist: f64, distance_kind: DistanceKind) -> Result<Self> {
        let w = Self {
            alpha_ph,
            beta_dist,
            distance_kind,
            centroids: EMD_EXACT_CAP,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn with_centroids(mut self, centroids: usize) -> Self {
        self.centroids = centroids;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.alpha_ph) || !ok(self.beta_dist) {
            return Err(Error::InvalidArgument(format!(
                "loss weights must be finite and nonnegative (alpha_ph = {}, beta_dist = {})",
                self.alpha_ph, self.beta_dist
            )));
        }
        if self.alpha_ph == 0.0 && self.beta_dist == 0.0 {
            return Err(Error::InvalidArgument("alpha_ph and beta_dist are both zero".into()));
        }
        if self.centroids == 0 {
            return Err(Error::InvalidArgument("centroid count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// m²
    pub photometric: f64,
    /// m² for Chamfer and centroid-ICP, m for EMD.
    pub distance: f64,
    pub combined: f64,
    pub valid_pixel_overlap: usize,
    /// False when the EMD term came from the approximate solver.
    pub distance_exact: bool,
}

impl LossBreakdown {
    pub fn assemble(photometric: f64, overlap: usize, distance: f64, exact: bool, w: &LossWeights) -> Self {
        Self {
            photometric,
            distance,
            combined: w.alpha_ph * photometric + w.beta_dist * distance,
            valid_pixel_overlap: overlap,
            distance_exact: exact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Photometric {
    pub loss: f64,
    pub overlap: usize,
}

/// `½ · mean (D_target - D_pred)²` over pixels valid in both maps. With no
/// shared pixel the loss is 0 and the overlap is 0.
pub fn photometric_loss(pred: &SparseDepthMap, target: &SparseDepthMap) -> Result<Photometric> {
    pred.same_shape(target)?;
    let (sum, overlap) = pred
        .values()
        .iter()
        .zip(target.values())
        .filter(|(&p, &t)| p != NO_DATA && t != NO_DATA)
        .fold((0.0f64, 0usize), |(s, n), (&p, &t)| (s + (t - p) * (t - p), n + 1));
    Ok(Photometric {
        loss: if overlap == 0 { 0.0 } else { 0.5 * sum / overlap as f64 },
        overlap,
    })
}

/// The point-cloud distance selected by `w`, plus whether it is exact.
pub fn distance_term(pred: &PointCloud, target: &PointCloud, w: &LossWeights) -> Result<(f64, bool)> {
    match w.distance_kind {
        DistanceKind::Chamfer => Ok((chamfer_distance(pred, target)?, true)),
        DistanceKind::Emd => {
            if pred.is_empty() || target.is_empty() {
                return Err(Error::EmptyCloud);
            }
            let k = w.centroids.min(pred.len()).min(target.len());
            let r = if pred.len() == k && target.len() == k {
                emd_distance(pred, target)?
            } else {
                emd_points(&chunk_means(pred.points(), k)?, &chunk_means(target.points(), k)?)?
            };
            Ok((r.cost, r.exact))
        }
        DistanceKind::CentroidIcp => {
            let k = w.centroids.min(pred.len());
            Ok((centroid_icp_distance(pred, target, &RigidTransform::identity(), k)?, true))
        }
    }
}

/// `α·photometric(pred_map, target_map) + β·d(pred_cloud, target_cloud)`.
/// A zero weight skips its term entirely.
pub fn combined_loss(
    pred_map: &SparseDepthMap,
    target_map: &SparseDepthMap,
    pred_cloud: &PointCloud,
    target_cloud: &PointCloud,
    w: &LossWeights,
) -> Result<LossBreakdown> {
    w.validate()?;
    let photo = photometric_loss(pred_map, target_map)?;
    let (distance, exact) = if w.beta_dist > 0.0 {
        distance_term(pred_cloud, target_cloud, w)?
    } else {
        (0.0, true)
    };
    Ok(LossBreakdown::assemble(photo.loss, photo.overlap, distance, exact, w))
}
