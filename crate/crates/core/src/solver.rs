//! Direct minimization of the alignment losses over `ξ ∈ se(3)`.
//!
//! Each outer step re-renders the working cloud under the current estimate,
//! runs the stage schedule from `ξ = 0` against that map, and left-multiplies
//! the residual onto the estimate: `T̂ ← T_k · T̂`.
//!
//! The working cloud holds the source points visible in the initial depth
//! map at their exact coordinates; each outer step keeps those that win the
//! z-buffer of the re-rendered map. The target is the lifted target map.
//! Point-cloud terms compare the transformed working points with it; the
//! photometric term inverse-warps them into a max-pooled copy of the target
//! map with sparse bilinear sampling, which keeps it piecewise smooth in `ξ`.
//!
//! Within an outer step the schedule runs in rounds, each stage starting
//! where the previous one stopped, because rotation and translation are
//! coupled and a single pass leaves part of each error in the other block.

use std::cell::RefCell;
use std::rc::Rc;
use std::time::{Duration, Instant};

use log::{debug, info};
use nalgebra::{Vector3, Vector6};
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::camera::{project, CameraIntrinsics, PointCloud};
use crate::datagen::stream_rng;
use crate::depthmap::{max_pool, SparseDepthMap, NO_DATA};
use crate::error::{Error, Result};
use crate::lie::{compose, right_jacobian_so3, to_transform, RigidTransform, Se3Params};
use crate::losses::{
    chunk_means, emd_points, EMD_EXACT_CAP, one_sided_chamfer, DistanceKind, LossBreakdown, LossWeights, NearestNeighborIndex,
};
use crate::transformer::{lift, scatter_records, sparse_bilinear_sample};

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 20;
/// Matched pairs closer than this (meters) are treated as coincident: the
/// norm has no derivative there and round-off would pick a random direction.
const COINCIDENT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Central differences on every term.
    FiniteDifference,
    /// Closed-form gradients for the point-cloud terms (nearest neighbors and
    /// assignments held fixed); the photometric term still uses differences.
    Provided,
}

/// Which coordinates of `ξ = (v, ω)` a stage may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSet {
    Rotation,
    Translation,
    All,
}

impl ParamSet {
    /// Indices into `Se3Params::to_vector`, which is ordered `[v, ω]`.
    pub fn indices(&self) -> std::ops::Range<usize> {
        match self {
            ParamSet::Translation => 0..3,
            ParamSet::Rotation => 3..6,
            ParamSet::All => 0..6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub active: ParamSet,
    pub weights: LossWeights,
    /// When set, `beta_dist` is interpolated linearly from the first to the
    /// second value across outer steps.
    pub beta_ramp: Option<(f64, f64)>,
}

impl StageSpec {
    pub fn weights_at(&self, outer: usize, outer_total: usize) -> LossWeights {
        let mut w = self.weights;
        if let Some((b0, b1)) = self.beta_ramp {
            let s = if outer_total > 1 { outer as f64 / (outer_total - 1) as f64 } else { 0.0 };
            w.beta_dist = b0 + (b1 - b0) * s.min(1.0);
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_outer_iterations: usize,
    pub max_inner_iterations: usize,
    pub gradient_mode: GradientMode,
    /// radians
    pub fd_step_rot: f64,
    /// meters
    pub fd_step_trans: f64,
    /// Relative loss decrease below which a stage stops.
    pub convergence_tol_loss: f64,
    /// Step norm below which a stage stops.
    pub convergence_tol_step: f64,
    pub stage_schedule: Vec<StageSpec>,
    /// The outer loop stops once a residual is smaller than this, radians.
    pub identity_tol_rot: f64,
    /// The outer loop stops once a residual is smaller than this, meters.
    pub identity_tol_trans: f64,
    /// Passes over the stage schedule per outer step.
    pub max_schedule_rounds: usize,
    /// Length of the first trial step of a stage, radians.
    pub initial_step_rot: f64,
    /// Length of the first trial step of a stage, meters.
    pub initial_step_trans: f64,
    /// Max-pool window applied to the target map for the photometric term.
    pub pool_window: u32,
    /// Working clouds above this size are subsampled (seeded).
    pub max_working_points: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let rotation = LossWeights {
            alpha_ph: 1.0,
            beta_dist: 0.15,
            distance_kind: DistanceKind::Chamfer,
            centroids: 128,
        };
        let translation = LossWeights {
            alpha_ph: 0.0,
            beta_dist: 1.0,
            distance_kind: DistanceKind::Emd,
            centroids: EMD_EXACT_CAP,
        };
        Self {
            max_outer_iterations: 5,
            max_inner_iterations: 100,
            gradient_mode: GradientMode::Provided,
            fd_step_rot: 1e-4,
            fd_step_trans: 1e-4,
            convergence_tol_loss: 1e-5,
            convergence_tol_step: 1e-7,
            stage_schedule: vec![
                StageSpec {
                    active: ParamSet::Rotation,
                    weights: rotation,
                    beta_ramp: Some((0.15, 1.75)),
                },
                StageSpec {
                    active: ParamSet::Translation,
                    weights: translation,
                    beta_ramp: None,
                },
            ],
            max_schedule_rounds: 3,
            identity_tol_rot: 1e-3,
            identity_tol_trans: 2e-3,
            initial_step_rot: 0.01,
            initial_step_trans: 0.02,
            pool_window: 5,
            max_working_points: 20_000,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if self.max_outer_iterations < 1 || self.max_inner_iterations < 1 || self.max_schedule_rounds < 1 {
            return Err(Error::InvalidArgument("iteration limits must be at least 1".into()));
        }
        for (name, x) in [
            ("fd_step_rot", self.fd_step_rot),
            ("fd_step_trans", self.fd_step_trans),
            ("convergence_tol_loss", self.convergence_tol_loss),
            ("convergence_tol_step", self.convergence_tol_step),
            ("identity_tol_rot", self.identity_tol_rot),
            ("identity_tol_trans", self.identity_tol_trans),
            ("initial_step_rot", self.initial_step_rot),
            ("initial_step_trans", self.initial_step_trans),
        ] {
            if !positive(x) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {x}")));
            }
        }
        if self.stage_schedule.is_empty() {
            return Err(Error::InvalidArgument("stage schedule is empty".into()));
        }
        for s in &self.stage_schedule {
            s.weights.validate()?;
            if let Some((a, b)) = s.beta_ramp {
                if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0) {
                    return Err(Error::InvalidArgument(format!("invalid beta ramp ({a}, {b})")));
                }
            }
        }
        if self.pool_window < 1 || self.max_working_points < 1 {
            return Err(Error::InvalidArgument("pool window and working point cap must be at least 1".into()));
        }
        Ok(())
    }

    fn fd_step(&self, i: usize) -> f64 {
        if i < 3 {
            self.fd_step_trans
        } else {
            self.fd_step_rot
        }
    }
}

/// Voxel edge of the Morton order used to form compact clusters, meters.
const CLUSTER_VOXEL: f64 = 1.0;

/// The fixed data a loss is evaluated against: working points in the current
/// frame and the target.
///
/// For the centroid terms the working points are ordered along a Morton
/// curve and split into contiguous chunks, so every cluster is spatially
/// compact. Each target point joins the cluster of its nearest working point
/// under an anchor transform; clusters that receive no target point are left
/// out of the EMD term. A [`Problem`] fixes the anchor, which keeps the
/// centroid terms smooth in `ξ`; the grouping is exact when the anchored
/// working cloud already matches the target.
pub struct Objective {
    k: CameraIntrinsics,
    working: Vec<Vector3<f64>>,
    expected: Option<Vec<Vector3<f64>>>,
    target: NearestNeighborIndex,
    pooled: SparseDepthMap,
    /// Working indices in Morton order.
    spatial: Vec<usize>,
    /// Working points in Morton order and their index.
    ordered: Vec<Vector3<f64>>,
    clusters: RefCell<Vec<(ClusterKey, Rc<Clusters>)>>,
}

struct Clusters {
    /// Means of the chunks that own at least one target point, with the
    /// matching target means.
    working: Vec<Vector3<f64>>,
    target: Vec<Vector3<f64>>,
    /// Means of every working chunk and of its corresponded points.
    all_working: Vec<Vector3<f64>>,
    expected: Option<Vec<Vector3<f64>>>,
}

impl Objective {
    /// `expected`, if given, is index-aligned with `working`.
    pub fn new(
        k: &CameraIntrinsics,
        working: Vec<Vector3<f64>>,
        expected: Option<Vec<Vector3<f64>>>,
        target_map: &SparseDepthMap,
        pool_window: u32,
    ) -> Result<Self> {
        target_map.matches_camera(k)?;
        if working.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(e) = &expected {
            if e.len() != working.len() {
                return Err(Error::CorrespondenceUnavailable(working.len(), e.len()));
            }
        }
        let target = lift(target_map, k)?;
        if target.is_empty() {
            return Err(Error::EmptyDepthMap);
        }
        let spatial = spatial_order(&working, CLUSTER_VOXEL);
        let ordered: Vec<_> = spatial.iter().map(|&i| working[i]).collect();
        Ok(Self {
            k: *k,
            working,
            expected,
            target: NearestNeighborIndex::new(target.points())?,
            pooled: max_pool(target_map, pool_window, 1)?,
            spatial,
            ordered,
            clusters: RefCell::new(Vec::new()),
        })
    }

    /// The loss with target points grouped under `anchor`.
    pub fn at(&self, anchor: &Se3Params) -> Problem<'_> {
        Problem {
            objective: self,
            anchor: *anchor,
        }
    }

    pub fn evaluate(&self, xi: &Se3Params, w: &LossWeights) -> Result<LossBreakdown> {
        self.at(&Se3Params::zero()).evaluate(xi, w)
    }

    fn clusters(&self, count: usize, anchor: &Se3Params) -> Result<Rc<Clusters>> {
        let x = anchor.to_vector();
        let key = (count, std::array::from_fn(|i| x[i].to_bits()));
        if let Some((_, c)) = self.clusters.borrow().iter().find(|(k, _)| *k == key) {
            return Ok(c.clone());
        }
        let n = self.working.len();
        let all_working = chunk_means(&self.ordered, count)?;
        let expected = match &self.expected {
            Some(e) => Some(chunk_means(&self.spatial.iter().map(|&i| e[i]).collect::<Vec<_>>(), count)?),
            None => None,
        };
        // Chunk c covers ranks [c·n/count, (c+1)·n/count).
        let mut chunk_of = vec![0; n];
        for c in 0..count {
            chunk_of[c * n / count..(c + 1) * n / count].fill(c);
        }
        let mut sums = vec![Vector3::zeros(); count];
        let mut members = vec![0usize; count];
        let t = to_transform(anchor);
        let anchored: Vec<_> = self.ordered.iter().map(|p| t.apply(p)).collect();
        let index = NearestNeighborIndex::new(&anchored)?;
        for q in self.target.points() {
            let r = index.nearest(q).0;
            sums[chunk_of[r]] += q;
            members[chunk_of[r]] += 1;
        }
        let (working, target) = (0..count)
            .filter(|&c| members[c] > 0)
            .map(|c| (all_working[c], sums[c] / members[c] as f64))
            .unzip();
        let c = Rc::new(Clusters {
            working,
            target,
            all_working,
            expected,
        });
        let mut cache = self.clusters.borrow_mut();
        if cache.len() >= 8 {
            cache.remove(0);
        }
        cache.push((key, c.clone()));
        Ok(c)
    }

    pub fn working(&self) -> &[Vector3<f64>] {
        &self.working
    }

    pub fn target(&self) -> &[Vector3<f64>] {
        self.target.points()
    }

    /// `½ · mean (D_target(π(T·p)) - z(T·p))²` over working points whose
    /// projection samples a valid target depth.
    pub fn photometric(&self, t: &RigidTransform) -> (f64, usize) {
        let (mut sum, mut n) = (0.0, 0usize);
        for p in &self.working {
            let q = t.apply(p);
            let Some(proj) = project(&q, &self.k) else { continue };
            let d = sparse_bilinear_sample(&self.pooled, &proj.pixel);
            if d != NO_DATA {
                sum += (d - proj.depth) * (d - proj.depth);
                n += 1;
            }
        }
        (if n == 0 { 0.0 } else { 0.5 * sum / n as f64 }, n)
    }

    /// The point-cloud distance between `T·working` and the target, and
    /// whether it is exact.
    pub fn distance(&self, t: &RigidTransform, anchor: &Se3Params, w: &LossWeights) -> Result<(f64, bool)> {
        match w.distance_kind {
            DistanceKind::Chamfer => {
                let pred: Vec<_> = self.working.iter().map(|p| t.apply(p)).collect();
                let pred_index = NearestNeighborIndex::new(&pred)?;
                Ok((
                    one_sided_chamfer(&pred, &self.target) + one_sided_chamfer(self.target.points(), &pred_index),
                    true,
                ))
            }
            DistanceKind::Emd => {
                // Means commute with rigid motions: cluster once, move the means.
                let c = self.clusters(w.centroids.min(self.working.len()), anchor)?;
                let moved: Vec<_> = c.working.iter().map(|p| t.apply(p)).collect();
                let r = emd_points(&moved, &c.target)?;
                Ok((r.cost, r.exact))
            }
            DistanceKind::CentroidIcp => {
                if self.expected.is_none() {
                    return Err(Error::CorrespondenceUnavailable(self.working.len(), self.target.len()));
                }
                let c = self.clusters(w.centroids.min(self.working.len()), anchor)?;
                let expected = c.expected.as_deref().unwrap_or_default();
                Ok((
                    0.5 * c.all_working.iter().zip(expected).map(|(x, y)| (y - t.apply(x)).norm_squared()).sum::<f64>(),
                    true,
                ))
            }
        }
    }

}

type ClusterKey = (usize, [u64; 6]);

/// An [`Objective`] with its cluster anchor fixed.
#[derive(Clone, Copy)]
pub struct Problem<'a> {
    pub objective: &'a Objective,
    pub anchor: Se3Params,
}

impl Problem<'_> {
    pub fn evaluate(&self, xi: &Se3Params, w: &LossWeights) -> Result<LossBreakdown> {
        let obj = self.objective;
        let t = to_transform(xi);
        let (photometric, overlap) = if w.alpha_ph > 0.0 { obj.photometric(&t) } else { (0.0, 0) };
        let (distance, exact) = if w.beta_dist > 0.0 { obj.distance(&t, &self.anchor, w)? } else { (0.0, true) };
        let b = LossBreakdown::assemble(photometric, overlap, distance, exact, w);
        if !b.combined.is_finite() {
            return Err(Error::NonFiniteLoss(format!("combined loss {} at ξ = {:?}", b.combined, xi.to_vector())));
        }
        Ok(b)
    }

    fn value(&self, x: &Vector6<f64>, w: &LossWeights) -> Result<f64> {
        Ok(self.evaluate(&Se3Params::from_vector(x)?, w)?.combined)
    }

    /// Closed-form gradient of the distance term with nearest neighbors and
    /// the optimal assignment held at their values at `xi`.
    pub fn distance_gradient(&self, xi: &Se3Params, w: &LossWeights) -> Result<Vector6<f64>> {
        let obj = self.objective;
        let t = to_transform(xi);
        // (point before the transform, ∂d/∂(T·point))
        let mut pulls: Vec<(Vector3<f64>, Vector3<f64>)> = Vec::new();
        match w.distance_kind {
            DistanceKind::Chamfer => {
                let pred: Vec<_> = obj.working.iter().map(|p| t.apply(p)).collect();
                let mut g = vec![Vector3::zeros(); pred.len()];
                for (i, q) in pred.iter().enumerate() {
                    let (j, _) = obj.target.nearest(q);
                    g[i] += 2.0 * (q - obj.target.points()[j]);
                }
                let pred_index = NearestNeighborIndex::new(&pred)?;
                for y in obj.target.points() {
                    let (i, _) = pred_index.nearest(y);
                    g[i] += 2.0 * (pred[i] - y);
                }
                pulls.extend(obj.working.iter().copied().zip(g));
            }
            DistanceKind::Emd => {
                let c = obj.clusters(w.centroids.min(obj.working.len()), &self.anchor)?;
                let moved: Vec<_> = c.working.iter().map(|p| t.apply(p)).collect();
                let r = emd_points(&moved, &c.target)?;
                for (i, &j) in r.assignment.iter().enumerate() {
                    let d = moved[i] - c.target[j];
                    let n = d.norm();
                    pulls.push((c.working[i], if n > COINCIDENT { d / n } else { Vector3::zeros() }));
                }
            }
            DistanceKind::CentroidIcp => {
                if obj.expected.is_none() {
                    return Err(Error::CorrespondenceUnavailable(obj.working.len(), obj.target.len()));
                }
                let c = obj.clusters(w.centroids.min(obj.working.len()), &self.anchor)?;
                let expected = c.expected.as_deref().unwrap_or_default();
                for (a, y) in c.all_working.iter().zip(expected) {
                    pulls.push((*a, t.apply(a) - y));
                }
            }
        }
        // q = R·p + v: ∂q/∂v = I, ∂q/∂ω = -R·[p]ₓ·J_r(ω).
        let rt = t.rotation.matrix().transpose();
        let mut dv = Vector3::zeros();
        let mut dw = Vector3::zeros();
        for (p, g) in &pulls {
            dv += g;
            dw += p.cross(&(rt * g));
        }
        let dw = right_jacobian_so3(&xi.omega).transpose() * dw;
        Ok(Vector6::new(dv.x, dv.y, dv.z, dw.x, dw.y, dw.z))
    }
}

/// Gradient of the combined loss with respect to `ξ = [v, ω]`. Coordinates
/// outside `active` are zero.
pub fn loss_gradient(
    problem: &Problem<'_>,
    xi: &Se3Params,
    w: &LossWeights,
    active: ParamSet,
    cfg: &SolverConfig,
) -> Result<Vector6<f64>> {
    let x = xi.to_vector();
    let central = |i: usize, w: &LossWeights| -> Result<f64> {
        let h = cfg.fd_step(i);
        let mut plus = x;
        plus[i] += h;
        let mut minus = x;
        minus[i] -= h;
        Ok((problem.value(&plus, w)? - problem.value(&minus, w)?) / (2.0 * h))
    };
    let mut g = Vector6::zeros();
    match cfg.gradient_mode {
        GradientMode::FiniteDifference => {
            for i in active.indices() {
                g[i] = central(i, w)?;
            }
        }
        GradientMode::Provided => {
            if w.beta_dist > 0.0 {
                g = problem.distance_gradient(xi, w)? * w.beta_dist;
            }
            if w.alpha_ph > 0.0 {
                let photo_only = LossWeights { beta_dist: 0.0, ..*w };
                for i in active.indices() {
                    g[i] += central(i, &photo_only)?;
                }
            }
            let keep = active.indices();
            for i in 0..6 {
                if !keep.contains(&i) {
                    g[i] = 0.0;
                }
            }
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageResult {
    pub xi: Se3Params,
    pub loss: f64,
    pub iterations: usize,
    pub accepted_steps: usize,
}

/// Gradient descent with Armijo backtracking on the active coordinates.
pub fn solve_stage(
    obj: &Objective,
    initial: &Se3Params,
    active: ParamSet,
    w: &LossWeights,
    cfg: &SolverConfig,
) -> Result<StageResult> {
    cfg.validate()?;
    w.validate()?;
    let problem = obj.at(initial);
    let mut x = initial.to_vector();
    let mut f = problem.value(&x, w)?;
    let first_step = match active {
        ParamSet::Translation => cfg.initial_step_trans,
        _ => cfg.initial_step_rot,
    };
    let mut alpha: Option<f64> = None;
    let mut accepted = 0;
    let mut iterations = 0;

    while iterations < cfg.max_inner_iterations {
        iterations += 1;
        let g = loss_gradient(&problem, &Se3Params::from_vector(&x)?, w, active, cfg)?;
        let gg = g.norm_squared();
        if gg == 0.0 {
            break;
        }
        let mut a = alpha.unwrap_or(first_step / gg.sqrt());
        let mut next = None;
        for _ in 0..=MAX_HALVINGS {
            let cand = x - g * a;
            let fc = problem.value(&cand, w)?;
            if fc <= f - ARMIJO * a * gg {
                next = Some((cand, fc));
                break;
            }
            a *= 0.5;
        }
        let Some((cand, fc)) = next else { break };
        let step = (cand - x).norm();
        let decrease = f - fc;
        x = cand;
        accepted += 1;
        alpha = Some(a * 2.0);
        let done = step < cfg.convergence_tol_step || decrease <= cfg.convergence_tol_loss * f.abs();
        f = fc;
        if done {
            break;
        }
    }
    Ok(StageResult {
        xi: Se3Params::from_vector(&x)?,
        loss: f,
        iterations,
        accepted_steps: accepted,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterStep {
    /// `T̂` after this step.
    pub transform: RigidTransform,
    /// The residual `T_k` found in this step.
    pub step_transform: RigidTransform,
    /// Report objective at the start of the step (before `T_k`); see [`report_weights`].
    pub loss_before: LossBreakdown,
    /// Report objective after applying `T_k`.
    pub loss: LossBreakdown,
    pub inner_iterations: usize,
    /// `|∂L/∂ξᵢ|` of the report objective at the start of the step, `[v, ω]`.
    pub gradient_norms: [f64; 6],
    /// `∂²L/∂ξᵢ²` of the report objective at the start of the step; near-zero
    /// entries flag directions the scene does not constrain.
    pub curvature: [f64; 6],
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub final_transform: RigidTransform,
    pub per_outer_step: Vec<OuterStep>,
    pub converged: bool,
    pub wall_time: Duration,
}

impl SolverReport {
    /// Per-axis curvature of the report objective at the last estimate.
    pub fn final_curvature(&self) -> [f64; 6] {
        self.per_outer_step.last().map(|s| s.curvature).unwrap_or([0.0; 6])
    }
}

/// Weights of the objective used to accept or reject outer steps, evaluated
/// on each step's re-rendered working cloud. They do not change across outer
/// steps, unlike the ramped stage weights.
pub fn report_weights() -> LossWeights {
    LossWeights {
        alpha_ph: 0.0,
        beta_dist: 1.0,
        distance_kind: DistanceKind::Chamfer,
        centroids: 128,
    }
}

pub fn calibrate(
    source_cloud: &PointCloud,
    target_map: &SparseDepthMap,
    k: &CameraIntrinsics,
    initial: &RigidTransform,
    cfg: &SolverConfig,
) -> Result<SolverReport> {
    calibrate_inner(source_cloud, None, target_map, k, initial, cfg)
}

/// As [`calibrate`], with `expected` index-aligned to `source_cloud` so the
/// centroid-ICP distance can be used.
pub fn calibrate_with_correspondence(
    source_cloud: &PointCloud,
    expected: &PointCloud,
    target_map: &SparseDepthMap,
    k: &CameraIntrinsics,
    initial: &RigidTransform,
    cfg: &SolverConfig,
) -> Result<SolverReport> {
    if expected.len() != source_cloud.len() {
        return Err(Error::CorrespondenceUnavailable(source_cloud.len(), expected.len()));
    }
    calibrate_inner(source_cloud, Some(expected), target_map, k, initial, cfg)
}

fn calibrate_inner(
    source_cloud: &PointCloud,
    expected: Option<&PointCloud>,
    target_map: &SparseDepthMap,
    k: &CameraIntrinsics,
    initial: &RigidTransform,
    cfg: &SolverConfig,
) -> Result<SolverReport> {
    let started = Instant::now();
    cfg.validate()?;
    k.validate()?;
    target_map.matches_camera(k)?;
    if source_cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if target_map.valid_count() == 0 {
        return Err(Error::EmptyDepthMap);
    }
    let needs_icp = cfg
        .stage_schedule
        .iter()
        .any(|s| s.weights.distance_kind == DistanceKind::CentroidIcp && s.weights.beta_dist > 0.0);
    if needs_icp && expected.is_none() {
        return Err(Error::CorrespondenceUnavailable(source_cloud.len(), 0));
    }

    // Working set: source points visible in the initial map.
    let initial_cloud = source_cloud.transformed(initial);
    let mut visible: Vec<usize> = scatter_records(&initial_cloud, k).iter().map(|r| r.source).collect();
    if visible.is_empty() {
        return Err(Error::NoPointsInView);
    }
    if visible.len() > cfg.max_working_points {
        let mut rng = stream_rng(cfg.seed, 0);
        let mut picked: Vec<usize> = sample(&mut rng, visible.len(), cfg.max_working_points).into_vec();
        picked.sort_unstable();
        visible = picked.into_iter().map(|i| visible[i]).collect();
    }
    let base = source_cloud.select(&visible);
    let expected = expected.map(|e| e.select(&visible));

    let objective_at = |estimate: &RigidTransform| -> Result<Objective> {
        let pts = base.transformed(estimate);
        let order = render_order(pts.points(), k);
        if order.is_empty() {
            return Err(Error::NoPointsInView);
        }
        let working = order.iter().map(|&i| pts.points()[i]).collect();
        let exp = expected.as_ref().map(|e| order.iter().map(|&i| e.points()[i]).collect());
        Objective::new(k, working, exp, target_map, cfg.pool_window)
    };

    let photometric_only = cfg.stage_schedule.iter().all(|s| s.weights.beta_dist == 0.0);
    let report_w = report_weights();

    let mut estimate = *initial;
    let mut obj = objective_at(&estimate)?;
    if photometric_only && obj.photometric(&RigidTransform::identity()).1 == 0 {
        return Err(Error::UndefinedObjective);
    }
    let mut current = obj.evaluate(&Se3Params::zero(), &report_w)?;
    let mut steps = Vec::new();
    let mut converged = false;

    for outer in 0..cfg.max_outer_iterations {
        let (gradient_norms, curvature) = diagnostics(&obj, &report_w, cfg)?;
        let mut xi = Se3Params::zero();
        let mut inner = 0;
        for round in 0..cfg.max_schedule_rounds {
            let before = xi.to_vector();
            for (si, stage) in cfg.stage_schedule.iter().enumerate() {
                let w = stage.weights_at(outer, cfg.max_outer_iterations);
                let r = solve_stage(&obj, &xi, stage.active, &w, cfg)?;
                debug!(
                    "outer {outer} round {round} stage {si} ({:?}): loss {:.6e} after {} iterations ({} accepted)",
                    stage.active, r.loss, r.iterations, r.accepted_steps
                );
                xi = r.xi;
                inner += r.iterations;
            }
            if (xi.to_vector() - before).norm() < cfg.convergence_tol_step {
                break;
            }
        }
        let step = to_transform(&xi);

        let candidate = compose(&step, &estimate);
        let next_obj = objective_at(&candidate)?;
        let after = next_obj.evaluate(&Se3Params::zero(), &report_w)?;
        let accepted = after.combined <= current.combined;
        info!(
            "outer {outer}: |ω| = {:.4}°, |v| = {:.4} m, report loss {:.6e} -> {:.6e}{}",
            xi.omega.angle().to_degrees(),
            xi.v.norm(),
            current.combined,
            after.combined,
            if accepted { "" } else { " (rejected)" }
        );
        let small = xi.omega.angle() < cfg.identity_tol_rot && xi.v.norm() < cfg.identity_tol_trans;
        steps.push(OuterStep {
            transform: if accepted { candidate } else { estimate },
            step_transform: if accepted { step } else { RigidTransform::identity() },
            loss_before: current,
            loss: if accepted { after } else { current },
            inner_iterations: inner,
            gradient_norms,
            curvature,
            accepted,
        });
        if !accepted {
            // The schedule is deterministic, so retrying would propose the same
            // step. The step actually applied is the identity, which meets the
            // stopping rule; the rejection stays visible in the last step.
            converged = true;
            break;
        }
        estimate = candidate;
        obj = next_obj;
        current = after;
        if small {
            converged = true;
            break;
        }
    }

    Ok(SolverReport {
        final_transform: estimate,
        per_outer_step: steps,
        converged,
        wall_time: started.elapsed(),
    })
}

/// Indices of the points that win the z-buffer when `points` is rendered,
/// in row-major pixel order (the order `lift` produces for the target).
fn render_order(points: &[Vector3<f64>], k: &CameraIntrinsics) -> Vec<usize> {
    let cloud = PointCloud::from_parts_unchecked(points.to_vec(), None);
    let mut records = scatter_records(&cloud, k);
    records.sort_unstable_by_key(|r| (r.row, r.col));
    records.into_iter().map(|r| r.source).collect()
}

/// Spreads the low 21 bits of `x` to every third bit.
fn spread_bits(x: u64) -> u64 {
    let mut x = x & 0x1f_ffff;
    x = (x | x << 32) & 0x1f00000000ffff;
    x = (x | x << 16) & 0x1f0000ff0000ff;
    x = (x | x << 8) & 0x100f00f00f00f00f;
    x = (x | x << 4) & 0x10c30c30c30c30c3;
    x = (x | x << 2) & 0x1249249249249249;
    x
}

/// Stable order of the points along a Morton curve over a voxel grid, so
/// that contiguous chunks are spatially compact.
fn spatial_order(points: &[Vector3<f64>], voxel: f64) -> Vec<usize> {
    let cell = |x: f64| ((x / voxel).floor() as i64 + (1 << 20)).clamp(0, (1 << 21) - 1) as u64;
    let mut keyed: Vec<(u64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (spread_bits(cell(p.x)) | spread_bits(cell(p.y)) << 1 | spread_bits(cell(p.z)) << 2, i))
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Per-axis first and second central differences of the objective at `ξ = 0`.
/// The step is ten times the solver's step to stay above rasterization noise.
fn diagnostics(obj: &Objective, w: &LossWeights, cfg: &SolverConfig) -> Result<([f64; 6], [f64; 6])> {
    let problem = obj.at(&Se3Params::zero());
    let f0 = problem.value(&Vector6::zeros(), w)?;
    let mut grad = [0.0; 6];
    let mut curv = [0.0; 6];
    for i in 0..6 {
        let h = 10.0 * cfg.fd_step(i);
        let mut x = Vector6::zeros();
        x[i] = h;
        let fp = problem.value(&x, w)?;
        x[i] = -h;
        let fm = problem.value(&x, w)?;
        grad[i] = ((fp - fm) / (2.0 * h)).abs();
        curv[i] = (fp - 2.0 * f0 + fm) / (h * h);
    }
    Ok((grad, curv))
}
