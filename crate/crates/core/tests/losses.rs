mod common;

use lidcam_core::datagen::{default_camera, synth_scene, SceneKind};
use lidcam_core::lie::to_transform;
use lidcam_core::losses::{
    centroid_icp_distance, chamfer_distance, cluster_centroids, combined_loss, emd_distance, photometric_loss,
    DistanceKind, LossWeights,
};
use lidcam_core::solver::{loss_gradient, GradientMode, Objective, ParamSet, SolverConfig};
use lidcam_core::transformer::{lift, scatter};
use lidcam_core::{Error, PointCloud, Se3Params, SparseDepthMap};
use nalgebra::{Vector3, Vector6};

use common::{brute_chamfer, brute_emd, chunk_means, pointwise_icp, random_cloud, random_vector, rng};

fn cloud(points: &[[f64; 3]]) -> PointCloud {
    PointCloud::new(points.iter().map(|p| Vector3::from(*p)).collect()).unwrap()
}

fn xi(v: Vector3<f64>, w: Vector3<f64>) -> Se3Params {
    Se3Params::new(v, w).unwrap()
}

#[test]
fn chamfer_examples() {
    let a = cloud(&[[0.0, 0.0, 0.0]]);
    let b = cloud(&[[1.0, 0.0, 0.0]]);
    assert_eq!(chamfer_distance(&a, &b).unwrap(), 2.0);
    assert_eq!(chamfer_distance(&a, &a).unwrap(), 0.0);
    // Two points to one: 1 + 1 forward, nearest of the pair backward.
    let two = cloud(&[[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]]);
    assert_eq!(chamfer_distance(&two, &a).unwrap(), 3.0);
    assert!(matches!(chamfer_distance(&PointCloud::empty(), &a), Err(Error::EmptyCloud)));
}

#[test]
fn chamfer_matches_brute_force() {
    let mut rng = rng(11);
    for n in [1, 5, 40, 300] {
        let a = random_cloud(&mut rng, n, 5.0);
        let b = random_cloud(&mut rng, n + 7, 5.0);
        let fast = chamfer_distance(&a, &b).unwrap();
        let slow = brute_chamfer(a.points(), b.points());
        assert!((fast - slow).abs() <= 1e-9 * slow.max(1.0));
    }
}

#[test]
fn emd_examples() {
    let a = cloud(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
    let b = cloud(&[[1.0, 1.0, 0.0], [0.0, 1.0, 0.0]]);
    let r = emd_distance(&a, &b).unwrap();
    assert!((r.cost - 2.0).abs() < 1e-12);
    assert_eq!(r.assignment, vec![1, 0]);
    assert!(r.exact);
    assert_eq!(emd_distance(&a, &a).unwrap().cost, 0.0);
    assert!(emd_distance(&a, &cloud(&[[0.0; 3]])).is_err());
}

#[test]
fn emd_matches_permutation_oracle() {
    let mut rng = rng(12);
    for n in 1..=7 {
        for _ in 0..5 {
            let a = random_cloud(&mut rng, n, 3.0);
            let b = random_cloud(&mut rng, n, 3.0);
            let r = emd_distance(&a, &b).unwrap();
            assert!((r.cost - brute_emd(a.points(), b.points())).abs() < 1e-9);
            // The assignment is a bijection whose cost is the reported one.
            let mut seen = r.assignment.clone();
            seen.sort_unstable();
            assert_eq!(seen, (0..n).collect::<Vec<_>>());
            let cost: f64 = r.assignment.iter().enumerate().map(|(i, &j)| (a.points()[i] - b.points()[j]).norm()).sum();
            assert!((cost - r.cost).abs() < 1e-9);
        }
    }
}

#[test]
fn centroid_icp_matches_pointwise_oracle() {
    let mut rng = rng(13);
    for _ in 0..20 {
        let a = random_cloud(&mut rng, 257, 10.0);
        let b = random_cloud(&mut rng, 257, 10.0);
        let t = to_transform(&xi(random_vector(&mut rng, 1.0), random_vector(&mut rng, 0.5)));
        for k in [1, 7, 128, 257] {
            let fast = centroid_icp_distance(&a, &b, &t, k).unwrap();
            let slow = pointwise_icp(a.points(), b.points(), &t, k);
            assert!((fast - slow).abs() <= 1e-9 * slow.max(1.0));
        }
    }
}

#[test]
fn centroid_errors() {
    let a = cloud(&[[0.0; 3], [1.0, 0.0, 0.0]]);
    let b = cloud(&[[0.0; 3]]);
    let id = lidcam_core::RigidTransform::identity();
    assert!(matches!(centroid_icp_distance(&a, &b, &id, 1), Err(Error::CorrespondenceUnavailable(2, 1))));
    assert!(matches!(cluster_centroids(&a, 3), Err(Error::TooFewPoints { n: 2, k: 3 })));
    assert!(matches!(cluster_centroids(&a, 0), Err(Error::TooFewPoints { .. })));
    let c = random_cloud(&mut rng(14), 10, 1.0);
    assert_eq!(cluster_centroids(&c, 3).unwrap().points(), chunk_means(c.points(), 3).as_slice());
}

#[test]
fn photometric_uses_shared_pixels_only() {
    let pred = SparseDepthMap::from_values(3, 1, vec![2.0, 0.0, 4.0]).unwrap();
    let target = SparseDepthMap::from_values(3, 1, vec![3.0, 5.0, 0.0]).unwrap();
    let p = photometric_loss(&pred, &target).unwrap();
    assert_eq!((p.loss, p.overlap), (0.5, 1));
    let none = photometric_loss(&pred, &SparseDepthMap::empty(3, 1)).unwrap();
    assert_eq!((none.loss, none.overlap), (0.0, 0));
    assert!(photometric_loss(&pred, &SparseDepthMap::empty(2, 1)).is_err());
}

#[test]
fn combined_loss_is_the_weighted_sum() {
    let pred_map = SparseDepthMap::from_values(2, 1, vec![2.0, 6.0]).unwrap();
    let target_map = SparseDepthMap::from_values(2, 1, vec![3.0, 4.0]).unwrap();
    let a = cloud(&[[0.0, 0.0, 1.0], [0.0, 2.0, 1.0]]);
    let b = cloud(&[[1.0, 0.0, 1.0], [0.0, 2.0, 2.0]]);
    let w = LossWeights::new(1.0, 0.15, DistanceKind::Chamfer).unwrap();
    let l = combined_loss(&pred_map, &target_map, &a, &b, &w).unwrap();
    let photo = 0.5 * (1.0 + 4.0) / 2.0;
    let dist = brute_chamfer(a.points(), b.points());
    assert_eq!(l.photometric, photo);
    assert_eq!(l.distance, dist);
    assert!((l.combined - (photo + 0.15 * dist)).abs() < 1e-15);
    assert_eq!(l.valid_pixel_overlap, 2);

    // A zero distance weight skips the term, so mismatched clouds are fine.
    let photo_only = LossWeights::new(1.0, 0.0, DistanceKind::CentroidIcp).unwrap();
    assert_eq!(combined_loss(&pred_map, &target_map, &a, &PointCloud::empty(), &photo_only).unwrap().combined, photo);
}

#[test]
fn loss_weights_validation() {
    assert!(LossWeights::new(0.0, 0.0, DistanceKind::Chamfer).is_err());
    assert!(LossWeights::new(-1.0, 1.0, DistanceKind::Chamfer).is_err());
    assert!(LossWeights::new(1.0, f64::NAN, DistanceKind::Chamfer).is_err());
    assert!(LossWeights::new(1.0, 0.0, DistanceKind::Emd).unwrap().with_centroids(0).validate().is_err());
    assert_eq!("icp".parse::<DistanceKind>().unwrap(), DistanceKind::CentroidIcp);
    assert!("hausdorff".parse::<DistanceKind>().is_err());
}

// Gradients through the solver's objective.

fn provided_and_fd(obj: &Objective, at: &Se3Params, w: &LossWeights) -> (Vector6<f64>, Vector6<f64>) {
    let problem = obj.at(&Se3Params::zero());
    let mut cfg = SolverConfig {
        gradient_mode: GradientMode::Provided,
        fd_step_rot: 1e-6,
        fd_step_trans: 1e-6,
        ..SolverConfig::default()
    };
    let provided = loss_gradient(&problem, at, w, ParamSet::All, &cfg).unwrap();
    cfg.gradient_mode = GradientMode::FiniteDifference;
    let fd = loss_gradient(&problem, at, w, ParamSet::All, &cfg).unwrap();
    (provided, fd)
}

/// Sparse, well separated points so nearest neighbors do not switch under
/// the finite-difference probes.
fn sparse_setup() -> (Vec<Vector3<f64>>, SparseDepthMap) {
    let k = default_camera();
    let mut rng = rng(15);
    let working: Vec<Vector3<f64>> = (0..40)
        .map(|_| {
            let mut p = random_vector(&mut rng, 6.0);
            p.z += 14.0;
            p.x *= 0.5;
            p.y *= 0.2;
            p
        })
        .collect();
    let shift = to_transform(&xi(Vector3::new(0.03, -0.02, 0.05), Vector3::new(0.01, -0.02, 0.015)));
    let target = scatter(&PointCloud::new(working.clone()).unwrap().transformed(&shift), &k);
    (working, target)
}

#[test]
fn chamfer_gradient_matches_finite_differences() {
    let (working, target) = sparse_setup();
    let obj = Objective::new(&default_camera(), working, None, &target, 5).unwrap();
    let w = LossWeights::new(0.0, 1.0, DistanceKind::Chamfer).unwrap();
    let at = xi(Vector3::new(0.01, 0.0, -0.01), Vector3::new(0.002, 0.001, -0.003));
    let (provided, fd) = provided_and_fd(&obj, &at, &w);
    assert!((provided - fd).norm() < 1e-4 * fd.norm(), "{provided:?} vs {fd:?}");
}

#[test]
fn icp_gradient_matches_finite_differences() {
    let (working, target) = sparse_setup();
    let mut rng = rng(16);
    let expected: Vec<_> = working.iter().map(|p| p + random_vector(&mut rng, 0.1)).collect();
    let obj = Objective::new(&default_camera(), working, Some(expected), &target, 5).unwrap();
    let w = LossWeights::new(0.0, 1.0, DistanceKind::CentroidIcp).unwrap().with_centroids(8);
    let at = xi(Vector3::new(0.02, -0.01, 0.03), Vector3::new(-0.01, 0.02, 0.005));
    let (provided, fd) = provided_and_fd(&obj, &at, &w);
    assert!((provided - fd).norm() < 1e-4 * fd.norm(), "{provided:?} vs {fd:?}");
}

#[test]
fn gradient_vanishes_at_the_optimum() {
    let k = default_camera();
    let target = scatter(&synth_scene(SceneKind::GroundPlaneBoxes, 3000, 1).unwrap(), &k);
    let working = lift(&target, &k).unwrap().points().to_vec();
    let obj = Objective::new(&k, working, None, &target, 5).unwrap();
    for kind in [DistanceKind::Chamfer, DistanceKind::Emd] {
        let w = LossWeights::new(0.0, 1.0, kind).unwrap().with_centroids(64);
        let problem = obj.at(&Se3Params::zero());
        let g = loss_gradient(&problem, &Se3Params::zero(), &w, ParamSet::All, &SolverConfig::default()).unwrap();
        assert!(g.norm() < 1e-6, "{kind}: {g:?}");
        assert!(obj.evaluate(&Se3Params::zero(), &w).unwrap().distance < 1e-9);
    }
}

#[test]
fn inactive_coordinates_have_zero_gradient() {
    let (working, target) = sparse_setup();
    let obj = Objective::new(&default_camera(), working, None, &target, 5).unwrap();
    let w = LossWeights::new(1.0, 0.15, DistanceKind::Chamfer).unwrap();
    let problem = obj.at(&Se3Params::zero());
    let cfg = SolverConfig::default();
    let g = loss_gradient(&problem, &Se3Params::zero(), &w, ParamSet::Rotation, &cfg).unwrap();
    assert_eq!([g[0], g[1], g[2]], [0.0; 3]);
    let g = loss_gradient(&problem, &Se3Params::zero(), &w, ParamSet::Translation, &cfg).unwrap();
    assert_eq!([g[3], g[4], g[5]], [0.0; 3]);
}
