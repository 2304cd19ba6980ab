mod common;

use std::f64::consts::PI;

use lidcam_core::lie::{compose, exp_so3, hat, inverse, log_so3, to_transform, ROTATION_TOLERANCE, SMALL_ANGLE};
use lidcam_core::{RigidTransform, Se3Params, So3Vector};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

use common::{homogeneous, rng, taylor_exp};

fn vec3(max: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-max..max, -max..max, -max..max).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn transform() -> impl Strategy<Value = RigidTransform> {
    (vec3(5.0), vec3(1.8)).prop_map(|(v, w)| to_transform(&Se3Params::new(v, w).unwrap()))
}

fn close(a: &RigidTransform, b: &RigidTransform, tol: f64) -> bool {
    (homogeneous(a) - homogeneous(b)).norm() < tol
}

#[test]
fn exp_matches_taylor_oracle() {
    let w = Vector3::new(0.1, 0.2, 0.3);
    let r = exp_so3(&So3Vector::new(w).unwrap());
    assert!((r.matrix() - taylor_exp(&w, 20)).norm() < 1e-12);
}

#[test]
fn compose_and_inverse_match_homogeneous_oracle() {
    use rand::Rng;
    let mut rng = rng(1);
    for _ in 0..100 {
        let mut draw = || {
            let v = Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let w = Vector3::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
            to_transform(&Se3Params::new(v, w).unwrap())
        };
        let (a, b) = (draw(), draw());
        let ab = homogeneous(&a) * homogeneous(&b);
        assert!((homogeneous(&compose(&a, &b)) - ab).norm() < 1e-12);
        let inv = homogeneous(&a).try_inverse().unwrap();
        assert!((homogeneous(&inverse(&a)) - inv).norm() < 1e-12);
    }
}

#[test]
fn hat_examples() {
    let m = hat(&So3Vector::from_xyz(1.0, 2.0, 3.0).unwrap());
    assert_eq!(m, Matrix3::new(0.0, -3.0, 2.0, 3.0, 0.0, -1.0, -2.0, 1.0, 0.0));
    assert_eq!(hat(&So3Vector::zero()), Matrix3::zeros());
}

#[test]
fn half_turn_examples() {
    let r = exp_so3(&So3Vector::from_xyz(PI, 0.0, 0.0).unwrap());
    assert!((r.matrix() - Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0))).norm() < 1e-12);
    let w = log_so3(&r);
    assert!((w.vector().abs() - Vector3::new(PI, 0.0, 0.0)).norm() < 1e-9);
    let t = to_transform(&Se3Params::new(Vector3::zeros(), Vector3::new(PI, 0.0, 0.0)).unwrap());
    assert_eq!(t.translation, Vector3::zeros());
}

#[test]
fn compose_with_inverse_is_identity() {
    let t = to_transform(&Se3Params::new(Vector3::new(1.0, -2.0, 0.5), Vector3::new(0.3, -0.2, 0.9)).unwrap());
    assert!(close(&compose(&t, &inverse(&t)), &RigidTransform::identity(), 1e-9));
    assert!(close(&compose(&t, &RigidTransform::identity()), &t, 0.0 + 1e-15));
    let shift = RigidTransform::from_translation(Vector3::new(1.0, 0.0, 0.0));
    assert_eq!(inverse(&shift).translation, Vector3::new(-1.0, 0.0, 0.0));
}

proptest! {
    #[test]
    fn exp_output_is_a_rotation(w in vec3(4.0)) {
        let r = exp_so3(&So3Vector::new(w).unwrap());
        let m = r.matrix();
        prop_assert!((m.transpose() * m - Matrix3::identity()).norm() < ROTATION_TOLERANCE);
        prop_assert!((m.determinant() - 1.0).abs() < ROTATION_TOLERANCE);
    }

    #[test]
    fn log_inverts_exp(dir in vec3(1.0), frac in 0.0..1.0f64) {
        prop_assume!(dir.norm() > 1e-3);
        let w = dir.normalize() * frac * (PI - 1e-6);
        let back = log_so3(&exp_so3(&So3Vector::new(w).unwrap()));
        prop_assert!((back.vector() - w).norm() < 1e-9);
        prop_assert!(back.angle() <= PI);
    }

    #[test]
    fn exp_is_continuous_across_the_small_angle_switch(dir in vec3(1.0)) {
        prop_assume!(dir.norm() > 1e-3);
        let u = dir.normalize();
        let below = exp_so3(&So3Vector::new(u * (SMALL_ANGLE - 1e-12)).unwrap());
        let above = exp_so3(&So3Vector::new(u * (SMALL_ANGLE + 1e-12)).unwrap());
        prop_assert!((below.matrix() - above.matrix()).norm() < 1e-10);
    }

    #[test]
    fn compose_is_associative(a in transform(), b in transform(), c in transform()) {
        prop_assert!(close(&compose(&compose(&a, &b), &c), &compose(&a, &compose(&b, &c)), 1e-12));
    }

    #[test]
    fn inverse_cancels(t in transform()) {
        prop_assert!(close(&compose(&t, &inverse(&t)), &RigidTransform::identity(), 1e-9));
        prop_assert!(close(&compose(&inverse(&t), &t), &RigidTransform::identity(), 1e-9));
    }

    #[test]
    fn to_transform_applies_r_p_plus_t(v in vec3(5.0), w in vec3(3.0), p in vec3(20.0)) {
        let xi = Se3Params::new(v, w).unwrap();
        let t = to_transform(&xi);
        let r = exp_so3(&xi.omega);
        prop_assert_eq!(t.apply(&p), r.matrix() * p + v);
        prop_assert_eq!(t.translation, v);
    }
}
