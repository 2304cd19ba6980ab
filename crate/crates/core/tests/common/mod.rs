//! Independent reference implementations used as test oracles. None of these
//! call into the code under test beyond constructing its value types.
#![allow(dead_code)]

use lidcam_core::depthmap::NO_DATA;
use lidcam_core::{PointCloud, RigidTransform, SparseDepthMap};
use nalgebra::{Matrix3, Matrix4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, half: f64) -> f64 {
    half * (2.0 * rng.random::<f64>() - 1.0)
}

pub fn random_vector(rng: &mut impl Rng, half: f64) -> Vector3<f64> {
    Vector3::new(uniform(rng, half), uniform(rng, half), uniform(rng, half))
}

/// Uniform direction scaled to `angle`.
pub fn random_rotation_vector(rng: &mut impl Rng, angle: f64) -> Vector3<f64> {
    loop {
        let d = random_vector(rng, 1.0);
        let n = d.norm();
        if n > 1e-3 && n <= 1.0 {
            return d * (angle / n);
        }
    }
}

pub fn random_cloud(rng: &mut impl Rng, n: usize, half: f64) -> PointCloud {
    PointCloud::new((0..n).map(|_| random_vector(rng, half)).collect()).unwrap()
}

/// Matrix exponential of the cross-product matrix of `w` by a `terms`-term
/// Taylor series. The argument is first scaled by 2⁻ˢ until its norm is
/// below ½ and the result squared `s` times, so truncation stays far below
/// 1e-12 even at angles near π (a plain 20-term series is off by ~4e-9 there).
pub fn taylor_exp(w: &Vector3<f64>, terms: usize) -> Matrix3<f64> {
    let mut s = 0;
    while w.norm() / f64::powi(2.0, s) > 0.5 {
        s += 1;
    }
    let w = w / f64::powi(2.0, s);
    let a = Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0);
    let mut term = Matrix3::identity();
    let mut sum = Matrix3::identity();
    for k in 1..terms {
        term = term * a / k as f64;
        sum += term;
    }
    for _ in 0..s {
        sum = sum * sum;
    }
    sum
}

pub fn homogeneous(t: &RigidTransform) -> Matrix4<f64> {
    let r = t.rotation.matrix();
    let mut m = Matrix4::identity();
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j)] = r[(i, j)];
        }
        m[(i, 3)] = t.translation[i];
    }
    m
}

/// `Σ_x min_y ‖x−y‖² + Σ_y min_x ‖x−y‖²` by exhaustive scan.
pub fn brute_chamfer(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    let one = |p: &[Vector3<f64>], q: &[Vector3<f64>]| -> f64 {
        p.iter()
            .map(|x| q.iter().map(|y| (x - y).norm_squared()).fold(f64::INFINITY, f64::min))
            .sum()
    };
    one(a, b) + one(b, a)
}

/// Heap's algorithm over all `n!` bijections.
pub fn brute_emd(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let cost = |p: &[usize]| -> f64 { (0..n).map(|i| (a[i] - b[p[i]]).norm()).sum() };
    let mut best = cost(&perm);
    let mut c = vec![0; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(cost(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

/// Chunk means over `[i·n/k, (i+1)·n/k)`, written out longhand.
pub fn chunk_means(p: &[Vector3<f64>], k: usize) -> Vec<Vector3<f64>> {
    let n = p.len();
    let mut out = Vec::new();
    for i in 0..k {
        let (lo, hi) = (i * n / k, (i + 1) * n / k);
        let mut s = Vector3::zeros();
        for q in &p[lo..hi] {
            s += q;
        }
        out.push(s / (hi - lo) as f64);
    }
    out
}

/// `½ Σ ‖e_i − (R·m_i + t)‖²` over chunk means, transforming each point via 4×4 matrices.
pub fn pointwise_icp(miscalib: &[Vector3<f64>], expected: &[Vector3<f64>], t: &RigidTransform, k: usize) -> f64 {
    let m = homogeneous(t);
    let a = chunk_means(miscalib, k);
    let b = chunk_means(expected, k);
    let mut s = 0.0;
    for (x, y) in a.iter().zip(&b) {
        let h = m * x.push(1.0);
        s += (y - Vector3::new(h.x, h.y, h.z)).norm_squared();
    }
    0.5 * s
}

/// Max over the clipped window centred with offset `(window−1)/2`, cell by cell.
pub fn brute_max_pool(m: &SparseDepthMap, window: u32, stride: u32) -> Vec<f64> {
    let (w, h) = (m.width() as i64, m.height() as i64);
    let (ow, oh) = ((w + stride as i64 - 1) / stride as i64, (h + stride as i64 - 1) / stride as i64);
    let pad = (window as i64 - 1) / 2;
    let mut out = Vec::new();
    for orow in 0..oh {
        for ocol in 0..ow {
            let mut best = NO_DATA;
            for r in orow * stride as i64 - pad..orow * stride as i64 - pad + window as i64 {
                for c in ocol * stride as i64 - pad..ocol * stride as i64 - pad + window as i64 {
                    if r >= 0 && r < h && c >= 0 && c < w {
                        best = f64::max(best, m.get(r as u32, c as u32));
                    }
                }
            }
            out.push(best);
        }
    }
    out
}

/// Central difference of `f` along each of the six coordinates of `x`.
pub fn central_difference(f: &dyn Fn(&[f64; 6]) -> f64, x: &[f64; 6], h: f64) -> [f64; 6] {
    let mut g = [0.0; 6];
    for i in 0..6 {
        let (mut a, mut b) = (*x, *x);
        a[i] += h;
        b[i] -= h;
        g[i] = (f(&a) - f(&b)) / (2.0 * h);
    }
    g
}
