//! Earth Mover's Distance between equal-size point sets: the minimum total
//! Euclidean displacement over bijections.
//!
//! Up to [`EMD_EXACT_CAP`] points the assignment is solved exactly with the
//! shortest-augmenting-path Hungarian method (O(n³)). Larger inputs use an
//! ε-scaling auction that stops once the primal/dual gap is within
//! [`EMD_MAX_RELATIVE_GAP`] of the primal cost.

use nalgebra::Vector3;

use crate::camera::PointCloud;
use crate::error::{Error, Result};

pub const EMD_EXACT_CAP: usize = 512;
pub const EMD_MAX_RELATIVE_GAP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct EmdResult {
    pub cost: f64,
    /// `assignment[i]` is the index in the second cloud matched to point `i`.
    pub assignment: Vec<usize>,
    pub exact: bool,
    /// `(primal - dual) / primal`; zero for the exact solver.
    pub relative_gap: f64,
}

pub fn emd_distance(s1: &PointCloud, s2: &PointCloud) -> Result<EmdResult> {
    emd_points(s1.points(), s2.points())
}

pub(crate) fn emd_points(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> Result<EmdResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(a.len(), b.len()));
    }
    if a.len() <= EMD_EXACT_CAP {
        let n = a.len();
        let mut cost = vec![0.0; n * n];
        for (i, p) in a.iter().enumerate() {
            for (j, q) in b.iter().enumerate() {
                cost[i * n + j] = (p - q).norm();
            }
        }
        let assignment = solve_assignment(n, &cost);
        let total = assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
        Ok(EmdResult {
            cost: total,
            assignment,
            exact: true,
            relative_gap: 0.0,
        })
    } else {
        Ok(auction(a, b, EMD_MAX_RELATIVE_GAP))
    }
}

/// Minimum-cost perfect matching on a dense `n × n` row-major cost matrix.
/// Returns the column assigned to each row.
pub fn solve_assignment(n: usize, cost: &[f64]) -> Vec<usize> {
    assert_eq!(cost.len(), n * n, "cost matrix must be n×n");
    // 1-based arrays; column 0 is the virtual source of each augmenting path.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[owner[j] - 1] = j - 1;
    }
    assignment
}

/// Gauss-Seidel auction with ε-scaling. Costs are computed on the fly so the
/// memory footprint stays linear in `n`.
fn auction(a: &[Vector3<f64>], b: &[Vector3<f64>], max_gap: f64) -> EmdResult {
    let n = a.len();
    let cost = |i: usize, j: usize| (a[i] - b[j]).norm();
    let max_cost = a
        .iter()
        .zip(b)
        .map(|(p, q)| (p - q).norm())
        .fold(0.0f64, f64::max)
        .max(1e-12);

    let mut prices = vec![0.0; n];
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut assigned: Vec<Option<usize>> = vec![None; n];
    let mut eps = max_cost / 4.0;
    let min_eps = max_cost * 1e-9 / n as f64;

    loop {
        owner.fill(None);
        assigned.fill(None);
        let mut queue: Vec<usize> = (0..n).rev().collect();
        while let Some(i) = queue.pop() {
            // Object with the lowest cost + price and the runner-up value.
            let (mut best_j, mut best, mut second) = (0, f64::INFINITY, f64::INFINITY);
            for j in 0..n {
                let val = cost(i, j) + prices[j];
                if val < best {
                    second = best;
                    best = val;
                    best_j = j;
                } else if val < second {
                    second = val;
                }
            }
            let increment = if second.is_finite() { second - best } else { 0.0 };
            prices[best_j] += increment + eps;
            if let Some(prev) = owner[best_j].replace(i) {
                assigned[prev] = None;
                queue.push(prev);
            }
            assigned[i] = Some(best_j);
        }

        let assignment: Vec<usize> = assigned.iter().map(|j| j.unwrap_or(0)).collect();
        let primal: f64 = assignment.iter().enumerate().map(|(i, &j)| cost(i, j)).sum();
        // Dual bound: Σ_i min_j (c_ij + p_j) - Σ_j p_j ≤ optimum.
        let dual: f64 = (0..n)
            .map(|i| (0..n).map(|j| cost(i, j) + prices[j]).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            - prices.iter().sum::<f64>();
        let gap = if primal > 0.0 { ((primal - dual) / primal).max(0.0) } else { 0.0 };
        if gap <= max_gap || eps <= min_eps {
            return EmdResult {
                cost: primal,
                assignment,
                exact: false,
                relative_gap: gap,
            };
        }
        eps /= 5.0;
    }
}
