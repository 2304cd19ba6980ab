use kiddo::immutable::float::kdtree::ImmutableKdTree;
use kiddo::SquaredEuclidean;
use nalgebra::Vector3;

use crate::camera::PointCloud;
use crate::error::{Error, Result};

/// Static nearest-neighbor index over a point set.
pub struct NearestNeighborIndex {
    tree: ImmutableKdTree<f64, u32, 3, 32>,
    points: Vec<Vector3<f64>>,
}

impl NearestNeighborIndex {
    pub fn new(points: &[Vector3<f64>]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let coords: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        Ok(Self {
            tree: ImmutableKdTree::new_from_slice(&coords),
            points: points.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the nearest stored point and its squared distance.
    #[inline]
    pub fn nearest(&self, q: &Vector3<f64>) -> (usize, f64) {
        let nn = self.tree.nearest_one::<SquaredEuclidean>(&[q.x, q.y, q.z]);
        let i = nn.item as usize;
        (i, (self.points[i] - q).norm_squared())
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }
}

/// Sum over `queries` of the squared distance to the nearest indexed point.
pub fn one_sided_chamfer(queries: &[Vector3<f64>], index: &NearestNeighborIndex) -> f64 {
    queries.iter().map(|q| index.nearest(q).1).sum()
}

/// Symmetric Chamfer distance: Σ_x min_y ‖x-y‖² + Σ_y min_x ‖x-y‖².
pub fn chamfer_distance(s1: &PointCloud, s2: &PointCloud) -> Result<f64> {
    if s1.is_empty() || s2.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let i1 = NearestNeighborIndex::new(s1.points())?;
    let i2 = NearestNeighborIndex::new(s2.points())?;
    Ok(one_sided_chamfer(s1.points(), &i2) + one_sided_chamfer(s2.points(), &i1))
}
