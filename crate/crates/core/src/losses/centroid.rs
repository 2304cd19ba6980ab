use nalgebra::Vector3;

use crate::camera::PointCloud;
use crate::error::{Error, Result};
use crate::lie::RigidTransform;

/// Splits the cloud, in its stored order, into `k` contiguous chunks of
/// near-equal size and returns the chunk means. Chunk `i` covers
/// `[i·n/k, (i+1)·n/k)`.
pub fn cluster_centroids(c: &PointCloud, k: usize) -> Result<PointCloud> {
    Ok(PointCloud::from_parts_unchecked(chunk_means(c.points(), k)?, None))
}

pub(crate) fn chunk_means(points: &[Vector3<f64>], k: usize) -> Result<Vec<Vector3<f64>>> {
    let n = points.len();
    if k == 0 || n < k {
        return Err(Error::TooFewPoints { n, k });
    }
    Ok((0..k)
        .map(|i| {
            let chunk = &points[i * n / k..(i + 1) * n / k];
            chunk.iter().sum::<Vector3<f64>>() / chunk.len() as f64
        })
        .collect())
}

/// `½ Σ ‖X_exp - (R·X_miscalib + t)‖²` over corresponding cluster centers of
/// the index-corresponded clouds `miscalib` and `expected`.
pub fn centroid_icp_distance(
    miscalib: &PointCloud,
    expected: &PointCloud,
    t: &RigidTransform,
    cluster_count: usize,
) -> Result<f64> {
    if miscalib.len() != expected.len() {
        return Err(Error::CorrespondenceUnavailable(miscalib.len(), expected.len()));
    }
    let a = chunk_means(miscalib.points(), cluster_count)?;
    let b = chunk_means(expected.points(), cluster_count)?;
    Ok(0.5 * a.iter().zip(&b).map(|(x, y)| (y - t.apply(x)).norm_squared()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> PointCloud {
        PointCloud::new((0..n).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect()).unwrap()
    }

    #[test]
    fn centroid_examples() {
        let c = line(8);
        assert_eq!(cluster_centroids(&c, 8).unwrap().points(), c.points());
        assert_eq!(cluster_centroids(&c, 1).unwrap().points(), &[Vector3::new(3.5, 0.0, 0.0)]);
        assert_eq!(
            cluster_centroids(&c, 2).unwrap().points(),
            &[Vector3::new(1.5, 0.0, 0.0), Vector3::new(5.5, 0.0, 0.0)]
        );
        let uneven = cluster_centroids(&line(10), 3).unwrap();
        assert_eq!(uneven.len(), 3);
        assert!(matches!(cluster_centroids(&c, 9), Err(Error::TooFewPoints { n: 8, k: 9 })));
        assert!(cluster_centroids(&c, 0).is_err());
    }

    #[test]
    fn icp_examples() {
        let a = line(4);
        let t = RigidTransform::from_translation(Vector3::new(0.0, 2.0, 0.0));
        let b = a.transformed(&t);
        assert_eq!(centroid_icp_distance(&a, &b, &t, 2).unwrap(), 0.0);
        let d = centroid_icp_distance(&a, &b, &RigidTransform::identity(), 1).unwrap();
        assert_eq!(d, 2.0);
        assert!(matches!(
            centroid_icp_distance(&a, &line(5), &t, 1),
            Err(Error::CorrespondenceUnavailable(4, 5))
        ));
    }
}
