//! Sparse depth maps and the preprocessing applied to them: validity masks,
//! min/max normalization to ±1 and same-padded max-pooling.

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};

/// Depth value marking a pixel with no LiDAR return. Real returns are always
/// strictly positive, so zero is never a valid depth.
pub const NO_DATA: f64 = 0.0;

/// Row-major H×W grid of metric depths.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDepthMap {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl SparseDepthMap {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            values: vec![NO_DATA; width as usize * height as usize],
        }
    }

    pub fn for_camera(k: &CameraIntrinsics) -> Self {
        Self::empty(k.width, k.height)
    }

    pub fn from_values(width: u32, height: u32, values: Vec<f64>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::InvalidArgument(format!(
                "{} values for a {width}x{height} map",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|&d| d != NO_DATA && !(d.is_finite() && d > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "pixel {i} holds invalid depth {}",
                values[i]
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: u32, col: u32) -> f64 {
        self.values[row as usize * self.width as usize + col as usize]
    }

    #[inline]
    pub fn is_valid(&self, row: u32, col: u32) -> bool {
        self.get(row, col) != NO_DATA
    }

    /// Sets a pixel; `depth` must be positive and finite or `NO_DATA`.
    pub fn set(&mut self, row: u32, col: u32, depth: f64) -> Result<()> {
        if row >= self.height || col >= self.width {
            return Err(Error::InvalidArgument(format!(
                "pixel ({row}, {col}) outside {}x{}",
                self.width, self.height
            )));
        }
        if depth != NO_DATA && !(depth.is_finite() && depth > 0.0) {
            return Err(Error::InvalidArgument(format!("invalid depth {depth}")));
        }
        let w = self.width as usize;
        self.values[row as usize * w + col as usize] = depth;
        Ok(())
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|&&d| d != NO_DATA).count()
    }

    /// Row-major iterator over `(row, col, depth)` of valid pixels.
    pub fn valid_pixels(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        let w = self.width as usize;
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &d)| d != NO_DATA)
            .map(move |(i, &d)| ((i / w) as u32, (i % w) as u32, d))
    }

    pub fn same_shape(&self, other: &SparseDepthMap) -> Result<()> {
        if self.width == other.width && self.height == other.height {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                left_w: self.width,
                left_h: self.height,
                right_w: other.width,
                right_h: other.height,
            })
        }
    }

    pub fn matches_camera(&self, k: &CameraIntrinsics) -> Result<()> {
        if self.width == k.width && self.height == k.height {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                left_w: self.width,
                left_h: self.height,
                right_w: k.width,
                right_h: k.height,
            })
        }
    }
}

/// Boolean grid, true exactly where the map holds data.
pub fn densify_mask(m: &SparseDepthMap) -> Vec<bool> {
    m.values.iter().map(|&d| d != NO_DATA).collect()
}

/// Max-pooling over valid pixels with same padding.
///
/// Output cell `(i, j)` covers input rows `i·stride - (window-1)/2 ..` and
/// the matching columns, `window` wide, clipped to the image. Output size is
/// `ceil(input / stride)` per axis.
pub fn max_pool(m: &SparseDepthMap, window: u32, stride: u32) -> Result<SparseDepthMap> {
    if window < 1 || stride < 1 {
        return Err(Error::InvalidArgument(format!(
            "window ({window}) and stride ({stride}) must be at least 1"
        )));
    }
    let out_w = m.width.div_ceil(stride);
    let out_h = m.height.div_ceil(stride);
    let pad = ((window - 1) / 2) as i64;
    let (w, h) = (m.width as i64, m.height as i64);

    // Separable: horizontal max into a scratch grid, then vertical max.
    let mut horizontal = vec![NO_DATA; out_w as usize * m.height as usize];
    for r in 0..h {
        let row = &m.values[(r * w) as usize..((r + 1) * w) as usize];
        for oc in 0..out_w as i64 {
            let lo = (oc * stride as i64 - pad).max(0);
            let hi = (oc * stride as i64 - pad + window as i64).min(w);
            let best = (lo..hi).map(|c| row[c as usize]).fold(NO_DATA, f64::max);
            horizontal[(r * out_w as i64 + oc) as usize] = best;
        }
    }
    let mut out = vec![NO_DATA; out_w as usize * out_h as usize];
    for or in 0..out_h as i64 {
        let lo = (or * stride as i64 - pad).max(0);
        let hi = (or * stride as i64 - pad + window as i64).min(h);
        for oc in 0..out_w as usize {
            let best = (lo..hi)
                .map(|r| horizontal[r as usize * out_w as usize + oc])
                .fold(NO_DATA, f64::max);
            out[or as usize * out_w as usize + oc] = best;
        }
    }
    Ok(SparseDepthMap {
        width: out_w,
        height: out_h,
        values: out,
    })
}

/// Depth map with valid values mapped affinely from `[d_min, d_max]` to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedDepthMap {
    pub width: u32,
    pub height: u32,
    /// Normalized values; meaningful only where `mask` is true (0 elsewhere).
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
    pub d_min: f64,
    pub d_max: f64,
}

/// Per-map min/max normalization. A constant map normalizes to all zeros.
pub fn normalize(m: &SparseDepthMap) -> Result<NormalizedDepthMap> {
    let (d_min, d_max) = m
        .values
        .iter()
        .filter(|&&d| d != NO_DATA)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    if !d_min.is_finite() {
        return Err(Error::EmptyDepthMap);
    }
    let span = d_max - d_min;
    let values = m
        .values
        .iter()
        .map(|&d| {
            if d == NO_DATA || span == 0.0 {
                0.0
            } else {
                2.0 * (d - d_min) / span - 1.0
            }
        })
        .collect();
    Ok(NormalizedDepthMap {
        width: m.width,
        height: m.height,
        values,
        mask: densify_mask(m),
        d_min,
        d_max,
    })
}

impl NormalizedDepthMap {
    pub fn denormalize(&self) -> SparseDepthMap {
        let span = self.d_max - self.d_min;
        let values = self
            .values
            .iter()
            .zip(&self.mask)
            .map(|(&v, &valid)| {
                if valid {
                    self.d_min + (v + 1.0) * 0.5 * span
                } else {
                    NO_DATA
                }
            })
            .collect();
        SparseDepthMap {
            width: self.width,
            height: self.height,
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_map_pools_to_empty() {
        let m = SparseDepthMap::empty(7, 5);
        let p = max_pool(&m, 5, 1).unwrap();
        assert_eq!(p.valid_count(), 0);
        assert_eq!((p.width(), p.height()), (7, 5));
    }

    #[test]
    fn single_pixel_spreads_to_a_block() {
        let mut m = SparseDepthMap::empty(12, 10);
        m.set(4, 6, 3.0).unwrap();
        let p = max_pool(&m, 5, 1).unwrap();
        assert_eq!(p.valid_count(), 25);
        for (r, c, d) in p.valid_pixels() {
            assert!((2..=6).contains(&r) && (4..=8).contains(&c));
            assert_eq!(d, 3.0);
        }
    }

    #[test]
    fn strided_output_dims() {
        let m = SparseDepthMap::empty(10, 7);
        let p = max_pool(&m, 3, 2).unwrap();
        assert_eq!((p.width(), p.height()), (5, 4));
        assert!(max_pool(&m, 0, 1).is_err());
        assert!(max_pool(&m, 3, 0).is_err());
    }

    #[test]
    fn normalize_examples() {
        let m = SparseDepthMap::from_values(3, 1, vec![2.0, 0.0, 6.0]).unwrap();
        let n = normalize(&m).unwrap();
        assert_eq!(n.values, vec![-1.0, 0.0, 1.0]);
        assert_eq!(n.mask, vec![true, false, true]);

        let m = SparseDepthMap::from_values(3, 1, vec![2.0, 4.0, 6.0]).unwrap();
        assert_eq!(normalize(&m).unwrap().values, vec![-1.0, 0.0, 1.0]);

        let m = SparseDepthMap::from_values(2, 2, vec![5.0, 5.0, 0.0, 5.0]).unwrap();
        let n = normalize(&m).unwrap();
        assert!(n.values.iter().all(|&v| v == 0.0));
        assert_eq!(n.denormalize(), m);

        assert!(matches!(normalize(&SparseDepthMap::empty(3, 3)), Err(Error::EmptyDepthMap)));
    }

    #[test]
    fn mask_counts() {
        assert!(densify_mask(&SparseDepthMap::empty(4, 4)).iter().all(|v| !v));
        let dense = SparseDepthMap::from_values(2, 2, vec![1.0; 4]).unwrap();
        assert!(densify_mask(&dense).iter().all(|&v| v));
        let m = SparseDepthMap::from_values(3, 2, vec![0.0, 1.0, 0.0, 2.0, 3.0, 0.0]).unwrap();
        assert_eq!(densify_mask(&m).iter().filter(|&&v| v).count(), 3);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(SparseDepthMap::from_values(2, 1, vec![1.0]).is_err());
        assert!(SparseDepthMap::from_values(2, 1, vec![1.0, -1.0]).is_err());
        assert!(SparseDepthMap::from_values(2, 1, vec![f64::NAN, 1.0]).is_err());
        let mut m = SparseDepthMap::empty(2, 2);
        assert!(m.set(2, 0, 1.0).is_err());
        assert!(m.set(0, 0, f64::INFINITY).is_err());
    }
}
