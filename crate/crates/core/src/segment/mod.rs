//! Segmentation of reconstructed images into contact regions: normalization,
//! Otsu thresholding, morphological mask refinement, connected-component
//! labeling and per-region intensity sums.

mod label;
mod morph;
mod otsu;

pub use label::{label_components, Connectivity};
pub use morph::{dilate, erode, morph_close, morph_open, refine_mask};
pub use otsu::otsu_threshold;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ConductivityImage;

/// Rectangular boolean mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn filled(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Config(format!(
                "mask of {}x{} needs {} bits, got {}",
                width,
                height,
                width * height,
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn same_shape(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn subset_of(&self, other: &BinaryMask) -> bool {
        self.same_shape(other)
            && self
                .bits
                .iter()
                .zip(&other.bits)
                .all(|(a, b)| !*a || *b)
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// Bounding box `(min_row, min_col, max_row, max_col)` of the set pixels.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for row in 0..self.height {
            for col in 0..self.width {
                if self.get(row, col) {
                    bb = Some(match bb {
                        None => (row, col, row, col),
                        Some((r0, c0, r1, c1)) => {
                            (r0.min(row), c0.min(col), r1.max(row), c1.max(col))
                        }
                    });
                }
            }
        }
        bb
    }
}

/// Disk-shaped structuring element of integer pixel radius.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    radius: usize,
    offsets: Vec<(isize, isize)>,
}

impl StructuringElement {
    /// Discrete disk: offsets `(dr, dc)` with `dr² + dc² ≤ radius²`.
    pub fn disk(radius: usize) -> Result<Self> {
        if radius == 0 {
            return Err(Error::Config("structuring element radius must be >= 1".into()));
        }
        let r = radius as isize;
        let r2 = r * r;
        let mut offsets = Vec::new();
        for dr in -r..=r {
            for dc in -r..=r {
                if dr * dr + dc * dc <= r2 {
                    offsets.push((dr, dc));
                }
            }
        }
        Ok(Self { radius, offsets })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn offsets(&self) -> &[(isize, isize)] {
        &self.offsets
    }
}

/// How the segmentation stage is parameterized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationConfig {
    /// Histogram bins for Otsu's method.
    pub bins: usize,
    /// Disk radius of the structuring element (pixels).
    pub se_radius: usize,
    /// Neighbor connectivity for component labeling.
    pub connectivity: Connectivity,
    /// Regions smaller than this many pixels are discarded as noise.
    pub min_pixels: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            bins: 256,
            se_radius: 2,
            connectivity: Connectivity::Eight,
            min_pixels: 4,
        }
    }
}

/// Result of [`normalize`]: the rescaled image plus a degeneracy flag for
/// constant inputs.
#[derive(Debug, Clone)]
pub struct NormalizedImage {
    pub image: ConductivityImage,
    /// Set when the input was constant; the image is then all zeros.
    pub degenerate: bool,
}

/// Affinely map the image's value range onto `[0, 1]`.
///
/// A constant image cannot be rescaled; it maps to all zeros with the
/// `degenerate` flag set instead of an error.
pub fn normalize(image: &ConductivityImage) -> NormalizedImage {
    let (lo, hi) = image.min_max();
    if hi <= lo {
        return NormalizedImage {
            image: ConductivityImage::zeros(image.width(), image.height(), image.side_length()),
            degenerate: true,
        };
    }
    let span = hi - lo;
    let values: Vec<f64> = image.values().iter().map(|v| (v - lo) / span).collect();
    NormalizedImage {
        image: ConductivityImage::from_values(
            image.width(),
            image.height(),
            image.side_length(),
            values,
        )
        .expect("normalized values are finite"),
        degenerate: false,
    }
}

/// Partition a normalized image at threshold `t`: true where `value >= t`.
pub fn binarize(image: &ConductivityImage, threshold: f64) -> BinaryMask {
    let bits = image.values().iter().map(|&v| v >= threshold).collect();
    BinaryMask {
        width: image.width(),
        height: image.height(),
        bits,
    }
}

/// One labeled contact region.
#[derive(Debug, Clone)]
pub struct Roi {
    pub id: usize,
    pub mask: BinaryMask,
    pub pixel_count: usize,
    /// Sum of image intensity over the mask.
    pub intensity_sum: f64,
    /// Intensity-weighted centroid in cm; falls back to the unweighted mask
    /// centroid when the region carries no intensity.
    pub centroid_cm: (f64, f64),
}

/// Fill in intensity sums and weighted centroids for labeled region masks.
///
/// `image` is the pre-normalization (preprocessed) reconstruction, so the
/// sums stay faithful to the reconstructed intensity scale.
pub fn roi_intensity_sums(image: &ConductivityImage, masks: &[BinaryMask]) -> Result<Vec<Roi>> {
    let mut rois = Vec::with_capacity(masks.len());
    for (id, mask) in masks.iter().enumerate() {
        if mask.width() != image.width() || mask.height() != image.height() {
            return Err(Error::Config("ROI mask does not match image dimensions".into()));
        }
        let mut sum = 0.0;
        let mut wx = 0.0;
        let mut wy = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut count = 0usize;
        for row in 0..image.height() {
            for col in 0..image.width() {
                if mask.get(row, col) {
                    let v = image.get(row, col);
                    let (x, y) = image.pixel_center(row, col);
                    sum += v;
                    wx += v * x;
                    wy += v * y;
                    cx += x;
                    cy += y;
                    count += 1;
                }
            }
        }
        let centroid = if sum > 0.0 {
            (wx / sum, wy / sum)
        } else if count > 0 {
            (cx / count as f64, cy / count as f64)
        } else {
            (0.0, 0.0)
        };
        rois.push(Roi {
            id,
            mask: mask.clone(),
            pixel_count: count,
            intensity_sum: sum,
            centroid_cm: centroid,
        });
    }
    Ok(rois)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_from(values: &[f64], w: usize, h: usize) -> ConductivityImage {
        ConductivityImage::from_values(w, h, 10.0, values.to_vec()).unwrap()
    }

    #[test]
    fn normalize_maps_range_to_unit_interval() {
        let img = image_from(&[2.0, 4.0, 6.0, 2.0], 2, 2);
        let out = normalize(&img);
        assert!(!out.degenerate);
        assert_eq!(out.image.values(), &[0.0, 0.5, 1.0, 0.0]);
    }

    #[test]
    fn normalize_constant_image_is_degenerate() {
        let img = image_from(&[3.0; 9], 3, 3);
        let out = normalize(&img);
        assert!(out.degenerate);
        assert!(out.image.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalize_identity_on_unit_range() {
        let img = image_from(&[0.0, 0.25, 0.75, 1.0], 2, 2);
        let out = normalize(&img);
        assert_eq!(out.image.values(), img.values());
    }

    #[test]
    fn binarize_edge_thresholds() {
        let img = image_from(&[0.1, 0.5, 0.9, 0.3], 2, 2);
        assert_eq!(binarize(&img, 0.0).count(), 4);
        assert_eq!(binarize(&img, 1.5).count(), 0);
        let mask = binarize(&img, 0.5);
        assert!(mask.get(0, 1) && mask.get(1, 0));
        assert!(!mask.get(0, 0) && !mask.get(1, 1));
    }

    #[test]
    fn disk_structuring_element_is_symmetric() {
        let se = StructuringElement::disk(2).unwrap();
        assert_eq!(se.offsets().len(), 13);
        for &(dr, dc) in se.offsets() {
            assert!(se.offsets().contains(&(-dr, -dc)));
        }
        assert!(StructuringElement::disk(0).is_err());
    }

    #[test]
    fn roi_sums_cover_whole_image() {
        let img = image_from(&[1.0, 2.0, 3.0, 4.0], 2, 2);
        let all = BinaryMask::filled(2, 2);
        let rois = roi_intensity_sums(&img, &[all]).unwrap();
        assert_eq!(rois.len(), 1);
        assert!((rois[0].intensity_sum - 10.0).abs() < 1e-12);
        assert_eq!(rois[0].pixel_count, 4);
    }

    #[test]
    fn roi_sums_are_additive_over_disjoint_regions() {
        let img = image_from(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 3, 2);
        let mut left = BinaryMask::new(3, 2);
        left.set(0, 0, true);
        left.set(1, 0, true);
        let mut right = BinaryMask::new(3, 2);
        right.set(0, 2, true);
        right.set(1, 2, true);
        let rois = roi_intensity_sums(&img, &[left.clone(), right.clone()]).unwrap();
        let total: f64 = rois.iter().map(|r| r.intensity_sum).sum();
        let mut union_sum = 0.0;
        for row in 0..2 {
            for col in 0..3 {
                if left.get(row, col) || right.get(row, col) {
                    union_sum += img.get(row, col);
                }
            }
        }
        assert!((total - union_sum).abs() <= 1e-12 * union_sum.abs().max(1.0));
    }

    #[test]
    fn uniform_square_roi_centroid_is_geometric_center() {
        let mut values = vec![0.0; 16];
        let mut mask = BinaryMask::new(4, 4);
        for row in 1..3 {
            for col in 1..3 {
                values[row * 4 + col] = 2.5;
                mask.set(row, col, true);
            }
        }
        let img = image_from(&values, 4, 4);
        let rois = roi_intensity_sums(&img, &[mask]).unwrap();
        // Square of pixels (1..3)x(1..3) on a 4x4 grid over 10 cm: centered
        // at the domain origin.
        let (cx, cy) = rois[0].centroid_cm;
        assert!(cx.abs() < 1e-12 && cy.abs() < 1e-12);
    }

    #[test]
    fn zero_intensity_roi_falls_back_to_mask_centroid() {
        let img = image_from(&[0.0; 16], 4, 4);
        let mut mask = BinaryMask::new(4, 4);
        mask.set(0, 0, true);
        mask.set(0, 1, true);
        let rois = roi_intensity_sums(&img, &[mask]).unwrap();
        let (cx, cy) = rois[0].centroid_cm;
        // Mean of the two top-left pixel centers: (-3.75, 3.75), (-1.25, 3.75).
        assert!((cx - (-2.5)).abs() < 1e-12);
        assert!((cy - 3.75).abs() < 1e-12);
    }
}
