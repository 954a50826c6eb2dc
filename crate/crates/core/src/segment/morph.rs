//! Binary morphology with a disk structuring element.
//!
//! Pixels outside the image are background: dilation is cropped at the image
//! edge, and erosion ignores probes that fall outside the grid. With this
//! pairing, opening stays anti-extensive and closing extensive on the finite
//! grid, and both are exactly idempotent.

use super::{BinaryMask, StructuringElement};

/// Erosion: a pixel stays set iff every in-image probe of the element hits a
/// set pixel.
pub fn erode(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    let mut out = BinaryMask::new(mask.width(), mask.height());
    for row in 0..h {
        for col in 0..w {
            let mut keep = true;
            for &(dr, dc) in se.offsets() {
                let r = row + dr;
                let c = col + dc;
                if r < 0 || r >= h || c < 0 || c >= w {
                    continue;
                }
                if !mask.get(r as usize, c as usize) {
                    keep = false;
                    break;
                }
            }
            if keep {
                out.set(row as usize, col as usize, true);
            }
        }
    }
    out
}

/// Dilation: a pixel becomes set iff any probe of the element hits a set
/// pixel.
pub fn dilate(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    let mut out = BinaryMask::new(mask.width(), mask.height());
    for row in 0..h {
        for col in 0..w {
            let mut hit = false;
            for &(dr, dc) in se.offsets() {
                let r = row + dr;
                let c = col + dc;
                if r < 0 || r >= h || c < 0 || c >= w {
                    continue;
                }
                if mask.get(r as usize, c as usize) {
                    hit = true;
                    break;
                }
            }
            if hit {
                out.set(row as usize, col as usize, true);
            }
        }
    }
    out
}

/// Opening: erosion followed by dilation. Removes objects smaller than the
/// element.
pub fn morph_open(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    dilate(&erode(mask, se), se)
}

/// Closing: dilation followed by erosion. Fills holes smaller than the
/// element.
pub fn morph_close(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    erode(&dilate(mask, se), se)
}

/// Mask refinement used on the thresholded partition: open, then close.
pub fn refine_mask(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    morph_close(&morph_open(mask, se), se)
}
