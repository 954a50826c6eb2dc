//! Threshold selection by between-class variance maximization.

use crate::error::{Error, Result};
use crate::grid::ConductivityImage;

/// Otsu threshold of a normalized image.
///
/// Candidate thresholds are the interior bin edges `k / bins`; the returned
/// value maximizes the between-class variance of the split `value < t` vs
/// `value >= t`, with ties broken toward the lower threshold. Class means use
/// the actual pixel values accumulated per bin, not bin centers, so the
/// result agrees with an exhaustive scan over the same edges.
pub fn otsu_threshold(image: &ConductivityImage, bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::Config("otsu needs at least 2 histogram bins".into()));
    }
    let values = image.values();
    if values.is_empty() {
        return Err(Error::Segmentation("cannot threshold an empty image".into()));
    }
    let (lo, hi) = image.min_max();
    if lo < -1e-12 || hi > 1.0 + 1e-12 {
        return Err(Error::Config(format!(
            "otsu expects a normalized image in [0, 1], got [{lo}, {hi}]"
        )));
    }
    if hi <= lo {
        return Err(Error::Segmentation(
            "degenerate single-valued image has no threshold".into(),
        ));
    }

    let nb = bins;
    let mut count = vec![0u64; nb];
    let mut sum = vec![0.0f64; nb];
    for &v in values {
        let b = ((v * nb as f64) as usize).min(nb - 1);
        count[b] += 1;
        sum[b] += v;
    }
    let total_n = values.len() as f64;
    let total_sum: f64 = sum.iter().sum();

    let mut best_var = f64::NEG_INFINITY;
    let mut best_edge = 1usize;
    let mut n_low = 0.0f64;
    let mut sum_low = 0.0f64;
    // Edge k splits bins [0, k) from [k, nb); thresholds at k / nb.
    for k in 1..nb {
        n_low += count[k - 1] as f64;
        sum_low += sum[k - 1];
        let n_high = total_n - n_low;
        if n_low == 0.0 || n_high == 0.0 {
            continue;
        }
        let mean_low = sum_low / n_low;
        let mean_high = (total_sum - sum_low) / n_high;
        let diff = mean_low - mean_high;
        let var = n_low * n_high * diff * diff;
        if var > best_var {
            best_var = var;
            best_edge = k;
        }
    }
    if best_var <= 0.0 {
        return Err(Error::Segmentation(
            "no split with positive between-class variance".into(),
        ));
    }
    Ok(best_edge as f64 / nb as f64)
}
