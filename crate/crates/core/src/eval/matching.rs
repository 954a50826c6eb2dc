//! Minimum-total-distance one-to-one matching between estimated and true
//! contact positions.

use serde::Serialize;

/// Result of matching estimates against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assignment {
    /// `(estimate index, truth index)` pairs of the optimal matching.
    pub pairs: Vec<(usize, usize)>,
    /// Truth contacts with no estimate.
    pub unmatched_truth: Vec<usize>,
    /// Estimates with no truth contact.
    pub unmatched_estimates: Vec<usize>,
    /// Total Euclidean distance over the matched pairs.
    pub total_distance: f64,
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Match every estimate to at most one truth contact (and vice versa),
/// minimizing the total distance over all matchings of size
/// `min(estimates, truth)`.
pub fn match_contacts(estimates: &[(f64, f64)], truth: &[(f64, f64)]) -> Assignment {
    let m = estimates.len();
    let n = truth.len();
    if m == 0 || n == 0 {
        return Assignment {
            pairs: Vec::new(),
            unmatched_truth: (0..n).collect(),
            unmatched_estimates: (0..m).collect(),
            total_distance: 0.0,
        };
    }

    // The assignment solver wants rows <= cols; transpose if needed.
    let transposed = m > n;
    let (rows, cols) = if transposed { (n, m) } else { (m, n) };
    let cost = |r: usize, c: usize| -> f64 {
        if transposed {
            distance(estimates[c], truth[r])
        } else {
            distance(estimates[r], truth[c])
        }
    };
    let row_to_col = hungarian(rows, cols, cost);

    let mut pairs: Vec<(usize, usize)> = row_to_col
        .iter()
        .enumerate()
        .map(|(r, &c)| if transposed { (c, r) } else { (r, c) })
        .collect();
    pairs.sort_unstable();
    let total_distance = pairs
        .iter()
        .map(|&(e, t)| distance(estimates[e], truth[t]))
        .sum();
    let matched_e: std::collections::HashSet<usize> = pairs.iter().map(|p| p.0).collect();
    let matched_t: std::collections::HashSet<usize> = pairs.iter().map(|p| p.1).collect();
    Assignment {
        pairs,
        unmatched_truth: (0..n).filter(|i| !matched_t.contains(i)).collect(),
        unmatched_estimates: (0..m).filter(|i| !matched_e.contains(i)).collect(),
        total_distance,
    }
}

/// Hungarian algorithm with potentials, shortest-augmenting-path form,
/// O(rows² · cols). Requires `rows <= cols`; returns the assigned column for
/// every row.
fn hungarian(rows: usize, cols: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    assert!(rows <= cols);
    // 1-indexed potentials; p[j] is the row matched to column j (0 = none).
    let mut u = vec![0.0f64; rows + 1];
    let mut v = vec![0.0f64; cols + 1];
    let mut p = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];

    for i in 1..=rows {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![usize::MAX; rows];
    for j in 1..=cols {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    debug_assert!(row_to_col.iter().all(|&c| c != usize::MAX));
    row_to_col
}
