//! Scoring of pipeline outputs against ground truth.

use serde::Serialize;

use super::matching::Assignment;
use crate::fuse::ContactEstimate;
use crate::phantom::Scenario;

/// Error metrics for one scored run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioScore {
    pub matched: usize,
    pub missed: usize,
    pub spurious: usize,
    /// Mean Euclidean distance over matches (cm).
    pub location_error_cm: Option<f64>,
    /// Mean absolute force error over matches (N).
    pub force_error_n: Option<f64>,
    /// Mean absolute percentage force error over matches with nonzero truth
    /// force.
    pub force_ape_percent: Option<f64>,
    /// Sum of absolute force errors over matches, normalized by the true
    /// total force.
    pub total_normalized_ape_percent: Option<f64>,
    /// Matches excluded from the APE because the truth force was zero.
    pub ape_excluded_zero_truth: usize,
}

/// Score a matched assignment.
pub fn score(
    assignment: &Assignment,
    estimates: &[ContactEstimate],
    truth: &Scenario,
) -> ScenarioScore {
    let matched = assignment.pairs.len();
    if matched == 0 {
        return ScenarioScore {
            matched,
            missed: assignment.unmatched_truth.len(),
            spurious: assignment.unmatched_estimates.len(),
            location_error_cm: None,
            force_error_n: None,
            force_ape_percent: None,
            total_normalized_ape_percent: None,
            ape_excluded_zero_truth: 0,
        };
    }

    let mut dist_sum = 0.0;
    let mut force_err_sum = 0.0;
    let mut ape_sum = 0.0;
    let mut ape_count = 0usize;
    let mut excluded = 0usize;
    for &(e, t) in &assignment.pairs {
        let est = &estimates[e];
        let tru = &truth.contacts[t];
        let dx = est.position_cm.0 - tru.center.0;
        let dy = est.position_cm.1 - tru.center.1;
        dist_sum += (dx * dx + dy * dy).sqrt();
        let ferr = (est.force_n - tru.force).abs();
        force_err_sum += ferr;
        if tru.force > 0.0 {
            ape_sum += ferr / tru.force;
            ape_count += 1;
        } else {
            excluded += 1;
        }
    }

    ScenarioScore {
        matched,
        missed: assignment.unmatched_truth.len(),
        spurious: assignment.unmatched_estimates.len(),
        location_error_cm: Some(dist_sum / matched as f64),
        force_error_n: Some(force_err_sum / matched as f64),
        force_ape_percent: if ape_count > 0 {
            Some(100.0 * ape_sum / ape_count as f64)
        } else {
            None
        },
        total_normalized_ape_percent: if truth.total_force > 0.0 {
            Some(100.0 * force_err_sum / truth.total_force)
        } else {
            None
        },
        ape_excluded_zero_truth: excluded,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::matching::match_contacts;
    use crate::geometry::SensorGeometry;
    use crate::phantom::ContactSpec;

    fn estimate(x: f64, y: f64, force: f64) -> ContactEstimate {
        ContactEstimate {
            roi_id: 0,
            position_cm: (x, y),
            force_n: force,
            intensity_share: 1.0,
        }
    }

    fn truth_at(contacts: Vec<(f64, f64, f64)>) -> Scenario {
        let geo = SensorGeometry::default();
        Scenario::new(
            contacts
                .into_iter()
                .map(|(x, y, force)| ContactSpec {
                    center: (x, y),
                    radius: 0.75,
                    delta_sigma: -0.3,
                    force,
                })
                .collect(),
            &geo,
        )
        .unwrap()
    }

    #[test]
    fn single_match_arithmetic() {
        let truth = truth_at(vec![(0.0, 0.0, 1.47)]);
        let est = vec![estimate(0.4, 0.3, 1.6)];
        let a = match_contacts(&[(0.4, 0.3)], &[(0.0, 0.0)]);
        let s = score(&a, &est, &truth);
        assert_eq!(s.matched, 1);
        assert!((s.location_error_cm.unwrap() - 0.5).abs() < 1e-12);
        assert!((s.force_error_n.unwrap() - 0.13).abs() < 1e-12);
    }

    #[test]
    fn perfect_estimates_have_zero_errors() {
        let truth = truth_at(vec![(1.0, 1.0, 2.0), (-2.0, 0.5, 1.0)]);
        let est = vec![estimate(1.0, 1.0, 2.0), estimate(-2.0, 0.5, 1.0)];
        let positions: Vec<(f64, f64)> = est.iter().map(|e| e.position_cm).collect();
        let centers: Vec<(f64, f64)> = truth.contacts.iter().map(|c| c.center).collect();
        let a = match_contacts(&positions, &centers);
        let s = score(&a, &est, &truth);
        assert_eq!(s.location_error_cm, Some(0.0));
        assert_eq!(s.force_error_n, Some(0.0));
        assert_eq!(s.force_ape_percent, Some(0.0));
        assert_eq!(s.missed, 0);
        assert_eq!(s.spurious, 0);
    }

    #[test]
    fn zero_truth_force_is_excluded_from_ape() {
        let truth = truth_at(vec![(0.0, 0.0, 0.0)]);
        let est = vec![estimate(0.0, 0.0, 0.5)];
        let a = match_contacts(&[(0.0, 0.0)], &[(0.0, 0.0)]);
        let s = score(&a, &est, &truth);
        assert_eq!(s.force_ape_percent, None);
        assert_eq!(s.ape_excluded_zero_truth, 1);
        assert_eq!(s.force_error_n, Some(0.5));
    }

    #[test]
    fn missed_contacts_leave_errors_over_matches_only() {
        let truth = truth_at(vec![(0.0, 0.0, 1.0), (3.0, 3.0, 2.0)]);
        let est = vec![estimate(0.1, 0.0, 3.0)];
        let a = match_contacts(&[(0.1, 0.0)], &[(0.0, 0.0), (3.0, 3.0)]);
        let s = score(&a, &est, &truth);
        assert_eq!(s.matched, 1);
        assert_eq!(s.missed, 1);
        assert!((s.location_error_cm.unwrap() - 0.1).abs() < 1e-12);
        // Total-normalized: |3-1| / (1+2).
        assert!((s.total_normalized_ape_percent.unwrap() - 200.0 / 3.0).abs() < 1e-9);
    }
}
