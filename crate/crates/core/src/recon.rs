//! Linearized difference imaging: Tikhonov reconstruction onto the pixel
//! grid, plus the mask and soft-threshold pre-processing applied before
//! segmentation.

use nalgebra::{Cholesky, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ConductivityImage;
use crate::jacobian::SensitivityMatrix;
use crate::segment::BinaryMask;

/// Knobs of the reconstruction and pre-processing stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructionConfig {
    /// Regularization floor, relative to the largest singular value of the
    /// sensitivity matrix. Used as-is for noiseless data.
    pub lambda: f64,
    /// Noise-matched regularization: the effective weight is
    /// `max(lambda, lambda_noise_factor · assumed noise fraction)`, so noisy
    /// acquisitions are smoothed in proportion to their declared noise
    /// (discrepancy principle).
    pub lambda_noise_factor: f64,
    /// Soft-threshold level as a fraction of the (sign-corrected) image
    /// maximum.
    pub threshold_fraction: f64,
    /// Sign convention factor: contacts lower conductivity, so the default
    /// flips the reconstruction to make contact regions positive.
    pub sign: f64,
    /// Optional sensing-domain mask; pixels outside are zeroed. `None` keeps
    /// the full square.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask: Option<BinaryMask>,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            lambda: 3e-5,
            lambda_noise_factor: 2.0,
            threshold_fraction: 0.2,
            sign: -1.0,
            mask: None,
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::Config("lambda must be positive".into()));
        }
        if self.lambda_noise_factor < 0.0 {
            return Err(Error::Config("lambda_noise_factor must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.threshold_fraction) {
            return Err(Error::Config(
                "threshold_fraction must lie in [0, 1)".into(),
            ));
        }
        if self.sign != 1.0 && self.sign != -1.0 {
            return Err(Error::Config("sign must be +1 or -1".into()));
        }
        Ok(())
    }

    /// Regularization weight for data with the given relative voltage noise.
    pub fn effective_lambda(&self, noise_fraction: f64) -> f64 {
        self.lambda.max(self.lambda_noise_factor * noise_fraction)
    }
}

/// Cached Tikhonov solve for one sensitivity matrix and regularization
/// weight.
///
/// The normal-equation solution `x = (JᵀJ + λ²I)⁻¹ Jᵀ Δv` is computed through
/// the algebraically identical dual form `x = Jᵀ (JJᵀ + λ²I)⁻¹ Δv`, which
/// only ever factorizes a measurement-sized matrix.
pub struct TikhonovSolver {
    chol: Cholesky<f64, Dyn>,
    gram: nalgebra::DMatrix<f64>,
    lambda_abs: f64,
}

impl TikhonovSolver {
    /// Factorize `JJᵀ + λ²I` with `λ = lambda_rel · s_max`.
    pub fn new(jacobian: &SensitivityMatrix, lambda_rel: f64) -> Result<Self> {
        if !(lambda_rel > 0.0) {
            return Err(Error::Config("lambda must be positive".into()));
        }
        let s_max = jacobian.largest_singular_value();
        if s_max <= 0.0 {
            return Err(Error::Solver("sensitivity matrix is zero".into()));
        }
        let lambda_abs = lambda_rel * s_max;
        let j = jacobian.matrix();
        let mut gram = j * j.transpose();
        for i in 0..gram.nrows() {
            gram[(i, i)] += lambda_abs * lambda_abs;
        }
        let chol = gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Solver("regularized normal matrix is indefinite".into()))?;
        Ok(Self {
            chol,
            gram,
            lambda_abs,
        })
    }

    /// Effective absolute regularization weight.
    pub fn lambda_abs(&self) -> f64 {
        self.lambda_abs
    }

    /// Solve for the pixel-space conductivity change given a frame
    /// difference.
    pub fn solve(&self, jacobian: &SensitivityMatrix, delta_v: &[f64]) -> Result<Vec<f64>> {
        if delta_v.len() != jacobian.rows() {
            return Err(Error::Config(format!(
                "frame difference has {} values but the sensitivity matrix has {} rows",
                delta_v.len(),
                jacobian.rows()
            )));
        }
        if !delta_v.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("frame difference must be finite".into()));
        }
        let rhs = DVector::<f64>::from_column_slice(delta_v);
        let mut y = self.chol.solve(&rhs);
        // Iterative refinement keeps the dual solve accurate when small
        // lambdas leave the gram matrix poorly conditioned.
        for _ in 0..2 {
            let residual = &rhs - &self.gram * &y;
            y += self.chol.solve(&residual);
        }
        let x = jacobian.matrix().transpose() * y;
        Ok(x.as_slice().to_vec())
    }
}

/// One-shot Tikhonov reconstruction of a conductivity-change image.
pub fn tikhonov_reconstruct(
    jacobian: &SensitivityMatrix,
    delta_v: &[f64],
    config: &ReconstructionConfig,
) -> Result<ConductivityImage> {
    config.validate()?;
    let solver = TikhonovSolver::new(jacobian, config.lambda)?;
    let x = solver.solve(jacobian, delta_v)?;
    ConductivityImage::from_values(
        jacobian.grid_width(),
        jacobian.grid_height(),
        jacobian.side_length(),
        x,
    )
}

/// Mask and soft-threshold a reconstruction.
///
/// Output pixel: `max(sign · value − τ, 0)` inside the mask and 0 outside,
/// with `τ = threshold_fraction · max(0, max(sign · value))`. The sign factor
/// maps the contact response onto positive values before thresholding.
pub fn preprocess(image: &ConductivityImage, config: &ReconstructionConfig) -> ConductivityImage {
    let (w, h) = (image.width(), image.height());
    let in_mask = |row: usize, col: usize| match &config.mask {
        Some(m) => m.get(row, col),
        None => true,
    };
    let mut peak = f64::NEG_INFINITY;
    for row in 0..h {
        for col in 0..w {
            if in_mask(row, col) {
                peak = peak.max(config.sign * image.get(row, col));
            }
        }
    }
    let tau = config.threshold_fraction * peak.max(0.0);
    let mut out = ConductivityImage::zeros(w, h, image.side_length());
    for row in 0..h {
        for col in 0..w {
            if in_mask(row, col) {
                let v = config.sign * image.get(row, col) - tau;
                if v > 0.0 {
                    out.set(row, col, v);
                }
            }
        }
    }
    out
}

/// Residual and solution norms over a sweep of regularization weights, for
/// picking λ off the corner of the L-curve. Not run automatically.
#[derive(Debug, Clone, Serialize)]
pub struct LCurvePoint {
    pub lambda: f64,
    pub residual_norm: f64,
    pub solution_norm: f64,
}

pub fn lcurve_sweep(
    jacobian: &SensitivityMatrix,
    delta_v: &[f64],
    lambdas: &[f64],
) -> Result<Vec<LCurvePoint>> {
    let mut points = Vec::with_capacity(lambdas.len());
    let rhs = DVector::<f64>::from_column_slice(delta_v);
    for &lambda in lambdas {
        let solver = TikhonovSolver::new(jacobian, lambda)?;
        let x = solver.solve(jacobian, delta_v)?;
        let xv = DVector::<f64>::from_column_slice(&x);
        let residual = jacobian.matrix() * &xv - &rhs;
        points.push(LCurvePoint {
            lambda,
            residual_norm: residual.norm(),
            solution_norm: xv.norm(),
        });
    }
    Ok(points)
}

/// Normal-equation residual `‖(JᵀJ + λ²I)x − JᵀΔv‖ / ‖JᵀΔv‖`; a healthy
/// solve keeps this at or below 1e-8.
pub fn normal_equation_residual(
    jacobian: &SensitivityMatrix,
    solver: &TikhonovSolver,
    x: &[f64],
    delta_v: &[f64],
) -> f64 {
    let j = jacobian.matrix();
    let xv = DVector::<f64>::from_column_slice(x);
    let dv = DVector::<f64>::from_column_slice(delta_v);
    let jt_dv = j.transpose() * &dv;
    let lhs = j.transpose() * (j * &xv) + xv * (solver.lambda_abs() * solver.lambda_abs());
    (lhs - &jt_dv).norm() / jt_dv.norm().max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{forward_solve, frame_delta, ConductivityField};
    use crate::geometry::{pair_schedule, SensorGeometry};
    use crate::grid::PixelGrid;
    use crate::jacobian::compute_jacobian;
    use crate::mesh::build_mesh;

    fn setup() -> (SensitivityMatrix, Vec<f64>) {
        let geo = SensorGeometry::default();
        let mesh = build_mesh(&geo, 21).unwrap();
        let schedule = pair_schedule(16).unwrap();
        let grid = PixelGrid::build(&mesh, 20, 20).unwrap();
        let reference = ConductivityField::homogeneous(&mesh, 1.0).unwrap();
        let jac = compute_jacobian(&mesh, &reference, &schedule, &grid).unwrap();

        // Simulated single contact at (-2.5, 2.5), r = 0.75 cm, Δσ = -0.3.
        let mut values = reference.values().to_vec();
        for (e, value) in values.iter_mut().enumerate() {
            let (x, y) = mesh.element_centroid(e);
            if (x + 2.5).powi(2) + (y - 2.5).powi(2) <= 0.75 * 0.75 {
                *value += -0.3;
            }
        }
        let contact = ConductivityField::new(&mesh, values).unwrap();
        let baseline_frame = forward_solve(&mesh, &reference, &schedule, 1.0).unwrap();
        let contact_frame = forward_solve(&mesh, &contact, &schedule, 1.0).unwrap();
        let delta = frame_delta(&contact_frame, &baseline_frame).unwrap();
        (jac, delta)
    }

    #[test]
    fn zero_difference_reconstructs_to_zero() {
        let (jac, _) = setup();
        let config = ReconstructionConfig::default();
        let img = tikhonov_reconstruct(&jac, &vec![0.0; jac.rows()], &config).unwrap();
        assert!(img.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn huge_lambda_shrinks_solution() {
        let (jac, delta) = setup();
        let base = tikhonov_reconstruct(&jac, &delta, &ReconstructionConfig::default()).unwrap();
        let shrunk = tikhonov_reconstruct(
            &jac,
            &delta,
            &ReconstructionConfig {
                lambda: 1e-2 * 1e6,
                ..Default::default()
            },
        )
        .unwrap();
        let norm = |img: &ConductivityImage| -> f64 {
            img.values().iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        assert!(norm(&shrunk) < 1e-6 * norm(&base));
    }

    #[test]
    fn single_contact_extremum_lands_in_disk() {
        let (jac, delta) = setup();
        let config = ReconstructionConfig::default();
        let img = tikhonov_reconstruct(&jac, &delta, &config).unwrap();
        // Contacts lower conductivity; look for the most negative pixel.
        let flipped = ConductivityImage::from_values(
            img.width(),
            img.height(),
            img.side_length(),
            img.values().iter().map(|v| -v).collect(),
        )
        .unwrap();
        let (row, col) = flipped.argmax();
        let (x, y) = flipped.pixel_center(row, col);
        let dist = ((x + 2.5).powi(2) + (y - 2.5).powi(2)).sqrt();
        assert!(
            dist <= 0.75,
            "extremum at ({x:.2}, {y:.2}) lies {dist:.2} cm from the contact center"
        );
    }

    #[test]
    fn normal_equations_are_satisfied() {
        let (jac, delta) = setup();
        let solver = TikhonovSolver::new(&jac, 1e-2).unwrap();
        let x = solver.solve(&jac, &delta).unwrap();
        let residual = normal_equation_residual(&jac, &solver, &x, &delta);
        assert!(residual <= 1e-8, "normal equation residual {residual:.2e}");
    }

    #[test]
    fn dimension_mismatch_and_nonfinite_rejected() {
        let (jac, _) = setup();
        let solver = TikhonovSolver::new(&jac, 1e-2).unwrap();
        assert!(solver.solve(&jac, &[0.0; 3]).is_err());
        let mut bad = vec![0.0; jac.rows()];
        bad[0] = f64::NAN;
        assert!(solver.solve(&jac, &bad).is_err());
    }

    #[test]
    fn preprocess_is_masked_identity_at_zero_threshold() {
        let img = ConductivityImage::from_values(
            2,
            2,
            10.0,
            vec![0.3, 0.8, 0.1, 0.0],
        )
        .unwrap();
        let config = ReconstructionConfig {
            threshold_fraction: 0.0,
            sign: 1.0,
            ..Default::default()
        };
        let out = preprocess(&img, &config);
        assert_eq!(out.values(), img.values());
        // Idempotent in this configuration.
        let twice = preprocess(&out, &config);
        assert_eq!(twice.values(), out.values());
    }

    #[test]
    fn preprocess_soft_threshold_arithmetic() {
        let img = ConductivityImage::from_values(
            2,
            2,
            10.0,
            vec![1.0, 0.5, 0.05, 0.0],
        )
        .unwrap();
        let config = ReconstructionConfig {
            threshold_fraction: 0.1,
            sign: 1.0,
            ..Default::default()
        };
        let out = preprocess(&img, &config);
        assert!((out.values()[0] - 0.9).abs() < 1e-12);
        assert!((out.values()[1] - 0.4).abs() < 1e-12);
        assert_eq!(out.values()[2], 0.0);
        assert_eq!(out.values()[3], 0.0);
    }

    #[test]
    fn preprocess_zeroes_everything_below_threshold() {
        let img = ConductivityImage::from_values(
            2,
            2,
            10.0,
            vec![1.0, 0.05, 0.08, 0.0],
        )
        .unwrap();
        let config = ReconstructionConfig {
            threshold_fraction: 0.1,
            sign: 1.0,
            ..Default::default()
        };
        let out = preprocess(&img, &config);
        // tau = 0.1; only the peak survives.
        assert!((out.values()[0] - 0.9).abs() < 1e-12);
        assert!(out.values()[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn preprocess_without_contact_response_gives_zero() {
        // With the contact-negative convention, an all-positive image holds
        // no contact evidence: the sign-corrected maximum is below zero and
        // everything thresholds away.
        let img = ConductivityImage::from_values(2, 2, 10.0, vec![0.05; 4]).unwrap();
        let out = preprocess(&img, &ReconstructionConfig::default());
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn preprocess_respects_mask_and_is_nonnegative() {
        let img = ConductivityImage::from_values(
            2,
            2,
            10.0,
            vec![-1.0, 2.0, -3.0, 0.5],
        )
        .unwrap();
        let mut mask = BinaryMask::new(2, 2);
        mask.set(0, 0, true);
        mask.set(1, 0, true);
        let config = ReconstructionConfig {
            threshold_fraction: 0.1,
            sign: -1.0,
            mask: Some(mask),
            ..Default::default()
        };
        let out = preprocess(&img, &config);
        assert!(out.values().iter().all(|&v| v >= 0.0));
        // Outside the mask: zero even though sign*value is large.
        assert_eq!(out.get(0, 1), 0.0);
        assert_eq!(out.get(1, 1), 0.0);
        // Inside: sign flips negatives to positives, minus tau = 0.3.
        assert!((out.get(0, 0) - 0.7).abs() < 1e-12);
        assert!((out.get(1, 0) - 2.7).abs() < 1e-12);
    }

    #[test]
    fn preprocess_zero_image_passes_through() {
        let img = ConductivityImage::zeros(4, 4, 10.0);
        let out = preprocess(&img, &ReconstructionConfig::default());
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lcurve_sweep_is_monotone_in_lambda() {
        let (jac, delta) = setup();
        let points = lcurve_sweep(&jac, &delta, &[1e-4, 1e-2, 1.0]).unwrap();
        assert_eq!(points.len(), 3);
        // Larger lambda: bigger residual, smaller solution.
        assert!(points[0].residual_norm <= points[1].residual_norm);
        assert!(points[1].residual_norm <= points[2].residual_norm);
        assert!(points[0].solution_norm >= points[1].solution_norm);
        assert!(points[1].solution_norm >= points[2].solution_norm);
    }
}
