//! Fusion of the two channels: distribute the pneumatically measured total
//! force over the contact regions found in the reconstructed image.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{frame_delta, VoltageFrame};
use crate::grid::PixelGrid;
use crate::jacobian::SensitivityMatrix;
use crate::phantom::AirPressureModel;
use crate::recon::{preprocess, ReconstructionConfig, TikhonovSolver};
use crate::segment::{
    binarize, label_components, normalize, otsu_threshold, refine_mask, roi_intensity_sums, Roi,
    SegmentationConfig, StructuringElement,
};

/// One fused contact estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactEstimate {
    pub roi_id: usize,
    /// Intensity-weighted centroid (cm).
    pub position_cm: (f64, f64),
    /// Allocated force (N).
    pub force_n: f64,
    /// This region's share of the total intensity; shares sum to one.
    pub intensity_share: f64,
}

/// Everything the pipeline needs besides the two frames and the pressure
/// reading.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub reconstruction: ReconstructionConfig,
    pub segmentation: SegmentationConfig,
    pub air: AirPressureModel,
    /// Estimates below this force are treated as residual artifacts and
    /// dropped, with their share reallocated.
    pub force_floor_n: f64,
    /// Relative voltage noise the incoming frames are assumed to carry;
    /// feeds the noise-matched regularization weight.
    pub assumed_voltage_noise_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            reconstruction: ReconstructionConfig::default(),
            segmentation: SegmentationConfig::default(),
            air: AirPressureModel::default(),
            force_floor_n: 0.25,
            assumed_voltage_noise_fraction: 0.0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.reconstruction.validate()?;
        self.air.validate()?;
        if self.segmentation.bins < 2 {
            return Err(Error::Config("segmentation bins must be >= 2".into()));
        }
        if self.segmentation.se_radius == 0 {
            return Err(Error::Config("structuring element radius must be >= 1".into()));
        }
        if self.force_floor_n < 0.0 {
            return Err(Error::Config("force_floor_n must be >= 0".into()));
        }
        if self.assumed_voltage_noise_fraction < 0.0 {
            return Err(Error::Config(
                "assumed_voltage_noise_fraction must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Regularization weight after noise matching.
    pub fn effective_lambda(&self) -> f64 {
        self.reconstruction
            .effective_lambda(self.assumed_voltage_noise_fraction)
    }
}

/// Per-stage observability of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineDiagnostics {
    /// Otsu threshold on the normalized image, when segmentation ran.
    pub otsu_threshold: Option<f64>,
    /// Regions found by labeling, before size/force pruning.
    pub roi_count_raw: usize,
    /// Regions that survived pruning and received force.
    pub roi_count: usize,
    /// The preprocessed image carried no contact evidence.
    pub degenerate: bool,
}

/// Output of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    /// Estimates ordered by descending force.
    pub estimates: Vec<ContactEstimate>,
    /// Total force recovered from the pressure channel (N).
    pub total_force_n: f64,
    pub diagnostics: PipelineDiagnostics,
}

/// Split a total force over regions in proportion to their intensity sums:
/// `F_i = F_total · S_i / S_total`.
pub fn allocate_forces(sums: &[f64], total_force: f64) -> Result<Vec<f64>> {
    if sums.is_empty() {
        return Err(Error::Allocation("no regions to allocate force to".into()));
    }
    if sums.iter().any(|s| *s < 0.0 || !s.is_finite()) {
        return Err(Error::Allocation("intensity sums must be finite and >= 0".into()));
    }
    if total_force < 0.0 {
        return Err(Error::Allocation("total force must be >= 0".into()));
    }
    let s_total: f64 = sums.iter().sum();
    if s_total <= 0.0 {
        return Err(Error::Allocation(
            "no contact evidence: all intensity sums are zero".into(),
        ));
    }
    Ok(sums.iter().map(|s| total_force * s / s_total).collect())
}

/// The full reconstruction-to-forces pipeline bound to a cached sensitivity
/// matrix. Runs are read-only and safe to share across threads.
pub struct Pipeline {
    jacobian: Arc<SensitivityMatrix>,
    grid: Arc<PixelGrid>,
    solver: TikhonovSolver,
    config: PipelineConfig,
}

impl Pipeline {
    pub fn new(
        jacobian: Arc<SensitivityMatrix>,
        grid: Arc<PixelGrid>,
        config: PipelineConfig,
    ) -> Result<Self> {
        config.validate()?;
        if jacobian.grid_width() != grid.width() || jacobian.grid_height() != grid.height() {
            return Err(Error::Config(
                "sensitivity matrix and pixel grid dimensions disagree".into(),
            ));
        }
        let solver = TikhonovSolver::new(&jacobian, config.effective_lambda())?;
        Ok(Self {
            jacobian,
            grid,
            solver,
            config,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn grid(&self) -> &PixelGrid {
        &self.grid
    }

    /// Run the pipeline on one acquisition.
    pub fn run(
        &self,
        baseline: &VoltageFrame,
        contact: &VoltageFrame,
        delta_p: f64,
    ) -> Result<PipelineOutput> {
        Ok(self.run_with_image(baseline, contact, delta_p)?.0)
    }

    /// Run the pipeline and also return the preprocessed reconstruction the
    /// segmentation stage saw.
    pub fn run_with_image(
        &self,
        baseline: &VoltageFrame,
        contact: &VoltageFrame,
        delta_p: f64,
    ) -> Result<(PipelineOutput, crate::grid::ConductivityImage)> {
        let delta_v = frame_delta(contact, baseline)?;
        run_pipeline_on_delta(
            &self.jacobian,
            &self.solver,
            &delta_v,
            delta_p,
            &self.config,
        )
    }
}

/// One-shot convenience entry point; builds the solver per call.
pub fn run_pipeline(
    baseline: &VoltageFrame,
    contact: &VoltageFrame,
    delta_p: f64,
    jacobian: &SensitivityMatrix,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    config.validate()?;
    let solver = TikhonovSolver::new(jacobian, config.effective_lambda())?;
    let delta_v = frame_delta(contact, baseline)?;
    Ok(run_pipeline_on_delta(jacobian, &solver, &delta_v, delta_p, config)?.0)
}

fn run_pipeline_on_delta(
    jacobian: &SensitivityMatrix,
    solver: &TikhonovSolver,
    delta_v: &[f64],
    delta_p: f64,
    config: &PipelineConfig,
) -> Result<(PipelineOutput, crate::grid::ConductivityImage)> {
    let total_force = config.air.force_from_pressure(delta_p);

    let x = solver.solve(jacobian, delta_v)?;
    let image = crate::grid::ConductivityImage::from_values(
        jacobian.grid_width(),
        jacobian.grid_height(),
        jacobian.side_length(),
        x,
    )?;
    let preprocessed = preprocess(&image, &config.reconstruction);

    let empty = |otsu: Option<f64>, raw: usize| PipelineOutput {
        estimates: Vec::new(),
        total_force_n: total_force,
        diagnostics: PipelineDiagnostics {
            otsu_threshold: otsu,
            roi_count_raw: raw,
            roi_count: 0,
            degenerate: otsu.is_none(),
        },
    };

    let normalized = normalize(&preprocessed);
    if normalized.degenerate {
        return Ok((empty(None, 0), preprocessed));
    }
    let threshold = otsu_threshold(&normalized.image, config.segmentation.bins)?;
    let partition = binarize(&normalized.image, threshold);
    let se = StructuringElement::disk(config.segmentation.se_radius)?;
    let refined = refine_mask(&partition, &se);
    let components = label_components(&refined, config.segmentation.connectivity);
    let raw_count = components.len();

    let kept: Vec<_> = components
        .into_iter()
        .filter(|m| m.count() >= config.segmentation.min_pixels)
        .collect();
    if kept.is_empty() {
        return Ok((empty(Some(threshold), raw_count), preprocessed));
    }

    // Intensity sums on the preprocessed (pre-normalization) image keep the
    // allocation faithful to reconstructed magnitudes.
    let rois: Vec<Roi> = roi_intensity_sums(&preprocessed, &kept)?;
    let sums: Vec<f64> = rois.iter().map(|r| r.intensity_sum).collect();
    if sums.iter().all(|&s| s == 0.0) {
        return Ok((empty(Some(threshold), raw_count), preprocessed));
    }

    // Allocate, prune regions under the force floor (smallest first), and
    // reallocate over the survivors so the total stays conserved. Allocation
    // is monotone in the sums, so the smallest sum carries the smallest
    // force.
    let mut active: Vec<usize> = (0..rois.len()).collect();
    let (forces, active) = loop {
        let active_sums: Vec<f64> = active.iter().map(|&i| sums[i]).collect();
        let forces = allocate_forces(&active_sums, total_force)?;
        let smallest = (0..active.len())
            .min_by(|&a, &b| forces[a].partial_cmp(&forces[b]).unwrap())
            .expect("active set is nonempty");
        if forces[smallest] < config.force_floor_n && active.len() > 1 {
            active.remove(smallest);
        } else {
            break (forces, active);
        }
    };

    // A lone surviving region below the floor is residual noise, not a
    // contact.
    if active.len() == 1 && forces[0] < config.force_floor_n {
        return Ok((empty(Some(threshold), raw_count), preprocessed));
    }

    let s_active: f64 = active.iter().map(|&i| sums[i]).sum();
    let mut estimates: Vec<ContactEstimate> = active
        .iter()
        .zip(&forces)
        .map(|(&i, &force)| ContactEstimate {
            roi_id: rois[i].id,
            position_cm: rois[i].centroid_cm,
            force_n: force,
            intensity_share: sums[i] / s_active,
        })
        .collect();
    estimates.sort_by(|a, b| {
        b.force_n
            .partial_cmp(&a.force_n)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.roi_id.cmp(&b.roi_id))
    });
    let roi_count = estimates.len();
    Ok((
        PipelineOutput {
            estimates,
            total_force_n: total_force,
            diagnostics: PipelineDiagnostics {
                otsu_threshold: Some(threshold),
                roi_count_raw: raw_count,
                roi_count,
                degenerate: false,
            },
        },
        preprocessed,
    ))
}
