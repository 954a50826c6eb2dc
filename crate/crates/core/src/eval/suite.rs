//! Simulated replications of the contact experiments: named scenario suites,
//! noise injection, and aggregate reporting.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use super::matching::match_contacts;
use super::metrics::{score, ScenarioScore};
use crate::config::SimulationConfig;
use crate::error::{Error, Result};
use crate::fem::{forward_solve, ConductivityField, VoltageFrame};
use crate::fuse::Pipeline;
use crate::geometry::{pair_schedule, PairSchedule, SensorGeometry};
use crate::grid::{ConductivityImage, PixelGrid};
use crate::jacobian::{compute_jacobian, SensitivityMatrix};
use crate::mesh::{build_mesh, Mesh};
use crate::phantom::{contacts_to_field, ContactSpec, Scenario};

/// Standard gravity used to convert test weights to forces (m/s²).
pub const GRAVITY: f64 = 9.81;

/// Measurement noise injected during suite runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSettings {
    /// Gaussian voltage noise, std-dev as a fraction of the baseline frame
    /// RMS; applied independently to baseline and contact frames.
    pub voltage_rms_fraction: f64,
    /// Add the air model's Gaussian noise to the pressure reading.
    pub pressure: bool,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        Self {
            voltage_rms_fraction: 0.0,
            pressure: false,
        }
    }
}

impl NoiseSettings {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn is_noiseless(&self) -> bool {
        self.voltage_rms_fraction == 0.0 && !self.pressure
    }
}

/// One scenario to replicate, plus how many repetitions to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCase {
    pub name: String,
    pub scenario: Scenario,
    pub repetitions: usize,
}

/// A named collection of experiment cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub noise: NoiseSettings,
    pub cases: Vec<ExperimentCase>,
}

impl ExperimentSpec {
    pub fn validate(&self, geometry: &SensorGeometry) -> Result<()> {
        if self.cases.is_empty() {
            return Err(Error::Config("experiment spec has no cases".into()));
        }
        for case in &self.cases {
            if case.repetitions == 0 {
                return Err(Error::Config(format!(
                    "case '{}' has zero repetitions",
                    case.name
                )));
            }
            // Re-validate scenarios against the geometry in use.
            Scenario::new(case.scenario.contacts.clone(), geometry)?;
        }
        Ok(())
    }

    /// Copy with different noise settings.
    pub fn with_noise(&self, noise: NoiseSettings) -> Self {
        Self {
            noise,
            ..self.clone()
        }
    }

    /// Copy with every case set to the given repetition count.
    pub fn with_repetitions(&self, repetitions: usize) -> Self {
        let mut out = self.clone();
        for case in &mut out.cases {
            case.repetitions = repetitions;
        }
        out
    }
}

fn contact(x: f64, y: f64, radius: f64, force: f64) -> ContactSpec {
    ContactSpec {
        center: (x, y),
        radius,
        // Mid-range press anomaly: 0.7 S/m against the 1.0 baseline.
        delta_sigma: -0.3,
        force,
    }
}

fn case(
    name: &str,
    geometry: &SensorGeometry,
    contacts: Vec<ContactSpec>,
) -> Result<ExperimentCase> {
    Ok(ExperimentCase {
        name: name.into(),
        scenario: Scenario::new(contacts, geometry)?,
        repetitions: 1,
    })
}

/// Single-contact suite: four test weights at the sensor center (least
/// sensitive spot) and at (-2.5, 2.5).
pub fn single_contact_suite(geometry: &SensorGeometry) -> Result<ExperimentSpec> {
    // (grams, indenter diameter in mm)
    let weights = [(100.0, 22.0), (200.0, 28.0), (300.0, 30.0), (500.0, 38.0)];
    let locations = [("center", (0.0, 0.0)), ("corner", (-2.5, 2.5))];
    let mut cases = Vec::new();
    for (loc_name, (x, y)) in locations {
        for (grams, diameter_mm) in weights {
            let force = grams / 1000.0 * GRAVITY;
            let radius = diameter_mm / 10.0 / 2.0;
            cases.push(case(
                &format!("{}g_{loc_name}", grams as u32),
                geometry,
                vec![contact(x, y, radius, force)],
            )?);
        }
    }
    Ok(ExperimentSpec {
        name: "single".into(),
        noise: NoiseSettings::noiseless(),
        cases,
    })
}

/// Two indenters (15 mm diameter, 300 g total) at separations of 1.5, 3 and
/// 5 cm; case 1 sits in the high-sensitivity band near the top electrodes,
/// case 2 crosses the low-sensitivity center.
///
/// The simulated contact patch (0.5 cm radius) is smaller than the indenter:
/// a rigid pin pressing an elastic layer couples through a patch below its
/// own footprint, and tangent full-size disks at d = 1.5 cm would fuse into
/// one connected region that no reconstruction could split.
pub fn two_distance_suite(geometry: &SensorGeometry) -> Result<ExperimentSpec> {
    let radius = 0.5;
    let force_each = 0.3 * GRAVITY / 2.0;
    let mut cases = Vec::new();
    for d in [1.5, 3.0, 5.0] {
        for (case_name, y) in [("case1", 3.5), ("case2", 0.0)] {
            cases.push(case(
                &format!("d{}_{case_name}", d),
                geometry,
                vec![
                    contact(-d / 2.0, y, radius, force_each),
                    contact(d / 2.0, y, radius, force_each),
                ],
            )?);
        }
    }
    Ok(ExperimentSpec {
        name: "two-distance".into(),
        noise: NoiseSettings::noiseless(),
        cases,
    })
}

/// Three- and four-contact plates under 500 g total: two fixed contacts 6 cm
/// apart with a third either 3 cm or 4.5 cm above their midline, and a 6x3 cm
/// four-contact rectangle.
pub fn multi_contact_suite(geometry: &SensorGeometry) -> Result<ExperimentSpec> {
    let radius = 0.75;
    let total = 0.5 * GRAVITY;
    let three = total / 3.0;
    let four = total / 4.0;
    let cases = vec![
        case(
            "three_a",
            geometry,
            vec![
                contact(-3.0, -1.5, radius, three),
                contact(3.0, -1.5, radius, three),
                contact(0.0, 1.5, radius, three),
            ],
        )?,
        case(
            "three_b",
            geometry,
            vec![
                contact(-3.0, -1.5, radius, three),
                contact(3.0, -1.5, radius, three),
                contact(0.0, 3.0, radius, three),
            ],
        )?,
        case(
            "four",
            geometry,
            vec![
                contact(-3.0, -1.5, radius, four),
                contact(3.0, -1.5, radius, four),
                contact(-3.0, 1.5, radius, four),
                contact(3.0, 1.5, radius, four),
            ],
        )?,
    ];
    Ok(ExperimentSpec {
        name: "multi".into(),
        noise: NoiseSettings::noiseless(),
        cases,
    })
}

/// Look up a built-in suite by name.
pub fn built_in_suite(name: &str, geometry: &SensorGeometry) -> Result<ExperimentSpec> {
    match name {
        "single" => single_contact_suite(geometry),
        "two-distance" => two_distance_suite(geometry),
        "multi" => multi_contact_suite(geometry),
        other => Err(Error::Config(format!(
            "unknown suite '{other}': expected single, two-distance or multi"
        ))),
    }
}

/// Per-case aggregate over its repetitions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseReport {
    pub name: String,
    pub truth_contacts: usize,
    pub repetitions: usize,
    /// Estimates returned in each repetition.
    pub detected: Vec<usize>,
    pub missed_total: usize,
    pub spurious_total: usize,
    pub location_error_cm: Option<f64>,
    pub force_error_n: Option<f64>,
    pub force_ape_percent: Option<f64>,
    pub total_normalized_ape_percent: Option<f64>,
    /// Set when the case could not be simulated; such cases are excluded
    /// from the aggregates instead of aborting the suite.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CaseReport {
    fn failed(name: &str, truth_contacts: usize, repetitions: usize, error: String) -> Self {
        Self {
            name: name.into(),
            truth_contacts,
            repetitions,
            detected: Vec::new(),
            missed_total: 0,
            spurious_total: 0,
            location_error_cm: None,
            force_error_n: None,
            force_ape_percent: None,
            total_normalized_ape_percent: None,
            error: Some(error),
        }
    }
}

/// Suite-level aggregates over the per-case means.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteAggregate {
    pub cases: usize,
    pub cases_failed: usize,
    pub cases_with_detection_failures: usize,
    pub mean_location_error_cm: Option<f64>,
    pub mean_force_error_n: Option<f64>,
    pub mean_force_ape_percent: Option<f64>,
    pub mean_total_normalized_ape_percent: Option<f64>,
}

/// Full suite report; serializes to the CLI's JSON output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub noise: NoiseSettings,
    pub mesh_density: usize,
    pub cases: Vec<CaseReport>,
    pub aggregate: SuiteAggregate,
}

/// Suite outcome: the report plus one captured reconstruction per case.
pub struct SuiteOutcome {
    pub report: SuiteReport,
    /// `(case name, preprocessed reconstruction of the first repetition)`.
    pub images: Vec<(String, ConductivityImage)>,
}

/// Owns the simulation stack (mesh, schedule, grid, sensitivity matrix,
/// pipeline) for repeated suite runs.
pub struct SuiteRunner {
    mesh: Mesh,
    schedule: PairSchedule,
    grid: Arc<PixelGrid>,
    jacobian: Arc<SensitivityMatrix>,
    pipeline: Pipeline,
    baseline_frame: VoltageFrame,
}

impl SuiteRunner {
    /// Build the full stack from a simulation config.
    pub fn new(config: &SimulationConfig) -> Result<Self> {
        let mesh = build_mesh(&config.geometry, config.mesh_density)?;
        let schedule = pair_schedule(config.geometry.electrode_count)?;
        let grid = Arc::new(PixelGrid::build(&mesh, config.grid_width, config.grid_height)?);
        let reference =
            ConductivityField::homogeneous(&mesh, config.geometry.baseline_conductivity)?;
        let jacobian = Arc::new(compute_jacobian(&mesh, &reference, &schedule, &grid)?);
        Self::with_jacobian(config, mesh, schedule, grid, jacobian)
    }

    /// Build around an existing sensitivity matrix (e.g. from the cache).
    pub fn with_jacobian(
        config: &SimulationConfig,
        mesh: Mesh,
        schedule: PairSchedule,
        grid: Arc<PixelGrid>,
        jacobian: Arc<SensitivityMatrix>,
    ) -> Result<Self> {
        let reference =
            ConductivityField::homogeneous(&mesh, config.geometry.baseline_conductivity)?;
        let baseline_frame = forward_solve(&mesh, &reference, &schedule, 1.0)?;
        let pipeline = Pipeline::new(jacobian.clone(), grid.clone(), config.pipeline.clone())?;
        Ok(Self {
            mesh,
            schedule,
            grid,
            jacobian,
            pipeline,
            baseline_frame,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn schedule(&self) -> &PairSchedule {
        &self.schedule
    }

    pub fn grid(&self) -> &PixelGrid {
        &self.grid
    }

    pub fn jacobian(&self) -> &Arc<SensitivityMatrix> {
        &self.jacobian
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn baseline_frame(&self) -> &VoltageFrame {
        &self.baseline_frame
    }

    /// Run every case of the spec, seeding each (case, repetition) with its
    /// own random stream so results are reproducible regardless of thread
    /// scheduling.
    pub fn run(&self, spec: &ExperimentSpec, seed: u64) -> Result<SuiteOutcome> {
        spec.validate(self.mesh.geometry())?;
        let noise = spec.noise;
        let baseline_rms = self.baseline_frame.rms();
        let sigma_v = noise.voltage_rms_fraction * baseline_rms;

        // The reconstructor smooths in proportion to the noise the frames
        // actually carry in this run.
        let pipeline = if noise.voltage_rms_fraction
            != self.pipeline.config().assumed_voltage_noise_fraction
        {
            let mut config = self.pipeline.config().clone();
            config.assumed_voltage_noise_fraction = noise.voltage_rms_fraction;
            Some(Pipeline::new(
                self.jacobian.clone(),
                self.grid.clone(),
                config,
            )?)
        } else {
            None
        };
        let pipeline = pipeline.as_ref().unwrap_or(&self.pipeline);
        let air = &pipeline.config().air;

        let run_case = |case_idx: usize,
                        case: &ExperimentCase|
         -> Result<(CaseReport, ConductivityImage)> {
            let field = contacts_to_field(&self.mesh, &case.scenario)?;
            let contact_frame = forward_solve(&self.mesh, &field, &self.schedule, 1.0)?;

            let mut detected = Vec::with_capacity(case.repetitions);
            let mut scores: Vec<ScenarioScore> = Vec::with_capacity(case.repetitions);
            let mut first_image: Option<ConductivityImage> = None;

            for rep in 0..case.repetitions {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream((case_idx as u64) << 20 | rep as u64);

                let baseline = perturb_frame(&self.baseline_frame, sigma_v, &mut rng)?;
                let contact = perturb_frame(&contact_frame, sigma_v, &mut rng)?;
                let delta_p = if noise.pressure {
                    air.noisy_pressure_from_force(case.scenario.total_force, &mut rng)
                } else {
                    air.pressure_from_force(case.scenario.total_force)
                };

                let (output, image) = pipeline.run_with_image(&baseline, &contact, delta_p)?;
                if first_image.is_none() {
                    first_image = Some(image);
                }
                detected.push(output.estimates.len());

                let est_positions: Vec<(f64, f64)> =
                    output.estimates.iter().map(|e| e.position_cm).collect();
                let truth_positions: Vec<(f64, f64)> =
                    case.scenario.contacts.iter().map(|c| c.center).collect();
                let assignment = match_contacts(&est_positions, &truth_positions);
                scores.push(score(&assignment, &output.estimates, &case.scenario));
            }

            let mean_over = |f: &dyn Fn(&ScenarioScore) -> Option<f64>| {
                let vals: Vec<f64> = scores.iter().filter_map(f).collect();
                if vals.is_empty() {
                    None
                } else {
                    Some(vals.iter().sum::<f64>() / vals.len() as f64)
                }
            };

            let report = CaseReport {
                name: case.name.clone(),
                truth_contacts: case.scenario.contact_count(),
                repetitions: case.repetitions,
                detected,
                missed_total: scores.iter().map(|s| s.missed).sum(),
                spurious_total: scores.iter().map(|s| s.spurious).sum(),
                location_error_cm: mean_over(&|s| s.location_error_cm),
                force_error_n: mean_over(&|s| s.force_error_n),
                force_ape_percent: mean_over(&|s| s.force_ape_percent),
                total_normalized_ape_percent: mean_over(&|s| s.total_normalized_ape_percent),
                error: None,
            };
            Ok((report, first_image.expect("at least one repetition ran")))
        };

        // Case failures land in the report rather than aborting the suite.
        let results: Vec<(CaseReport, Option<ConductivityImage>)> = spec
            .cases
            .par_iter()
            .enumerate()
            .map(|(case_idx, case)| match run_case(case_idx, case) {
                Ok((report, image)) => (report, Some(image)),
                Err(e) => (
                    CaseReport::failed(
                        &case.name,
                        case.scenario.contact_count(),
                        case.repetitions,
                        e.to_string(),
                    ),
                    None,
                ),
            })
            .collect();

        let mut cases = Vec::with_capacity(results.len());
        let mut images = Vec::with_capacity(results.len());
        for (report, image) in results {
            if let Some(image) = image {
                images.push((report.name.clone(), image));
            }
            cases.push(report);
        }

        let aggregate = aggregate_cases(&cases);
        Ok(SuiteOutcome {
            report: SuiteReport {
                suite: spec.name.clone(),
                seed,
                noise,
                mesh_density: self.mesh.density(),
                cases,
                aggregate,
            },
            images,
        })
    }
}

fn aggregate_cases(cases: &[CaseReport]) -> SuiteAggregate {
    let mean_over = |f: &dyn Fn(&CaseReport) -> Option<f64>| {
        let vals: Vec<f64> = cases.iter().filter_map(f).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };
    SuiteAggregate {
        cases: cases.len(),
        cases_failed: cases.iter().filter(|c| c.error.is_some()).count(),
        cases_with_detection_failures: cases
            .iter()
            .filter(|c| c.error.is_none() && (c.missed_total > 0 || c.spurious_total > 0))
            .count(),
        mean_location_error_cm: mean_over(&|c| c.location_error_cm),
        mean_force_error_n: mean_over(&|c| c.force_error_n),
        mean_force_ape_percent: mean_over(&|c| c.force_ape_percent),
        mean_total_normalized_ape_percent: mean_over(&|c| c.total_normalized_ape_percent),
    }
}

/// Copy of a frame with Gaussian noise of the given std-dev added to every
/// value.
fn perturb_frame(
    frame: &VoltageFrame,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<VoltageFrame> {
    if sigma == 0.0 {
        return Ok(frame.clone());
    }
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::Config(format!("invalid noise sigma: {e}")))?;
    let values = frame
        .values()
        .iter()
        .map(|v| v + normal.sample(rng))
        .collect();
    VoltageFrame::new(values, frame.schedule().clone())
}
