//! Ground-truth contact scenarios, the synthetic dataset generator, and the
//! air-pressure channel model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{forward_solve, ConductivityField, VoltageFrame};
use crate::geometry::{PairSchedule, SensorGeometry};
use crate::grid::{ConductivityImage, PixelGrid};
use crate::mesh::Mesh;

/// One circular contact: where it presses, how it changes conductivity, and
/// the force it carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactSpec {
    /// Disk center (cm).
    pub center: (f64, f64),
    /// Disk radius (cm).
    pub radius: f64,
    /// Conductivity change inside the disk (S/m); negative for a press.
    pub delta_sigma: f64,
    /// Normal force carried by this contact (N).
    pub force: f64,
}

impl ContactSpec {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.center.0).powi(2) + (y - self.center.1).powi(2) <= self.radius * self.radius
    }
}

/// A full ground-truth contact configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub contacts: Vec<ContactSpec>,
    pub total_force: f64,
}

impl Scenario {
    /// Validate against the sensing geometry: disks inside the square,
    /// pairwise non-overlapping (touching allowed), forces consistent.
    pub fn new(contacts: Vec<ContactSpec>, geometry: &SensorGeometry) -> Result<Self> {
        let half = geometry.half_side();
        for (i, c) in contacts.iter().enumerate() {
            if !(c.radius > 0.0) {
                return Err(Error::Config(format!("contact {i}: radius must be positive")));
            }
            if c.force < 0.0 {
                return Err(Error::Config(format!("contact {i}: force must be >= 0")));
            }
            if c.center.0.abs() + c.radius > half + 1e-12
                || c.center.1.abs() + c.radius > half + 1e-12
            {
                return Err(Error::Config(format!(
                    "contact {i} at ({}, {}) r={} leaves the sensing square",
                    c.center.0, c.center.1, c.radius
                )));
            }
        }
        for i in 0..contacts.len() {
            for j in (i + 1)..contacts.len() {
                let (a, b) = (&contacts[i], &contacts[j]);
                let d = ((a.center.0 - b.center.0).powi(2) + (a.center.1 - b.center.1).powi(2))
                    .sqrt();
                if d < a.radius + b.radius - 1e-9 {
                    return Err(Error::Config(format!("contacts {i} and {j} overlap")));
                }
            }
        }
        let total_force = contacts.iter().map(|c| c.force).sum();
        Ok(Self {
            contacts,
            total_force,
        })
    }

    pub fn contact_count(&self) -> usize {
        self.contacts.len()
    }
}

/// Linear pressure-force model of the pneumatic chamber:
/// `ΔP = p1 · F + p2`, with optional Gaussian noise on the reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AirPressureModel {
    pub p1: f64,
    pub p2: f64,
    /// Standard deviation of the pressure noise. The default reproduces a
    /// 1.15 N force RMSE through the slope: 0.192 · 1.15.
    pub noise_sigma: f64,
}

impl Default for AirPressureModel {
    fn default() -> Self {
        Self {
            p1: 0.192,
            p2: -0.088,
            noise_sigma: 0.192 * 1.15,
        }
    }
}

impl AirPressureModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.p1 > 0.0) {
            return Err(Error::Config("air pressure slope p1 must be positive".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::Config("noise_sigma must be >= 0".into()));
        }
        Ok(())
    }

    /// Noiseless pressure reading for a total force.
    pub fn pressure_from_force(&self, total_force: f64) -> f64 {
        self.p1 * total_force + self.p2
    }

    /// Pressure reading with Gaussian sensor noise.
    pub fn noisy_pressure_from_force<R: Rng>(&self, total_force: f64, rng: &mut R) -> f64 {
        let clean = self.pressure_from_force(total_force);
        if self.noise_sigma == 0.0 {
            return clean;
        }
        let normal = Normal::new(0.0, self.noise_sigma).expect("validated sigma");
        clean + normal.sample(rng)
    }

    /// Invert the model: estimated total force, clamped at zero.
    pub fn force_from_pressure(&self, delta_p: f64) -> f64 {
        ((delta_p - self.p2) / self.p1).max(0.0)
    }
}

/// How per-contact forces are assigned when sampling scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ForceRule {
    /// Force proportional to `|Δσ| · disk area`, scaled so the scenario total
    /// is drawn uniformly from `total_range`. Makes proportional force
    /// allocation exactly consistent in the noiseless limit.
    Proportional { total_range: (f64, f64) },
    /// Each contact draws an independent uniform force; breaks the
    /// proportionality assumption on purpose.
    IndependentUniform { per_contact: (f64, f64) },
}

impl Default for ForceRule {
    fn default() -> Self {
        ForceRule::Proportional {
            total_range: (1.0, 12.0),
        }
    }
}

/// Sampling ranges for random scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleRanges {
    /// Contact radius range (cm); the dataset recipe's 0.1-0.2 units of the
    /// domain half-width.
    pub radius: (f64, f64),
    /// Absolute anomaly conductivity range (S/m); delta is value minus the
    /// baseline.
    pub anomaly_sigma: (f64, f64),
    pub force_rule: ForceRule,
    /// Total draws allowed while rejecting overlapping placements.
    pub max_attempts: usize,
}

impl Default for SampleRanges {
    fn default() -> Self {
        Self {
            radius: (0.5, 1.0),
            anomaly_sigma: (0.5, 0.9),
            force_rule: ForceRule::default(),
            max_attempts: 10_000,
        }
    }
}

impl SampleRanges {
    pub fn validate(&self, geometry: &SensorGeometry) -> Result<()> {
        let half = geometry.half_side();
        if !(self.radius.0 > 0.0) || self.radius.1 < self.radius.0 {
            return Err(Error::Config("invalid radius range".into()));
        }
        if self.radius.1 >= half {
            return Err(Error::Config("radius range exceeds the half side".into()));
        }
        if !(self.anomaly_sigma.0 > 0.0) || self.anomaly_sigma.1 < self.anomaly_sigma.0 {
            return Err(Error::Config("invalid anomaly conductivity range".into()));
        }
        if self.max_attempts == 0 {
            return Err(Error::Config("max_attempts must be positive".into()));
        }
        match &self.force_rule {
            ForceRule::Proportional { total_range } => {
                if !(total_range.0 >= 0.0) || total_range.1 < total_range.0 {
                    return Err(Error::Config("invalid total force range".into()));
                }
            }
            ForceRule::IndependentUniform { per_contact } => {
                if !(per_contact.0 >= 0.0) || per_contact.1 < per_contact.0 {
                    return Err(Error::Config("invalid per-contact force range".into()));
                }
            }
        }
        Ok(())
    }
}

fn uniform<R: Rng>(rng: &mut R, range: (f64, f64)) -> f64 {
    if range.1 > range.0 {
        rng.random_range(range.0..range.1)
    } else {
        range.0
    }
}

/// Draw a random scenario with `n_contacts` non-overlapping disks.
///
/// Centers are uniform over the square inset by each disk's radius; radii and
/// anomaly conductivities are uniform over the configured ranges; forces
/// follow the configured coupling rule.
pub fn sample_scenario<R: Rng>(
    rng: &mut R,
    n_contacts: usize,
    geometry: &SensorGeometry,
    ranges: &SampleRanges,
) -> Result<Scenario> {
    if !(1..=5).contains(&n_contacts) {
        return Err(Error::Config(format!(
            "n_contacts must be 1..=5, got {n_contacts}"
        )));
    }
    ranges.validate(geometry)?;
    let half = geometry.half_side();

    let mut placed: Vec<(f64, f64, f64)> = Vec::with_capacity(n_contacts);
    let mut attempts = 0usize;
    while placed.len() < n_contacts {
        if attempts >= ranges.max_attempts {
            return Err(Error::Sampling(format!(
                "could not place {n_contacts} non-overlapping contacts in {} attempts",
                ranges.max_attempts
            )));
        }
        attempts += 1;
        let radius = uniform(rng, ranges.radius);
        let inset = half - radius;
        let x = rng.random_range(-inset..inset);
        let y = rng.random_range(-inset..inset);
        let overlaps = placed.iter().any(|&(px, py, pr)| {
            ((x - px).powi(2) + (y - py).powi(2)).sqrt() < radius + pr
        });
        if !overlaps {
            placed.push((x, y, radius));
        }
    }

    let mut contacts: Vec<ContactSpec> = placed
        .into_iter()
        .map(|(x, y, radius)| {
            let anomaly = uniform(rng, ranges.anomaly_sigma);
            ContactSpec {
                center: (x, y),
                radius,
                delta_sigma: anomaly - geometry.baseline_conductivity,
                force: 0.0,
            }
        })
        .collect();

    match &ranges.force_rule {
        ForceRule::Proportional { total_range } => {
            let total = uniform(rng, *total_range);
            let weights: Vec<f64> = contacts
                .iter()
                .map(|c| c.delta_sigma.abs() * std::f64::consts::PI * c.radius * c.radius)
                .collect();
            let wsum: f64 = weights.iter().sum();
            for (c, w) in contacts.iter_mut().zip(&weights) {
                c.force = total * w / wsum;
            }
        }
        ForceRule::IndependentUniform { per_contact } => {
            for c in contacts.iter_mut() {
                c.force = uniform(rng, *per_contact);
            }
        }
    }

    Scenario::new(contacts, geometry)
}

/// Paint a scenario onto the mesh: elements whose centroid falls inside a
/// contact disk take `baseline + delta_sigma`.
pub fn contacts_to_field(mesh: &Mesh, scenario: &Scenario) -> Result<ConductivityField> {
    let baseline = mesh.geometry().baseline_conductivity;
    let mut values = vec![baseline; mesh.element_count()];
    for (e, value) in values.iter_mut().enumerate() {
        let (x, y) = mesh.element_centroid(e);
        for c in &scenario.contacts {
            if c.contains(x, y) {
                *value = baseline + c.delta_sigma;
                break;
            }
        }
    }
    ConductivityField::new(mesh, values)
}

/// Rasterize the ground truth: `|delta_sigma|` inside each disk, 0 outside.
pub fn ground_truth_image(
    scenario: &Scenario,
    width: usize,
    height: usize,
    side_length: f64,
) -> ConductivityImage {
    let mut img = ConductivityImage::zeros(width, height, side_length);
    for row in 0..height {
        for col in 0..width {
            let (x, y) = img.pixel_center(row, col);
            for c in &scenario.contacts {
                if c.contains(x, y) {
                    img.set(row, col, c.delta_sigma.abs());
                    break;
                }
            }
        }
    }
    img
}

/// Result of a simulated indentation calibration of the pressure channel.
#[derive(Debug, Clone, Serialize)]
pub struct AirCalibration {
    pub points: usize,
    /// Fitted slope and intercept of the pressure-force regression.
    pub p1: f64,
    pub p2: f64,
    /// Pearson correlation of the calibration points.
    pub r: f64,
    /// RMSE of forces recovered through the fitted model (N).
    pub force_rmse_n: f64,
    pub noise_sigma: f64,
}

/// Replicate the indentation calibration: press `points` random forces in
/// `force_range`, read the (noisy) pressure, fit the linear model by least
/// squares, and score the force recovery RMSE with the fitted coefficients.
pub fn calibrate_air(
    model: &AirPressureModel,
    points: usize,
    force_range: (f64, f64),
    seed: u64,
    noisy: bool,
) -> Result<AirCalibration> {
    model.validate()?;
    if points < 3 {
        return Err(Error::Config("calibration needs at least 3 points".into()));
    }
    if !(force_range.1 > force_range.0) || force_range.0 < 0.0 {
        return Err(Error::Config("invalid calibration force range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut forces = Vec::with_capacity(points);
    let mut pressures = Vec::with_capacity(points);
    for _ in 0..points {
        let f = rng.random_range(force_range.0..force_range.1);
        let p = if noisy {
            model.noisy_pressure_from_force(f, &mut rng)
        } else {
            model.pressure_from_force(f)
        };
        forces.push(f);
        pressures.push(p);
    }

    let n = points as f64;
    let mean_f = forces.iter().sum::<f64>() / n;
    let mean_p = pressures.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_f = 0.0;
    let mut var_p = 0.0;
    for (f, p) in forces.iter().zip(&pressures) {
        cov += (f - mean_f) * (p - mean_p);
        var_f += (f - mean_f) * (f - mean_f);
        var_p += (p - mean_p) * (p - mean_p);
    }
    if var_f == 0.0 {
        return Err(Error::Sampling("degenerate calibration forces".into()));
    }
    let p1 = cov / var_f;
    let p2 = mean_p - p1 * mean_f;
    let r = if var_p > 0.0 {
        cov / (var_f.sqrt() * var_p.sqrt())
    } else {
        0.0
    };

    let fitted = AirPressureModel {
        p1,
        p2,
        noise_sigma: model.noise_sigma,
    };
    fitted.validate()?;
    let mse = forces
        .iter()
        .zip(&pressures)
        .map(|(f, p)| {
            let est = fitted.force_from_pressure(*p);
            (est - f) * (est - f)
        })
        .sum::<f64>()
        / n;

    Ok(AirCalibration {
        points,
        p1,
        p2,
        r,
        force_rmse_n: mse.sqrt(),
        noise_sigma: if noisy { model.noise_sigma } else { 0.0 },
    })
}

/// One simulated acquisition: scenario, frames, raster truth, and the
/// pressure reading.
#[derive(Debug, Clone)]
pub struct DatasetSample {
    pub id: usize,
    pub scenario: Scenario,
    pub contact_frame: VoltageFrame,
    pub ground_truth: ConductivityImage,
    pub pressure: f64,
}

/// Dataset generation parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    /// Samples per contact-count category (categories are 1..=5 contacts).
    pub per_category: usize,
    pub ranges: SampleRanges,
    pub air: AirPressureModel,
    /// Add Gaussian noise to the stored pressure readings.
    pub noisy_pressure: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            per_category: 50,
            ranges: SampleRanges::default(),
            air: AirPressureModel::default(),
            noisy_pressure: true,
        }
    }
}

/// A generated dataset: the shared baseline frame plus per-sample records.
#[derive(Debug)]
pub struct Dataset {
    pub seed: u64,
    pub config: DatasetConfig,
    pub baseline_frame: VoltageFrame,
    pub samples: Vec<DatasetSample>,
}

/// Generate `5 × per_category` samples, evenly split over 1..=5 simultaneous
/// contacts, deterministically from the seed.
///
/// Sample `i` draws from its own seeded stream, so generation parallelizes
/// without affecting the output.
pub fn generate_dataset(
    mesh: &Mesh,
    schedule: &PairSchedule,
    grid: &PixelGrid,
    config: &DatasetConfig,
    seed: u64,
) -> Result<Dataset> {
    if config.per_category == 0 {
        return Err(Error::Config("per_category must be at least 1".into()));
    }
    config.ranges.validate(mesh.geometry())?;
    config.air.validate()?;

    let baseline_field =
        ConductivityField::homogeneous(mesh, mesh.geometry().baseline_conductivity)?;
    let baseline_frame = forward_solve(mesh, &baseline_field, schedule, 1.0)?;

    let total = 5 * config.per_category;
    let samples: Vec<Result<DatasetSample>> = (0..total)
        .into_par_iter()
        .map(|i| {
            let n_contacts = i / config.per_category + 1;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let scenario = sample_scenario(&mut rng, n_contacts, mesh.geometry(), &config.ranges)
                .map_err(|e| Error::Sampling(format!("sample {i}: {e}")))?;
            let field = contacts_to_field(mesh, &scenario)?;
            let contact_frame = forward_solve(mesh, &field, schedule, 1.0)
                .map_err(|e| Error::Solver(format!("sample {i}: {e}")))?;
            let ground_truth = ground_truth_image(
                &scenario,
                grid.width(),
                grid.height(),
                grid.side_length(),
            );
            let pressure = if config.noisy_pressure {
                config.air.noisy_pressure_from_force(scenario.total_force, &mut rng)
            } else {
                config.air.pressure_from_force(scenario.total_force)
            };
            Ok(DatasetSample {
                id: i,
                scenario,
                contact_frame,
                ground_truth,
                pressure,
            })
        })
        .collect();

    let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        seed,
        config: config.clone(),
        baseline_frame,
        samples,
    })
}
