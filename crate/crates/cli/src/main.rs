//! Command-line interface for the duotact simulation toolkit.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::sync::Arc;

use duotact_core::config::SimulationConfig;
use duotact_core::eval::{built_in_suite, ExperimentSpec, NoiseSettings, SuiteRunner};
use duotact_core::fem::ConductivityField;
use duotact_core::fuse::Pipeline;
use duotact_core::geometry::pair_schedule;
use duotact_core::grid::PixelGrid;
use duotact_core::io;
use duotact_core::jacobian::{compute_jacobian, jacobian_cache_key};
use duotact_core::mesh::build_mesh;
use duotact_core::phantom::{calibrate_air, generate_dataset};
use duotact_core::recon::{preprocess, tikhonov_reconstruct};
use duotact_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "duotact",
    about = "Dual-channel tactile skin simulation: forward modeling, reconstruction, segmentation and force allocation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// JSON configuration file; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    Generate {
        #[command(flatten)]
        config: ConfigArg,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Samples per contact-count category (1..=5 contacts).
        #[arg(long, default_value_t = 50)]
        per_category: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compute the sensitivity matrix and cache it to a binary file.
    Jacobian {
        #[command(flatten)]
        config: ConfigArg,
        /// Cache file to write.
        #[arg(long)]
        out: PathBuf,
        /// Also export the forward mesh as JSON.
        #[arg(long)]
        mesh_json: Option<PathBuf>,
    },
    /// Reconstruct a conductivity image from a baseline/contact frame pair.
    Reconstruct {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        contact: PathBuf,
        /// Sensitivity cache from `jacobian`; computed on the fly if omitted.
        #[arg(long)]
        jacobian: Option<PathBuf>,
        /// Write the raw reconstruction as PGM here.
        #[arg(long)]
        out_pgm: Option<PathBuf>,
        /// Write the raw reconstruction as CSV here.
        #[arg(long)]
        out_csv: Option<PathBuf>,
        /// Also write the preprocessed (masked, thresholded) image.
        #[arg(long)]
        out_preprocessed_pgm: Option<PathBuf>,
    },
    /// Run the full pipeline on one acquisition and print JSON estimates.
    Pipeline {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        contact: PathBuf,
        /// Air-pressure reading for the acquisition.
        #[arg(long)]
        pressure: f64,
        #[arg(long)]
        jacobian: Option<PathBuf>,
        /// Write the JSON result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named suite (single, two-distance, multi) or a spec JSON file.
    Suite {
        #[command(flatten)]
        config: ConfigArg,
        /// Built-in suite name.
        #[arg(long, conflicts_with = "spec")]
        name: Option<String>,
        /// Experiment spec JSON file.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output directory for the report and per-case images.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override: Gaussian voltage noise as a fraction of baseline RMS.
        #[arg(long)]
        voltage_noise: Option<f64>,
        /// Override: add pressure sensor noise.
        #[arg(long)]
        pressure_noise: bool,
        /// Override: repetitions per case.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Replicate the air-channel indentation calibration.
    CalibrateAir {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 245)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Disable pressure noise (recovers the exact model).
        #[arg(long)]
        noiseless: bool,
        /// Write the JSON result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(arg: &ConfigArg) -> Result<SimulationConfig> {
    match &arg.config {
        Some(path) => SimulationConfig::from_json_file(path),
        None => Ok(SimulationConfig::default()),
    }
}

/// Load the sensitivity matrix from a cache file (validating its key against
/// the configured geometry) or compute it fresh.
fn load_or_compute_jacobian(
    config: &SimulationConfig,
    cache: &Option<PathBuf>,
) -> Result<(duotact_core::jacobian::SensitivityMatrix, PixelGrid)> {
    let mesh = build_mesh(&config.geometry, config.mesh_density)?;
    let grid = PixelGrid::build(&mesh, config.grid_width, config.grid_height)?;
    let reference =
        ConductivityField::homogeneous(&mesh, config.geometry.baseline_conductivity)?;
    match cache {
        Some(path) => {
            let expected = jacobian_cache_key(&mesh, &reference, &grid);
            let matrix = io::read_sensitivity(path, Some(expected))?;
            Ok((matrix, grid))
        }
        None => {
            let schedule = pair_schedule(config.geometry.electrode_count)?;
            let matrix = compute_jacobian(&mesh, &reference, &schedule, &grid)?;
            Ok((matrix, grid))
        }
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate {
            config,
            out,
            per_category,
            seed,
        } => {
            let config_val = load_config(&config)?;
            let mesh = build_mesh(&config_val.geometry, config_val.mesh_density)?;
            let schedule = pair_schedule(config_val.geometry.electrode_count)?;
            let grid = PixelGrid::build(&mesh, config_val.grid_width, config_val.grid_height)?;
            let mut dataset_config = config_val.dataset.clone();
            dataset_config.per_category = per_category;
            let dataset = generate_dataset(&mesh, &schedule, &grid, &dataset_config, seed)?;
            let manifest = io::write_dataset(&dataset, &out)?;
            eprintln!(
                "wrote {} samples to {} (manifest {})",
                dataset.samples.len(),
                out.display(),
                manifest.display()
            );
        }
        Command::Jacobian {
            config,
            out,
            mesh_json,
        } => {
            let config_val = load_config(&config)?;
            let (matrix, _) = load_or_compute_jacobian(&config_val, &None)?;
            io::write_sensitivity(&matrix, &out)?;
            if let Some(path) = &mesh_json {
                let mesh = build_mesh(&config_val.geometry, config_val.mesh_density)?;
                io::write_mesh_json(&mesh, path)?;
            }
            eprintln!(
                "wrote {}x{} sensitivity matrix (key {:#018x}) to {}",
                matrix.rows(),
                matrix.cols(),
                matrix.cache_key(),
                out.display()
            );
        }
        Command::Reconstruct {
            config,
            baseline,
            contact,
            jacobian,
            out_pgm,
            out_csv,
            out_preprocessed_pgm,
        } => {
            let config_val = load_config(&config)?;
            let (matrix, _) = load_or_compute_jacobian(&config_val, &jacobian)?;
            let baseline_frame = io::read_frame_csv(&baseline)?;
            let contact_frame = io::read_frame_csv(&contact)?;
            let delta = duotact_core::fem::frame_delta(&contact_frame, &baseline_frame)?;
            let recon_config = &config_val.pipeline.reconstruction;
            let image = tikhonov_reconstruct(&matrix, &delta, recon_config)?;
            if let Some(path) = &out_pgm {
                io::write_image_pgm(&image, path)?;
            }
            if let Some(path) = &out_csv {
                io::write_image_csv(&image, path)?;
            }
            if let Some(path) = &out_preprocessed_pgm {
                let pre = preprocess(&image, recon_config);
                io::write_image_pgm(&pre, path)?;
            }
            if out_pgm.is_none() && out_csv.is_none() && out_preprocessed_pgm.is_none() {
                return Err(Error::Config(
                    "no output requested: pass --out-pgm, --out-csv or --out-preprocessed-pgm"
                        .into(),
                ));
            }
        }
        Command::Pipeline {
            config,
            baseline,
            contact,
            pressure,
            jacobian,
            out,
        } => {
            let config_val = load_config(&config)?;
            let (matrix, grid) = load_or_compute_jacobian(&config_val, &jacobian)?;
            let baseline_frame = io::read_frame_csv(&baseline)?;
            let contact_frame = io::read_frame_csv(&contact)?;
            let pipeline = Pipeline::new(
                Arc::new(matrix),
                Arc::new(grid),
                config_val.pipeline.clone(),
            )?;
            let output = pipeline.run(&baseline_frame, &contact_frame, pressure)?;
            let json = serde_json::to_string_pretty(&output)
                .map_err(|e| Error::Format(format!("serialization failed: {e}")))?;
            match out {
                Some(path) => std::fs::write(path, json + "\n")?,
                None => println!("{json}"),
            }
        }
        Command::Suite {
            config,
            name,
            spec,
            out,
            seed,
            voltage_noise,
            pressure_noise,
            reps,
        } => {
            let config_val = load_config(&config)?;
            let mut spec_val: ExperimentSpec = match (&name, &spec) {
                (Some(n), None) => built_in_suite(n, &config_val.geometry)?,
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(path)?;
                    serde_json::from_str(&text)
                        .map_err(|e| Error::Config(format!("invalid suite spec: {e}")))?
                }
                _ => {
                    return Err(Error::Config(
                        "pass exactly one of --name or --spec".into(),
                    ))
                }
            };
            if voltage_noise.is_some() || pressure_noise {
                spec_val = spec_val.with_noise(NoiseSettings {
                    voltage_rms_fraction: voltage_noise
                        .unwrap_or(spec_val.noise.voltage_rms_fraction),
                    pressure: pressure_noise || spec_val.noise.pressure,
                });
            }
            if let Some(r) = reps {
                spec_val = spec_val.with_repetitions(r);
            }
            let runner = SuiteRunner::new(&config_val)?;
            let outcome = runner.run(&spec_val, seed)?;
            std::fs::create_dir_all(&out)?;
            io::write_json(&outcome.report, &out.join("report.json"))?;
            for (case_name, image) in &outcome.images {
                io::write_image_pgm(image, &out.join(format!("{case_name}.pgm")))?;
            }
            eprintln!(
                "suite '{}': {} cases, report at {}",
                outcome.report.suite,
                outcome.report.cases.len(),
                out.join("report.json").display()
            );
        }
        Command::CalibrateAir {
            config,
            points,
            seed,
            noiseless,
            out,
        } => {
            let config_val = load_config(&config)?;
            let calibration = calibrate_air(
                &config_val.pipeline.air,
                points,
                (1.0, 12.0),
                seed,
                !noiseless,
            )?;
            let json = serde_json::to_string_pretty(&calibration)
                .map_err(|e| Error::Format(format!("serialization failed: {e}")))?;
            match out {
                Some(path) => std::fs::write(path, json + "\n")?,
                None => println!("{json}"),
            }
        }
    }
    Ok(())
}

fn main() {
    match run() {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            let code = if e.is_config() { 2 } else { 3 };
            std::process::exit(code);
        }
    }
}
