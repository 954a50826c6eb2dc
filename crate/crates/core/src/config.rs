//! Top-level simulation configuration, loadable from a JSON file.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::NoiseSettings;
use crate::fuse::PipelineConfig;
use crate::geometry::SensorGeometry;
use crate::phantom::DatasetConfig;
use crate::{DEFAULT_GRID_SIZE, DEFAULT_MESH_DENSITY};

/// Every knob of the simulation stack in one place. All fields have
/// defaults, so a config file only needs to name what it changes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub geometry: SensorGeometry,
    /// Nodes per side of the forward mesh.
    pub mesh_density: usize,
    pub grid_width: usize,
    pub grid_height: usize,
    pub pipeline: PipelineConfig,
    pub dataset: DatasetConfig,
    /// Noise applied by suite runs (overridable per suite spec).
    pub noise: NoiseSettings,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            geometry: SensorGeometry::default(),
            mesh_density: DEFAULT_MESH_DENSITY,
            grid_width: DEFAULT_GRID_SIZE,
            grid_height: DEFAULT_GRID_SIZE,
            pipeline: PipelineConfig::default(),
            dataset: DatasetConfig::default(),
            noise: NoiseSettings::default(),
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.pipeline.validate()?;
        if self.mesh_density < 2 {
            return Err(Error::Config("mesh_density must be at least 2".into()));
        }
        if self.grid_width == 0 || self.grid_height == 0 {
            return Err(Error::Config("grid dimensions must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        let config: SimulationConfig = serde_json::from_str(json)
            .map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        SimulationConfig::default().validate().unwrap();
    }

    #[test]
    fn empty_json_gives_defaults() {
        let config = SimulationConfig::from_json_str("{}").unwrap();
        assert_eq!(config.mesh_density, DEFAULT_MESH_DENSITY);
        assert_eq!(config.grid_width, DEFAULT_GRID_SIZE);
        assert_eq!(config.pipeline.reconstruction.lambda, 3e-5);
        assert_eq!(config.pipeline.segmentation.se_radius, 2);
    }

    #[test]
    fn partial_overrides_apply() {
        let json = r#"{
            "mesh_density": 41,
            "pipeline": {
                "reconstruction": {"lambda": 0.005, "threshold_fraction": 0.2},
                "force_floor_n": 0.1
            },
            "noise": {"voltage_rms_fraction": 0.005, "pressure": true}
        }"#;
        let config = SimulationConfig::from_json_str(json).unwrap();
        assert_eq!(config.mesh_density, 41);
        assert_eq!(config.pipeline.reconstruction.lambda, 0.005);
        assert_eq!(config.pipeline.reconstruction.threshold_fraction, 0.2);
        assert_eq!(config.pipeline.force_floor_n, 0.1);
        assert!(config.noise.pressure);
        // Untouched knobs keep defaults.
        assert_eq!(config.pipeline.segmentation.bins, 256);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(SimulationConfig::from_json_str(r#"{"mesh_densty": 41}"#).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(SimulationConfig::from_json_str(r#"{"mesh_density": 0}"#).is_err());
        let bad_lambda = r#"{"pipeline": {"reconstruction": {"lambda": -1.0}}}"#;
        assert!(SimulationConfig::from_json_str(bad_lambda).is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let config = SimulationConfig::default();
        let json = serde_json::to_string_pretty(&config).unwrap();
        let back = SimulationConfig::from_json_str(&json).unwrap();
        assert_eq!(back.mesh_density, config.mesh_density);
        assert_eq!(back.geometry, config.geometry);
    }
}
