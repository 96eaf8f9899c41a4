use std::path::Path;

use serde::{Deserialize, Serialize};

use mcvd_core::experiments::TopologySpec;
use mcvd_core::SimConfig;

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to regenerate a run's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunInputs {
    Analytic {
        model: String,
        topology: TopologySpec,
        diffusion_um2_per_s: f64,
        t_max_s: f64,
        t_step_s: f64,
    },
    Simulate {
        topology: TopologySpec,
        config: SimConfig,
    },
    Experiment {
        topologies: Vec<TopologySpec>,
        config: SimConfig,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub argv: Vec<String>,
    pub inputs: RunInputs,
    pub seed: Option<u64>,
    pub version: String,
    pub threads: usize,
    pub wall_clock_s: f64,
}

impl RunManifest {
    pub fn new(inputs: RunInputs, wall_clock_s: f64) -> Self {
        let seed = match &inputs {
            RunInputs::Analytic { .. } => None,
            RunInputs::Simulate { config, .. } | RunInputs::Experiment { config, .. } => {
                Some(config.seed)
            }
        };
        Self {
            argv: std::env::args().collect(),
            inputs,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            threads: rayon::current_num_threads(),
            wall_clock_s,
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        crate::write_file(path, &(text + "\n"))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read manifest {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::Usage(format!(
                "{}: line {}, column {}: {e}",
                path.display(),
                e.line(),
                e.column()
            ))
        })
    }
}
