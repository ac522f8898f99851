use std::path::Path;

use anyhow::Context;
use evcs_ph::sim::Prepared;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Stability and steady-state evidence recomputable from the scenario alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    pub equilibrium_residual: f64,
    pub residual_tolerance: f64,
    /// Closed-loop Jacobian eigenvalues as `[re, im]`.
    pub spectrum: Vec<[f64; 2]>,
    pub max_real_part: f64,
    pub hurwitz: bool,
}

impl Certificates {
    pub fn of(prep: &Prepared) -> Self {
        let spec = prep.controller.spectrum();
        Certificates {
            equilibrium_residual: prep.eq.residual,
            residual_tolerance: prep.eq.tolerance(prep.model.system()),
            spectrum: spec.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
            max_real_part: spec.max_real_part,
            hurwitz: spec.max_real_part < 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub accepted: Option<usize>,
    pub rejected: Option<usize>,
    pub rhs_evals: Option<usize>,
    /// Fixed integration steps of a switched run.
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario_hash: String,
    /// Fully resolved scenario in canonical form.
    pub scenario: String,
    /// CSV file name, relative to the record.
    pub csv: String,
    pub csv_sha256: String,
    /// Period-averaged companion CSV of a switched run.
    pub period_average_csv: Option<String>,
    pub model: String,
    pub controller: String,
    pub samples: usize,
    pub certificates: Certificates,
    pub solver: SolverStats,
    pub duration_s: f64,
}

impl RunRecord {
    pub fn summary(&self) -> String {
        format!(
            "{} {} run: {} samples -> {} (scenario {}, {:.3} s)",
            self.controller,
            self.model,
            self.samples,
            self.csv,
            &self.scenario_hash[..12],
            self.duration_s
        )
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
