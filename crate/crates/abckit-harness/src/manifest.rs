//! JSON run manifest: enough metadata to rerun a study byte-for-byte.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::tables::{CellRecord, HarnessError};

#[derive(Debug, Serialize, Deserialize)]
pub struct CellSummary {
    pub tol: f64,
    pub n: u64,
    pub seed: u64,
    pub wall_time_s: f64,
    pub complete: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub harness_version: String,
    /// Unix seconds at which the run started.
    pub started_at_unix_s: u64,
    pub total_wall_time_s: f64,
    pub config: ExperimentConfig,
    pub cells: Vec<CellSummary>,
    pub budget_exhausted: bool,
}

impl RunManifest {
    pub fn new(
        config: &ExperimentConfig,
        records: &[CellRecord],
        started_at: SystemTime,
        total_wall_time_s: f64,
    ) -> Self {
        Self {
            harness_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at_unix_s: started_at
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            total_wall_time_s,
            config: config.clone(),
            cells: records
                .iter()
                .map(|r| CellSummary {
                    tol: r.tol,
                    n: r.n,
                    seed: r.seed,
                    wall_time_s: r.wall_time_s,
                    complete: r.complete,
                })
                .collect(),
            budget_exhausted: records.iter().any(|r| !r.complete),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        let text = serde_json::to_string_pretty(self)
            .expect("manifest serialization cannot fail");
        std::fs::write(path, text).map_err(|e| HarnessError::Io {
            context: format!("writing {}", path.display()),
            source: e,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tables::reproduce_tables;

    #[test]
    fn manifest_roundtrips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let config = ExperimentConfig {
            tolerances: vec![0.5],
            sample_sizes: vec![100],
            particles: 40,
            output_dir: dir.path().to_path_buf(),
            ..ExperimentConfig::default()
        };
        let outcome = reproduce_tables(&config).unwrap();
        let manifest = RunManifest::new(&config, &outcome.records, SystemTime::now(), 1.5);
        let path = dir.path().join("run-manifest.json");
        manifest.write(&path).unwrap();
        let parsed: RunManifest =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(parsed.cells.len(), 1);
        assert_eq!(parsed.cells[0].seed, outcome.records[0].seed);
        assert!(!parsed.budget_exhausted);
        assert_eq!(parsed.config.particles, 40);
        assert_eq!(parsed.harness_version, env!("CARGO_PKG_VERSION"));
    }
}
