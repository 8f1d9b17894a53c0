//! The run manifest: a JSON snapshot of the resolved plan plus per-cell
//! status. It is written before any result file, updated as cells finish,
//! and drives resume.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use vecell_core::metrics::SummaryStats;

use crate::config::Plan;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    /// "done" or "failed".
    pub status: String,
    /// Artifact path relative to the output dir, for learned schemes.
    pub artifact: Option<String>,
    /// Episode log path relative to the output dir.
    pub episode_log: Option<String>,
    pub summary: Option<SummaryStats>,
    /// The finished summary CSV row (without header).
    pub summary_row: Option<String>,
    pub wall_secs: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Code version that produced the run.
    pub version: String,
    pub plan: Plan,
    /// Joint catalog content hash, hex.
    pub catalog_hash: String,
    pub catalog_len: usize,
    /// Per-AP catalog hash, hex (used by the MARL scheme).
    pub marl_catalog_hash: String,
    pub marl_catalog_len: usize,
    /// Contiguous [lo, hi) catalog segments of the distributed agents.
    pub segments: Vec<(usize, usize)>,
    /// Cell key -> outcome; the key is "<sweep>/<scheme>/seed<seed>".
    pub cells: BTreeMap<String, CellRecord>,
}

impl Manifest {
    pub fn cell_key(sweep_label: &str, scheme: &str, seed: u64) -> String {
        format!("{sweep_label}/{scheme}/seed{seed}")
    }

    pub fn save(&self, out_dir: &Path) -> Result<()> {
        let path = out_dir.join(MANIFEST_NAME);
        let tmp = out_dir.join(format!("{MANIFEST_NAME}.tmp"));
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&tmp, text)
            .with_context(|| format!("cannot write manifest {}", tmp.display()))?;
        std::fs::rename(&tmp, &path)
            .with_context(|| format!("cannot move manifest into place at {}", path.display()))?;
        Ok(())
    }

    pub fn load(out_dir: &Path) -> Result<Manifest> {
        let path = out_dir.join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("cannot read manifest {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("corrupted manifest {}", path.display()))
    }

    /// Checks that a manifest found in the output dir belongs to this plan.
    pub fn check_compatible(&self, plan: &Plan, catalog_hash: &str) -> Result<()> {
        if self.catalog_hash != catalog_hash {
            bail!(
                "output dir holds a run against a different catalog (manifest {}, current {catalog_hash})",
                self.catalog_hash
            );
        }
        if self.plan != *plan {
            bail!("output dir holds a run for a different plan; use a fresh directory");
        }
        Ok(())
    }
}
