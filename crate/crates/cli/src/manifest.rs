use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use coreadership::pipeline::AnalysisParams;
use coreadership::synth::SynthConfig;

pub const FILE_NAME: &str = "manifest.json";

/// Every parameter a run depended on. Replaying one reproduces its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Run {
    Synth {
        config: SynthConfig,
    },
    Analyze {
        logs: Vec<PathBuf>,
        params: AnalysisParams,
        bins: Option<usize>,
    },
    Sweep {
        logs: Vec<PathBuf>,
        params: AnalysisParams,
        sizes: Vec<usize>,
        fit_points: Option<PathBuf>,
    },
    Probe {
        /// Directory of the analyze run being probed.
        run: PathBuf,
        center: Vec<f64>,
        radius: f64,
        k: usize,
        citations: Option<PathBuf>,
        min_citations: u64,
    },
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    #[serde(flatten)]
    pub run: Run,
}

impl Manifest {
    pub fn new(run: Run) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            run,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(FILE_NAME);
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }

    /// Accepts either a manifest file or a run directory containing one.
    pub fn read(path: &Path) -> Result<Self> {
        let file = if path.is_dir() { path.join(FILE_NAME) } else { path.to_owned() };
        let text = fs::read_to_string(&file).with_context(|| format!("reading manifest {}", file.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", file.display()))
    }
}

/// Absolute form of `p`, so manifests stay valid from any working directory.
pub fn absolute(p: &Path) -> Result<PathBuf> {
    fs::canonicalize(p).with_context(|| format!("resolving {}", p.display()))
}
