//! Effective run configuration and the output directory with its manifest.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Shared flags. Precedence: flag, then `GLS_*` environment variable, then
/// `--config` file, then built-in default.
#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalOpts {
    /// Base seed of every random stream.
    #[arg(long, global = true, env = "GLS_SEED")]
    pub seed: Option<u64>,
    /// Monte Carlo sample or path count.
    #[arg(long, global = true, env = "GLS_SAMPLES")]
    pub samples: Option<usize>,
    /// Trapezoid nodes on the unit interval.
    #[arg(long, global = true, env = "GLS_NODES")]
    pub nodes: Option<usize>,
    /// DKW band confidence level.
    #[arg(long, global = true, env = "GLS_CONFIDENCE")]
    pub confidence: Option<f64>,
    /// Points in exported curves.
    #[arg(long, global = true, env = "GLS_GRID")]
    pub grid: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "GLS_OUT")]
    pub out: Option<PathBuf>,
    /// JSON configuration file with a `schema_version` field.
    #[arg(long, global = true, env = "GLS_CONFIG")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub nodes: Option<usize>,
    pub confidence: Option<f64>,
    pub grid: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Effective {
    pub seed: u64,
    pub samples: usize,
    pub nodes: usize,
    pub confidence: f64,
    pub grid: usize,
    pub out: PathBuf,
}

impl Default for Effective {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            samples: 100_000,
            nodes: 129,
            confidence: 0.95,
            grid: 200,
            out: PathBuf::from("gls-out"),
        }
    }
}

impl Effective {
    pub fn resolve(opts: &GlobalOpts) -> CliResult<Self> {
        let file = match &opts.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let cfg: ConfigFile = serde_json::from_str(&text)
                    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                if cfg.schema_version != SCHEMA_VERSION {
                    return Err(CliError::Input(format!(
                        "{}: unsupported schema_version {}",
                        path.display(),
                        cfg.schema_version
                    )));
                }
                cfg
            }
            None => ConfigFile::default(),
        };
        let d = Effective::default();
        let eff = Effective {
            seed: opts.seed.or(file.seed).unwrap_or(d.seed),
            samples: opts.samples.or(file.samples).unwrap_or(d.samples),
            nodes: opts.nodes.or(file.nodes).unwrap_or(d.nodes),
            confidence: opts.confidence.or(file.confidence).unwrap_or(d.confidence),
            grid: opts.grid.or(file.grid).unwrap_or(d.grid),
            out: opts.out.clone().or(file.out).unwrap_or(d.out),
        };
        eff.check()?;
        Ok(eff)
    }

    fn check(&self) -> CliResult<()> {
        let bad = |what: &str| Err(CliError::Input(what.to_string()));
        if !(10_000..=100_000_000).contains(&self.samples) {
            return bad("--samples must lie in [1e4, 1e8]");
        }
        if !(2..=100_001).contains(&self.nodes) {
            return bad("--nodes must lie in [2, 100001]");
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return bad("--confidence must lie in (0, 1)");
        }
        if !(10..=100_000).contains(&self.grid) {
            return bad("--grid must lie in [10, 100000]");
        }
        Ok(())
    }

    pub fn sim_config(&self) -> gls_core::mcverify::SimConfig {
        gls_core::mcverify::SimConfig::new(self.seed, self.samples)
            .with_nodes(self.nodes)
            .with_confidence(self.confidence)
    }
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    command: &'a C,
    effective: &'a Effective,
    outputs: &'a [String],
}

/// An output directory that records every file written into it.
pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    pub fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        self.files.push(name.to_string());
        Ok(path)
    }

    pub fn text(&mut self, name: &str, body: &str) -> CliResult<()> {
        let path = self.path(name)?;
        fs::write(&path, body).map_err(|e| CliError::io(&path, e))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let body = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Input(format!("serializing {name}: {e}")))?;
        self.text(name, &(body + "\n"))
    }

    /// Writes a CSV with the given header; every value in `{:.16e}`.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> CliResult<()> {
        let mut body = header.join(",");
        body.push('\n');
        for row in rows {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            body.push_str(&line.join(","));
            body.push('\n');
        }
        self.text(name, &body)
    }

    pub fn finish<C: Serialize>(mut self, command: &C, effective: &Effective) -> CliResult<()> {
        let files = std::mem::take(&mut self.files);
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            effective,
            outputs: &files,
        };
        let body = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Input(format!("serializing manifest: {e}")))?;
        let path = self.dir.join("manifest.json");
        fs::write(&path, body + "\n").map_err(|e| CliError::io(&path, e))
    }
}
