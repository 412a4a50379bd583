//! Self-describing output files: every CSV opens with `#` lines carrying
//! the tool version, config hash, seed and timestamp.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};
use spdelab_core::config::ScenarioConfig;

pub const TOOL: &str = "spdelab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    /// Seconds since the Unix epoch; excluded from the determinism contract.
    pub timestamp: u64,
}

impl Provenance {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        Provenance {
            tool: TOOL,
            version: VERSION,
            config_sha256: config_hash(cfg),
            seed: cfg.simulation.seed,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

/// SHA-256 of the resolved configuration serialized as JSON.
pub fn config_hash(cfg: &ScenarioConfig) -> String {
    let json = serde_json::to_vec(cfg).expect("configs always serialize");
    hex::encode(Sha256::digest(&json))
}

pub struct Sink {
    pub dir: PathBuf,
    pub prov: Provenance,
    pub written: Vec<String>,
}

impl Sink {
    pub fn new(dir: &Path, prov: Provenance) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Sink {
            dir: dir.to_path_buf(),
            prov,
            written: Vec::new(),
        })
    }

    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> io::Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut file = io::BufWriter::new(File::create(self.dir.join(name))?);
        writeln!(file, "# tool: {} {}", self.prov.tool, self.prov.version)?;
        writeln!(file, "# config_sha256: {}", self.prov.config_sha256)?;
        writeln!(file, "# seed: {}", self.prov.seed)?;
        writeln!(file, "# timestamp: {}", self.prov.timestamp)?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> io::Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        std::fs::write(self.dir.join(name), text + "\n")
    }
}

/// Shortest round-tripping form; scientific notation for very small or
/// very large magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn flag(b: bool) -> String {
    b.to_string()
}
