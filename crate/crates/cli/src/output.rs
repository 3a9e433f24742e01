//! Self-describing output directories.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const OUTPUT_ROOT_VAR: &str = "FLAMBE_OUTPUT_ROOT";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Output directory with the resolved config and a provenance line for every CSV.
pub struct OutputDir {
    pub path: PathBuf,
    provenance: String,
}

impl OutputDir {
    /// Creates `dir` (relative paths resolve against the output root) and
    /// writes `config.toml` into it.
    pub fn create(dir: &Path, cfg: &ExperimentConfig, seed: u64) -> Result<Self, CliError> {
        let path = if dir.is_absolute() {
            dir.to_path_buf()
        } else {
            output_root().join(dir)
        };
        std::fs::create_dir_all(&path).map_err(|e| CliError::io(&path, e))?;
        let text = cfg.to_toml()?;
        // where the results go is not part of the experiment
        let mut keyed = cfg.clone();
        keyed.output = Default::default();
        let hash = hex::encode(Sha256::digest(keyed.to_toml()?.as_bytes()));
        let out = Self {
            provenance: format!("# flambe {VERSION} config_sha256={hash} seed={seed}\n"),
            path,
        };
        out.write_text("config.toml", &text)?;
        Ok(out)
    }

    pub fn subdir(&self, name: &str) -> Result<Self, CliError> {
        let path = self.path.join(name);
        std::fs::create_dir_all(&path).map_err(|e| CliError::io(&path, e))?;
        Ok(Self {
            path,
            provenance: self.provenance.clone(),
        })
    }

    /// Opens `name` with the provenance comment already written.
    pub fn csv(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        let p = self.path.join(name);
        let mut w = BufWriter::new(File::create(&p).map_err(|e| CliError::io(&p, e))?);
        w.write_all(self.provenance.as_bytes())
            .map_err(|e| CliError::io(&p, e))?;
        Ok(w)
    }

    /// Writes a header row and one row per record.
    pub fn table<R: AsRef<[String]>>(&self, name: &str, header: &[&str], rows: &[R]) -> Result<(), CliError> {
        let mut w = self.csv(name)?;
        let p = self.path.join(name);
        writeln!(w, "{}", header.join(",")).map_err(|e| CliError::io(&p, e))?;
        for r in rows {
            writeln!(w, "{}", r.as_ref().join(",")).map_err(|e| CliError::io(&p, e))?;
        }
        w.flush().map_err(|e| CliError::io(&p, e))
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Core(e.into()))?;
        self.write_text(name, &text)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<(), CliError> {
        let p = self.path.join(name);
        std::fs::write(&p, text).map_err(|e| CliError::io(&p, e))
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }
}

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}
