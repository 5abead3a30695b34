//! Exit codes, output files and run manifests.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const EXIT_OK: u8 = 0;
/// I/O failures and numerical breakdowns.
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_RESOURCE: u8 = 3;
pub const EXIT_INFEASIBLE: u8 = 4;
/// Iteration limit, divergence, or any other non-optimal outcome.
pub const EXIT_NOT_CONVERGED: u8 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(EXIT_VALIDATION, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<leakynorm::Error> for CliError {
    fn from(e: leakynorm::Error) -> Self {
        use leakynorm::Error as E;
        let code = match &e {
            E::Io { .. }
            | E::Parse(_)
            | E::InvalidData(_)
            | E::InvalidConfig(_)
            | E::DimensionMismatch { .. }
            | E::PatternMismatch
            | E::EmptyPatterns => EXIT_VALIDATION,
            E::ResourceLimit(_) | E::Overflow(_) => EXIT_RESOURCE,
            E::DictionaryInfeasible(_) => EXIT_INFEASIBLE,
            E::NotOptimal(_) | E::Diverged { .. } => EXIT_NOT_CONVERGED,
            _ => EXIT_FAILURE,
        };
        Self::new(code, e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::new(EXIT_FAILURE, e.to_string())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes =
        std::fs::read(path).map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Output directory of one run; records what it writes for the manifest.
pub struct RunDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl RunDir {
    pub fn create(dir: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::new(EXIT_FAILURE, format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir, written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::new(EXIT_FAILURE, format!("cannot write {}: {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let text = serde_json::to_string_pretty(value)?;
        self.write(name, &text)
    }

    /// Writes `manifest.json`: the resolved configuration and its hash, input
    /// digests, the seed, tool versions and the files produced.
    pub fn finish<C: Serialize>(
        mut self,
        command: &str,
        config: &C,
        inputs: Vec<(String, String)>,
        seed: Option<u64>,
        status: &str,
    ) -> Result<(), CliError> {
        let config = serde_json::to_value(config)?;
        let config_hash = sha256_hex(serde_json::to_string(&config)?.as_bytes());
        let manifest = Manifest {
            command: command.to_string(),
            status: status.to_string(),
            config,
            config_hash,
            inputs: inputs.into_iter().map(|(name, digest)| Input { name, sha256: digest }).collect(),
            rng: seed.map(|seed| Rng { generator: "ChaCha8Rng::seed_from_u64", seed }),
            versions: Versions {
                leakynorm: leakynorm::VERSION,
                cli: env!("CARGO_PKG_VERSION"),
            },
            outputs: std::mem::take(&mut self.written),
        };
        self.write_json("manifest.json", &manifest)?;
        Ok(())
    }
}

#[derive(Serialize)]
struct Manifest {
    command: String,
    status: String,
    config: serde_json::Value,
    config_hash: String,
    inputs: Vec<Input>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rng: Option<Rng>,
    versions: Versions,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct Input {
    name: String,
    sha256: String,
}

#[derive(Serialize)]
struct Rng {
    generator: &'static str,
    seed: u64,
}

#[derive(Serialize)]
struct Versions {
    leakynorm: &'static str,
    cli: &'static str,
}
