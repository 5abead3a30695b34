//! Config-file fallback for command-line flags.
//!
//! A TOML file may set any flag by its long name, either at top level or in a
//! table named after the subcommand (`[fit]`, `[train-gd]`, ...). Flags given
//! on the command line win, then the subcommand table, then the top level.

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::run::CliError;

pub struct Settings {
    table: toml::Table,
    section: &'static str,
}

impl Settings {
    pub fn load(path: Option<&Path>, section: &'static str) -> Result<Self, CliError> {
        let table = match path {
            None => toml::Table::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::validation(format!("invalid config {}: {e}", p.display())))?
            }
        };
        Ok(Self { table, section })
    }

    fn lookup(&self, key: &str) -> Option<&toml::Value> {
        self.table
            .get(self.section)
            .and_then(|s| s.as_table())
            .and_then(|t| t.get(key))
            .or_else(|| self.table.get(key).filter(|v| !v.is_table()))
    }

    pub fn pick<T: DeserializeOwned>(&self, cli: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        if cli.is_some() {
            return Ok(cli);
        }
        match self.lookup(key) {
            None => Ok(None),
            Some(v) => v
                .clone()
                .try_into()
                .map(Some)
                .map_err(|e| CliError::validation(format!("config key '{key}': {e}"))),
        }
    }

    pub fn or<T: DeserializeOwned>(&self, cli: Option<T>, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.pick(cli, key)?.unwrap_or(default))
    }

    pub fn required<T: DeserializeOwned>(&self, cli: Option<T>, key: &str) -> Result<T, CliError> {
        self.pick(cli, key)?.ok_or_else(|| CliError::validation(format!("missing required --{key}")))
    }

    /// Boolean flags: set on the command line, or `true` in the file.
    pub fn flag(&self, cli: bool, key: &str) -> Result<bool, CliError> {
        Ok(cli || self.pick::<bool>(None, key)?.unwrap_or(false))
    }
}
