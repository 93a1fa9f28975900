//! Artifact writing. Every JSON document carries the tool version and the resolved config;
//! CSV files are listed in `manifest.json`, which carries the same provenance.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

pub const TOOL: &str = "grazing";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    result: &'a T,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    files: &'a [String],
}

pub struct Output<'a> {
    dir: PathBuf,
    command: &'a str,
    config: &'a RunConfig,
    files: Vec<String>,
}

impl<'a> Output<'a> {
    pub fn create(command: &'a str, config: &'a RunConfig) -> Result<Self, CliError> {
        let dir = PathBuf::from(&config.output.dir);
        fs::create_dir_all(&dir)?;
        Ok(Output { dir, command, config, files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// The full JSON document for `result`, as written by [`Output::json`].
    pub fn document<T: Serialize>(&self, result: &T) -> String {
        let doc = Document { tool: TOOL, version: VERSION, command: self.command, config: self.config, result };
        serde_json::to_string_pretty(&doc).expect("document serialises") + "\n"
    }

    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> Result<String, CliError> {
        let text = self.document(result);
        self.text(name, &text)?;
        Ok(text)
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        fs::write(self.dir.join(name), text)?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// RFC-4180 CSV with a header row.
    pub fn csv<R, I>(&mut self, name: &str, header: &[&str], rows: R) -> Result<(), CliError>
    where
        R: IntoIterator<Item = I>,
        I: IntoIterator<Item = String>,
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_path(self.dir.join(name))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn finish(mut self) -> Result<Vec<String>, CliError> {
        self.files.push("manifest.json".into());
        let m = Manifest { tool: TOOL, version: VERSION, command: self.command, config: self.config, files: &self.files };
        fs::write(self.dir.join("manifest.json"), serde_json::to_string_pretty(&m).expect("manifest serialises") + "\n")?;
        Ok(self.files)
    }
}

/// Shortest round-trip text of a float.
pub fn num(v: f64) -> String {
    format!("{v}")
}
