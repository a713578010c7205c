use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use birkhoff::Result;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: Value,
    pub input_hash: Option<String>,
    pub outputs: Vec<String>,
    pub duration_secs: f64,
}

/// Collects output files for one command and writes its manifest.
pub struct Run {
    command: String,
    dir: PathBuf,
    started: Instant,
    outputs: Vec<String>,
}

impl Run {
    pub fn start(command: &str, dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { command: command.to_owned(), dir: dir.to_owned(), started: Instant::now(), outputs: Vec::new() })
    }

    /// Creates `name` in the output directory and hands a buffered writer to `body`.
    pub fn write<F>(&mut self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let mut out = BufWriter::new(File::create(self.dir.join(name))?);
        body(&mut out)?;
        out.flush()?;
        self.outputs.push(name.to_owned());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, |out| {
            serde_json::to_writer_pretty(&mut *out, value)?;
            writeln!(out)?;
            Ok(())
        })
    }

    pub fn finish(self, config: Value, input_hash: Option<String>) -> Result<()> {
        let manifest = RunManifest {
            command: self.command.clone(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config,
            input_hash,
            outputs: self.outputs,
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        let file = File::create(self.dir.join(format!("{}.manifest.json", self.command)))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut out, &manifest)?;
        writeln!(out)?;
        out.flush()?;
        Ok(())
    }
}
