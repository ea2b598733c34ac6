use std::path::Path;

use serde::Serialize;

use super::{RunConfig, RunMetadata};
use crate::error::{Error, Result};
use crate::metrics::Summary;
use crate::oracle::OracleReport;

/// A file produced by a run, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: Vec<u8>,
}

impl OutputFile {
    pub fn new(name: &str, contents: Vec<u8>) -> Self {
        OutputFile { name: name.to_string(), contents }
    }

    /// CSV body preceded by `#`-commented header lines.
    pub fn csv(name: &str, header: &str, body: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Self> {
        let mut contents = header.as_bytes().to_vec();
        body(&mut contents)?;
        Ok(OutputFile::new(name, contents))
    }

    pub fn text(&self) -> &str {
        std::str::from_utf8(&self.contents).unwrap_or("")
    }
}

/// Writes the files in order under `dir`, creating subdirectories.
pub fn write_files(dir: &Path, files: &[OutputFile]) -> Result<()> {
    for f in files {
        let path = dir.join(&f.name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, &f.contents)?;
    }
    Ok(())
}

/// The resolved configuration as `# `-prefixed TOML lines.
pub(super) fn config_header(cfg: &RunConfig) -> Result<String> {
    let text = cfg.to_toml_string()?;
    let mut out = String::from("# wlanmodel run configuration\n");
    for line in text.lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    Ok(out)
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config: &'a RunConfig,
    run: &'a RunMetadata,
}

#[derive(Serialize)]
struct SweepSidecar<'a> {
    config: &'a RunConfig,
    run: SweepMetadata,
}

#[derive(Serialize)]
struct SweepMetadata {
    version: String,
}

fn to_toml<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    toml::to_string(v).map(String::into_bytes).map_err(|e| Error::Config(e.to_string()))
}

pub(super) fn sidecar(cfg: &RunConfig, meta: &RunMetadata) -> Result<Vec<u8>> {
    to_toml(&Sidecar { config: cfg, run: meta })
}

pub(super) fn sweep_sidecar(cfg: &RunConfig) -> Result<Vec<u8>> {
    to_toml(&SweepSidecar { config: cfg, run: SweepMetadata { version: env!("CARGO_PKG_VERSION").to_string() } })
}

pub(super) fn write_summary(w: &mut Vec<u8>, s: &Summary) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["statistic", "value"])?;
    for (k, v) in [
        ("mean_bps", s.mean),
        ("median_bps", s.median),
        ("p5_bps", s.p5),
        ("outage_threshold_bps", s.outage_threshold),
        ("outage", s.outage),
    ] {
        out.write_record([k.to_string(), format!("{v:.12e}")])?;
    }
    out.flush()?;
    Ok(())
}

pub(super) fn write_validation_summary(w: &mut Vec<u8>, det: &Summary, mc: &Summary, oracle: &OracleReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["statistic", "deterministic", "monte_carlo"])?;
    for (k, a, b) in [
        ("mean_bps", det.mean, mc.mean),
        ("median_bps", det.median, mc.median),
        ("p5_bps", det.p5, mc.p5),
        ("outage", det.outage, mc.outage),
    ] {
        out.write_record([k.to_string(), format!("{a:.12e}"), format!("{b:.12e}")])?;
    }
    out.write_record(["realizations".to_string(), String::new(), oracle.n_realizations.to_string()])?;
    out.write_record(["resamples".to_string(), String::new(), oracle.resamples.to_string()])?;
    out.flush()?;
    Ok(())
}
