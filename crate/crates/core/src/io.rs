//! Run output: `series.csv`, `meta.json`, `predictions.json`, σ diagnostics.
//!
//! CSV columns are fixed: `n,F,re_f,im_f`. Floats are written with Rust's
//! shortest round-trip formatting, so a file read back reproduces the exact
//! bits. Every file is written to a temporary sibling and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::echo::{FidelitySample, FidelitySeries, SeriesMeta};
use crate::error::{FreezeError, Result};
use crate::semiclassics::{PredictionSet, SigmaEstimate};

pub const SCHEMA_VERSION: u32 = 1;
pub const SERIES_HEADER: &str = "n,F,re_f,im_f";
pub const SIGMA_HEADER: &str = "n,variance";

pub const SERIES_FILE: &str = "series.csv";
pub const META_FILE: &str = "meta.json";
pub const PREDICTIONS_FILE: &str = "predictions.json";
pub const SIGMA_FILE: &str = "sigma.csv";

/// Contents of `meta.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMetadata {
    pub schema_version: u32,
    pub run: String,
    /// Full run specification as given, after defaults.
    pub spec: serde_json::Value,
    pub seed: u64,
    pub series: Option<SeriesMeta>,
    /// Extra diagnostics (classical error bars, σ estimates, ...).
    #[serde(default)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl RunMetadata {
    pub fn new(run: impl Into<String>, spec: serde_json::Value, seed: u64) -> Self {
        Self { schema_version: SCHEMA_VERSION, run: run.into(), spec, seed, series: None, extra: Default::default() }
    }
}

/// Write `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| FreezeError::InvalidConfig(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn series_to_csv(samples: &[FidelitySample]) -> String {
    let mut s = String::with_capacity(32 * (samples.len() + 1));
    s.push_str(SERIES_HEADER);
    s.push('\n');
    for x in samples {
        s.push_str(&format!("{},{},{},{}\n", x.n, x.fidelity, x.amplitude_re, x.amplitude_im));
    }
    s
}

pub fn series_from_csv(text: &str) -> Result<Vec<FidelitySample>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == SERIES_HEADER => {}
        other => return Err(FreezeError::InvalidConfig(format!("expected header `{SERIES_HEADER}`, found {other:?}"))),
    }
    let bad = |line: usize, what: &str| FreezeError::InvalidConfig(format!("series line {line}: {what}"));
    let mut out = Vec::new();
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad(k + 2, "expected 4 fields"));
        }
        let num = |i: usize| fields[i].trim().parse::<f64>().map_err(|e| bad(k + 2, &e.to_string()));
        out.push(FidelitySample {
            n: fields[0].trim().parse().map_err(|e: std::num::ParseIntError| bad(k + 2, &e.to_string()))?,
            fidelity: num(1)?,
            amplitude_re: num(2)?,
            amplitude_im: num(3)?,
        });
    }
    Ok(out)
}

pub fn write_series_csv(path: &Path, series: &FidelitySeries) -> Result<()> {
    write_atomic(path, series_to_csv(&series.samples).as_bytes())
}

pub fn read_series_csv(path: &Path) -> Result<Vec<FidelitySample>> {
    series_from_csv(&fs::read_to_string(path)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn sigma_to_csv(estimate: &SigmaEstimate) -> String {
    let mut s = String::from(SIGMA_HEADER);
    s.push('\n');
    for p in &estimate.diagnostics {
        s.push_str(&format!("{},{}\n", p.n, p.variance));
    }
    s
}

/// Paths of the files making up one run directory.
#[derive(Clone, Debug)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn series(&self) -> PathBuf {
        self.root.join(SERIES_FILE)
    }

    pub fn meta(&self) -> PathBuf {
        self.root.join(META_FILE)
    }

    pub fn predictions(&self) -> PathBuf {
        self.root.join(PREDICTIONS_FILE)
    }

    pub fn sigma(&self) -> PathBuf {
        self.root.join(SIGMA_FILE)
    }

    pub fn write_series(&self, series: &FidelitySeries, mut meta: RunMetadata) -> Result<()> {
        write_series_csv(&self.series(), series)?;
        meta.series = Some(series.meta.clone());
        write_json(&self.meta(), &meta)
    }

    pub fn write_predictions(&self, predictions: &PredictionSet) -> Result<()> {
        write_json(&self.predictions(), predictions)
    }

    pub fn write_sigma(&self, estimate: &SigmaEstimate) -> Result<()> {
        write_atomic(&self.sigma(), sigma_to_csv(estimate).as_bytes())
    }
}
