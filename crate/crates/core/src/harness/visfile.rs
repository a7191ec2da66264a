//! Visibility files: a `u,v,re,im` CSV plus a small JSON sidecar
//! holding the band half-width and the noise level.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::render::{load_png, RenderError};
use crate::image::{Image, ImageError};
use crate::operator::{OperatorError, UVCoverage};

#[derive(Debug, Error)]
pub enum VisFileError {
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Render(#[from] RenderError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisMeta {
    pub band_half_width: f64,
    /// Noise standard deviation; 0 for noiseless data.
    pub tau: f64,
}

/// `vis.csv` → `vis.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_visibilities(
    path: impl AsRef<Path>,
    coverage: &UVCoverage,
    values: &[Complex64],
    tau: f64,
) -> Result<(), VisFileError> {
    let path = path.as_ref();
    if values.len() != coverage.count() {
        return Err(VisFileError::Format {
            path: path.to_path_buf(),
            message: format!("{} values for {} uv points", values.len(), coverage.count()),
        });
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["u", "v", "re", "im"])?;
    for (p, y) in coverage.points().iter().zip(values) {
        w.write_record([p[0], p[1], y.re, y.im].map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    let meta = VisMeta {
        band_half_width: coverage.band_half_width(),
        tau,
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

/// Reads a visibility CSV. The band comes from `band`, else the sidecar,
/// else the coverage is taken to fill it.
pub fn read_visibilities(
    path: impl AsRef<Path>,
    band: Option<f64>,
) -> Result<(UVCoverage, Vec<Complex64>, Option<VisMeta>), VisFileError> {
    let path = path.as_ref();
    let bad = |message: String| VisFileError::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| bad(format!("missing `{name}` column")))
    };
    let idx = [col("u")?, col("v")?, col("re")?, col("im")?];
    let mut points = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut f = [0.0; 4];
        for (slot, &i) in f.iter_mut().zip(&idx) {
            *slot = rec
                .get(i)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|e| bad(format!("record {}: {e}", line + 1)))?;
        }
        points.push([f[0], f[1]]);
        values.push(Complex64::new(f[2], f[3]));
    }
    let side = sidecar_path(path);
    let meta: Option<VisMeta> = if side.exists() {
        Some(serde_json::from_slice(&fs::read(&side)?)?)
    } else {
        None
    };
    let coverage = match band.or(meta.map(|m| m.band_half_width)) {
        Some(b) => UVCoverage::new(points, b)?,
        None => UVCoverage::fill_band(points)?,
    };
    Ok((coverage, values, meta))
}

/// Loads an `.img` file, or a PNG averaged to grayscale in `[0, 1]`.
pub fn read_image(path: impl AsRef<Path>) -> Result<Image, VisFileError> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("png") => Ok(load_png(path)?),
        _ => Ok(Image::load(path)?),
    }
}
