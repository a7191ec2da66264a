//! Corpus layout: `raw/*.img` inputs, `low/*.img` preprocessed outputs and
//! a manifest CSV with one row per source.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::image::Image;

pub const RAW_DIR: &str = "raw";
pub const LOW_DIR: &str = "low";
pub const MANIFEST_CSV: &str = "manifest.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub filename: String,
    /// Estimated noise standard deviation of the raw image.
    pub sigma_hat: f64,
    pub credit: String,
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<CorpusEntry>, DatasetError> {
    let mut reader = csv::Reader::from_path(path)?;
    reader
        .deserialize()
        .map(|r| r.map_err(DatasetError::from))
        .collect()
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[CorpusEntry]) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_path(path)?;
    for e in entries {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}

/// A rectangular region assumed free of signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BackgroundBox {
    pub row: usize,
    pub col: usize,
    pub rows: usize,
    pub cols: usize,
}

fn sample_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Sample standard deviation over `region`, or, when no region is given,
/// the smallest such value over a grid of `side × side` boxes with
/// `side = max(8, min(rows, cols)/8)`.
pub fn background_sigma(img: &Image, region: Option<BackgroundBox>) -> Result<f64, DatasetError> {
    let (r, c) = img.dims();
    let std_of = |b: BackgroundBox| {
        let rows = b.row..b.row + b.rows;
        sample_std(rows.flat_map(move |i| (b.col..b.col + b.cols).map(move |j| img[(i, j)])))
    };
    if let Some(b) = region {
        if b.rows * b.cols < 2 || b.row + b.rows > r || b.col + b.cols > c {
            return Err(DatasetError::InvalidArgument(format!(
                "background box {b:?} is empty or outside the {r}x{c} image"
            )));
        }
        return Ok(std_of(b));
    }
    let side = (r.min(c) / 8).max(8).min(r.min(c));
    if side < 2 {
        return Err(DatasetError::InvalidArgument(
            "image too small for a background estimate".into(),
        ));
    }
    let mut best = f64::INFINITY;
    for i in (0..=r - side).step_by(side) {
        for j in (0..=c - side).step_by(side) {
            best = best.min(std_of(BackgroundBox {
                row: i,
                col: j,
                rows: side,
                cols: side,
            }));
        }
    }
    Ok(best)
}
