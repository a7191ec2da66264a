use std::path::Path;

use serde::{Deserialize, Serialize};

use super::OperatorError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageMeta {
    pub pointing: Option<u64>,
    pub duration_h: Option<f64>,
    pub rate_per_h: Option<f64>,
}

/// Sampled Fourier points, in wavelengths. `band_half_width` is the
/// largest |u| or |v| the target pixel size resolves; it maps to half a
/// cycle per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct UVCoverage {
    points: Vec<[f64; 2]>,
    band_half_width: f64,
    pub meta: CoverageMeta,
}

impl UVCoverage {
    pub fn new(points: Vec<[f64; 2]>, band_half_width: f64) -> Result<Self, OperatorError> {
        if points.is_empty() {
            return Err(OperatorError::EmptyCoverage);
        }
        if !(band_half_width > 0.0 && band_half_width.is_finite()) {
            return Err(OperatorError::InvalidConfig(format!(
                "band half-width must be positive, got {band_half_width}"
            )));
        }
        for (index, p) in points.iter().enumerate() {
            if !(p[0].abs() <= band_half_width && p[1].abs() <= band_half_width) {
                return Err(OperatorError::OutOfBand {
                    index,
                    u: p[0],
                    v: p[1],
                    band: band_half_width,
                });
            }
        }
        Ok(UVCoverage {
            points,
            band_half_width,
            meta: CoverageMeta::default(),
        })
    }

    /// Band chosen so the outermost point sits exactly on the band edge.
    pub fn fill_band(points: Vec<[f64; 2]>) -> Result<Self, OperatorError> {
        let band = points
            .iter()
            .map(|p| p[0].abs().max(p[1].abs()))
            .fold(0.0, f64::max);
        if band == 0.0 {
            // only the DC point; any positive band will do
            return UVCoverage::new(points, 1.0);
        }
        UVCoverage::new(points, band)
    }

    pub fn with_meta(mut self, meta: CoverageMeta) -> Self {
        self.meta = meta;
        self
    }

    #[inline]
    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    #[inline]
    pub fn count(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn band_half_width(&self) -> f64 {
        self.band_half_width
    }

    /// Appends the conjugate point `(-u, -v)` for every sample.
    pub fn symmetrized(&self) -> UVCoverage {
        let mut points = self.points.clone();
        points.extend(self.points.iter().map(|p| [-p[0], -p[1]]));
        UVCoverage {
            points,
            band_half_width: self.band_half_width,
            meta: self.meta.clone(),
        }
    }

    pub fn permuted(&self, order: &[usize]) -> UVCoverage {
        UVCoverage {
            points: order.iter().map(|&i| self.points[i]).collect(),
            band_half_width: self.band_half_width,
            meta: self.meta.clone(),
        }
    }

    /// Reads a CSV with a `u,v` header. Without an explicit band the
    /// coverage is taken to fill it.
    pub fn from_csv(path: impl AsRef<Path>, band: Option<f64>) -> Result<Self, OperatorError> {
        let mut rdr = csv::Reader::from_path(path.as_ref()).map_err(|e| OperatorError::Io(e.to_string()))?;
        let headers = rdr
            .headers()
            .map_err(|e| OperatorError::Io(e.to_string()))?
            .clone();
        let iu = headers.iter().position(|h| h.trim() == "u");
        let iv = headers.iter().position(|h| h.trim() == "v");
        let (iu, iv) = match (iu, iv) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(OperatorError::Io("coverage CSV needs a `u,v` header".into())),
        };
        let mut points = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| OperatorError::Io(e.to_string()))?;
            let parse = |i: usize| -> Result<f64, OperatorError> {
                rec.get(i)
                    .unwrap_or("")
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| OperatorError::Io(format!("line {:?}: {e}", rec.position())))
            };
            points.push([parse(iu)?, parse(iv)?]);
        }
        match band {
            Some(b) => UVCoverage::new(points, b),
            None => UVCoverage::fill_band(points),
        }
    }

    pub fn to_csv(&self, path: impl AsRef<Path>) -> Result<(), OperatorError> {
        let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| OperatorError::Io(e.to_string()))?;
        w.write_record(["u", "v"])
            .map_err(|e| OperatorError::Io(e.to_string()))?;
        for p in &self.points {
            w.write_record([format!("{:e}", p[0]), format!("{:e}", p[1])])
                .map_err(|e| OperatorError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| OperatorError::Io(e.to_string()))?;
        Ok(())
    }
}
