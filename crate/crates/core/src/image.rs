//! Real-valued 2D intensity grids and their on-disk format.
//!
//! The file layout is a 16-byte magic, a little-endian `u32` giving the
//! length of a JSON header, the header itself (`dims`, `dtype`,
//! `endianness`), and the row-major `f64` payload in little-endian order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const IMAGE_MAGIC: &[u8; 16] = b"AIRI-IMAGE-F64\x00\x01";

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("pixel buffer holds {actual} values but dims {rows}x{cols} need {expected}")]
    BufferLength {
        rows: usize,
        cols: usize,
        expected: usize,
        actual: usize,
    },
    #[error("image dimensions differ: {left:?} vs {right:?}")]
    DimMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("non-finite pixel at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("bad image file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A real image stored row-major; `rows` is the first (slow) axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Image {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Image {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if data.len() != rows * cols {
            return Err(ImageError::BufferLength {
                rows,
                cols,
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Image { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Image { rows, cols, data }
    }

    /// Unit impulse at the phase centre `(rows/2, cols/2)`.
    pub fn impulse(rows: usize, cols: usize) -> Self {
        let mut img = Image::zeros(rows, cols);
        img[(rows / 2, cols / 2)] = 1.0;
        img
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn ensure_same_dims(&self, other: &Image) -> Result<(), ImageError> {
        if self.dims() != other.dims() {
            return Err(ImageError::DimMismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<(), ImageError> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(ImageError::NonFinite {
                row: i / self.cols,
                col: i % self.cols,
            }),
            None => Ok(()),
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Image) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index of the largest pixel (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.data.iter().enumerate() {
            if *v > self.data[best] {
                best = i;
            }
        }
        best
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn map_inplace(&mut self, f: impl Fn(f64) -> f64) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }

    pub fn scaled(&self, s: f64) -> Image {
        self.map(|v| v * s)
    }

    /// `self + s * other`, element-wise.
    pub fn axpy(&self, s: f64, other: &Image) -> Image {
        debug_assert_eq!(self.dims(), other.dims());
        Image {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Image) -> Image {
        self.axpy(-1.0, other)
    }

    pub fn add(&self, other: &Image) -> Image {
        self.axpy(1.0, other)
    }

    /// `‖self − prev‖ / ‖self‖`, with 0/0 read as no change.
    pub fn relative_change_from(&self, prev: &Image) -> f64 {
        let mut diff = 0.0;
        let mut norm = 0.0;
        for (a, b) in self.data.iter().zip(&prev.data) {
            diff += (a - b) * (a - b);
            norm += a * a;
        }
        if diff == 0.0 {
            0.0
        } else if norm == 0.0 {
            f64::INFINITY
        } else {
            (diff / norm).sqrt()
        }
    }

    pub fn transpose(&self) -> Image {
        Image::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn flip_rows(&self) -> Image {
        Image::from_fn(self.rows, self.cols, |r, c| self[(self.rows - 1 - r, c)])
    }

    pub fn flip_cols(&self) -> Image {
        Image::from_fn(self.rows, self.cols, |r, c| self[(r, self.cols - 1 - c)])
    }

    /// Counter-clockwise rotation by 90 degrees.
    pub fn rot90(&self) -> Image {
        Image::from_fn(self.cols, self.rows, |r, c| self[(c, self.cols - 1 - r)])
    }

    pub fn crop(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Image {
        assert!(row0 + rows <= self.rows && col0 + cols <= self.cols);
        Image::from_fn(rows, cols, |r, c| self[(row0 + r, col0 + c)])
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), ImageError> {
        let header = ImageHeader {
            dims: [self.rows, self.cols],
            dtype: "float64".into(),
            endianness: "little".into(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| ImageError::Format(e.to_string()))?;
        w.write_all(IMAGE_MAGIC)?;
        w.write_all(&(json.len() as u32).to_le_bytes())?;
        w.write_all(&json)?;
        let mut payload = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&payload)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Image, ImageError> {
        let mut magic = [0u8; 16];
        r.read_exact(&mut magic)?;
        if &magic != IMAGE_MAGIC {
            return Err(ImageError::Format("magic bytes do not match".into()));
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut json)?;
        let header: ImageHeader =
            serde_json::from_slice(&json).map_err(|e| ImageError::Format(e.to_string()))?;
        if header.dtype != "float64" || header.endianness != "little" {
            return Err(ImageError::Format(format!(
                "unsupported dtype/endianness {}/{}",
                header.dtype, header.endianness
            )));
        }
        let [rows, cols] = header.dims;
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        if payload.len() != rows * cols * 8 {
            return Err(ImageError::Format(format!(
                "payload holds {} bytes, header implies {}",
                payload.len(),
                rows * cols * 8
            )));
        }
        let data = payload
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Ok(Image { rows, cols, data })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Image, ImageError> {
        let bytes = fs::read(path)?;
        Image::read_from(bytes.as_slice())
    }
}

impl std::ops::Index<(usize, usize)> for Image {
    type Output = f64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Image {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

#[derive(Serialize, Deserialize)]
struct ImageHeader {
    dims: [usize; 2],
    dtype: String,
    endianness: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_roundtrip_preserves_bits() {
        let img = Image::from_fn(3, 5, |r, c| (r as f64 - 1.3) * (c as f64 + 0.1).sin());
        let mut buf = Vec::new();
        img.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..16], IMAGE_MAGIC);
        let back = Image::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let img = Image::filled(4, 4, 1.0);
        let mut buf = Vec::new();
        img.write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(
            Image::read_from(buf.as_slice()),
            Err(ImageError::Format(_))
        ));
    }

    #[test]
    fn rotations_compose_to_identity() {
        let img = Image::from_fn(4, 4, |r, c| (r * 4 + c) as f64);
        let r4 = img.rot90().rot90().rot90().rot90();
        assert_eq!(r4, img);
        assert_eq!(img.transpose().transpose(), img);
    }

    #[test]
    fn relative_change_handles_zero() {
        let z = Image::zeros(2, 2);
        assert_eq!(z.relative_change_from(&z), 0.0);
        let one = Image::filled(2, 2, 1.0);
        assert_eq!(z.relative_change_from(&one), f64::INFINITY);
    }
}
