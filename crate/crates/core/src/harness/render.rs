//! 8-bit grayscale PNG export and import.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use thiserror::Error;

use super::metrics::rlog_value;
use crate::image::Image;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("png encoding: {0}")]
    Encode(#[from] png::EncodingError),
    #[error("png decoding: {0}")]
    Decode(#[from] png::DecodingError),
    #[error("unsupported png layout: {0}")]
    Unsupported(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scale {
    /// `[lo, hi]` mapped linearly onto black to white.
    Linear { lo: f64, hi: f64 },
    /// `rlog` of intensities clipped to `[0, saturation]`.
    Log { saturation: f64 },
}

impl Scale {
    /// Linear scale spanning the image's own range.
    pub fn auto_linear(x: &Image) -> Scale {
        Scale::Linear {
            lo: x.min(),
            hi: x.max(),
        }
    }

    fn level(&self, v: f64) -> u8 {
        let t = match *self {
            Scale::Linear { lo, hi } => {
                if hi > lo {
                    (v - lo) / (hi - lo)
                } else {
                    0.0
                }
            }
            Scale::Log { saturation } => rlog_value(v.clamp(0.0, saturation)) / rlog_value(saturation),
        };
        (t.clamp(0.0, 1.0) * 255.0).round() as u8
    }
}

pub fn to_gray8(x: &Image, scale: Scale) -> Vec<u8> {
    x.as_slice().iter().map(|&v| scale.level(v)).collect()
}

pub fn save_png(x: &Image, path: impl AsRef<Path>, scale: Scale) -> Result<(), RenderError> {
    let (rows, cols) = x.dims();
    let w = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(w, cols as u32, rows as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header()?;
    writer.write_image_data(&to_gray8(x, scale))?;
    writer.finish()?;
    Ok(())
}

/// Reads an 8- or 16-bit PNG into `[0, 1]`, averaging colour channels and
/// ignoring alpha.
pub fn load_png(path: impl AsRef<Path>) -> Result<Image, RenderError> {
    let mut decoder = png::Decoder::new(std::io::BufReader::new(File::open(path)?));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info()?;
    let mut buf = vec![
        0;
        reader
            .output_buffer_size()
            .ok_or_else(|| { RenderError::Unsupported("image too large".into()) })?
    ];
    let info = reader.next_frame(&mut buf)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let (channels, colour) = match info.color_type {
        png::ColorType::Grayscale => (1, 1),
        png::ColorType::GrayscaleAlpha => (2, 1),
        png::ColorType::Rgb => (3, 3),
        png::ColorType::Rgba => (4, 3),
        other => return Err(RenderError::Unsupported(format!("{other:?}"))),
    };
    let sample = |k: usize| -> f64 {
        match info.bit_depth {
            png::BitDepth::Sixteen => u16::from_be_bytes([buf[2 * k], buf[2 * k + 1]]) as f64 / 65535.0,
            _ => buf[k] as f64 / 255.0,
        }
    };
    Ok(Image::from_fn(h, w, |r, c| {
        let base = (r * w + c) * channels;
        (0..colour).map(|k| sample(base + k)).sum::<f64>() / colour as f64
    }))
}
