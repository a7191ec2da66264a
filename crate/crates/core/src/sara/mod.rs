//! The SARA dictionary: Daubechies 1–8 and the Dirac basis, each an
//! orthonormal periodic transform, stacked and scaled by `1/√9 = 1/3`
//! so that `ΨΨ† = I`.

mod dwt;
mod filters;

pub use filters::daubechies;

use rayon::prelude::*;
use thiserror::Error;

use crate::image::Image;
use dwt::FilterPair;

pub const DEFAULT_DEPTH: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum SaraError {
    #[error("image {rows}x{cols} is not divisible by 2^{depth}")]
    Indivisible { rows: usize, cols: usize, depth: usize },
    #[error("coefficient vector holds {actual} values, dictionary expects {expected}")]
    BlockLength { expected: usize, actual: usize },
    #[error("coefficients hold {coeff_bases} bases at depth {coeff_depth}, dictionary has {dict_bases} at depth {dict_depth}")]
    Layout {
        coeff_bases: usize,
        coeff_depth: usize,
        dict_bases: usize,
        dict_depth: usize,
    },
    #[error("Daubechies order must be within 1..=8, got {0}")]
    UnknownBasis(usize),
    #[error("a dictionary needs at least one basis")]
    Empty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    /// Daubechies wavelet with `n` vanishing moments (`Db1` is Haar).
    Daubechies(usize),
    Dirac,
}

/// Coefficients `Ψ†x`: one block of `rows·cols` values per basis, in
/// dictionary order. Wavelet blocks use the Mallat layout.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveletCoeffs {
    dims: (usize, usize),
    depth: usize,
    num_bases: usize,
    data: Vec<f64>,
}

impl WaveletCoeffs {
    pub fn zeros(dims: (usize, usize), depth: usize, num_bases: usize) -> Self {
        WaveletCoeffs {
            dims,
            depth,
            num_bases,
            data: vec![0.0; dims.0 * dims.1 * num_bases],
        }
    }

    pub fn from_vec(
        dims: (usize, usize),
        depth: usize,
        num_bases: usize,
        data: Vec<f64>,
    ) -> Result<Self, SaraError> {
        let expected = dims.0 * dims.1 * num_bases;
        if data.len() != expected {
            return Err(SaraError::BlockLength {
                expected,
                actual: data.len(),
            });
        }
        Ok(WaveletCoeffs {
            dims,
            depth,
            num_bases,
            data,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn num_bases(&self) -> usize {
        self.num_bases
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn block(&self, b: usize) -> &[f64] {
        let n = self.dims.0 * self.dims.1;
        &self.data[b * n..(b + 1) * n]
    }

    pub fn block_mut(&mut self, b: usize) -> &mut [f64] {
        let n = self.dims.0 * self.dims.1;
        &mut self.data[b * n..(b + 1) * n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &WaveletCoeffs) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }
}

/// A stack of orthonormal bases scaled by `1/√b`.
pub struct Dictionary {
    bases: Vec<Basis>,
    filters: Vec<Option<FilterPair>>,
    depth: usize,
    scale: f64,
}

impl std::fmt::Debug for Dictionary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dictionary")
            .field("bases", &self.bases)
            .field("depth", &self.depth)
            .finish()
    }
}

impl Dictionary {
    pub fn new(bases: Vec<Basis>, depth: usize) -> Result<Self, SaraError> {
        if bases.is_empty() {
            return Err(SaraError::Empty);
        }
        let filters = bases
            .iter()
            .map(|b| match *b {
                Basis::Daubechies(n) => daubechies(n)
                    .map(|h| Some(FilterPair::new(h)))
                    .ok_or(SaraError::UnknownBasis(n)),
                Basis::Dirac => Ok(None),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let scale = 1.0 / (bases.len() as f64).sqrt();
        Ok(Dictionary {
            bases,
            filters,
            depth,
            scale,
        })
    }

    /// Db1…Db8 followed by Dirac.
    pub fn sara(depth: usize) -> Self {
        let mut bases: Vec<Basis> = (1..=8).map(Basis::Daubechies).collect();
        bases.push(Basis::Dirac);
        Dictionary::new(bases, depth).expect("the SARA bases are valid")
    }

    pub fn bases(&self) -> &[Basis] {
        &self.bases
    }

    pub fn num_bases(&self) -> usize {
        self.bases.len()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Per-basis normalisation `1/√b`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Length of `Ψ†x` for an image of `dims`.
    pub fn coeff_len(&self, dims: (usize, usize)) -> usize {
        dims.0 * dims.1 * self.bases.len()
    }

    pub fn check_dims(&self, dims: (usize, usize)) -> Result<(), SaraError> {
        let q = 1usize << self.depth;
        if dims.0 == 0 || dims.1 == 0 || !dims.0.is_multiple_of(q) || !dims.1.is_multiple_of(q) {
            return Err(SaraError::Indivisible {
                rows: dims.0,
                cols: dims.1,
                depth: self.depth,
            });
        }
        Ok(())
    }

    /// `Ψ†x`.
    pub fn analysis(&self, x: &Image) -> Result<WaveletCoeffs, SaraError> {
        let dims = x.dims();
        self.check_dims(dims)?;
        let n = x.len();
        let mut out = WaveletCoeffs::zeros(dims, self.depth, self.bases.len());
        out.data
            .par_chunks_mut(n)
            .zip(self.filters.par_iter())
            .for_each(|(block, filter)| {
                block.copy_from_slice(x.as_slice());
                if let Some(f) = filter {
                    dwt::forward_2d(f, block, dims.0, dims.1, self.depth);
                }
                block.iter_mut().for_each(|v| *v *= self.scale);
            });
        Ok(out)
    }

    /// `Ψc`.
    pub fn synthesis(&self, c: &WaveletCoeffs) -> Result<Image, SaraError> {
        let dims = c.dims;
        self.check_dims(dims)?;
        if (c.depth, c.num_bases) != (self.depth, self.bases.len()) {
            return Err(SaraError::Layout {
                coeff_bases: c.num_bases,
                coeff_depth: c.depth,
                dict_bases: self.bases.len(),
                dict_depth: self.depth,
            });
        }
        let n = dims.0 * dims.1;
        if c.data.len() != n * self.bases.len() {
            return Err(SaraError::BlockLength {
                expected: n * self.bases.len(),
                actual: c.data.len(),
            });
        }
        let parts: Vec<Vec<f64>> = c
            .data
            .par_chunks(n)
            .zip(self.filters.par_iter())
            .map(|(block, filter)| {
                let mut buf = block.to_vec();
                if let Some(f) = filter {
                    dwt::inverse_2d(f, &mut buf, dims.0, dims.1, self.depth);
                }
                buf
            })
            .collect();
        let mut out = vec![0.0; n];
        for part in &parts {
            for (o, v) in out.iter_mut().zip(part) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|v| *v *= self.scale);
        Ok(Image::from_vec(dims.0, dims.1, out).expect("length checked"))
    }
}
