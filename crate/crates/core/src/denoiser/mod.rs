//! Denoisers for the plug-and-play iterations: the trait the solvers
//! call, a DnCNN inference engine with forward and transposed
//! derivatives, dihedral equivariant averaging, and the Jacobian
//! spectral-norm certificate.

mod cnn;
mod equivariant;
mod jacobian;
mod linear;
mod model;

pub use cnn::{DenoiserHandle, HandleOptions};
pub use equivariant::{apply_equivariant, Dihedral, EquivariantMode};
pub use jacobian::{certify, jacobian_spectral_norm, CertifyReport, JacobianNorm};
pub use linear::{FnDenoiser, MatrixDenoiser, Rescaled, ScaledIdentity};
pub use model::{
    load_model, load_model_with, save_model, Activation, Architecture, DenoiserModel, LayerSpec, LossTag,
    Manifest, ModelLayer, MANIFEST_FILE, MANIFEST_VERSION, WEIGHTS_FILE,
};

use thiserror::Error;

use crate::image::Image;

#[derive(Debug, Error)]
pub enum DenoiserError {
    #[error("non-finite activation in layer {layer}")]
    NonFinite { layer: usize },
    #[error("input image contains a non-finite pixel")]
    NonFiniteInput,
    #[error(
        "checksum failure: weights blob has {actual_bytes} bytes (sha256 {actual_sha}), \
         manifest expects {expected_bytes} bytes (sha256 {expected_sha})"
    )]
    Checksum {
        expected_bytes: usize,
        actual_bytes: usize,
        expected_sha: String,
        actual_sha: String,
    },
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("rotations need a square image, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("image is {actual:?}, denoiser expects {expected:?}")]
    DimMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An image-to-image denoising map `D`.
pub trait Denoiser: Send + Sync {
    fn denoise(&self, x: &Image) -> Result<Image, DenoiserError>;
}

/// Linearisation of a denoiser at a point: products with its Jacobian
/// and with the Jacobian's transpose.
pub trait Linearization {
    fn jvp(&self, v: &Image) -> Result<Image, DenoiserError>;
    fn vjp(&self, u: &Image) -> Result<Image, DenoiserError>;
    /// Whether some activation sat exactly on a relu kink; the
    /// derivative there is taken as 0.
    fn at_kink(&self) -> bool {
        false
    }
}

/// A denoiser whose Jacobian can be probed.
pub trait Differentiable: Denoiser {
    fn linearize<'a>(&'a self, x: &Image) -> Result<Box<dyn Linearization + 'a>, DenoiserError>;
}

impl<T: Denoiser + ?Sized> Denoiser for &T {
    fn denoise(&self, x: &Image) -> Result<Image, DenoiserError> {
        (**self).denoise(x)
    }
}

impl<T: Denoiser + ?Sized> Denoiser for Box<T> {
    fn denoise(&self, x: &Image) -> Result<Image, DenoiserError> {
        (**self).denoise(x)
    }
}
