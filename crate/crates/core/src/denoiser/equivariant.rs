//! Flip and rotation randomisation: `g⁻¹(D(g(x)))` for `g` drawn from the
//! dihedral group of the square.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Denoiser, DenoiserError};
use crate::image::Image;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquivariantMode {
    #[default]
    Off,
    /// All eight flips and quarter turns; needs square images.
    Dihedral,
    /// The four flips only, valid for any shape.
    Flips,
}

/// `x ↦ rot90^k(flip(x))`, where `flip` mirrors columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dihedral {
    pub quarter_turns: u8,
    pub flip: bool,
}

impl Dihedral {
    pub const IDENTITY: Dihedral = Dihedral {
        quarter_turns: 0,
        flip: false,
    };

    pub fn all() -> impl Iterator<Item = Dihedral> {
        (0..8u8).map(|i| Dihedral {
            quarter_turns: i % 4,
            flip: i >= 4,
        })
    }

    pub fn random<R: Rng + ?Sized>(mode: EquivariantMode, rng: &mut R) -> Dihedral {
        match mode {
            EquivariantMode::Off => Dihedral::IDENTITY,
            EquivariantMode::Dihedral => {
                let i: u8 = rng.random_range(0..8);
                Dihedral {
                    quarter_turns: i % 4,
                    flip: i >= 4,
                }
            }
            // the flips group: identity, column flip, row flip, both
            EquivariantMode::Flips => {
                let i: u8 = rng.random_range(0..4);
                Dihedral {
                    quarter_turns: if i >= 2 { 2 } else { 0 },
                    flip: i % 2 == 1,
                }
            }
        }
    }

    pub fn apply(&self, x: &Image) -> Image {
        let mut y = if self.flip { x.flip_cols() } else { x.clone() };
        for _ in 0..self.quarter_turns {
            y = y.rot90();
        }
        y
    }

    pub fn apply_inverse(&self, x: &Image) -> Image {
        let mut y = x.clone();
        for _ in 0..(4 - self.quarter_turns % 4) % 4 {
            y = y.rot90();
        }
        if self.flip {
            y.flip_cols()
        } else {
            y
        }
    }

    /// `g⁻¹(D(g(x)))`.
    pub fn conjugate<D: Denoiser + ?Sized>(&self, d: &D, x: &Image) -> Result<Image, DenoiserError> {
        if *self == Dihedral::IDENTITY {
            return d.denoise(x);
        }
        Ok(self.apply_inverse(&d.denoise(&self.apply(x))?))
    }
}

/// Draws `g` according to `mode` and returns `g⁻¹(D(g(x)))`.
pub fn apply_equivariant<D: Denoiser + ?Sized, R: Rng + ?Sized>(
    d: &D,
    x: &Image,
    mode: EquivariantMode,
    rng: &mut R,
) -> Result<Image, DenoiserError> {
    if mode == EquivariantMode::Dihedral && x.rows() != x.cols() {
        return Err(DenoiserError::NonSquare {
            rows: x.rows(),
            cols: x.cols(),
        });
    }
    Dihedral::random(mode, rng).conjugate(d, x)
}
