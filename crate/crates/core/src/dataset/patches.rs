use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DatasetError;
use crate::denoiser::{Dihedral, EquivariantMode};
use crate::image::Image;

pub const DEFAULT_TILE: usize = 512;
pub const DEFAULT_PATCH: usize = 46;

/// Index into `0..n` of position `i` on the half-sample symmetric
/// extension (`… 1 0 | 0 1 … n−1 | n−1 n−2 …`).
fn mirror(i: usize, n: usize) -> usize {
    let j = i % (2 * n);
    if j < n {
        j
    } else {
        2 * n - 1 - j
    }
}

/// Extends `img` to `rows × cols` by mirroring it past its bottom and
/// right edges.
pub(crate) fn symmetric_pad(img: &Image, rows: usize, cols: usize) -> Image {
    let (r, c) = img.dims();
    Image::from_fn(rows, cols, |i, j| img[(mirror(i, r), mirror(j, c))])
}

/// Splits `img` into `tile × tile` pieces, row-major, after mirror
/// padding its bottom and right edges up to multiples of `tile`.
pub fn split_tiles(img: &Image, tile: usize) -> Result<Vec<Image>, DatasetError> {
    if tile == 0 {
        return Err(DatasetError::InvalidArgument("tile size must be positive".into()));
    }
    let (r, c) = img.dims();
    let (tr, tc) = (r.div_ceil(tile), c.div_ceil(tile));
    let padded = symmetric_pad(img, tr * tile, tc * tile);
    let mut out = Vec::with_capacity(tr * tc);
    for i in 0..tr {
        for j in 0..tc {
            out.push(padded.crop(i * tile, j * tile, tile, tile));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchOptions {
    pub size: usize,
    pub count: usize,
    /// Random zoom and dihedral transform per patch.
    pub augment: bool,
    pub zoom: (f64, f64),
    pub seed: u64,
}

impl Default for PatchOptions {
    fn default() -> Self {
        PatchOptions {
            size: DEFAULT_PATCH,
            count: 1,
            augment: false,
            zoom: (0.75, 1.25),
            seed: 0,
        }
    }
}

/// Bilinear sample with coordinates clamped to the image.
fn bilinear(img: &Image, y: f64, x: f64) -> f64 {
    let (r, c) = img.dims();
    let y = y.clamp(0.0, (r - 1) as f64);
    let x = x.clamp(0.0, (c - 1) as f64);
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(r - 1), (x0 + 1).min(c - 1));
    let (fy, fx) = (y - y0 as f64, x - x0 as f64);
    let top = img[(y0, x0)] * (1.0 - fx) + img[(y0, x1)] * fx;
    let bot = img[(y1, x0)] * (1.0 - fx) + img[(y1, x1)] * fx;
    top * (1.0 - fy) + bot * fy
}

/// Random square crops. With augmentation each crop is resampled at a
/// zoom drawn uniformly from `opts.zoom` (bilinear, the source window
/// clamped to fit the image) and then flipped or rotated by a random
/// element of the dihedral group.
pub fn extract_patches(img: &Image, opts: &PatchOptions) -> Result<Vec<Image>, DatasetError> {
    let (r, c) = img.dims();
    let s = opts.size;
    if s == 0 || s > r || s > c {
        return Err(DatasetError::PatchTooLarge {
            size: s,
            rows: r,
            cols: c,
        });
    }
    let (z0, z1) = opts.zoom;
    if opts.augment && !(z0 > 0.0 && z0 <= z1 && z1.is_finite()) {
        return Err(DatasetError::InvalidArgument(format!(
            "zoom range must be positive and ordered, got [{z0}, {z1}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut out = Vec::with_capacity(opts.count);
    for _ in 0..opts.count {
        if !opts.augment {
            let i = rng.random_range(0..=r - s);
            let j = rng.random_range(0..=c - s);
            out.push(img.crop(i, j, s, s));
            continue;
        }
        let zoom: f64 = if z0 == z1 { z0 } else { rng.random_range(z0..=z1) };
        // a window of `s / zoom` source pixels maps onto the patch
        let zoom = zoom.max(s as f64 / r.min(c) as f64);
        let w = s as f64 / zoom;
        let i0 = rng.random_range(0.0..=(r as f64 - w));
        let j0 = rng.random_range(0.0..=(c as f64 - w));
        let patch = Image::from_fn(s, s, |a, b| {
            let y = i0 + (a as f64 + 0.5) / zoom - 0.5;
            let x = j0 + (b as f64 + 0.5) / zoom - 0.5;
            bilinear(img, y, x)
        });
        out.push(Dihedral::random(EquivariantMode::Dihedral, &mut rng).apply(&patch));
    }
    Ok(out)
}
