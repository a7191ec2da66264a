//! Synthetic radio-galaxy groundtruths.
//!
//! The real test images (3c353, Hercules A, Centaurus A, Cygnus A) are
//! not vendored. These phantoms mimic their structure: a double-lobed
//! source with hotspots, a compact core, jets, diffuse filamentary lobe
//! emission and a sprinkling of faint background sources, raised to a
//! high dynamic range by pixel-wise exponentiation and normalised to a
//! unit peak.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::image::Image;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GalaxySpec {
    /// Exponentiation parameter applied to the low-dynamic-range model.
    pub exponent_a: f64,
    /// Lobe semi-major axis as a fraction of the image side.
    pub lobe_extent: f64,
    /// Number of unresolved background sources.
    pub background_sources: usize,
}

impl Default for GalaxySpec {
    fn default() -> Self {
        GalaxySpec {
            exponent_a: 1e4,
            lobe_extent: 0.14,
            background_sources: 12,
        }
    }
}

fn add_gaussian(img: &mut Image, cy: f64, cx: f64, sy: f64, sx: f64, theta: f64, amp: f64) {
    let (rows, cols) = img.dims();
    let reach = 4.0 * sy.max(sx);
    let r0 = ((cy - reach).floor().max(0.0)) as usize;
    let r1 = ((cy + reach).ceil().min(rows as f64 - 1.0)).max(0.0) as usize;
    let c0 = ((cx - reach).floor().max(0.0)) as usize;
    let c1 = ((cx + reach).ceil().min(cols as f64 - 1.0)).max(0.0) as usize;
    let (st, ct) = theta.sin_cos();
    for r in r0..=r1 {
        for c in c0..=c1 {
            let dy = r as f64 - cy;
            let dx = c as f64 - cx;
            let a = (ct * dx + st * dy) / sx;
            let b = (-st * dx + ct * dy) / sy;
            img.as_mut_slice()[r * cols + c] += amp * (-0.5 * (a * a + b * b)).exp();
        }
    }
}

/// Pixel-wise `(a^u − 1)/a`.
fn exponentiate_in_place(img: &mut Image, a: f64) {
    let ln_a = a.ln();
    img.map_inplace(|u| ((u * ln_a).exp_m1()) / a);
}

/// Seeded double-lobed radio galaxy of size `n × n` with unit peak.
pub fn radio_galaxy(n: usize, seed: u64, spec: &GalaxySpec) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7261_6469_6f67_616c);
    let nf = n as f64;
    let mut low = Image::zeros(n, n);
    let centre = (
        nf / 2.0 + rng.random_range(-0.05..0.05) * nf,
        nf / 2.0 + rng.random_range(-0.05..0.05) * nf,
    );
    let axis = rng.random_range(0.0..std::f64::consts::PI);
    let (sa, ca) = axis.sin_cos();
    let extent = spec.lobe_extent * nf * rng.random_range(0.8..1.25);

    // compact core
    add_gaussian(&mut low, centre.0, centre.1, 1.2, 1.2, 0.0, 0.9);

    for side in [-1.0, 1.0] {
        let reach = extent * rng.random_range(1.4..2.0);
        // jet: a chain of knots
        let knots = 14;
        for k in 1..knots {
            let t = k as f64 / knots as f64 * reach * 0.8;
            let wobble = rng.random_range(-0.03..0.03) * reach;
            let cy = centre.0 + side * t * sa + wobble * ca;
            let cx = centre.1 + side * t * ca - wobble * sa;
            add_gaussian(&mut low, cy, cx, 1.5, 2.5, axis, rng.random_range(0.45..0.6));
        }
        // lobe: many overlapping blobs building a filamentary cloud
        let hy = centre.0 + side * reach * sa;
        let hx = centre.1 + side * reach * ca;
        let blobs = 60;
        for _ in 0..blobs {
            let along: f64 = rng.random_range(-1.0..0.4) * extent * 0.6;
            let across: f64 = StandardNormal.sample(&mut rng);
            let across = across * extent * 0.35;
            let cy = hy - side * along * sa + across * ca;
            let cx = hx - side * along * ca - across * sa;
            let s = extent * rng.random_range(0.05..0.25);
            let th = rng.random_range(0.0..std::f64::consts::PI);
            add_gaussian(
                &mut low,
                cy,
                cx,
                s,
                s * rng.random_range(1.0..3.0),
                th,
                rng.random_range(0.1..0.3),
            );
        }
        // hotspot at the lobe tip
        add_gaussian(&mut low, hy, hx, 1.5, 1.5, 0.0, rng.random_range(0.7..1.0));
    }

    for _ in 0..spec.background_sources {
        let cy = rng.random_range(0.0..nf);
        let cx = rng.random_range(0.0..nf);
        add_gaussian(&mut low, cy, cx, 1.0, 1.0, 0.0, rng.random_range(0.2..0.6));
    }

    let peak = low.max();
    low.map_inplace(|v| (v / peak).clamp(0.0, 1.0));
    exponentiate_in_place(&mut low, spec.exponent_a);
    let peak = low.max();
    low.map_inplace(|v| v / peak);
    low
}

/// The four-image test set used by the experiment defaults.
pub fn test_set(n: usize, spec: &GalaxySpec) -> Vec<Image> {
    (0..4).map(|s| radio_galaxy(n, s, spec)).collect()
}
