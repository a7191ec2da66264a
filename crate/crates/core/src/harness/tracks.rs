//! Earth-rotation synthesis of uv-coverages.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::operator::{CoverageMeta, OperatorError, UVCoverage};

const SIDEREAL_DAY_H: f64 = 23.934_469_6;

/// Telescope layout and observation parameters for one uv-coverage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackSpec {
    pub n_antennas: usize,
    pub delta_t_h: f64,
    pub rate_per_h: f64,
    pub pointing_seed: u64,
    /// Source declination in degrees; drawn from the pointing seed when unset.
    pub declination_deg: Option<f64>,
    /// Seed of the random antenna layout (the "telescope").
    #[serde(default)]
    pub layout_seed: u64,
    #[serde(default = "default_latitude")]
    pub latitude_deg: f64,
    #[serde(default = "default_wavelength")]
    pub wavelength_m: f64,
}

fn default_latitude() -> f64 {
    -30.7
}

fn default_wavelength() -> f64 {
    0.3
}

impl TrackSpec {
    /// 64-antenna array at the MeerKAT latitude, 100 samples per hour.
    pub fn meerkat_like(delta_t_h: f64, pointing_seed: u64) -> Self {
        TrackSpec {
            n_antennas: 64,
            delta_t_h,
            rate_per_h: 100.0,
            pointing_seed,
            declination_deg: None,
            layout_seed: 0,
            latitude_deg: default_latitude(),
            wavelength_m: default_wavelength(),
        }
    }

    pub fn samples_per_baseline(&self) -> usize {
        (self.rate_per_h * self.delta_t_h).round() as usize
    }

    pub fn expected_count(&self) -> usize {
        self.n_antennas * (self.n_antennas.saturating_sub(1)) / 2 * self.samples_per_baseline()
    }
}

/// Seeded antenna positions (east, north) in metres: a dense core and
/// a sparser outer distribution, loosely following a compact-core array.
pub fn random_layout(n_antennas: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d_6565_726b_6174);
    let n_core = (n_antennas as f64 * 0.7).round() as usize;
    (0..n_antennas)
        .map(|i| {
            let r = if i < n_core {
                500.0 * rng.random::<f64>().sqrt()
            } else {
                // log-uniform between 0.5 and 4 km
                500.0 * 8f64.powf(rng.random::<f64>())
            };
            let th = rng.random::<f64>() * std::f64::consts::TAU;
            [r * th.cos(), r * th.sin()]
        })
        .collect()
}

/// Generates the coverage of `spec` from an explicit layout.
pub fn tracks_from_layout(layout: &[[f64; 2]], spec: &TrackSpec) -> Result<UVCoverage, OperatorError> {
    if layout.len() < 2 {
        return Err(OperatorError::InvalidConfig(
            "at least two antennas are needed".into(),
        ));
    }
    if !(spec.delta_t_h > 0.0) || !(spec.rate_per_h > 0.0) {
        return Err(OperatorError::InvalidConfig(
            "observation length and sampling rate must be positive".into(),
        ));
    }
    let ns = spec.samples_per_baseline();
    if ns == 0 {
        return Err(OperatorError::InvalidConfig(
            "observation holds no time samples".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.pointing_seed);
    let dec = spec
        .declination_deg
        .unwrap_or_else(|| rng.random_range(-80.0..20.0))
        .to_radians();
    let h_centre = rng.random_range(-2.0..2.0);
    let lat = spec.latitude_deg.to_radians();

    // baselines in the equatorial frame, wavelengths
    let mut baselines = Vec::with_capacity(layout.len() * (layout.len() - 1) / 2);
    for i in 0..layout.len() {
        for j in i + 1..layout.len() {
            let de = layout[j][0] - layout[i][0];
            let dn = layout[j][1] - layout[i][1];
            let x = -lat.sin() * dn;
            let y = de;
            let z = lat.cos() * dn;
            baselines.push([x, y, z].map(|c| c / spec.wavelength_m));
        }
    }

    let mut points = Vec::with_capacity(baselines.len() * ns);
    for s in 0..ns {
        let t_h = h_centre - 0.5 * spec.delta_t_h + (s as f64 + 0.5) * spec.delta_t_h / ns as f64;
        let h = t_h / SIDEREAL_DAY_H * std::f64::consts::TAU;
        let (sh, ch) = h.sin_cos();
        let (sd, cd) = dec.sin_cos();
        for b in &baselines {
            let u = sh * b[0] + ch * b[1];
            let v = -sd * ch * b[0] + sd * sh * b[1] + cd * b[2];
            points.push([u, v]);
        }
    }
    let extent = points
        .iter()
        .map(|p| p[0].abs().max(p[1].abs()))
        .fold(0.0, f64::max);
    if extent == 0.0 {
        return Err(OperatorError::InvalidConfig(
            "all antennas coincide; the coverage cannot be scaled to the band".into(),
        ));
    }
    Ok(UVCoverage::new(points, extent)?.with_meta(CoverageMeta {
        pointing: Some(spec.pointing_seed),
        duration_h: Some(spec.delta_t_h),
        rate_per_h: Some(spec.rate_per_h),
    }))
}

/// Earth-rotation tracks for a seeded random layout. The band is set so
/// the outermost sample sits on its edge.
pub fn gen_uv_tracks(spec: &TrackSpec) -> Result<UVCoverage, OperatorError> {
    if spec.n_antennas < 2 {
        return Err(OperatorError::InvalidConfig(format!(
            "at least two antennas are needed, got {}",
            spec.n_antennas
        )));
    }
    let layout = random_layout(spec.n_antennas, spec.layout_seed);
    tracks_from_layout(&layout, spec)
}
