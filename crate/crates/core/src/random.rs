//! Seeded randomness: substream derivation, dense random fields, and
//! band-limited draws with an exactly flat annulus spectrum.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layout::{inverse_dft, Domain, Field, ProductLayout};

/// Mixes (seed, a, b) into an independent substream seed (splitmix64-style
/// finalizer), so parallel workers can draw without sharing a stream.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E3779B97F4A7C15))
        .wrapping_add(b.wrapping_mul(0xBF58476D1CE4E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

pub fn rng_for(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, a, b))
}

/// Dense complex field with iid uniform [-1,1) re/im entries; power-iteration
/// starts and generic test inputs.
pub fn dense_random_field(layout: &Arc<ProductLayout>, domain: Domain, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = Field::zeros(layout.clone(), domain);
    for v in f.samples_mut().iter_mut() {
        *v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    f
}

/// Frequency-domain draw: unit-modulus random-phase coefficients on the
/// annulus r_lo <= |xi| <= r_hi, zero elsewhere, Hermitian-symmetric so the
/// physical-domain signal is real. Normalized to unit coefficient norm.
/// Deterministic in (layout, band, seed): coefficients are drawn in storage
/// order over the canonical half-grid.
pub fn band_limited_spectrum(
    layout: &Arc<ProductLayout>,
    r_lo: f64,
    r_hi: f64,
    seed: u64,
) -> Result<Field> {
    if !(0.0 <= r_lo && r_lo < r_hi) {
        return Err(Error::InvalidParameter(format!(
            "annulus needs 0 <= r_lo < r_hi, got [{r_lo}, {r_hi}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = Field::zeros(layout.clone(), Domain::Frequency);
    let shape: Vec<usize> = layout.grid_points().to_vec();
    let axes = layout.total_axes();
    let mut idx = vec![0usize; axes];
    let mut point = vec![0.0; axes];
    let mut nonzero = 0usize;
    loop {
        // Conjugate partner index under xi -> -xi on the periodic grid.
        let cidx: Vec<usize> = idx
            .iter()
            .zip(&shape)
            .map(|(&i, &g)| if i == 0 { 0 } else { g - i })
            .collect();
        if idx.as_slice() <= cidx.as_slice() {
            layout.frequency_point(&idx, &mut point);
            let norm = point.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm >= r_lo && norm <= r_hi {
                nonzero += 1;
                let value = if idx == cidx {
                    // Self-conjugate cell: real coefficient, random sign.
                    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    Complex64::new(sign, 0.0)
                } else {
                    nonzero += 1;
                    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                    Complex64::new(theta.cos(), theta.sin())
                };
                f.samples_mut()[idx.as_slice()] = value;
                if idx != cidx {
                    f.samples_mut()[cidx.as_slice()] = value.conj();
                }
            }
        }
        if !crate::dyadic::advance_index(&mut idx, &shape) {
            break;
        }
    }
    if nonzero == 0 {
        return Err(Error::InvalidParameter(format!(
            "annulus [{r_lo}, {r_hi}] contains no grid frequencies"
        )));
    }
    let scale = 1.0 / (nonzero as f64).sqrt();
    for v in f.samples_mut().iter_mut() {
        *v *= scale;
    }
    Ok(f)
}

/// Physical-domain band-limited draw (real-valued up to roundoff).
pub fn band_limited_field(
    layout: &Arc<ProductLayout>,
    r_lo: f64,
    r_hi: f64,
    seed: u64,
) -> Result<Field> {
    inverse_dft(&band_limited_spectrum(layout, r_lo, r_hi, seed)?)
}
