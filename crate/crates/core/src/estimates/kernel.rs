//! Kernel-side shape checks: the realized kernel of a product-class
//! multiplier tracks a product envelope away from the singular set, and its
//! partial averages against shrinking bumps keep a stable envelope constant
//! (the cancellation the class buys beyond raw size).

use ndarray::Dimension;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cutoffs::{analytic_step, NormalizedBump};
use crate::error::{Error, Result};
use crate::fitting::Verdict;
use crate::layout::{inverse_dft, Field, ProductLayout};
use crate::operators::{symbol_frequency_table, KernelField};
use crate::symbols::{SymbolFamily, SymbolSpec};

use super::{
    axis_ray, central_decades, decades, diagonal_ray, envelope_fit, octave_peaks, EstimateReport,
    ExperimentKind, FitSummary, RaySamples,
};

// ---------------------------------------------------------------------------
// Band-limited realization

/// Smooth spectral roll-off weight: 1 inside half the band, 0 at the band
/// edge. `ny` is the tightest axis Nyquist frequency of the layout.
fn rolloff_weight(r: f64, ny: f64) -> f64 {
    analytic_step(2.0 - 2.0 * r / ny)
}

/// Multiply a frequency table by the radial roll-off in place. A class
/// multiplier keeps order-one modulus at the band edge, and inverting the
/// hard-truncated table rings like a Dirichlet kernel, with slow 1/|z| tails
/// along the axes that swamp the true envelope at outer radii. The rolled
/// table is itself a class table with comparable constants (the roll-off
/// contributes derivative mass O(1/ny), the scale the class weights already
/// allow at the edge), so fits against it see the envelope rather than the
/// truncation. The price is half the usable band.
fn band_limit_in_place(table: &mut Field) {
    let layout = table.layout().clone();
    let axes = layout.total_axes();
    let ny = (0..axes)
        .map(|a| layout.nyquist(a))
        .fold(f64::INFINITY, f64::min);
    let mut xi = vec![0.0; axes];
    for (idx, v) in table.samples_mut().indexed_iter_mut() {
        layout.frequency_point(idx.slice(), &mut xi);
        let r = xi.iter().map(|u| u * u).sum::<f64>().sqrt();
        *v *= rolloff_weight(r, ny);
    }
}

/// Invert a frequency table into the kernel it realizes at `base_x`, with
/// the same normalization as the operator-side kernel realization.
fn kernel_from_table(base_x: &[f64], table: &Field) -> Result<KernelField> {
    let layout = table.layout().clone();
    let mut samples = inverse_dft(table)?;
    let scale = layout.frequency_cell_volume() * (layout.total_points() as f64).sqrt();
    for v in samples.samples_mut().iter_mut() {
        *v *= scale;
    }
    Ok(KernelField {
        base_x: base_x.to_vec(),
        samples,
    })
}

/// Whether the table is numerically a single constant value; a constant
/// multiplier realizes as the center-cell delta and has no envelope to fit.
fn table_is_constant(table: &Field) -> bool {
    let v0 = match table.samples().iter().next() {
        Some(&v) => v,
        None => return true,
    };
    let variation = table
        .samples()
        .iter()
        .map(|v| (v - v0).norm())
        .fold(0.0f64, f64::max);
    variation <= 1e-10 * v0.norm().max(1.0)
}

// ---------------------------------------------------------------------------
// Size envelope

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelSizeConfig {
    /// Must be positive: the envelope involves the 1/rho power.
    pub rho: f64,
    pub dims: Vec<usize>,
    pub grid: usize,
    pub halfwidth: f64,
    pub taus: Vec<f64>,
    /// Fit window: [r_lo_cells * dx, r_hi_frac * halfwidth], clipped to the
    /// central fit_decades decades.
    pub r_lo_cells: f64,
    pub r_hi_frac: f64,
    pub fit_decades: f64,
    /// Fewest decades the window must span for a conclusive fit.
    pub min_decades: f64,
    /// PASS needs every ray slope in [slope_lo, slope_hi].
    pub slope_lo: f64,
    pub slope_hi: f64,
    /// Roll the symbol table off across the outer half-band before inversion
    /// so the fit sees the kernel of a band-limited class member instead of
    /// Dirichlet ringing from a hard truncation.
    pub spectral_rolloff: bool,
}

impl Default for KernelSizeConfig {
    fn default() -> Self {
        KernelSizeConfig {
            rho: 0.5,
            dims: vec![1, 1],
            grid: 1024,
            halfwidth: 1.0,
            taus: vec![1.0, 1.0],
            r_lo_cells: 4.0,
            r_hi_frac: 0.5,
            fit_decades: 2.0,
            min_decades: 1.0,
            slope_lo: 0.8,
            slope_hi: 1.2,
            spectral_rolloff: true,
        }
    }
}

#[derive(Serialize)]
struct KernelSizeTolerances {
    slope_lo: f64,
    slope_hi: f64,
    min_decades: f64,
}

/// Product envelope along a ray: factor norms grow linearly with the ray
/// radius at per-factor rates `factor_rates`, and |z| = r.
fn ray_envelope(dims: &[usize], inv_rho: f64, factor_rates: &[f64]) -> impl Fn(f64) -> f64 {
    let dims = dims.to_vec();
    let rates = factor_rates.to_vec();
    move |r: f64| {
        let cross = r.powf(inv_rho);
        dims.iter()
            .zip(&rates)
            .map(|(&ni, &rate)| (rate * r + cross).powi(-(ni as i32)))
            .product()
    }
}

/// Resolution scale of the layout's usable band: the roll-off halves it.
fn band_floor(layout: &ProductLayout, rolled: bool) -> f64 {
    let ny = (0..layout.total_axes())
        .map(|a| layout.nyquist(a))
        .fold(f64::INFINITY, f64::min);
    if rolled {
        2.0 / ny
    } else {
        1.0 / ny
    }
}

/// Smallest ray radius at which every factor's envelope scale clears the
/// band resolution 1/B. The envelope factor (rate_i r + r^{1/rho})^{-N_i}
/// calls for frequencies up to its inverse scale; below this radius the band
/// cannot supply them and the realized kernel flattens away from the
/// continuum shape, so fits must start here. Along a ray with an inactive
/// factor (rate 0) the cross term alone must clear the resolution, which
/// pushes the cutoff up to (1/B)^rho.
fn resolved_radius(rates: &[f64], inv_rho: f64, resol: f64) -> f64 {
    let scale = |r: f64| {
        rates
            .iter()
            .map(|&a| a * r + r.powf(inv_rho))
            .fold(f64::MAX, f64::min)
    };
    let mut hi = resol.max(1e-12);
    while scale(hi) < resol {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if scale(mid) >= resol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

pub fn kernel_size_fit(config: &KernelSizeConfig) -> Result<EstimateReport> {
    if !(config.rho > 0.0) {
        return Err(Error::InvalidParameter(
            "kernel size envelopes need rho > 0".into(),
        ));
    }
    let n = config.dims.len();
    if config.taus.len() != n {
        return Err(Error::InvalidParameter(format!(
            "taus has {} entries for {} factors",
            config.taus.len(),
            n
        )));
    }
    let layout = ProductLayout::uniform(
        config.dims.clone(),
        config.rho,
        config.grid,
        config.halfwidth,
    )?;
    let tolerances = KernelSizeTolerances {
        slope_lo: config.slope_lo,
        slope_hi: config.slope_hi,
        min_decades: config.min_decades,
    };
    let mut report = EstimateReport::new(ExperimentKind::KernelSize, config, &tolerances)?;

    let bound = SymbolSpec {
        family: SymbolFamily::ProductImaginaryOrder {
            taus: config.taus.clone(),
        },
        analytic_derivatives: true,
    }
    .bind(&layout)?;
    let axes = layout.total_axes();
    let x0 = vec![0.0; axes];
    let mut table = symbol_frequency_table(&bound, &layout, &x0);

    // A table without frequency variation realizes as a grid delta; there is
    // no envelope to fit. Checked before the roll-off, which would otherwise
    // disguise the delta as a smooth concentrated bump.
    if table_is_constant(&table) {
        report.note("degenerate kernel: constant table realizes as the center-cell delta, nothing to fit");
        report.verdict = Verdict::Inconclusive;
        return Ok(report);
    }
    if config.spectral_rolloff {
        band_limit_in_place(&mut table);
        report.note("spectral roll-off active: outer half-band tapered smoothly to zero");
    }
    let kernel = kernel_from_table(&x0, &table)?;

    let dx = layout.physical_step(0);
    let w_hi = (config.r_hi_frac * config.halfwidth).min({
        // Clip to the configured decade budget measured from the cell floor.
        let (_, hi) = central_decades(
            config.r_lo_cells * dx,
            config.r_hi_frac * config.halfwidth,
            config.fit_decades,
        );
        hi
    });
    let inv_rho = 1.0 / config.rho;
    let resol = band_floor(&layout, config.spectral_rolloff);
    report.note(format!("band resolution scale 1/B = {resol:.4}"));

    // One ray along the first axis of each factor, plus the all-axes
    // diagonal: (ray name, samples, per-factor radial rates). The product
    // envelope is attained along generic directions, where every factor
    // norm grows with the radius; the diagonal carries the exponent gate.
    // Along a factor's own axis the other factors sit at the origin and the
    // kernel of an imaginary-order symbol stays strictly below the envelope
    // (the bound holds with slack), so axis rays are recorded as domination
    // diagnostics and do not gate the verdict.
    let mut rays: Vec<(String, RaySamples, Vec<f64>, bool)> = Vec::new();
    for i in 0..n {
        let axis = layout.axes_of_factor(i).start;
        let mut rates = vec![0.0; n];
        rates[i] = 1.0;
        rays.push((
            format!("ray{i}"),
            axis_ray(&kernel.samples, axis),
            rates,
            false,
        ));
    }
    let diag_rates: Vec<f64> = config
        .dims
        .iter()
        .map(|&d| (d as f64 / axes as f64).sqrt())
        .collect();
    rays.push((
        "diag".to_string(),
        diagonal_ray(&kernel.samples),
        diag_rates,
        true,
    ));

    let mut diag_ok = None;
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    for (name, ray, rates, gated) in &rays {
        let env = ray_envelope(&config.dims, inv_rho, rates);
        let w_lo = (config.r_lo_cells * dx).max(resolved_radius(rates, inv_rho, resol));
        let span = decades(w_lo, w_hi);
        let peaks = octave_peaks(ray, w_lo, w_hi);
        if peaks.len() < 3 || (*gated && span < config.min_decades) {
            report.note(format!(
                "{name}: resolved window [{w_lo:.4}, {w_hi:.4}] ({span:.2} decades) too thin to fit"
            ));
            continue;
        }
        for &(r, v) in &peaks {
            report.push_sample(format!("{name} r"), r, v);
            pooled.push((env(r).ln(), v.ln()));
        }
        let fit = envelope_fit(&peaks, &env)?;
        let constant = peaks
            .iter()
            .map(|&(r, v)| v / env(r))
            .fold(0.0f64, f64::max);
        report.push_sample(format!("slope {name}"), 0.0, fit.slope);
        report.push_sample(format!("constant {name}"), 0.0, constant);
        if *gated {
            report.note(format!(
                "{name}: slope {:.4}, realized constant {:.4e}, correlation {:.4} over {} peaks in [{:.4}, {:.4}]",
                fit.slope, constant, fit.correlation, fit.count, w_lo, w_hi
            ));
            diag_ok = Some(config.slope_lo <= fit.slope && fit.slope <= config.slope_hi);
        } else {
            report.note(format!(
                "{name}: slope {:.4} (diagnostic, envelope not attained on-axis), realized constant {:.4e} over {} peaks in [{:.4}, {:.4}]",
                fit.slope, constant, fit.count, w_lo, w_hi
            ));
        }
    }
    let aggregate = crate::fitting::linear_fit(&pooled)?;
    report.fit = Some(FitSummary::from(aggregate));
    report.verdict = match diag_ok {
        Some(true) => Verdict::Pass,
        Some(false) => Verdict::Fail,
        None => Verdict::Inconclusive,
    };
    Ok(report)
}

// ---------------------------------------------------------------------------
// Cancellation

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CancellationConfig {
    pub rho: f64,
    pub grid: usize,
    pub halfwidth: f64,
    pub taus: Vec<f64>,
    /// Bump dilation factors for the first-factor average.
    pub r_list: Vec<f64>,
    pub r_lo_cells: f64,
    pub r_hi_frac: f64,
    pub fit_decades: f64,
    pub min_decades: f64,
    /// PASS needs max/min realized envelope constant <= spread_max.
    pub spread_max: f64,
    /// Same roll-off as the size fit; see KernelSizeConfig.
    pub spectral_rolloff: bool,
}

impl Default for CancellationConfig {
    fn default() -> Self {
        CancellationConfig {
            rho: 0.5,
            grid: 1024,
            halfwidth: 1.0,
            taus: vec![1.0, 1.0],
            r_list: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            r_lo_cells: 4.0,
            r_hi_frac: 0.5,
            fit_decades: 2.0,
            min_decades: 1.0,
            spread_max: 2.0,
            spectral_rolloff: true,
        }
    }
}

#[derive(Serialize)]
struct CancellationTolerances {
    spread_max: f64,
    min_decades: f64,
}

/// Average the kernel over its first variable against a dilated bump:
/// C_R(z2) = sum_{z1} Omega(z1, z2) bump(R z1) dz1. Returns the positive
/// half-ray of |C_R| with its radii.
pub(crate) fn bump_average(
    kernel: &crate::operators::KernelField,
    scale: f64,
) -> (Vec<f64>, Vec<Complex64>) {
    let layout = kernel.samples.layout().clone();
    let g0 = layout.grid_points()[0];
    let g1 = layout.grid_points()[1];
    let dx = layout.physical_step(0);
    let z1 = layout.physical_axis_values(0);
    let bump = NormalizedBump::new(1.0).expect("unit bump");
    let weights: Vec<f64> = z1.iter().map(|&u| bump.eval_radial(scale * u.abs()) * dx).collect();
    let mut averaged = vec![Complex64::new(0.0, 0.0); g1];
    for j0 in 0..g0 {
        let w = weights[j0];
        if w == 0.0 {
            continue;
        }
        for (j1, acc) in averaged.iter_mut().enumerate() {
            *acc += kernel.samples.samples()[[j0, j1]] * w;
        }
    }
    let radii: Vec<f64> = layout.physical_axis_values(1).to_vec();
    (radii, averaged)
}

fn positive_half(radii: &[f64], values: &[Complex64]) -> RaySamples {
    let mut r = Vec::new();
    let mut v = Vec::new();
    for (&radius, &value) in radii.iter().zip(values) {
        if radius > 0.0 {
            r.push(radius);
            v.push(value.norm());
        }
    }
    RaySamples {
        radii: r,
        values: v,
    }
}

pub fn cancellation_experiment(config: &CancellationConfig) -> Result<EstimateReport> {
    if !(config.rho > 0.0) {
        return Err(Error::InvalidParameter(
            "cancellation envelopes need rho > 0".into(),
        ));
    }
    if config.taus.len() != 2 {
        return Err(Error::InvalidParameter(
            "cancellation runs on exactly two one-dimensional factors".into(),
        ));
    }
    if config.r_list.is_empty() {
        return Err(Error::InvalidParameter("empty bump scale list".into()));
    }
    let layout = ProductLayout::uniform(vec![1, 1], config.rho, config.grid, config.halfwidth)?;
    let tolerances = CancellationTolerances {
        spread_max: config.spread_max,
        min_decades: config.min_decades,
    };
    let mut report = EstimateReport::new(ExperimentKind::Cancellation, config, &tolerances)?;

    let bound = SymbolSpec {
        family: SymbolFamily::ProductImaginaryOrder {
            taus: config.taus.clone(),
        },
        analytic_derivatives: true,
    }
    .bind(&layout)?;
    let x0 = [0.0, 0.0];
    let mut table = symbol_frequency_table(&bound, &layout, &x0);
    if config.spectral_rolloff {
        band_limit_in_place(&mut table);
        report.note("spectral roll-off active: outer half-band tapered smoothly to zero");
    }
    let kernel = kernel_from_table(&x0, &table)?;

    let inv_rho = 1.0 / config.rho;
    let dx = layout.physical_step(0);
    let resol = band_floor(&layout, config.spectral_rolloff);
    let (w_lo, w_hi) = central_decades(
        (config.r_lo_cells * dx).max(resolved_radius(&[1.0], inv_rho, resol)),
        config.r_hi_frac * config.halfwidth,
        config.fit_decades,
    );
    let span = decades(w_lo, w_hi);
    report.note(format!(
        "fit window [{w_lo:.4}, {w_hi:.4}] spans {span:.2} decades"
    ));
    if span < config.min_decades {
        report.note("window narrower than the required decade span");
        report.verdict = Verdict::Inconclusive;
        return Ok(report);
    }

    let env = move |r: f64| (r + r.powf(inv_rho)).recip();
    let mut constants: Vec<f64> = Vec::new();
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    for &scale in &config.r_list {
        let (radii, averaged) = bump_average(&kernel, scale);
        let ray = positive_half(&radii, &averaged);
        let peaks = octave_peaks(&ray, w_lo, w_hi);
        for &(r, v) in &peaks {
            report.push_sample(format!("C R={scale}"), r, v);
            pooled.push((env(r).ln(), v.ln()));
        }
        if peaks.len() < 3 {
            report.note(format!("R={scale}: too few octave peaks"));
            continue;
        }
        // The realized constant is the smallest A with |C_R| <= A * env on
        // the window; its stability across scales is the claim under test.
        // The fitted slope is recorded as a shape diagnostic only: a profile
        // decaying faster than the envelope still satisfies the bound.
        let constant = peaks
            .iter()
            .map(|&(r, v)| v / env(r))
            .fold(0.0f64, f64::max);
        constants.push(constant);
        let fit = envelope_fit(&peaks, env)?;
        report.push_sample(format!("slope R={scale}"), scale, fit.slope);
        report.push_sample(format!("constant R={scale}"), scale, constant);
        report.note(format!(
            "R={scale}: realized constant {:.4e}, slope {:.4} (diagnostic), correlation {:.4}",
            constant, fit.slope, fit.correlation
        ));
    }
    if constants.len() < config.r_list.len() {
        report.note("some bump scales produced no usable envelope window");
        report.verdict = Verdict::Inconclusive;
        return Ok(report);
    }
    let aggregate = crate::fitting::linear_fit(&pooled)?;
    report.fit = Some(FitSummary::from(aggregate));
    let c_max = constants.iter().cloned().fold(f64::MIN, f64::max);
    let c_min = constants.iter().cloned().fold(f64::MAX, f64::min);
    let spread = c_max / c_min;
    report.push_sample("constant_spread", 0.0, spread);
    report.note(format!(
        "realized constant spread {spread:.3} across bump scales (allowed {:.1})",
        config.spread_max
    ));
    report.verdict = if spread <= config.spread_max {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(report)
}
