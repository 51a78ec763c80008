//! Experiment drivers that realize the library's quantitative estimates on
//! concrete grids and return typed reports: sampled values, an optional
//! least-squares fit, and a verdict against tolerances pinned in each config.
//!
//! Every driver is deterministic in its config (seeds included): rerunning
//! one must reproduce the report bit for bit.

pub mod decay;
pub mod kernel;
pub mod lp;
pub mod maximal;
pub mod resolution;
pub mod square;

pub use decay::{decay_experiment, DecayConfig};
pub use kernel::{cancellation_experiment, kernel_size_fit, CancellationConfig, KernelSizeConfig};
pub use lp::{lp_ratio_experiment, LpRatioConfig};
pub use maximal::{maximal_domination, MaximalConfig};
pub use resolution::{resolution_sum_probe, ResolutionConfig};
pub use square::{
    hormander_condition_check, square_l2_check, HormanderConfig, SquareL2Config,
};

use std::io::Write as IoWrite;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{LinearFit, Verdict};
use crate::layout::{forward_dft, inverse_dft, Domain, Field, ProductLayout};
use crate::operators::{l2_norm_estimate, LinearOp};
use crate::symbols::{BoundSymbol, SymbolFamily, SymbolLike};

// ---------------------------------------------------------------------------
// Report types

/// The eight experiment drivers, named by what they measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Decay,
    MaximalDomination,
    KernelSize,
    Cancellation,
    LpRatio,
    SquareL2,
    HormanderCondition,
    ResolutionSum,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Decay => "decay",
            ExperimentKind::MaximalDomination => "maximal_domination",
            ExperimentKind::KernelSize => "kernel_size",
            ExperimentKind::Cancellation => "cancellation",
            ExperimentKind::LpRatio => "lp_ratio",
            ExperimentKind::SquareL2 => "square_l2",
            ExperimentKind::HormanderCondition => "hormander_condition",
            ExperimentKind::ResolutionSum => "resolution_sum",
        }
    }

    /// All kinds in a stable order (used by listings).
    pub fn all() -> [ExperimentKind; 8] {
        [
            ExperimentKind::Decay,
            ExperimentKind::MaximalDomination,
            ExperimentKind::KernelSize,
            ExperimentKind::Cancellation,
            ExperimentKind::LpRatio,
            ExperimentKind::SquareL2,
            ExperimentKind::HormanderCondition,
            ExperimentKind::ResolutionSum,
        ]
    }
}

/// One measured point: a free-text label, the swept parameter, the value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplePoint {
    pub label: String,
    pub parameter: f64,
    pub value: f64,
}

/// Least-squares summary attached to reports whose verdict involves a fit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitSummary {
    pub slope: f64,
    pub intercept: f64,
    pub correlation: f64,
    pub count: usize,
}

impl From<LinearFit> for FitSummary {
    fn from(f: LinearFit) -> Self {
        FitSummary {
            slope: f.slope,
            intercept: f.intercept,
            correlation: f.correlation,
            count: f.count,
        }
    }
}

/// Full result of one experiment run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub experiment: ExperimentKind,
    /// Echo of the config the run used.
    pub inputs: serde_json::Value,
    pub samples: Vec<SamplePoint>,
    pub fit: Option<FitSummary>,
    pub verdict: Verdict,
    /// Echo of every tolerance the verdict consulted.
    pub tolerances: serde_json::Value,
    pub notes: Vec<String>,
}

impl EstimateReport {
    pub fn new<C: Serialize, T: Serialize>(
        experiment: ExperimentKind,
        inputs: &C,
        tolerances: &T,
    ) -> Result<Self> {
        Ok(EstimateReport {
            experiment,
            inputs: serde_json::to_value(inputs)
                .map_err(|e| Error::InvalidParameter(format!("config not serializable: {e}")))?,
            samples: Vec::new(),
            fit: None,
            verdict: Verdict::Inconclusive,
            tolerances: serde_json::to_value(tolerances)
                .map_err(|e| Error::InvalidParameter(format!("tolerances not serializable: {e}")))?,
            notes: Vec::new(),
        })
    }

    pub fn push_sample(&mut self, label: impl Into<String>, parameter: f64, value: f64) {
        self.samples.push(SamplePoint {
            label: label.into(),
            parameter,
            value,
        });
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidParameter(format!("report serialization failed: {e}")))
    }

    /// CSV of the samples: quoted label, parameter, value. Floats use the
    /// shortest roundtrip form so reruns are byte-identical.
    pub fn write_csv<W: IoWrite>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "label,parameter,value").map_err(Error::Io)?;
        for s in &self.samples {
            writeln!(
                out,
                "\"{}\",{},{}",
                s.label.replace('"', "'"),
                s.parameter,
                s.value
            )
            .map_err(Error::Io)?;
        }
        Ok(())
    }

    /// Python script that plots samples.csv from the same directory. The
    /// fit, when present, is baked in as constants.
    pub fn plot_script(&self) -> String {
        let (y_log, fit_base) = match self.experiment {
            ExperimentKind::Decay => (true, Some(2.0_f64)),
            ExperimentKind::KernelSize
            | ExperimentKind::Cancellation
            | ExperimentKind::HormanderCondition => (true, None),
            _ => (false, None),
        };
        let mut fit_block = String::from("fit = None\n");
        if let (Some(f), Some(base)) = (self.fit, fit_base) {
            fit_block = format!(
                "fit = (lambda x: {base} ** ({intercept} + {slope} * x))\n",
                base = base,
                intercept = f.intercept,
                slope = f.slope
            );
        }
        format!(
            r#"#!/usr/bin/env python3
# Plots samples.csv produced by the {name} experiment.
import csv
import collections
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("samples.csv")))
groups = collections.OrderedDict()
for r in rows:
    key = r["label"].split(" ")[0]
    groups.setdefault(key, []).append((float(r["parameter"]), float(r["value"])))

fig, ax = plt.subplots(figsize=(7, 5))
for key, pts in groups.items():
    pts.sort()
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    ax.plot(xs, ys, "o", markersize=3, label=key)
{fit_block}if fit is not None:
    xs = sorted({{float(r["parameter"]) for r in rows}})
    ax.plot(xs, [fit(x) for x in xs], "-", color="black", label="fit")
if {y_log}:
    positive = all(float(r["value"]) > 0 for r in rows)
    if positive and rows:
        ax.set_yscale("log")
ax.set_xlabel("parameter")
ax.set_ylabel("value")
ax.set_title("{name}")
if len(groups) <= 12:
    ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig("plot.png", dpi=140)
print("wrote plot.png")
"#,
            name = self.experiment.name(),
            fit_block = fit_block,
            y_log = if y_log { "True" } else { "False" },
        )
    }
}

// ---------------------------------------------------------------------------
// Exact separable composition used by the sweep drivers
//
// The experiment sweeps need hundreds of operator norms on grids where the
// quadratic-cost direct evaluation is out of reach. Every built-in family
// factors exactly as sigma(x, xi) = psi(x) m(xi), so the operator is
// exactly a frequency multiplier followed by a pointwise multiplier, and a
// piece-localized version composes two more multipliers around it. The
// factorization is exact (not a truncated expansion) and is cross-validated
// against the direct path in the tests below.

/// Frequency multiplier, pointwise window, frequency multiplier, applied
/// right to left. Any stage may be absent.
#[derive(Debug, Clone)]
pub struct SandwichOp {
    layout: Arc<ProductLayout>,
    left: Option<Field>,
    mid: Option<Field>,
    right: Option<Field>,
}

impl SandwichOp {
    pub fn new(layout: Arc<ProductLayout>) -> Self {
        SandwichOp {
            layout,
            left: None,
            mid: None,
            right: None,
        }
    }

    pub fn with_left(mut self, table: Field) -> Result<Self> {
        table.expect_domain(Domain::Frequency)?;
        self.check(&table)?;
        self.left = Some(table);
        Ok(self)
    }

    pub fn with_mid(mut self, window: Field) -> Result<Self> {
        window.expect_domain(Domain::Physical)?;
        self.check(&window)?;
        self.mid = Some(window);
        Ok(self)
    }

    pub fn with_right(mut self, table: Field) -> Result<Self> {
        table.expect_domain(Domain::Frequency)?;
        self.check(&table)?;
        self.right = Some(table);
        Ok(self)
    }

    fn check(&self, f: &Field) -> Result<()> {
        if !Arc::ptr_eq(f.layout(), &self.layout) && f.layout().grid_points() != self.layout.grid_points() {
            return Err(Error::LayoutMismatch(
                "sandwich stage has a different grid".into(),
            ));
        }
        Ok(())
    }

    fn multiply_in_frequency(&self, f: &Field, table: &Field, conj: bool) -> Result<Field> {
        let mut hat = forward_dft(f)?;
        for (h, t) in hat.samples_mut().iter_mut().zip(table.samples().iter()) {
            *h *= if conj { t.conj() } else { *t };
        }
        inverse_dft(&hat)
    }

    fn multiply_pointwise(f: &mut Field, window: &Field, conj: bool) {
        for (v, w) in f.samples_mut().iter_mut().zip(window.samples().iter()) {
            *v *= if conj { w.conj() } else { *w };
        }
    }
}

impl LinearOp for SandwichOp {
    fn op_layout(&self) -> &Arc<ProductLayout> {
        &self.layout
    }

    fn apply_op(&self, f: &Field) -> Result<Field> {
        f.expect_domain(Domain::Physical)?;
        let mut g = f.clone();
        if let Some(right) = &self.right {
            g = self.multiply_in_frequency(&g, right, false)?;
        }
        if let Some(mid) = &self.mid {
            Self::multiply_pointwise(&mut g, mid, false);
        }
        if let Some(left) = &self.left {
            g = self.multiply_in_frequency(&g, left, false)?;
        }
        Ok(g)
    }

    fn adjoint_op(&self, g: &Field) -> Result<Field> {
        g.expect_domain(Domain::Physical)?;
        let mut f = g.clone();
        if let Some(left) = &self.left {
            f = self.multiply_in_frequency(&f, left, true)?;
        }
        if let Some(mid) = &self.mid {
            Self::multiply_pointwise(&mut f, mid, true);
        }
        if let Some(right) = &self.right {
            f = self.multiply_in_frequency(&f, right, true)?;
        }
        Ok(f)
    }
}

/// Exact factorization sigma(x, xi) = psi(x) m(xi) for the built-in
/// families, returned as (physical window, frequency multiplier) tables.
pub fn separable_parts(
    bound: &BoundSymbol,
    layout: &Arc<ProductLayout>,
) -> (Field, Field) {
    let axes = layout.total_axes();
    let zero = vec![0.0; axes];
    let one = Complex64::new(1.0, 0.0);
    let (window, multiplier): (Field, Field) = match bound.spec().family {
        SymbolFamily::Constant => (
            Field::from_fn(layout.clone(), Domain::Physical, |_| one),
            Field::from_fn(layout.clone(), Domain::Frequency, |_| one),
        ),
        SymbolFamily::SmoothXMultiplier { .. } => (
            Field::from_fn(layout.clone(), Domain::Physical, |x| bound.value(x, &zero)),
            Field::from_fn(layout.clone(), Domain::Frequency, |_| one),
        ),
        SymbolFamily::ClassicalImaginaryOrder { .. }
        | SymbolFamily::ProductImaginaryOrder { .. }
        | SymbolFamily::RiemannSingularity { .. } => (
            Field::from_fn(layout.clone(), Domain::Physical, |_| one),
            Field::from_fn(layout.clone(), Domain::Frequency, |xi| bound.value(&zero, xi)),
        ),
        // The window equals the value at xi = 0 because the multiplier part
        // is exactly 1 there; the multiplier equals the value at x = 0
        // because the window is exactly 1 there.
        SymbolFamily::ModulatedProduct { .. } => (
            Field::from_fn(layout.clone(), Domain::Physical, |x| bound.value(x, &zero)),
            Field::from_fn(layout.clone(), Domain::Frequency, |xi| bound.value(&zero, xi)),
        ),
    };
    (window, multiplier)
}

/// Operator norm for sweeps: retries the power iteration once with a
/// different start on non-convergence and otherwise reports the capped
/// estimate with a false flag instead of aborting the whole sweep.
pub(crate) fn robust_norm(
    op: &dyn LinearOp,
    seed: u64,
    tol: f64,
    cap: usize,
) -> Result<(f64, bool)> {
    let (first, ok) = l2_norm_estimate(op, seed, tol, cap)?;
    if ok {
        return Ok((first, true));
    }
    let (second, ok2) = l2_norm_estimate(op, seed ^ 0x5bd1_e995, tol, cap)?;
    if ok2 {
        return Ok((second, true));
    }
    Ok((first.max(second), false))
}

// ---------------------------------------------------------------------------
// Ray extraction and envelope fits shared by the kernel-shape experiments

/// Magnitudes sampled along a straight ray from the origin.
#[derive(Debug, Clone)]
pub struct RaySamples {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

/// |field| along the positive direction of one storage axis, radius k dx.
pub fn axis_ray(samples: &Field, axis: usize) -> RaySamples {
    let layout = samples.layout().clone();
    let g = layout.grid_points()[axis];
    let step = layout.physical_step(axis);
    let center: Vec<usize> = layout.grid_points().iter().map(|&d| d / 2).collect();
    let mut radii = Vec::with_capacity(g / 2 - 1);
    let mut values = Vec::with_capacity(g / 2 - 1);
    for k in 1..g / 2 {
        let mut idx = center.clone();
        idx[axis] += k;
        radii.push(k as f64 * step);
        values.push(samples.samples()[idx.as_slice()].norm());
    }
    RaySamples { radii, values }
}

/// |field| along the all-axes diagonal, radius k dx sqrt(axes) (requires a
/// cubic grid with equal steps).
pub fn diagonal_ray(samples: &Field) -> RaySamples {
    let layout = samples.layout().clone();
    let axes = layout.total_axes();
    let g = layout.grid_points()[0];
    let step = layout.physical_step(0);
    let center: Vec<usize> = layout.grid_points().iter().map(|&d| d / 2).collect();
    let mut radii = Vec::new();
    let mut values = Vec::new();
    for k in 1..g / 2 {
        let idx: Vec<usize> = center.iter().map(|&c| c + k).collect();
        radii.push(k as f64 * step * (axes as f64).sqrt());
        values.push(samples.samples()[idx.as_slice()].norm());
    }
    RaySamples { radii, values }
}

/// Largest magnitude per dyadic radius bin inside [r_lo, r_hi]; returns
/// (radius at the peak, peak value) per non-empty bin. Peak binning rides
/// the envelope of an oscillating profile instead of its zero crossings.
pub fn octave_peaks(ray: &RaySamples, r_lo: f64, r_hi: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    if !(r_lo > 0.0) || !(r_hi > r_lo) {
        return out;
    }
    let bins = (r_hi / r_lo).log2().ceil() as usize;
    for b in 0..bins.max(1) {
        let lo = r_lo * (2.0_f64).powi(b as i32);
        let hi = (lo * 2.0).min(r_hi * (1.0 + 1e-12));
        let mut best: Option<(f64, f64)> = None;
        for (&r, &v) in ray.radii.iter().zip(&ray.values) {
            if r >= lo && r < hi {
                if best.map_or(true, |(_, bv)| v > bv) {
                    best = Some((r, v));
                }
            }
        }
        if let Some(p) = best {
            if p.1 > 0.0 {
                out.push(p);
            }
        }
    }
    out
}

/// Fits ln(peak value) against ln(envelope(radius)): a slope near 1 means
/// the measured profile tracks the predicted envelope shape.
pub fn envelope_fit(
    peaks: &[(f64, f64)],
    envelope: impl Fn(f64) -> f64,
) -> Result<LinearFit> {
    let pts: Vec<(f64, f64)> = peaks
        .iter()
        .filter(|(r, v)| *v > 0.0 && envelope(*r) > 0.0)
        .map(|&(r, v)| (envelope(r).ln(), v.ln()))
        .collect();
    crate::fitting::linear_fit(&pts)
}

/// Number of decades spanned by a positive interval.
pub fn decades(r_lo: f64, r_hi: f64) -> f64 {
    (r_hi / r_lo).log10()
}

/// Central window of at most `keep` decades inside [r_lo, r_hi].
pub fn central_decades(r_lo: f64, r_hi: f64, keep: f64) -> (f64, f64) {
    let span = decades(r_lo, r_hi);
    if span <= keep {
        return (r_lo, r_hi);
    }
    let mid = (r_lo.log10() + r_hi.log10()) / 2.0;
    (
        10f64.powf(mid - keep / 2.0),
        10f64.powf(mid + keep / 2.0),
    )
}

/// "(3;2)" style tuple label usable inside CSV fields.
pub fn tuple_label(t: &crate::dyadic::DyadicTuple) -> String {
    let parts: Vec<String> = t.entries().iter().map(|v| v.to_string()).collect();
    format!("({})", parts.join(";"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{delta_field, DyadicTuple};
    use crate::layout::ProductLayout;
    use crate::operators::{apply_direct, apply_partial_sum, l2_operator_norm};
    use crate::symbols::{SymbolFamily, SymbolSpec};

    fn bound(layout: &Arc<ProductLayout>, family: SymbolFamily) -> BoundSymbol {
        SymbolSpec {
            family,
            analytic_derivatives: true,
        }
        .bind(layout)
        .unwrap()
    }

    fn all_families() -> Vec<SymbolFamily> {
        vec![
            SymbolFamily::Constant,
            SymbolFamily::SmoothXMultiplier { radius: 0.4 },
            SymbolFamily::ClassicalImaginaryOrder { tau: 0.8 },
            SymbolFamily::ProductImaginaryOrder { taus: vec![1.0, 1.0] },
            SymbolFamily::ModulatedProduct {
                taus: vec![1.0, -0.5],
                radius: 0.4,
            },
            SymbolFamily::RiemannSingularity { gamma: 1.5 },
        ]
    }

    #[test]
    fn separable_parts_reproduce_every_family() {
        let layout = ProductLayout::uniform(vec![1, 1], 0.5, 16, 0.5).unwrap();
        for family in all_families() {
            let b = bound(&layout, family.clone());
            let (window, multiplier) = separable_parts(&b, &layout);
            let mut x = vec![0.0; 2];
            let mut xi = vec![0.0; 2];
            let shape = layout.grid_points().to_vec();
            let mut idx = vec![0usize; 2];
            loop {
                layout.physical_point(&idx, &mut x);
                layout.frequency_point(&idx, &mut xi);
                let direct = b.value(&x, &xi);
                let product = window.samples()[idx.as_slice()]
                    * multiplier.samples()[idx.as_slice()];
                assert!(
                    (direct - product).norm() < 1e-12,
                    "{family:?} at {x:?},{xi:?}: {direct} vs {product}"
                );
                if !crate::dyadic::advance_index(&mut idx, &shape) {
                    break;
                }
            }
        }
    }

    #[test]
    fn sandwich_matches_direct_application() {
        let layout = ProductLayout::uniform(vec![1, 1], 0.5, 32, 0.5).unwrap();
        let b = bound(
            &layout,
            SymbolFamily::ModulatedProduct {
                taus: vec![1.0, 1.0],
                radius: 0.4,
            },
        );
        let (window, multiplier) = separable_parts(&b, &layout);
        let op = SandwichOp::new(layout.clone())
            .with_mid(window)
            .unwrap()
            .with_right(multiplier)
            .unwrap();
        let f = crate::random::dense_random_field(&layout, Domain::Physical, 5);
        let fast = op.apply_op(&f).unwrap();
        let slow = apply_direct(&b, &layout, &f).unwrap();
        let err = fast
            .samples()
            .iter()
            .zip(slow.samples().iter())
            .map(|(a, c)| (a - c).norm())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-10, "sandwich deviates from direct path by {err}");

        // Piece-localized version against the composed direct path.
        let t = DyadicTuple::new(vec![3, 3]);
        let dt = delta_field(&layout, &t);
        let loc = SandwichOp::new(layout.clone())
            .with_left(dt)
            .unwrap()
            .with_mid(separable_parts(&b, &layout).0)
            .unwrap()
            .with_right(separable_parts(&b, &layout).1)
            .unwrap();
        let fast_loc = loc.apply_op(&f).unwrap();
        let slow_loc = apply_partial_sum(&layout, &t, &slow).unwrap();
        let err_loc = fast_loc
            .samples()
            .iter()
            .zip(slow_loc.samples().iter())
            .map(|(a, c)| (a - c).norm())
            .fold(0.0f64, f64::max);
        assert!(err_loc < 1e-10, "localized sandwich deviates by {err_loc}");
    }

    #[test]
    fn sandwich_adjoint_satisfies_pairing() {
        let layout = ProductLayout::uniform(vec![1, 1], 0.5, 16, 0.5).unwrap();
        let b = bound(
            &layout,
            SymbolFamily::ModulatedProduct {
                taus: vec![0.7, -1.1],
                radius: 0.3,
            },
        );
        let (window, multiplier) = separable_parts(&b, &layout);
        let t = DyadicTuple::new(vec![1, 2]);
        let op = SandwichOp::new(layout.clone())
            .with_left(delta_field(&layout, &t))
            .unwrap()
            .with_mid(window)
            .unwrap()
            .with_right(multiplier)
            .unwrap();
        let f = crate::random::dense_random_field(&layout, Domain::Physical, 9);
        let g = crate::random::dense_random_field(&layout, Domain::Physical, 10);
        let af = op.apply_op(&f).unwrap();
        let astar_g = op.adjoint_op(&g).unwrap();
        let lhs: Complex64 = af
            .samples()
            .iter()
            .zip(g.samples().iter())
            .map(|(a, b)| a * b.conj())
            .sum();
        let rhs: Complex64 = f
            .samples()
            .iter()
            .zip(astar_g.samples().iter())
            .map(|(a, b)| a * b.conj())
            .sum();
        assert!(
            (lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1.0),
            "pairing mismatch {lhs} vs {rhs}"
        );
    }

    #[test]
    fn sandwich_norm_of_pure_multiplier_matches_table_sup() {
        let layout = ProductLayout::uniform(vec![1, 1], 0.5, 32, 0.5).unwrap();
        let t = DyadicTuple::new(vec![2, 2]);
        let dt = delta_field(&layout, &t);
        let sup = dt
            .samples()
            .iter()
            .map(|v| v.norm())
            .fold(0.0f64, f64::max);
        let op = SandwichOp::new(layout.clone()).with_left(dt.clone()).unwrap();
        let norm = l2_operator_norm(&op, 3).unwrap();
        assert!(
            (norm - sup).abs() <= 1e-5 * sup.max(1e-30),
            "norm {norm} vs table sup {sup}"
        );
    }

    #[test]
    fn octave_peaks_recover_power_law_slope() {
        // Oscillating profile under an exact r^-3 envelope.
        let radii: Vec<f64> = (1..2000).map(|k| k as f64 * 1e-3).collect();
        let values: Vec<f64> = radii
            .iter()
            .map(|r| r.powi(-3) * (2.0 + (10.0 * r.ln()).sin()))
            .collect();
        let ray = RaySamples { radii, values };
        let peaks = octave_peaks(&ray, 2e-3, 1.0);
        assert!(peaks.len() >= 6, "expected several octave bins");
        let fit = envelope_fit(&peaks, |r| r.powi(-3)).unwrap();
        assert!(
            (fit.slope - 1.0).abs() < 0.1,
            "slope {} should be near 1",
            fit.slope
        );
        assert!(fit.correlation > 0.99);
    }

    #[test]
    fn central_decades_clips_symmetrically() {
        let (lo, hi) = central_decades(1e-3, 1e1, 2.0);
        assert!((decades(lo, hi) - 2.0).abs() < 1e-12);
        assert!((lo.log10() - 1e-3f64.log10() - 1.0).abs() < 1e-9);
        // Window smaller than the cap is returned unchanged.
        let (lo2, hi2) = central_decades(0.5, 2.0, 2.0);
        assert_eq!((lo2, hi2), (0.5, 2.0));
    }

    #[test]
    fn report_serialization_and_csv_are_stable() {
        #[derive(Serialize)]
        struct Cfg {
            grid: usize,
        }
        #[derive(Serialize)]
        struct Tol {
            spread_max: f64,
        }
        let mut report =
            EstimateReport::new(ExperimentKind::Cancellation, &Cfg { grid: 64 }, &Tol {
                spread_max: 2.0,
            })
            .unwrap();
        report.push_sample("C R=1", 0.25, 1.5e-3);
        report.push_sample("C R=2", 0.25, 7.5e-4);
        report.verdict = Verdict::Pass;
        let json = report.to_json_pretty().unwrap();
        assert!(json.contains("\"cancellation\""));
        assert!(json.contains("\"spread_max\": 2.0"));
        let mut csv = Vec::new();
        report.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(
            text,
            "label,parameter,value\n\"C R=1\",0.25,0.0015\n\"C R=2\",0.25,0.00075\n"
        );
        let script = report.plot_script();
        assert!(script.contains("samples.csv"));
        assert!(script.contains("cancellation"));
    }
}
