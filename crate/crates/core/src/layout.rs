//! Discretized product space, the field container, and the DFT contract the
//! rest of the library builds on.
//!
//! The physical domain is a periodic box: axis `a` samples x_j = -L_a + j*dx_a
//! with dx_a = 2 L_a / G_a. The frequency grid stores signed frequencies in
//! FFT order, spacing 1/(2 L_a), Nyquist G_a/(4 L_a). The transform pair is
//! unitary with the analysis kernel e^{-2 pi i x.xi}, which on these grids
//! reduces to a per-axis FFT with an alternating-sign phase and 1/sqrt(G_a)
//! scaling.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::ops::Range;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::{ArrayD, Axis, Dimension, IxDyn};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};

/// Default ceiling on total grid points per layout.
pub const DEFAULT_POINT_CAP: usize = 1 << 22;

/// q = 1/rho as an extended real; infinite exactly when rho = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum QExponent {
    Finite(f64),
    Infinite,
}

impl QExponent {
    pub fn from_rho(rho: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::InvalidParameter(format!(
                "homogeneity parameter must satisfy 0 <= rho < 1, got {rho}"
            )));
        }
        if rho == 0.0 {
            Ok(QExponent::Infinite)
        } else {
            Ok(QExponent::Finite(1.0 / rho))
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, QExponent::Infinite)
    }

    /// Numeric value; infinity for the rho = 0 case.
    pub fn value(&self) -> f64 {
        match self {
            QExponent::Finite(q) => *q,
            QExponent::Infinite => f64::INFINITY,
        }
    }

    /// q*t under the convention that q*0 = 0 even when q is infinite. This is
    /// what makes the t = 0 dilation the identity for every rho.
    pub fn times(&self, t: f64) -> f64 {
        match self {
            QExponent::Finite(q) => q * t,
            QExponent::Infinite => {
                if t == 0.0 {
                    0.0
                } else if t > 0.0 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// 2^{-q t}: evaluates to 0 for t > 0 and 1 for t = 0 when q is infinite.
    pub fn two_pow_neg_qt(&self, t: f64) -> f64 {
        let qt = self.times(t);
        if qt.is_infinite() {
            if qt > 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (-qt).exp2()
        }
    }

    /// 2^{q t}; infinite for t > 0 when q is infinite.
    pub fn two_pow_qt(&self, t: f64) -> f64 {
        let qt = self.times(t);
        if qt.is_infinite() {
            if qt > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        } else {
            qt.exp2()
        }
    }
}

/// Which side of the transform a field's samples live on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Domain {
    Physical,
    Frequency,
}

impl Domain {
    pub fn name(&self) -> &'static str {
        match self {
            Domain::Physical => "physical",
            Domain::Frequency => "frequency",
        }
    }
}

/// Dimensions, homogeneity, and discretization of the product space.
///
/// Axes 0..total_axes are grouped into n factors; factor i owns a contiguous
/// block of dims[i] axes. Coordinate tables for both domains are precomputed
/// at construction and immutable afterwards.
#[derive(Debug)]
pub struct ProductLayout {
    dims: Vec<usize>,
    rho: f64,
    q: QExponent,
    grid_points: Vec<usize>,
    box_halfwidth: Vec<f64>,
    factor_offsets: Vec<usize>,
    physical_axes: Vec<Vec<f64>>,
    frequency_axes: Vec<Vec<f64>>,
}

impl PartialEq for ProductLayout {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims
            && self.rho == other.rho
            && self.grid_points == other.grid_points
            && self.box_halfwidth == other.box_halfwidth
    }
}

impl ProductLayout {
    pub fn new(
        dims: Vec<usize>,
        rho: f64,
        grid_points: Vec<usize>,
        box_halfwidth: Vec<f64>,
    ) -> Result<Arc<Self>> {
        Self::with_point_cap(dims, rho, grid_points, box_halfwidth, DEFAULT_POINT_CAP)
    }

    pub fn with_point_cap(
        dims: Vec<usize>,
        rho: f64,
        grid_points: Vec<usize>,
        box_halfwidth: Vec<f64>,
        point_cap: usize,
    ) -> Result<Arc<Self>> {
        if dims.is_empty() {
            return Err(Error::InvalidParameter("factor count must be >= 1".into()));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidParameter(
                "every factor dimension must be >= 1".into(),
            ));
        }
        let q = QExponent::from_rho(rho)?;
        let total_axes: usize = dims.iter().sum();
        if grid_points.len() != total_axes {
            return Err(Error::InvalidParameter(format!(
                "grid_points has {} entries, need one per axis ({total_axes})",
                grid_points.len()
            )));
        }
        if box_halfwidth.len() != total_axes {
            return Err(Error::InvalidParameter(format!(
                "box_halfwidth has {} entries, need one per axis ({total_axes})",
                box_halfwidth.len()
            )));
        }
        if grid_points.iter().any(|&g| g == 0 || !g.is_power_of_two()) {
            return Err(Error::InvalidParameter(
                "grid_points must be a power of two on every axis".into(),
            ));
        }
        if box_halfwidth
            .iter()
            .any(|&l| !(l > 0.0) || !l.is_finite())
        {
            return Err(Error::InvalidParameter(
                "box_halfwidth must be positive and finite on every axis".into(),
            ));
        }
        let mut total_points: usize = 1;
        for &g in &grid_points {
            total_points = total_points.checked_mul(g).ok_or_else(|| {
                Error::InvalidParameter("total grid points overflow".into())
            })?;
        }
        if total_points > point_cap {
            return Err(Error::InvalidParameter(format!(
                "total grid points {total_points} exceed cap {point_cap}"
            )));
        }
        let mut factor_offsets = Vec::with_capacity(dims.len() + 1);
        let mut off = 0;
        for &d in &dims {
            factor_offsets.push(off);
            off += d;
        }
        factor_offsets.push(off);
        let physical_axes = grid_points
            .iter()
            .zip(&box_halfwidth)
            .map(|(&g, &l)| {
                let dx = 2.0 * l / g as f64;
                (0..g).map(|j| -l + j as f64 * dx).collect()
            })
            .collect();
        let frequency_axes = grid_points
            .iter()
            .zip(&box_halfwidth)
            .map(|(&g, &l)| {
                let step = 1.0 / (2.0 * l);
                (0..g)
                    .map(|k| {
                        let signed = if k < g / 2 || g == 1 {
                            k as i64
                        } else {
                            k as i64 - g as i64
                        };
                        signed as f64 * step
                    })
                    .collect()
            })
            .collect();
        Ok(Arc::new(ProductLayout {
            dims,
            rho,
            q,
            grid_points,
            box_halfwidth,
            factor_offsets,
            physical_axes,
            frequency_axes,
        }))
    }

    /// Same grid size and box on every axis.
    pub fn uniform(
        dims: Vec<usize>,
        rho: f64,
        grid_per_axis: usize,
        halfwidth: f64,
    ) -> Result<Arc<Self>> {
        let total: usize = dims.iter().sum();
        Self::new(
            dims,
            rho,
            vec![grid_per_axis; total],
            vec![halfwidth; total],
        )
    }

    pub fn n(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn q(&self) -> QExponent {
        self.q
    }

    pub fn grid_points(&self) -> &[usize] {
        &self.grid_points
    }

    pub fn box_halfwidths(&self) -> &[f64] {
        &self.box_halfwidth
    }

    pub fn total_axes(&self) -> usize {
        self.grid_points.len()
    }

    pub fn total_points(&self) -> usize {
        self.grid_points.iter().product()
    }

    /// Contiguous axis range owned by factor i.
    pub fn axes_of_factor(&self, i: usize) -> Range<usize> {
        self.factor_offsets[i]..self.factor_offsets[i + 1]
    }

    pub fn factor_of_axis(&self, axis: usize) -> usize {
        match self.factor_offsets.binary_search(&axis) {
            Ok(i) => i.min(self.n() - 1),
            Err(i) => i - 1,
        }
    }

    pub fn physical_step(&self, axis: usize) -> f64 {
        2.0 * self.box_halfwidth[axis] / self.grid_points[axis] as f64
    }

    pub fn frequency_step(&self, axis: usize) -> f64 {
        1.0 / (2.0 * self.box_halfwidth[axis])
    }

    pub fn nyquist(&self, axis: usize) -> f64 {
        self.grid_points[axis] as f64 / (4.0 * self.box_halfwidth[axis])
    }

    pub fn physical_axis_values(&self, axis: usize) -> &[f64] {
        &self.physical_axes[axis]
    }

    /// Signed frequencies for one axis, in FFT storage order.
    pub fn frequency_axis_values(&self, axis: usize) -> &[f64] {
        &self.frequency_axes[axis]
    }

    pub fn physical_cell_volume(&self) -> f64 {
        (0..self.total_axes()).map(|a| self.physical_step(a)).product()
    }

    pub fn frequency_cell_volume(&self) -> f64 {
        (0..self.total_axes())
            .map(|a| self.frequency_step(a))
            .product()
    }

    /// Fill `out` with the physical coordinates of a multi-index.
    pub fn physical_point(&self, idx: &[usize], out: &mut [f64]) {
        for (a, (&i, o)) in idx.iter().zip(out.iter_mut()).enumerate() {
            *o = self.physical_axes[a][i];
        }
    }

    /// Fill `out` with the frequency coordinates of a multi-index.
    pub fn frequency_point(&self, idx: &[usize], out: &mut [f64]) {
        for (a, (&i, o)) in idx.iter().zip(out.iter_mut()).enumerate() {
            *o = self.frequency_axes[a][i];
        }
    }

    /// Euclidean norm of the factor-i block of a full coordinate vector.
    pub fn factor_norm(&self, i: usize, point: &[f64]) -> f64 {
        self.axes_of_factor(i)
            .map(|a| point[a] * point[a])
            .sum::<f64>()
            .sqrt()
    }
}

/// Per-axis signed frequencies grouped by factor: result[i][j] lists the
/// frequency values of the j-th axis of factor i, each within
/// [-Nyquist, Nyquist).
pub fn frequency_coordinates(layout: &ProductLayout) -> Vec<Vec<Vec<f64>>> {
    (0..layout.n())
        .map(|i| {
            layout
                .axes_of_factor(i)
                .map(|a| layout.frequency_axis_values(a).to_vec())
                .collect()
        })
        .collect()
}

/// Complex samples on the product grid, tagged by domain.
#[derive(Debug, Clone)]
pub struct Field {
    layout: Arc<ProductLayout>,
    domain: Domain,
    samples: ArrayD<Complex64>,
}

impl Field {
    pub fn zeros(layout: Arc<ProductLayout>, domain: Domain) -> Field {
        let shape = IxDyn(layout.grid_points());
        Field {
            layout,
            domain,
            samples: ArrayD::zeros(shape),
        }
    }

    /// Build a field by evaluating `f` at every grid point's coordinates
    /// (physical or frequency per the requested domain).
    pub fn from_fn<F>(layout: Arc<ProductLayout>, domain: Domain, mut f: F) -> Field
    where
        F: FnMut(&[f64]) -> Complex64,
    {
        let mut field = Field::zeros(layout, domain);
        let lay = field.layout.clone();
        let mut point = vec![0.0; lay.total_axes()];
        for (idx, v) in field.samples.indexed_iter_mut() {
            match domain {
                Domain::Physical => lay.physical_point(idx.slice(), &mut point),
                Domain::Frequency => lay.frequency_point(idx.slice(), &mut point),
            }
            *v = f(&point);
        }
        field
    }

    pub fn from_samples(
        layout: Arc<ProductLayout>,
        domain: Domain,
        samples: ArrayD<Complex64>,
    ) -> Result<Field> {
        if samples.shape() != layout.grid_points() {
            return Err(Error::LayoutMismatch(format!(
                "sample shape {:?} does not match grid {:?}",
                samples.shape(),
                layout.grid_points()
            )));
        }
        Ok(Field {
            layout,
            domain,
            samples,
        })
    }

    pub fn layout(&self) -> &Arc<ProductLayout> {
        &self.layout
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn samples(&self) -> &ArrayD<Complex64> {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut ArrayD<Complex64> {
        &mut self.samples
    }

    pub fn into_samples(self) -> ArrayD<Complex64> {
        self.samples
    }

    pub fn expect_domain(&self, domain: Domain) -> Result<()> {
        if self.domain == domain {
            Ok(())
        } else {
            Err(Error::DomainTag {
                expected: domain.name(),
                got: self.domain.name(),
            })
        }
    }

    pub fn same_layout(&self, other: &Field) -> Result<()> {
        if Arc::ptr_eq(&self.layout, &other.layout) || self.layout == other.layout {
            Ok(())
        } else {
            Err(Error::LayoutMismatch(
                "fields built on different layouts".into(),
            ))
        }
    }

    /// Unweighted coefficient norm (sum of |v|^2, then sqrt). The transform
    /// is unitary in exactly this norm.
    pub fn coefficient_l2(&self) -> f64 {
        self.samples
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Quadrature-weighted Lp norm over the box (cell-volume weight for the
    /// field's domain). `p = f64::INFINITY` returns the sup of |v|.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if p.is_infinite() && p > 0.0 {
            return Ok(self
                .samples
                .iter()
                .map(|v| v.norm())
                .fold(0.0f64, f64::max));
        }
        if !(p >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Lp norm needs p >= 1 or infinity, got {p}"
            )));
        }
        let vol = match self.domain {
            Domain::Physical => self.layout.physical_cell_volume(),
            Domain::Frequency => self.layout.frequency_cell_volume(),
        };
        let sum: f64 = self.samples.iter().map(|v| v.norm().powf(p)).sum();
        Ok((sum * vol).powf(1.0 / p))
    }

    /// Pointwise multiply by another field sharing layout and domain.
    pub fn pointwise_mul(&mut self, other: &Field) -> Result<()> {
        self.same_layout(other)?;
        other.expect_domain(self.domain)?;
        self.samples.zip_mut_with(&other.samples, |a, b| *a *= *b);
        Ok(())
    }

    /// self += scale * other.
    pub fn accumulate(&mut self, other: &Field, scale: Complex64) -> Result<()> {
        self.same_layout(other)?;
        other.expect_domain(self.domain)?;
        self.samples
            .zip_mut_with(&other.samples, |a, b| *a += scale * *b);
        Ok(())
    }

    /// Binary container: header (n, dims, grid_points per axis,
    /// box_halfwidth per axis, domain tag, rho), then interleaved re/im
    /// doubles in row-major axis order. Little-endian throughout.
    pub fn write_binary<W: Write>(&self, out: &mut W) -> Result<()> {
        let lay = &self.layout;
        write_u64(out, lay.n() as u64)?;
        for &d in lay.dims() {
            write_u64(out, d as u64)?;
        }
        for &g in lay.grid_points() {
            write_u64(out, g as u64)?;
        }
        for &l in lay.box_halfwidths() {
            write_f64(out, l)?;
        }
        let tag = match self.domain {
            Domain::Physical => 0u8,
            Domain::Frequency => 1u8,
        };
        out.write_all(&[tag]).map_err(Error::Io)?;
        write_f64(out, lay.rho())?;
        for v in self.samples.iter() {
            write_f64(out, v.re)?;
            write_f64(out, v.im)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(inp: &mut R) -> Result<Field> {
        let n = read_u64(inp)? as usize;
        if n == 0 || n > 64 {
            return Err(Error::Serialization(format!(
                "implausible factor count {n}"
            )));
        }
        let mut dims = Vec::with_capacity(n);
        for _ in 0..n {
            dims.push(read_u64(inp)? as usize);
        }
        let total_axes: usize = dims.iter().sum();
        if total_axes == 0 || total_axes > 64 {
            return Err(Error::Serialization(format!(
                "implausible axis count {total_axes}"
            )));
        }
        let mut grid = Vec::with_capacity(total_axes);
        for _ in 0..total_axes {
            grid.push(read_u64(inp)? as usize);
        }
        let mut halfwidth = Vec::with_capacity(total_axes);
        for _ in 0..total_axes {
            halfwidth.push(read_f64(inp)?);
        }
        let mut tag = [0u8; 1];
        inp.read_exact(&mut tag).map_err(Error::Io)?;
        let domain = match tag[0] {
            0 => Domain::Physical,
            1 => Domain::Frequency,
            other => {
                return Err(Error::Serialization(format!(
                    "unknown domain tag byte {other}"
                )))
            }
        };
        let rho = read_f64(inp)?;
        let layout = ProductLayout::new(dims, rho, grid, halfwidth)
            .map_err(|e| Error::Serialization(format!("header rejected: {e}")))?;
        let total = layout.total_points();
        let mut data = Vec::with_capacity(total);
        for _ in 0..total {
            let re = read_f64(inp)?;
            let im = read_f64(inp)?;
            data.push(Complex64::new(re, im));
        }
        let samples = ArrayD::from_shape_vec(IxDyn(layout.grid_points()), data)
            .map_err(|e| Error::Serialization(e.to_string()))?;
        Ok(Field {
            layout,
            domain,
            samples,
        })
    }
}

fn write_u64<W: Write>(out: &mut W, v: u64) -> Result<()> {
    out.write_all(&v.to_le_bytes()).map_err(Error::Io)
}

fn write_f64<W: Write>(out: &mut W, v: f64) -> Result<()> {
    out.write_all(&v.to_le_bytes()).map_err(Error::Io)
}

fn read_u64<R: Read>(inp: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    inp.read_exact(&mut buf).map_err(Error::Io)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(inp: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    inp.read_exact(&mut buf).map_err(Error::Io)?;
    Ok(f64::from_le_bytes(buf))
}

/// Shared FFT plans keyed by (length, direction); rustfft plans are
/// internally thread-safe, the map just guards its own bookkeeping.
fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("fft plan cache poisoned");
    map.entry((len, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(len)
            } else {
                planner.plan_fft_forward(len)
            }
        })
        .clone()
}

/// Separable transform pass. The centered grid and signed frequencies fold
/// into a plain FFT plus a (-1)^k phase: analysis multiplies the k-th output
/// by (-1)^k / sqrt(G); synthesis multiplies the k-th input by (-1)^k and
/// scales the output by 1/sqrt(G).
fn transform(mut data: ArrayD<Complex64>, grid: &[usize], inverse: bool) -> ArrayD<Complex64> {
    for (axis, &g) in grid.iter().enumerate() {
        if g == 1 {
            continue;
        }
        let fft = plan(g, inverse);
        let scale = 1.0 / (g as f64).sqrt();
        let mut scratch = vec![Complex64::default(); g];
        for mut lane in data.lanes_mut(Axis(axis)) {
            if inverse {
                for (k, s) in scratch.iter_mut().enumerate() {
                    let v = lane[k];
                    *s = if k % 2 == 0 { v } else { -v };
                }
                fft.process(&mut scratch);
                for (k, s) in scratch.iter().enumerate() {
                    lane[k] = *s * scale;
                }
            } else {
                for (k, s) in scratch.iter_mut().enumerate() {
                    *s = lane[k];
                }
                fft.process(&mut scratch);
                for (k, s) in scratch.iter().enumerate() {
                    lane[k] = if k % 2 == 0 { *s * scale } else { -*s * scale };
                }
            }
        }
    }
    data
}

/// Analysis transform: physical samples to frequency coefficients,
/// convention f_hat(xi) = G^{-1/2} sum_x f(x) e^{-2 pi i x.xi}.
pub fn forward_dft(f: &Field) -> Result<Field> {
    f.expect_domain(Domain::Physical)?;
    let samples = transform(f.samples.clone(), f.layout.grid_points(), false);
    Ok(Field {
        layout: f.layout.clone(),
        domain: Domain::Frequency,
        samples,
    })
}

/// Synthesis transform: frequency coefficients to physical samples,
/// convention f(x) = G^{-1/2} sum_xi f_hat(xi) e^{+2 pi i x.xi}.
pub fn inverse_dft(f: &Field) -> Result<Field> {
    f.expect_domain(Domain::Frequency)?;
    let samples = transform(f.samples.clone(), f.layout.grid_points(), true);
    Ok(Field {
        layout: f.layout.clone(),
        domain: Domain::Physical,
        samples,
    })
}
