//! Symbol families, finite-difference differentiation, and the membership
//! checkers for the mixed-homogeneity class and the Marcinkiewicz condition.

use std::sync::Arc;

use ndarray::ArrayD;
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cutoffs::{CutoffProfile, NormalizedBump};
use crate::dyadic::{self, DyadicTuple};
use crate::error::{Error, Result};
use crate::fitting::{growth_verdict, GrowthTolerances, Verdict};
use crate::layout::ProductLayout;
use crate::random::rng_for;
use rand::Rng;

pub const DEFAULT_FD_STEP: f64 = 1e-3;
pub const DEFAULT_ORDER_CAP: usize = 4;

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------------------
// Symbol families

/// Built-in symbol families. Frequency arguments are always full-grid points;
/// per-factor structure comes from the layout the spec is bound to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SymbolFamily {
    /// sigma = 1.
    Constant,
    /// sigma(x, xi) = g(x), a smooth bump supported in |x| < radius.
    SmoothXMultiplier { radius: f64 },
    /// (1 + |xi|^2)^{i tau}, the isotropic imaginary-order multiplier.
    ClassicalImaginaryOrder { tau: f64 },
    /// prod_i (1 + |xi^i|^2 + |xi|^{2 rho})^{i tau_i}, one tau per factor.
    ProductImaginaryOrder { taus: Vec<f64> },
    /// Smooth x-bump times the product imaginary-order multiplier.
    ModulatedProduct { taus: Vec<f64>, radius: f64 },
    /// (1 - phi(xi)) e^{i pi |xi|^{1/2}} |xi|^{gamma/2 - 3/4}, vanishing on
    /// the unit ball; gamma = 3/2 gives modulus 1 outside |xi| = 2.
    RiemannSingularity { gamma: f64 },
}

impl SymbolFamily {
    pub fn name(&self) -> &'static str {
        match self {
            SymbolFamily::Constant => "constant",
            SymbolFamily::SmoothXMultiplier { .. } => "smooth_x_multiplier",
            SymbolFamily::ClassicalImaginaryOrder { .. } => "classical_imaginary_order",
            SymbolFamily::ProductImaginaryOrder { .. } => "product_imaginary_order",
            SymbolFamily::ModulatedProduct { .. } => "modulated_product",
            SymbolFamily::RiemannSingularity { .. } => "riemann_singularity",
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolSpec {
    #[serde(flatten)]
    pub family: SymbolFamily,
    /// When set, closed-form derivative oracles are used where they exist
    /// (order zero, vanishing cross-derivatives, classical first order).
    #[serde(default = "default_true")]
    pub analytic_derivatives: bool,
}

impl SymbolSpec {
    pub fn new(family: SymbolFamily) -> Self {
        SymbolSpec {
            family,
            analytic_derivatives: true,
        }
    }

    /// True when sigma(x, xi) does not depend on x (a Fourier multiplier).
    pub fn is_x_independent(&self) -> bool {
        matches!(
            self.family,
            SymbolFamily::Constant
                | SymbolFamily::ClassicalImaginaryOrder { .. }
                | SymbolFamily::ProductImaginaryOrder { .. }
                | SymbolFamily::RiemannSingularity { .. }
        )
    }

    /// True when sigma(x, xi) does not depend on xi.
    pub fn is_xi_independent(&self) -> bool {
        matches!(
            self.family,
            SymbolFamily::Constant | SymbolFamily::SmoothXMultiplier { .. }
        )
    }

    pub fn validate(&self, layout: &ProductLayout) -> Result<()> {
        let check_radius = |radius: f64| -> Result<()> {
            if radius > 0.0 && radius.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "bump radius must be positive and finite, got {radius}"
                )))
            }
        };
        let check_taus = |taus: &[f64]| -> Result<()> {
            if taus.len() != layout.n() {
                return Err(Error::InvalidParameter(format!(
                    "product family needs one tau per factor: got {} for n = {}",
                    taus.len(),
                    layout.n()
                )));
            }
            if taus.iter().any(|t| !t.is_finite()) {
                return Err(Error::InvalidParameter("non-finite tau".into()));
            }
            Ok(())
        };
        match &self.family {
            SymbolFamily::Constant => Ok(()),
            SymbolFamily::SmoothXMultiplier { radius } => check_radius(*radius),
            SymbolFamily::ClassicalImaginaryOrder { tau } => {
                if tau.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter("non-finite tau".into()))
                }
            }
            SymbolFamily::ProductImaginaryOrder { taus } => check_taus(taus),
            SymbolFamily::ModulatedProduct { taus, radius } => {
                check_taus(taus)?;
                check_radius(*radius)
            }
            SymbolFamily::RiemannSingularity { gamma } => {
                if gamma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter("non-finite gamma".into()))
                }
            }
        }
    }

    pub fn bind(self, layout: &Arc<ProductLayout>) -> Result<BoundSymbol> {
        self.validate(layout)?;
        let bump = match &self.family {
            SymbolFamily::SmoothXMultiplier { radius }
            | SymbolFamily::ModulatedProduct { radius, .. } => {
                Some(NormalizedBump::new(*radius)?)
            }
            _ => None,
        };
        Ok(BoundSymbol {
            spec: self,
            layout: layout.clone(),
            bump,
        })
    }
}

/// Anything that can be evaluated as a symbol sigma(x, xi). Implemented by
/// the built-in families, by closures via `FnSymbol` for test oracles, and
/// used generically by the membership checkers and operator constructors.
pub trait SymbolLike {
    fn value(&self, x: &[f64], xi: &[f64]) -> Complex64;

    /// Closed-form derivative when one is available; `None` falls back to
    /// finite differences. alpha and beta are per-axis orders.
    fn analytic_derivative(
        &self,
        _x: &[f64],
        _xi: &[f64],
        _alpha: &[usize],
        _beta: &[usize],
    ) -> Option<Complex64> {
        None
    }
}

/// Closure adapter: FnSymbol(|x, xi| ...) is a SymbolLike.
pub struct FnSymbol<F>(pub F);

impl<F: Fn(&[f64], &[f64]) -> Complex64> SymbolLike for FnSymbol<F> {
    fn value(&self, x: &[f64], xi: &[f64]) -> Complex64 {
        (self.0)(x, xi)
    }
}

/// A symbol spec bound to a layout (the product structure and rho needed to
/// evaluate the family formulas).
#[derive(Debug, Clone)]
pub struct BoundSymbol {
    spec: SymbolSpec,
    layout: Arc<ProductLayout>,
    bump: Option<NormalizedBump>,
}

impl BoundSymbol {
    pub fn spec(&self) -> &SymbolSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Arc<ProductLayout> {
        &self.layout
    }

    fn product_value(&self, taus: &[f64], xi: &[f64]) -> Complex64 {
        let rho = self.layout.rho();
        let total_sq: f64 = xi.iter().map(|c| c * c).sum();
        // |xi|^{2 rho}; powf gives 0^0 = 1, matching the rho = 0 convention.
        let rho_term = total_sq.powf(rho);
        let mut phase = 0.0;
        for (i, tau) in taus.iter().enumerate() {
            let fac_sq: f64 = self
                .layout
                .axes_of_factor(i)
                .map(|a| xi[a] * xi[a])
                .sum();
            phase += tau * (1.0 + fac_sq + rho_term).ln();
        }
        Complex64::from_polar(1.0, phase)
    }
}

impl SymbolLike for BoundSymbol {
    fn value(&self, x: &[f64], xi: &[f64]) -> Complex64 {
        match &self.spec.family {
            SymbolFamily::Constant => Complex64::new(1.0, 0.0),
            SymbolFamily::SmoothXMultiplier { .. } => {
                Complex64::new(self.bump.unwrap().eval(x), 0.0)
            }
            SymbolFamily::ClassicalImaginaryOrder { tau } => {
                let base = 1.0 + xi.iter().map(|c| c * c).sum::<f64>();
                Complex64::from_polar(1.0, tau * base.ln())
            }
            SymbolFamily::ProductImaginaryOrder { taus } => self.product_value(taus, xi),
            SymbolFamily::ModulatedProduct { taus, .. } => {
                self.product_value(taus, xi) * self.bump.unwrap().eval(x)
            }
            SymbolFamily::RiemannSingularity { gamma } => {
                let r = euclid(xi);
                let cut = 1.0 - CutoffProfile::standard().profile(r);
                if cut == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                let mag = cut * r.powf(gamma / 2.0 - 0.75);
                Complex64::from_polar(mag, std::f64::consts::PI * r.sqrt())
            }
        }
    }

    fn analytic_derivative(
        &self,
        x: &[f64],
        xi: &[f64],
        alpha: &[usize],
        beta: &[usize],
    ) -> Option<Complex64> {
        if !self.spec.analytic_derivatives {
            return None;
        }
        let na: usize = alpha.iter().sum();
        let nb: usize = beta.iter().sum();
        if na == 0 && nb == 0 {
            return Some(self.value(x, xi));
        }
        let zero = Complex64::new(0.0, 0.0);
        if self.spec.is_x_independent() && nb >= 1 {
            return Some(zero);
        }
        if self.spec.is_xi_independent() && na >= 1 {
            return Some(zero);
        }
        match &self.spec.family {
            SymbolFamily::Constant => Some(zero),
            SymbolFamily::ClassicalImaginaryOrder { tau } if nb == 0 && na == 1 => {
                let a = alpha.iter().position(|&k| k == 1).unwrap();
                let base = 1.0 + xi.iter().map(|c| c * c).sum::<f64>();
                let unit = Complex64::from_polar(1.0, tau * base.ln());
                Some(Complex64::new(0.0, 1.0) * *tau * 2.0 * xi[a] / base * unit)
            }
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Finite differences

fn binomial(n: usize, k: usize) -> f64 {
    let mut out = 1.0;
    for j in 0..k {
        out = out * (n - j) as f64 / (j + 1) as f64;
    }
    out
}

/// Central finite difference of order alpha (in xi) and beta (in x) with the
/// given per-axis steps: each axis of order k uses the (k+1)-point stencil
/// with offsets (k/2 - j) h and coefficients (-1)^j C(k, j), second-order
/// accurate and exact on polynomials of per-axis degree <= k + 1.
pub fn fd_mixed<F>(
    f: &F,
    x: &[f64],
    xi: &[f64],
    alpha: &[usize],
    beta: &[usize],
    xi_steps: &[f64],
    x_steps: &[f64],
) -> Complex64
where
    F: Fn(&[f64], &[f64]) -> Complex64 + ?Sized,
{
    struct Leg {
        in_x: bool,
        axis: usize,
        order: usize,
        step: f64,
    }
    let mut legs: Vec<Leg> = Vec::new();
    for (a, &k) in alpha.iter().enumerate() {
        if k > 0 {
            legs.push(Leg {
                in_x: false,
                axis: a,
                order: k,
                step: xi_steps[a],
            });
        }
    }
    for (a, &k) in beta.iter().enumerate() {
        if k > 0 {
            legs.push(Leg {
                in_x: true,
                axis: a,
                order: k,
                step: x_steps[a],
            });
        }
    }
    if legs.is_empty() {
        return f(x, xi);
    }
    let shape: Vec<usize> = legs.iter().map(|l| l.order + 1).collect();
    let scale: f64 = legs.iter().map(|l| l.step.powi(l.order as i32)).product();
    let mut node = vec![0usize; legs.len()];
    let mut xbuf = x.to_vec();
    let mut xibuf = xi.to_vec();
    let mut acc = Complex64::new(0.0, 0.0);
    loop {
        let mut coeff = 1.0f64;
        xbuf.copy_from_slice(x);
        xibuf.copy_from_slice(xi);
        for (m, leg) in legs.iter().enumerate() {
            let j = node[m];
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            coeff *= sign * binomial(leg.order, j);
            let offset = (leg.order as f64 / 2.0 - j as f64) * leg.step;
            if leg.in_x {
                xbuf[leg.axis] += offset;
            } else {
                xibuf[leg.axis] += offset;
            }
        }
        acc += coeff * f(&xbuf, &xibuf);
        if !dyadic::advance_index(&mut node, &shape) {
            break;
        }
    }
    acc / scale
}

#[derive(Debug, Clone, Copy)]
pub struct FdConfig {
    pub base_step: f64,
    pub order_cap: usize,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            base_step: DEFAULT_FD_STEP,
            order_cap: DEFAULT_ORDER_CAP,
        }
    }
}

/// Step for differentiating along a frequency axis: proportional to the
/// factor weight 1 + |xi^i| + |xi|^rho, so relative truncation error stays
/// uniform across the frequency range.
pub fn class_xi_step(layout: &ProductLayout, rho: f64, xi: &[f64], axis: usize, h0: f64) -> f64 {
    let i = layout.factor_of_axis(axis);
    let total = euclid(xi);
    h0 * (1.0 + layout.factor_norm(i, xi) + total.powf(rho))
}

/// Step for differentiating along a physical axis: (1 + |xi|)^{-rho} h0,
/// shrinking where x-derivatives are allowed to grow.
pub fn class_x_step(rho: f64, xi: &[f64], h0: f64) -> f64 {
    h0 * (1.0 + euclid(xi)).powf(-rho)
}

fn check_step(anchor: f64, step: f64) -> Result<()> {
    let base = anchor.abs().max(1.0);
    if base + step == base {
        return Err(Error::StepUnderflow(step));
    }
    Ok(())
}

/// Mixed partial derivative of a symbol, using a closed-form oracle when the
/// symbol provides one and weight-scaled central differences otherwise.
pub fn fd_derivative<S: SymbolLike + ?Sized>(
    sym: &S,
    layout: &ProductLayout,
    rho: f64,
    x: &[f64],
    xi: &[f64],
    alpha: &[usize],
    beta: &[usize],
    cfg: &FdConfig,
) -> Result<Complex64> {
    let axes = layout.total_axes();
    if alpha.len() != axes || beta.len() != axes || x.len() != axes || xi.len() != axes {
        return Err(Error::InvalidParameter(format!(
            "expected {axes} axes in x, xi, alpha, beta"
        )));
    }
    let total: usize = alpha.iter().chain(beta.iter()).sum();
    if total > cfg.order_cap {
        return Err(Error::InvalidParameter(format!(
            "derivative order {total} exceeds cap {}",
            cfg.order_cap
        )));
    }
    if let Some(v) = sym.analytic_derivative(x, xi, alpha, beta) {
        return Ok(v);
    }
    let mut xi_steps = vec![0.0; axes];
    let mut x_steps = vec![0.0; axes];
    for a in 0..axes {
        if alpha[a] > 0 {
            xi_steps[a] = class_xi_step(layout, rho, xi, a, cfg.base_step);
            check_step(xi[a], xi_steps[a])?;
        }
        if beta[a] > 0 {
            x_steps[a] = class_x_step(rho, xi, cfg.base_step);
            check_step(x[a], x_steps[a])?;
        }
    }
    Ok(fd_mixed(
        &|xx: &[f64], xxi: &[f64]| sym.value(xx, xxi),
        x,
        xi,
        alpha,
        beta,
        &xi_steps,
        &x_steps,
    ))
}

/// The class bound at order (alpha, beta):
/// prod_i (1 + |xi^i| + |xi|^rho)^{-|alpha^i|} (1 + |xi|)^{m + rho |beta|}.
pub fn class_weight(
    layout: &ProductLayout,
    rho: f64,
    m: f64,
    xi: &[f64],
    alpha: &[usize],
    beta_total: usize,
) -> f64 {
    let total = euclid(xi);
    let mut w = (1.0 + total).powf(m + rho * beta_total as f64);
    let rho_term = total.powf(rho);
    for i in 0..layout.n() {
        let oi: usize = layout.axes_of_factor(i).map(|a| alpha[a]).sum();
        if oi > 0 {
            let fac = layout.factor_norm(i, xi);
            w *= (1.0 + fac + rho_term).powi(-(oi as i32));
        }
    }
    w
}

// ---------------------------------------------------------------------------
// Membership checking

/// Multi-index pair of a seminorm: alpha grouped per factor, beta per axis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiIndexPair {
    pub alpha: Vec<Vec<usize>>,
    pub beta: Vec<usize>,
}

impl MultiIndexPair {
    pub fn from_flat(layout: &ProductLayout, alpha_flat: &[usize], beta: &[usize]) -> Self {
        let alpha = (0..layout.n())
            .map(|i| layout.axes_of_factor(i).map(|a| alpha_flat[a]).collect())
            .collect();
        MultiIndexPair {
            alpha,
            beta: beta.to_vec(),
        }
    }

    pub fn alpha_flat(&self) -> Vec<usize> {
        self.alpha.iter().flatten().copied().collect()
    }

    pub fn alpha_order(&self) -> usize {
        self.alpha.iter().flatten().sum()
    }

    pub fn beta_order(&self) -> usize {
        self.beta.iter().sum()
    }
}

/// One seminorm estimate: the sup over samples of |derivative| / weight,
/// where it was attained, and the per-box running sups behind the verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeminormReport {
    pub multi_index: MultiIndexPair,
    pub sample_count: usize,
    pub sup_ratio: f64,
    pub argmax_x: Vec<f64>,
    pub argmax_xi: Vec<f64>,
    pub box_sequence: Vec<f64>,
    pub verdict: Verdict,
}

/// Nested-box sampling: box b draws `samples_per_box` points with log-uniform
/// radius in [r_min 2^{b-1}, r_min 2^b] and x uniform over the layout box,
/// each sample seeded independently from (seed, box, sample).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub r_min: f64,
    pub boxes: usize,
    pub samples_per_box: usize,
    pub seed: u64,
    pub min_samples: usize,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default)]
    pub growth: GrowthTolerances,
}

fn default_fd_step() -> f64 {
    DEFAULT_FD_STEP
}

impl SamplingPlan {
    /// Boxes doubling from r_min = 1 up to the smallest per-axis Nyquist
    /// frequency of the layout.
    pub fn for_layout(layout: &ProductLayout, samples_per_box: usize, seed: u64) -> Self {
        let r_max = (0..layout.total_axes())
            .map(|a| layout.nyquist(a))
            .fold(f64::INFINITY, f64::min);
        let boxes = (r_max.log2().floor() as i64 + 1).max(1) as usize;
        SamplingPlan {
            r_min: 1.0,
            boxes,
            samples_per_box,
            seed,
            min_samples: 8,
            fd_step: DEFAULT_FD_STEP,
            growth: GrowthTolerances::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_min.is_finite()) || self.boxes == 0 {
            return Err(Error::InvalidParameter(
                "sampling plan needs r_min > 0 and at least one box".into(),
            ));
        }
        if self.samples_per_box == 0 {
            return Err(Error::InvalidParameter(
                "sampling plan needs samples_per_box >= 1".into(),
            ));
        }
        Ok(())
    }
}

fn unit_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let mut v = Vec::with_capacity(dim + 1);
        while v.len() < dim {
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let r = (-2.0 * u1.ln()).sqrt();
            v.push(r * u2.cos());
            v.push(r * u2.sin());
        }
        v.truncate(dim);
        let n = euclid(&v);
        if n > 1e-9 {
            for c in &mut v {
                *c /= n;
            }
            return v;
        }
    }
}

fn sample_point(
    rng: &mut ChaCha8Rng,
    layout: &ProductLayout,
    r_lo: f64,
    r_hi: f64,
) -> (Vec<f64>, Vec<f64>) {
    let axes = layout.total_axes();
    let u: f64 = rng.gen_range(0.0..1.0);
    let radius = r_lo * (r_hi / r_lo).powf(u);
    let mut xi = unit_direction(rng, axes);
    for c in &mut xi {
        *c *= radius;
    }
    let x: Vec<f64> = (0..axes)
        .map(|a| {
            let l = layout.box_halfwidths()[layout.factor_of_axis(a)];
            rng.gen_range(-l..l)
        })
        .collect();
    (x, xi)
}

/// All multi-indices over `slots` axes with total order <= cap, in
/// lexicographic order.
pub(crate) fn multi_indices_up_to(slots: usize, cap: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; slots];
    fn rec(pos: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[pos] = v;
            rec(pos + 1, left - v, cur, out);
        }
        cur[pos] = 0;
    }
    rec(0, cap, &mut cur, &mut out);
    out
}

struct SupState {
    sup: f64,
    argmax_x: Vec<f64>,
    argmax_xi: Vec<f64>,
    seq: Vec<f64>,
}

impl SupState {
    fn new(axes: usize) -> Self {
        SupState {
            sup: 0.0,
            argmax_x: vec![0.0; axes],
            argmax_xi: vec![0.0; axes],
            seq: Vec::new(),
        }
    }

    fn observe(&mut self, ratio: f64, x: &[f64], xi: &[f64]) {
        if ratio > self.sup {
            self.sup = ratio;
            self.argmax_x.copy_from_slice(x);
            self.argmax_xi.copy_from_slice(xi);
        }
    }
}

fn finish_reports(
    layout: &ProductLayout,
    pairs: Vec<(Vec<usize>, Vec<usize>)>,
    states: Vec<SupState>,
    sample_count: usize,
    min_samples: usize,
    growth: &GrowthTolerances,
) -> Vec<SeminormReport> {
    pairs
        .into_iter()
        .zip(states)
        .map(|((alpha, beta), st)| SeminormReport {
            multi_index: MultiIndexPair::from_flat(layout, &alpha, &beta),
            sample_count,
            sup_ratio: st.sup,
            argmax_x: st.argmax_x,
            argmax_xi: st.argmax_xi,
            verdict: growth_verdict(&st.seq, sample_count, min_samples, growth),
            box_sequence: st.seq,
        })
        .collect()
}

/// Estimates every seminorm A_{alpha, beta} with |alpha| + |beta| <=
/// order_cap by sampled sup of |d^alpha_xi d^beta_x sigma| / weight, and
/// diagnoses each via the per-box running-sup sequence: PASS when it
/// stabilizes, FAIL when it keeps growing through doublings.
pub fn class_membership_check<S: SymbolLike + ?Sized>(
    sym: &S,
    layout: &ProductLayout,
    m: f64,
    rho: f64,
    order_cap: usize,
    plan: &SamplingPlan,
) -> Result<Vec<SeminormReport>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!(
            "class parameter rho must lie in [0, 1), got {rho}"
        )));
    }
    plan.validate()?;
    let axes = layout.total_axes();
    let cfg = FdConfig {
        base_step: plan.fd_step,
        order_cap,
    };
    let mut pairs: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    for alpha in multi_indices_up_to(axes, order_cap) {
        let na: usize = alpha.iter().sum();
        for beta in multi_indices_up_to(axes, order_cap - na) {
            pairs.push((alpha.clone(), beta));
        }
    }
    pairs.sort_by(|a, b| {
        let ta: usize = a.0.iter().chain(a.1.iter()).sum();
        let tb: usize = b.0.iter().chain(b.1.iter()).sum();
        (ta, &a.0, &a.1).cmp(&(tb, &b.0, &b.1))
    });
    let mut states: Vec<SupState> = pairs.iter().map(|_| SupState::new(axes)).collect();
    let mut sample_count = 0usize;
    for b in 0..plan.boxes {
        let r_hi = plan.r_min * (2.0f64).powi(b as i32);
        let r_lo = r_hi / 2.0;
        for s in 0..plan.samples_per_box {
            let mut rng = rng_for(plan.seed, b as u64, s as u64);
            let (x, xi) = sample_point(&mut rng, layout, r_lo, r_hi);
            sample_count += 1;
            for (p, (alpha, beta)) in pairs.iter().enumerate() {
                let d = fd_derivative(sym, layout, rho, &x, &xi, alpha, beta, &cfg)?;
                let bt: usize = beta.iter().sum();
                let ratio = d.norm() / class_weight(layout, rho, m, &xi, alpha, bt);
                states[p].observe(ratio, &x, &xi);
            }
        }
        for st in &mut states {
            st.seq.push(st.sup);
        }
    }
    Ok(finish_reports(
        layout,
        pairs,
        states,
        sample_count,
        plan.min_samples,
        &plan.growth,
    ))
}

/// Marcinkiewicz condition: sup over samples of
/// |prod_j xi_j^{alpha_j} d^alpha_xi sigma| per alpha with |alpha| <=
/// order_cap, uniform over sampled x. The operator (xi d/dxi)^alpha is read
/// componentwise.
pub fn marcinkiewicz_check<S: SymbolLike + ?Sized>(
    sym: &S,
    layout: &ProductLayout,
    order_cap: usize,
    plan: &SamplingPlan,
) -> Result<Vec<SeminormReport>> {
    plan.validate()?;
    let axes = layout.total_axes();
    let beta0 = vec![0usize; axes];
    let mut alphas = multi_indices_up_to(axes, order_cap);
    alphas.sort_by(|a, b| {
        let ta: usize = a.iter().sum();
        let tb: usize = b.iter().sum();
        (ta, a).cmp(&(tb, b))
    });
    let mut states: Vec<SupState> = alphas.iter().map(|_| SupState::new(axes)).collect();
    let mut sample_count = 0usize;
    for b in 0..plan.boxes {
        let r_hi = plan.r_min * (2.0f64).powi(b as i32);
        let r_lo = r_hi / 2.0;
        for s in 0..plan.samples_per_box {
            let mut rng = rng_for(plan.seed, b as u64, s as u64);
            let (x, xi) = sample_point(&mut rng, layout, r_lo, r_hi);
            sample_count += 1;
            // Dyadic steps 1 + |xi_j| match the scale-invariant derivative.
            let steps: Vec<f64> = xi.iter().map(|&c| plan.fd_step * (1.0 + c.abs())).collect();
            for (p, alpha) in alphas.iter().enumerate() {
                let d = match sym.analytic_derivative(&x, &xi, alpha, &beta0) {
                    Some(v) => v,
                    None => fd_mixed(
                        &|xx: &[f64], xxi: &[f64]| sym.value(xx, xxi),
                        &x,
                        &xi,
                        alpha,
                        &beta0,
                        &steps,
                        &steps,
                    ),
                };
                let monomial: f64 = xi
                    .iter()
                    .zip(alpha)
                    .map(|(&c, &k)| c.abs().powi(k as i32))
                    .product();
                states[p].observe(monomial * d.norm(), &x, &xi);
            }
        }
        for st in &mut states {
            st.seq.push(st.sup);
        }
    }
    let pairs: Vec<(Vec<usize>, Vec<usize>)> =
        alphas.into_iter().map(|a| (a, beta0.clone())).collect();
    Ok(finish_reports(
        layout,
        pairs,
        states,
        sample_count,
        plan.min_samples,
        &plan.growth,
    ))
}

/// Realized ratio of the factor weights 1 + |xi^i| + |xi|^rho to 2^{t_i}
/// over the grid support of the dyadic piece delta_t: returns per-factor
/// (min, max). The comparability constants behind the derivative-gain bound.
pub fn weight_consistency(
    layout: &Arc<ProductLayout>,
    t: &DyadicTuple,
) -> Result<Vec<(f64, f64)>> {
    if t.len() != layout.n() {
        return Err(Error::InvalidParameter(format!(
            "tuple arity {} does not match n = {}",
            t.len(),
            layout.n()
        )));
    }
    if !dyadic::satisfies_h(layout.q(), t) {
        return Err(Error::InvalidParameter(format!(
            "tuple {t} does not satisfy the scale hypothesis"
        )));
    }
    let n = layout.n();
    let rho = layout.rho();
    let mut ranges = vec![(f64::INFINITY, 0.0f64); n];
    let shape: Vec<usize> = layout.grid_points().to_vec();
    let mut idx = vec![0usize; layout.total_axes()];
    let mut xi = vec![0.0; layout.total_axes()];
    let mut hits = 0usize;
    loop {
        layout.frequency_point(&idx, &mut xi);
        if dyadic::delta_value(layout, t, &xi) > dyadic::SUPPORT_THRESHOLD {
            hits += 1;
            let total = euclid(&xi);
            let rho_term = total.powf(rho);
            for i in 0..n {
                let w = 1.0 + layout.factor_norm(i, &xi) + rho_term;
                let ratio = w / (2.0f64).powi(t.get(i) as i32);
                ranges[i].0 = ranges[i].0.min(ratio);
                ranges[i].1 = ranges[i].1.max(ratio);
            }
        }
        if !dyadic::advance_index(&mut idx, &shape) {
            break;
        }
    }
    if hits == 0 {
        return Err(Error::InsufficientData(format!(
            "delta piece {t} has empty grid support"
        )));
    }
    Ok(ranges)
}

// ---------------------------------------------------------------------------
// Tabulated symbols

/// A symbol known only through full frequency-grid tables at a few base
/// physical points, as produced by operator composition probing. Variant 0
/// is the table at the base point; when x-offsets are present, variants
/// 2b + 1 and 2b + 2 hold tables at x +- x_step e_b for each axis b, enabling
/// first-order x-derivatives.
pub struct TabulatedSymbol {
    layout: Arc<ProductLayout>,
    base_x: Vec<Vec<f64>>,
    x_step: f64,
    tables: Vec<Vec<ArrayD<Complex64>>>,
}

impl TabulatedSymbol {
    pub fn new(
        layout: Arc<ProductLayout>,
        base_x: Vec<Vec<f64>>,
        x_step: f64,
        tables: Vec<Vec<ArrayD<Complex64>>>,
    ) -> Result<Self> {
        if !(x_step > 0.0 && x_step.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "x_step must be positive, got {x_step}"
            )));
        }
        if base_x.len() != tables.len() || base_x.is_empty() {
            return Err(Error::InvalidParameter(
                "need one table set per base point, at least one".into(),
            ));
        }
        let axes = layout.total_axes();
        let variants_full = 1 + 2 * axes;
        for (p, (bx, tabs)) in base_x.iter().zip(&tables).enumerate() {
            if bx.len() != axes {
                return Err(Error::InvalidParameter(format!(
                    "base point {p} has {} coordinates, expected {axes}",
                    bx.len()
                )));
            }
            if tabs.len() != 1 && tabs.len() != variants_full {
                return Err(Error::InvalidParameter(format!(
                    "base point {p} has {} tables, expected 1 or {variants_full}",
                    tabs.len()
                )));
            }
            for t in tabs {
                if t.shape() != layout.grid_points() {
                    return Err(Error::LayoutMismatch(
                        "table shape does not match the frequency grid".into(),
                    ));
                }
            }
        }
        Ok(TabulatedSymbol {
            layout,
            base_x,
            x_step,
            tables,
        })
    }

    /// Tabulates a symbol by direct evaluation (used to validate the checker
    /// against symbols with known membership).
    pub fn from_symbol<S: SymbolLike + ?Sized>(
        sym: &S,
        layout: &Arc<ProductLayout>,
        base_x: Vec<Vec<f64>>,
        x_step: f64,
        with_x_offsets: bool,
    ) -> Result<Self> {
        let axes = layout.total_axes();
        let shape: Vec<usize> = layout.grid_points().to_vec();
        let mut tables = Vec::with_capacity(base_x.len());
        for bx in &base_x {
            let mut variants: Vec<Vec<f64>> = vec![bx.clone()];
            if with_x_offsets {
                for b in 0..axes {
                    for sign in [1.0, -1.0] {
                        let mut v = bx.clone();
                        v[b] += sign * x_step;
                        variants.push(v);
                    }
                }
            }
            let mut tabs = Vec::with_capacity(variants.len());
            for v in &variants {
                let mut arr = ArrayD::zeros(shape.clone());
                let mut idx = vec![0usize; axes];
                let mut xi = vec![0.0; axes];
                loop {
                    layout.frequency_point(&idx, &mut xi);
                    arr[idx.as_slice()] = sym.value(v, &xi);
                    if !dyadic::advance_index(&mut idx, &shape) {
                        break;
                    }
                }
                tabs.push(arr);
            }
            tables.push(tabs);
        }
        TabulatedSymbol::new(layout.clone(), base_x, x_step, tables)
    }

    pub fn layout(&self) -> &Arc<ProductLayout> {
        &self.layout
    }

    pub fn base_x(&self) -> &[Vec<f64>] {
        &self.base_x
    }

    pub fn x_step(&self) -> f64 {
        self.x_step
    }

    pub fn has_x_offsets(&self) -> bool {
        self.tables[0].len() > 1
    }

    pub fn table(&self, point: usize, variant: usize) -> &ArrayD<Complex64> {
        &self.tables[point][variant]
    }
}

/// Integer-offset central stencil of the given order, O(h^2).
fn grid_stencil(k: usize) -> &'static [(isize, f64)] {
    match k {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        4 => &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
        _ => unreachable!("grid stencil order capped at 4"),
    }
}

fn stencil_margin(k: usize) -> usize {
    match k {
        0 => 0,
        1 | 2 => 1,
        _ => 2,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableCheckPlan {
    pub r_min: f64,
    pub min_samples: usize,
    #[serde(default)]
    pub growth: GrowthTolerances,
}

impl Default for TableCheckPlan {
    fn default() -> Self {
        TableCheckPlan {
            r_min: 1.0,
            min_samples: 8,
            growth: GrowthTolerances::default(),
        }
    }
}

/// Membership check over a tabulated symbol: frequency derivatives by
/// grid-step central differences along each axis in sorted-frequency order
/// (points whose stencil would cross the Nyquist wrap are skipped), x-based
/// derivatives of first order from the offset tables when present.
pub fn table_membership_check(
    tab: &TabulatedSymbol,
    m: f64,
    rho: f64,
    order_cap: usize,
    plan: &TableCheckPlan,
) -> Result<Vec<SeminormReport>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!(
            "class parameter rho must lie in [0, 1), got {rho}"
        )));
    }
    if order_cap > 4 {
        return Err(Error::InvalidParameter(
            "tabulated check caps derivative order at 4".into(),
        ));
    }
    let layout = tab.layout().clone();
    let axes = layout.total_axes();
    let shape: Vec<usize> = layout.grid_points().to_vec();

    // Per-axis sorted-frequency order and values.
    let mut order: Vec<Vec<usize>> = Vec::with_capacity(axes);
    let mut vals: Vec<Vec<f64>> = Vec::with_capacity(axes);
    for a in 0..axes {
        let fv = layout.frequency_axis_values(a);
        let mut perm: Vec<usize> = (0..fv.len()).collect();
        perm.sort_by(|&p, &q| fv[p].partial_cmp(&fv[q]).unwrap());
        vals.push(perm.iter().map(|&p| fv[p]).collect());
        order.push(perm);
    }

    // Pairs: frequency orders up to the cap, x-order zero or a single axis.
    let mut pairs: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    for alpha in multi_indices_up_to(axes, order_cap) {
        let na: usize = alpha.iter().sum();
        pairs.push((alpha.clone(), vec![0; axes]));
        if tab.has_x_offsets() && na + 1 <= order_cap {
            for b in 0..axes {
                let mut beta = vec![0; axes];
                beta[b] = 1;
                pairs.push((alpha.clone(), beta));
            }
        }
    }
    pairs.sort_by(|a, b| {
        let ta: usize = a.0.iter().chain(a.1.iter()).sum();
        let tb: usize = b.0.iter().chain(b.1.iter()).sum();
        (ta, &a.0, &a.1).cmp(&(tb, &b.0, &b.1))
    });

    let r_max_grid = (0..axes)
        .map(|a| layout.nyquist(a).powi(2))
        .sum::<f64>()
        .sqrt();
    let nboxes = ((r_max_grid / plan.r_min).log2().floor() as i64 + 1).max(1) as usize;

    let mut reports = Vec::with_capacity(pairs.len());
    for (alpha, beta) in &pairs {
        let beta_axis = beta.iter().position(|&k| k > 0);
        let mut st = SupState::new(axes);
        let mut shell_sup = vec![0.0f64; nboxes];
        let mut count = 0usize;
        let margins: Vec<usize> = alpha.iter().map(|&k| stencil_margin(k)).collect();
        let scale: f64 = alpha
            .iter()
            .enumerate()
            .map(|(a, &k)| layout.frequency_step(a).powi(k as i32))
            .product();
        let usable = (0..axes).all(|a| shape[a] > 2 * margins[a]);
        if usable {
            for p in 0..tab.base_x().len() {
                let fetch = |idx: &[usize]| -> Complex64 {
                    match beta_axis {
                        None => tab.table(p, 0)[idx],
                        Some(b) => {
                            (tab.table(p, 2 * b + 1)[idx] - tab.table(p, 2 * b + 2)[idx])
                                / (2.0 * tab.x_step())
                        }
                    }
                };
                // Iterate sorted positions within margins.
                let sub_shape: Vec<usize> =
                    (0..axes).map(|a| shape[a] - 2 * margins[a]).collect();
                let mut pos = vec![0usize; axes];
                let mut xi = vec![0.0; axes];
                let mut sidx = vec![0usize; axes];
                loop {
                    for a in 0..axes {
                        sidx[a] = pos[a] + margins[a];
                        xi[a] = vals[a][sidx[a]];
                    }
                    // Tensor stencil over the active axes.
                    let active: Vec<usize> =
                        (0..axes).filter(|&a| alpha[a] > 0).collect();
                    let mut acc = Complex64::new(0.0, 0.0);
                    if active.is_empty() {
                        let idx: Vec<usize> =
                            (0..axes).map(|a| order[a][sidx[a]]).collect();
                        acc = fetch(&idx);
                    } else {
                        let node_shape: Vec<usize> = active
                            .iter()
                            .map(|&a| grid_stencil(alpha[a]).len())
                            .collect();
                        let mut node = vec![0usize; active.len()];
                        loop {
                            let mut coeff = 1.0;
                            let mut idx: Vec<usize> =
                                (0..axes).map(|a| order[a][sidx[a]]).collect();
                            for (mpos, &a) in active.iter().enumerate() {
                                let (off, c) = grid_stencil(alpha[a])[node[mpos]];
                                coeff *= c;
                                let s = (sidx[a] as isize + off) as usize;
                                idx[a] = order[a][s];
                            }
                            acc += coeff * fetch(&idx);
                            if !dyadic::advance_index(&mut node, &node_shape) {
                                break;
                            }
                        }
                        acc /= scale;
                    }
                    let bt: usize = beta.iter().sum();
                    let ratio = acc.norm() / class_weight(&layout, rho, m, &xi, alpha, bt);
                    count += 1;
                    st.observe(ratio, &tab.base_x()[p], &xi);
                    let r = euclid(&xi);
                    let b = if r <= plan.r_min {
                        0
                    } else {
                        ((r / plan.r_min).log2().ceil() as usize).min(nboxes - 1)
                    };
                    shell_sup[b] = shell_sup[b].max(ratio);
                    if !dyadic::advance_index(&mut pos, &sub_shape) {
                        break;
                    }
                }
            }
        }
        let mut run = 0.0f64;
        for b in 0..nboxes {
            run = run.max(shell_sup[b]);
            st.seq.push(run);
        }
        reports.push(SeminormReport {
            multi_index: MultiIndexPair::from_flat(&layout, alpha, beta),
            sample_count: count,
            sup_ratio: st.sup,
            argmax_x: st.argmax_x,
            argmax_xi: st.argmax_xi,
            verdict: growth_verdict(&st.seq, count, plan.min_samples, &plan.growth),
            box_sequence: st.seq,
        });
    }
    Ok(reports)
}

// ---------------------------------------------------------------------------
// Catalog

#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub parameters: &'static str,
    pub x_dependent: bool,
    pub summary: &'static str,
}

pub fn catalog() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            name: "constant",
            parameters: "none",
            x_dependent: false,
            summary: "identically 1; the identity operator",
        },
        CatalogEntry {
            name: "smooth_x_multiplier",
            parameters: "radius",
            x_dependent: true,
            summary: "sigma(x, xi) = g(x), smooth bump supported in |x| < radius",
        },
        CatalogEntry {
            name: "classical_imaginary_order",
            parameters: "tau",
            x_dependent: false,
            summary: "(1 + |xi|^2)^{i tau}, isotropic imaginary order",
        },
        CatalogEntry {
            name: "product_imaginary_order",
            parameters: "taus (one per factor)",
            x_dependent: false,
            summary: "prod_i (1 + |xi^i|^2 + |xi|^{2 rho})^{i tau_i}",
        },
        CatalogEntry {
            name: "modulated_product",
            parameters: "taus, radius",
            x_dependent: true,
            summary: "smooth x-bump times product_imaginary_order",
        },
        CatalogEntry {
            name: "riemann_singularity",
            parameters: "gamma",
            x_dependent: false,
            summary: "(1 - phi(xi)) e^{i pi sqrt|xi|} |xi|^{gamma/2 - 3/4}",
        },
    ]
}
