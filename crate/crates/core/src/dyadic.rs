//! Nonisotropic dilations, dyadic frequency pieces, the scale-separation
//! hypothesis, the I/J index partition, and support predicates.
//!
//! A piece is indexed by a tuple t of nonnegative integers, one per factor.
//! The i-th dilation scales factor i by 2^{-t_i} and every other factor by
//! 2^{-q t_i}; the piece delta_t is the product over i of the annulus window
//! evaluated on the dilated vector. Its support is an intersection of n
//! elliptical shells; at rho = 0 (q infinite) it degenerates to a dyadic
//! rectangle.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;

use crate::cutoffs::CutoffProfile;
use crate::error::{Error, Result};
use crate::layout::{Domain, Field, ProductLayout, QExponent};

/// Grid values of a piece at or below this threshold count as zero in
/// support scans; separates true zeros of the compactly supported window
/// from roundoff.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

/// Nonnegative integer tuple indexing one frequency piece, one entry per
/// factor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DyadicTuple {
    t: Vec<u32>,
}

impl DyadicTuple {
    pub fn new(t: Vec<u32>) -> Self {
        DyadicTuple { t }
    }

    pub fn entries(&self) -> &[u32] {
        &self.t
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn get(&self, i: usize) -> u32 {
        self.t[i]
    }

    pub fn max_entry(&self) -> u32 {
        self.t.iter().copied().max().unwrap_or(0)
    }

    /// Sum over factors of |t_i - s_i|.
    pub fn l1_distance(&self, other: &DyadicTuple) -> u32 {
        self.t
            .iter()
            .zip(&other.t)
            .map(|(&a, &b)| a.abs_diff(b))
            .sum()
    }

    /// Max over factors of |t_i - s_i|.
    pub fn linf_distance(&self, other: &DyadicTuple) -> u32 {
        self.t
            .iter()
            .zip(&other.t)
            .map(|(&a, &b)| a.abs_diff(b))
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Display for DyadicTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, v) in self.t.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Entry threshold of the scale-separation hypothesis: some t_i must reach
/// (2 + log2 n)/(q - 1). Degenerates to 0 when q is infinite, so every tuple
/// qualifies at rho = 0.
pub fn h_threshold(q: QExponent, n: usize) -> f64 {
    match q {
        QExponent::Infinite => 0.0,
        QExponent::Finite(qv) => (2.0 + (n as f64).log2()) / (qv - 1.0),
    }
}

/// True iff some entry reaches the h_threshold.
pub fn satisfies_h(q: QExponent, t: &DyadicTuple) -> bool {
    let thr = h_threshold(q, t.len());
    t.entries().iter().any(|&ti| ti as f64 >= thr)
}

/// Nonisotropic dilation: factor i scaled by 2^{-t_i}, every other factor by
/// 2^{-q t_i} (exactly 0 when q is infinite and t_i > 0; identity at t_i = 0).
pub fn dilate_i(layout: &ProductLayout, t_i: u32, i: usize, xi: &[f64]) -> Vec<f64> {
    let own = (-(t_i as f64)).exp2();
    let cross = layout.q().two_pow_neg_qt(t_i as f64);
    let range = layout.axes_of_factor(i);
    xi.iter()
        .enumerate()
        .map(|(a, &v)| {
            if range.contains(&a) {
                own * v
            } else {
                cross * v
            }
        })
        .collect()
}

/// Norm of the i-th dilation of xi, computed from per-factor norms without
/// materializing the dilated vector.
fn dilated_norm(
    q: QExponent,
    t_i: u32,
    factor_norm_sq: f64,
    total_norm_sq: f64,
) -> f64 {
    let own = (-(2.0 * t_i as f64)).exp2();
    let cross = q.two_pow_neg_qt(t_i as f64);
    (own * factor_norm_sq + cross * cross * (total_norm_sq - factor_norm_sq)).sqrt()
}

/// delta_t(xi): product over factors of the annulus window on the dilated
/// vector. Nonnegative; supported in the intersection of n shells.
pub fn delta_value(layout: &ProductLayout, t: &DyadicTuple, xi: &[f64]) -> f64 {
    debug_assert_eq!(t.len(), layout.n());
    let profile = CutoffProfile::standard();
    let total_sq: f64 = xi.iter().map(|v| v * v).sum();
    let mut prod = 1.0;
    for i in 0..layout.n() {
        let fac_sq = layout
            .axes_of_factor(i)
            .map(|a| xi[a] * xi[a])
            .sum::<f64>();
        let r = dilated_norm(layout.q(), t.get(i), fac_sq, total_sq);
        let w = profile.annulus_radial(r);
        if w == 0.0 {
            return 0.0;
        }
        prod *= w;
    }
    prod
}

/// delta_t tabulated on the frequency grid as a (real-valued) field.
pub fn delta_field(layout: &Arc<ProductLayout>, t: &DyadicTuple) -> Field {
    let lay = layout.clone();
    let tt = t.clone();
    Field::from_fn(layout.clone(), Domain::Frequency, move |xi| {
        Complex64::new(delta_value(&lay, &tt, xi), 0.0)
    })
}

/// Number of frequency grid points where delta_t exceeds the support
/// threshold.
pub fn grid_support_count(layout: &Arc<ProductLayout>, t: &DyadicTuple) -> usize {
    let mut count = 0usize;
    let mut point = vec![0.0; layout.total_axes()];
    let mut idx = vec![0usize; layout.total_axes()];
    loop {
        layout.frequency_point(&idx, &mut point);
        if delta_value(layout, t, &point) > SUPPORT_THRESHOLD {
            count += 1;
        }
        if !advance_index(&mut idx, layout.grid_points()) {
            return count;
        }
    }
}

/// Row-major multi-index increment; false when the iteration wraps.
pub(crate) fn advance_index(idx: &mut [usize], shape: &[usize]) -> bool {
    for a in (0..idx.len()).rev() {
        idx[a] += 1;
        if idx[a] < shape[a] {
            return true;
        }
        idx[a] = 0;
    }
    false
}

/// Exact-vanishing predicate: if some factor's indices differ by at least 2,
/// the two pieces have disjoint supports and delta_t * delta_s is identically
/// zero. (The i-th dilated norm shrinks by at least 2^{-gap} when t_i grows
/// by gap, pushing one window's argument below 1/2 wherever the other is
/// positive.)
pub fn pieces_disjoint(t: &DyadicTuple, s: &DyadicTuple) -> bool {
    t.linf_distance(s) >= 2
}

/// Index partition: entries in `i_set` obey a two-sided dyadic window
/// against each other; every j in `j_set` satisfies
/// q*t_j - (2 + log2 n) <= t_imath where t_imath is the largest entry over
/// `i_set`. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionIJ {
    pub i_set: Vec<usize>,
    pub j_set: Vec<usize>,
    pub imath: usize,
}

impl fmt::Display for PartitionIJ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fmt_set = |s: &[usize]| {
            let inner: Vec<String> = s.iter().map(|v| (v + 1).to_string()).collect();
            format!("{{{}}}", inner.join(","))
        };
        // 1-based for human-facing output.
        write!(
            f,
            "I={} J={} imath={}",
            fmt_set(&self.i_set),
            fmt_set(&self.j_set),
            self.imath + 1
        )
    }
}

/// Splits factor indices by sorting t ascending and cutting at the first
/// sorted position whose entry is dyadically far below the maximum:
/// the suffix from the cut becomes I, the prefix J. When no position
/// qualifies (all entries within the window of the max, which forces
/// max <= (2+log2 n)/(q-1)), the partition degenerates to I = {argmax}
/// (lowest index on ties), which satisfies the defining inequalities
/// directly. Requires finite q.
pub fn partition_ij(q: QExponent, t: &DyadicTuple) -> Result<PartitionIJ> {
    let qv = match q {
        QExponent::Finite(v) => v,
        QExponent::Infinite => {
            return Err(Error::InvalidParameter(
                "index partition requires rho > 0 (finite q)".into(),
            ))
        }
    };
    let n = t.len();
    if n == 0 {
        return Err(Error::InvalidParameter("empty tuple".into()));
    }
    let c = 2.0 + (n as f64).log2();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (t.get(i), i));
    let t_max = t.get(order[n - 1]) as f64;
    let cut = order
        .iter()
        .position(|&i| t_max < qv * t.get(i) as f64 - c);
    let (i_set, j_set) = match cut {
        Some(k) => {
            let mut i_set: Vec<usize> = order[k..].to_vec();
            let mut j_set: Vec<usize> = order[..k].to_vec();
            i_set.sort_unstable();
            j_set.sort_unstable();
            (i_set, j_set)
        }
        None => {
            // Degenerate split: the max alone. Every other entry j has
            // q*t_j - c <= q*t_max - c <= t_max, so the J-side inequality
            // holds; the I-side window is vacuous for a singleton.
            let max_v = t.max_entry();
            let imath = (0..n).find(|&i| t.get(i) == max_v).unwrap();
            let j_set: Vec<usize> = (0..n).filter(|&i| i != imath).collect();
            (vec![imath], j_set)
        }
    };
    let max_in_i = i_set.iter().map(|&i| t.get(i)).max().unwrap();
    let imath = *i_set.iter().find(|&&i| t.get(i) == max_in_i).unwrap();
    let part = PartitionIJ {
        i_set,
        j_set,
        imath,
    };
    debug_assert!(partition_inequalities_hold(q, t, &part));
    Ok(part)
}

/// Direct substitution of the partition's defining inequalities:
/// (t_j + c)/q < t_i < q*t_j - c for every pair of distinct indices in I
/// (with c = 2 + log2 n), and q*t_j - c <= t_imath for every j in J.
pub fn partition_inequalities_hold(q: QExponent, t: &DyadicTuple, part: &PartitionIJ) -> bool {
    let qv = match q {
        QExponent::Finite(v) => v,
        QExponent::Infinite => return false,
    };
    let n = t.len();
    let c = 2.0 + (n as f64).log2();
    if part.i_set.is_empty() {
        return false;
    }
    let mut seen = vec![false; n];
    for &i in part.i_set.iter().chain(&part.j_set) {
        if i >= n || seen[i] {
            return false;
        }
        seen[i] = true;
    }
    if !seen.iter().all(|&s| s) {
        return false;
    }
    let max_in_i = part.i_set.iter().map(|&i| t.get(i)).max().unwrap();
    if !part.i_set.contains(&part.imath) || t.get(part.imath) != max_in_i {
        return false;
    }
    for &i in &part.i_set {
        for &j in &part.i_set {
            if i == j {
                continue;
            }
            let ti = t.get(i) as f64;
            let tj = t.get(j) as f64;
            if !((tj + c) / qv < ti && ti < qv * tj - c) {
                return false;
            }
        }
    }
    let t_imath = t.get(part.imath) as f64;
    for &j in &part.j_set {
        if !(qv * t.get(j) as f64 - c <= t_imath) {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TupleFilter {
    All,
    HOnly,
}

/// Lexicographic enumeration of [0, t_max]^n, optionally filtered by the
/// scale-separation hypothesis.
pub fn enumerate_tuples(
    n: usize,
    t_max: u32,
    filter: TupleFilter,
    q: QExponent,
) -> Result<Vec<DyadicTuple>> {
    if n == 0 {
        return Err(Error::InvalidParameter("factor count must be >= 1".into()));
    }
    let count = ((t_max as u64 + 1) as f64).powi(n as i32);
    if count > 1e7 {
        return Err(Error::InvalidParameter(format!(
            "enumeration of {count:.0} tuples exceeds the 1e7 cap"
        )));
    }
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    loop {
        let t = DyadicTuple::new(cur.clone());
        if filter == TupleFilter::All || satisfies_h(q, &t) {
            out.push(t);
        }
        let mut a = n;
        loop {
            if a == 0 {
                return Ok(out);
            }
            a -= 1;
            if cur[a] < t_max {
                cur[a] += 1;
                break;
            }
            cur[a] = 0;
        }
    }
}

/// Realized support-geometry constants of one piece over the frequency grid.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SupportCheck {
    pub tuple: Vec<u32>,
    pub i_set: Vec<usize>,
    pub j_set: Vec<usize>,
    pub imath: usize,
    pub sample_count: usize,
    pub vacuous: bool,
    /// Per i in I: (i, min, max) of |xi^i| / 2^{t_i} over support samples.
    pub i_ratio: Vec<(usize, f64, f64)>,
    /// Per j in J: max of |xi^j| / 2^{t_j}.
    pub j_upper: Vec<(usize, f64)>,
    /// Per j in J: (j, min, max) of |xi^imath| / 2^{q t_j}.
    pub imath_ratio: Vec<(usize, f64, f64)>,
    /// (min, max) of |xi| / 2^{t_imath}.
    pub norm_ratio: (f64, f64),
    pub within_bounds: bool,
}

/// Guaranteed two-sided window for |xi^i|/2^{t_i} on I: lower 2^{-3/2},
/// upper 2 (strict on the open support).
pub const I_RATIO_LO: f64 = 0.35355339059327373; // 2^{-1.5}
pub const I_RATIO_HI: f64 = 2.0;

/// Guaranteed upper constant for |xi^j|/2^{t_j} on J.
pub const J_UPPER: f64 = 2.0;

/// Guaranteed window for |xi^imath|/2^{q t_j}: lower 2^{-3.5}/n, upper 2.
pub fn imath_ratio_lo(n: usize) -> f64 {
    (2.0f64).powf(-3.5) / n as f64
}

/// Scans the grid support of delta_t and verifies the shell-geometry bounds:
/// factor norms on I pinned to 2^{t_i} within [I_RATIO_LO, I_RATIO_HI],
/// J-factor norms below J_UPPER * 2^{t_j}, and the dominant factor norm
/// pinned to 2^{q t_j} for every j in J. Requires the tuple to satisfy the
/// scale-separation hypothesis and finite q. Empty grid support is reported
/// as vacuous (bounds trivially hold).
pub fn check_support_estimates(
    layout: &Arc<ProductLayout>,
    t: &DyadicTuple,
) -> Result<SupportCheck> {
    if t.len() != layout.n() {
        return Err(Error::LayoutMismatch(format!(
            "tuple has {} entries, layout has {} factors",
            t.len(),
            layout.n()
        )));
    }
    let q = layout.q();
    if q.is_infinite() {
        return Err(Error::InvalidParameter(
            "support-geometry check requires rho > 0".into(),
        ));
    }
    if !satisfies_h(q, t) {
        return Err(Error::InvalidParameter(format!(
            "tuple {t} does not satisfy the scale-separation hypothesis"
        )));
    }
    let part = partition_ij(q, t)?;
    let n = layout.n();
    let mut i_range: Vec<(f64, f64)> = vec![(f64::INFINITY, f64::NEG_INFINITY); n];
    let mut norm_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut count = 0usize;
    let mut point = vec![0.0; layout.total_axes()];
    let mut idx = vec![0usize; layout.total_axes()];
    loop {
        layout.frequency_point(&idx, &mut point);
        if delta_value(layout, t, &point) > SUPPORT_THRESHOLD {
            count += 1;
            let total: f64 = point.iter().map(|v| v * v).sum::<f64>();
            let total = total.sqrt();
            norm_range.0 = norm_range.0.min(total);
            norm_range.1 = norm_range.1.max(total);
            for i in 0..n {
                let fnorm = layout.factor_norm(i, &point);
                i_range[i].0 = i_range[i].0.min(fnorm);
                i_range[i].1 = i_range[i].1.max(fnorm);
            }
        }
        if !advance_index(&mut idx, layout.grid_points()) {
            break;
        }
    }
    let vacuous = count == 0;
    let t_imath = t.get(part.imath) as f64;
    let two_t = |e: f64| e.exp2();
    let mut i_ratio = Vec::new();
    let mut j_upper = Vec::new();
    let mut imath_ratio = Vec::new();
    let mut within = true;
    if !vacuous {
        for &i in &part.i_set {
            let scale = two_t(t.get(i) as f64);
            let (lo, hi) = (i_range[i].0 / scale, i_range[i].1 / scale);
            within &= lo >= I_RATIO_LO && hi <= I_RATIO_HI;
            i_ratio.push((i, lo, hi));
        }
        for &j in &part.j_set {
            let up = i_range[j].1 / two_t(t.get(j) as f64);
            within &= up <= J_UPPER;
            j_upper.push((j, up));
            let scale = two_t(q.times(t.get(j) as f64));
            let (lo, hi) = (i_range[part.imath].0 / scale, i_range[part.imath].1 / scale);
            within &= lo >= imath_ratio_lo(n) && hi <= 2.0;
            imath_ratio.push((j, lo, hi));
        }
    }
    let norm_ratio = if vacuous {
        (0.0, 0.0)
    } else {
        (
            norm_range.0 / two_t(t_imath),
            norm_range.1 / two_t(t_imath),
        )
    };
    Ok(SupportCheck {
        tuple: t.entries().to_vec(),
        i_set: part.i_set,
        j_set: part.j_set,
        imath: part.imath,
        sample_count: count,
        vacuous,
        i_ratio,
        j_upper,
        imath_ratio,
        norm_ratio,
        within_bounds: within,
    })
}

/// CSV sweep over tuples: tuple, partition, hypothesis flag, and realized
/// support constants (empty constants for vacuous rows).
pub fn support_sweep_csv<W: Write>(
    layout: &Arc<ProductLayout>,
    tuples: &[DyadicTuple],
    out: &mut W,
) -> Result<()> {
    writeln!(
        out,
        "t,I,J,imath,satisfies_h,vacuous,support_points,i_ratio_min,i_ratio_max,j_upper_max,imath_ratio_min,imath_ratio_max"
    )
    .map_err(Error::Io)?;
    let q = layout.q();
    for t in tuples {
        let sat = satisfies_h(q, t);
        if !sat {
            let part = partition_ij(q, t)?;
            writeln!(
                out,
                "{t},{},{},{},false,,,,,,,",
                set_string(&part.i_set),
                set_string(&part.j_set),
                part.imath + 1
            )
            .map_err(Error::Io)?;
            continue;
        }
        let chk = check_support_estimates(layout, t)?;
        let fold_min = |v: &[(usize, f64, f64)]| {
            v.iter().map(|&(_, lo, _)| lo).fold(f64::INFINITY, f64::min)
        };
        let fold_max = |v: &[(usize, f64, f64)]| {
            v.iter()
                .map(|&(_, _, hi)| hi)
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let ju = chk
            .j_upper
            .iter()
            .map(|&(_, u)| u)
            .fold(f64::NEG_INFINITY, f64::max);
        if chk.vacuous {
            writeln!(
                out,
                "{t},{},{},{},true,true,0,,,,,",
                set_string(&chk.i_set),
                set_string(&chk.j_set),
                chk.imath + 1
            )
            .map_err(Error::Io)?;
        } else {
            writeln!(
                out,
                "{t},{},{},{},true,false,{},{},{},{},{},{}",
                set_string(&chk.i_set),
                set_string(&chk.j_set),
                chk.imath + 1,
                chk.sample_count,
                fold_min(&chk.i_ratio),
                fold_max(&chk.i_ratio),
                if chk.j_upper.is_empty() {
                    String::new()
                } else {
                    ju.to_string()
                },
                if chk.imath_ratio.is_empty() {
                    String::new()
                } else {
                    fold_min(&chk.imath_ratio).to_string()
                },
                if chk.imath_ratio.is_empty() {
                    String::new()
                } else {
                    fold_max(&chk.imath_ratio).to_string()
                },
            )
            .map_err(Error::Io)?;
        }
    }
    Ok(())
}

fn set_string(s: &[usize]) -> String {
    let inner: Vec<String> = s.iter().map(|v| (v + 1).to_string()).collect();
    format!("{{{}}}", inner.join(";"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout_2d(rho: f64, grid: usize, halfwidth: f64) -> Arc<ProductLayout> {
        ProductLayout::uniform(vec![1, 1], rho, grid, halfwidth).unwrap()
    }

    #[test]
    fn dilation_examples() {
        let lay = layout_2d(0.5, 4, 1.0);
        // t_i = 0 is the identity.
        assert_eq!(dilate_i(&lay, 0, 0, &[4.0, 8.0]), vec![4.0, 8.0]);
        // q = 2: own factor halves, cross factor quarters.
        assert_eq!(dilate_i(&lay, 1, 0, &[4.0, 8.0]), vec![2.0, 2.0]);
        // q infinite: cross factor annihilated.
        let lay0 = layout_2d(0.0, 4, 1.0);
        assert_eq!(dilate_i(&lay0, 1, 0, &[4.0, 8.0]), vec![2.0, 0.0]);
        assert_eq!(dilate_i(&lay0, 0, 0, &[4.0, 8.0]), vec![4.0, 8.0]);
    }

    #[test]
    fn delta_vanishes_at_origin() {
        let lay = layout_2d(0.5, 4, 1.0);
        for t in [vec![0, 0], vec![1, 2], vec![3, 3]] {
            assert_eq!(
                delta_value(&lay, &DyadicTuple::new(t), &[0.0, 0.0]),
                0.0
            );
        }
    }

    #[test]
    fn delta_nonnegative_on_grid() {
        let lay = layout_2d(0.5, 32, 1.0);
        let t = DyadicTuple::new(vec![2, 1]);
        let f = delta_field(&lay, &t);
        for v in f.samples().iter() {
            assert!(v.re >= 0.0 && v.im == 0.0);
        }
    }

    #[test]
    fn rho_zero_support_is_dyadic_rectangle() {
        // Entries >= 1 so every factor is a pure radial shell:
        // 2^{t_i - 1} < |xi^i| < 2^{t_i + 1} on the support.
        let lay = layout_2d(0.0, 64, 1.0);
        let t = DyadicTuple::new(vec![2, 3]);
        let mut found = 0;
        let mut point = vec![0.0; 2];
        let mut idx = vec![0usize; 2];
        loop {
            lay.frequency_point(&idx, &mut point);
            let v = delta_value(&lay, &t, &point);
            if v > SUPPORT_THRESHOLD {
                found += 1;
                for i in 0..2 {
                    let ti = t.get(i) as f64;
                    let a = point[i].abs();
                    assert!(
                        a > (ti - 1.0).exp2() && a < (ti + 1.0).exp2(),
                        "point {point:?} outside rectangle for t={t}"
                    );
                }
            }
            if !advance_index(&mut idx, lay.grid_points()) {
                break;
            }
        }
        assert!(found > 0, "support should be nonempty on this grid");
    }

    #[test]
    fn rho_zero_upper_bound_holds_even_with_zero_entries() {
        let lay = layout_2d(0.0, 64, 1.0);
        let t = DyadicTuple::new(vec![0, 2]);
        let mut point = vec![0.0; 2];
        let mut idx = vec![0usize; 2];
        loop {
            lay.frequency_point(&idx, &mut point);
            if delta_value(&lay, &t, &point) > SUPPORT_THRESHOLD {
                for i in 0..2 {
                    assert!(point[i].abs() < ((t.get(i) + 1) as f64).exp2());
                }
            }
            if !advance_index(&mut idx, lay.grid_points()) {
                break;
            }
        }
    }

    #[test]
    fn rho_zero_partition_of_unity() {
        let lay = layout_2d(0.0, 64, 1.0);
        let profile = CutoffProfile::standard();
        let t_max = 3u32;
        let tuples = enumerate_tuples(2, t_max, TupleFilter::All, lay.q()).unwrap();
        let mut point = vec![0.0; 2];
        let mut idx = vec![0usize; 2];
        loop {
            lay.frequency_point(&idx, &mut point);
            let sum: f64 = tuples
                .iter()
                .map(|t| delta_value(&lay, t, &point))
                .sum();
            let norm: f64 = point.iter().map(|v| v * v).sum::<f64>().sqrt();
            // Exact per-factor closed form everywhere: factor sum equals
            // annulus(xi) + profile(2^{-T}|xi^i|) - profile(|xi^i|).
            let ann = profile.annulus_radial(norm);
            let closed: f64 = (0..2)
                .map(|i| {
                    let a = point[i].abs();
                    ann + profile.profile(a / (t_max as f64).exp2()) - profile.profile(a)
                })
                .product();
            assert!(
                (sum - closed).abs() < 1e-12,
                "closed form off at {point:?}: {sum} vs {closed}"
            );
            // On the region where every factor norm is >= 2, the product of
            // pure per-factor telescopes applies.
            if point.iter().all(|v| v.abs() >= 2.0) {
                let formula: f64 = (0..2)
                    .map(|i| {
                        let a = point[i].abs();
                        profile.profile(a / (t_max as f64).exp2())
                            - profile.profile(2.0 * a)
                    })
                    .product();
                assert!((sum - formula).abs() < 1e-12);
            }
            // Exact resolution on the inner block [2, 2^{T-1}].
            if point
                .iter()
                .all(|v| v.abs() >= 2.0 && v.abs() <= ((t_max - 1) as f64).exp2())
            {
                assert!((sum - 1.0).abs() < 1e-12, "sum {sum} at {point:?}");
            }
            if !advance_index(&mut idx, lay.grid_points()) {
                break;
            }
        }
    }

    #[test]
    fn hypothesis_examples() {
        let q_half = QExponent::from_rho(0.5).unwrap();
        assert_eq!(h_threshold(q_half, 2), 3.0);
        assert!(satisfies_h(q_half, &DyadicTuple::new(vec![3, 0])));
        assert!(!satisfies_h(q_half, &DyadicTuple::new(vec![2, 2])));
        let q_zero = QExponent::from_rho(0.0).unwrap();
        assert!(satisfies_h(q_zero, &DyadicTuple::new(vec![0, 0])));
        assert_eq!(h_threshold(q_zero, 2), 0.0);
        // n = 1 is the classical one-parameter case: threshold (2 + 0)/(q-1).
        assert_eq!(h_threshold(q_half, 1), 2.0);
    }

    #[test]
    fn partition_examples() {
        let q = QExponent::from_rho(0.5).unwrap();
        let p = partition_ij(q, &DyadicTuple::new(vec![5, 1])).unwrap();
        assert_eq!(p.i_set, vec![0]);
        assert_eq!(p.j_set, vec![1]);
        assert_eq!(p.imath, 0);
        let p = partition_ij(q, &DyadicTuple::new(vec![4, 4])).unwrap();
        assert_eq!(p.i_set, vec![0, 1]);
        assert!(p.j_set.is_empty());
        assert_eq!(p.imath, 0);
        // Mirrored tuple: same split with relabeled indices.
        let p = partition_ij(q, &DyadicTuple::new(vec![1, 5])).unwrap();
        assert_eq!(p.i_set, vec![1]);
        assert_eq!(p.j_set, vec![0]);
        assert_eq!(p.imath, 1);
    }

    #[test]
    fn partition_boundary_tuples() {
        // max exactly at the hypothesis threshold: the sorted cut has no
        // qualifying position; the degenerate argmax split must still satisfy
        // the inequalities.
        let q = QExponent::from_rho(0.5).unwrap();
        for t in [vec![3, 0], vec![3, 3], vec![0, 3], vec![3, 2]] {
            let t = DyadicTuple::new(t);
            let p = partition_ij(q, &t).unwrap();
            assert!(
                partition_inequalities_hold(q, &t, &p),
                "inequalities fail for {t}: {p}"
            );
            assert_eq!(p.i_set.len(), 1);
        }
    }

    #[test]
    fn partition_valid_for_all_small_tuples() {
        let q = QExponent::from_rho(0.5).unwrap();
        for t in enumerate_tuples(2, 6, TupleFilter::All, q).unwrap() {
            let p = partition_ij(q, &t).unwrap();
            assert!(
                partition_inequalities_hold(q, &t, &p),
                "inequalities fail for {t}: {p}"
            );
        }
        assert!(partition_ij(QExponent::Infinite, &DyadicTuple::new(vec![1, 1])).is_err());
    }

    #[test]
    fn enumeration_examples() {
        let q = QExponent::from_rho(0.5).unwrap();
        let all = enumerate_tuples(2, 1, TupleFilter::All, q).unwrap();
        let entries: Vec<Vec<u32>> = all.iter().map(|t| t.entries().to_vec()).collect();
        assert_eq!(
            entries,
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]
        );
        let all6 = enumerate_tuples(2, 6, TupleFilter::All, q).unwrap();
        assert_eq!(all6.len(), 49);
        let h3 = enumerate_tuples(2, 3, TupleFilter::HOnly, q).unwrap();
        assert!(!h3.is_empty());
        for t in &h3 {
            assert_eq!(t.max_entry(), 3, "H-only at T=3 must have max 3: {t}");
        }
        let with_max3 = enumerate_tuples(2, 3, TupleFilter::All, q)
            .unwrap()
            .into_iter()
            .filter(|t| t.max_entry() == 3)
            .count();
        assert_eq!(h3.len(), with_max3);
    }

    #[test]
    fn disjoint_pieces_vanish_exactly_on_grid() {
        let lay = layout_2d(0.5, 128, 0.25); // Nyquist 128
        let t = DyadicTuple::new(vec![3, 3]);
        let s = DyadicTuple::new(vec![5, 3]);
        assert!(pieces_disjoint(&t, &s));
        let mut point = vec![0.0; 2];
        let mut idx = vec![0usize; 2];
        let mut t_nonzero = 0usize;
        let mut s_nonzero = 0usize;
        loop {
            lay.frequency_point(&idx, &mut point);
            let a = delta_value(&lay, &t, &point);
            let b = delta_value(&lay, &s, &point);
            assert!(a * b == 0.0, "product must vanish exactly at {point:?}");
            if a > SUPPORT_THRESHOLD {
                t_nonzero += 1;
            }
            if b > SUPPORT_THRESHOLD {
                s_nonzero += 1;
            }
            if !advance_index(&mut idx, lay.grid_points()) {
                break;
            }
        }
        // Both pieces individually live on this grid, so the vanishing is
        // a genuine support statement, not an artifact of empty pieces.
        assert!(t_nonzero > 0 && s_nonzero > 0);
        // A gap-1 neighbor overlaps.
        let r = DyadicTuple::new(vec![4, 3]);
        assert!(!pieces_disjoint(&t, &r));
        let mut overlap = false;
        let mut idx = vec![0usize; 2];
        loop {
            lay.frequency_point(&idx, &mut point);
            if delta_value(&lay, &t, &point) * delta_value(&lay, &r, &point)
                > SUPPORT_THRESHOLD
            {
                overlap = true;
                break;
            }
            if !advance_index(&mut idx, lay.grid_points()) {
                break;
            }
        }
        assert!(overlap);
    }

    #[test]
    fn known_empty_piece_is_vacuous() {
        // (5,1) at rho = 1/2: factor 1 demands |xi| ~ 2^5 while factor 2
        // caps |xi^2| < 4 and |xi^1| < 8; the shells cannot intersect.
        let lay = layout_2d(0.5, 128, 0.25);
        let t = DyadicTuple::new(vec![5, 1]);
        assert_eq!(grid_support_count(&lay, &t), 0);
        let chk = check_support_estimates(&lay, &t).unwrap();
        assert!(chk.vacuous);
        assert!(chk.within_bounds);
    }

    #[test]
    fn support_estimates_on_live_tuple() {
        // Nyquist 64 covers shells up to 2^5.
        let lay = layout_2d(0.5, 128, 0.5);
        let t = DyadicTuple::new(vec![4, 2]);
        let chk = check_support_estimates(&lay, &t).unwrap();
        assert!(!chk.vacuous, "piece (4,2) must be live on this grid");
        assert!(chk.within_bounds, "support constants escaped: {chk:?}");
        assert_eq!(chk.i_set, vec![0]);
        assert_eq!(chk.j_set, vec![1]);
        // Factor 1 pinned near 2^4.
        let (_, lo, hi) = chk.i_ratio[0];
        assert!(lo >= I_RATIO_LO && hi <= I_RATIO_HI);
        // |xi^imath| ~ 2^{q t_j} = 2^4 as well here.
        let (_, mlo, mhi) = chk.imath_ratio[0];
        assert!(mlo >= imath_ratio_lo(2) && mhi <= 2.0);
    }

    #[test]
    fn support_estimates_reject_bad_inputs() {
        let lay = layout_2d(0.5, 32, 1.0);
        // Hypothesis not satisfied.
        assert!(check_support_estimates(&lay, &DyadicTuple::new(vec![1, 1])).is_err());
        // rho = 0.
        let lay0 = layout_2d(0.0, 32, 1.0);
        assert!(check_support_estimates(&lay0, &DyadicTuple::new(vec![3, 0])).is_err());
        // Wrong arity.
        assert!(check_support_estimates(&lay, &DyadicTuple::new(vec![3])).is_err());
    }

    #[test]
    fn sweep_csv_has_expected_shape() {
        let lay = layout_2d(0.5, 32, 1.0);
        let q = lay.q();
        let tuples: Vec<DyadicTuple> = enumerate_tuples(2, 3, TupleFilter::All, q)
            .unwrap()
            .into_iter()
            .take(6)
            .collect();
        let mut buf = Vec::new();
        support_sweep_csv(&lay, &tuples, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert!(lines[0].starts_with("t,I,J,imath"));
        assert!(lines[1].starts_with("(0,0),"));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn partition_always_valid(
                entries in proptest::collection::vec(0u32..12, 1..4),
                rho in 0.05f64..0.95,
            ) {
                let q = QExponent::from_rho(rho).unwrap();
                let t = DyadicTuple::new(entries);
                let p = partition_ij(q, &t).unwrap();
                prop_assert!(partition_inequalities_hold(q, &t, &p));
                prop_assert_eq!(p.i_set.len() + p.j_set.len(), t.len());
            }

            #[test]
            fn disjointness_symmetric(
                a in proptest::collection::vec(0u32..8, 2),
                b in proptest::collection::vec(0u32..8, 2),
            ) {
                let t = DyadicTuple::new(a);
                let s = DyadicTuple::new(b);
                prop_assert_eq!(pieces_disjoint(&t, &s), pieces_disjoint(&s, &t));
                prop_assert!(!pieces_disjoint(&t, &t));
            }
        }
    }
}
