//! Pointwise domination of localized blocks by the strong maximal function.
//!
//! For scale-separated tuples t the block Delta_t T f is bounded pointwise
//! by a multiple of the strong maximal function of f. The driver sweeps
//! tuples and random draws, records the worst pointwise ratio per (tuple,
//! draw), and passes when the largest ratio stays within a factor of the
//! median ratio: the constant in the domination does not blow up across
//! scales or draws.
//!
//! Each tuple is probed at f = Delta_t g for a shared set of band-limited
//! draws g. A raw broad-band draw spreads its energy over every scale at
//! once, so a thin piece sees a ratio proportional to its sliver of the
//! spectrum rather than to the constant under test; filtering the draw
//! through the piece exercises every tuple at full strength while staying
//! an instance of the bound (it holds for every f, this f included).

use serde::{Deserialize, Serialize};

use crate::dyadic::{delta_field, enumerate_tuples, DyadicTuple, TupleFilter};
use crate::error::{Error, Result};
use crate::fitting::Verdict;
use crate::layout::{Field, ProductLayout};
use crate::operators::{strong_maximal, LinearOp};
use crate::random::{band_limited_field, derive_seed};
use crate::symbols::{SymbolFamily, SymbolSpec};

use super::{separable_parts, tuple_label, EstimateReport, ExperimentKind, SandwichOp};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MaximalConfig {
    pub rho: f64,
    pub dims: Vec<usize>,
    pub grid: usize,
    pub halfwidth: f64,
    /// Tuple entries swept over [t_floor, t_max] (the floor skips scales
    /// whose piece is unresolvable on the frequency grid).
    pub t_floor: u32,
    pub t_max: u32,
    /// At most this many tuples, in lexicographic order.
    pub max_tuples: usize,
    pub draws: usize,
    /// Spectral band of the random draws.
    pub band_lo: f64,
    pub band_hi: f64,
    pub taus: Vec<f64>,
    pub window_radius: f64,
    pub seed: u64,
    /// Regularizer scale: eps = eps_scale * sup|f|.
    pub eps_scale: f64,
    /// PASS needs max ratio <= ratio_factor * median ratio.
    pub ratio_factor: f64,
}

impl Default for MaximalConfig {
    fn default() -> Self {
        MaximalConfig {
            rho: 0.5,
            dims: vec![1, 1],
            grid: 128,
            halfwidth: 0.25,
            t_floor: 1,
            t_max: 6,
            max_tuples: 20,
            draws: 10,
            band_lo: 2.0,
            band_hi: 96.0,
            taus: vec![1.0, 1.0],
            window_radius: 0.2,
            seed: 11,
            eps_scale: 1e-12,
            ratio_factor: 3.0,
        }
    }
}

#[derive(Serialize)]
struct MaximalTolerances {
    ratio_factor: f64,
    eps_scale: f64,
}

/// Worst pointwise ratio |g(x)| / (Mf(x) + eps) over the grid.
pub(crate) fn domination_ratio(g: &Field, maximal: &Field, eps: f64) -> f64 {
    g.samples()
        .iter()
        .zip(maximal.samples().iter())
        .map(|(gv, mv)| gv.norm() / (mv.re + eps))
        .fold(0.0f64, f64::max)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

pub fn maximal_domination(config: &MaximalConfig) -> Result<EstimateReport> {
    let n = config.dims.len();
    if config.taus.len() != n {
        return Err(Error::InvalidParameter(format!(
            "taus has {} entries for {} factors",
            config.taus.len(),
            n
        )));
    }
    if config.t_floor > config.t_max {
        return Err(Error::InvalidParameter(
            "t_floor must not exceed t_max".into(),
        ));
    }
    let layout = ProductLayout::uniform(
        config.dims.clone(),
        config.rho,
        config.grid,
        config.halfwidth,
    )?;
    let tolerances = MaximalTolerances {
        ratio_factor: config.ratio_factor,
        eps_scale: config.eps_scale,
    };
    let mut report = EstimateReport::new(ExperimentKind::MaximalDomination, config, &tolerances)?;

    let tuples: Vec<DyadicTuple> = enumerate_tuples(n, config.t_max, TupleFilter::HOnly, layout.q())?
        .into_iter()
        .filter(|t| t.entries().iter().all(|&e| e >= config.t_floor))
        .filter(|t| crate::dyadic::grid_support_count(&layout, t) > 0)
        .take(config.max_tuples)
        .collect();
    if tuples.is_empty() || config.draws == 0 {
        report.note("empty tuple set or zero draws");
        report.verdict = Verdict::Inconclusive;
        return Ok(report);
    }
    report.note(format!(
        "{} tuples x {} draws on a {}^{} grid",
        tuples.len(),
        config.draws,
        config.grid,
        layout.total_axes()
    ));

    let bound = SymbolSpec {
        family: SymbolFamily::ModulatedProduct {
            taus: config.taus.clone(),
            radius: config.window_radius,
        },
        analytic_derivatives: true,
    }
    .bind(&layout)?;
    let (window, multiplier) = separable_parts(&bound, &layout);
    let deltas: Vec<Field> = tuples.iter().map(|t| delta_field(&layout, t)).collect();
    let blocks: Vec<SandwichOp> = deltas
        .iter()
        .map(|d| {
            SandwichOp::new(layout.clone())
                .with_left(d.clone())?
                .with_mid(window.clone())?
                .with_right(multiplier.clone())
        })
        .collect::<Result<_>>()?;
    let pieces: Vec<SandwichOp> = deltas
        .iter()
        .map(|d| SandwichOp::new(layout.clone()).with_left(d.clone()))
        .collect::<Result<_>>()?;

    let mut ratios = Vec::with_capacity(tuples.len() * config.draws);
    let mut starved = 0usize;
    for draw in 0..config.draws {
        let g = band_limited_field(
            &layout,
            config.band_lo,
            config.band_hi,
            derive_seed(config.seed, 0x3a41, draw as u64),
        )?;
        for ((t, block), piece) in tuples.iter().zip(&blocks).zip(&pieces) {
            let f = piece.apply_op(&g)?;
            let sup = f.samples().iter().map(|v| v.norm()).fold(0.0f64, f64::max);
            if sup == 0.0 {
                starved += 1;
                continue;
            }
            let eps = config.eps_scale * sup;
            let maximal = strong_maximal(&f)?;
            let out = block.apply_op(&f)?;
            let ratio = domination_ratio(&out, &maximal, eps);
            report.push_sample(
                format!("ratio t={} draw={draw}", tuple_label(t)),
                t.entries().iter().sum::<u32>() as f64,
                ratio,
            );
            ratios.push(ratio);
        }
    }
    if starved > 0 {
        report.note(format!(
            "{starved} (tuple, draw) pairs skipped: piece disjoint from the draw band"
        ));
    }
    if ratios.is_empty() {
        report.note("every piece missed the draw band");
        report.verdict = Verdict::Inconclusive;
        return Ok(report);
    }

    let max_ratio = ratios.iter().cloned().fold(0.0f64, f64::max);
    let med = median(&mut ratios);
    report.push_sample("max_ratio", 0.0, max_ratio);
    report.push_sample("median_ratio", 0.0, med);
    if med == 0.0 {
        report.note("median ratio vanished; domination is trivial here");
        report.verdict = Verdict::Inconclusive;
        return Ok(report);
    }
    let bound_ok = max_ratio <= config.ratio_factor * med;
    report.note(format!(
        "max ratio {max_ratio:.4}, median {med:.4}, allowed spread {:.1}",
        config.ratio_factor
    ));
    report.verdict = if bound_ok { Verdict::Pass } else { Verdict::Fail };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::Domain;
    use num_complex::Complex64;

    #[test]
    fn constant_field_under_identity_symbol_gives_zero_ratio() {
        // f constant: its spectrum is the zero frequency alone, and every
        // piece table vanishes at the origin, so each block output is
        // identically zero while Mf = |f| > 0.
        let layout = ProductLayout::uniform(vec![1, 1], 0.5, 32, 0.25).unwrap();
        let f = Field::from_fn(layout.clone(), Domain::Physical, |_| {
            Complex64::new(1.0, 0.0)
        });
        let maximal = strong_maximal(&f).unwrap();
        let t = DyadicTuple::new(vec![3, 3]);
        let block = SandwichOp::new(layout.clone())
            .with_left(delta_field(&layout, &t))
            .unwrap();
        let g = block.apply_op(&f).unwrap();
        let ratio = domination_ratio(&g, &maximal, 1e-12);
        assert!(ratio < 1e-10, "ratio {ratio}");
    }

    #[test]
    fn experiment_produces_comparable_ratios_on_small_grid() {
        let config = MaximalConfig {
            grid: 64,
            halfwidth: 0.25,
            t_max: 4,
            max_tuples: 8,
            draws: 3,
            band_hi: 16.0,
            ..MaximalConfig::default()
        };
        let report = maximal_domination(&config).unwrap();
        assert_ne!(report.verdict, Verdict::Inconclusive);
        let max = report
            .samples
            .iter()
            .find(|s| s.label == "max_ratio")
            .unwrap()
            .value;
        assert!(max.is_finite() && max > 0.0);
    }

    #[test]
    fn empty_tuple_set_is_inconclusive() {
        let config = MaximalConfig {
            max_tuples: 0,
            ..MaximalConfig::default()
        };
        let report = maximal_domination(&config).unwrap();
        assert_eq!(report.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn reruns_are_bit_identical() {
        let config = MaximalConfig {
            grid: 32,
            t_max: 4,
            max_tuples: 4,
            draws: 2,
            band_hi: 8.0,
            ..MaximalConfig::default()
        };
        let a = maximal_domination(&config).unwrap().to_json_pretty().unwrap();
        let b = maximal_domination(&config).unwrap().to_json_pretty().unwrap();
        assert_eq!(a, b);
    }
}
