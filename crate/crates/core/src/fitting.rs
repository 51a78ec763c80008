//! Verdict type, least-squares fitting, and growth diagnosis shared by the
//! membership checkers and the measurement experiments.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        };
        f.write_str(s)
    }
}

/// FAIL dominates, then INCONCLUSIVE; PASS only if everything passed.
pub fn overall_verdict(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
    let mut out = Verdict::Pass;
    for v in verdicts {
        match v {
            Verdict::Fail => return Verdict::Fail,
            Verdict::Inconclusive => out = Verdict::Inconclusive,
            Verdict::Pass => {}
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub correlation: f64,
    pub count: usize,
}

/// Ordinary least squares y = slope*x + intercept with Pearson correlation.
pub fn linear_fit(points: &[(f64, f64)]) -> Result<LinearFit> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "linear fit needs >= 2 points, got {n}"
        )));
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for &(x, y) in points {
        sxx += (x - mean_x) * (x - mean_x);
        syy += (y - mean_y) * (y - mean_y);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::InsufficientData(
            "linear fit needs x-variance > 0".into(),
        ));
    }
    let slope = sxy / sxx;
    let correlation = if syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    };
    Ok(LinearFit {
        slope,
        intercept: mean_y - slope * mean_x,
        correlation,
        count: n,
    })
}

/// Fit in log2-log2 coordinates; pairs with nonpositive entries are skipped.
pub fn log2_fit(points: &[(f64, f64)]) -> Result<LinearFit> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(x, y)| x > 0.0 && y > 0.0)
        .map(|&(x, y)| (x.log2(), y.log2()))
        .collect();
    linear_fit(&logs)
}

/// Thresholds for diagnosing a running-sup sequence over nested boxes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct GrowthTolerances {
    /// PASS when last/base <= this (base = first positive entry), or when
    /// the tail window grows by no more than this.
    pub stabilization: f64,
    /// A tail step counts as growing when its ratio exceeds this.
    pub step: f64,
    /// FAIL needs total tail growth at least this...
    pub window_total: f64,
    /// ...with every one of this many final steps growing.
    pub window_steps: usize,
}

impl Default for GrowthTolerances {
    fn default() -> Self {
        GrowthTolerances {
            stabilization: 1.5,
            step: 1.05,
            window_total: 2.0,
            window_steps: 3,
        }
    }
}

impl GrowthTolerances {
    pub fn scaled(self, factor: f64) -> Self {
        GrowthTolerances {
            stabilization: self.stabilization * factor,
            ..self
        }
    }
}

/// Diagnoses a nondecreasing running-sup sequence indexed by box doublings.
/// The tail decides: a bounded seminorm stops growing once the boxes pass
/// its saturation scale, an unbounded one keeps growing through the last
/// box. PASS when the sequence never grew beyond the stabilization factor,
/// or when its final `window_steps` doublings are stable; FAIL when every
/// one of those final steps grows beyond the step threshold and the tail
/// gains at least `window_total` in total; otherwise INCONCLUSIVE. Too few
/// samples is always INCONCLUSIVE.
pub fn growth_verdict(
    running_sups: &[f64],
    sample_count: usize,
    min_samples: usize,
    tol: &GrowthTolerances,
) -> Verdict {
    if sample_count < min_samples || running_sups.is_empty() {
        return Verdict::Inconclusive;
    }
    let base = match running_sups.iter().find(|&&v| v > 0.0) {
        Some(&v) => v,
        None => return Verdict::Pass, // identically zero seminorm
    };
    let last = *running_sups.last().unwrap();
    if last / base <= tol.stabilization {
        return Verdict::Pass;
    }
    let k = running_sups.len();
    let w = tol.window_steps.min(k - 1);
    let tail = &running_sups[k - 1 - w..];
    if tail[0] <= 0.0 {
        return Verdict::Inconclusive;
    }
    let tail_growth = last / tail[0];
    if tail_growth <= tol.stabilization {
        return Verdict::Pass;
    }
    if w >= tol.window_steps
        && tail_growth >= tol.window_total
        && tail.windows(2).all(|p| p[1] / p[0] > tol.step)
    {
        return Verdict::Fail;
    }
    Verdict::Inconclusive
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_exact_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
        let fit = linear_fit(&pts).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 3.0).abs() < 1e-12);
        assert!((fit.correlation + 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_fit_recovers_power_law() {
        let pts: Vec<(f64, f64)> = (1..20)
            .map(|i| {
                let x = 1.5f64.powi(i);
                (x, 4.0 * x.powf(-1.5))
            })
            .collect();
        let fit = log2_fit(&pts).unwrap();
        assert!((fit.slope + 1.5).abs() < 1e-10);
        assert!((fit.intercept - 2.0).abs() < 1e-10); // log2(4)
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        assert!(linear_fit(&[(1.0, 2.0)]).is_err());
        assert!(linear_fit(&[(1.0, 2.0), (1.0, 3.0)]).is_err());
    }

    #[test]
    fn verdict_stable_sequence_passes() {
        let seq = [1.0, 1.2, 1.3, 1.3, 1.3];
        assert_eq!(
            growth_verdict(&seq, 1000, 10, &GrowthTolerances::default()),
            Verdict::Pass
        );
    }

    #[test]
    fn verdict_grower_fails() {
        // sqrt(2) per doubling: total 2x after 2 steps, window of 6.
        let seq: Vec<f64> = (0..8).map(|i| 2f64.powf(i as f64 / 2.0)).collect();
        assert_eq!(
            growth_verdict(&seq, 1000, 10, &GrowthTolerances::default()),
            Verdict::Fail
        );
    }

    #[test]
    fn verdict_zero_sequence_passes() {
        assert_eq!(
            growth_verdict(&[0.0, 0.0, 0.0], 1000, 10, &GrowthTolerances::default()),
            Verdict::Pass
        );
    }

    #[test]
    fn verdict_insufficient_samples() {
        assert_eq!(
            growth_verdict(&[1.0, 1.0], 5, 10, &GrowthTolerances::default()),
            Verdict::Inconclusive
        );
    }

    #[test]
    fn verdict_leading_zero_boxes_use_first_positive_base() {
        let seq = [0.0, 0.0, 2.0, 2.5, 2.6];
        assert_eq!(
            growth_verdict(&seq, 1000, 10, &GrowthTolerances::default()),
            Verdict::Pass
        );
    }

    #[test]
    fn overall_verdict_priority() {
        use Verdict::*;
        assert_eq!(overall_verdict([Pass, Pass]), Pass);
        assert_eq!(overall_verdict([Pass, Inconclusive]), Inconclusive);
        assert_eq!(overall_verdict([Inconclusive, Fail, Pass]), Fail);
        assert_eq!(overall_verdict([]), Pass);
    }
}
