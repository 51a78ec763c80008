//! Scratch calibration driver: runs every experiment at its default config
//! and prints verdicts, fits, and timings.

use std::time::Instant;

use prodsym::estimates::*;

fn show(name: &str, start: Instant, report: &EstimateReport) {
    let el = start.elapsed().as_secs_f64();
    println!("== {name}  [{el:.1}s]  verdict={:?}", report.verdict);
    if let Some(fit) = &report.fit {
        println!(
            "   fit slope={:.4} intercept={:.4} corr={:.4} n={}",
            fit.slope, fit.intercept, fit.correlation, fit.count
        );
    }
    for n in &report.notes {
        println!("   note: {n}");
    }
    let mut shown = 0;
    for s in &report.samples {
        if s.label.contains("slope")
            || s.label.contains("constant")
            || s.label.contains("growth")
            || s.label.contains("p2")
            || s.label.contains("max_ratio")
            || s.label.contains("median")
            || s.label.contains("quadrature")
            || s.label.contains("diff_max")
            || s.label.contains("summary")
            || s.label.contains("origin")
            || s.label.contains("region")
        {
            println!("   sample {} @{} = {:.6e}", s.label, s.parameter, s.value);
            shown += 1;
            if shown > 40 {
                break;
            }
        }
    }
}

fn main() {
    let which: Vec<String> = std::env::args().skip(1).collect();
    let want = |n: &str| which.is_empty() || which.iter().any(|w| w == n);

    if want("decay") {
        let t = Instant::now();
        let r = decay_experiment(&DecayConfig::default()).unwrap();
        show("decay rho=1/2", t, &r);

        let t = Instant::now();
        let cfg = DecayConfig {
            rho: 0.0,
            ..DecayConfig::default()
        };
        let r = decay_experiment(&cfg).unwrap();
        show("decay rho=0", t, &r);
    }

    if want("decay0detail") {
        let cfg = DecayConfig {
            rho: 0.0,
            ..DecayConfig::default()
        };
        let r = decay_experiment(&cfg).unwrap();
        println!("== decay rho=0 all norm samples");
        for s in &r.samples {
            if s.label.starts_with("norm") {
                println!(
                    "   d={} log2={:+.3}  {}",
                    s.parameter,
                    s.value.log2(),
                    s.label
                );
            }
        }
    }

    if want("hprobe") {
        // Axis rows of the vector kernel via 1D marginals:
        //   Omega(x,0) row: M(xi) = (1/d^2) Q(d|xi|),  vs r^-3
        //   Omega(0,y) row: M(eta) = (1/d) Q(d^2|eta|), vs r^-1.5
        // where Q(a) = int annulus(sqrt(a^2+b^2)) db.
        use num_complex::Complex64;
        use prodsym::cutoffs::{analytic_step, CutoffProfile};
        use prodsym::layout::{inverse_dft, Domain, Field, ProductLayout};

        let prof = CutoffProfile::standard();
        let ann_tab = move |r: f64| prof.profile(r) - prof.profile(2.0 * r);
        let qstep = |s: f64| 1.0 - analytic_step(s - 1.0);
        let ann_smooth = move |r: f64| qstep(r) - qstep(2.0 * r);

        let marginal = |ann: &dyn Fn(f64) -> f64, a: f64| -> f64 {
            let bmax = (4.0 - a * a).max(0.0).sqrt();
            if bmax <= 0.0 {
                return 0.0;
            }
            let n = 512usize;
            let h = bmax / n as f64;
            let mut s = ann(a) + ann(a.hypot(bmax));
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * ann(a.hypot(i as f64 * h));
            }
            2.0 * s * h / 3.0
        };

        let scales: Vec<f64> = (-24..=14).map(|k| 2f64.powf(k as f64 / 2.0)).collect();
        let weight = std::f64::consts::LN_2 / 2.0;
        let grid = 16384usize;
        let hw = 2.0;
        let layout = ProductLayout::uniform(vec![1], 0.5, grid, hw).unwrap();
        let band = layout.nyquist(0);
        let dx = layout.physical_step(0);
        let dxi = 1.0 / (2.0 * hw);
        println!("1D band {band}, dx {dx}, dxi {dxi}");

        let anns: Vec<(&str, Box<dyn Fn(f64) -> f64>)> = vec![
            ("table", Box::new(ann_tab)),
            ("smooth", Box::new(ann_smooth)),
        ];
        for (pname, ann) in &anns {
            for (ray, exponent) in [("xray", 3.0), ("yray", 1.5)] {
                let mut acc = vec![0.0f64; grid];
                let mut used = 0;
                for &d in &scales {
                    // frequency argument scale: xray uses d*|xi|, yray d^2*|eta|
                    let fscale = if ray == "xray" { d } else { d * d };
                    let edge = 2.0 / fscale;
                    if edge > band {
                        continue; // clipped by the box: unfaithful
                    }
                    if edge < dxi {
                        continue; // no grid frequency in the shell
                    }
                    let norm = if ray == "xray" { d * d } else { d };
                    let table = Field::from_fn(layout.clone(), Domain::Frequency, |xi| {
                        Complex64::new(marginal(ann.as_ref(), fscale * xi[0].abs()) / norm, 0.0)
                    });
                    let mut row = inverse_dft(&table).unwrap();
                    let scale = layout.frequency_cell_volume() * (grid as f64).sqrt();
                    for v in row.samples_mut().iter_mut() {
                        *v *= scale;
                    }
                    for (a, v) in acc.iter_mut().zip(row.samples().iter()) {
                        *a += v.norm_sqr() * weight;
                    }
                    used += 1;
                }
                // octave maxima of sqrt(acc) for r in [0.01, 0.5]
                let mut peaks: Vec<(f64, f64)> = Vec::new();
                let (mut lo, w_hi) = (0.01f64, 0.5f64);
                while lo < w_hi {
                    let hi = (lo * 2.0).min(w_hi);
                    let mut best = (0.0f64, 0.0f64);
                    for i in 0..grid {
                        let x = (i as f64) * dx - hw;
                        if x >= lo && x < hi && acc[i].sqrt() > best.1 {
                            best = (x, acc[i].sqrt());
                        }
                    }
                    if best.1 > 0.0 {
                        peaks.push(best);
                    }
                    lo = hi;
                }
                print!("{pname} {ray}: {used} scales, peaks ");
                for (r, v) in &peaks {
                    print!("({r:.3},{:.2e}) ", v);
                }
                println!();
                // local slopes between consecutive peaks, vs exponent
                let mut slopes = Vec::new();
                for w in peaks.windows(2) {
                    let s = (w[1].1 / w[0].1).ln() / (w[1].0 / w[0].0).ln();
                    slopes.push(-s / exponent);
                }
                println!(
                    "{pname} {ray}: local slope ratios vs r^-{exponent}: {:?}",
                    slopes
                        .iter()
                        .map(|s| (s * 1000.0).round() / 1000.0)
                        .collect::<Vec<_>>()
                );
            }
        }
    }

    if want("maximal") {
        let t = Instant::now();
        let r = maximal_domination(&MaximalConfig::default()).unwrap();
        show("maximal", t, &r);
    }

    if want("maxdetail") {
        let r = maximal_domination(&MaximalConfig::default()).unwrap();
        println!("== maximal per-tuple ratios (mean over draws)");
        let mut by_tuple: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
        for s in &r.samples {
            if let Some(rest) = s.label.strip_prefix("ratio t=") {
                let t = rest.split(" draw=").next().unwrap().to_string();
                by_tuple.entry(t).or_default().push(s.value);
            }
        }
        for (t, vals) in &by_tuple {
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let mx = vals.iter().cloned().fold(0.0f64, f64::max);
            println!("   t={t}: mean {mean:.4} max {mx:.4}");
        }
    }

    if want("kernel") {
        let t = Instant::now();
        let r = kernel_size_fit(&KernelSizeConfig::default()).unwrap();
        show("kernel size", t, &r);
    }

    if want("cancel") {
        let t = Instant::now();
        let r = cancellation_experiment(&CancellationConfig::default()).unwrap();
        show("cancellation", t, &r);
    }

    if want("square") {
        let t = Instant::now();
        let r = square_l2_check(&SquareL2Config::default()).unwrap();
        show("square", t, &r);
    }

    if want("hormander") {
        let t = Instant::now();
        let r = hormander_condition_check(&HormanderConfig::default()).unwrap();
        show("hormander", t, &r);
    }

    if want("lp") {
        let t = Instant::now();
        let r = lp_ratio_experiment(&LpRatioConfig::default()).unwrap();
        show("lp ratios", t, &r);
    }

    if want("resolution") {
        let t = Instant::now();
        let r = resolution_sum_probe(&ResolutionConfig::default()).unwrap();
        show("resolution", t, &r);
    }

    if want("probe") {
        probe_axis_ray();
    }
}

// Local log-log slopes of the axis ray against the pure continuum envelope,
// per grid, to locate the resolved regime.
fn probe_axis_ray() {
    use num_complex::Complex64;
    use prodsym::cutoffs::analytic_step;
    use prodsym::operators::symbol_frequency_table;
    use prodsym::symbols::{SymbolFamily, SymbolSpec};
    use prodsym::{inverse_dft, ProductLayout};

    for &(grid, halfwidth) in &[(512usize, 1.0f64), (1024, 1.0), (2048, 1.0), (2048, 2.0)] {
        let t = Instant::now();
        let layout = ProductLayout::uniform(vec![1, 1], 0.5, grid, halfwidth).unwrap();
        let bound = SymbolSpec {
            family: SymbolFamily::ProductImaginaryOrder { taus: vec![1.0, 1.0] },
            analytic_derivatives: true,
        }
        .bind(&layout)
        .unwrap();
        let mut table = symbol_frequency_table(&bound, &layout, &[0.0, 0.0]);
        let ny = layout.nyquist(0).min(layout.nyquist(1));
        {
            let lay = layout.clone();
            let mut xi = vec![0.0; 2];
            for (idx, v) in table.samples_mut().indexed_iter_mut() {
                use ndarray::Dimension;
                lay.frequency_point(idx.slice(), &mut xi);
                let r = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
                *v *= analytic_step(2.0 - 2.0 * r / ny);
            }
        }
        let mut kernel = inverse_dft(&table).unwrap();
        let scale = layout.frequency_cell_volume() * (layout.total_points() as f64).sqrt();
        for v in kernel.samples_mut().iter_mut() {
            *v *= scale;
        }
        let g = layout.grid_points()[0];
        let c = g / 2;
        let z1 = layout.physical_axis_values(0).to_vec();
        println!(
            "probe grid={grid} L={halfwidth} ny={ny} dx={:.5} [{:.2}s]",
            layout.physical_step(0),
            t.elapsed().as_secs_f64()
        );
        // (name, samples as (|z|, |Omega|), envelope of |z|)
        let mut rays: Vec<(&str, Vec<(f64, f64)>, Box<dyn Fn(f64) -> f64>)> = Vec::new();
        let mut axis: Vec<(f64, f64)> = Vec::new();
        let mut diag: Vec<(f64, f64)> = Vec::new();
        for j in 0..g {
            if z1[j] > 0.0 {
                axis.push((z1[j], kernel.samples()[[j, c]].norm()));
                let r = z1[j] * std::f64::consts::SQRT_2;
                diag.push((r, kernel.samples()[[j, j]].norm()));
            }
        }
        rays.push((
            "axis",
            axis,
            Box::new(|r: f64| (r + r * r).recip() * (r * r).recip()),
        ));
        let s2 = std::f64::consts::SQRT_2.recip();
        rays.push((
            "diag",
            diag,
            Box::new(move |r: f64| (s2 * r + r * r).powi(-2)),
        ));
        for (name, mut ray, env) in rays {
            ray.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let r_hi = 0.5 * halfwidth * if name == "diag" { std::f64::consts::SQRT_2 } else { 1.0 };
            let mut peaks: Vec<(f64, f64)> = Vec::new();
            let mut hi = r_hi;
            while hi > 2.0 * layout.physical_step(0) {
                let lo = hi / 2.0;
                let mut best: Option<(f64, f64)> = None;
                for &(r, v) in &ray {
                    if r > lo && r <= hi && best.map_or(true, |b| v > b.1) {
                        best = Some((r, v));
                    }
                }
                if let Some(p) = best {
                    peaks.push(p);
                }
                hi = lo;
            }
            peaks.reverse();
            for w in peaks.windows(2) {
                let (r0, v0) = w[0];
                let (r1, v1) = w[1];
                let s = (v1.ln() - v0.ln()) / (env(r1).ln() - env(r0).ln());
                println!(
                    "   {name} r=[{:.4},{:.4}]  local slope vs pure env = {:.3}   |Omega|={:.3e}",
                    r0, r1, s, v0
                );
            }
        }
        let _ = Complex64::new(0.0, 0.0);
    }
}
