//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! The full-grid stores live in `target/acceptance` (override with
//! `SPINMARKET_ACCEPTANCE_DIR`) and are resumed, so only missing runs are
//! simulated. A cold start runs the default grid twice.

use std::path::PathBuf;
use std::time::Instant;

use rand::SeedableRng;
use rand_distr::{Distribution, Exp};
use spinmarket_core::analysis::{analyze, AnalysisOptions, AnalysisReport};
use spinmarket_core::curve::{find_extremum, fit_power_law, ExtremumKind, SplineModel};
use spinmarket_core::model::rng::{seeded, SimRng};
use spinmarket_core::model::{Kernel, ModelParams, SpinState};
use spinmarket_core::phase::{Phase, Sojourn, SojournSeries};
use spinmarket_core::renewal::{estimate, RenewalEstimate};
use spinmarket_core::sweep::{execute, plan, ResultStore, SweepConfig};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn acceptance_dir() -> PathBuf {
    std::env::var_os("SPINMARKET_ACCEPTANCE_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../target/acceptance"))
}

// Exact Boltzmann weights for the 3x3 torus, with couplings taken from
// lattice coordinates: sites interact iff their wrapped Chebyshev distance is 1.
fn boltzmann_3x3(beta: f64) -> Vec<f64> {
    let coupled = |i: usize, j: usize| {
        let wrap = |a: usize, b: usize| {
            let d = a.abs_diff(b);
            d.min(3 - d)
        };
        i != j && wrap(i / 3, j / 3).max(wrap(i % 3, j % 3)) == 1
    };
    let weights: Vec<f64> = (0..512usize)
        .map(|c| {
            let s = |i: usize| if c >> i & 1 == 1 { 1.0 } else { -1.0 };
            let mut e = 0.0;
            for i in 0..9 {
                for j in i + 1..9 {
                    if coupled(i, j) {
                        e -= s(i) * s(j);
                    }
                }
            }
            (-beta * e).exp()
        })
        .collect();
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / z).collect()
}

fn criterion_1() -> Verdict {
    let (beta, sweeps) = (0.3, 1_000_000u64);
    let exact = boltzmann_3x3(beta);
    let kernel = Kernel::new(ModelParams::new(0.0, beta, 3).unwrap()).unwrap();
    let mut rng = seeded(2718);
    let mut state = SpinState::random(9, &mut rng);
    let mut counts = vec![0u64; 512];
    kernel.run_with(&mut state, &mut rng, 1000, sweeps, |_, s| {
        let c = s.spins().iter().enumerate().filter(|(_, &v)| v == 1).fold(0, |a, (i, _)| a | 1 << i);
        counts[c] += 1
    });
    let p: Vec<f64> = counts.iter().map(|&c| c as f64 / sweeps as f64).collect();
    let tv = 0.5 * exact.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum::<f64>();
    let sym_tv = 0.5
        * (0..512)
            .map(|c| (exact[c] - 0.5 * (p[c] + p[511 - c])).abs())
            .sum::<f64>();
    let up: f64 = (0..512usize).filter(|c| c.count_ones() >= 5).map(|c| p[c]).sum();
    verdict(
        tv <= 0.02,
        format!("TV {tv:.4} (<= 0.02); flip-symmetrized TV {sym_tv:.4}, majority-up mass {up:.4}"),
    )
}

fn criterion_2(stores: &[&ResultStore], report: &AnalysisReport) -> Verdict {
    let mut estimates: Vec<RenewalEstimate> = Vec::new();
    for store in stores {
        for r in store.records() {
            estimates.extend(r.outcome.estimate().cloned());
            estimates.extend(r.variants.iter().filter_map(|v| v.outcome.estimate().cloned()));
        }
    }
    estimates.extend(report.curves.iter().flat_map(|c| c.points.iter()).map(|p| RenewalEstimate {
        pi_ord: p.pi_ord,
        lambda_ord: p.lambda_ord,
        lambda_dis: p.lambda_dis,
        t_renew: p.t_renew,
        n_cycles: p.n_cycles,
        ord_total: 0,
        dis_total: 0,
        ks_ord: 0.0,
        ks_dis: 0.0,
    }));
    let pooled_means: Vec<f64> = report.curves.iter().flat_map(|c| c.points.iter()).map(|p| p.mean_cycle).collect();
    let n_pooled = pooled_means.len();
    let n_raw = estimates.len() - n_pooled;

    let (mut worst_renewal, mut worst_steady) = (0.0f64, 0.0f64);
    for (k, e) in estimates.iter().enumerate() {
        let mean = if k < n_raw {
            (e.ord_total + e.dis_total) as f64 / e.n_cycles as f64
        } else {
            pooled_means[k - n_raw]
        };
        worst_renewal = worst_renewal.max(((e.t_renew - mean) / mean).abs());
        let implied = e.lambda_dis / (e.lambda_ord + e.lambda_dis);
        worst_steady = worst_steady.max(((e.pi_ord - implied) / e.pi_ord).abs());
    }
    let steady_tol = 4.0 * f64::EPSILON;
    verdict(
        !estimates.is_empty() && worst_renewal <= 1e-12 && worst_steady <= steady_tol,
        format!(
            "{} estimates ({n_raw} per-run, {n_pooled} pooled); max renewal rel. error {worst_renewal:.2e} (<= 1e-12), \
             max steady-state rel. error {worst_steady:.2e} (<= {steady_tol:.1e})",
            estimates.len()
        ),
    )
}

fn criterion_3() -> Verdict {
    let (r_ord, r_dis, cycles) = (0.01, 0.02, 10_000);
    let mut rng = SimRng::seed_from_u64(4242);
    let (d_ord, d_dis) = (Exp::<f64>::new(r_ord).unwrap(), Exp::<f64>::new(r_dis).unwrap());
    let mut sojourns = Vec::with_capacity(2 * cycles);
    let mut start = 0;
    for _ in 0..cycles {
        for (phase, d) in [(Phase::Ordered, &d_ord), (Phase::Disordered, &d_dis)] {
            let duration = d.sample(&mut rng).round().max(1.0) as usize;
            sojourns.push(Sojourn { phase, start, duration });
            start += duration;
        }
    }
    let e = estimate(&SojournSeries::from_sojourns(sojourns).unwrap()).unwrap();
    let n = (e.n_cycles as f64).sqrt();
    let z_ord = (e.lambda_ord - r_ord) / (r_ord / n);
    let z_dis = (e.lambda_dis - r_dis) / (r_dis / n);
    let analytic = 1.0 / (r_ord * r_dis / (r_ord + r_dis));
    let rel = (e.t_renew - analytic).abs() / analytic;
    verdict(
        z_ord.abs() <= 3.0 && z_dis.abs() <= 3.0 && rel <= 0.02,
        format!(
            "lambda_ord {:.5} (z {z_ord:+.2}), lambda_dis {:.5} (z {z_dis:+.2}), t_renew {:.2} vs {analytic:.0} (rel {rel:.4})",
            e.lambda_ord, e.lambda_dis, e.t_renew
        ),
    )
}

fn criterion_4() -> Verdict {
    let knots: Vec<f64> = (2..=8).map(f64::from).collect();
    let values = knots.iter().map(|a| (a - 6.0) * (a - 6.0) + 3.0).collect();
    let spline = SplineModel::new(knots, values).unwrap();
    let m = find_extremum(&spline, ExtremumKind::Min);
    let pairs: Vec<(f64, f64)> = [0.2, 0.25, 0.333333333333, 0.5]
        .iter()
        .map(|&b: &f64| (b, (1.5f64.ln() + (2.0 / 3.0) * b.ln()).exp()))
        .collect();
    let fit = fit_power_law(&pairs).unwrap();
    let exp_err = (fit.exponent - 2.0 / 3.0).abs();
    verdict(
        (m.location - 6.0).abs() <= 0.05 && exp_err <= 1e-10,
        format!("spline minimum at {:.4} (|d| <= 0.05); exponent error {exp_err:.1e} (<= 1e-10)", m.location),
    )
}

// True iff the extreme measured value is at neither end of the curve, so a
// spline extremum is backed by the data and not by interpolation overshoot.
fn knot_supported(values: &[f64], kind: ExtremumKind) -> bool {
    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| match kind {
            ExtremumKind::Min => a.1.total_cmp(b.1),
            ExtremumKind::Max => b.1.total_cmp(a.1),
        })
        .map(|(i, _)| i);
    matches!(best, Some(i) if i > 0 && i + 1 < values.len())
}

fn criterion_5(report: &AnalysisReport) -> Verdict {
    let Some(c) = report.curves.iter().find(|c| c.side == 16 && (c.beta - 0.5).abs() < 1e-9) else {
        return verdict(false, "no (beta 0.5, side 16) curve".into());
    };
    let seeds = c.points.iter().map(|p| p.seeds_used).min().unwrap_or(0);
    let pi: Vec<f64> = c.points.iter().map(|p| p.pi_ord).collect();
    let lambda: Vec<f64> = c.points.iter().map(|p| p.lambda_ord).collect();
    let (pi_data, lambda_data) = (knot_supported(&pi, ExtremumKind::Min), knot_supported(&lambda, ExtremumKind::Max));
    match (&c.pi_ord_min, &c.lambda_ord_max) {
        (Some(p), Some(l)) => {
            let gap = (p.location - l.location).abs();
            verdict(
                p.interior && l.interior && pi_data && lambda_data && gap <= 1.0 && seeds >= 5,
                format!(
                    "pi_ord min at {:.3} (interior {}, data-backed {pi_data}), lambda_ord max at {:.3} \
                     (interior {}, data-backed {lambda_data}), gap {gap:.3} (<= 1.0), {} of 7 points, min seeds {seeds}",
                    p.location,
                    p.interior,
                    l.location,
                    l.interior,
                    c.points.len()
                ),
            )
        }
        _ => verdict(false, format!("curve has only {} usable points", c.points.len())),
    }
}

fn criterion_6(report: &AnalysisReport) -> Verdict {
    let supported = |c: &spinmarket_core::analysis::CurveReport| {
        let t: Vec<f64> = c.points.iter().map(|p| p.t_renew).collect();
        knot_supported(&t, ExtremumKind::Min)
    };
    let spline_interior = report
        .curves
        .iter()
        .filter(|c| c.t_renew_min.as_ref().is_some_and(|m| m.interior))
        .count();
    let interior = report
        .curves
        .iter()
        .filter(|c| c.t_renew_min.as_ref().is_some_and(|m| m.interior) && supported(c))
        .count();
    let locations: Vec<String> = report
        .curves
        .iter()
        .map(|c| match &c.t_renew_min {
            Some(m) => format!(
                "{:.2}{}",
                m.location,
                if !m.interior {
                    "(edge)"
                } else if !supported(c) {
                    "(overshoot)"
                } else {
                    ""
                }
            ),
            None => "-".into(),
        })
        .collect();
    let star = report.alpha_star.as_ref();
    let in_range = star.is_some_and(|a| (5.0..=7.2).contains(&a.mean));
    verdict(
        report.curves.len() == 8 && interior == 8 && in_range,
        format!(
            "alpha* {} (in [5.0, 7.2]); interior T_renew minima {interior}/8 data-backed, {spline_interior}/8 by spline [{}]",
            star.map_or("none".into(), |a| format!("{:.3} +/- {:.3}", a.mean, a.half_width)),
            locations.join(", ")
        ),
    )
}

fn criterion_7(report: &AnalysisReport) -> Verdict {
    let mut ok = report.scaling.len() == 2;
    let mut parts = Vec::new();
    for s in &report.scaling {
        match &s.fit {
            Some(f) => {
                ok &= (0.45..=0.90).contains(&f.exponent) && f.r_squared >= 0.9 && s.minima.len() == 4;
                parts.push(format!(
                    "side {}: exponent {:.3}, r2 {:.3}, {} temperatures",
                    s.side,
                    f.exponent,
                    f.r_squared,
                    s.minima.len()
                ));
            }
            None => {
                ok = false;
                parts.push(format!("side {}: no fit ({} minima)", s.side, s.minima.len()));
            }
        }
    }
    match &report.prefactor {
        Some(p) => {
            ok &= (1.1..=2.0).contains(&p.ratio);
            parts.push(format!("prefactor ratio {}/{} = {:.3} (in [1.1, 2.0])", p.large_side, p.small_side, p.ratio));
        }
        None => {
            ok = false;
            parts.push("no prefactor ratio".into());
        }
    }
    verdict(ok, parts.join("; "))
}

fn criterion_8(a: &str, b: &str, same_records: bool) -> Verdict {
    verdict(
        a == b && same_records,
        format!(
            "workers 1 vs 4: reports {} ({} bytes), record sets {}",
            if a == b { "byte-identical" } else { "differ" },
            a.len(),
            if same_records { "identical" } else { "differ" }
        ),
    )
}

fn criterion_9(report: &AnalysisReport) -> Verdict {
    let rows: Vec<String> = report
        .sensitivity
        .iter()
        .map(|r| {
            format!(
                "({:.2},{:.2}) {}",
                r.theta_high,
                r.theta_low,
                match (&r.alpha_star, r.shift) {
                    (Some(a), Some(s)) => format!("alpha* {:.3} shift {s:+.3}", a.mean),
                    (Some(a), None) => format!("alpha* {:.3}", a.mean),
                    _ if r.available => format!("no alpha* ({} interior minima)", r.interior_minima),
                    _ => "unavailable".into(),
                }
            )
        })
        .collect();
    let documented = report.sensitivity.len() == 4 && report.sensitivity.iter().all(|r| r.available);
    verdict(documented, format!("{} rows: {}", rows.len(), rows.join("; ")))
}

fn fill(store_path: &std::path::Path, cfg: &SweepConfig, workers: usize) -> ResultStore {
    let p = plan(cfg).unwrap();
    let mut store = ResultStore::open(store_path).unwrap();
    let t = Instant::now();
    let s = execute(&p, &mut store, workers, |r| {
        eprintln!("  [{}] run {}/{} side {} beta {} alpha {}", store_path.display(), r.run_index + 1, p.runs.len(), r.side, r.beta, r.alpha)
    })
    .unwrap();
    assert!(s.io_failures.is_empty(), "store writes failed: {:?}", s.io_failures);
    eprintln!(
        "  {}: {} stored, {} simulated in {:.0}s",
        store_path.display(),
        s.skipped,
        s.executed,
        t.elapsed().as_secs_f64()
    );
    store
}

fn main() {
    let dir = acceptance_dir();
    let cfg = SweepConfig::default();
    let workers: usize = std::env::var("SPINMARKET_ACCEPTANCE_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(4);

    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    let t = Instant::now();
    results.push((1, "kernel vs exact Boltzmann, 3x3", criterion_1()));
    results.push((3, "synthetic renewal recovery", criterion_3()));
    results.push((4, "spline minimum and power-law exponent", criterion_4()));
    eprintln!("  fast criteria in {:.1}s", t.elapsed().as_secs_f64());

    let store_a = fill(&dir.join("store-w1.jsonl"), &cfg, 1);
    let store_b = fill(&dir.join("store-w4.jsonl"), &cfg, workers);
    let options = AnalysisOptions::default();
    let report_a = analyze(store_a.records(), &options).unwrap();
    let report_b = analyze(store_b.records(), &options).unwrap();
    let (json_a, json_b) = (report_a.to_json().unwrap(), report_b.to_json().unwrap());
    std::fs::write(dir.join("report.json"), &json_a).unwrap();
    let records = |s: &ResultStore| s.records().map(|r| r.without_timing()).collect::<Vec<_>>();
    let same_records = records(&store_a) == records(&store_b);

    results.push((2, "renewal and steady-state identities", criterion_2(&[&store_a, &store_b], &report_a)));
    results.push((5, "pi_ord minimum and lambda_ord maximum at beta 0.5", criterion_5(&report_a)));
    results.push((6, "critical coupling alpha*", criterion_6(&report_a)));
    results.push((7, "T_renew(alpha*) temperature scaling", criterion_7(&report_a)));
    results.push((8, "end-to-end determinism", criterion_8(&json_a, &json_b, same_records)));
    results.push((9, "detector sensitivity table", criterion_9(&report_a)));
    results.sort_by_key(|r| r.0);

    println!();
    for (n, name, v) in &results {
        println!("criterion {n}: {} {name}: {}", if v.passed { "PASS" } else { "FAIL" }, v.detail);
    }
    let failed = results.iter().filter(|r| !r.2.passed).count();
    println!("\n{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
