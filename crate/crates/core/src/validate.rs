//! Self-checks run by the `validate` command.
//!
//! `Quick` covers invariants that finish in well under a second. `Full` adds
//! the exact 3x3 Boltzmann comparison and synthetic renewal recovery.

use std::time::Instant;

use serde::Serialize;

use crate::curve::{find_extremum, fit_power_law, ExtremumKind, SplineModel};
use crate::model::rng::{index_below, seeded};
use crate::model::{
    build_neighbor_table, flip_probability, sweep, update_site, Kernel, ModelParams, SpinState,
};
use crate::renewal::{estimate, synthetic_series};

/// Total-variation bound for the 3x3 Boltzmann comparison.
pub const GIBBS_TV_BOUND: f64 = 0.02;
pub const GIBBS_BETA: f64 = 0.3;
pub const GIBBS_SWEEPS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Quick,
    Full,
}

/// Deliberate defects for negative-control runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Offsets the cached spin sum during the cache check.
    CorruptSpinCache,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationSummary {
    pub level: &'static str,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl ValidationSummary {
    pub fn failed(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn timed(name: &'static str, f: impl FnOnce() -> (bool, String)) -> CheckResult {
    let t = Instant::now();
    let (passed, detail) = f();
    CheckResult {
        name,
        passed,
        detail,
        seconds: t.elapsed().as_secs_f64(),
    }
}

fn check_flip_probability() -> (bool, String) {
    let mut worst: f64 = 0.0;
    let mut monotone = true;
    for bi in 1..=40 {
        let beta = bi as f64 * 0.05;
        let mut prev = 0.0;
        for hi in -160..=160 {
            let h = hi as f64 * 0.05;
            let p = flip_probability(h, beta);
            worst = worst.max((p + flip_probability(-h, beta) - 1.0).abs());
            if 2.0 * beta * h.abs() < 30.0 && p <= prev {
                monotone = false;
            }
            prev = p;
        }
    }
    (
        worst <= 2.0 * f64::EPSILON && monotone,
        format!("max |p(h)+p(-h)-1| = {worst:e}, monotone = {monotone}"),
    )
}

fn check_neighbor_tables() -> (bool, String) {
    let bad: Vec<usize> = (3..=16)
        .filter(|&s| !build_neighbor_table(s).map(|t| t.check_invariants()).unwrap_or(false))
        .collect();
    (bad.is_empty(), format!("sides 3..=16, failing: {bad:?}"))
}

fn check_spin_cache(fault: Fault) -> (bool, String) {
    let params = ModelParams::new(6.0, 0.5, 8).expect("valid");
    let table = build_neighbor_table(8).expect("valid");
    let mut rng = seeded(7);
    let mut state = SpinState::random(64, &mut rng);
    let mut steps = 0;
    for step in 0..20_000 {
        let site = index_below(&mut rng, 64);
        update_site(&mut state, site, &params, &table, &mut rng);
        if fault == Fault::CorruptSpinCache && step == 10_000 {
            state.corrupt_cache(2);
        }
        steps += 1;
        if !state.cache_consistent() {
            return (false, format!("spin_sum cache diverged after {steps} updates"));
        }
    }
    (true, format!("{steps} random updates, cache consistent"))
}

fn check_kernel_equivalence() -> (bool, String) {
    let params = ModelParams::new(5.0, 0.4, 9).expect("valid");
    let kernel = Kernel::new(params).expect("valid");
    let table = build_neighbor_table(9).expect("valid");
    let init = SpinState::random(81, &mut seeded(3));
    let (mut a, mut b) = (init.clone(), init);
    let (mut ra, mut rb) = (seeded(4), seeded(4));
    for t in 0..500 {
        kernel.sweep(&mut a, &mut ra);
        sweep(&mut b, &params, &table, &mut rb);
        if a != b {
            return (false, format!("tabulated and direct sweeps differ at sweep {t}"));
        }
    }
    (true, "500 sweeps bit-identical".into())
}

fn check_spline() -> (bool, String) {
    let xs: Vec<f64> = (2..=8).map(f64::from).collect();
    let f = |a: f64| (a - 6.0).powi(2) + 3.0;
    let Ok(s) = SplineModel::new(xs.clone(), xs.iter().map(|&a| f(a)).collect()) else {
        return (false, "spline construction failed".into());
    };
    let interp = xs.iter().map(|&a| (s.eval(a) - f(a)).abs()).fold(0.0, f64::max);
    let e = find_extremum(&s, ExtremumKind::Min);
    let ok = interp < 1e-12 && (e.location - 6.0).abs() < 0.05 && e.interior;
    (ok, format!("knot error {interp:e}, minimum at {:.6}", e.location))
}

fn check_power_law() -> (bool, String) {
    let pairs: Vec<(f64, f64)> = [0.2f64, 0.25, 1.0 / 3.0, 0.5]
        .iter()
        .map(|&b| (b, 7.0 * b.powf(2.0 / 3.0)))
        .collect();
    match fit_power_law(&pairs) {
        Ok(fit) => {
            let err = (fit.exponent - 2.0 / 3.0).abs();
            (err < 1e-10, format!("exponent error {err:e}"))
        }
        Err(e) => (false, e.to_string()),
    }
}

fn check_renewal_identity() -> (bool, String) {
    let s = match synthetic_series(0.05, 0.1, 1000, &mut seeded(11)) {
        Ok(s) => s,
        Err(e) => return (false, e.to_string()),
    };
    match estimate(&s) {
        Ok(e) => {
            let (a, b) = (e.renewal_identity_error(), e.steady_state_error());
            (a <= 1e-12 && b <= 4.0 * f64::EPSILON, format!("renewal {a:e}, steady-state {b:e}"))
        }
        Err(e) => (false, e.to_string()),
    }
}

/// Exact Boltzmann distribution of the 3x3 torus at `alpha = 0`.
pub fn gibbs_distribution_3x3(beta: f64) -> Vec<f64> {
    let table = build_neighbor_table(3).expect("valid");
    let mut bonds = Vec::new();
    for i in 0..9 {
        for &j in table.neighbors(i) {
            if (j as usize) > i {
                bonds.push((i, j as usize));
            }
        }
    }
    let spin = |c: usize, i: usize| if c >> i & 1 == 1 { 1.0 } else { -1.0 };
    let weights: Vec<f64> = (0..512usize)
        .map(|c| {
            let coupling: f64 = bonds.iter().map(|&(i, j)| spin(c, i) * spin(c, j)).sum();
            (beta * coupling).exp()
        })
        .collect();
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / z).collect()
}

/// Empirical configuration histogram of the 3x3 kernel at `alpha = 0`.
pub fn empirical_distribution_3x3(beta: f64, n_sweeps: u64, seed: u64) -> Vec<f64> {
    let kernel = Kernel::new(ModelParams::new(0.0, beta, 3).expect("valid")).expect("valid");
    let mut rng = seeded(seed);
    let mut state = SpinState::random(9, &mut rng);
    let mut counts = vec![0u64; 512];
    kernel.run_with(&mut state, &mut rng, 1000, n_sweeps, |_, s| {
        counts[s.config_index()] += 1
    });
    counts.iter().map(|&c| c as f64 / n_sweeps as f64).collect()
}

/// Averages each configuration with its global spin flip.
pub fn flip_symmetrized(p: &[f64]) -> Vec<f64> {
    let n = p.len();
    (0..n).map(|c| 0.5 * (p[c] + p[n - 1 - c])).collect()
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn check_gibbs() -> (bool, String) {
    let exact = gibbs_distribution_3x3(GIBBS_BETA);
    let empirical = empirical_distribution_3x3(GIBBS_BETA, GIBBS_SWEEPS, 2718);
    let tv = total_variation(&exact, &empirical);
    let sym = flip_symmetrized(&empirical);
    let up: f64 = (0..512usize).filter(|c| c.count_ones() >= 5).map(|c| empirical[c]).sum();
    (
        tv <= GIBBS_TV_BOUND,
        format!(
            "TV distance {tv:.5} over 512 states (bound {GIBBS_TV_BOUND}); \
             flip-symmetrized TV {:.5}; majority-up mass {up:.4}",
            total_variation(&exact, &sym)
        ),
    )
}

fn check_synthetic_recovery() -> (bool, String) {
    let (r_ord, r_dis) = (0.01, 0.02);
    let s = match synthetic_series(r_ord, r_dis, 10_000, &mut seeded(31_415)) {
        Ok(s) => s,
        Err(e) => return (false, e.to_string()),
    };
    match estimate(&s) {
        Ok(e) => {
            let n = (e.n_cycles as f64).sqrt();
            let z_ord = (e.lambda_ord - r_ord) / (e.lambda_ord / n);
            let z_dis = (e.lambda_dis - r_dis) / (e.lambda_dis / n);
            let analytic = 1.0 / (r_ord * (r_dis / (r_ord + r_dis)));
            let rel = (e.t_renew - analytic).abs() / analytic;
            (
                z_ord.abs() <= 3.0 && z_dis.abs() <= 3.0 && rel <= 0.02,
                format!("z_ord {z_ord:.2}, z_dis {z_dis:.2}, t_renew {:.2} vs {analytic}", e.t_renew),
            )
        }
        Err(e) => (false, e.to_string()),
    }
}

pub fn run(level: Level, fault: Fault) -> ValidationSummary {
    let mut checks = vec![
        timed("flip_probability", check_flip_probability),
        timed("neighbor_table", check_neighbor_tables),
        timed("spin_cache", || check_spin_cache(fault)),
        timed("kernel_equivalence", check_kernel_equivalence),
        timed("spline_extremum", check_spline),
        timed("power_law", check_power_law),
        timed("renewal_identity", check_renewal_identity),
    ];
    if level == Level::Full {
        checks.push(timed("gibbs_3x3", check_gibbs));
        checks.push(timed("synthetic_renewal", check_synthetic_recovery));
    }
    ValidationSummary {
        level: match level {
            Level::Quick => "quick",
            Level::Full => "full",
        },
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_level_passes() {
        let s = run(Level::Quick, Fault::None);
        assert!(s.passed, "{:?}", s.failed().collect::<Vec<_>>());
        assert_eq!(s.checks.len(), 7);
    }

    #[test]
    fn corrupted_cache_is_reported() {
        let s = run(Level::Quick, Fault::CorruptSpinCache);
        assert!(!s.passed);
        let failed: Vec<_> = s.failed().map(|c| c.name).collect();
        assert_eq!(failed, vec!["spin_cache"]);
    }

    #[test]
    fn gibbs_distribution_is_normalised_and_symmetric() {
        let p = gibbs_distribution_3x3(0.3);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // Global spin flip maps configuration c to its complement.
        for c in 0..512 {
            assert!((p[c] - p[511 - c]).abs() < 1e-15);
        }
        assert!(p[0] > p[0b1_0101_0101]);
    }
}
