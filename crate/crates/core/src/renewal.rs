//! Two-state renewal quantities from complete ordered/disordered cycles.
//!
//! Rates are maximum-likelihood exponential rates (reciprocal mean sojourn).
//! With equal cycle counts the estimators satisfy the steady-state relation
//! `pi_ord = lambda_dis / (lambda_ord + lambda_dis)` and make the renewal period
//! `1 / (lambda_ord * pi_ord)` equal to the mean complete-cycle length.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::rng::unit_f64;
use crate::model::ModelParams;
use crate::phase::{DetectorConfig, Phase, Sojourn, SojournSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalEstimate {
    pub pi_ord: f64,
    pub lambda_ord: f64,
    pub lambda_dis: f64,
    pub t_renew: f64,
    pub n_cycles: usize,
    /// Total sweeps in complete ordered sojourns.
    pub ord_total: u64,
    /// Total sweeps in complete disordered sojourns.
    pub dis_total: u64,
    /// KS distance of ordered durations from an exponential with matched mean.
    pub ks_ord: f64,
    pub ks_dis: f64,
}

impl RenewalEstimate {
    fn from_totals(n_cycles: usize, ord_total: u64, dis_total: u64, ks_ord: f64, ks_dis: f64) -> Result<Self> {
        if n_cycles == 0 {
            return Err(Error::insufficient("no complete cycles to estimate from", 0));
        }
        let ord = ord_total as f64;
        let dis = dis_total as f64;
        let lambda_ord = n_cycles as f64 / ord;
        let pi_ord = ord / (ord + dis);
        let lambda_dis = lambda_ord * pi_ord / (1.0 - pi_ord);
        let t_renew = 1.0 / (lambda_ord * pi_ord);
        Ok(Self {
            pi_ord,
            lambda_ord,
            lambda_dis,
            t_renew,
            n_cycles,
            ord_total,
            dis_total,
            ks_ord,
            ks_dis,
        })
    }

    /// Mean complete-cycle length, `(ord_total + dis_total) / n_cycles`.
    pub fn mean_cycle(&self) -> f64 {
        (self.ord_total + self.dis_total) as f64 / self.n_cycles as f64
    }

    /// Relative error of `t_renew` against the mean cycle length.
    pub fn renewal_identity_error(&self) -> f64 {
        let mean = self.mean_cycle();
        ((self.t_renew - mean) / mean).abs()
    }

    /// Relative error of `pi_ord` against `lambda_dis / (lambda_ord + lambda_dis)`.
    pub fn steady_state_error(&self) -> f64 {
        let implied = self.lambda_dis / (self.lambda_ord + self.lambda_dis);
        ((self.pi_ord - implied) / self.pi_ord).abs()
    }
}

/// Rates, occupancy and renewal period of one trimmed series.
pub fn estimate(series: &SojournSeries) -> Result<RenewalEstimate> {
    if series.sojourns.is_empty() || series.n_cycles() == 0 {
        return Err(Error::insufficient(
            "sojourn series holds no complete cycle",
            series.raw_transitions,
        ));
    }
    if !series.is_well_formed() {
        return Err(Error::InvalidInput(
            "sojourn series must alternate with equal phase counts".into(),
        ));
    }
    let ord: Vec<usize> = series.durations(Phase::Ordered).collect();
    let dis: Vec<usize> = series.durations(Phase::Disordered).collect();
    RenewalEstimate::from_totals(
        series.n_cycles(),
        ord.iter().map(|&d| d as u64).sum(),
        dis.iter().map(|&d| d as u64).sum(),
        ks_exponential(&ord),
        ks_exponential(&dis),
    )
}

/// One run's sojourns tagged with the settings that produced them.
#[derive(Debug, Clone)]
pub struct TaggedSeries {
    pub params: ModelParams,
    pub detector: DetectorConfig,
    pub series: SojournSeries,
}

fn check_same_setup<'a>(mut tags: impl Iterator<Item = (&'a ModelParams, &'a DetectorConfig)>) -> Result<()> {
    let Some(first) = tags.next() else {
        return Err(Error::insufficient("nothing to pool", 0));
    };
    for other in tags {
        if other != first {
            return Err(Error::InvalidInput(format!(
                "cannot pool runs with different settings: {first:?} vs {other:?}"
            )));
        }
    }
    Ok(())
}

/// Concatenates sojourn samples from several seeds and estimates once.
pub fn pool(inputs: &[TaggedSeries]) -> Result<RenewalEstimate> {
    check_same_setup(inputs.iter().map(|t| (&t.params, &t.detector)))?;
    let mut sojourns = Vec::new();
    for t in inputs {
        sojourns.extend_from_slice(&t.series.sojourns);
    }
    let n_cycles: usize = inputs.iter().map(|t| t.series.n_cycles()).sum();
    if n_cycles == 0 {
        let raw = inputs.iter().map(|t| t.series.raw_transitions).sum();
        return Err(Error::insufficient("no complete cycles in any pooled series", raw));
    }
    let pick = |p| -> Vec<usize> {
        sojourns.iter().filter(|s| s.phase == p).map(|s| s.duration).collect()
    };
    let (ord, dis) = (pick(Phase::Ordered), pick(Phase::Disordered));
    RenewalEstimate::from_totals(
        n_cycles,
        ord.iter().map(|&d| d as u64).sum(),
        dis.iter().map(|&d| d as u64).sum(),
        ks_exponential(&ord),
        ks_exponential(&dis),
    )
}

/// Pools per-seed estimates through their sufficient statistics.
///
/// Rates, occupancy and `t_renew` are identical to [`pool`] on the underlying
/// series. The raw durations are gone, so the KS fields carry the largest
/// per-seed value.
pub fn pool_estimates(inputs: &[(ModelParams, DetectorConfig, RenewalEstimate)]) -> Result<RenewalEstimate> {
    check_same_setup(inputs.iter().map(|(p, d, _)| (p, d)))?;
    let n_cycles = inputs.iter().map(|(_, _, e)| e.n_cycles).sum();
    let ord_total = inputs.iter().map(|(_, _, e)| e.ord_total).sum();
    let dis_total = inputs.iter().map(|(_, _, e)| e.dis_total).sum();
    let ks_ord = inputs.iter().map(|(_, _, e)| e.ks_ord).fold(0.0, f64::max);
    let ks_dis = inputs.iter().map(|(_, _, e)| e.ks_dis).fold(0.0, f64::max);
    RenewalEstimate::from_totals(n_cycles, ord_total, dis_total, ks_ord, ks_dis)
}

/// Two-sided KS statistic of `sample` against `Exp(1 / mean)`.
pub fn ks_exponential(sample: &[usize]) -> f64 {
    if sample.is_empty() {
        return 0.0;
    }
    let mut xs: Vec<f64> = sample.iter().map(|&d| d as f64).collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = 1.0 - (-x / mean).exp();
            let above = (i + 1) as f64 / n - cdf;
            let below = cdf - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Alternating renewal path with geometric sojourns (the discrete-time
/// exponential): each sweep ends an ordered sojourn with probability
/// `rate_ord` and a disordered one with probability `rate_dis`.
pub fn synthetic_series<R: RngCore + ?Sized>(
    rate_ord: f64,
    rate_dis: f64,
    cycles: usize,
    rng: &mut R,
) -> Result<SojournSeries> {
    for r in [rate_ord, rate_dis] {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::InvalidParameter(format!("rate must lie in (0, 1] (got {r})")));
        }
    }
    let mut geometric = |q: f64| -> usize {
        if q >= 1.0 {
            return 1;
        }
        let u = 1.0 - unit_f64(rng);
        (u.ln() / (1.0 - q).ln()).ceil().max(1.0) as usize
    };
    let mut sojourns = Vec::with_capacity(2 * cycles);
    let mut t = 0;
    for _ in 0..cycles {
        for (phase, q) in [(Phase::Ordered, rate_ord), (Phase::Disordered, rate_dis)] {
            let duration = geometric(q);
            sojourns.push(Sojourn { phase, start: t, duration });
            t += duration;
        }
    }
    SojournSeries::from_sojourns(sojourns)
}
