//! Store-to-report analysis: pooled curves, spline extrema, the aggregated
//! critical coupling, temperature scaling and detector sensitivity.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::curve::{
    aggregate_minima, find_extremum, fit_power_law, fit_spline, prefactor_ratio,
    CriticalPointSummary, ExtremumEstimate, ExtremumKind, LocatedMinimum, PowerLawFit,
};
use crate::error::{Error, Result};
use crate::phase::DetectorConfig;
use crate::sweep::{collect, Curve, DetectorChoice, OmittedPoint, RunOutcome, RunRecord, Statistic};

/// Relative tolerance of the per-point renewal identity check.
pub const IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub confidence: f64,
    /// Shift applied to `theta_high` for the sensitivity rows.
    pub delta_high: f64,
    /// Shift applied to `theta_low` for the sensitivity rows.
    pub delta_low: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            confidence: 0.99,
            delta_high: 0.05,
            delta_low: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub alpha: f64,
    pub pi_ord: f64,
    pub lambda_ord: f64,
    pub lambda_dis: f64,
    pub t_renew: f64,
    pub mean_cycle: f64,
    pub n_cycles: usize,
    pub seeds_used: usize,
    pub seeds_total: usize,
    pub ks_ord: f64,
    pub ks_dis: f64,
    pub identity_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub beta: f64,
    pub side: usize,
    pub usable: bool,
    pub points: Vec<PointReport>,
    pub omitted: Vec<OmittedPoint>,
    pub t_renew_min: Option<ExtremumEstimate>,
    pub pi_ord_min: Option<ExtremumEstimate>,
    pub lambda_ord_max: Option<ExtremumEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeScaling {
    pub side: usize,
    /// `(beta, T_renew at the spline minimum)` per usable curve.
    pub minima: Vec<(f64, f64)>,
    pub fit: Option<PowerLawFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefactorComparison {
    pub large_side: usize,
    pub small_side: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub theta_high: f64,
    pub theta_low: f64,
    /// False when the store holds no outcomes for this detector.
    pub available: bool,
    pub usable_curves: usize,
    pub interior_minima: usize,
    pub alpha_star: Option<CriticalPointSummary>,
    /// `alpha_star` minus the baseline mean.
    pub shift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub points_checked: usize,
    pub max_renewal_rel_error: f64,
    pub max_steady_state_rel_error: f64,
    pub all_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordCounts {
    pub total: usize,
    pub ok: usize,
    pub insufficient: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub engines: Vec<String>,
    pub detector: DetectorConfig,
    pub confidence: f64,
    pub records: RecordCounts,
    pub curves: Vec<CurveReport>,
    /// Aggregated `T_renew` minima over all usable curves.
    pub alpha_star: Option<CriticalPointSummary>,
    pub all_minima_interior: bool,
    /// Aggregated `pi_ord` minima.
    pub pi_ord_alpha: Option<CriticalPointSummary>,
    /// Aggregated `lambda_ord` maxima.
    pub lambda_ord_alpha: Option<CriticalPointSummary>,
    pub scaling: Vec<SizeScaling>,
    pub prefactor: Option<PrefactorComparison>,
    pub sensitivity: Vec<SensitivityRow>,
    pub identity: IdentityCheck,
}

impl AnalysisReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.to_json()?.as_bytes())?;
        out.flush()?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

struct CurveFits {
    reports: Vec<CurveReport>,
}

fn fit_curves(curves: &[Curve]) -> Result<CurveFits> {
    let mut reports = Vec::with_capacity(curves.len());
    for c in curves {
        let extremum = |stat, kind| -> Result<Option<ExtremumEstimate>> {
            if !c.usable {
                return Ok(None);
            }
            Ok(Some(find_extremum(&fit_spline(&c.series(stat))?, kind)))
        };
        let points = c
            .points
            .iter()
            .map(|p| {
                let e = &p.estimate;
                PointReport {
                    alpha: p.alpha,
                    pi_ord: e.pi_ord,
                    lambda_ord: e.lambda_ord,
                    lambda_dis: e.lambda_dis,
                    t_renew: e.t_renew,
                    mean_cycle: e.mean_cycle(),
                    n_cycles: e.n_cycles,
                    seeds_used: p.seeds_used,
                    seeds_total: p.seeds_total,
                    ks_ord: e.ks_ord,
                    ks_dis: e.ks_dis,
                    identity_pass: e.renewal_identity_error() <= IDENTITY_TOL
                        && e.steady_state_error() <= IDENTITY_TOL,
                }
            })
            .collect();
        reports.push(CurveReport {
            beta: c.beta,
            side: c.side,
            usable: c.usable,
            points,
            omitted: c.omitted.clone(),
            t_renew_min: extremum(Statistic::TRenew, ExtremumKind::Min)?,
            pi_ord_min: extremum(Statistic::PiOrd, ExtremumKind::Min)?,
            lambda_ord_max: extremum(Statistic::LambdaOrd, ExtremumKind::Max)?,
        });
    }
    Ok(CurveFits { reports })
}

fn aggregate(
    reports: &[CurveReport],
    pick: impl Fn(&CurveReport) -> Option<ExtremumEstimate>,
    confidence: f64,
) -> Result<Option<CriticalPointSummary>> {
    let minima: Vec<_> = reports
        .iter()
        .filter_map(|r| {
            pick(r).map(|e| LocatedMinimum {
                beta: r.beta,
                side: r.side,
                location: e.location,
            })
        })
        .collect();
    if minima.len() < 2 {
        return Ok(None);
    }
    aggregate_minima(minima, confidence).map(Some)
}

fn sensitivity_row(
    records: &[&RunRecord],
    theta_high: f64,
    theta_low: f64,
    confidence: f64,
    baseline: Option<f64>,
) -> Result<SensitivityRow> {
    let choice = DetectorChoice::Shifted { theta_high, theta_low };
    let available = records.iter().any(|r| {
        r.variants.iter().any(|v| {
            (v.detector.theta_high - theta_high).abs() < 1e-9
                && (v.detector.theta_low - theta_low).abs() < 1e-9
        })
    });
    if !available {
        return Ok(SensitivityRow {
            theta_high,
            theta_low,
            available,
            usable_curves: 0,
            interior_minima: 0,
            alpha_star: None,
            shift: None,
        });
    }
    let curves = collect(records.iter().copied(), choice)?;
    let fits = fit_curves(&curves)?;
    let alpha_star = aggregate(&fits.reports, |r| r.t_renew_min, confidence)?;
    Ok(SensitivityRow {
        theta_high,
        theta_low,
        available,
        usable_curves: fits.reports.iter().filter(|r| r.usable).count(),
        interior_minima: fits
            .reports
            .iter()
            .filter(|r| r.t_renew_min.is_some_and(|e| e.interior))
            .count(),
        shift: match (&alpha_star, baseline) {
            (Some(s), Some(b)) => Some(s.mean - b),
            _ => None,
        },
        alpha_star,
    })
}

/// Builds the analysis report. The result only depends on the set of records,
/// not on their order or timing.
pub fn analyze<'a, I>(records: I, options: &AnalysisOptions) -> Result<AnalysisReport>
where
    I: IntoIterator<Item = &'a RunRecord>,
{
    let records: Vec<&RunRecord> = records.into_iter().collect();
    if records.is_empty() {
        return Err(Error::InvalidInput("result store is empty".into()));
    }
    let counts = RecordCounts {
        total: records.len(),
        ok: records.iter().filter(|r| matches!(r.outcome, RunOutcome::Ok { .. })).count(),
        insufficient: records
            .iter()
            .filter(|r| matches!(r.outcome, RunOutcome::InsufficientData { .. }))
            .count(),
        failed: records
            .iter()
            .filter(|r| matches!(r.outcome, RunOutcome::Failed { .. }))
            .count(),
    };
    let detectors: BTreeSet<String> = records
        .iter()
        .map(|r| serde_json::to_string(&r.detector).expect("detector serializes"))
        .collect();
    if detectors.len() > 1 {
        return Err(Error::InvalidInput(format!(
            "store mixes {} detector configurations",
            detectors.len()
        )));
    }
    let detector = records[0].detector;

    let curves = collect(records.iter().copied(), DetectorChoice::Base)?;
    let usable = curves.iter().filter(|c| c.usable).count();
    if usable == 0 {
        return Err(Error::insufficient(
            format!(
                "no curve has 3 usable coupling points ({} records: {} ok, {} insufficient, {} failed; {} curves)",
                counts.total, counts.ok, counts.insufficient, counts.failed, curves.len()
            ),
            counts.ok,
        ));
    }
    let fits = fit_curves(&curves)?;

    let alpha_star = aggregate(&fits.reports, |r| r.t_renew_min, options.confidence)?;
    let pi_ord_alpha = aggregate(&fits.reports, |r| r.pi_ord_min, options.confidence)?;
    let lambda_ord_alpha = aggregate(&fits.reports, |r| r.lambda_ord_max, options.confidence)?;
    let all_minima_interior = fits
        .reports
        .iter()
        .all(|r| r.t_renew_min.is_some_and(|e| e.interior));

    let sides: BTreeSet<usize> = fits.reports.iter().map(|r| r.side).collect();
    let scaling: Vec<SizeScaling> = sides
        .iter()
        .map(|&side| {
            let minima: Vec<(f64, f64)> = fits
                .reports
                .iter()
                .filter(|r| r.side == side)
                .filter_map(|r| r.t_renew_min.map(|e| (r.beta, e.value)))
                .collect();
            let fit = fit_power_law(&minima).ok();
            SizeScaling { side, minima, fit }
        })
        .collect();
    let with_fit: Vec<_> = scaling.iter().filter(|s| s.fit.is_some()).collect();
    let prefactor = match (with_fit.first(), with_fit.last()) {
        (Some(small), Some(large)) if small.side != large.side => Some(PrefactorComparison {
            large_side: large.side,
            small_side: small.side,
            ratio: prefactor_ratio(
                large.fit.as_ref().expect("filtered"),
                small.fit.as_ref().expect("filtered"),
            ),
        }),
        _ => None,
    };

    let baseline = alpha_star.as_ref().map(|s| s.mean);
    let mut sensitivity = Vec::new();
    for (dh, dl) in [
        (options.delta_high, 0.0),
        (-options.delta_high, 0.0),
        (0.0, options.delta_low),
        (0.0, -options.delta_low),
    ] {
        if dh == 0.0 && dl == 0.0 {
            continue;
        }
        let Ok(shifted) = detector.shifted(dh, dl) else {
            continue;
        };
        sensitivity.push(sensitivity_row(
            &records,
            shifted.theta_high,
            shifted.theta_low,
            options.confidence,
            baseline,
        )?);
    }

    let all_points = fits.reports.iter().flat_map(|r| &r.points);
    let identity = IdentityCheck {
        points_checked: all_points.clone().count(),
        max_renewal_rel_error: curves
            .iter()
            .flat_map(|c| &c.points)
            .map(|p| p.estimate.renewal_identity_error())
            .fold(0.0, f64::max),
        max_steady_state_rel_error: curves
            .iter()
            .flat_map(|c| &c.points)
            .map(|p| p.estimate.steady_state_error())
            .fold(0.0, f64::max),
        all_pass: all_points.clone().all(|p| p.identity_pass),
    };

    let engines: BTreeSet<String> = records.iter().map(|r| r.engine.clone()).collect();
    Ok(AnalysisReport {
        engines: engines.into_iter().collect(),
        detector,
        confidence: options.confidence,
        records: counts,
        curves: fits.reports,
        alpha_star,
        all_minima_interior,
        pi_ord_alpha,
        lambda_ord_alpha,
        scaling,
        prefactor,
        sensitivity,
        identity,
    })
}
