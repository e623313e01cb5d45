use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::canonical_key;
use super::store::{RunOutcome, RunRecord};
use crate::curve::CurvePoint;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::phase::DetectorConfig;
use crate::renewal::{pool_estimates, RenewalEstimate};

/// Which detector's outcomes to read from each record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectorChoice {
    Base,
    /// A stored sensitivity variant, matched on thresholds.
    Shifted { theta_high: f64, theta_low: f64 },
}

impl DetectorChoice {
    fn pick<'a>(&self, rec: &'a RunRecord) -> Option<(DetectorConfig, &'a RunOutcome)> {
        match *self {
            DetectorChoice::Base => Some((rec.detector, &rec.outcome)),
            DetectorChoice::Shifted { theta_high, theta_low } => rec
                .variants
                .iter()
                .find(|v| {
                    (v.detector.theta_high - theta_high).abs() < 1e-9
                        && (v.detector.theta_low - theta_low).abs() < 1e-9
                })
                .map(|v| (v.detector, &v.outcome)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    TRenew,
    PiOrd,
    LambdaOrd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePointSummary {
    pub alpha: f64,
    pub estimate: RenewalEstimate,
    pub seeds_used: usize,
    pub seeds_total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmittedPoint {
    pub alpha: f64,
    pub insufficient: usize,
    pub failed: usize,
    /// Records lacking the requested detector variant.
    pub missing_variant: usize,
}

/// Seed-pooled estimates along the coupling for one `(beta, side)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub beta: f64,
    pub side: usize,
    pub points: Vec<CurvePointSummary>,
    pub omitted: Vec<OmittedPoint>,
    /// At least 3 usable points, enough for a spline.
    pub usable: bool,
}

impl Curve {
    pub fn series(&self, stat: Statistic) -> Vec<CurvePoint> {
        self.points
            .iter()
            .map(|p| CurvePoint {
                alpha: p.alpha,
                value: match stat {
                    Statistic::TRenew => p.estimate.t_renew,
                    Statistic::PiOrd => p.estimate.pi_ord,
                    Statistic::LambdaOrd => p.estimate.lambda_ord,
                },
                n_cycles: p.estimate.n_cycles,
            })
            .collect()
    }
}

/// Groups records by `(side, beta, alpha)`, pools seeds and orders each curve by coupling.
///
/// Curves come out ordered by side, then beta.
pub fn collect<'a, I>(records: I, choice: DetectorChoice) -> Result<Vec<Curve>>
where
    I: IntoIterator<Item = &'a RunRecord>,
{
    type PointKey = (u64, String);
    type ByAlpha<'r> = BTreeMap<PointKey, Vec<&'r RunRecord>>;
    let mut groups: BTreeMap<(usize, u64, String), (f64, ByAlpha)> = BTreeMap::new();
    let mut any = false;
    for rec in records {
        any = true;
        let beta_key = canonical_key(rec.beta);
        let alpha_key = canonical_key(rec.alpha);
        groups
            .entry((rec.side, ordered_bits(rec.beta), beta_key))
            .or_insert_with(|| (rec.beta, BTreeMap::new()))
            .1
            .entry((ordered_bits(rec.alpha), alpha_key))
            .or_default()
            .push(rec);
    }
    if !any {
        return Err(Error::InvalidInput("result store is empty".into()));
    }

    let mut curves = Vec::with_capacity(groups.len());
    for ((side, _, _), (beta, by_alpha)) in groups {
        let mut points = Vec::new();
        let mut omitted = Vec::new();
        for (_, recs) in by_alpha {
            let alpha = recs[0].alpha;
            let mut usable = Vec::new();
            let (mut insufficient, mut failed, mut missing_variant) = (0, 0, 0);
            let mut sorted = recs.clone();
            sorted.sort_by_key(|r| (r.seed_slot, r.seed));
            for r in sorted {
                match choice.pick(r) {
                    None => missing_variant += 1,
                    Some((det, RunOutcome::Ok { estimate })) => {
                        let params = ModelParams::new(r.alpha, r.beta, r.side)?;
                        usable.push((params, det, estimate.clone()));
                    }
                    Some((_, RunOutcome::InsufficientData { .. })) => insufficient += 1,
                    Some((_, RunOutcome::Failed { .. })) => failed += 1,
                }
            }
            if usable.is_empty() {
                omitted.push(OmittedPoint {
                    alpha,
                    insufficient,
                    failed,
                    missing_variant,
                });
                continue;
            }
            points.push(CurvePointSummary {
                alpha,
                estimate: pool_estimates(&usable)?,
                seeds_used: usable.len(),
                seeds_total: recs.len(),
            });
        }
        curves.push(Curve {
            beta,
            side,
            usable: points.len() >= 3,
            points,
            omitted,
        });
    }
    Ok(curves)
}

/// Order-preserving key for nonnegative finite floats.
fn ordered_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if x.is_sign_negative() {
        !b
    } else {
        b | (1 << 63)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::store::VariantOutcome;

    fn est(ord: u64, dis: u64, cycles: usize) -> RenewalEstimate {
        let lambda_ord = cycles as f64 / ord as f64;
        let pi = ord as f64 / (ord + dis) as f64;
        RenewalEstimate {
            pi_ord: pi,
            lambda_ord,
            lambda_dis: lambda_ord * pi / (1.0 - pi),
            t_renew: 1.0 / (lambda_ord * pi),
            n_cycles: cycles,
            ord_total: ord,
            dis_total: dis,
            ks_ord: 0.1,
            ks_dis: 0.2,
        }
    }

    fn rec(side: usize, beta: f64, alpha: f64, slot: usize, outcome: RunOutcome) -> RunRecord {
        RunRecord {
            run_index: 0,
            side,
            beta,
            alpha,
            seed_slot: slot,
            seed: slot as u64 * 7 + (alpha * 10.0) as u64,
            n_sweeps: 100,
            burn_in: 0,
            detector: DetectorConfig::default(),
            outcome,
            variants: vec![VariantOutcome {
                detector: DetectorConfig::new(0.55, 0.25, 1).unwrap(),
                outcome: RunOutcome::Ok { estimate: est(10, 10, 1) },
            }],
            wall_time_s: 1.0,
            engine: "t".into(),
        }
    }

    fn full_store(seeds: usize) -> Vec<RunRecord> {
        let mut v = Vec::new();
        for side in [16, 32] {
            for beta in [0.2, 0.25, 0.333333333333, 0.5] {
                for alpha in [2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0] {
                    for slot in 0..seeds {
                        v.push(rec(side, beta, alpha, slot, RunOutcome::Ok { estimate: est(100 + slot as u64, 50, 2) }));
                    }
                }
            }
        }
        v
    }

    #[test]
    fn default_store_gives_eight_curves() {
        let store = full_store(5);
        assert_eq!(store.len(), 280);
        let curves = collect(&store, DetectorChoice::Base).unwrap();
        assert_eq!(curves.len(), 8);
        assert!(curves.iter().all(|c| c.points.len() == 7 && c.usable));
        assert_eq!((curves[0].side, curves[0].beta), (16, 0.2));
        assert_eq!((curves[7].side, curves[7].beta), (32, 0.5));
        let p = &curves[0].points[0];
        assert_eq!(p.seeds_used, 5);
        assert_eq!(p.estimate.n_cycles, 10);
        assert_eq!(p.estimate.ord_total, 100 + 101 + 102 + 103 + 104);
        let alphas: Vec<_> = curves[3].points.iter().map(|p| p.alpha).collect();
        assert_eq!(alphas, vec![2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn single_seed_degenerates_to_estimate() {
        let store = full_store(1);
        let curves = collect(&store, DetectorChoice::Base).unwrap();
        let p = &curves[0].points[0];
        let e = store[0].outcome.estimate().unwrap();
        assert_eq!(p.estimate.t_renew, e.t_renew);
        assert_eq!(p.estimate.pi_ord, e.pi_ord);
    }

    #[test]
    fn failed_point_is_omitted() {
        let mut store = full_store(1);
        for r in store.iter_mut().filter(|r| r.alpha == 5.0 && r.side == 16 && r.beta == 0.5) {
            r.outcome = RunOutcome::InsufficientData { transitions: 1 };
        }
        let curves = collect(&store, DetectorChoice::Base).unwrap();
        let c = curves.iter().find(|c| c.side == 16 && c.beta == 0.5).unwrap();
        assert_eq!(c.points.len(), 6);
        assert_eq!(c.omitted, vec![OmittedPoint { alpha: 5.0, insufficient: 1, failed: 0, missing_variant: 0 }]);
        assert!(c.usable);
    }

    #[test]
    fn sparse_curve_flagged_unusable() {
        let store: Vec<_> = full_store(1).into_iter().filter(|r| r.alpha <= 3.0).collect();
        let curves = collect(&store, DetectorChoice::Base).unwrap();
        assert!(curves.iter().all(|c| !c.usable));
    }

    #[test]
    fn variants_are_selectable() {
        let store = full_store(1);
        let curves = collect(&store, DetectorChoice::Shifted { theta_high: 0.55, theta_low: 0.25 }).unwrap();
        assert_eq!(curves[0].points[0].estimate.t_renew, 20.0);
        let curves = collect(&store, DetectorChoice::Shifted { theta_high: 0.45, theta_low: 0.25 }).unwrap();
        assert!(curves.iter().all(|c| c.points.is_empty()));
        assert_eq!(curves[0].omitted[0].missing_variant, 1);
    }

    #[test]
    fn empty_store_is_an_error() {
        assert!(collect(&[], DetectorChoice::Base).is_err());
    }

    #[test]
    fn order_of_records_is_irrelevant() {
        let mut store = full_store(3);
        let a = collect(&store, DetectorChoice::Base).unwrap();
        store.reverse();
        let b = collect(&store, DetectorChoice::Base).unwrap();
        assert_eq!(a, b);
    }
}
