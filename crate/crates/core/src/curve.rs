//! Spline models over the coupling, extremum search, critical-coupling
//! aggregation and power-law scaling fits.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Grid step of the coarse extremum scan.
pub const SCAN_STEP: f64 = 1e-3;
/// Bracket width at which golden-section refinement stops.
pub const REFINE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub alpha: f64,
    pub value: f64,
    pub n_cycles: usize,
}

/// Natural cubic interpolating spline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineModel {
    knots: Vec<f64>,
    values: Vec<f64>,
    /// Second derivative at each knot; zero at both ends.
    second: Vec<f64>,
}

pub fn fit_spline(points: &[CurvePoint]) -> Result<SplineModel> {
    let xs: Vec<f64> = points.iter().map(|p| p.alpha).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.value).collect();
    SplineModel::new(xs, ys)
}

impl SplineModel {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "spline needs at least 3 points (got {})",
                knots.len()
            )));
        }
        if knots.len() != values.len() {
            return Err(Error::InvalidInput("knot and value counts differ".into()));
        }
        if knots.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("spline data must be finite".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "spline knots must be strictly increasing and distinct".into(),
            ));
        }
        let second = natural_second_derivatives(&knots, &values);
        Ok(Self {
            knots,
            values,
            second,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn first_knot(&self) -> f64 {
        self.knots[0]
    }

    pub fn last_knot(&self) -> f64 {
        *self.knots.last().expect("at least 3 knots")
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.knots.len();
        match self.knots.partition_point(|&k| k <= x) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    /// Evaluates the spline; outside the knot range the end cubic is extended.
    pub fn eval(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        a * self.values[i]
            + b * self.values[i + 1]
            + ((a * a * a - a) * self.second[i] + (b * b * b - b) * self.second[i + 1]) * h * h / 6.0
    }

    /// Second derivative, piecewise linear between knots.
    pub fn second_derivative(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let t = (x - x0) / (x1 - x0);
        (1.0 - t) * self.second[i] + t * self.second[i + 1]
    }
}

/// Tridiagonal solve for knot second derivatives with zero end conditions.
fn natural_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    let inner = n - 2;
    let mut diag = vec![0.0; inner];
    let mut upper = vec![0.0; inner];
    let mut rhs = vec![0.0; inner];
    for k in 0..inner {
        let i = k + 1;
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        diag[k] = 2.0 * (h0 + h1);
        upper[k] = h1;
        rhs[k] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    // Thomas algorithm; sub-diagonal entry of row k is h_{k} = x[k+1] - x[k].
    for k in 1..inner {
        let lower = x[k + 1] - x[k];
        let w = lower / diag[k - 1];
        diag[k] -= w * upper[k - 1];
        rhs[k] -= w * rhs[k - 1];
    }
    for k in (0..inner).rev() {
        let next = if k + 1 < inner { m[k + 2] } else { 0.0 };
        m[k + 1] = (rhs[k] - upper[k] * next) / diag[k];
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremumEstimate {
    pub location: f64,
    pub value: f64,
    pub kind: ExtremumKind,
    /// True iff the extremum lies strictly inside the knot range.
    pub interior: bool,
}

/// Dense scan at [`SCAN_STEP`] then golden-section refinement of the best bracket.
///
/// Ties go to the smaller coupling. Maxima are found as minima of the negated
/// spline through the same code path.
pub fn find_extremum(model: &SplineModel, kind: ExtremumKind) -> ExtremumEstimate {
    let sign = match kind {
        ExtremumKind::Min => 1.0,
        ExtremumKind::Max => -1.0,
    };
    let f = |x: f64| sign * model.eval(x);
    let (lo, hi) = (model.first_knot(), model.last_knot());
    let steps = ((hi - lo) / SCAN_STEP).round().max(1.0) as usize;
    let grid = |k: usize| {
        if k == steps {
            hi
        } else {
            lo + k as f64 * (hi - lo) / steps as f64
        }
    };

    let mut best_k = 0;
    let mut best = f(lo);
    for k in 1..=steps {
        let v = f(grid(k));
        if v < best {
            best = v;
            best_k = k;
        }
    }

    let mut location = grid(best_k);
    if best_k > 0 && best_k < steps {
        let (x, v) = golden_section(&f, grid(best_k - 1), grid(best_k + 1));
        if v < best || (v == best && x < location) {
            location = x;
            best = v;
        }
    }
    ExtremumEstimate {
        location,
        value: sign * best,
        kind,
        interior: location > lo && location < hi,
    }
}

fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > REFINE_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Minimum location for one `(beta, side)` curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocatedMinimum {
    pub beta: f64,
    pub side: usize,
    pub location: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointSummary {
    pub minima: Vec<LocatedMinimum>,
    pub mean: f64,
    pub half_width: f64,
    pub confidence: f64,
}

/// Mean of the minima with a Student-t confidence half-width on `n - 1` dof.
pub fn aggregate_minima(minima: Vec<LocatedMinimum>, confidence: f64) -> Result<CriticalPointSummary> {
    if minima.len() < 2 {
        return Err(Error::insufficient(
            format!("need at least 2 minima to aggregate (got {})", minima.len()),
            minima.len(),
        ));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence must lie in (0, 1) (got {confidence})"
        )));
    }
    let n = minima.len() as f64;
    let first = minima[0].location;
    if minima.iter().all(|m| m.location == first) {
        return Ok(CriticalPointSummary {
            minima,
            mean: first,
            half_width: 0.0,
            confidence,
        });
    }
    let mean = minima.iter().map(|m| m.location).sum::<f64>() / n;
    let var = minima
        .iter()
        .map(|m| (m.location - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    let t = StudentsT::new(0.0, 1.0, n - 1.0)
        .expect("dof >= 1")
        .inverse_cdf(0.5 + confidence / 2.0);
    let half_width = t * (var / n).sqrt();
    Ok(CriticalPointSummary {
        minima,
        mean,
        half_width,
        confidence,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub log_prefactor: f64,
    pub r_squared: f64,
}

impl PowerLawFit {
    pub fn prefactor(&self) -> f64 {
        self.log_prefactor.exp()
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.log_prefactor + self.exponent * x.ln()).exp()
    }
}

/// Least squares of `ln(value)` on `ln(beta)`.
pub fn fit_power_law(pairs: &[(f64, f64)]) -> Result<PowerLawFit> {
    if pairs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "power-law fit needs at least 2 pairs (got {})",
            pairs.len()
        )));
    }
    if pairs.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())) {
        return Err(Error::InvalidInput(
            "power-law fit needs finite positive inputs".into(),
        ));
    }
    let n = pairs.len() as f64;
    let lx: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput(
            "power-law fit needs at least two distinct abscissae".into(),
        ));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let exponent = sxy / sxx;
    let log_prefactor = my - exponent * mx;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - log_prefactor - exponent * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(PowerLawFit {
        exponent,
        log_prefactor,
        r_squared,
    })
}

/// Ratio of the prefactors, `exp(log_large - log_small)`.
pub fn prefactor_ratio(large: &PowerLawFit, small: &PowerLawFit) -> f64 {
    (large.log_prefactor - small.log_prefactor).exp()
}
