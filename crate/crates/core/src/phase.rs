//! Ordered/disordered segmentation of a magnetisation path.
//!
//! A hysteresis state machine on `|M(t)|`: the label switches to ordered once
//! `|M|` has stayed at or above `theta_high` for `min_dwell` consecutive sweeps,
//! and to disordered once it has stayed at or below `theta_low` for as long.
//! A committed switch is back-dated to the first sweep of the qualifying run.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub theta_high: f64,
    pub theta_low: f64,
    pub min_dwell: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            theta_high: 0.5,
            theta_low: 0.25,
            min_dwell: 1,
        }
    }
}

impl DetectorConfig {
    pub fn new(theta_high: f64, theta_low: f64, min_dwell: usize) -> Result<Self> {
        let cfg = Self {
            theta_high,
            theta_low,
            min_dwell,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.theta_low && self.theta_low < self.theta_high && self.theta_high <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "detector thresholds must satisfy 0 <= theta_low < theta_high <= 1 (got low={}, high={})",
                self.theta_low, self.theta_high
            )));
        }
        if self.min_dwell == 0 {
            return Err(Error::InvalidConfig("min_dwell must be >= 1".into()));
        }
        Ok(())
    }

    /// Same dwell, thresholds shifted by the given amounts.
    pub fn shifted(&self, d_high: f64, d_low: f64) -> Result<Self> {
        Self::new(self.theta_high + d_high, self.theta_low + d_low, self.min_dwell)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Ordered,
    Disordered,
    Undetermined,
}

impl Phase {
    /// Single-letter code used in labelled CSV output.
    pub fn code(self) -> char {
        match self {
            Phase::Ordered => 'O',
            Phase::Disordered => 'D',
            Phase::Undetermined => 'U',
        }
    }
}

/// Per-sweep phase labels for `m_series`.
pub fn classify(m_series: &[f64], cfg: &DetectorConfig) -> Result<Vec<Phase>> {
    if m_series.is_empty() {
        return Err(Error::InvalidInput("magnetisation series is empty".into()));
    }
    cfg.validate()?;

    let mut labels = Vec::with_capacity(m_series.len());
    let mut current = Phase::Undetermined;
    // Start of the ongoing run of sweeps at/above theta_high (resp. at/below theta_low).
    let mut high_run: Option<usize> = None;
    let mut low_run: Option<usize> = None;

    for (t, m) in m_series.iter().enumerate() {
        let a = m.abs();
        high_run = if a >= cfg.theta_high { high_run.or(Some(t)) } else { None };
        low_run = if a <= cfg.theta_low { low_run.or(Some(t)) } else { None };

        labels.push(current);
        let commit = match (current, high_run, low_run) {
            (Phase::Ordered, _, Some(s)) | (Phase::Undetermined, _, Some(s))
                if t + 1 - s >= cfg.min_dwell =>
            {
                Some((Phase::Disordered, s))
            }
            (Phase::Disordered, Some(s), _) | (Phase::Undetermined, Some(s), _)
                if t + 1 - s >= cfg.min_dwell =>
            {
                Some((Phase::Ordered, s))
            }
            _ => None,
        };
        if let Some((phase, start)) = commit {
            labels[start..=t].fill(phase);
            current = phase;
        }
    }
    Ok(labels)
}

/// Number of label changes between committed phases.
pub fn count_transitions(labels: &[Phase]) -> usize {
    labels
        .windows(2)
        .filter(|w| w[0] != w[1] && w[0] != Phase::Undetermined)
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sojourn {
    pub phase: Phase,
    pub start: usize,
    pub duration: usize,
}

/// Complete ordered+disordered cycles, strictly alternating.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SojournSeries {
    pub sojourns: Vec<Sojourn>,
    pub trimmed: bool,
    pub n_ord: usize,
    pub n_dis: usize,
    /// Leading undetermined sweeps.
    pub undetermined: usize,
    /// Sweeps in sojourns dropped at either end.
    pub censored: usize,
    /// Label changes in the untrimmed path.
    pub raw_transitions: usize,
}

impl SojournSeries {
    /// Builds a series directly from alternating sojourns, e.g. synthetic data.
    ///
    /// The input must already alternate and hold equal counts of each phase.
    pub fn from_sojourns(sojourns: Vec<Sojourn>) -> Result<Self> {
        let n_ord = sojourns.iter().filter(|s| s.phase == Phase::Ordered).count();
        let n_dis = sojourns.iter().filter(|s| s.phase == Phase::Disordered).count();
        let series = Self {
            raw_transitions: sojourns.len().saturating_sub(1),
            sojourns,
            trimmed: false,
            n_ord,
            n_dis,
            undetermined: 0,
            censored: 0,
        };
        if !series.is_well_formed() {
            return Err(Error::InvalidInput(
                "sojourns must alternate, have positive durations and equal phase counts".into(),
            ));
        }
        Ok(series)
    }

    pub fn n_cycles(&self) -> usize {
        self.n_ord.min(self.n_dis)
    }

    pub fn durations(&self, phase: Phase) -> impl Iterator<Item = usize> + '_ {
        self.sojourns
            .iter()
            .filter(move |s| s.phase == phase)
            .map(|s| s.duration)
    }

    pub fn total(&self, phase: Phase) -> usize {
        self.durations(phase).sum()
    }

    /// Alternation, equal counts, no undetermined sojourns, positive durations.
    pub fn is_well_formed(&self) -> bool {
        self.n_ord == self.n_dis
            && self.sojourns.len() == self.n_ord + self.n_dis
            && self.sojourns.windows(2).all(|w| w[0].phase != w[1].phase)
            && self
                .sojourns
                .iter()
                .all(|s| s.phase != Phase::Undetermined && s.duration >= 1)
    }
}

/// Run-length encodes labels, drops the censored end sojourns and trims to whole cycles.
pub fn extract_sojourns(labels: &[Phase]) -> Result<SojournSeries> {
    let undetermined = labels
        .iter()
        .take_while(|&&p| p == Phase::Undetermined)
        .count();
    let mut runs: Vec<Sojourn> = Vec::new();
    for (t, &phase) in labels.iter().enumerate().skip(undetermined) {
        match runs.last_mut() {
            Some(last) if last.phase == phase => last.duration += 1,
            _ => runs.push(Sojourn {
                phase,
                start: t,
                duration: 1,
            }),
        }
    }
    let raw_transitions = runs.len().saturating_sub(1);

    let mut censored = 0;
    if let Some(last) = runs.pop() {
        censored += last.duration;
    }
    if !runs.is_empty() {
        censored += runs.remove(0).duration;
    }
    let count = |runs: &[Sojourn], p| runs.iter().filter(|s| s.phase == p).count();
    while count(&runs, Phase::Ordered) != count(&runs, Phase::Disordered) {
        let dropped = runs.pop().expect("unequal counts imply a nonempty list");
        censored += dropped.duration;
    }
    if runs.is_empty() {
        return Err(Error::insufficient(
            "no complete ordered+disordered cycle after trimming censored sojourns",
            raw_transitions,
        ));
    }
    let n = runs.len() / 2;
    Ok(SojournSeries {
        sojourns: runs,
        trimmed: true,
        n_ord: n,
        n_dis: n,
        undetermined,
        censored,
        raw_transitions,
    })
}

/// `classify` followed by `extract_sojourns`.
pub fn detect(m_series: &[f64], cfg: &DetectorConfig) -> Result<SojournSeries> {
    extract_sojourns(&classify(m_series, cfg)?)
}
