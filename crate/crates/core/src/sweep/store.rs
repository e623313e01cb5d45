//! Append-only JSON-lines result store.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::canonical_key;
use crate::error::{Error, Result};
use crate::phase::DetectorConfig;
use crate::renewal::RenewalEstimate;

/// Identity of a run: parameters, seed and run length.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RunKey {
    pub side: usize,
    pub beta: String,
    pub alpha: String,
    pub seed: u64,
    pub n_sweeps: u64,
    pub burn_in: u64,
}

impl RunKey {
    pub fn new(side: usize, beta: f64, alpha: f64, seed: u64, n_sweeps: u64, burn_in: u64) -> Self {
        Self {
            side,
            beta: canonical_key(beta),
            alpha: canonical_key(alpha),
            seed,
            n_sweeps,
            burn_in,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunOutcome {
    Ok { estimate: RenewalEstimate },
    InsufficientData { transitions: usize },
    Failed { message: String },
}

impl RunOutcome {
    pub fn estimate(&self) -> Option<&RenewalEstimate> {
        match self {
            RunOutcome::Ok { estimate } => Some(estimate),
            _ => None,
        }
    }

    pub(crate) fn from_result(r: Result<RenewalEstimate>) -> Self {
        match r {
            Ok(estimate) => RunOutcome::Ok { estimate },
            Err(Error::InsufficientData { transitions, .. }) => {
                RunOutcome::InsufficientData { transitions }
            }
            Err(e) => RunOutcome::Failed {
                message: e.to_string(),
            },
        }
    }
}

/// Outcome under one threshold-shifted detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantOutcome {
    pub detector: DetectorConfig,
    pub outcome: RunOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_index: u64,
    pub side: usize,
    pub beta: f64,
    pub alpha: f64,
    pub seed_slot: usize,
    pub seed: u64,
    pub n_sweeps: u64,
    pub burn_in: u64,
    pub detector: DetectorConfig,
    pub outcome: RunOutcome,
    #[serde(default)]
    pub variants: Vec<VariantOutcome>,
    pub wall_time_s: f64,
    pub engine: String,
}

impl RunRecord {
    pub fn key(&self) -> RunKey {
        RunKey::new(self.side, self.beta, self.alpha, self.seed, self.n_sweeps, self.burn_in)
    }

    /// Record with the wall time zeroed, for order- and timing-free comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_time_s: 0.0,
            ..self.clone()
        }
    }
}

pub const CSV_HEADER: &str = "side,beta,alpha,seed,pi_ord,lambda_ord,lambda_dis,t_renew,n_cycles";

/// Records keyed by [`RunKey`], backed by a JSON-lines file.
#[derive(Debug)]
pub struct ResultStore {
    path: PathBuf,
    records: BTreeMap<RunKey, RunRecord>,
    skipped_lines: usize,
    writer: Option<File>,
}

impl ResultStore {
    /// Opens (or prepares to create) a store. A torn final line from an
    /// interrupted write is skipped and counted.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut records = BTreeMap::new();
        let mut skipped_lines = 0;
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for line in reader.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<RunRecord>(&line) {
                    Ok(rec) => {
                        records.insert(rec.key(), rec);
                    }
                    Err(_) => skipped_lines += 1,
                }
            }
        }
        Ok(Self {
            path,
            records,
            skipped_lines,
            writer: None,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn skipped_lines(&self) -> usize {
        self.skipped_lines
    }

    pub fn contains(&self, key: &RunKey) -> bool {
        self.records.contains_key(key)
    }

    /// Records in key order.
    pub fn records(&self) -> impl Iterator<Item = &RunRecord> {
        self.records.values()
    }

    /// Appends one record as a single line and flushes.
    pub fn append(&mut self, record: &RunRecord) -> Result<()> {
        if self.writer.is_none() {
            if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            let mut file = OpenOptions::new().create(true).append(true).open(&self.path)?;
            // Terminate a torn last line so the new record starts cleanly.
            if self.skipped_lines > 0 || !ends_with_newline(&self.path)? {
                writeln!(file)?;
            }
            self.writer = Some(file);
        }
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        let w = self.writer.as_mut().expect("opened above");
        w.write_all(line.as_bytes())?;
        w.flush()?;
        self.records.insert(record.key(), record.clone());
        Ok(())
    }

    /// Writes the `side,beta,alpha,seed,...` CSV view; runs without an estimate are skipped.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in self.records() {
            if let Some(e) = r.outcome.estimate() {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    r.side, r.beta, r.alpha, r.seed, e.pi_ord, e.lambda_ord, e.lambda_dis, e.t_renew, e.n_cycles
                )?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn ends_with_newline(path: &Path) -> Result<bool> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(true),
        Err(e) => return Err(e.into()),
    };
    Ok(bytes.last().is_none_or(|&b| b == b'\n'))
}
