use std::time::Instant;

use super::store::{ResultStore, RunKey, RunOutcome, RunRecord, VariantOutcome};
use super::{RunSpec, SweepPlan, ENGINE_VERSION};
use crate::error::{Error, Result};
use crate::model::rng::seeded;
use crate::model::{magnetization, Kernel, SpinState};
use crate::phase::{detect, DetectorConfig};
use crate::renewal::estimate;

/// Destination for finished records.
pub trait RecordSink {
    fn contains(&self, key: &RunKey) -> bool;
    fn append(&mut self, record: &RunRecord) -> Result<()>;
}

impl RecordSink for ResultStore {
    fn contains(&self, key: &RunKey) -> bool {
        ResultStore::contains(self, key)
    }

    fn append(&mut self, record: &RunRecord) -> Result<()> {
        ResultStore::append(self, record)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExecSummary {
    pub planned: usize,
    /// Runs already present in the store.
    pub skipped: usize,
    pub executed: usize,
    pub ok: usize,
    pub insufficient: usize,
    pub failed: usize,
    /// Runs whose record could not be written after one retry.
    pub io_failures: Vec<(u64, String)>,
}

impl ExecSummary {
    fn count(&mut self, rec: &RunRecord) {
        self.executed += 1;
        match rec.outcome {
            RunOutcome::Ok { .. } => self.ok += 1,
            RunOutcome::InsufficientData { .. } => self.insufficient += 1,
            RunOutcome::Failed { .. } => self.failed += 1,
        }
    }
}

/// Simulates one run and evaluates the base and sensitivity detectors on it.
pub fn run_point(plan: &SweepPlan, spec: &RunSpec) -> RunRecord {
    let started = Instant::now();
    let detector = plan.config.detector;
    let variants_cfg = plan.sensitivity_detectors();

    let (outcome, variants) = match simulate(plan, spec) {
        Ok(m_series) => {
            let eval = |d: &DetectorConfig| {
                RunOutcome::from_result(detect(&m_series, d).and_then(|s| estimate(&s)))
            };
            let variants = variants_cfg
                .iter()
                .map(|d| VariantOutcome {
                    detector: *d,
                    outcome: eval(d),
                })
                .collect();
            (eval(&detector), variants)
        }
        Err(e) => (
            RunOutcome::Failed {
                message: e.to_string(),
            },
            Vec::new(),
        ),
    };

    RunRecord {
        run_index: spec.run_index,
        side: spec.side,
        beta: spec.beta,
        alpha: spec.alpha,
        seed_slot: spec.seed_slot,
        seed: spec.seed,
        n_sweeps: plan.config.n_sweeps,
        burn_in: plan.config.burn_in,
        detector,
        outcome,
        variants,
        wall_time_s: started.elapsed().as_secs_f64(),
        engine: ENGINE_VERSION.to_string(),
    }
}

fn simulate(plan: &SweepPlan, spec: &RunSpec) -> Result<Vec<f64>> {
    let params = crate::model::ModelParams::new(spec.alpha, spec.beta, spec.side)?;
    let kernel = Kernel::new(params)?;
    let mut rng = seeded(spec.seed);
    let mut state = SpinState::random(params.n_agents(), &mut rng);
    let mut m_series = Vec::with_capacity(plan.config.n_sweeps as usize);
    kernel.run_with(
        &mut state,
        &mut rng,
        plan.config.burn_in,
        plan.config.n_sweeps,
        |_, s| m_series.push(magnetization(s)),
    );
    Ok(m_series)
}

fn pending<'a, S: RecordSink>(plan: &'a SweepPlan, sink: &S) -> Vec<&'a RunSpec> {
    plan.runs
        .iter()
        .filter(|r| !sink.contains(&plan.key_of(r)))
        .collect()
}

fn append_with_retry<S: RecordSink>(sink: &mut S, rec: &RunRecord) -> std::result::Result<(), String> {
    sink.append(rec)
        .or_else(|_| sink.append(rec))
        .map_err(|e| e.to_string())
}

/// Runs every plan entry missing from `sink`, one at a time.
pub fn execute_sequential<S, P>(plan: &SweepPlan, sink: &mut S, progress: P) -> Result<ExecSummary>
where
    S: RecordSink,
    P: Fn(&RunRecord),
{
    let todo = pending(plan, sink);
    let mut summary = ExecSummary {
        planned: plan.runs.len(),
        skipped: plan.runs.len() - todo.len(),
        ..ExecSummary::default()
    };
    for spec in todo {
        let rec = run_point(plan, spec);
        summary.count(&rec);
        if let Err(e) = append_with_retry(sink, &rec) {
            summary.io_failures.push((rec.run_index, e));
        }
        progress(&rec);
    }
    Ok(summary)
}

/// Runs missing plan entries on a pool of `workers` threads. Records are
/// appended in completion order through a single lock-guarded writer.
#[cfg(feature = "parallel")]
pub fn execute_parallel<S, P>(plan: &SweepPlan, sink: &mut S, workers: usize, progress: P) -> Result<ExecSummary>
where
    S: RecordSink + Send,
    P: Fn(&RunRecord) + Sync,
{
    use rayon::prelude::*;
    use std::sync::Mutex;

    let todo = pending(plan, sink);
    let summary = Mutex::new(ExecSummary {
        planned: plan.runs.len(),
        skipped: plan.runs.len() - todo.len(),
        ..ExecSummary::default()
    });
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let writer = Mutex::new(sink);
    pool.install(|| {
        todo.par_iter().for_each(|spec| {
            let rec = run_point(plan, spec);
            let io = append_with_retry(*writer.lock().expect("writer lock"), &rec);
            let mut s = summary.lock().expect("summary lock");
            s.count(&rec);
            if let Err(e) = io {
                s.io_failures.push((rec.run_index, e));
            }
            drop(s);
            progress(&rec);
        })
    });
    let mut summary = summary.into_inner().expect("summary lock");
    summary.io_failures.sort();
    Ok(summary)
}

/// Runs every plan entry missing from `sink` with up to `workers` concurrent
/// simulations. Without the `parallel` feature this is always sequential.
pub fn execute<S, P>(plan: &SweepPlan, sink: &mut S, workers: usize, progress: P) -> Result<ExecSummary>
where
    S: RecordSink + Send,
    P: Fn(&RunRecord) + Sync,
{
    if workers == 0 {
        return Err(Error::InvalidConfig("workers must be >= 1".into()));
    }
    #[cfg(feature = "parallel")]
    if workers > 1 {
        return execute_parallel(plan, sink, workers, progress);
    }
    execute_sequential(plan, sink, progress)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::{plan, SweepConfig};
    use std::collections::BTreeMap;
    use std::sync::Mutex;

    fn small_config() -> SweepConfig {
        SweepConfig {
            alphas: vec![5.0, 6.0, 7.0],
            betas: vec![0.333333333333],
            sides: vec![6],
            seeds_per_point: 2,
            n_sweeps: 3000,
            burn_in: 100,
            ..SweepConfig::default()
        }
    }

    #[derive(Default)]
    struct MemSink {
        records: BTreeMap<RunKey, RunRecord>,
        fail_next: usize,
        attempts: usize,
    }

    impl RecordSink for MemSink {
        fn contains(&self, key: &RunKey) -> bool {
            self.records.contains_key(key)
        }
        fn append(&mut self, record: &RunRecord) -> Result<()> {
            self.attempts += 1;
            if self.fail_next > 0 {
                self.fail_next -= 1;
                return Err(std::io::Error::other("disk full").into());
            }
            self.records.insert(record.key(), record.clone());
            Ok(())
        }
    }

    fn stripped(sink: &MemSink) -> Vec<RunRecord> {
        sink.records.values().map(|r| r.without_timing()).collect()
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let p = plan(&small_config()).unwrap();
        let mut one = MemSink::default();
        let mut four = MemSink::default();
        execute(&p, &mut one, 1, |_| {}).unwrap();
        execute(&p, &mut four, 4, |_| {}).unwrap();
        assert_eq!(stripped(&one), stripped(&four));
        assert_eq!(one.records.len(), 6);
    }

    #[test]
    fn resume_runs_only_missing() {
        let p = plan(&small_config()).unwrap();
        let mut sink = MemSink::default();
        let s = execute(&p, &mut sink, 2, |_| {}).unwrap();
        assert_eq!((s.executed, s.skipped), (6, 0));
        let full = stripped(&sink);

        let drop: Vec<_> = sink.records.keys().step_by(2).cloned().collect();
        for k in &drop {
            sink.records.remove(k);
        }
        let s = execute(&p, &mut sink, 2, |_| {}).unwrap();
        assert_eq!((s.executed, s.skipped), (3, 3));
        assert_eq!(stripped(&sink), full);

        let s = execute(&p, &mut sink, 2, |_| {}).unwrap();
        assert_eq!(s.executed, 0);
    }

    #[test]
    fn write_failure_retried_once() {
        let p = plan(&SweepConfig { seeds_per_point: 1, alphas: vec![6.0], ..small_config() }).unwrap();
        let mut sink = MemSink { fail_next: 1, ..MemSink::default() };
        let s = execute(&p, &mut sink, 1, |_| {}).unwrap();
        assert!(s.io_failures.is_empty());
        assert_eq!((sink.attempts, sink.records.len()), (2, 1));

        let mut sink = MemSink { fail_next: 2, ..MemSink::default() };
        let s = execute(&p, &mut sink, 1, |_| {}).unwrap();
        assert_eq!(s.io_failures.len(), 1);
        assert!(s.io_failures[0].1.contains("disk full"));
        assert!(sink.records.is_empty());
    }

    #[test]
    fn frozen_run_is_recorded_as_insufficient() {
        let cfg = SweepConfig {
            alphas: vec![0.0, 6.0],
            betas: vec![2.0],
            sides: vec![4],
            seeds_per_point: 1,
            n_sweeps: 500,
            burn_in: 50,
            ..SweepConfig::default()
        };
        let p = plan(&cfg).unwrap();
        let mut sink = MemSink::default();
        let s = execute(&p, &mut sink, 1, |_| {}).unwrap();
        assert_eq!(s.executed, 2);
        let frozen = sink.records.values().find(|r| r.alpha == 0.0).unwrap();
        assert!(matches!(frozen.outcome, RunOutcome::InsufficientData { transitions: 0 }));
        assert_eq!(frozen.variants.len(), 4);
    }

    #[test]
    fn progress_sees_every_run() {
        let p = plan(&small_config()).unwrap();
        let seen = Mutex::new(Vec::new());
        execute(&p, &mut MemSink::default(), 3, |r| seen.lock().unwrap().push(r.run_index)).unwrap();
        let mut seen = seen.into_inner().unwrap();
        seen.sort();
        assert_eq!(seen, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn zero_workers_rejected() {
        let p = plan(&small_config()).unwrap();
        assert!(execute(&p, &mut MemSink::default(), 0, |_| {}).is_err());
    }
}
