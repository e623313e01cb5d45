use criterion::{criterion_group, criterion_main, Criterion};
use spinmarket_core::sweep::{execute_sequential, plan, RecordSink, RunKey, RunRecord, SweepConfig};
use spinmarket_core::Result;

#[derive(Default)]
struct Discard(usize);

impl RecordSink for Discard {
    fn contains(&self, _: &RunKey) -> bool {
        false
    }
    fn append(&mut self, _: &RunRecord) -> Result<()> {
        self.0 += 1;
        Ok(())
    }
}

fn config() -> SweepConfig {
    SweepConfig {
        alphas: vec![4.0, 5.0, 6.0, 7.0],
        betas: vec![0.5],
        sides: vec![8],
        seeds_per_point: 2,
        n_sweeps: 2000,
        burn_in: 100,
        ..SweepConfig::default()
    }
}

fn executors(c: &mut Criterion) {
    let p = plan(&config()).unwrap();
    let mut g = c.benchmark_group("execute");
    g.sample_size(10);
    g.bench_function("sequential", |b| {
        b.iter(|| execute_sequential(&p, &mut Discard::default(), |_| {}).unwrap())
    });
    #[cfg(feature = "parallel")]
    {
        let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).max(2);
        g.bench_function(format!("parallel/{workers}"), |b| {
            b.iter(|| {
                spinmarket_core::sweep::execute_parallel(&p, &mut Discard::default(), workers, |_| {}).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, executors);
criterion_main!(benches);
