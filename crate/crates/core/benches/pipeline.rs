//! Serial against data-parallel timings for the heavy stages.
//!
//! `jobs=1` pins the rayon pool to one worker; `jobs=all` uses every core.
//! Build with `--no-default-features` to time the plain sequential backend.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use topicwise::corpus::{load_dataset, Dataset};
use topicwise::eval::{run_grid_cv, EvalConfig, LabeledSet};
use topicwise::exec::with_jobs;
use topicwise::features::{featurize_sessions, FeatureContext};
use topicwise::model::RegressorSpec;
use topicwise::select::{select, SelectConfig};
use topicwise::synth::{generate_corpus, SynthSpec, MANIFEST_FILE};

struct Fixture {
    _dir: tempfile::TempDir,
    ds: Dataset,
    ctx: FeatureContext,
    set: LabeledSet,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().expect("temp dir");
    generate_corpus(&SynthSpec { session_count: 100, seed: 11, ..Default::default() }, dir.path()).expect("synth");
    let ds = load_dataset(&dir.path().join(MANIFEST_FILE)).expect("manifest");
    let ctx = FeatureContext::example();
    let vectors = featurize_sessions(&ds.sessions, &ctx).expect("featurize");
    let set = LabeledSet::from_vectors(&ds.sessions, &vectors).expect("set");
    Fixture { _dir: dir, ds, ctx, set }
}

const JOBS: [(&str, Option<usize>); 2] = [("jobs=1", Some(1)), ("jobs=all", None)];

fn stages(c: &mut Criterion) {
    let f = fixture();
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    for (label, jobs) in JOBS {
        g.bench_with_input(BenchmarkId::new("featurize", label), &jobs, |b, &j| {
            b.iter(|| with_jobs(j, || featurize_sessions(&f.ds.sessions, &f.ctx).expect("featurize")))
        });
        g.bench_with_input(BenchmarkId::new("select", label), &jobs, |b, &j| {
            b.iter(|| with_jobs(j, || select(&f.set.x, &f.set.y, &SelectConfig::default()).expect("select")))
        });
        let grid = [RegressorSpec::sgd_squared(), RegressorSpec::random_forest(10)];
        let cfg = EvalConfig { seed: 3, ..Default::default() };
        g.bench_with_input(BenchmarkId::new("grid_cv", label), &jobs, |b, &j| {
            b.iter(|| with_jobs(j, || run_grid_cv(&f.set, &grid, &[2, 5, 8], &cfg).expect("grid")))
        });
    }
    g.finish();
}

criterion_group!(benches, stages);
criterion_main!(benches);
