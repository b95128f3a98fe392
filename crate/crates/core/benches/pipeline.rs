use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use coreadership::communities::project;
use coreadership::coread::{build_coread, build_incidence, CoreadOptions};
use coreadership::logstore::{dedup_reads, parse_events_str, DedupPeriod, JournalFilter, ParseOptions};
use coreadership::pipeline::{ingest, AnalysisParams};
use coreadership::spectra::{eigendecompose, nested_sweep, EigenOptions, SweepOptions};
use coreadership::synth::{generate, SynthConfig};
use coreadership::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn stages(c: &mut Criterion) {
    let out = generate(&SynthConfig::default()).expect("default config is valid");
    let events = parse_events_str(&out.log, &ParseOptions::default()).expect("synthetic log parses").events;
    let params = AnalysisParams {
        n_s: 800,
        ..Default::default()
    };
    let sample = ingest(vec![out.log.as_bytes()], &params, Exec::default()).expect("ingest").sample;
    let inc = build_incidence(&sample);

    let mut g = c.benchmark_group("dedup");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| dedup_reads(black_box(&events), &JournalFilter::core_journals(), DedupPeriod::Month, exec))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("coread");
    for (name, exec) in MODES {
        let opts = CoreadOptions {
            exec,
            ..Default::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| build_coread(black_box(&inc), &opts).expect("non-empty"))
        });
    }
    g.finish();

    let m = build_coread(&inc, &CoreadOptions::default()).expect("non-empty");
    let mut g = c.benchmark_group("eigendecompose_800");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = EigenOptions {
            exec,
            ..Default::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| eigendecompose(black_box(&m), &opts).expect("converges"))
        });
    }
    g.finish();

    let summary = eigendecompose(&m, &EigenOptions::default()).expect("converges");
    let mut g = c.benchmark_group("project_k3");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| project(black_box(&m), &summary, &sample, 3, exec).expect("k fits"))
        });
    }
    g.finish();

    let sizes = [50, 100, 200, 400, 800];
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = SweepOptions {
            coread: CoreadOptions {
                exec,
                ..Default::default()
            },
            eigen: EigenOptions {
                vectors: false,
                exec,
                ..Default::default()
            },
            exec,
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| nested_sweep(black_box(&sample), &sizes, &opts).expect("valid sizes"))
        });
    }
    g.finish();
}

criterion_group!(benches, stages);
criterion_main!(benches);
