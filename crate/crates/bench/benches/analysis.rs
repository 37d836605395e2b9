use std::path::PathBuf;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use digestrace_core::conformance::{load_corpus, CorpusCase};
use digestrace_core::detector::{ablate, detect};
use digestrace_core::digest::PredicateMode;
use digestrace_core::digests::{product_by_names, DIGEST_NAMES};
use digestrace_core::oracle::{enumerate_traces, find_racy_pairs, Semantics};
use digestrace_core::solver::analyze;

const CASES: [&str; 4] = ["prog1", "once_fig", "join_after_loop", "create_loop"];

fn cases() -> Vec<CorpusCase> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/corpus");
    load_corpus(&dir)
        .unwrap()
        .into_iter()
        .filter(|c| CASES.contains(&c.name.as_str()))
        .collect()
}

fn solve(c: &mut Criterion) {
    let product = product_by_names(&DIGEST_NAMES).unwrap();
    let mut group = c.benchmark_group("solve");
    for case in cases() {
        group.bench_with_input(BenchmarkId::from_parameter(&case.name), &case, |b, case| {
            b.iter(|| analyze(black_box(&case.lowered), &product).unwrap())
        });
    }
    group.finish();
}

fn detect_races(c: &mut Criterion) {
    let product = product_by_names(&DIGEST_NAMES).unwrap();
    let modes = [PredicateMode::Bespoke; 5];
    let mut group = c.benchmark_group("detect");
    for case in cases() {
        let solution = analyze(&case.lowered, &product).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(&case.name), &case, |b, case| {
            b.iter(|| detect(&case.lowered, black_box(&solution), &product, &modes).unwrap())
        });
    }
    group.finish();
}

fn ablation(c: &mut Criterion) {
    let case = cases().into_iter().find(|c| c.name == "join_after_loop").unwrap();
    c.bench_function("ablate/join_after_loop", |b| {
        b.iter(|| ablate(black_box(&case.program), PredicateMode::Generic).unwrap())
    });
}

fn oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle");
    group.sample_size(20);
    for case in cases() {
        let bounds = case.bounds();
        group.bench_with_input(BenchmarkId::from_parameter(&case.name), &case, |b, case| {
            b.iter(|| {
                let sem = Semantics::new(&case.lowered);
                let ex = enumerate_traces(&sem, bounds);
                find_racy_pairs(&sem, &ex.traces).len()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, solve, detect_races, ablation, oracle);
criterion_main!(benches);
