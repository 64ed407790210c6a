use a4d_bench::{compiler_errors, fenced_reply, ghidra_source, records, test_failures};
use a4d_core::agent::build_prompt;
use a4d_core::agent::extract::extract_code_text;
use a4d_core::agent::feedback::format_feedback;
use a4d_core::{compute_rates, convergence_curve, detect_empty_body, normalize, ConstraintLevel, GroupKey};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn normalization(c: &mut Criterion) {
    let mut group = c.benchmark_group("normalize");
    for n in [4, 64] {
        let src = ghidra_source(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &src, |b, s| b.iter(|| normalize(black_box(s))));
    }
    group.finish();
}

fn empty_body(c: &mut Criterion) {
    let src = ghidra_source(64);
    c.bench_function("detect_empty_body/64", |b| b.iter(|| detect_empty_body(black_box(&src), Some("FUN_00101fc0"))));
}

fn feedback(c: &mut Criterion) {
    let tool = compiler_errors(200);
    let tests = test_failures(8, 400);
    c.bench_function("format_feedback/tool", |b| b.iter(|| format_feedback(black_box(&tool))));
    c.bench_function("format_feedback/tests", |b| b.iter(|| format_feedback(black_box(&tests))));
    let src = ghidra_source(16);
    c.bench_function("build_prompt/L3", |b| {
        b.iter(|| build_prompt(black_box(&src), black_box(&tests), ConstraintLevel::L3.passed()))
    });
}

fn extraction(c: &mut Criterion) {
    let reply = fenced_reply(&ghidra_source(32));
    c.bench_function("extract_code_text/fenced", |b| b.iter(|| extract_code_text(black_box(&reply))));
}

fn reporting(c: &mut Criterion) {
    let mut group = c.benchmark_group("compute_rates");
    for n in [100, 10_000] {
        let rs = records(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &rs, |b, rs| {
            b.iter(|| compute_rates(black_box(rs), &[GroupKey::Backend, GroupKey::OptLevel]))
        });
    }
    group.finish();
    let rs = records(10_000);
    c.bench_function("convergence_curve/10000", |b| b.iter(|| convergence_curve(black_box(&rs), 7)));
}

criterion_group!(benches, normalization, empty_body, feedback, extraction, reporting);
criterion_main!(benches);
