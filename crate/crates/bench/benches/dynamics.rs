use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use gem_core::analysis::analyze;
use gem_core::coils::solve_currents;
use gem_core::dynamics::{propagate_field_into, EtdCoefficients, RunOptions};
use gem_core::scenario::{preset_scenario, PresetKind, PresetParams};
use gem_core::{CoilArray, Complex64};

fn basic_echo(c: &mut Criterion) {
    let s = preset_scenario(PresetKind::BasicEcho, &PresetParams::new()).unwrap();
    let mut g = c.benchmark_group("scenario");
    g.sample_size(10);
    g.bench_function("basic-echo run", |b| b.iter(|| s.run(black_box(&RunOptions::default())).unwrap()));
    let rec = s.run(&RunOptions::default()).unwrap();
    g.bench_function("basic-echo analysis", |b| b.iter(|| analyze(black_box(&s), black_box(&rec)).unwrap()));
    g.finish();
}

fn step(c: &mut Criterion) {
    let n = 512;
    let delta: Vec<f64> = (0..n).map(|j| -3.5 + 7.0 * j as f64 / (n - 1) as f64).collect();
    let coeffs = EtdCoefficients::new(&delta, 0.0, 0.0125);
    let field = vec![Complex64::new(0.3, 0.1); n];
    let mut sigma = vec![Complex64::new(0.0, 0.0); n];
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    c.bench_function("coherence step n_z=512", |b| {
        b.iter(|| {
            coeffs.apply(&mut sigma, black_box(&field), 1.0);
            coeffs.correct(&mut sigma, &field, &field, 1.0);
        })
    });
    c.bench_function("field propagation n_z=512", |b| {
        b.iter(|| propagate_field_into(black_box(&sigma), Complex64::new(1.0, 0.0), 22.0, 1.0 / 511.0, &mut out))
    });
}

fn coils(c: &mut Criterion) {
    let array = CoilArray::default();
    let z: Vec<f64> = (0..=160).map(|j| 0.1 + 0.8 * j as f64 / 160.0).collect();
    let ramp: Vec<f64> = z.iter().map(|z| 2.5 * (z - 0.5)).collect();
    let ridge = array.default_ridge(&z);
    c.bench_function("coil solve 161 points", |b| {
        b.iter(|| solve_currents(black_box(&array), black_box(&ramp), &z, ridge, 0.8).unwrap())
    });
}

criterion_group!(benches, basic_echo, step, coils);
criterion_main!(benches);
