use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use lcflow::duhamel::op_c;
use lcflow::solver::{director_step, transport, velocity_step, InnerSettings};
use lcflow::spectral::leray_project;
use lcflow_bench::{frozen_series, small_data, uncached};

fn fft(c: &mut Criterion) {
    let mut group = c.benchmark_group("fft");
    for m in [32, 64, 128] {
        let (s, _) = small_data(m, 8);
        group.bench_with_input(BenchmarkId::from_parameter(m), &s.u0, |b, u| {
            b.iter(|| black_box(uncached(u).fourier().len()))
        });
    }
    group.finish();
}

fn leray(c: &mut Criterion) {
    let mut group = c.benchmark_group("leray");
    for m in [32, 64, 128] {
        let (s, _) = small_data(m, 8);
        group.bench_with_input(BenchmarkId::from_parameter(m), &s.u0, |b, u| b.iter(|| leray_project(&uncached(u)).unwrap()));
    }
    group.finish();
}

fn duhamel_c(c: &mut Criterion) {
    let (s, _) = small_data(64, 8);
    let mut group = c.benchmark_group("op_c");
    for steps in [32, 128] {
        let f = frozen_series(&s.u0, steps);
        group.bench_with_input(BenchmarkId::from_parameter(steps), &f, |b, f| b.iter(|| op_c(f).unwrap()));
    }
    group.finish();
}

/// One outer iteration (transport, director, velocity) from the first iterate.
fn picard_step(c: &mut Criterion) {
    let (s, cfg) = small_data(64, 64);
    let inner = InnerSettings::default();
    let steps = cfg.steps().unwrap();
    let zero = |comp: usize| lcflow::duhamel::TimeSeriesField::sample(cfg.t_end, steps, |_| lcflow::SpectralField::zeros(*s.u0.grid(), comp)).unwrap();
    let u = zero(2);
    let gpi = zero(2);
    let d = lcflow::duhamel::TimeSeriesField::sample(cfg.t_end, steps, |_| s.d0.clone()).unwrap();
    c.bench_function("picard_step_64x64_k64", |b| {
        b.iter(|| {
            let a = transport(&s.a0, &u).unwrap();
            let dn = director_step(&d, &u, &s.d0, s.constants.gamma, inner, false).unwrap();
            velocity_step(&u, &dn, &a, &gpi, &s.u0, &s.constants, inner).unwrap()
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = fft, leray, duhamel_c, picard_step
}

criterion_main!(benches);
