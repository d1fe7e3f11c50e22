use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use jamleg_bench::{falling_leg, synthetic_grf, triangle_cycle};
use jamleg_core::analysis::{gaussian_lowpass, savgol, segment_and_peaks, GAUSSIAN_SIGMA_S, SAVGOL_WINDOW};
use jamleg_core::dynamics::step;
use jamleg_core::scenarios::{contribution_analysis, PerturbMode, PerturbationTable};
use jamleg_core::tendon::{calibrate_leg_tendon, FibreBundleSpec, JammingState, TendonModel};

fn tendon(c: &mut Criterion) {
    let cal = calibrate_leg_tendon().unwrap();
    let mut model = TendonModel::build(&FibreBundleSpec::new(2.0, 4), &cal.params, &JammingState::jammed()).unwrap();
    let path = triangle_cycle();
    c.bench_function("tendon_cycle_801_steps", |b| {
        b.iter(|| {
            model.reset();
            for &x in &path {
                black_box(model.force_step(x).unwrap());
            }
        })
    });
}

fn dynamics(c: &mut Criterion) {
    let f = falling_leg().unwrap();
    c.bench_function("leg_step", |b| {
        b.iter_batched(
            || f.state.clone(),
            |mut s| step(&f.model, &f.env, &f.actuation, &mut s, 1e-4).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn analysis(c: &mut Criterion) {
    let grf = synthetic_grf(4).unwrap();
    c.bench_function("gaussian_lowpass_40k", |b| {
        b.iter(|| gaussian_lowpass(black_box(&grf), GAUSSIAN_SIGMA_S).unwrap())
    });
    c.bench_function("savgol_40k", |b| {
        b.iter(|| savgol(black_box(&grf.values), SAVGOL_WINDOW, 3).unwrap())
    });
    let smooth = gaussian_lowpass(&grf, GAUSSIAN_SIGMA_S).unwrap();
    c.bench_function("segment_and_peaks_40k", |b| {
        b.iter(|| segment_and_peaks(black_box(&smooth), 2.0, 10.0).unwrap())
    });
    let table = PerturbationTable::fixture();
    c.bench_function("contribution_analysis", |b| {
        b.iter(|| contribution_analysis(black_box(table.column(PerturbMode::ToeDown))).unwrap())
    });
}

criterion_group!(benches, tendon, dynamics, analysis);
criterion_main!(benches);
