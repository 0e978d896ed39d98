use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use episir::gp::ar1_log_density;
use episir::model::{propagate, CompartmentState, EpidemicParams};
use episir::sampler::{initial_state, stream_rng, BlockScales, LatentModel, ProposalScales, Target};
use episir_bench::problem;

fn bench_propagate(c: &mut Criterion) {
    let p = problem();
    let obs = &p.model.obs;
    let params = EpidemicParams {
        i_u0: 800.0,
        beta: vec![0.27; obs.n_days()],
        alpha: 1.0 / 9.3,
    };
    let v0 = CompartmentState::initial(obs.population, params.i_u0, obs.i_d0);
    c.bench_function("propagate_80_days", |b| {
        b.iter(|| propagate(black_box(v0), black_box(&params), &obs.cases, obs.population))
    });
}

fn bench_gp_density(c: &mut Criterion) {
    let n = 80;
    let values: Vec<f64> = (0..n).map(|t| -1.3 + 0.1 * (t as f64 * 0.2).sin()).collect();
    let mean = vec![-1.31; n];
    c.bench_function("ar1_log_density_80", |b| {
        b.iter(|| ar1_log_density(black_box(&values), black_box(&mean), 0.1, 0.9))
    });
}

fn bench_sweep(c: &mut Criterion) {
    let p = problem();
    let target = Target::new(&p.model, &p.prior, &p.gp, &p.diag).expect("consistent fixture");
    let mut rng = stream_rng(1, 0);
    let mut state = initial_state(&target, 100, &mut rng).expect("feasible start");
    let scales = BlockScales::uniform(&ProposalScales::default(), p.model.n_days());
    let mut scratch = p.model.workspace();
    c.bench_function("sweep_80_days", |b| {
        b.iter(|| state.sweep(1.0, &target, &scales, &mut scratch, &mut rng))
    });
}

criterion_group!(benches, bench_propagate, bench_gp_density, bench_sweep);
criterion_main!(benches);
