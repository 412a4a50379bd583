use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use spdelab_core::config::ScenarioConfig;
use spdelab_core::coupling::{build_harnack_plan, run_coupled, CouplingPlan, PlanTable};
use spdelab_core::rng::{path_rng, Purpose};
use spdelab_core::zvonkin::{StateGrid, Transition};
use spdelab_core::{build_model, Scenario};

fn mild_path(c: &mut Criterion) {
    let sc = Scenario::build(&ScenarioConfig::default()).unwrap();
    c.bench_function("mild path, default model", |bench| {
        let mut i = 0u64;
        bench.iter(|| {
            i += 1;
            let mut rng = path_rng(1, Purpose::Reference, i);
            black_box(sc.engine.run_mild(
                &sc.drift,
                &sc.functional,
                &sc.xi0,
                sc.grid.n_steps,
                &mut rng,
                |_, _, _| {},
            ))
        })
    });
}

fn coupled_path(c: &mut Criterion) {
    let sc = Scenario::build(&ScenarioConfig::default()).unwrap();
    let h = sc.constant_segment(&[0.5; 8]);
    let plan = CouplingPlan::from(build_harnack_plan(&sc.ops, sc.grid.horizon, sc.config.delay.r, &h).unwrap());
    let table = PlanTable::new(&plan, &sc.engine, sc.grid.max_lag).unwrap();
    c.bench_function("coupled path with ledger", |bench| {
        let mut i = 0u64;
        bench.iter(|| {
            i += 1;
            let mut rng = path_rng(1, Purpose::Reference, i);
            black_box(
                run_coupled(
                    &sc.engine,
                    &sc.drift,
                    &sc.functional,
                    &sc.xi0,
                    &[&table],
                    &mut rng,
                    |_, _, _| {},
                    |run| run.ledgers[0].quad_var,
                )
                .unwrap(),
            )
        })
    });
}

fn transition(c: &mut Criterion) {
    let mut cfg = ScenarioConfig::default();
    cfg.model.n1 = 1;
    cfg.model.n2 = 1;
    cfg.model.n3 = 1;
    let ops = build_model(&cfg).unwrap();
    let grid = StateGrid::new(1, 1, 4.0, 17, 1.0, 10).unwrap();
    let mut group = c.benchmark_group("grid solver");
    group.sample_size(10);
    group.bench_function("transition assembly 17x17", |bench| {
        bench.iter(|| black_box(Transition::new(&ops, &grid, 6).unwrap().nnz()))
    });
    group.finish();
}

criterion_group!(benches, mild_path, coupled_path, transition);
criterion_main!(benches);
