use std::collections::BTreeMap;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use hwcoord::astar::{self, AstarConfig, DynamicObstacleSet};
use hwcoord::pbs::PbsConfig;
use hwcoord::planners::{constant_speed, BkMAstarPlanner, BkPbsPlanner, Planner, PlannerRequest};
use hwcoord::prediction::Predictor;
use hwcoord::scenario::VehicleId;
use hwcoord_bench::{busy_world, warmed_simulation};

fn m_astar(c: &mut Criterion) {
    let (params, world) = busy_world(60);
    let cav = world
        .iter()
        .find(|r| r.is_cav())
        .expect("a CAV on the road");
    let mut obstacles = DynamicObstacleSet::new();
    for other in world.iter().filter(|r| r.id != cav.id) {
        let tr = constant_speed(other, &params);
        if astar::near(&cav.state, &tr, &params) {
            obstacles.insert(other.id, tr);
        }
    }
    let cfg = AstarConfig::default();
    c.bench_function("m_astar_single_cav", |b| {
        b.iter(|| astar::plan(cav, &obstacles, &params, &cfg))
    });
}

fn fleet(c: &mut Criterion) {
    let (params, world) = busy_world(60);
    let cavs: Vec<VehicleId> = world.iter().filter(|r| r.is_cav()).map(|r| r.id).collect();
    let (committed, previous) = (BTreeMap::new(), BTreeMap::new());
    let req = PlannerRequest {
        t: 60,
        world: &world,
        cavs: &cavs,
        committed: &committed,
        previous: &previous,
        params: &params,
    };
    let mut group = c.benchmark_group("fleet_plan");
    group.sample_size(20);
    let mut pbs = BkPbsPlanner {
        predictor: Predictor::RolloutOracle,
        astar: AstarConfig::default(),
        pbs: PbsConfig::default(),
    };
    group.bench_function("bk_pbs", |b| b.iter(|| pbs.plan(&req)));
    let mut mastar = BkMAstarPlanner {
        predictor: Predictor::RolloutOracle,
        astar: AstarConfig::default(),
    };
    group.bench_function("bk_m_astar", |b| b.iter(|| mastar.plan(&req)));
    group.finish();
}

fn episode_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("episode");
    group.sample_size(10);
    group.bench_function("step_bk_pbs", |b| {
        b.iter_batched(
            || warmed_simulation(60),
            |mut sim| sim.step().expect("step"),
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group!(benches, m_astar, fleet, episode_step);
criterion_main!(benches);
