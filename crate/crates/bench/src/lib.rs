//! Fixtures shared by the planning benchmarks.

use hwcoord::params::Params;
use hwcoord::scenario::VehicleRecord;
use hwcoord::sim::{SimConfig, Simulation};

/// Dense merge traffic used by every benchmark.
pub fn busy_config() -> SimConfig {
    SimConfig {
        arrival_rate: 3000.0,
        penetration: 0.8,
        seed: 7,
        ..SimConfig::default()
    }
}

/// A simulation advanced `steps` steps into `busy_config`.
pub fn warmed_simulation(steps: u32) -> Simulation {
    let mut sim = Simulation::new(busy_config()).expect("valid config");
    for _ in 0..steps {
        sim.step().expect("step");
    }
    sim
}

/// A world snapshot with several CAVs on the road.
pub fn busy_world(steps: u32) -> (Params, Vec<VehicleRecord>) {
    let sim = warmed_simulation(steps);
    (sim.params().clone(), sim.world())
}
