//! Episode metrics, parameter sweeps, heatmaps and config files.

pub mod config;
pub mod data;
pub mod sweep;

use std::collections::BTreeSet;

use crate::scenario::{HighwayLayout, VehicleClass, VehicleId, VehicleState, V_MAX};
use crate::sim::{EpisodeTrace, TraceRecord};

pub use config::{load_sim_config, load_sweep_spec};
pub use data::{collect_training_data, DataCollection};
pub use sweep::{emit_heatmap, run_sweep, Heatmap, ResultRow, SeedRow, SweepResults, SweepSpec};

/// Acceleration used for the free-flow reference time (the Accelerate
/// primitive magnitude).
pub const FREE_FLOW_ACCEL: f64 = 2.0;

/// Minimum time to reach the section end from `state`, accelerating at
/// `FREE_FLOW_ACCEL` up to `V_MAX`.
pub fn free_flow_time(state: &VehicleState, layout: &HighwayLayout) -> f64 {
    let d = layout.section_length - state.x;
    if d <= 0.0 {
        return 0.0;
    }
    let (a, v0) = (FREE_FLOW_ACCEL, state.v.min(V_MAX));
    let ramp_up = (V_MAX * V_MAX - v0 * v0) / (2.0 * a);
    if ramp_up >= d {
        (-v0 + (v0 * v0 + 2.0 * a * d).sqrt()) / a
    } else {
        (V_MAX - v0) / a + (d - ramp_up) / V_MAX
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeMetrics {
    pub spawned: usize,
    pub crashed: usize,
    /// Crashed vehicles whose collision involved at least one CAV.
    pub cav_involved_crashed: usize,
    pub retired: usize,
    pub ctrl_collision_rate: f64,
    pub crash_rate: f64,
    /// Delay of every vehicle that reached the section end, in id order.
    pub delays: Vec<f64>,
    /// NaN when no vehicle reached the section end.
    pub mean_delay: f64,
    /// Retired vehicles per hour of simulated time.
    pub throughput_vph: f64,
}

pub fn episode_metrics(trace: &EpisodeTrace) -> EpisodeMetrics {
    let cfg = trace.config().cloned().unwrap_or_default();
    let histories = trace.histories();
    let mut crashed: BTreeSet<VehicleId> = BTreeSet::new();
    let mut controllable: BTreeSet<VehicleId> = BTreeSet::new();
    for r in trace.collisions() {
        if let TraceRecord::Collision {
            a,
            class_a,
            b,
            class_b,
            ..
        } = r
        {
            let cav = *class_a == VehicleClass::Cav || *class_b == Some(VehicleClass::Cav);
            for id in std::iter::once(*a).chain(*b) {
                crashed.insert(id);
                if cav {
                    controllable.insert(id);
                }
            }
        }
    }
    let mut delays = Vec::new();
    for (id, h) in &histories {
        if let (Some(tf), false) = (h.retired_at, crashed.contains(id)) {
            let actual = f64::from(tf - h.spawn_time) * cfg.dt;
            delays.push(actual - free_flow_time(&h.spawn_state, &cfg.layout));
        }
    }
    let spawned = histories.len();
    let rate = |n: usize| {
        if spawned == 0 {
            0.0
        } else {
            n as f64 / spawned as f64
        }
    };
    let duration_h = f64::from(cfg.horizon_steps) * cfg.dt / 3600.0;
    EpisodeMetrics {
        spawned,
        crashed: crashed.len(),
        cav_involved_crashed: controllable.len(),
        retired: delays.len(),
        ctrl_collision_rate: rate(controllable.len()),
        crash_rate: rate(crashed.len()),
        mean_delay: if delays.is_empty() {
            f64::NAN
        } else {
            delays.iter().sum::<f64>() / delays.len() as f64
        },
        throughput_vph: delays.len() as f64 / duration_h,
        delays,
    }
}
