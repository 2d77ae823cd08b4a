//! Bernoulli arrivals per entry lane and deferred release.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::scenario::{
    states_overlap, HighwayLayout, Lane, VehicleClass, VehicleRecord, VehicleState, VEHICLE_LENGTH,
};

use super::SimConfig;

/// A vehicle waiting at its entry point.
#[derive(Clone, Debug, PartialEq)]
pub struct Arrival {
    pub lane: Lane,
    pub class: VehicleClass,
    pub v0: f64,
    pub target_speed: Option<f64>,
    pub t: u32,
}

/// Hourly arrival rate of each entry lane (main lanes first, ramp last).
pub fn entry_rates(cfg: &SimConfig) -> Vec<f64> {
    let main = cfg.layout.main_lane_count;
    let mut rates = vec![cfg.arrival_rate * cfg.main_share / main as f64; main];
    rates.push(cfg.arrival_rate * (1.0 - cfg.main_share));
    rates
}

/// Draws this step's arrivals. Draw order is fixed so the stream is
/// reproducible: per entry, one uniform, then class, speed and target speed.
pub fn spawn_arrivals(rng: &mut ChaCha8Rng, cfg: &SimConfig, t: u32) -> Vec<Arrival> {
    let mut out = Vec::new();
    for (lane, rate) in entry_rates(cfg).into_iter().enumerate() {
        let p = rate * cfg.dt / 3600.0;
        if !(rng.gen::<f64>() < p) {
            continue;
        }
        let class = if rng.gen::<f64>() < cfg.penetration {
            VehicleClass::Cav
        } else {
            VehicleClass::Hdv
        };
        let [lo, hi] = cfg.speed_init;
        let v0 = rng.gen_range(lo..=hi);
        let [tlo, thi] = cfg.driver.target_speed_range;
        let target = rng.gen_range(tlo..=thi);
        out.push(Arrival {
            lane,
            class,
            v0,
            target_speed: (class == VehicleClass::Hdv).then_some(target),
            t,
        });
    }
    out
}

/// Entry position of a lane.
pub fn entry_state(lane: Lane, v0: f64, layout: &HighwayLayout) -> VehicleState {
    VehicleState::at(0.0, layout.lane_center(lane), v0)
}

/// True if a vehicle entering `lane` at `v0` neither overlaps anyone nor
/// leaves less than `headway` seconds to the nearest downstream vehicle.
pub fn entry_clear(
    lane: Lane,
    v0: f64,
    world: &[VehicleRecord],
    layout: &HighwayLayout,
    headway: f64,
) -> bool {
    let s = entry_state(lane, v0, layout);
    let mut nearest: Option<f64> = None;
    for r in world {
        if states_overlap(&s, &r.state) {
            return false;
        }
        let occupies = r.lane(layout).ok() == Some(lane)
            || r.lane_change.is_some_and(|lc| lc.target_lane == lane);
        if occupies && r.state.x >= s.x {
            nearest = Some(nearest.map_or(r.state.x, |n: f64| n.min(r.state.x)));
        }
    }
    match nearest {
        None => true,
        Some(x) => v0 <= 0.0 || (x - s.x - VEHICLE_LENGTH) / v0 >= headway,
    }
}

/// Per-entry FIFO of deferred arrivals.
#[derive(Clone, Debug, Default)]
pub struct SpawnQueue {
    pub pending: Vec<VecDeque<Arrival>>,
}

impl SpawnQueue {
    pub fn new(lanes: usize) -> Self {
        Self {
            pending: vec![VecDeque::new(); lanes],
        }
    }

    pub fn push(&mut self, a: Arrival) {
        self.pending[a.lane].push_back(a);
    }

    pub fn len(&self) -> usize {
        self.pending.iter().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Releases at most one arrival per entry whose entry is clear.
    pub fn release(
        &mut self,
        world: &[VehicleRecord],
        layout: &HighwayLayout,
        headway: f64,
    ) -> Vec<Arrival> {
        let mut out = Vec::new();
        for q in &mut self.pending {
            let Some(front) = q.front() else { continue };
            if entry_clear(front.lane, front.v0, world, layout, headway) {
                out.extend(q.pop_front());
            }
        }
        out
    }
}
