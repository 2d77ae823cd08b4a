//! Discrete-time episode engine.

pub mod spawn;
pub mod trace;

use std::collections::{BTreeMap, VecDeque};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::astar::AstarConfig;
use crate::driver::{hdv_transition, DriverConfig, MergeDraw, Neighborhood};
use crate::error::{Error, Result};
use crate::kinematics::{
    ActivePrimitive, ControlInput, LaneChange, MotionPrimitive, PrimitiveConfig, PrimitiveKind,
    Trajectory,
};
use crate::params::Params;
use crate::pbs::PbsConfig;
use crate::planners::{
    BkMAstarPlanner, BkPbsPlanner, ExternalTracePlanner, IdmMobilPlanner, Planner, PlannerKind,
    PlannerRequest, PlannerResponse,
};
use crate::prediction::{Classifier, Predictor, PredictorKind};
use crate::scenario::{bounding_box, boxes_overlap, HighwayLayout, VehicleId, VehicleRecord};

pub use spawn::{spawn_arrivals, Arrival, SpawnQueue};
pub use trace::{
    verify_kinematics, Action, EpisodeTrace, TraceRecord, VehicleHistory, VehicleStatus,
    VehicleStep,
};

/// Stream index of the arrival process; vehicle streams use their id.
const ARRIVAL_STREAM: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplanMode {
    /// Replan a CAV when its committed primitives are exhausted.
    #[default]
    EventDriven,
    /// Replan every CAV every step, except during a lane change.
    Strict,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeMode {
    /// HDV merges are Bernoulli draws on the merge probability.
    #[default]
    Stochastic,
    /// HDV merges threshold the merge probability at one half.
    Deterministic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon_steps: u32,
    /// Planning horizon in steps.
    pub plan_horizon: usize,
    pub preview_horizon: Option<usize>,
    /// Veh/h over all entries.
    pub arrival_rate: f64,
    pub penetration: f64,
    pub seed: u64,
    pub speed_init: [f64; 2],
    pub planner: PlannerKind,
    pub commit_primitives: usize,
    pub replan_mode: ReplanMode,
    pub merge_mode: MergeMode,
    /// Share of the arrival rate entering on the main lanes.
    pub main_share: f64,
    /// Minimum time gap to the nearest downstream vehicle at entry.
    pub spawn_headway: f64,
    pub predictor: PredictorKind,
    pub classifier_path: Option<PathBuf>,
    pub external_trace: Option<PathBuf>,
    pub layout: HighwayLayout,
    pub driver: DriverConfig,
    pub primitives: PrimitiveConfig,
    pub astar: AstarConfig,
    pub pbs: PbsConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.2,
            horizon_steps: 400,
            plan_horizon: 40,
            preview_horizon: None,
            arrival_rate: 2500.0,
            penetration: 0.6,
            seed: 0,
            speed_init: [25.0, 35.0],
            planner: PlannerKind::BkPbs,
            commit_primitives: 1,
            replan_mode: ReplanMode::EventDriven,
            merge_mode: MergeMode::Stochastic,
            main_share: 0.7,
            spawn_headway: 2.0,
            predictor: PredictorKind::RolloutOracle,
            classifier_path: None,
            external_trace: None,
            layout: HighwayLayout::default(),
            driver: DriverConfig::default(),
            primitives: PrimitiveConfig::default(),
            astar: AstarConfig::default(),
            pbs: PbsConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn params(&self) -> Params {
        Params {
            layout: self.layout.clone(),
            driver: self.driver.clone(),
            primitives: self.primitives.clone(),
            dt: self.dt,
            horizon: self.plan_horizon,
            preview_horizon: self.preview_horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if self.horizon_steps == 0 {
            return bad("horizon_steps must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.penetration) {
            return bad("penetration must be in [0, 1]");
        }
        if !(self.arrival_rate >= 0.0) || !self.arrival_rate.is_finite() {
            return bad("arrival_rate must be a non-negative number");
        }
        let [lo, hi] = self.speed_init;
        if !(lo >= 0.0 && lo <= hi && hi <= self.primitives.bicycle().v_max) {
            return bad("speed_init must satisfy 0 <= lo <= hi <= v_max");
        }
        if self.commit_primitives == 0 {
            return bad("commit_primitives must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.main_share) || !(self.spawn_headway >= 0.0) {
            return bad("main_share must be in [0, 1] and spawn_headway non-negative");
        }
        if self.planner == PlannerKind::ExternalTrace && self.external_trace.is_none() {
            return bad("EXTERNAL_TRACE planner needs external_trace");
        }
        if self.predictor == PredictorKind::LogisticClassifier && self.classifier_path.is_none() {
            return bad("LogisticClassifier predictor needs classifier_path");
        }
        self.params().validate()
    }

    pub fn build_predictor(&self) -> Result<Predictor> {
        Ok(match self.predictor {
            PredictorKind::RolloutOracle => Predictor::RolloutOracle,
            PredictorKind::LogisticClassifier => {
                let path = self
                    .classifier_path
                    .as_deref()
                    .ok_or_else(|| Error::InvalidConfig("classifier_path missing".into()))?;
                let text = std::fs::read_to_string(path)?;
                Predictor::LogisticClassifier(serde_json::from_str::<Classifier>(&text)?)
            }
        })
    }

    pub fn build_planner(&self) -> Result<Box<dyn Planner>> {
        Ok(match self.planner {
            PlannerKind::BkPbs => Box::new(BkPbsPlanner {
                predictor: self.build_predictor()?,
                astar: self.astar.clone(),
                pbs: self.pbs.clone(),
            }),
            PlannerKind::BkMAstar => Box::new(BkMAstarPlanner {
                predictor: self.build_predictor()?,
                astar: self.astar.clone(),
            }),
            PlannerKind::IdmMobil => Box::new(IdmMobilPlanner),
            PlannerKind::ExternalTrace => {
                let path = self
                    .external_trace
                    .as_deref()
                    .ok_or_else(|| Error::InvalidConfig("external_trace missing".into()))?;
                Box::new(ExternalTracePlanner::load(path)?)
            }
        })
    }
}

/// Per-vehicle simulator state.
#[derive(Clone, Debug)]
struct Slot {
    rec: VehicleRecord,
    rng: Option<ChaCha8Rng>,
    active: Option<ActivePrimitive>,
    queue: VecDeque<MotionPrimitive>,
    /// Planned primitives beyond the commitment.
    tail: Vec<MotionPrimitive>,
    control: Option<ControlInput>,
    action: Action,
}

impl Slot {
    fn idle(&self) -> bool {
        self.active.is_none_or(|a| a.finished())
    }

    fn mid_lane_change(&self) -> bool {
        self.active
            .is_some_and(|a| a.primitive.kind.is_lane_change() && !a.finished())
    }

    fn step_record(&self, status: VehicleStatus) -> VehicleStep {
        VehicleStep {
            id: self.rec.id,
            class: self.rec.class,
            state: self.rec.state,
            control: self.control,
            action: self.action,
            status,
            lane_change: self.rec.lane_change,
            target_speed: self.rec.idm_target_speed,
            spawn_time: self.rec.spawn_time,
        }
    }
}

/// Vehicle counts; `spawned == active + retired + crashed` always holds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    pub spawned: usize,
    pub active: usize,
    pub retired: usize,
    pub crashed: usize,
}

fn brake_now(rec: &VehicleRecord, params: &Params) -> ActivePrimitive {
    let p = params
        .primitives
        .primitive(PrimitiveKind::EmergencyBrake, params.dt);
    ActivePrimitive::start(&rec.state, p, &params.layout, &params.primitives).unwrap_or_else(|_| {
        ActivePrimitive {
            primitive: p,
            lateral: LaneChange::keep(0, &params.layout, p.steps),
        }
    })
}

pub struct Simulation {
    cfg: SimConfig,
    params: Params,
    planner: Box<dyn Planner>,
    t: u32,
    started: bool,
    vehicles: BTreeMap<VehicleId, Slot>,
    pending: SpawnQueue,
    arrivals: ChaCha8Rng,
    next_id: u32,
    counts: Counts,
    trace: EpisodeTrace,
    last_response: Option<PlannerResponse>,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let planner = cfg.build_planner()?;
        Self::with_planner(cfg, planner)
    }

    /// Uses `planner` in place of the one named in the config.
    pub fn with_planner(cfg: SimConfig, planner: Box<dyn Planner>) -> Result<Self> {
        cfg.validate()?;
        let mut arrivals = ChaCha8Rng::seed_from_u64(cfg.seed);
        arrivals.set_stream(ARRIVAL_STREAM);
        let mut trace = EpisodeTrace::default();
        trace.push(TraceRecord::Header {
            version: trace::TRACE_VERSION,
            config: Box::new(cfg.clone()),
        });
        Ok(Self {
            params: cfg.params(),
            pending: SpawnQueue::new(cfg.layout.lane_count()),
            planner,
            t: 0,
            started: false,
            vehicles: BTreeMap::new(),
            arrivals,
            next_id: 0,
            counts: Counts::default(),
            trace,
            last_response: None,
            cfg,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn time(&self) -> u32 {
        self.t
    }

    pub fn done(&self) -> bool {
        self.t >= self.cfg.horizon_steps
    }

    pub fn counts(&self) -> Counts {
        self.counts
    }

    pub fn trace(&self) -> &EpisodeTrace {
        &self.trace
    }

    /// Planner output from the most recent step, if the planner ran.
    pub fn last_response(&self) -> Option<&PlannerResponse> {
        self.last_response.as_ref()
    }

    /// Active vehicles in id order.
    pub fn world(&self) -> Vec<VehicleRecord> {
        self.vehicles.values().map(|s| s.rec.clone()).collect()
    }

    /// Places a vehicle at the current time index, before the first step.
    pub fn insert_vehicle(&mut self, mut rec: VehicleRecord) -> Result<()> {
        if self.started {
            return Err(Error::InvalidConfig(
                "vehicles can only be inserted before the first step".into(),
            ));
        }
        if self.vehicles.contains_key(&rec.id) {
            return Err(Error::InvalidConfig(format!(
                "duplicate vehicle id {}",
                rec.id
            )));
        }
        rec.spawn_time = self.t;
        self.next_id = self.next_id.max(rec.id.0 + 1);
        self.admit(rec);
        Ok(())
    }

    fn admit(&mut self, rec: VehicleRecord) {
        let rng = (!rec.is_cav()).then(|| {
            let mut r = ChaCha8Rng::seed_from_u64(self.cfg.seed);
            r.set_stream(u64::from(rec.id.0));
            r
        });
        self.trace.push(TraceRecord::Spawn {
            t: self.t,
            id: rec.id,
            class: rec.class,
            state: rec.state,
            target_speed: rec.idm_target_speed,
        });
        self.counts.spawned += 1;
        self.counts.active += 1;
        self.vehicles.insert(
            rec.id,
            Slot {
                rec,
                rng,
                active: None,
                queue: VecDeque::new(),
                tail: Vec::new(),
                control: None,
                action: Action::Spawned,
            },
        );
    }

    fn spawn(&mut self, t: u32) {
        for a in spawn_arrivals(&mut self.arrivals, &self.cfg, t) {
            self.pending.push(a);
        }
        let world = self.world();
        for a in self
            .pending
            .release(&world, &self.cfg.layout, self.cfg.spawn_headway)
        {
            let id = VehicleId(self.next_id);
            self.next_id += 1;
            let mut rec = VehicleRecord::new(
                id,
                a.class,
                spawn::entry_state(a.lane, a.v0, &self.cfg.layout),
            );
            rec.idm_target_speed = a.target_speed;
            rec.spawn_time = t;
            self.admit(rec);
        }
    }

    fn record_step(&mut self, t: u32, extra: Vec<VehicleStep>) {
        let mut vehicles: Vec<VehicleStep> = self
            .vehicles
            .values()
            .map(|s| s.step_record(VehicleStatus::Active))
            .chain(extra)
            .collect();
        vehicles.sort_by_key(|v| v.id);
        self.trace.push(TraceRecord::Step { t, vehicles });
    }

    fn ensure_started(&mut self) {
        if !self.started {
            self.started = true;
            self.spawn(self.t);
            self.record_step(self.t, Vec::new());
        }
    }

    /// Exact remaining motion of a CAV's active and queued primitives.
    fn committed_trajectory(&self, slot: &Slot) -> Trajectory {
        let p = &self.params;
        let len = p.horizon + 1;
        let mut tr = Trajectory::from_state(slot.rec.state);
        let mut cur = slot.rec.state;
        let run = |mut a: ActivePrimitive, tr: &mut Trajectory, cur: &mut _| {
            while !a.finished() && tr.len() < len {
                let (u, s) = a.advance(cur, p.dt, &p.primitives);
                tr.push(u, s);
                *cur = s;
            }
        };
        if let Some(a) = slot.active {
            run(a, &mut tr, &mut cur);
        }
        for q in &slot.queue {
            match ActivePrimitive::start(&cur, *q, &p.layout, &p.primitives) {
                Ok(a) => run(a, &mut tr, &mut cur),
                Err(_) => break,
            }
        }
        tr
    }

    fn replan(&mut self) {
        let t = self.t;
        let p = &self.params;
        for slot in self.vehicles.values_mut().filter(|s| s.rec.is_cav()) {
            if slot.idle() {
                if let Some(q) = slot.queue.pop_front() {
                    slot.active = Some(
                        ActivePrimitive::start(&slot.rec.state, q, &p.layout, &p.primitives)
                            .unwrap_or_else(|_| brake_now(&slot.rec, p)),
                    );
                }
            }
        }
        let need: Vec<VehicleId> = self
            .vehicles
            .values()
            .filter(|s| s.rec.is_cav())
            .filter(|s| match self.cfg.replan_mode {
                ReplanMode::EventDriven => s.idle() && s.queue.is_empty(),
                ReplanMode::Strict => !s.mid_lane_change(),
            })
            .map(|s| s.rec.id)
            .collect();
        if need.is_empty() {
            return;
        }
        let world = self.world();
        let committed: BTreeMap<VehicleId, Trajectory> =
            if self.planner.kind() == PlannerKind::BkPbs {
                self.vehicles
                    .values()
                    .filter(|s| s.rec.is_cav() && !need.contains(&s.rec.id))
                    .map(|s| (s.rec.id, self.committed_trajectory(s)))
                    .collect()
            } else {
                BTreeMap::new()
            };
        let previous: BTreeMap<VehicleId, Vec<MotionPrimitive>> = need
            .iter()
            .map(|id| (*id, self.vehicles[id].tail.clone()))
            .collect();
        let req = PlannerRequest {
            t,
            world: &world,
            cavs: &need,
            committed: &committed,
            previous: &previous,
            params: &self.params,
        };
        let mut resp = self.planner.plan(&req);
        let p = &self.params;
        for id in &need {
            let slot = self.vehicles.get_mut(id).expect("requested CAV exists");
            let cmds = match resp.commands.get(id) {
                Some(c) if !c.is_empty() => c.clone(),
                _ => {
                    resp.diagnostics.fallbacks.push(*id);
                    vec![p.primitives.primitive(PrimitiveKind::EmergencyBrake, p.dt)]
                }
            };
            let n = self.cfg.commit_primitives.min(cmds.len());
            slot.queue = cmds[..n].iter().copied().collect();
            slot.tail = cmds[n..].to_vec();
            let first = slot.queue.pop_front().expect("commitment is non-empty");
            slot.active = Some(
                ActivePrimitive::start(&slot.rec.state, first, &p.layout, &p.primitives)
                    .unwrap_or_else(|_| {
                        resp.diagnostics.fallbacks.push(*id);
                        brake_now(&slot.rec, p)
                    }),
            );
        }
        self.trace.push(TraceRecord::Diag {
            t,
            diagnostics: resp.diagnostics.clone(),
        });
        self.last_response = Some(resp);
    }

    /// Advances the world from `t` to `t + 1`.
    pub fn step(&mut self) -> Result<()> {
        if self.done() {
            return Err(Error::InvalidConfig("episode already finished".into()));
        }
        self.ensure_started();
        self.last_response = None;
        let t = self.t;
        self.replan();

        let snapshot = self.world();
        let p = &self.params;
        let cfg = &self.cfg;
        let mut off_road = Vec::new();
        for slot in self.vehicles.values_mut() {
            if slot.rec.is_cav() {
                let mut a = slot.active.unwrap_or_else(|| brake_now(&slot.rec, p));
                let (u, s) = a.advance(&slot.rec.state, p.dt, &p.primitives);
                slot.rec.state = s;
                slot.rec.lane_change =
                    (a.primitive.kind.is_lane_change() && !a.finished()).then_some(a.lateral);
                slot.control = Some(u);
                slot.action = Action::Primitive(a.primitive.kind);
                slot.active = Some(a);
            } else {
                let Ok(nbhd) = Neighborhood::build(&slot.rec, &snapshot, &p.layout) else {
                    off_road.push(slot.rec.id);
                    continue;
                };
                let rng = slot.rng.as_mut().expect("HDVs carry a stream");
                let mut draw = match cfg.merge_mode {
                    MergeMode::Stochastic => MergeDraw::Random(rng),
                    MergeMode::Deterministic => MergeDraw::Threshold,
                };
                let st = hdv_transition(
                    &slot.rec,
                    &nbhd,
                    &mut draw,
                    t,
                    p.dt,
                    &p.layout,
                    &p.driver,
                    &p.primitives,
                );
                slot.rec.state = st.state;
                slot.rec.lane_change = st.lane_change;
                slot.control = Some(st.control);
                slot.action = Action::Decision(st.decision);
            }
        }
        let t1 = t + 1;

        let ids: Vec<VehicleId> = self.vehicles.keys().copied().collect();
        let mut crashed: Vec<VehicleId> = Vec::new();
        let boxes: Vec<_> = ids
            .iter()
            .map(|id| bounding_box(&self.vehicles[id].rec))
            .collect();
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                let (ri, rj) = (&self.vehicles[&ids[i]].rec, &self.vehicles[&ids[j]].rec);
                if (ri.state.x - rj.state.x).abs() > ri.length + rj.length {
                    continue;
                }
                if boxes_overlap(&boxes[i], &boxes[j]) {
                    self.trace.push(TraceRecord::Collision {
                        t: t1,
                        a: ri.id,
                        class_a: ri.class,
                        b: Some(rj.id),
                        class_b: Some(rj.class),
                    });
                    crashed.extend([ri.id, rj.id]);
                }
            }
        }
        for id in &ids {
            let r = &self.vehicles[id].rec;
            let gone = off_road.contains(id) || !p.layout.on_road(r.state.x, r.state.y);
            if gone && !crashed.contains(id) {
                self.trace.push(TraceRecord::Collision {
                    t: t1,
                    a: *id,
                    class_a: r.class,
                    b: None,
                    class_b: None,
                });
                crashed.push(*id);
            }
        }
        crashed.sort();
        crashed.dedup();

        let mut exits = Vec::new();
        for id in &crashed {
            let mut slot = self.vehicles.remove(id).expect("crashed vehicle exists");
            slot.rec.crashed = true;
            exits.push(slot.step_record(VehicleStatus::Crashed));
            self.counts.crashed += 1;
            self.counts.active -= 1;
        }
        let retiring: Vec<VehicleId> = self
            .vehicles
            .values()
            .filter(|s| s.rec.state.x >= p.layout.section_length)
            .map(|s| s.rec.id)
            .collect();
        for id in retiring {
            let slot = self.vehicles.remove(&id).expect("retiring vehicle exists");
            self.trace.push(TraceRecord::Retire {
                t: t1,
                id,
                spawn_time: slot.rec.spawn_time,
            });
            exits.push(slot.step_record(VehicleStatus::Retired));
            self.counts.retired += 1;
            self.counts.active -= 1;
        }

        self.t = t1;
        self.spawn(t1);
        self.record_step(t1, exits);
        Ok(())
    }

    pub fn run(mut self) -> Result<EpisodeTrace> {
        self.ensure_started();
        while !self.done() {
            self.step()?;
        }
        Ok(self.trace)
    }

    pub fn finish(self) -> EpisodeTrace {
        self.trace
    }
}

pub fn run_episode(cfg: &SimConfig) -> Result<EpisodeTrace> {
    Simulation::new(cfg.clone())?.run()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayReport {
    pub stored_hash: String,
    pub replay_hash: String,
    pub transitions_checked: usize,
}

impl ReplayReport {
    pub fn matches(&self) -> bool {
        self.stored_hash == self.replay_hash
    }
}

/// Re-runs the episode described by a trace's header and compares hashes
/// after checking every recorded transition against the kinematics.
pub fn replay_bytes(bytes: &[u8]) -> Result<ReplayReport> {
    let stored = EpisodeTrace::read_jsonl(bytes)?;
    let cfg = stored
        .config()
        .ok_or_else(|| Error::Trace("missing header record".into()))?
        .clone();
    let checked = verify_kinematics(&stored, &cfg.primitives.bicycle(), cfg.dt)?;
    let again = run_episode(&cfg)?;
    Ok(ReplayReport {
        stored_hash: trace::hash_bytes(bytes),
        replay_hash: again.hash(),
        transitions_checked: checked,
    })
}

pub fn replay(path: &Path) -> Result<ReplayReport> {
    replay_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{VehicleClass, VehicleState};

    fn quiet(planner: PlannerKind) -> SimConfig {
        SimConfig {
            arrival_rate: 0.0,
            planner,
            horizon_steps: 100,
            ..SimConfig::default()
        }
    }

    #[test]
    fn empty_world_only_spawns() {
        let cfg = SimConfig {
            horizon_steps: 50,
            arrival_rate: 3000.0,
            penetration: 0.0,
            ..SimConfig::default()
        };
        let mut sim = Simulation::new(cfg).unwrap();
        sim.step().unwrap();
        let c = sim.counts();
        assert_eq!(c.spawned, c.active);
        assert!(sim.trace().diagnostics().next().is_none());
    }

    #[test]
    fn overlapping_pair_crashes_once() {
        let mut sim = Simulation::new(quiet(PlannerKind::IdmMobil)).unwrap();
        sim.insert_vehicle(VehicleRecord::hdv(
            0,
            VehicleState::at(100.0, 4.5, 30.0),
            30.0,
        ))
        .unwrap();
        sim.insert_vehicle(VehicleRecord::hdv(
            1,
            VehicleState::at(102.0, 4.5, 30.0),
            30.0,
        ))
        .unwrap();
        sim.step().unwrap();
        assert_eq!(sim.trace().collisions().count(), 1);
        assert_eq!(sim.counts().crashed, 2);
        assert_eq!(sim.counts().active, 0);
        for _ in 0..5 {
            sim.step().unwrap();
        }
        let later: Vec<_> = sim.trace().steps().filter(|(t, _)| *t > 1).collect();
        assert!(later.iter().all(|(_, v)| v.is_empty()));
    }

    #[test]
    fn crossing_section_end_retires() {
        let mut sim = Simulation::new(quiet(PlannerKind::IdmMobil)).unwrap();
        sim.insert_vehicle(VehicleRecord::hdv(
            0,
            VehicleState::at(455.0, 4.5, 30.0),
            30.0,
        ))
        .unwrap();
        sim.step().unwrap();
        let h = sim.trace().histories();
        assert_eq!(h[&VehicleId(0)].retired_at, Some(1));
        assert_eq!(sim.counts().retired, 1);
    }

    #[test]
    fn single_cav_free_flow_retirement_step() {
        let mut sim = Simulation::new(quiet(PlannerKind::BkPbs)).unwrap();
        sim.insert_vehicle(VehicleRecord::cav(0, VehicleState::at(0.0, 4.5, 35.0)))
            .unwrap();
        let tr = sim.run().unwrap();
        let expect = (460.0_f64 / 35.0 / 0.2).ceil() as u32;
        assert_eq!(tr.histories()[&VehicleId(0)].retired_at, Some(expect));
    }

    #[test]
    fn pure_hdv_traffic_never_plans() {
        let cfg = SimConfig {
            horizon_steps: 100,
            arrival_rate: 3000.0,
            penetration: 0.0,
            ..SimConfig::default()
        };
        let tr = run_episode(&cfg).unwrap();
        assert!(tr.diagnostics().next().is_none());
        assert!(tr
            .histories()
            .values()
            .all(|h| h.class == VehicleClass::Hdv));
    }

    #[test]
    fn identical_seeds_identical_hashes() {
        let cfg = SimConfig {
            horizon_steps: 60,
            arrival_rate: 3000.0,
            penetration: 0.5,
            planner: PlannerKind::BkMAstar,
            seed: 11,
            ..SimConfig::default()
        };
        let a = run_episode(&cfg).unwrap();
        let b = run_episode(&cfg).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = run_episode(&SimConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn replay_reproduces_hash_and_states() {
        let cfg = SimConfig {
            horizon_steps: 60,
            arrival_rate: 3000.0,
            penetration: 0.5,
            planner: PlannerKind::IdmMobil,
            seed: 3,
            ..SimConfig::default()
        };
        let bytes = run_episode(&cfg).unwrap().to_jsonl();
        let rep = replay_bytes(&bytes).unwrap();
        assert!(rep.matches());
        assert!(rep.transitions_checked > 0);
    }

    #[test]
    fn invalid_configs_rejected() {
        for cfg in [
            SimConfig {
                dt: 0.0,
                ..SimConfig::default()
            },
            SimConfig {
                horizon_steps: 0,
                ..SimConfig::default()
            },
            SimConfig {
                penetration: 1.5,
                ..SimConfig::default()
            },
            SimConfig {
                planner: PlannerKind::ExternalTrace,
                ..SimConfig::default()
            },
        ] {
            assert!(matches!(Simulation::new(cfg), Err(Error::InvalidConfig(_))));
        }
    }
}
