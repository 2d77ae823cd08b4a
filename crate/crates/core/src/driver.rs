//! Human driver models: IDM car following, MOBIL lane changes on the main
//! road and the stochastic merge rule on the ramp.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{track_lateral, ControlInput, LaneChange, PrimitiveConfig};
use crate::scenario::{
    HighwayLayout, Lane, VehicleClass, VehicleId, VehicleRecord, VehicleState, VEHICLE_LENGTH,
    V_MAX,
};

/// Hard floor on any model acceleration (m/s^2).
pub const MAX_BRAKING: f64 = -8.0;

/// Id used for the virtual stopped vehicle at the end of the ramp.
pub const RAMP_END: VehicleId = VehicleId(u32::MAX);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdmParams {
    pub target_speed: f64,
    pub time_headway: f64,
    pub min_gap: f64,
    pub max_accel: f64,
    pub comfort_decel: f64,
    pub exponent: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            target_speed: 30.0,
            time_headway: 1.5,
            min_gap: 2.0,
            max_accel: 3.0,
            comfort_decel: 5.0,
            exponent: 4.0,
        }
    }
}

impl IdmParams {
    pub fn with_target(self, target_speed: f64) -> Self {
        Self {
            target_speed,
            ..self
        }
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.target_speed,
            self.time_headway,
            self.min_gap,
            self.max_accel,
            self.comfort_decel,
            self.exponent,
        ];
        if all.iter().all(|p| *p > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(
                "idm parameters must be positive".into(),
            ))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MobilParams {
    pub politeness: f64,
    pub accel_gain_threshold: f64,
    pub safe_braking_limit: f64,
}

impl Default for MobilParams {
    fn default() -> Self {
        Self {
            politeness: 0.3,
            accel_gain_threshold: 0.2,
            safe_braking_limit: 4.0,
        }
    }
}

/// The `driver` config section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriverConfig {
    pub idm: IdmParams,
    pub mobil: MobilParams,
    /// HDV desired speeds are drawn uniformly from this range.
    pub target_speed_range: [f64; 2],
    /// Lateral decisions are taken every this many steps.
    pub decision_interval: u32,
    /// Within this distance of the zone end a merge is always attempted.
    pub forced_merge_band: f64,
}

impl Default for DriverConfig {
    fn default() -> Self {
        Self {
            idm: IdmParams::default(),
            mobil: MobilParams::default(),
            target_speed_range: [25.0, 35.0],
            decision_interval: 5,
            forced_merge_band: 10.0,
        }
    }
}

impl DriverConfig {
    pub fn validate(&self) -> Result<()> {
        self.idm.validate()?;
        let m = &self.mobil;
        if !(0.0..=1.0).contains(&m.politeness) || !(m.safe_braking_limit > 0.0) {
            return Err(Error::InvalidConfig(
                "mobil: politeness must be in [0,1] and safe_braking_limit > 0".into(),
            ));
        }
        let [lo, hi] = self.target_speed_range;
        if !(lo > 0.0 && lo <= hi) || self.decision_interval == 0 {
            return Err(Error::InvalidConfig(
                "driver: bad target_speed_range or decision_interval".into(),
            ));
        }
        Ok(())
    }

    pub fn is_decision_step(&self, t: u32) -> bool {
        t.is_multiple_of(self.decision_interval)
    }
}

/// IDM acceleration for a follower at speed `v` with bumper gap `gap` to a
/// leader it approaches at rate `dv = v - v_leader`. Pass `f64::INFINITY`
/// for a free road.
pub fn idm_acceleration(v: f64, gap: f64, dv: f64, p: &IdmParams) -> f64 {
    if gap <= 0.0 {
        return MAX_BRAKING;
    }
    let free = 1.0 - (v / p.target_speed).powf(p.exponent);
    let interaction = if gap.is_finite() {
        let dynamic = v * p.time_headway + v * dv / (2.0 * (p.max_accel * p.comfort_decel).sqrt());
        let s_star = p.min_gap + dynamic.max(0.0);
        (s_star / gap).powi(2)
    } else {
        0.0
    };
    (p.max_accel * (free - interaction)).clamp(MAX_BRAKING, p.max_accel)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub id: VehicleId,
    pub class: VehicleClass,
    pub state: VehicleState,
    pub target_speed: f64,
}

impl Neighbor {
    pub fn of(rec: &VehicleRecord) -> Self {
        Self {
            id: rec.id,
            class: rec.class,
            state: rec.state,
            target_speed: rec.idm_target_speed.unwrap_or(V_MAX),
        }
    }

    fn ramp_end(layout: &HighwayLayout) -> Self {
        let mut state = VehicleState::at(
            layout.merge_zone_end() + 0.5 * VEHICLE_LENGTH,
            layout.lane_center(layout.ramp_lane()),
            0.0,
        );
        state.a = 0.0;
        Self {
            id: RAMP_END,
            class: VehicleClass::Hdv,
            state,
            target_speed: V_MAX,
        }
    }
}

/// Bumper-to-bumper distance from `behind` to `ahead`.
pub fn gap_between(behind: &VehicleState, ahead: &VehicleState) -> f64 {
    ahead.x - behind.x - VEHICLE_LENGTH
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LaneSlots {
    pub leader: Option<Neighbor>,
    pub follower: Option<Neighbor>,
}

impl LaneSlots {
    pub fn gap_ahead(&self, ego: &VehicleState) -> f64 {
        self.leader
            .map_or(f64::INFINITY, |l| gap_between(ego, &l.state))
    }

    pub fn gap_behind(&self, ego: &VehicleState) -> f64 {
        self.follower
            .map_or(f64::INFINITY, |f| gap_between(&f.state, ego))
    }
}

/// Leaders and followers around a vehicle on its lane and both neighbors.
#[derive(Clone, Debug, PartialEq)]
pub struct Neighborhood {
    pub lane: Lane,
    pub current: LaneSlots,
    pub left: Option<(Lane, LaneSlots)>,
    pub right: Option<(Lane, LaneSlots)>,
    /// Slots on the target lane of a lane change in progress.
    pub target: Option<(Lane, LaneSlots)>,
}

/// Lanes a vehicle occupies: the lane under its center plus the target of a
/// lane change in progress.
pub fn occupied_lanes(rec: &VehicleRecord, layout: &HighwayLayout) -> [Option<Lane>; 2] {
    let own = layout.lane_of_y(rec.state.y).ok();
    let target = rec
        .lane_change
        .map(|lc| lc.target_lane)
        .filter(|t| Some(*t) != own);
    [own, target]
}

impl Neighborhood {
    /// Builds the neighborhood of `ego` among `others` (which may include ego
    /// itself; it is skipped by id).
    pub fn build<'a>(
        ego: &VehicleRecord,
        others: impl IntoIterator<Item = &'a VehicleRecord>,
        layout: &HighwayLayout,
    ) -> Result<Self> {
        let lane = ego.lane(layout)?;
        let (left, right) = layout.neighbor_lanes(lane);
        let target = ego
            .lane_change
            .map(|lc| lc.target_lane)
            .filter(|t| *t != lane);
        let lanes = [Some(lane), left, right, target];
        let mut slots = [LaneSlots::default(); 4];
        let x = ego.state.x;
        for other in others {
            if other.id == ego.id || other.crashed {
                continue;
            }
            for occ in occupied_lanes(other, layout).into_iter().flatten() {
                for (i, l) in lanes.iter().enumerate() {
                    if *l != Some(occ) {
                        continue;
                    }
                    let n = Neighbor::of(other);
                    let slot = &mut slots[i];
                    if other.state.x >= x {
                        if slot.leader.is_none_or(|c| other.state.x < c.state.x) {
                            slot.leader = Some(n);
                        }
                    } else if slot.follower.is_none_or(|c| other.state.x > c.state.x) {
                        slot.follower = Some(n);
                    }
                }
            }
        }
        let ramp = layout.ramp_lane();
        for (i, l) in lanes.iter().enumerate() {
            if *l == Some(ramp) {
                let end = Neighbor::ramp_end(layout);
                let slot = &mut slots[i];
                if end.state.x >= x && slot.leader.is_none_or(|c| end.state.x < c.state.x) {
                    slot.leader = Some(end);
                }
            }
        }
        Ok(Self {
            lane,
            current: slots[0],
            left: left.map(|l| (l, slots[1])),
            right: right.map(|l| (l, slots[2])),
            target: target.map(|l| (l, slots[3])),
        })
    }

    pub fn slots(&self, lane: Lane) -> Option<&LaneSlots> {
        if lane == self.lane {
            return Some(&self.current);
        }
        [
            self.left.as_ref(),
            self.right.as_ref(),
            self.target.as_ref(),
        ]
        .into_iter()
        .flatten()
        .find(|(l, _)| *l == lane)
        .map(|(_, s)| s)
    }

    /// Neighbor records in a fixed slot order: left leader/follower, current
    /// leader/follower, right leader/follower. The ramp-end marker is omitted.
    pub fn six(&self) -> [Option<Neighbor>; 6] {
        let real = |n: Option<Neighbor>| n.filter(|n| n.id != RAMP_END);
        let side = |s: Option<&(Lane, LaneSlots)>| s.map(|(_, s)| *s).unwrap_or_default();
        let l = side(self.left.as_ref());
        let r = side(self.right.as_ref());
        [
            real(l.leader),
            real(l.follower),
            real(self.current.leader),
            real(self.current.follower),
            real(r.leader),
            real(r.follower),
        ]
    }
}

fn follow_accel(ego: &VehicleState, leader: Option<&Neighbor>, idm: &IdmParams) -> f64 {
    match leader {
        Some(l) => idm_acceleration(ego.v, gap_between(ego, &l.state), ego.v - l.state.v, idm),
        None => idm_acceleration(ego.v, f64::INFINITY, 0.0, idm),
    }
}

fn neighbor_accel(n: &Neighbor, leader: Option<&VehicleState>, idm: &IdmParams) -> f64 {
    let p = idm.with_target(n.target_speed);
    match leader {
        Some(l) => idm_acceleration(n.state.v, gap_between(&n.state, l), n.state.v - l.v, &p),
        None => idm_acceleration(n.state.v, f64::INFINITY, 0.0, &p),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LateralDecision {
    #[default]
    KeepLane,
    ChangeLeft,
    ChangeRight,
}

/// Outcome of evaluating one candidate lane for MOBIL.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaneChangeAssessment {
    pub lane: Lane,
    /// Acceleration imposed on the prospective new follower (m/s^2).
    pub new_follower_accel: f64,
    pub safe: bool,
    pub incentive: f64,
}

/// MOBIL safety and incentive terms for moving `ego` onto `target`.
pub fn assess_lane_change(
    ego: &VehicleRecord,
    nbhd: &Neighborhood,
    target: Lane,
    p: &MobilParams,
    idm: &IdmParams,
) -> Option<LaneChangeAssessment> {
    let new = nbhd.slots(target)?;
    let cur = &nbhd.current;
    let me = &ego.state;

    let gap_front = new.gap_ahead(me);
    let gap_back = new.gap_behind(me);
    let new_follower_accel = new
        .follower
        .as_ref()
        .map_or(0.0, |f| neighbor_accel(f, Some(me), idm));
    let safe = gap_front > 0.0 && gap_back > 0.0 && new_follower_accel >= -p.safe_braking_limit;

    let a_c = follow_accel(me, cur.leader.as_ref(), idm);
    let a_c_new = follow_accel(me, new.leader.as_ref(), idm);
    let (a_n, a_n_new) = new.follower.as_ref().map_or((0.0, 0.0), |f| {
        (
            neighbor_accel(f, new.leader.as_ref().map(|l| &l.state), idm),
            new_follower_accel,
        )
    });
    let (a_o, a_o_new) = cur.follower.as_ref().map_or((0.0, 0.0), |o| {
        (
            neighbor_accel(o, Some(me), idm),
            neighbor_accel(o, cur.leader.as_ref().map(|l| &l.state), idm),
        )
    });
    let incentive = a_c_new - a_c + p.politeness * ((a_n_new - a_n) + (a_o_new - a_o));
    Some(LaneChangeAssessment {
        lane: target,
        new_follower_accel,
        safe,
        incentive,
    })
}

/// MOBIL lane choice: a change needs the safety criterion and an incentive
/// above the threshold. Equal incentives prefer the left lane.
pub fn mobil_decision(
    ego: &VehicleRecord,
    nbhd: &Neighborhood,
    layout: &HighwayLayout,
    p: &MobilParams,
    idm: &IdmParams,
) -> LateralDecision {
    let x = ego.state.x;
    let mut best: Option<(f64, LateralDecision)> = None;
    let candidates = [
        (layout.left_of(nbhd.lane, x), LateralDecision::ChangeLeft),
        (layout.right_of(nbhd.lane), LateralDecision::ChangeRight),
    ];
    for (lane, decision) in candidates {
        let Some(lane) = lane else { continue };
        let Some(a) = assess_lane_change(ego, nbhd, lane, p, idm) else {
            continue;
        };
        if a.safe
            && a.incentive > p.accel_gain_threshold
            && best.is_none_or(|(g, _)| a.incentive > g)
        {
            best = Some((a.incentive, decision));
        }
    }
    best.map_or(LateralDecision::KeepLane, |(_, d)| d)
}

/// Probability of attempting a merge at `x`: 0 at zone entry rising linearly
/// to 1 at the zone end.
pub fn merge_probability(x: f64, layout: &HighwayLayout) -> Result<f64> {
    if x > layout.merge_zone_end() {
        return Err(Error::PastMergeZone { x });
    }
    Ok(((x - layout.merge_zone_start) / layout.merge_zone_length).clamp(0.0, 1.0))
}

/// How stochastic merge attempts are resolved.
pub enum MergeDraw<'a, R: Rng> {
    Random(&'a mut R),
    /// Attempt iff the merge probability is at least one half.
    Threshold,
}

fn merge_decision<R: Rng>(
    ego: &VehicleRecord,
    nbhd: &Neighborhood,
    layout: &HighwayLayout,
    cfg: &DriverConfig,
    draw: &mut MergeDraw<'_, R>,
) -> LateralDecision {
    let x = ego.state.x;
    let Some(target) = layout.left_of(nbhd.lane, x) else {
        return LateralDecision::KeepLane;
    };
    let Ok(p) = merge_probability(x, layout) else {
        return LateralDecision::KeepLane;
    };
    let forced = x >= layout.merge_zone_end() - cfg.forced_merge_band;
    let attempt = match draw {
        MergeDraw::Random(rng) => rng.gen::<f64>() < p,
        MergeDraw::Threshold => p >= 0.5,
    };
    if !(attempt || forced) {
        return LateralDecision::KeepLane;
    }
    match assess_lane_change(ego, nbhd, target, &cfg.mobil, &cfg.idm) {
        Some(a) if a.safe => LateralDecision::ChangeLeft,
        _ => LateralDecision::KeepLane,
    }
}

/// Lateral decision of an HDV not already changing lanes, taken on decision
/// steps only.
pub fn hdv_lateral_decision<R: Rng>(
    rec: &VehicleRecord,
    nbhd: &Neighborhood,
    layout: &HighwayLayout,
    cfg: &DriverConfig,
    prim: &PrimitiveConfig,
    draw: &mut MergeDraw<'_, R>,
) -> LateralDecision {
    if rec.lane_change.is_some() || rec.state.v < prim.lane_change_min_speed {
        return LateralDecision::KeepLane;
    }
    let idm = cfg.idm.with_target(rec.idm_target_speed.unwrap_or(V_MAX));
    if layout.is_ramp(nbhd.lane) {
        merge_decision(rec, nbhd, layout, cfg, draw)
    } else {
        mobil_decision(rec, nbhd, layout, &cfg.mobil, &idm)
    }
}

/// Longitudinal IDM command, following the more restrictive of the current
/// lane and the target lane of a change in progress.
pub fn hdv_longitudinal(rec: &VehicleRecord, nbhd: &Neighborhood, idm: &IdmParams) -> f64 {
    let p = idm.with_target(rec.idm_target_speed.unwrap_or(V_MAX));
    let mut a = follow_accel(&rec.state, nbhd.current.leader.as_ref(), &p);
    if let Some((_, slots)) = &nbhd.target {
        a = a.min(follow_accel(&rec.state, slots.leader.as_ref(), &p));
    }
    a
}

/// Lane-change reference for a lateral decision, if it names a lane.
pub fn start_lane_change(
    decision: LateralDecision,
    state: &VehicleState,
    lane: Lane,
    layout: &HighwayLayout,
    prim: &PrimitiveConfig,
    dt: f64,
) -> Option<LaneChange> {
    let target = match decision {
        LateralDecision::ChangeLeft => layout.left_of(lane, state.x),
        LateralDecision::ChangeRight => layout.right_of(lane),
        LateralDecision::KeepLane => None,
    };
    target.map(|l| LaneChange::towards(state, l, layout, prim.lane_change_steps(dt)))
}

/// Steers along `lane_change` (or keeps `lane`) under longitudinal command
/// `a` for one step. The lane change is cleared once it has run its
/// duration and settled.
pub fn execute_lateral(
    state: &VehicleState,
    lane: Lane,
    mut lane_change: Option<LaneChange>,
    a: f64,
    dt: f64,
    layout: &HighwayLayout,
    prim: &PrimitiveConfig,
) -> (ControlInput, VehicleState, Option<LaneChange>) {
    let bicycle = prim.bicycle();
    let delta = match &lane_change {
        Some(lc) => lc.steer(state, a, dt, prim),
        None => track_lateral(
            state,
            layout.lane_center(lane),
            a,
            dt,
            &bicycle,
            prim.delta_max,
        ),
    };
    let control = ControlInput::new(a, delta);
    let next = bicycle.step(state, control, dt);
    if let Some(lc) = lane_change.as_mut() {
        lc.elapsed += 1;
        if lc.elapsed >= lc.duration
            && lc.settled(&next, prim.lane_tolerance, prim.heading_tolerance)
        {
            lane_change = None;
        }
    }
    (control, next, lane_change)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HdvStep {
    pub state: VehicleState,
    pub control: ControlInput,
    pub decision: LateralDecision,
    pub lane_change: Option<LaneChange>,
}

/// One HDV update: lateral decision (on decision steps), IDM acceleration,
/// lane keeping or lane-change tracking, then a bicycle step.
#[allow(clippy::too_many_arguments)]
pub fn hdv_transition<R: Rng>(
    rec: &VehicleRecord,
    nbhd: &Neighborhood,
    draw: &mut MergeDraw<'_, R>,
    t: u32,
    dt: f64,
    layout: &HighwayLayout,
    cfg: &DriverConfig,
    prim: &PrimitiveConfig,
) -> HdvStep {
    let mut decision = LateralDecision::KeepLane;
    let mut lane_change = rec.lane_change;
    if lane_change.is_none() && cfg.is_decision_step(t) {
        decision = hdv_lateral_decision(rec, nbhd, layout, cfg, prim, draw);
        lane_change = start_lane_change(decision, &rec.state, nbhd.lane, layout, prim, dt);
    }

    let mut working = rec.clone();
    working.lane_change = lane_change;
    let nbhd_for_accel;
    let nbhd = if lane_change.is_some() && rec.lane_change.is_none() {
        // newly committed: also respect the target lane leader this step
        nbhd_for_accel = Neighborhood {
            target: lane_change
                .and_then(|lc| nbhd.slots(lc.target_lane).map(|s| (lc.target_lane, *s))),
            ..nbhd.clone()
        };
        &nbhd_for_accel
    } else {
        nbhd
    };
    let a = hdv_longitudinal(&working, nbhd, &cfg.idm);

    let (control, state, lane_change) =
        execute_lateral(&rec.state, nbhd.lane, lane_change, a, dt, layout, prim);
    HdvStep {
        state,
        control,
        decision,
        lane_change,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layout() -> HighwayLayout {
        HighwayLayout::default()
    }

    #[test]
    fn idm_free_flow_cases() {
        let p = IdmParams::default();
        assert_eq!(idm_acceleration(30.0, f64::INFINITY, 0.0, &p), 0.0);
        assert_eq!(idm_acceleration(0.0, f64::INFINITY, 0.0, &p), p.max_accel);
    }

    #[test]
    fn idm_closed_form_example() {
        let p = IdmParams::default();
        let got = idm_acceleration(25.0, 30.0, 0.0, &p);
        // s* = 2 + 25 * 1.5 = 39.5
        let want = 3.0 * (1.0 - (25.0f64 / 30.0).powi(4) - (39.5f64 / 30.0).powi(2));
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn idm_nonpositive_gap_is_emergency() {
        let p = IdmParams::default();
        assert_eq!(idm_acceleration(10.0, 0.0, 0.0, &p), MAX_BRAKING);
        assert_eq!(idm_acceleration(10.0, -1.0, 0.0, &p), MAX_BRAKING);
    }

    #[test]
    fn merge_probability_is_linear() {
        let l = layout();
        assert_eq!(merge_probability(180.0, &l).unwrap(), 0.0);
        assert_eq!(merge_probability(360.0, &l).unwrap(), 1.0);
        assert_eq!(merge_probability(270.0, &l).unwrap(), 0.5);
        assert_eq!(merge_probability(50.0, &l).unwrap(), 0.0);
        assert!(merge_probability(361.0, &l).is_err());
    }

    fn nbhd_of(ego: &VehicleRecord, others: &[VehicleRecord]) -> Neighborhood {
        Neighborhood::build(ego, others, &layout()).unwrap()
    }

    #[test]
    fn mobil_keeps_lane_on_empty_road() {
        let ego = VehicleRecord::hdv(1, VehicleState::at(100.0, 4.5, 30.0), 30.0);
        let n = nbhd_of(&ego, &[]);
        let d = mobil_decision(
            &ego,
            &n,
            &layout(),
            &MobilParams::default(),
            &IdmParams::default(),
        );
        assert_eq!(d, LateralDecision::KeepLane);
    }

    #[test]
    fn mobil_overtakes_slow_leader() {
        let ego = VehicleRecord::hdv(1, VehicleState::at(100.0, 4.5, 30.0), 30.0);
        // gap 10 m, closing at 10 m/s
        let slow = VehicleRecord::hdv(2, VehicleState::at(115.0, 4.5, 20.0), 20.0);
        let n = nbhd_of(&ego, &[slow]);
        let idm = IdmParams::default();
        let a = assess_lane_change(&ego, &n, 0, &MobilParams::default(), &idm).unwrap();
        assert!(a.safe && a.incentive > 0.2);
        let d = mobil_decision(&ego, &n, &layout(), &MobilParams::default(), &idm);
        assert_eq!(d, LateralDecision::ChangeLeft);
    }

    #[test]
    fn mobil_safety_veto() {
        let ego = VehicleRecord::hdv(1, VehicleState::at(100.0, 4.5, 30.0), 30.0);
        let slow = VehicleRecord::hdv(2, VehicleState::at(115.0, 4.5, 20.0), 20.0);
        // fast car close behind in the left lane
        let fast = VehicleRecord::hdv(3, VehicleState::at(88.0, 0.0, 35.0), 35.0);
        let n = nbhd_of(&ego, &[slow, fast]);
        let idm = IdmParams::default();
        let mobil = MobilParams::default();
        let a = assess_lane_change(&ego, &n, 0, &mobil, &idm).unwrap();
        assert!(a.new_follower_accel < -mobil.safe_braking_limit);
        assert_ne!(
            mobil_decision(&ego, &n, &layout(), &mobil, &idm),
            LateralDecision::ChangeLeft
        );
    }

    #[test]
    fn neighborhood_slots_and_ramp_end() {
        let l = layout();
        let ego = VehicleRecord::hdv(1, VehicleState::at(300.0, 9.0, 20.0), 30.0);
        let main_lead = VehicleRecord::hdv(2, VehicleState::at(320.0, 4.5, 30.0), 30.0);
        let main_follow = VehicleRecord::hdv(3, VehicleState::at(250.0, 4.5, 30.0), 30.0);
        let n = Neighborhood::build(&ego, &[main_lead.clone(), main_follow.clone()], &l).unwrap();
        assert_eq!(n.lane, 2);
        assert_eq!(n.current.leader.unwrap().id, RAMP_END);
        let (left, slots) = n.left.unwrap();
        assert_eq!(left, 1);
        assert_eq!(slots.leader.unwrap().id, VehicleId(2));
        assert_eq!(slots.follower.unwrap().id, VehicleId(3));
        assert!(n.right.is_none());
        assert!(n.six()[2].is_none());
    }

    #[test]
    fn lone_hdv_at_target_speed_cruises() {
        let l = layout();
        let ego = VehicleRecord::hdv(1, VehicleState::at(100.0, 4.5, 30.0), 30.0);
        let n = nbhd_of(&ego, &[]);
        let out = hdv_transition::<ChaCha8Rng>(
            &ego,
            &n,
            &mut MergeDraw::Threshold,
            0,
            0.2,
            &l,
            &DriverConfig::default(),
            &PrimitiveConfig::default(),
        );
        assert_eq!(out.control, ControlInput::ZERO);
        assert!((out.state.x - 106.0).abs() < 1e-9);
        assert_eq!(out.state.y, 4.5);
        assert_eq!(out.decision, LateralDecision::KeepLane);
    }

    #[test]
    fn hdv_behind_stopped_leader_brakes_at_limit() {
        let l = layout();
        let ego = VehicleRecord::hdv(1, VehicleState::at(100.0, 4.5, 20.0), 30.0);
        // 4 m bumper gap
        let stopped = VehicleRecord::hdv(2, VehicleState::at(109.0, 4.5, 0.0), 30.0);
        let n = nbhd_of(&ego, &[stopped]);
        let out = hdv_transition::<ChaCha8Rng>(
            &ego,
            &n,
            &mut MergeDraw::Threshold,
            1,
            0.2,
            &l,
            &DriverConfig::default(),
            &PrimitiveConfig::default(),
        );
        assert_eq!(out.control.a, MAX_BRAKING);
    }

    #[test]
    fn seeded_merge_is_reproducible() {
        let l = layout();
        let ego = VehicleRecord::hdv(1, VehicleState::at(270.0, 9.0, 25.0), 30.0);
        let n = nbhd_of(&ego, &[]);
        let cfg = DriverConfig::default();
        let prim = PrimitiveConfig::default();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| {
                    hdv_lateral_decision(
                        &ego,
                        &n,
                        &l,
                        &cfg,
                        &prim,
                        &mut MergeDraw::Random(&mut rng),
                    )
                })
                .collect::<Vec<_>>()
        };
        let a = run(7);
        assert_eq!(a, run(7));
        assert!(a.contains(&LateralDecision::ChangeLeft));
        assert!(a.contains(&LateralDecision::KeepLane));
    }
}
