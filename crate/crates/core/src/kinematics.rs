//! Kinematic bicycle integration and the motion-primitive library.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{HighwayLayout, Lane, Phase, VehicleState, V_MAX};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub a: f64,
    pub delta: f64,
}

impl ControlInput {
    pub const ZERO: Self = Self { a: 0.0, delta: 0.0 };

    pub fn new(a: f64, delta: f64) -> Self {
        Self { a, delta }
    }
}

/// Bicycle model parameters. `wheelbase_term` is the length in the yaw-rate
/// denominator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bicycle {
    pub wheelbase_term: f64,
    pub v_max: f64,
}

impl Default for Bicycle {
    fn default() -> Self {
        Self {
            wheelbase_term: 2.5,
            v_max: V_MAX,
        }
    }
}

#[derive(Clone, Copy)]
struct Integrand {
    beta: f64,
    yaw_gain: f64,
    a: f64,
}

impl Integrand {
    #[inline]
    fn deriv(&self, psi: f64, v: f64) -> [f64; 4] {
        let (s, c) = (psi + self.beta).sin_cos();
        [v * c, v * s, v * self.yaw_gain, self.a]
    }

    /// One classical RK4 step over `h` on (x, y, psi, v).
    fn rk4(&self, st: [f64; 4], h: f64) -> [f64; 4] {
        if h <= 0.0 {
            return st;
        }
        let add = |s: [f64; 4], k: [f64; 4], f: f64| {
            [
                s[0] + f * k[0],
                s[1] + f * k[1],
                s[2] + f * k[2],
                s[3] + f * k[3],
            ]
        };
        let k1 = self.deriv(st[2], st[3]);
        let s2 = add(st, k1, 0.5 * h);
        let k2 = self.deriv(s2[2], s2[3]);
        let s3 = add(st, k2, 0.5 * h);
        let k3 = self.deriv(s3[2], s3[3]);
        let s4 = add(st, k3, h);
        let k4 = self.deriv(s4[2], s4[3]);
        let mut out = st;
        for i in 0..4 {
            out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }
}

impl Bicycle {
    pub fn slip_angle(delta: f64) -> f64 {
        (delta.tan() / 2.0).atan()
    }

    /// Advances `state` by `dt` under a zero-order-hold control.
    ///
    /// Speed saturates at 0 and `v_max`: the step is split at the saturation
    /// instant and the remainder integrated with zero acceleration, so the
    /// vehicle never reverses.
    pub fn step(&self, state: &VehicleState, u: ControlInput, dt: f64) -> VehicleState {
        let beta = Self::slip_angle(u.delta);
        let yaw_gain = beta.cos() * u.delta.tan() / self.wheelbase_term;
        let mut t_sat = dt;
        let mut bound = None;
        if u.a < 0.0 && state.v + u.a * dt < 0.0 {
            t_sat = (state.v / -u.a).max(0.0);
            bound = Some(0.0);
        } else if u.a > 0.0 && state.v + u.a * dt > self.v_max {
            t_sat = ((self.v_max - state.v) / u.a).max(0.0);
            bound = Some(self.v_max);
        }
        let f = Integrand {
            beta,
            yaw_gain,
            a: u.a,
        };
        let mut st = f.rk4([state.x, state.y, state.psi, state.v], t_sat);
        if let Some(v) = bound {
            st[3] = v;
            st = Integrand { a: 0.0, ..f }.rk4(st, dt - t_sat);
        }
        VehicleState {
            x: st[0],
            y: st[1],
            psi: st[2],
            v: st[3].clamp(0.0, self.v_max),
            beta,
            a: u.a,
        }
    }
}

/// Bicycle step with the default parameters.
pub fn step_bicycle(state: &VehicleState, u: ControlInput, dt: f64) -> VehicleState {
    Bicycle::default().step(state, u, dt)
}

/// Smooth 0→1 blend with zero velocity and acceleration at both ends.
fn quintic(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}

/// Steering angle that moves the vehicle to lateral position `y_next` over one
/// step of length `dt`.
///
/// Solves for the constant steering whose mean course angle over the step
/// produces the required lateral displacement, then clamps to `delta_max`.
pub fn track_lateral(
    state: &VehicleState,
    y_next: f64,
    accel: f64,
    dt: f64,
    bicycle: &Bicycle,
    delta_max: f64,
) -> f64 {
    let err = y_next - state.y;
    if err == 0.0 && state.psi == 0.0 {
        return 0.0;
    }
    let v = (state.v + 0.5 * accel * dt).max(0.0);
    if v < 0.5 {
        return 0.0;
    }
    let course = (err / (v * dt)).clamp(-0.95, 0.95).asin();
    let want = course - state.psi;
    // g(u) = atan(u/2) + c u / sqrt(1 + u^2/4), u = tan(delta), g increasing
    let c = v * dt / (2.0 * bicycle.wheelbase_term);
    let mut u = want / (0.5 + c);
    let u_max = delta_max.tan();
    for _ in 0..4 {
        let q = 1.0 + 0.25 * u * u;
        let g = (0.5 * u).atan() + c * u / q.sqrt();
        let dg = 0.5 / q + c / (q * q.sqrt());
        u = (u - (g - want) / dg).clamp(-2.0 * u_max, 2.0 * u_max);
    }
    u.atan().clamp(-delta_max, delta_max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PrimitiveKind {
    Accelerate,
    Decelerate,
    Idle,
    LaneChangeLeft,
    LaneChangeRight,
    EmergencyBrake,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 6] = [
        PrimitiveKind::Accelerate,
        PrimitiveKind::Decelerate,
        PrimitiveKind::Idle,
        PrimitiveKind::LaneChangeLeft,
        PrimitiveKind::LaneChangeRight,
        PrimitiveKind::EmergencyBrake,
    ];

    pub fn is_lane_change(self) -> bool {
        matches!(
            self,
            PrimitiveKind::LaneChangeLeft | PrimitiveKind::LaneChangeRight
        )
    }

    /// Search tie-break rank: Accelerate < Idle < LaneChangeLeft <
    /// LaneChangeRight < Decelerate < EmergencyBrake.
    pub fn tie_rank(self) -> u8 {
        match self {
            PrimitiveKind::Accelerate => 0,
            PrimitiveKind::Idle => 1,
            PrimitiveKind::LaneChangeLeft => 2,
            PrimitiveKind::LaneChangeRight => 3,
            PrimitiveKind::Decelerate => 4,
            PrimitiveKind::EmergencyBrake => 5,
        }
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Primitive parameters (the `primitives` config section).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrimitiveConfig {
    pub longitudinal_duration: f64,
    pub lane_change_duration: f64,
    pub accelerate: f64,
    pub decelerate: f64,
    pub emergency_brake: f64,
    pub delta_max: f64,
    pub wheelbase_term: f64,
    /// Lane changes are not started below this speed.
    pub lane_change_min_speed: f64,
    pub lane_tolerance: f64,
    pub heading_tolerance: f64,
}

impl Default for PrimitiveConfig {
    fn default() -> Self {
        Self {
            longitudinal_duration: 1.0,
            lane_change_duration: 2.0,
            accelerate: 2.0,
            decelerate: -4.0,
            emergency_brake: -8.0,
            delta_max: 0.3,
            wheelbase_term: 2.5,
            lane_change_min_speed: 10.0,
            lane_tolerance: 0.05,
            heading_tolerance: 0.01,
        }
    }
}

fn steps_for(duration: f64, dt: f64) -> Result<u32> {
    let n = (duration / dt).round();
    if n < 1.0 || (n * dt - duration).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "primitive duration {duration} s is not a positive multiple of dt = {dt} s"
        )));
    }
    Ok(n as u32)
}

impl PrimitiveConfig {
    pub fn validate(&self, dt: f64) -> Result<()> {
        steps_for(self.longitudinal_duration, dt)?;
        steps_for(self.lane_change_duration, dt)?;
        if !(self.accelerate > 0.0) || !(self.decelerate < 0.0) || !(self.emergency_brake < 0.0) {
            return Err(Error::InvalidConfig(
                "primitive accelerations have the wrong sign".into(),
            ));
        }
        if self.emergency_brake.abs() > 8.0 || !(self.delta_max > 0.0 && self.delta_max <= 0.3) {
            return Err(Error::InvalidConfig(
                "control limits exceed |a| <= 8 m/s^2, |delta| <= 0.3 rad".into(),
            ));
        }
        Ok(())
    }

    pub fn bicycle(&self) -> Bicycle {
        Bicycle {
            wheelbase_term: self.wheelbase_term,
            v_max: V_MAX,
        }
    }

    pub fn lane_change_steps(&self, dt: f64) -> u32 {
        steps_for(self.lane_change_duration, dt).unwrap_or(10)
    }

    pub fn primitive(&self, kind: PrimitiveKind, dt: f64) -> MotionPrimitive {
        use PrimitiveKind::*;
        let long = steps_for(self.longitudinal_duration, dt).unwrap_or(5);
        let (steps, accel) = match kind {
            Accelerate => (long, self.accelerate),
            Decelerate => (long, self.decelerate),
            Idle => (long, 0.0),
            EmergencyBrake => (long, self.emergency_brake),
            LaneChangeLeft | LaneChangeRight => (self.lane_change_steps(dt), 0.0),
        };
        MotionPrimitive { kind, steps, accel }
    }

    /// Primary: all six maneuvers. Fallback drops Accelerate and Idle.
    pub fn library(&self, phase: Phase, dt: f64) -> Vec<MotionPrimitive> {
        PrimitiveKind::ALL
            .into_iter()
            .filter(|k| {
                phase == Phase::Primary
                    || !matches!(k, PrimitiveKind::Accelerate | PrimitiveKind::Idle)
            })
            .map(|k| self.primitive(k, dt))
            .collect()
    }
}

pub fn primitive_library(phase: Phase) -> Vec<MotionPrimitive> {
    PrimitiveConfig::default().library(phase, 0.2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionPrimitive {
    pub kind: PrimitiveKind,
    pub steps: u32,
    /// Constant longitudinal acceleration (m/s^2).
    pub accel: f64,
}

impl MotionPrimitive {
    pub fn duration(&self, dt: f64) -> f64 {
        self.steps as f64 * dt
    }
}

const SETTLE_STEPS: u32 = 2;

/// Lateral reference between two lateral positions. With
/// `origin_y == target_y` this is plain lane keeping.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaneChange {
    pub target_lane: Lane,
    pub origin_y: f64,
    pub target_y: f64,
    pub elapsed: u32,
    pub duration: u32,
}

impl LaneChange {
    pub fn keep(lane: Lane, layout: &HighwayLayout, duration: u32) -> Self {
        let c = layout.lane_center(lane);
        Self {
            target_lane: lane,
            origin_y: c,
            target_y: c,
            elapsed: 0,
            duration,
        }
    }

    pub fn towards(
        state: &VehicleState,
        lane: Lane,
        layout: &HighwayLayout,
        duration: u32,
    ) -> Self {
        Self {
            target_lane: lane,
            origin_y: state.y,
            target_y: layout.lane_center(lane),
            elapsed: 0,
            duration,
        }
    }

    /// Reference lateral position after `k` steps. The transition completes
    /// `SETTLE_STEPS` before the nominal duration; the tail is lane keeping.
    pub fn reference(&self, k: u32) -> f64 {
        let span = self.duration.saturating_sub(SETTLE_STEPS).max(1);
        if k >= span {
            return self.target_y;
        }
        let s = k as f64 / span as f64;
        self.origin_y + (self.target_y - self.origin_y) * quintic(s)
    }

    pub fn settled(&self, state: &VehicleState, lane_tol: f64, heading_tol: f64) -> bool {
        (state.y - self.target_y).abs() < lane_tol && state.psi.abs() < heading_tol
    }

    pub fn steer(&self, state: &VehicleState, accel: f64, dt: f64, cfg: &PrimitiveConfig) -> f64 {
        track_lateral(
            state,
            self.reference(self.elapsed + 1),
            accel,
            dt,
            &cfg.bicycle(),
            cfg.delta_max,
        )
    }
}

/// A primitive being executed: the closed-loop control profile plus progress.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivePrimitive {
    pub primitive: MotionPrimitive,
    pub lateral: LaneChange,
}

impl ActivePrimitive {
    pub fn start(
        state: &VehicleState,
        primitive: MotionPrimitive,
        layout: &HighwayLayout,
        cfg: &PrimitiveConfig,
    ) -> Result<Self> {
        let lane = layout.lane_of_y(state.y)?;
        let infeasible = |reason| Error::InfeasiblePrimitive {
            kind: primitive.kind,
            reason,
        };
        let target = match primitive.kind {
            PrimitiveKind::LaneChangeLeft => layout
                .left_of(lane, state.x)
                .ok_or(infeasible("no lane to the left"))?,
            PrimitiveKind::LaneChangeRight => layout
                .right_of(lane)
                .ok_or(infeasible("no lane to the right"))?,
            _ => lane,
        };
        let lateral = if primitive.kind.is_lane_change() {
            if state.v < cfg.lane_change_min_speed {
                return Err(infeasible("speed too low for a lane change"));
            }
            LaneChange::towards(state, target, layout, primitive.steps)
        } else {
            LaneChange::keep(lane, layout, primitive.steps)
        };
        Ok(Self { primitive, lateral })
    }

    pub fn elapsed(&self) -> u32 {
        self.lateral.elapsed
    }

    pub fn remaining(&self) -> u32 {
        self.primitive.steps.saturating_sub(self.lateral.elapsed)
    }

    pub fn finished(&self) -> bool {
        self.remaining() == 0
    }

    pub fn control(&self, state: &VehicleState, dt: f64, cfg: &PrimitiveConfig) -> ControlInput {
        let a = self.primitive.accel;
        if self.primitive.kind == PrimitiveKind::EmergencyBrake {
            return ControlInput::new(a, 0.0);
        }
        ControlInput::new(a, self.lateral.steer(state, a, dt, cfg))
    }

    /// Applies one step of the profile; returns the control used and the new state.
    pub fn advance(
        &mut self,
        state: &VehicleState,
        dt: f64,
        cfg: &PrimitiveConfig,
    ) -> (ControlInput, VehicleState) {
        let u = self.control(state, dt, cfg);
        let next = cfg.bicycle().step(state, u, dt);
        self.lateral.elapsed += 1;
        (u, next)
    }
}

/// Time-indexed states at `dt` spacing, with the control applied between
/// consecutive states (`controls.len() == states.len() - 1`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<VehicleState>,
    pub controls: Vec<ControlInput>,
}

pub type TrajectorySegment = Trajectory;

impl Trajectory {
    pub fn from_state(state: VehicleState) -> Self {
        Self {
            states: vec![state],
            controls: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &VehicleState {
        self.states
            .last()
            .expect("trajectory has at least one state")
    }

    pub fn push(&mut self, u: ControlInput, s: VehicleState) {
        self.controls.push(u);
        self.states.push(s);
    }

    /// Extends to `len` states by coasting (zero acceleration, zero steering).
    pub fn pad_to(&mut self, len: usize, dt: f64, bicycle: &Bicycle) {
        while self.states.len() < len {
            let next = bicycle.step(self.last(), ControlInput::ZERO, dt);
            self.push(ControlInput::ZERO, next);
        }
    }

    pub fn truncate(&mut self, len: usize) {
        self.states.truncate(len.max(1));
        self.controls.truncate(self.states.len() - 1);
    }

    pub fn mean_speed(&self) -> f64 {
        self.states.iter().map(|s| s.v).sum::<f64>() / self.states.len() as f64
    }
}

/// Expands a primitive from `state` into a trajectory segment (inclusive of
/// both endpoints). Lane changes that miss the terminal lane/heading
/// tolerance are infeasible.
pub fn expand_primitive(
    state: &VehicleState,
    p: MotionPrimitive,
    layout: &HighwayLayout,
    cfg: &PrimitiveConfig,
    dt: f64,
) -> Result<TrajectorySegment> {
    let mut active = ActivePrimitive::start(state, p, layout, cfg)?;
    let mut seg = Trajectory {
        states: Vec::with_capacity(p.steps as usize + 1),
        controls: Vec::with_capacity(p.steps as usize),
    };
    seg.states.push(*state);
    let mut cur = *state;
    while !active.finished() {
        let (u, next) = active.advance(&cur, dt, cfg);
        seg.push(u, next);
        cur = next;
    }
    if p.kind.is_lane_change()
        && !active
            .lateral
            .settled(&cur, cfg.lane_tolerance, cfg.heading_tolerance)
    {
        return Err(Error::InfeasiblePrimitive {
            kind: p.kind,
            reason: "lane change did not settle on the target lane",
        });
    }
    Ok(seg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: f64 = 0.2;

    #[test]
    fn straight_line_advance_is_exact() {
        let s = VehicleState::at(0.0, 0.0, 30.0);
        let n = step_bicycle(&s, ControlInput::ZERO, DT);
        assert!((n.x - 6.0).abs() < 1e-9);
        assert_eq!(n.y, 0.0);
        assert_eq!(n.psi, 0.0);
        assert_eq!(n.v, 30.0);
    }

    #[test]
    fn constant_acceleration_matches_closed_form() {
        let s = VehicleState::at(0.0, 0.0, 30.0);
        let n = step_bicycle(&s, ControlInput::new(2.0, 0.0), DT);
        assert!((n.v - 30.4).abs() < 1e-9);
        assert!((n.x - (30.0 * DT + 0.5 * 2.0 * DT * DT)).abs() < 1e-6);
    }

    #[test]
    fn braking_stops_without_reversing() {
        let mut s = VehicleState::at(0.0, 0.0, 1.0);
        let u = ControlInput::new(-8.0, 0.0);
        s = step_bicycle(&s, u, DT);
        assert_eq!(s.v, 0.0);
        assert!((s.x - 1.0 / 16.0).abs() < 1e-12);
        let again = step_bicycle(&s, u, DT);
        assert_eq!(again.x, s.x);
    }

    #[test]
    fn speed_saturates_at_limit() {
        let s = VehicleState::at(0.0, 0.0, 34.9);
        let n = step_bicycle(&s, ControlInput::new(2.0, 0.0), DT);
        assert_eq!(n.v, V_MAX);
        // 0.05 s accelerating then 0.15 s at the limit
        let want = 34.9 * 0.05 + 0.5 * 2.0 * 0.05 * 0.05 + 35.0 * 0.15;
        assert!((n.x - want).abs() < 1e-9);
    }

    #[test]
    fn steering_slip_and_yaw_rate() {
        let s = VehicleState::at(0.0, 0.0, 30.0);
        let delta: f64 = 0.05;
        let n = step_bicycle(&s, ControlInput::new(0.0, delta), 1e-6);
        let beta = (delta.tan() / 2.0).atan();
        assert!((n.beta - beta).abs() < 1e-15);
        let yaw_rate = 30.0 * beta.cos() / 2.5 * delta.tan();
        assert!((n.psi / 1e-6 - yaw_rate).abs() < 1e-6);
    }

    #[test]
    fn library_by_phase() {
        let p = primitive_library(Phase::Primary);
        assert_eq!(p.len(), 6);
        let f = primitive_library(Phase::Fallback);
        assert_eq!(f.len(), 4);
        assert!(f
            .iter()
            .all(|m| !matches!(m.kind, PrimitiveKind::Accelerate | PrimitiveKind::Idle)));
        assert!(p.iter().any(|m| m.kind == PrimitiveKind::EmergencyBrake));
        assert!(f.iter().any(|m| m.kind == PrimitiveKind::EmergencyBrake));
    }

    #[test]
    fn idle_primitive_constant_velocity() {
        let layout = HighwayLayout::default();
        let cfg = PrimitiveConfig::default();
        let s = VehicleState::at(0.0, 0.0, 30.0);
        let seg = expand_primitive(
            &s,
            cfg.primitive(PrimitiveKind::Idle, DT),
            &layout,
            &cfg,
            DT,
        )
        .unwrap();
        assert_eq!(seg.states.len(), 6);
        for w in seg.states.windows(2) {
            assert!((w[1].x - w[0].x - 6.0).abs() < 1e-9);
            assert_eq!(w[1].y, 0.0);
        }
    }

    #[test]
    fn emergency_brake_holds_at_zero() {
        let layout = HighwayLayout::default();
        let cfg = PrimitiveConfig::default();
        let s = VehicleState::at(0.0, 0.0, 10.0);
        let eb = cfg.primitive(PrimitiveKind::EmergencyBrake, DT);
        let first = expand_primitive(&s, eb, &layout, &cfg, DT).unwrap();
        assert!((first.last().v - 2.0).abs() < 1e-9);
        let second = expand_primitive(first.last(), eb, &layout, &cfg, DT).unwrap();
        assert_eq!(second.last().v, 0.0);
        let xs: Vec<f64> = first
            .states
            .iter()
            .chain(&second.states)
            .map(|s| s.x)
            .collect();
        assert!(xs.windows(2).all(|w| w[1] >= w[0]));
        assert!((second.last().x - 100.0 / 16.0).abs() < 1e-9);
        assert!(first.controls.iter().all(|u| u.delta == 0.0));
    }

    #[test]
    fn lane_change_left_settles() {
        let layout = HighwayLayout::default();
        let cfg = PrimitiveConfig::default();
        for v in [10.0, 15.0, 20.0, 25.0, 30.0, 35.0] {
            let s = VehicleState::at(0.0, 4.5, v);
            let p = cfg.primitive(PrimitiveKind::LaneChangeLeft, DT);
            let seg = expand_primitive(&s, p, &layout, &cfg, DT).unwrap();
            let last = seg.last();
            assert!(last.y.abs() < 0.05, "v={v} y={}", last.y);
            assert!(last.psi.abs() < 0.01, "v={v} psi={}", last.psi);
        }
    }

    #[test]
    fn infeasible_lane_changes() {
        let layout = HighwayLayout::default();
        let cfg = PrimitiveConfig::default();
        let left = cfg.primitive(PrimitiveKind::LaneChangeLeft, DT);
        let right = cfg.primitive(PrimitiveKind::LaneChangeRight, DT);
        let lane0 = VehicleState::at(0.0, 0.0, 30.0);
        assert!(expand_primitive(&lane0, left, &layout, &cfg, DT).is_err());
        let lane1 = VehicleState::at(0.0, 4.5, 30.0);
        assert!(expand_primitive(&lane1, right, &layout, &cfg, DT).is_err());
        let ramp_early = VehicleState::at(100.0, 9.0, 30.0);
        assert!(expand_primitive(&ramp_early, left, &layout, &cfg, DT).is_err());
        let slow = VehicleState::at(0.0, 4.5, 8.0);
        assert!(expand_primitive(&slow, left, &layout, &cfg, DT).is_err());
        let ramp_zone = VehicleState::at(200.0, 9.0, 30.0);
        assert!(expand_primitive(&ramp_zone, left, &layout, &cfg, DT).is_ok());
    }

    #[test]
    fn bad_duration_rejected() {
        let cfg = PrimitiveConfig {
            longitudinal_duration: 0.9,
            ..Default::default()
        };
        assert!(cfg.validate(DT).is_err());
        assert!(PrimitiveConfig::default().validate(DT).is_ok());
    }
}
