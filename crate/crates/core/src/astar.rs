//! Multi-phase A* over motion primitives against time-indexed obstacles.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

use crate::kinematics::{expand_primitive, Bicycle, MotionPrimitive, PrimitiveKind, Trajectory};
use crate::params::Params;
use crate::scenario::{
    goal_set, states_overlap, GoalSet, Lane, Phase, VehicleId, VehicleRecord, VehicleState,
    VEHICLE_LENGTH, V_MAX,
};

/// Expansion cap shared by a group of primitive kinds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quota {
    pub kinds: Vec<PrimitiveKind>,
    pub cap: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchBudget {
    pub max_expansions: usize,
    pub quotas: Vec<Quota>,
}

impl SearchBudget {
    fn quota(kinds: &[PrimitiveKind], cap: usize) -> Quota {
        Quota {
            kinds: kinds.to_vec(),
            cap,
        }
    }

    pub fn primary() -> Self {
        use PrimitiveKind::*;
        Self {
            max_expansions: 3000,
            quotas: vec![
                Self::quota(&[Accelerate], 1200),
                Self::quota(&[LaneChangeLeft, LaneChangeRight], 750),
                Self::quota(&[Idle], 600),
                Self::quota(&[Decelerate, EmergencyBrake], 450),
            ],
        }
    }

    pub fn fallback() -> Self {
        use PrimitiveKind::*;
        Self {
            max_expansions: 1500,
            quotas: vec![
                Self::quota(&[Decelerate], 900),
                Self::quota(&[EmergencyBrake], 375),
                Self::quota(&[LaneChangeLeft, LaneChangeRight], 225),
            ],
        }
    }

    /// No per-kind limits.
    pub fn unlimited(max_expansions: usize) -> Self {
        Self {
            max_expansions,
            quotas: Vec::new(),
        }
    }

    fn group(&self, kind: PrimitiveKind) -> Option<usize> {
        self.quotas.iter().position(|q| q.kinds.contains(&kind))
    }
}

/// The `astar` config section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AstarConfig {
    pub goal_distance: f64,
    pub fallback_goal_distance: f64,
    pub primary: SearchBudget,
    pub fallback: SearchBudget,
}

impl Default for AstarConfig {
    fn default() -> Self {
        Self {
            goal_distance: 70.0,
            fallback_goal_distance: 30.0,
            primary: SearchBudget::primary(),
            fallback: SearchBudget::fallback(),
        }
    }
}

/// Time-indexed trajectories of other vehicles. Queries past the end of a
/// trajectory extrapolate its last state at constant speed.
#[derive(Clone, Debug, Default)]
pub struct DynamicObstacleSet {
    entries: Vec<(VehicleId, Trajectory)>,
}

impl DynamicObstacleSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: VehicleId, trajectory: Trajectory) {
        debug_assert!(!trajectory.is_empty());
        self.entries.push((id, trajectory));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(VehicleId, Trajectory)> {
        self.entries.iter()
    }

    /// Extends every trajectory to `len` states.
    pub fn pad_to(&mut self, len: usize, dt: f64, bicycle: &Bicycle) {
        for (_, tr) in &mut self.entries {
            tr.pad_to(len, dt, bicycle);
        }
    }

    /// Whether `state` at time index `k` overlaps any obstacle.
    pub fn collides(&self, state: &VehicleState, k: usize) -> bool {
        self.entries.iter().any(|(_, tr)| {
            let s = &tr.states[k.min(tr.len() - 1)];
            states_overlap(state, s)
        })
    }
}

/// A found plan: the primitive sequence and its trajectory, padded (or cut)
/// to the horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub primitives: Vec<MotionPrimitive>,
    pub trajectory: Trajectory,
    pub phase: Phase,
    pub cost: f64,
    pub expansions: usize,
}

/// Lower bound on the time to any goal position.
pub fn heuristic(state: &VehicleState, goals: &GoalSet) -> f64 {
    goals
        .regions
        .iter()
        .map(|r| (r.x_min - state.x).max(0.0) / V_MAX)
        .fold(f64::INFINITY, f64::min)
}

struct Node {
    state: VehicleState,
    time_index: usize,
    g: f64,
    parent: Option<usize>,
    primitive: Option<MotionPrimitive>,
    segment: Trajectory,
}

struct OpenEntry {
    f: f64,
    g: f64,
    rank: u8,
    seq: usize,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenEntry {
    // max-heap: the best entry compares greatest
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(self.g.total_cmp(&other.g))
            .then(other.rank.cmp(&self.rank))
            .then(other.seq.cmp(&self.seq))
    }
}

type DupKey = (Lane, i64, i64, usize, bool);

fn dup_key(lane: Lane, s: &VehicleState, time_index: usize, lane_change: bool) -> DupKey {
    (
        lane,
        (s.x / 0.5).round() as i64,
        (s.v / 0.5).round() as i64,
        time_index,
        lane_change,
    )
}

/// Whether every state of `seg` (starting at time index `t0`) is on the road
/// and clear of all obstacles.
fn segment_clear(
    seg: &Trajectory,
    t0: usize,
    obstacles: &DynamicObstacleSet,
    params: &Params,
) -> bool {
    seg.states
        .iter()
        .enumerate()
        .all(|(j, s)| params.layout.on_road(s.x, s.y) && !obstacles.collides(s, t0 + j))
}

/// Constant-speed continuation from `state` at `t0` up to the horizon.
fn padding_clear(
    state: &VehicleState,
    t0: usize,
    obstacles: &DynamicObstacleSet,
    params: &Params,
) -> bool {
    let bicycle = params.primitives.bicycle();
    let mut tail = Trajectory::from_state(*state);
    tail.pad_to(params.horizon.saturating_sub(t0) + 1, params.dt, &bicycle);
    segment_clear(&tail, t0, obstacles, params)
}

/// Best-first search for the cheapest primitive sequence (cost = elapsed
/// time) that enters `goals` while staying on the road and clear of
/// `obstacles`. A goal node is accepted only if its constant-speed
/// continuation to the horizon is also clear.
pub fn plan_phase(
    start: &VehicleState,
    goals: &GoalSet,
    obstacles: &DynamicObstacleSet,
    budget: &SearchBudget,
    library: &[MotionPrimitive],
    params: &Params,
) -> Option<Plan> {
    search(
        &Trajectory::from_state(*start),
        goals,
        obstacles,
        budget,
        library,
        params,
    )
    .0
}

fn search(
    prefix: &Trajectory,
    goals: &GoalSet,
    obstacles: &DynamicObstacleSet,
    budget: &SearchBudget,
    library: &[MotionPrimitive],
    params: &Params,
) -> (Option<Plan>, usize) {
    let layout = &params.layout;
    let dt = params.dt;
    let horizon = params.horizon;
    let start = prefix.last();
    if !layout.on_road(start.x, start.y) || !segment_clear(prefix, 0, obstacles, params) {
        return (None, 0);
    }
    let mut nodes = vec![Node {
        state: *start,
        time_index: prefix.len() - 1,
        g: 0.0,
        parent: None,
        primitive: None,
        segment: prefix.clone(),
    }];
    let mut open = BinaryHeap::new();
    open.push(OpenEntry {
        f: heuristic(start, goals),
        g: 0.0,
        rank: 0,
        seq: 0,
    });
    let mut seen: HashSet<DupKey> = HashSet::new();
    let mut used = vec![0usize; budget.quotas.len()];
    let mut expansions = 0;

    while let Some(entry) = open.pop() {
        let idx = entry.seq;
        let (state, time_index, g) = {
            let n = &nodes[idx];
            (n.state, n.time_index, n.g)
        };
        let Ok(lane) = layout.lane_of_y(state.y) else {
            continue;
        };
        if idx != 0
            && goals.contains(lane, state.x)
            && padding_clear(&state, time_index, obstacles, params)
        {
            let plan = reconstruct(&nodes, idx, goals.phase, expansions, params);
            return (Some(plan), expansions);
        }
        if time_index >= horizon {
            continue;
        }
        if expansions >= budget.max_expansions {
            return (None, expansions);
        }
        expansions += 1;
        for p in library {
            let group = budget.group(p.kind);
            if let Some(gi) = group {
                if used[gi] >= budget.quotas[gi].cap {
                    continue;
                }
            } else if !budget.quotas.is_empty() {
                continue;
            }
            let Ok(seg) = expand_primitive(&state, *p, layout, &params.primitives, dt) else {
                continue;
            };
            if let Some(gi) = group {
                used[gi] += 1;
            }
            if !segment_clear(&seg, time_index, obstacles, params) {
                continue;
            }
            let next = *seg.last();
            let t_next = time_index + p.steps as usize;
            let Ok(next_lane) = layout.lane_of_y(next.y) else {
                continue;
            };
            if !seen.insert(dup_key(next_lane, &next, t_next, p.kind.is_lane_change())) {
                continue;
            }
            let g_next = g + p.duration(dt);
            let seq = nodes.len();
            nodes.push(Node {
                state: next,
                time_index: t_next,
                g: g_next,
                parent: Some(idx),
                primitive: Some(*p),
                segment: seg,
            });
            open.push(OpenEntry {
                f: g_next + heuristic(&next, goals),
                g: g_next,
                rank: p.kind.tie_rank(),
                seq,
            });
        }
    }
    (None, expansions)
}

fn reconstruct(
    nodes: &[Node],
    goal: usize,
    phase: Phase,
    expansions: usize,
    params: &Params,
) -> Plan {
    let mut chain = Vec::new();
    let mut cur = Some(goal);
    while let Some(i) = cur {
        chain.push(i);
        cur = nodes[i].parent;
    }
    chain.reverse();
    let mut trajectory = nodes[0].segment.clone();
    let mut primitives = Vec::new();
    for &i in &chain[1..] {
        let n = &nodes[i];
        primitives.extend(n.primitive);
        for (u, s) in n.segment.controls.iter().zip(&n.segment.states[1..]) {
            trajectory.push(*u, *s);
        }
    }
    trajectory.pad_to(params.horizon + 1, params.dt, &params.primitives.bicycle());
    trajectory.truncate(params.horizon + 1);
    Plan {
        primitives,
        trajectory,
        phase,
        cost: nodes[goal].g,
        expansions,
    }
}

/// Two-phase search for one CAV: the primary library toward the far goal,
/// then the deceleration-biased fallback toward the near goal.
pub fn plan(
    rec: &VehicleRecord,
    obstacles: &DynamicObstacleSet,
    params: &Params,
    cfg: &AstarConfig,
) -> Option<Plan> {
    plan_after(
        &Trajectory::from_state(rec.state),
        rec,
        obstacles,
        params,
        cfg,
    )
}

/// Plans onward from the end of a fixed `prefix` that starts at `rec`'s
/// state. The returned trajectory includes the prefix; the primitives do not.
pub fn plan_after(
    prefix: &Trajectory,
    rec: &VehicleRecord,
    obstacles: &DynamicObstacleSet,
    params: &Params,
    cfg: &AstarConfig,
) -> Option<Plan> {
    let rec = &VehicleRecord {
        state: *prefix.last(),
        ..rec.clone()
    };
    let phases = [
        (Phase::Primary, &cfg.primary),
        (Phase::Fallback, &cfg.fallback),
    ];
    let mut spent = 0;
    for (phase, budget) in phases {
        let goals = goal_set(
            rec,
            &params.layout,
            phase,
            cfg.goal_distance,
            cfg.fallback_goal_distance,
        )
        .ok()?;
        let library = params.primitives.library(phase, params.dt);
        let (found, expansions) = search(prefix, &goals, obstacles, budget, &library, params);
        spent += expansions;
        if let Some(mut p) = found {
            p.expansions = spent;
            return Some(p);
        }
    }
    None
}

/// Whether trajectory `tr` can come within reach of a vehicle starting at
/// `state` during the horizon.
pub fn near(state: &VehicleState, tr: &Trajectory, params: &Params) -> bool {
    let reach = V_MAX * params.dt * params.horizon as f64 + 2.0 * VEHICLE_LENGTH;
    tr.states.iter().any(|s| (s.x - state.x).abs() <= reach)
}
