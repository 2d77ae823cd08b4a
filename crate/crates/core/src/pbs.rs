//! Priority-based search over vehicle orderings with conditional HDV
//! re-prediction (BK-PBS).

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::astar::{self, AstarConfig, DynamicObstacleSet};
use crate::error::{Error, Result};
use crate::kinematics::{MotionPrimitive, Trajectory};
use crate::params::Params;
use crate::prediction::{ConditioningContext, Observation, Predictor};
use crate::scenario::{states_overlap, VehicleId, VehicleRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PbsConfig {
    pub max_nodes: usize,
}

impl Default for PbsConfig {
    fn default() -> Self {
        Self { max_nodes: 200 }
    }
}

/// Pairs `(i, j)` meaning `i` has priority over `j`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PriorityOrdering {
    edges: BTreeSet<(VehicleId, VehicleId)>,
}

impl PriorityOrdering {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn edges(&self) -> impl Iterator<Item = &(VehicleId, VehicleId)> {
        self.edges.iter()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Adds `hi ≺ lo`; fails if that closes a cycle.
    pub fn with(&self, hi: VehicleId, lo: VehicleId) -> Result<Self> {
        if hi == lo || self.lower(lo).contains(&hi) {
            return Err(Error::CyclicOrdering);
        }
        let mut next = self.clone();
        next.edges.insert((hi, lo));
        Ok(next)
    }

    fn reach(&self, from: VehicleId, forward: bool) -> BTreeSet<VehicleId> {
        let mut out = BTreeSet::new();
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            for &(a, b) in &self.edges {
                let (src, dst) = if forward { (a, b) } else { (b, a) };
                if src == v && out.insert(dst) {
                    stack.push(dst);
                }
            }
        }
        out
    }

    /// Every vehicle with priority over `q`, transitively.
    pub fn higher(&self, q: VehicleId) -> BTreeSet<VehicleId> {
        self.reach(q, false)
    }

    /// Every vehicle below `q`, transitively.
    pub fn lower(&self, q: VehicleId) -> BTreeSet<VehicleId> {
        self.reach(q, true)
    }
}

/// Orders `subset` so that every `p ≺ q` (transitively) has `p` first; ties
/// by ascending id.
pub fn topological_order(
    ordering: &PriorityOrdering,
    subset: &[VehicleId],
) -> Result<Vec<VehicleId>> {
    let members: BTreeSet<VehicleId> = subset.iter().copied().collect();
    let mut preds: BTreeMap<VehicleId, BTreeSet<VehicleId>> = BTreeMap::new();
    for &v in &members {
        let hi: BTreeSet<VehicleId> = ordering.higher(v).intersection(&members).copied().collect();
        if hi.contains(&v) {
            return Err(Error::CyclicOrdering);
        }
        preds.insert(v, hi);
    }
    let mut ready: BinaryHeap<Reverse<VehicleId>> = preds
        .iter()
        .filter(|(_, p)| p.is_empty())
        .map(|(v, _)| Reverse(*v))
        .collect();
    let mut out = Vec::with_capacity(members.len());
    while let Some(Reverse(v)) = ready.pop() {
        out.push(v);
        for (w, p) in preds.iter_mut() {
            if p.remove(&v) && p.is_empty() {
                ready.push(Reverse(*w));
            }
        }
    }
    if out.len() != members.len() {
        return Err(Error::CyclicOrdering);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentRole {
    /// CAV free to be replanned.
    Cav,
    /// CAV whose trajectory is fixed for this solve.
    Pinned,
    Hdv,
}

impl AgentRole {
    pub fn is_cav(self) -> bool {
        matches!(self, AgentRole::Cav | AgentRole::Pinned)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub a: VehicleId,
    pub b: VehicleId,
    pub time_index: usize,
}

/// First overlap by time, then by id pair, among pairs selected by
/// `counts`.
fn first_overlap(
    plan: &BTreeMap<VehicleId, Arc<Trajectory>>,
    counts: impl Fn(VehicleId, VehicleId) -> bool,
) -> Option<CollisionReport> {
    let ids: Vec<&VehicleId> = plan.keys().collect();
    let mut best: Option<CollisionReport> = None;
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            if !counts(*a, *b) {
                continue;
            }
            let (ta, tb) = (&plan[a], &plan[b]);
            let limit = ta.len().min(tb.len());
            let limit = best.map_or(limit, |r| limit.min(r.time_index));
            for k in 0..limit {
                if states_overlap(&ta.states[k], &tb.states[k]) {
                    best = Some(CollisionReport {
                        a: *a,
                        b: *b,
                        time_index: k,
                    });
                    break;
                }
            }
        }
    }
    best
}

fn overlaps(a: &Trajectory, b: &Trajectory) -> bool {
    a.states
        .iter()
        .zip(&b.states)
        .any(|(s, t)| states_overlap(s, t))
}

/// A vehicle taking part in a solve.
#[derive(Clone, Debug)]
pub struct Agent {
    pub record: VehicleRecord,
    pub role: AgentRole,
    /// Fixed trajectory for pinned CAVs.
    pub fixed: Option<Trajectory>,
    /// Committed motion a free CAV must execute before its plan begins.
    pub prefix: Option<Trajectory>,
    /// Observation used to predict an HDV.
    pub observation: Option<Observation>,
}

#[derive(Clone, Debug)]
pub struct PtNode {
    pub ordering: PriorityOrdering,
    pub plan: BTreeMap<VehicleId, Arc<Trajectory>>,
    pub primitives: BTreeMap<VehicleId, Vec<MotionPrimitive>>,
    pub cost: f64,
}

/// Negative sum of per-vehicle mean speeds.
pub fn plan_cost(plan: &BTreeMap<VehicleId, Arc<Trajectory>>) -> f64 {
    -plan.values().map(|t| t.mean_speed()).sum::<f64>()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PbsStats {
    pub nodes_expanded: usize,
    pub children: usize,
    pub failed_updates: usize,
    pub pruned_cycles: usize,
    pub astar_calls: usize,
    pub astar_expansions: usize,
    /// Overlaps between two HDVs in the returned plan (not branched on).
    pub hdv_overlaps: usize,
    /// CAVs with no root plan that were fixed to an emergency brake.
    pub root_fallbacks: Vec<VehicleId>,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub node: PtNode,
    pub stats: PbsStats,
}

pub struct Solver<'a> {
    pub params: &'a Params,
    pub astar: &'a AstarConfig,
    pub pbs: &'a PbsConfig,
    pub predictor: &'a Predictor,
    agents: BTreeMap<VehicleId, Agent>,
    stats: PbsStats,
}

impl<'a> Solver<'a> {
    pub fn new(
        agents: Vec<Agent>,
        params: &'a Params,
        astar: &'a AstarConfig,
        pbs: &'a PbsConfig,
        predictor: &'a Predictor,
    ) -> Self {
        Self {
            params,
            astar,
            pbs,
            predictor,
            agents: agents.into_iter().map(|a| (a.record.id, a)).collect(),
            stats: PbsStats::default(),
        }
    }

    fn role(&self, id: VehicleId) -> AgentRole {
        self.agents[&id].role
    }

    pub fn stats(&self) -> &PbsStats {
        &self.stats
    }

    fn horizon_len(&self) -> usize {
        self.params.horizon + 1
    }

    fn fit(&self, mut tr: Trajectory) -> Trajectory {
        tr.pad_to(
            self.horizon_len(),
            self.params.dt,
            &self.params.primitives.bicycle(),
        );
        tr.truncate(self.horizon_len());
        tr
    }

    fn plan_cav(&mut self, id: VehicleId, obstacles: &DynamicObstacleSet) -> Option<astar::Plan> {
        self.stats.astar_calls += 1;
        let agent = &self.agents[&id];
        let out = match &agent.prefix {
            Some(prefix) => {
                astar::plan_after(prefix, &agent.record, obstacles, self.params, self.astar)
            }
            None => astar::plan(&agent.record, obstacles, self.params, self.astar),
        };
        if let Some(p) = &out {
            self.stats.astar_expansions += p.expansions;
        }
        out
    }

    fn predict(&self, id: VehicleId, ctx: &ConditioningContext) -> Trajectory {
        let agent = &self.agents[&id];
        let obs = agent
            .observation
            .as_ref()
            .expect("HDV agents carry an observation");
        self.predictor
            .predict_conditional(obs, ctx, self.params.horizon, self.params)
    }

    /// Root node: independent plans for every vehicle.
    pub fn root(&mut self) -> PtNode {
        let mut plan = BTreeMap::new();
        let mut primitives = BTreeMap::new();
        let ids: Vec<VehicleId> = self.agents.keys().copied().collect();
        let empty = DynamicObstacleSet::new();
        for id in ids {
            let tr = match self.role(id) {
                AgentRole::Pinned => self.fit(
                    self.agents[&id]
                        .fixed
                        .clone()
                        .unwrap_or_else(|| Trajectory::from_state(self.agents[&id].record.state)),
                ),
                AgentRole::Hdv => self.predict(id, &ConditioningContext::default()),
                AgentRole::Cav => match self.plan_cav(id, &empty) {
                    Some(p) => {
                        primitives.insert(id, p.primitives);
                        p.trajectory
                    }
                    None => {
                        let agent = &self.agents[&id];
                        let tr = match &agent.prefix {
                            Some(prefix) => brake_after(prefix, self.params),
                            None => emergency_brake(&agent.record, self.params),
                        };
                        self.agents.get_mut(&id).unwrap().role = AgentRole::Pinned;
                        self.stats.root_fallbacks.push(id);
                        primitives.insert(id, vec![brake_primitive(self.params)]);
                        tr
                    }
                },
            };
            plan.insert(id, Arc::new(tr));
        }
        let cost = plan_cost(&plan);
        PtNode {
            ordering: PriorityOrdering::new(),
            plan,
            primitives,
            cost,
        }
    }

    /// Earliest CAV-involved overlap in `node`.
    pub fn detect_first_collision(&self, node: &PtNode) -> Option<CollisionReport> {
        first_overlap(&node.plan, |a, b| {
            self.role(a).is_cav() || self.role(b).is_cav()
        })
    }

    /// Replans `i` and every lower-priority vehicle that now conflicts with a
    /// higher-priority one. Returns false if some replan fails.
    pub fn update_plan(&mut self, node: &mut PtNode, i: VehicleId) -> Result<bool> {
        let mut subset: Vec<VehicleId> = node.ordering.lower(i).into_iter().collect();
        subset.push(i);
        let order = topological_order(&node.ordering, &subset)?;
        for q in order {
            let higher = node.ordering.higher(q);
            let needs = q == i
                || higher
                    .iter()
                    .any(|k| overlaps(&node.plan[&q], &node.plan[k]));
            if !needs {
                continue;
            }
            match self.role(q) {
                AgentRole::Pinned => return Ok(false),
                AgentRole::Cav => {
                    let mut obstacles = DynamicObstacleSet::new();
                    for k in &higher {
                        obstacles.insert(*k, (*node.plan[k]).clone());
                    }
                    match self.plan_cav(q, &obstacles) {
                        Some(p) => {
                            node.plan.insert(q, Arc::new(p.trajectory));
                            node.primitives.insert(q, p.primitives);
                        }
                        None => return Ok(false),
                    }
                }
                AgentRole::Hdv => {
                    let mut ctx = ConditioningContext::default();
                    for k in &higher {
                        if self.role(*k).is_cav() {
                            ctx.insert(*k, (*node.plan[k]).clone());
                        }
                    }
                    let tr = self.predict(q, &ctx);
                    if higher.iter().any(|k| overlaps(&tr, &node.plan[k])) {
                        return Ok(false);
                    }
                    node.plan.insert(q, Arc::new(tr));
                }
            }
        }
        node.cost = plan_cost(&node.plan);
        Ok(true)
    }

    /// Depth-first search over the priority tree.
    pub fn solve(mut self) -> std::result::Result<Solution, PbsStats> {
        let root = self.root();
        let mut stack = vec![root];
        while let Some(node) = stack.pop() {
            if self.stats.nodes_expanded >= self.pbs.max_nodes {
                return Err(self.stats);
            }
            self.stats.nodes_expanded += 1;
            let Some(report) = self.detect_first_collision(&node) else {
                self.stats.hdv_overlaps = count_overlaps(&node.plan, |a, b| {
                    !self.role(a).is_cav() && !self.role(b).is_cav()
                });
                return Ok(Solution {
                    node,
                    stats: self.stats,
                });
            };
            let mut children = Vec::with_capacity(2);
            for (demoted, other) in [(report.a, report.b), (report.b, report.a)] {
                if self.role(demoted) == AgentRole::Pinned {
                    continue;
                }
                let Ok(ordering) = node.ordering.with(other, demoted) else {
                    self.stats.pruned_cycles += 1;
                    continue;
                };
                let mut child = PtNode {
                    ordering,
                    plan: node.plan.clone(),
                    primitives: node.primitives.clone(),
                    cost: node.cost,
                };
                self.stats.children += 1;
                match self.update_plan(&mut child, demoted) {
                    Ok(true) => children.push(child),
                    Ok(false) | Err(_) => self.stats.failed_updates += 1,
                }
            }
            // stable: for equal costs the first-generated child is explored first
            children.reverse();
            children.sort_by(|x, y| y.cost.total_cmp(&x.cost));
            stack.extend(children);
        }
        Err(self.stats)
    }
}

fn count_overlaps(
    plan: &BTreeMap<VehicleId, Arc<Trajectory>>,
    counts: impl Fn(VehicleId, VehicleId) -> bool,
) -> usize {
    let ids: Vec<&VehicleId> = plan.keys().collect();
    let mut n = 0;
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            if counts(*a, *b) && overlaps(&plan[a], &plan[b]) {
                n += 1;
            }
        }
    }
    n
}

fn brake_primitive(params: &Params) -> MotionPrimitive {
    params
        .primitives
        .primitive(crate::kinematics::PrimitiveKind::EmergencyBrake, params.dt)
}

/// Emergency brake held over the horizon.
pub fn emergency_brake(rec: &VehicleRecord, params: &Params) -> Trajectory {
    brake_after(&Trajectory::from_state(rec.state), params)
}

/// `prefix` followed by an emergency brake to the horizon.
pub fn brake_after(prefix: &Trajectory, params: &Params) -> Trajectory {
    let p = brake_primitive(params);
    let bicycle = params.primitives.bicycle();
    let mut tr = prefix.clone();
    tr.truncate(params.horizon + 1);
    while tr.len() < params.horizon + 1 {
        let u = crate::kinematics::ControlInput::new(p.accel, 0.0);
        let next = bicycle.step(tr.last(), u, params.dt);
        tr.push(u, next);
    }
    tr
}

/// Every CAV-involved overlap in a joint plan, one report per pair at its
/// earliest time index.
pub fn joint_plan_violations(
    plan: &BTreeMap<VehicleId, Arc<Trajectory>>,
    is_cav: impl Fn(VehicleId) -> bool,
) -> Vec<CollisionReport> {
    let ids: Vec<&VehicleId> = plan.keys().collect();
    let mut out = Vec::new();
    for (i, &a) in ids.iter().enumerate() {
        for &b in &ids[i + 1..] {
            if !(is_cav(*a) || is_cav(*b)) {
                continue;
            }
            let (ta, tb) = (&plan[a], &plan[b]);
            if let Some(k) =
                (0..ta.len().min(tb.len())).find(|&k| states_overlap(&ta.states[k], &tb.states[k]))
            {
                out.push(CollisionReport {
                    a: *a,
                    b: *b,
                    time_index: k,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::VehicleState;

    fn id(n: u32) -> VehicleId {
        VehicleId(n)
    }

    #[test]
    fn topological_order_examples() {
        let empty = PriorityOrdering::new();
        assert_eq!(
            topological_order(&empty, &[id(3), id(1), id(2)]).unwrap(),
            vec![id(1), id(2), id(3)]
        );
        let o = empty.with(id(2), id(1)).unwrap();
        assert_eq!(
            topological_order(&o, &[id(1), id(2)]).unwrap(),
            vec![id(2), id(1)]
        );
    }

    #[test]
    fn cycles_are_rejected() {
        let o = PriorityOrdering::new()
            .with(id(1), id(2))
            .unwrap()
            .with(id(2), id(3))
            .unwrap();
        assert!(o.with(id(3), id(1)).is_err());
        assert!(o.with(id(1), id(1)).is_err());
        assert_eq!(o.lower(id(1)), [id(2), id(3)].into_iter().collect());
        assert_eq!(o.higher(id(3)), [id(1), id(2)].into_iter().collect());
    }

    fn straight(x: f64, y: f64, v: f64, params: &Params) -> Arc<Trajectory> {
        let mut t = Trajectory::from_state(VehicleState::at(x, y, v));
        t.pad_to(params.horizon + 1, params.dt, &params.primitives.bicycle());
        Arc::new(t)
    }

    fn agent(rec: VehicleRecord, role: AgentRole) -> Agent {
        Agent {
            record: rec,
            role,
            fixed: None,
            prefix: None,
            observation: None,
        }
    }

    #[test]
    fn earliest_collision_wins_and_hdv_pairs_are_ignored() {
        let p = Params::default();
        let predictor = Predictor::RolloutOracle;
        let astar = AstarConfig::default();
        let pbs = PbsConfig::default();
        let agents = vec![
            agent(
                VehicleRecord::cav(1, VehicleState::at(0.0, 0.0, 30.0)),
                AgentRole::Cav,
            ),
            agent(
                VehicleRecord::hdv(2, VehicleState::at(12.0, 0.0, 0.0), 30.0),
                AgentRole::Hdv,
            ),
            agent(
                VehicleRecord::cav(3, VehicleState::at(100.0, 4.5, 30.0)),
                AgentRole::Cav,
            ),
            agent(
                VehicleRecord::cav(4, VehicleState::at(136.0, 4.5, 0.0)),
                AgentRole::Cav,
            ),
            agent(
                VehicleRecord::hdv(5, VehicleState::at(300.0, 0.0, 20.0), 30.0),
                AgentRole::Hdv,
            ),
            agent(
                VehicleRecord::hdv(6, VehicleState::at(303.0, 0.0, 20.0), 30.0),
                AgentRole::Hdv,
            ),
        ];
        let solver = Solver::new(agents, &p, &astar, &pbs, &predictor);
        let mut plan = BTreeMap::new();
        // 1 reaches 2 when 30 t >= 7 (t index 2); 3 reaches 4 at index 6
        plan.insert(id(1), straight(0.0, 0.0, 30.0, &p));
        plan.insert(id(2), straight(12.0, 0.0, 0.0, &p));
        plan.insert(id(3), straight(100.0, 4.5, 30.0, &p));
        plan.insert(id(4), straight(136.0, 4.5, 0.0, &p));
        plan.insert(id(5), straight(300.0, 0.0, 20.0, &p));
        plan.insert(id(6), straight(303.0, 0.0, 20.0, &p));
        let node = PtNode {
            ordering: PriorityOrdering::new(),
            cost: plan_cost(&plan),
            plan,
            primitives: BTreeMap::new(),
        };
        let r = solver.detect_first_collision(&node).unwrap();
        assert_eq!((r.a, r.b, r.time_index), (id(1), id(2), 2));

        let mut only_hdv = node.clone();
        only_hdv.plan.retain(|k, _| k.0 >= 5);
        assert!(solver.detect_first_collision(&only_hdv).is_none());
    }

    #[test]
    fn single_cav_open_road_is_solved_at_the_root() {
        let p = Params::default();
        let predictor = Predictor::RolloutOracle;
        let astar = AstarConfig::default();
        let pbs = PbsConfig::default();
        let agents = vec![agent(
            VehicleRecord::cav(1, VehicleState::at(50.0, 4.5, 30.0)),
            AgentRole::Cav,
        )];
        let sol = Solver::new(agents, &p, &astar, &pbs, &predictor)
            .solve()
            .unwrap();
        assert_eq!(sol.stats.nodes_expanded, 1);
        assert_eq!(sol.stats.children, 0);
        assert!(sol.node.ordering.is_empty());
    }
}
