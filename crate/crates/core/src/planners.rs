//! The planner interface used by the simulator and its four strategies.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::astar::{self, AstarConfig, DynamicObstacleSet};
use crate::driver::{
    hdv_lateral_decision, hdv_longitudinal, LateralDecision, MergeDraw, Neighborhood,
};
use crate::error::{Error, Result};
use crate::kinematics::{ControlInput, MotionPrimitive, PrimitiveKind, Trajectory};
use crate::params::Params;
use crate::pbs::{Agent, AgentRole, PbsConfig, Solver};
use crate::prediction::{Observation, Predictor};
use crate::scenario::{VehicleId, VehicleRecord};

#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum PlannerKind {
    #[default]
    #[serde(rename = "BK_PBS")]
    BkPbs,
    #[serde(rename = "BK_M_ASTAR")]
    BkMAstar,
    #[serde(rename = "IDM_MOBIL")]
    IdmMobil,
    #[serde(rename = "EXTERNAL_TRACE")]
    ExternalTrace,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 4] = [
        PlannerKind::BkPbs,
        PlannerKind::BkMAstar,
        PlannerKind::IdmMobil,
        PlannerKind::ExternalTrace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::BkPbs => "BK_PBS",
            PlannerKind::BkMAstar => "BK_M_ASTAR",
            PlannerKind::IdmMobil => "IDM_MOBIL",
            PlannerKind::ExternalTrace => "EXTERNAL_TRACE",
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_uppercase().replace(['-', '*'], "_");
        PlannerKind::ALL
            .into_iter()
            .find(|k| k.name() == norm || k.name().replace('_', "") == norm.replace('_', ""))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown planner '{s}'")))
    }
}

/// A snapshot handed to a planner.
pub struct PlannerRequest<'a> {
    pub t: u32,
    /// Every active vehicle.
    pub world: &'a [VehicleRecord],
    /// CAVs that need new commitments.
    pub cavs: &'a [VehicleId],
    /// Remaining committed motion of CAVs that are not requested.
    pub committed: &'a BTreeMap<VehicleId, Trajectory>,
    /// Unexecuted tail of each requested CAV's previous plan.
    pub previous: &'a BTreeMap<VehicleId, Vec<MotionPrimitive>>,
    pub params: &'a Params,
}

/// A collision-checked set of trajectories for every vehicle in the scene.
#[derive(Clone, Debug, Default)]
pub struct JointPlan {
    pub trajectories: BTreeMap<VehicleId, Arc<Trajectory>>,
    pub roles: BTreeMap<VehicleId, AgentRole>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlannerDiagnostics {
    pub planner: String,
    pub requested: usize,
    pub success: bool,
    pub nodes_expanded: usize,
    pub children: usize,
    pub failed_updates: usize,
    pub astar_calls: usize,
    pub astar_expansions: usize,
    pub hdv_overlaps: usize,
    /// CAVs that were given a fallback command.
    pub fallbacks: Vec<VehicleId>,
}

#[derive(Clone, Debug, Default)]
pub struct PlannerResponse {
    /// Primitive sequence per requested CAV (non-empty).
    pub commands: BTreeMap<VehicleId, Vec<MotionPrimitive>>,
    /// Planned trajectory per requested CAV, where the planner has one.
    pub trajectories: BTreeMap<VehicleId, Trajectory>,
    pub joint_plan: Option<JointPlan>,
    pub diagnostics: PlannerDiagnostics,
}

pub trait Planner: Send {
    fn kind(&self) -> PlannerKind;
    fn plan(&mut self, req: &PlannerRequest<'_>) -> PlannerResponse;
}

fn brake(params: &Params) -> MotionPrimitive {
    params
        .primitives
        .primitive(PrimitiveKind::EmergencyBrake, params.dt)
}

fn record_of<'a>(req: &'a PlannerRequest<'_>, id: VehicleId) -> &'a VehicleRecord {
    req.world
        .iter()
        .find(|r| r.id == id)
        .expect("requested CAV is in the world snapshot")
}

fn observe_hdvs(req: &PlannerRequest<'_>) -> Vec<(VehicleRecord, Observation)> {
    req.world
        .iter()
        .filter(|r| !r.is_cav())
        .filter_map(|r| {
            Observation::capture(r, req.world, req.t, req.params)
                .ok()
                .map(|o| (r.clone(), o))
        })
        .collect()
}

/// Straight-ahead constant-speed extrapolation over the horizon.
pub fn constant_speed(rec: &VehicleRecord, params: &Params) -> Trajectory {
    let mut s = rec.state;
    s.psi = 0.0;
    s.beta = 0.0;
    let bicycle = params.primitives.bicycle();
    let mut tr = Trajectory::from_state(rec.state);
    let mut cur = s;
    while tr.len() < params.horizon + 1 {
        cur = bicycle.step(&cur, ControlInput::ZERO, params.dt);
        tr.push(ControlInput::ZERO, cur);
    }
    tr
}

/// Centralized planning of all CAVs at once.
pub struct BkPbsPlanner {
    pub predictor: Predictor,
    pub astar: AstarConfig,
    pub pbs: PbsConfig,
}

impl Planner for BkPbsPlanner {
    fn kind(&self) -> PlannerKind {
        PlannerKind::BkPbs
    }

    fn plan(&mut self, req: &PlannerRequest<'_>) -> PlannerResponse {
        let mut diag = PlannerDiagnostics {
            planner: self.kind().name().into(),
            requested: req.cavs.len(),
            ..Default::default()
        };
        if req.cavs.is_empty() {
            diag.success = true;
            return PlannerResponse {
                diagnostics: diag,
                ..Default::default()
            };
        }
        let mut agents = Vec::with_capacity(req.world.len());
        for r in req.world.iter().filter(|r| r.is_cav()) {
            let prefix = req
                .committed
                .get(&r.id)
                .filter(|tr| tr.len() > 1 && !req.cavs.contains(&r.id))
                .cloned();
            agents.push(Agent {
                record: r.clone(),
                role: AgentRole::Cav,
                fixed: None,
                prefix,
                observation: None,
            });
        }
        for (r, obs) in observe_hdvs(req) {
            agents.push(Agent {
                record: r,
                role: AgentRole::Hdv,
                fixed: None,
                prefix: None,
                observation: Some(obs),
            });
        }
        let roles: BTreeMap<VehicleId, AgentRole> =
            agents.iter().map(|a| (a.record.id, a.role)).collect();
        let solver = Solver::new(agents, req.params, &self.astar, &self.pbs, &self.predictor);
        let mut resp = PlannerResponse::default();
        match solver.solve() {
            Ok(sol) => {
                let st = &sol.stats;
                diag.success = true;
                diag.nodes_expanded = st.nodes_expanded;
                diag.children = st.children;
                diag.failed_updates = st.failed_updates;
                diag.astar_calls = st.astar_calls;
                diag.astar_expansions = st.astar_expansions;
                diag.hdv_overlaps = st.hdv_overlaps;
                diag.fallbacks = st.root_fallbacks.clone();
                let mut roles = roles;
                for id in &st.root_fallbacks {
                    roles.insert(*id, AgentRole::Pinned);
                }
                for &id in req.cavs {
                    let prims = sol.node.primitives.get(&id).cloned().unwrap_or_default();
                    let prims = if prims.is_empty() {
                        vec![brake(req.params)]
                    } else {
                        prims
                    };
                    resp.commands.insert(id, prims);
                    resp.trajectories.insert(id, (*sol.node.plan[&id]).clone());
                }
                resp.joint_plan = Some(JointPlan {
                    trajectories: sol.node.plan,
                    roles,
                });
            }
            Err(st) => {
                diag.nodes_expanded = st.nodes_expanded;
                diag.children = st.children;
                diag.failed_updates = st.failed_updates;
                diag.astar_calls = st.astar_calls;
                diag.astar_expansions = st.astar_expansions;
                for &id in req.cavs {
                    let next = req.previous.get(&id).and_then(|p| p.first().copied());
                    let cmd = next.unwrap_or_else(|| {
                        diag.fallbacks.push(id);
                        brake(req.params)
                    });
                    resp.commands.insert(id, vec![cmd]);
                }
            }
        }
        resp.diagnostics = diag;
        resp
    }
}

/// Independent per-CAV search against predicted surroundings.
pub struct BkMAstarPlanner {
    pub predictor: Predictor,
    pub astar: AstarConfig,
}

impl Planner for BkMAstarPlanner {
    fn kind(&self) -> PlannerKind {
        PlannerKind::BkMAstar
    }

    fn plan(&mut self, req: &PlannerRequest<'_>) -> PlannerResponse {
        let mut diag = PlannerDiagnostics {
            planner: self.kind().name().into(),
            requested: req.cavs.len(),
            success: true,
            ..Default::default()
        };
        let mut resp = PlannerResponse::default();
        if req.cavs.is_empty() {
            resp.diagnostics = diag;
            return resp;
        }
        let mut predicted: Vec<(VehicleId, Trajectory)> = observe_hdvs(req)
            .into_iter()
            .map(|(r, obs)| {
                (
                    r.id,
                    self.predictor
                        .predict_unconditional(&obs, req.params.horizon, req.params),
                )
            })
            .collect();
        predicted.extend(
            req.world
                .iter()
                .filter(|r| r.is_cav())
                .map(|r| (r.id, constant_speed(r, req.params))),
        );
        for &id in req.cavs {
            let rec = record_of(req, id);
            let mut obstacles = DynamicObstacleSet::new();
            for (oid, tr) in &predicted {
                if *oid != id && astar::near(&rec.state, tr, req.params) {
                    obstacles.insert(*oid, tr.clone());
                }
            }
            diag.astar_calls += 1;
            match astar::plan(rec, &obstacles, req.params, &self.astar) {
                Some(p) => {
                    diag.astar_expansions += p.expansions;
                    resp.commands.insert(id, p.primitives);
                    resp.trajectories.insert(id, p.trajectory);
                }
                None => {
                    diag.fallbacks.push(id);
                    resp.commands.insert(id, vec![brake(req.params)]);
                }
            }
        }
        resp.diagnostics = diag;
        resp
    }
}

/// IDM acceleration quantized to the nearest longitudinal primitive.
pub fn quantize_acceleration(a: f64) -> PrimitiveKind {
    if a <= -6.0 {
        PrimitiveKind::EmergencyBrake
    } else if a <= -0.5 {
        PrimitiveKind::Decelerate
    } else if a >= 0.5 {
        PrimitiveKind::Accelerate
    } else {
        PrimitiveKind::Idle
    }
}

/// Rule-based CAV control through the driver models at a 35 m/s target.
pub struct IdmMobilPlanner;

impl IdmMobilPlanner {
    pub fn command(rec: &VehicleRecord, world: &[VehicleRecord], params: &Params) -> PrimitiveKind {
        let Ok(nbhd) = Neighborhood::build(rec, world, &params.layout) else {
            return PrimitiveKind::EmergencyBrake;
        };
        let decision = hdv_lateral_decision::<ChaCha8Rng>(
            rec,
            &nbhd,
            &params.layout,
            &params.driver,
            &params.primitives,
            &mut MergeDraw::Threshold,
        );
        match decision {
            LateralDecision::ChangeLeft => return PrimitiveKind::LaneChangeLeft,
            LateralDecision::ChangeRight => return PrimitiveKind::LaneChangeRight,
            LateralDecision::KeepLane => {}
        }
        quantize_acceleration(hdv_longitudinal(rec, &nbhd, &params.driver.idm))
    }
}

impl Planner for IdmMobilPlanner {
    fn kind(&self) -> PlannerKind {
        PlannerKind::IdmMobil
    }

    fn plan(&mut self, req: &PlannerRequest<'_>) -> PlannerResponse {
        let mut resp = PlannerResponse::default();
        for &id in req.cavs {
            let kind = Self::command(record_of(req, id), req.world, req.params);
            resp.commands.insert(
                id,
                vec![req.params.primitives.primitive(kind, req.params.dt)],
            );
        }
        resp.diagnostics = PlannerDiagnostics {
            planner: self.kind().name().into(),
            requested: req.cavs.len(),
            success: true,
            ..Default::default()
        };
        resp
    }
}

/// One line of an external primitive file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalCommand {
    pub t: u32,
    pub id: VehicleId,
    pub primitive: PrimitiveKind,
}

/// Replays primitives chosen by an outside program, keyed by (vehicle, t).
pub struct ExternalTracePlanner {
    commands: HashMap<(VehicleId, u32), PrimitiveKind>,
}

impl ExternalTracePlanner {
    pub fn from_commands(cmds: impl IntoIterator<Item = ExternalCommand>) -> Self {
        Self {
            commands: cmds
                .into_iter()
                .map(|c| ((c.id, c.t), c.primitive))
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cmds = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let c: ExternalCommand = serde_json::from_str(line)
                .map_err(|e| Error::Trace(format!("{}:{}: {e}", path.display(), n + 1)))?;
            cmds.push(c);
        }
        Ok(Self::from_commands(cmds))
    }
}

impl Planner for ExternalTracePlanner {
    fn kind(&self) -> PlannerKind {
        PlannerKind::ExternalTrace
    }

    fn plan(&mut self, req: &PlannerRequest<'_>) -> PlannerResponse {
        let mut resp = PlannerResponse::default();
        let mut diag = PlannerDiagnostics {
            planner: self.kind().name().into(),
            requested: req.cavs.len(),
            success: true,
            ..Default::default()
        };
        for &id in req.cavs {
            let kind = self.commands.get(&(id, req.t)).copied().unwrap_or_else(|| {
                diag.fallbacks.push(id);
                PrimitiveKind::EmergencyBrake
            });
            resp.commands.insert(
                id,
                vec![req.params.primitives.primitive(kind, req.params.dt)],
            );
        }
        resp.diagnostics = diag;
        resp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::VehicleState;

    fn request<'a>(
        world: &'a [VehicleRecord],
        cavs: &'a [VehicleId],
        committed: &'a BTreeMap<VehicleId, Trajectory>,
        prev: &'a BTreeMap<VehicleId, Vec<MotionPrimitive>>,
        params: &'a Params,
    ) -> PlannerRequest<'a> {
        PlannerRequest {
            t: 0,
            world,
            cavs,
            committed,
            previous: prev,
            params,
        }
    }

    #[test]
    fn planner_names_parse() {
        for k in PlannerKind::ALL {
            assert_eq!(k.name().parse::<PlannerKind>().unwrap(), k);
        }
        assert_eq!(
            "bk-m-astar".parse::<PlannerKind>().unwrap(),
            PlannerKind::BkMAstar
        );
        assert!("nope".parse::<PlannerKind>().is_err());
    }

    #[test]
    fn quantization_thresholds() {
        assert_eq!(quantize_acceleration(0.5), PrimitiveKind::Accelerate);
        assert_eq!(quantize_acceleration(0.49), PrimitiveKind::Idle);
        assert_eq!(quantize_acceleration(-0.5), PrimitiveKind::Decelerate);
        assert_eq!(quantize_acceleration(-5.99), PrimitiveKind::Decelerate);
        assert_eq!(quantize_acceleration(-6.0), PrimitiveKind::EmergencyBrake);
    }

    #[test]
    fn idm_mobil_free_road_idles_at_top_speed() {
        let p = Params::default();
        let cav = VehicleRecord::cav(1, VehicleState::at(100.0, 4.5, 35.0));
        assert_eq!(
            IdmMobilPlanner::command(&cav, std::slice::from_ref(&cav), &p),
            PrimitiveKind::Idle
        );
    }

    #[test]
    fn idm_mobil_stopped_leader_brakes_hard() {
        let p = Params::default();
        let cav = VehicleRecord::cav(1, VehicleState::at(100.0, 4.5, 20.0));
        // bumper gap 6 m
        let stopped = VehicleRecord::hdv(2, VehicleState::at(111.0, 4.5, 0.0), 30.0);
        let blk_l = VehicleRecord::hdv(3, VehicleState::at(101.0, 0.0, 20.0), 30.0);
        let blk_r = VehicleRecord::hdv(4, VehicleState::at(101.0, 9.0, 20.0), 30.0);
        let world = [cav.clone(), stopped, blk_l, blk_r];
        let a = hdv_longitudinal(
            &cav,
            &Neighborhood::build(&cav, &world, &p.layout).unwrap(),
            &p.driver.idm,
        );
        assert!(a <= -6.0);
        assert_eq!(
            IdmMobilPlanner::command(&cav, &world, &p),
            PrimitiveKind::EmergencyBrake
        );
    }

    #[test]
    fn zero_cav_request_gives_empty_response() {
        let p = Params::default();
        let world = [VehicleRecord::hdv(
            1,
            VehicleState::at(0.0, 0.0, 30.0),
            30.0,
        )];
        let (e, q) = (BTreeMap::new(), BTreeMap::new());
        let mut pbs = BkPbsPlanner {
            predictor: Predictor::RolloutOracle,
            astar: AstarConfig::default(),
            pbs: PbsConfig::default(),
        };
        assert!(pbs
            .plan(&request(&world, &[], &e, &q, &p))
            .commands
            .is_empty());
    }

    #[test]
    fn single_cav_pbs_matches_m_astar() {
        let p = Params::default();
        let cav = VehicleRecord::cav(1, VehicleState::at(50.0, 4.5, 28.0));
        let world = [cav.clone()];
        let (e, q) = (BTreeMap::new(), BTreeMap::new());
        let ids = [cav.id];
        let mut pbs = BkPbsPlanner {
            predictor: Predictor::RolloutOracle,
            astar: AstarConfig::default(),
            pbs: PbsConfig::default(),
        };
        let mut solo = BkMAstarPlanner {
            predictor: Predictor::RolloutOracle,
            astar: AstarConfig::default(),
        };
        let a = pbs.plan(&request(&world, &ids, &e, &q, &p));
        let b = solo.plan(&request(&world, &ids, &e, &q, &p));
        assert_eq!(a.commands, b.commands);
        assert_eq!(a.trajectories, b.trajectories);
    }

    #[test]
    fn external_trace_lookup_and_fallback() {
        let p = Params::default();
        let cav = VehicleRecord::cav(7, VehicleState::at(50.0, 4.5, 28.0));
        let world = [cav.clone()];
        let (e, q) = (BTreeMap::new(), BTreeMap::new());
        let mut ext = ExternalTracePlanner::from_commands([ExternalCommand {
            t: 0,
            id: VehicleId(7),
            primitive: PrimitiveKind::Decelerate,
        }]);
        let ids = [cav.id];
        let r = ext.plan(&request(&world, &ids, &e, &q, &p));
        assert_eq!(r.commands[&cav.id][0].kind, PrimitiveKind::Decelerate);
        let mut req = request(&world, &ids, &e, &q, &p);
        req.t = 5;
        let r = ext.plan(&req);
        assert_eq!(r.commands[&cav.id][0].kind, PrimitiveKind::EmergencyBrake);
        assert_eq!(r.diagnostics.fallbacks, vec![cav.id]);
    }
}
