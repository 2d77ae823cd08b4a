//! HDV trajectory prediction, optionally conditioned on planned CAV
//! trajectories, plus the lane-change dataset and classifier.

pub mod classifier;
pub mod dataset;
pub mod eval;
pub mod features;

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::driver::{
    assess_lane_change, execute_lateral, hdv_lateral_decision, hdv_transition, start_lane_change,
    LateralDecision, MergeDraw, Neighbor, Neighborhood,
};
use crate::error::Result;
use crate::kinematics::{ControlInput, Trajectory};
use crate::params::Params;
use crate::scenario::{VehicleClass, VehicleId, VehicleRecord};

pub use classifier::{train_classifier, Classifier, Optimizer, TrainConfig};
pub use dataset::{collect_dataset, split_holdout, LaneChangeSample, Partition};
pub use eval::{evaluate_predictor, ConfusionMatrix};
pub use features::{feature_names, features, FEATURE_COUNT};

/// What is known about an HDV at prediction time: its own record and the
/// leader/follower records on its lane and both adjacent lanes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: u32,
    pub subject: VehicleRecord,
    /// Left leader, left follower, leader, follower, right leader, right
    /// follower.
    pub neighbors: [Option<VehicleRecord>; 6],
}

impl Observation {
    /// Observes `subject` within `scene` (which may contain the subject).
    pub fn capture(
        subject: &VehicleRecord,
        scene: &[VehicleRecord],
        t: u32,
        params: &Params,
    ) -> Result<Self> {
        let nbhd = Neighborhood::build(subject, scene, &params.layout)?;
        let lookup =
            |n: Option<Neighbor>| n.and_then(|n| scene.iter().find(|r| r.id == n.id).cloned());
        Ok(Self {
            t,
            subject: subject.clone(),
            neighbors: nbhd.six().map(lookup),
        })
    }

    pub fn slots(&self) -> [Option<Neighbor>; 6] {
        self.neighbors
            .each_ref()
            .map(|r| r.as_ref().map(Neighbor::of))
    }

    pub fn features(&self, params: &Params) -> Vec<f64> {
        features(&self.subject, &self.slots(), &params.layout)
    }

    fn neighbor_records(&self) -> Vec<VehicleRecord> {
        let mut out: Vec<VehicleRecord> = Vec::with_capacity(6);
        for r in self.neighbors.iter().flatten() {
            if !out.iter().any(|o| o.id == r.id) {
                out.push(r.clone());
            }
        }
        out
    }
}

/// Planned trajectories of higher-priority CAVs, keyed by id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConditioningContext {
    pub plans: BTreeMap<VehicleId, Trajectory>,
}

impl ConditioningContext {
    pub fn is_empty(&self) -> bool {
        self.plans.is_empty()
    }

    pub fn insert(&mut self, id: VehicleId, plan: Trajectory) {
        debug_assert!(!plan.is_empty());
        self.plans.insert(id, plan);
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum PredictorKind {
    #[default]
    RolloutOracle,
    LogisticClassifier,
}

#[derive(Clone, Debug, Default)]
pub enum Predictor {
    /// Forward simulation with the true driver models, merges resolved by
    /// thresholding the merge probability at one half.
    #[default]
    RolloutOracle,
    LogisticClassifier(Classifier),
}

impl Predictor {
    pub fn kind(&self) -> PredictorKind {
        match self {
            Predictor::RolloutOracle => PredictorKind::RolloutOracle,
            Predictor::LogisticClassifier(_) => PredictorKind::LogisticClassifier,
        }
    }

    pub fn predict_unconditional(
        &self,
        obs: &Observation,
        horizon: usize,
        params: &Params,
    ) -> Trajectory {
        self.predict_conditional(obs, &ConditioningContext::default(), horizon, params)
    }

    /// Predicts `horizon + 1` states for the observed HDV. Conditioning CAVs
    /// follow their plans (constant speed past the preview horizon); every
    /// other neighbor holds its current speed in its lane.
    pub fn predict_conditional(
        &self,
        obs: &Observation,
        ctx: &ConditioningContext,
        horizon: usize,
        params: &Params,
    ) -> Trajectory {
        let bicycle = params.primitives.bicycle();
        let preview = params.preview();
        let plans: Vec<(VehicleId, Trajectory)> = ctx
            .plans
            .iter()
            .map(|(id, tr)| {
                let mut tr = tr.clone();
                tr.truncate(preview + 1);
                tr.pad_to(horizon + 1, params.dt, &bicycle);
                (*id, tr)
            })
            .collect();
        let mut scene: Vec<VehicleRecord> = obs
            .neighbor_records()
            .into_iter()
            .filter(|r| !ctx.plans.contains_key(&r.id))
            .collect();
        let frozen = scene.len();
        scene.extend(
            plans
                .iter()
                .map(|(id, tr)| VehicleRecord::new(*id, VehicleClass::Cav, tr.states[0])),
        );

        let mut subject = obs.subject.clone();
        let mut out = Trajectory::from_state(subject.state);
        out.states.reserve(horizon);
        for k in 0..horizon {
            let t = obs.t + k as u32;
            let Ok(nbhd) = Neighborhood::build(&subject, &scene, &params.layout) else {
                out.pad_to(horizon + 1, params.dt, &bicycle);
                return out;
            };
            let (u, lane_change) = match self {
                Predictor::RolloutOracle => {
                    let step = hdv_transition::<ChaCha8Rng>(
                        &subject,
                        &nbhd,
                        &mut MergeDraw::Threshold,
                        t,
                        params.dt,
                        &params.layout,
                        &params.driver,
                        &params.primitives,
                    );
                    subject.state = step.state;
                    (step.control, step.lane_change)
                }
                Predictor::LogisticClassifier(model) => {
                    let mut lane_change = subject.lane_change;
                    if lane_change.is_none() && params.driver.is_decision_step(t) {
                        let x = features(&subject, &nbhd.six(), &params.layout);
                        if model.predict(&x) {
                            let d = classifier_direction(&subject, &nbhd, params);
                            lane_change = start_lane_change(
                                d,
                                &subject.state,
                                nbhd.lane,
                                &params.layout,
                                &params.primitives,
                                params.dt,
                            );
                        }
                    }
                    let (u, next, lc) = execute_lateral(
                        &subject.state,
                        nbhd.lane,
                        lane_change,
                        0.0,
                        params.dt,
                        &params.layout,
                        &params.primitives,
                    );
                    subject.state = next;
                    (u, lc)
                }
            };
            subject.lane_change = lane_change;
            out.push(u, subject.state);

            for r in &mut scene[..frozen] {
                r.state = hold_speed(r, params);
            }
            for (r, (_, tr)) in scene[frozen..].iter_mut().zip(&plans) {
                r.state = tr.states[k + 1];
            }
        }
        out
    }

    /// Whether the predictor expects the observed HDV to start a lane change
    /// on this step.
    pub fn predicts_lane_change(&self, obs: &Observation, params: &Params) -> bool {
        match self {
            Predictor::RolloutOracle => {
                if obs.subject.lane_change.is_some() || !params.driver.is_decision_step(obs.t) {
                    return false;
                }
                let scene = obs.neighbor_records();
                let Ok(nbhd) = Neighborhood::build(&obs.subject, &scene, &params.layout) else {
                    return false;
                };
                hdv_lateral_decision::<ChaCha8Rng>(
                    &obs.subject,
                    &nbhd,
                    &params.layout,
                    &params.driver,
                    &params.primitives,
                    &mut MergeDraw::Threshold,
                ) != LateralDecision::KeepLane
            }
            Predictor::LogisticClassifier(model) => model.predict(&obs.features(params)),
        }
    }
}

/// Frozen-neighbor motion: straight ahead at the current speed.
fn hold_speed(r: &VehicleRecord, params: &Params) -> crate::scenario::VehicleState {
    let mut s = r.state;
    s.psi = 0.0;
    s.beta = 0.0;
    params
        .primitives
        .bicycle()
        .step(&s, ControlInput::ZERO, params.dt)
}

/// Direction for a predicted lane change: the safe adjacent lane with the
/// larger front gap, left on ties.
fn classifier_direction(
    subject: &VehicleRecord,
    nbhd: &Neighborhood,
    params: &Params,
) -> LateralDecision {
    if subject.state.v < params.primitives.lane_change_min_speed {
        return LateralDecision::KeepLane;
    }
    let layout = &params.layout;
    let candidates = [
        (
            layout.left_of(nbhd.lane, subject.state.x),
            LateralDecision::ChangeLeft,
        ),
        (layout.right_of(nbhd.lane), LateralDecision::ChangeRight),
    ];
    let mut best: Option<(f64, LateralDecision)> = None;
    for (lane, d) in candidates {
        let Some(lane) = lane else { continue };
        let Some(a) = assess_lane_change(
            subject,
            nbhd,
            lane,
            &params.driver.mobil,
            &params.driver.idm,
        ) else {
            continue;
        };
        let gap = nbhd
            .slots(lane)
            .map_or(f64::INFINITY, |s| s.gap_ahead(&subject.state));
        if a.safe && best.is_none_or(|(g, _)| gap > g) {
            best = Some((gap, d));
        }
    }
    best.map_or(LateralDecision::KeepLane, |(_, d)| d)
}
