use thiserror::Error;

use crate::scenario::VehicleId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lateral coordinate y = {y:.3} m is outside the road")]
    OffRoad { y: f64 },

    #[error("no goal positions for vehicle {0}: ramp vehicle is past the merge zone")]
    EmptyGoal(VehicleId),

    #[error("x = {x:.1} m is past the end of the merge zone")]
    PastMergeZone { x: f64 },

    #[error("primitive {kind} is infeasible here: {reason}")]
    InfeasiblePrimitive {
        kind: crate::kinematics::PrimitiveKind,
        reason: &'static str,
    },

    #[error("priority ordering contains a cycle")]
    CyclicOrdering,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("classifier training requires both classes to be present")]
    SingleClass,

    #[error("empty sample set")]
    EmptySamples,

    #[error("heatmap grid for planner {planner} is missing cells: {missing}")]
    IncompleteGrid { planner: String, missing: String },

    #[error("trace error: {0}")]
    Trace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("toml: {0}")]
    Toml(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
