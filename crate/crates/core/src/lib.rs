#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod astar;
pub mod driver;
pub mod error;
pub mod experiments;
pub mod kinematics;
pub mod params;
pub mod pbs;
pub mod planners;
pub mod prediction;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
