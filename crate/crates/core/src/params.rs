use serde::{Deserialize, Serialize};

use crate::driver::DriverConfig;
use crate::error::{Error, Result};
use crate::kinematics::PrimitiveConfig;
use crate::scenario::HighwayLayout;

/// Model parameters shared by prediction, planning and simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub layout: HighwayLayout,
    pub driver: DriverConfig,
    pub primitives: PrimitiveConfig,
    pub dt: f64,
    /// Planning horizon T in steps.
    pub horizon: usize,
    /// Steps of a conditioning CAV plan visible to the predictor; `None`
    /// means the full horizon.
    pub preview_horizon: Option<usize>,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            layout: HighwayLayout::default(),
            driver: DriverConfig::default(),
            primitives: PrimitiveConfig::default(),
            dt: 0.2,
            horizon: 40,
            preview_horizon: None,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || self.horizon == 0 {
            return Err(Error::InvalidConfig(
                "dt and horizon must be positive".into(),
            ));
        }
        self.layout.validate()?;
        self.driver.validate()?;
        self.primitives.validate(self.dt)
    }

    pub fn preview(&self) -> usize {
        self.preview_horizon.unwrap_or(self.horizon)
    }
}
