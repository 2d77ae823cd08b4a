//! Lane-change dataset collection from rule-based episodes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::planners::PlannerKind;
use crate::prediction::{collect_dataset, LaneChangeSample};
use crate::sim::{run_episode, MergeMode, SimConfig};

/// Episodes cycle through the penetration and arrival-rate grids; CAVs run
/// the IDM_MOBIL rollout policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataCollection {
    pub episodes: usize,
    pub first_seed: u64,
    pub alphas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub merge_mode: MergeMode,
    /// Stop adding episodes once this many samples exist.
    pub target_samples: Option<usize>,
    pub base: SimConfig,
}

impl Default for DataCollection {
    fn default() -> Self {
        Self {
            episodes: 40,
            first_seed: 1000,
            alphas: vec![0.4, 0.5, 0.6, 0.7, 0.8],
            lambdas: vec![2500.0, 3000.0],
            merge_mode: MergeMode::Deterministic,
            target_samples: None,
            base: SimConfig::default(),
        }
    }
}

impl DataCollection {
    pub fn config(&self, i: usize) -> SimConfig {
        SimConfig {
            planner: PlannerKind::IdmMobil,
            penetration: self.alphas[i % self.alphas.len()],
            arrival_rate: self.lambdas[(i / self.alphas.len()) % self.lambdas.len()],
            seed: self.first_seed + i as u64,
            merge_mode: self.merge_mode,
            ..self.base.clone()
        }
    }
}

/// Runs the episodes in parallel and concatenates their samples in
/// episode order, truncated to `target_samples`.
pub fn collect_training_data(spec: &DataCollection) -> Result<Vec<LaneChangeSample>> {
    let per_episode: Vec<Vec<LaneChangeSample>> = (0..spec.episodes)
        .into_par_iter()
        .map(|i| run_episode(&spec.config(i)).map(|tr| collect_dataset(&[tr])))
        .collect::<Result<_>>()?;
    let mut out: Vec<LaneChangeSample> = per_episode.into_iter().flatten().collect();
    if let Some(n) = spec.target_samples {
        out.truncate(n);
    }
    Ok(out)
}
