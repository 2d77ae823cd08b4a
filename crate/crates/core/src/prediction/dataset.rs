//! Lane-change samples harvested from episode traces.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::driver::LateralDecision;
use crate::error::{Error, Result};
use crate::params::Params;
use crate::scenario::{VehicleClass, VehicleId, VehicleRecord};
use crate::sim::{Action, EpisodeTrace, VehicleStatus, VehicleStep};

use super::features::feature_names;
use super::Observation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Partition {
    Ramp,
    Main,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaneChangeSample {
    pub partition: Partition,
    /// True iff the HDV initiated a lane change over the next step.
    pub label: bool,
    pub features: Vec<f64>,
    pub observation: Observation,
}

fn record_of(v: &VehicleStep) -> VehicleRecord {
    VehicleRecord {
        idm_target_speed: v.target_speed,
        spawn_time: v.spawn_time,
        lane_change: v.lane_change,
        crashed: v.status == VehicleStatus::Crashed,
        ..VehicleRecord::new(v.id, v.class, v.state)
    }
}

fn initiated(v: &VehicleStep) -> bool {
    matches!(
        v.action,
        Action::Decision(LateralDecision::ChangeLeft | LateralDecision::ChangeRight)
    ) && v.lane_change.is_some()
}

/// One sample per HDV that is free to decide at each decision step.
pub fn collect_dataset(traces: &[EpisodeTrace]) -> Vec<LaneChangeSample> {
    let mut out = Vec::new();
    for trace in traces {
        let params = trace.config().map(|c| c.params()).unwrap_or_default();
        let steps: Vec<_> = trace.steps().collect();
        for pair in steps.windows(2) {
            let [(t, now), (t1, next)] = pair else {
                unreachable!()
            };
            if *t1 != t + 1 || !params.driver.is_decision_step(*t) {
                continue;
            }
            out.extend(samples_at(*t, now, next, &params));
        }
    }
    out
}

fn samples_at(
    t: u32,
    now: &[VehicleStep],
    next: &[VehicleStep],
    params: &Params,
) -> Vec<LaneChangeSample> {
    let scene: Vec<VehicleRecord> = now
        .iter()
        .filter(|v| v.status == VehicleStatus::Active)
        .map(record_of)
        .collect();
    let after: BTreeMap<VehicleId, &VehicleStep> = next.iter().map(|v| (v.id, v)).collect();
    let mut out = Vec::new();
    for rec in scene.iter().filter(|r| r.class == VehicleClass::Hdv) {
        if rec.lane_change.is_some() {
            continue;
        }
        let (Some(nv), Ok(lane)) = (after.get(&rec.id), rec.lane(&params.layout)) else {
            continue;
        };
        let Ok(obs) = Observation::capture(rec, &scene, t, params) else {
            continue;
        };
        out.push(LaneChangeSample {
            partition: if params.layout.is_ramp(lane) {
                Partition::Ramp
            } else {
                Partition::Main
            },
            label: initiated(nv),
            features: obs.features(params),
            observation: obs,
        });
    }
    out
}

/// Deterministic shuffled split; the first part holds `1 - test_fraction`.
pub fn split_holdout(
    samples: &[LaneChangeSample],
    test_fraction: f64,
    seed: u64,
) -> (Vec<LaneChangeSample>, Vec<LaneChangeSample>) {
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((samples.len() as f64) * test_fraction).round() as usize;
    let (test, train) = idx.split_at(n_test.min(samples.len()));
    let pick = |ix: &[usize]| ix.iter().map(|&i| samples[i].clone()).collect();
    (pick(train), pick(test))
}

/// CSV with a header: partition, label, one column per feature, then the
/// observation as JSON.
pub fn write_csv(samples: &[LaneChangeSample], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["partition".to_string(), "label".to_string()];
    header.extend(feature_names());
    header.push("observation".into());
    w.write_record(&header)?;
    for s in samples {
        let mut row = vec![
            match s.partition {
                Partition::Ramp => "ramp".to_string(),
                Partition::Main => "main".to_string(),
            },
            u8::from(s.label).to_string(),
        ];
        row.extend(s.features.iter().map(|f| f.to_string()));
        row.push(serde_json::to_string(&s.observation)?);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<LaneChangeSample>> {
    let mut r = csv::Reader::from_path(path)?;
    let width = feature_names().len();
    let mut out = Vec::new();
    for (n, row) in r.records().enumerate() {
        let row = row?;
        let bad = |m: &str| Error::InvalidConfig(format!("dataset row {}: {m}", n + 1));
        if row.len() != width + 3 {
            return Err(bad("wrong column count"));
        }
        let partition = match &row[0] {
            "ramp" => Partition::Ramp,
            "main" => Partition::Main,
            _ => return Err(bad("unknown partition")),
        };
        let label = match &row[1] {
            "0" => false,
            "1" => true,
            _ => return Err(bad("label must be 0 or 1")),
        };
        let features = (2..2 + width)
            .map(|i| {
                row[i]
                    .parse::<f64>()
                    .map_err(|_| bad("non-numeric feature"))
            })
            .collect::<Result<Vec<_>>>()?;
        let observation = serde_json::from_str(&row[width + 2])?;
        out.push(LaneChangeSample {
            partition,
            label,
            features,
            observation,
        });
    }
    Ok(out)
}
