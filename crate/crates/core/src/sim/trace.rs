//! JSON-Lines episode trace, hashing and kinematic consistency checks.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::driver::LateralDecision;
use crate::error::{Error, Result};
use crate::kinematics::{Bicycle, ControlInput, LaneChange, PrimitiveKind};
use crate::planners::PlannerDiagnostics;
use crate::scenario::{VehicleClass, VehicleId, VehicleState};

use super::SimConfig;

pub const TRACE_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Spawned,
    Primitive(PrimitiveKind),
    Decision(LateralDecision),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleStatus {
    Active,
    Crashed,
    Retired,
}

/// One vehicle at one time index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleStep {
    pub id: VehicleId,
    pub class: VehicleClass,
    pub state: VehicleState,
    /// Control applied over the preceding step (absent on the spawn step).
    pub control: Option<ControlInput>,
    /// Primitive or decision that produced this state.
    pub action: Action,
    pub status: VehicleStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane_change: Option<LaneChange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_speed: Option<f64>,
    pub spawn_time: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceRecord {
    Header {
        version: u32,
        config: Box<SimConfig>,
    },
    Spawn {
        t: u32,
        id: VehicleId,
        class: VehicleClass,
        state: VehicleState,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_speed: Option<f64>,
    },
    Step {
        t: u32,
        vehicles: Vec<VehicleStep>,
    },
    /// `b` is absent for a single-vehicle (off-road) crash.
    Collision {
        t: u32,
        a: VehicleId,
        class_a: VehicleClass,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<VehicleId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        class_b: Option<VehicleClass>,
    },
    Retire {
        t: u32,
        id: VehicleId,
        spawn_time: u32,
    },
    Diag {
        t: u32,
        diagnostics: PlannerDiagnostics,
    },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeTrace {
    pub records: Vec<TraceRecord>,
}

/// Spawn-to-exit summary of one vehicle, rebuilt from a trace.
#[derive(Clone, Debug, PartialEq)]
pub struct VehicleHistory {
    pub class: VehicleClass,
    pub spawn_time: u32,
    pub spawn_state: VehicleState,
    pub retired_at: Option<u32>,
    pub crashed_at: Option<u32>,
}

impl EpisodeTrace {
    pub fn push(&mut self, r: TraceRecord) {
        self.records.push(r);
    }

    pub fn config(&self) -> Option<&SimConfig> {
        match self.records.first() {
            Some(TraceRecord::Header { config, .. }) => Some(config),
            _ => None,
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        buf
    }

    pub fn hash(&self) -> String {
        hash_bytes(&self.to_jsonl())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut records = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = serde_json::from_str(&line)
                .map_err(|e| Error::Trace(format!("line {}: {e}", n + 1)))?;
            records.push(rec);
        }
        Ok(Self { records })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(f))
    }

    pub fn steps(&self) -> impl Iterator<Item = (u32, &[VehicleStep])> {
        self.records.iter().filter_map(|r| match r {
            TraceRecord::Step { t, vehicles } => Some((*t, vehicles.as_slice())),
            _ => None,
        })
    }

    pub fn histories(&self) -> BTreeMap<VehicleId, VehicleHistory> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            match r {
                TraceRecord::Spawn {
                    t,
                    id,
                    class,
                    state,
                    ..
                } => {
                    out.insert(
                        *id,
                        VehicleHistory {
                            class: *class,
                            spawn_time: *t,
                            spawn_state: *state,
                            retired_at: None,
                            crashed_at: None,
                        },
                    );
                }
                TraceRecord::Retire { t, id, .. } => {
                    if let Some(h) = out.get_mut(id) {
                        h.retired_at = Some(*t);
                    }
                }
                TraceRecord::Collision { t, a, b, .. } => {
                    for id in std::iter::once(a).chain(b.as_ref()) {
                        if let Some(h) = out.get_mut(id) {
                            h.crashed_at.get_or_insert(*t);
                        }
                    }
                }
                _ => {}
            }
        }
        out
    }

    pub fn collisions(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records
            .iter()
            .filter(|r| matches!(r, TraceRecord::Collision { .. }))
    }

    pub fn diagnostics(&self) -> impl Iterator<Item = (u32, &PlannerDiagnostics)> {
        self.records.iter().filter_map(|r| match r {
            TraceRecord::Diag { t, diagnostics } => Some((*t, diagnostics)),
            _ => None,
        })
    }
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Checks that every recorded state follows from the previous one under
/// the recorded control. Returns the number of transitions checked.
pub fn verify_kinematics(trace: &EpisodeTrace, bicycle: &Bicycle, dt: f64) -> Result<usize> {
    let mut last: BTreeMap<VehicleId, (u32, VehicleState)> = BTreeMap::new();
    let mut checked = 0;
    for (t, vehicles) in trace.steps() {
        for v in vehicles {
            if let (Some((pt, prev)), Some(u)) = (last.get(&v.id), v.control) {
                if *pt + 1 != t {
                    return Err(Error::Trace(format!(
                        "vehicle {} skips from t={pt} to t={t}",
                        v.id
                    )));
                }
                let expect = bicycle.step(prev, u, dt);
                if expect != v.state {
                    return Err(Error::Trace(format!(
                        "vehicle {} at t={t}: recorded state differs from the kinematic replay",
                        v.id
                    )));
                }
                checked += 1;
            }
            last.insert(v.id, (t, v.state));
        }
    }
    Ok(checked)
}
