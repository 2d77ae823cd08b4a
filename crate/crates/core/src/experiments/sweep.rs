//! Grid sweeps over planner, penetration rate, arrival rate and seed.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planners::PlannerKind;
use crate::sim::{run_episode, SimConfig};

use super::{episode_metrics, EpisodeMetrics};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub alphas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub planners: Vec<PlannerKind>,
    /// Settings shared by every episode; the swept fields are overridden.
    pub base: SimConfig,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            alphas: vec![0.4, 0.5, 0.6, 0.7, 0.8],
            lambdas: vec![2500.0, 3000.0],
            seeds: (0..5).collect(),
            planners: vec![
                PlannerKind::BkPbs,
                PlannerKind::BkMAstar,
                PlannerKind::IdmMobil,
            ],
            base: SimConfig::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty()
            || self.lambdas.is_empty()
            || self.seeds.is_empty()
            || self.planners.is_empty()
        {
            return Err(Error::InvalidConfig("sweep axes must be non-empty".into()));
        }
        for &planner in &self.planners {
            for &a in &self.alphas {
                for &l in &self.lambdas {
                    self.config(planner, a, l, 0).validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn config(&self, planner: PlannerKind, alpha: f64, lambda: f64, seed: u64) -> SimConfig {
        SimConfig {
            planner,
            penetration: alpha,
            arrival_rate: lambda,
            seed,
            ..self.base.clone()
        }
    }

    fn cells(&self) -> Vec<(PlannerKind, f64, f64)> {
        let mut out = Vec::new();
        for &p in &self.planners {
            for &l in &self.lambdas {
                for &a in &self.alphas {
                    out.push((p, a, l));
                }
            }
        }
        out
    }
}

/// One episode of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub planner: PlannerKind,
    pub alpha: f64,
    pub lambda: f64,
    pub seed: u64,
    pub ok: bool,
    pub spawned: usize,
    pub crashed: usize,
    pub cav_involved_crashed: usize,
    pub retired: usize,
    pub ctrl_collision_rate: f64,
    pub mean_delay_s: f64,
    pub throughput_vph: f64,
    pub error: String,
}

/// Seed-averaged result of one (planner, alpha, lambda) cell. `seeds` counts
/// the episodes that finished; a cell with none carries NaN metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub planner: PlannerKind,
    pub alpha: f64,
    pub lambda: f64,
    pub seeds: usize,
    pub ctrl_collision_rate: f64,
    pub mean_delay_s: f64,
    pub throughput_vph: f64,
}

impl ResultRow {
    pub fn failed(&self) -> bool {
        self.seeds == 0
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepResults {
    pub rows: Vec<ResultRow>,
    pub per_seed: Vec<SeedRow>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn run_one(cfg: &SimConfig) -> std::result::Result<EpisodeMetrics, String> {
    match catch_unwind(AssertUnwindSafe(|| run_episode(cfg))) {
        Ok(Ok(trace)) => Ok(episode_metrics(&trace)),
        Ok(Err(e)) => Err(e.to_string()),
        Err(panic) => Err(panic
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| panic.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "episode panicked".into())),
    }
}

/// Averages per-seed rows into one row per cell, uniformly over seeds.
pub fn aggregate(spec: &SweepSpec, per_seed: &[SeedRow]) -> Vec<ResultRow> {
    spec.cells()
        .into_iter()
        .map(|(planner, alpha, lambda)| {
            let ok: Vec<&SeedRow> = per_seed
                .iter()
                .filter(|r| r.ok && r.planner == planner && r.alpha == alpha && r.lambda == lambda)
                .collect();
            ResultRow {
                planner,
                alpha,
                lambda,
                seeds: ok.len(),
                ctrl_collision_rate: mean(ok.iter().map(|r| r.ctrl_collision_rate)),
                mean_delay_s: mean(ok.iter().map(|r| r.mean_delay_s)),
                throughput_vph: mean(ok.iter().map(|r| r.throughput_vph)),
            }
        })
        .collect()
}

/// Runs every (planner, alpha, lambda, seed) episode on `jobs` threads (0
/// lets rayon decide). Output order follows the sweep grid.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<SweepResults> {
    spec.validate()?;
    let mut work = Vec::new();
    for (planner, alpha, lambda) in spec.cells() {
        for &seed in &spec.seeds {
            work.push(spec.config(planner, alpha, lambda, seed));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let per_seed: Vec<SeedRow> = pool.install(|| {
        work.par_iter()
            .map(|cfg| {
                let out = run_one(cfg);
                let m = out.as_ref().cloned().unwrap_or_default();
                SeedRow {
                    planner: cfg.planner,
                    alpha: cfg.penetration,
                    lambda: cfg.arrival_rate,
                    seed: cfg.seed,
                    ok: out.is_ok(),
                    spawned: m.spawned,
                    crashed: m.crashed,
                    cav_involved_crashed: m.cav_involved_crashed,
                    retired: m.retired,
                    ctrl_collision_rate: if out.is_ok() {
                        m.ctrl_collision_rate
                    } else {
                        f64::NAN
                    },
                    mean_delay_s: if out.is_ok() { m.mean_delay } else { f64::NAN },
                    throughput_vph: if out.is_ok() {
                        m.throughput_vph
                    } else {
                        f64::NAN
                    },
                    error: out.err().unwrap_or_default(),
                }
            })
            .collect()
    });
    Ok(SweepResults {
        rows: aggregate(spec, &per_seed),
        per_seed,
    })
}

impl SweepResults {
    pub fn write_results_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_per_seed_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.per_seed {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Controllable collision rate per (lambda, alpha) for one planner.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub planner: PlannerKind,
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
    /// `cells[i][j]` is the rate at `lambdas[i]`, `alphas[j]`.
    pub cells: Vec<Vec<f64>>,
}

impl Heatmap {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["lambda".to_string()];
        header.extend(self.alphas.iter().map(|a| format!("alpha_{a}")));
        w.write_record(&header)?;
        for (l, row) in self.lambdas.iter().zip(&self.cells) {
            let mut rec = vec![l.to_string()];
            rec.extend(row.iter().map(|c| c.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One matrix per planner over the full sweep grid. Cells absent from
/// `rows` or without a finished episode are reported as missing.
pub fn emit_heatmap(spec: &SweepSpec, rows: &[ResultRow]) -> Result<Vec<Heatmap>> {
    let index: BTreeMap<(PlannerKind, u64, u64), &ResultRow> = rows
        .iter()
        .filter(|r| !r.failed())
        .map(|r| ((r.planner, r.lambda.to_bits(), r.alpha.to_bits()), r))
        .collect();
    let planners: BTreeSet<PlannerKind> = spec.planners.iter().copied().collect();
    let mut out = Vec::new();
    for planner in planners {
        let mut missing = Vec::new();
        let mut cells = Vec::new();
        for &l in &spec.lambdas {
            let mut row = Vec::new();
            for &a in &spec.alphas {
                match index.get(&(planner, l.to_bits(), a.to_bits())) {
                    Some(r) => row.push(r.ctrl_collision_rate),
                    None => {
                        missing.push(format!("(lambda={l}, alpha={a})"));
                        row.push(f64::NAN);
                    }
                }
            }
            cells.push(row);
        }
        if !missing.is_empty() {
            return Err(Error::IncompleteGrid {
                planner: planner.to_string(),
                missing: missing.join(", "),
            });
        }
        out.push(Heatmap {
            planner,
            lambdas: spec.lambdas.clone(),
            alphas: spec.alphas.clone(),
            cells,
        });
    }
    Ok(out)
}
