use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde_json::json;

use hwcoord::experiments::config::parse_config;
use hwcoord::experiments::{
    collect_training_data, emit_heatmap, episode_metrics, load_sim_config, load_sweep_spec,
    run_sweep, DataCollection, SweepSpec,
};
use hwcoord::params::Params;
use hwcoord::planners::PlannerKind;
use hwcoord::prediction::dataset::{read_csv, write_csv};
use hwcoord::prediction::{
    evaluate_predictor, split_holdout, train_classifier, LaneChangeSample, Partition, Predictor,
    TrainConfig,
};
use hwcoord::sim::{replay, SimConfig, Simulation};

#[derive(Parser)]
#[command(
    name = "hwcoord",
    version,
    about = "Highway merge coordination simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and print its trace hash and metrics.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        planner: Option<PlannerKind>,
        /// Write the JSONL trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the planner x penetration x arrival-rate x seed grid.
    Sweep {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Held-out accuracy of the rollout oracle and a trained classifier.
    PredictEval {
        #[arg(long)]
        dataset: PathBuf,
        /// Simulation config whose parameters the dataset was collected with.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        epochs: Option<usize>,
        /// Save the trained classifier as JSON.
        #[arg(long)]
        save_classifier: Option<PathBuf>,
    },
    /// Run rule-based episodes and write a lane-change dataset CSV.
    CollectData {
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Collection spec (TOML or JSON).
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        target_samples: Option<usize>,
    },
    /// Re-run a stored trace and check it reproduces bit-exactly.
    Replay {
        #[arg(long)]
        trace: PathBuf,
    },
}

/// Exit code 1: invalid configuration. Exit code 2: episode failure.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 1,
        error: e.into(),
    }
}

fn failed(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        error: e.into(),
    }
}

fn classify(e: hwcoord::Error) -> Failure {
    match e {
        hwcoord::Error::InvalidConfig(_) | hwcoord::Error::Toml(_) => invalid(e),
        _ => failed(e),
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Simulate {
            config,
            seed,
            planner,
            trace,
        } => simulate(config.as_deref(), seed, planner, trace.as_deref()),
        Command::Sweep { spec, out, jobs } => sweep(spec.as_deref(), &out, jobs),
        Command::PredictEval {
            dataset,
            config,
            test_fraction,
            seed,
            epochs,
            save_classifier,
        } => predict_eval(
            &dataset,
            config.as_deref(),
            test_fraction,
            seed,
            epochs,
            save_classifier.as_deref(),
        ),
        Command::CollectData {
            episodes,
            out,
            spec,
            target_samples,
        } => collect_data(episodes, &out, spec.as_deref(), target_samples),
        Command::Replay { trace } => replay_trace(&trace),
    }
}

fn print(value: serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(&value).expect("json value")
    );
}

fn sim_config(path: Option<&Path>) -> std::result::Result<SimConfig, Failure> {
    match path {
        Some(p) => load_sim_config(p).map_err(|e| invalid(anyhow!(e)).context(p)),
        None => Ok(SimConfig::default()),
    }
}

impl Failure {
    fn context(self, path: &Path) -> Self {
        Failure {
            code: self.code,
            error: self.error.context(format!("loading {}", path.display())),
        }
    }
}

fn simulate(
    config: Option<&Path>,
    seed: Option<u64>,
    planner: Option<PlannerKind>,
    trace_out: Option<&Path>,
) -> Outcome {
    let mut cfg = sim_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(p) = planner {
        cfg.planner = p;
    }
    let sim = Simulation::new(cfg.clone()).map_err(classify)?;
    let trace = sim.run().map_err(failed)?;
    if let Some(path) = trace_out {
        trace
            .save(path)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(failed)?;
    }
    let m = episode_metrics(&trace);
    print(json!({
        "hash": trace.hash(),
        "planner": cfg.planner.name(),
        "seed": cfg.seed,
        "spawned": m.spawned,
        "crashed": m.crashed,
        "cav_involved_crashed": m.cav_involved_crashed,
        "retired": m.retired,
        "ctrl_collision_rate": m.ctrl_collision_rate,
        "crash_rate": m.crash_rate,
        "mean_delay_s": m.mean_delay,
        "throughput_vph": m.throughput_vph,
    }));
    Ok(())
}

fn sweep(spec: Option<&Path>, out: &Path, jobs: usize) -> Outcome {
    let spec = match spec {
        Some(p) => load_sweep_spec(p).map_err(|e| invalid(e).context(p))?,
        None => SweepSpec::default(),
    };
    if jobs == 0 {
        return Err(invalid(anyhow!("--jobs must be at least 1")));
    }
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(failed)?;
    let results = run_sweep(&spec, jobs).map_err(failed)?;
    results
        .write_results_csv(&out.join("results.csv"))
        .map_err(failed)?;
    results
        .write_per_seed_csv(&out.join("per_seed.csv"))
        .map_err(failed)?;
    for map in emit_heatmap(&spec, &results.rows).map_err(failed)? {
        let name = format!("heatmap_{}.csv", map.planner.name().to_ascii_lowercase());
        map.write_csv(&out.join(name)).map_err(failed)?;
    }
    let seed_failures: Vec<_> = results.per_seed.iter().filter(|r| !r.ok).collect();
    for r in &seed_failures {
        eprintln!(
            "episode failed: planner={} alpha={} lambda={} seed={}: {}",
            r.planner, r.alpha, r.lambda, r.seed, r.error
        );
    }
    println!(
        "{} cells, {} episodes, {} failed -> {}",
        results.rows.len(),
        results.per_seed.len(),
        seed_failures.len(),
        out.display()
    );
    if seed_failures.is_empty() {
        Ok(())
    } else {
        Err(failed(anyhow!("{} episodes failed", seed_failures.len())))
    }
}

fn partition_name(p: Partition) -> &'static str {
    match p {
        Partition::Ramp => "ramp",
        Partition::Main => "main",
    }
}

fn predict_eval(
    dataset: &Path,
    config: Option<&Path>,
    test_fraction: f64,
    seed: u64,
    epochs: Option<usize>,
    save: Option<&Path>,
) -> Outcome {
    if !(0.0..1.0).contains(&test_fraction) || test_fraction == 0.0 {
        return Err(invalid(anyhow!("--test-fraction must be in (0, 1)")));
    }
    let params: Params = sim_config(config)?.params();
    let samples = read_csv(dataset).map_err(|e| classify(e).context(dataset))?;
    let (train, test) = split_holdout(&samples, test_fraction, seed);
    let rows: Vec<(&[f64], bool)> = train
        .iter()
        .map(|s| (s.features.as_slice(), s.label))
        .collect();
    let mut tc = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    if let Some(e) = epochs {
        tc.epochs = e;
    }
    let (clf, loss) = train_classifier(&rows, &tc).map_err(failed)?;
    if let Some(path) = save {
        let text = serde_json::to_string(&clf).map_err(failed)?;
        std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(failed)?;
    }
    let oracle = Predictor::RolloutOracle;
    let mut report = serde_json::Map::new();
    for part in [Partition::Ramp, Partition::Main] {
        let items: Vec<&LaneChangeSample> = test.iter().filter(|s| s.partition == part).collect();
        if items.is_empty() {
            continue;
        }
        let o = evaluate_predictor(
            &items,
            |s| oracle.predicts_lane_change(&s.observation, &params),
            |s| s.label,
        )
        .map_err(failed)?;
        let c = evaluate_predictor(&items, |s| clf.predict(&s.features), |s| s.label)
            .map_err(failed)?;
        report.insert(
            partition_name(part).into(),
            json!({
                "samples": items.len(),
                "rollout_oracle": { "accuracy": o.accuracy(), "confusion": o },
                "classifier": { "accuracy": c.accuracy(), "confusion": c },
            }),
        );
    }
    print(json!({
        "train_samples": train.len(),
        "test_samples": test.len(),
        "final_loss": loss,
        "partitions": report,
    }));
    Ok(())
}

fn collect_data(
    episodes: Option<usize>,
    out: &Path,
    spec: Option<&Path>,
    target_samples: Option<usize>,
) -> Outcome {
    let mut dc: DataCollection = match spec {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .map_err(invalid)?;
            parse_config(&text, p).map_err(classify)?
        }
        None => DataCollection::default(),
    };
    if let Some(n) = episodes {
        dc.episodes = n;
    }
    if target_samples.is_some() {
        dc.target_samples = target_samples;
    }
    if dc.alphas.is_empty() || dc.lambdas.is_empty() {
        return Err(invalid(anyhow!("alphas and lambdas must be non-empty")));
    }
    dc.base.validate().map_err(classify)?;
    let samples = collect_training_data(&dc).map_err(failed)?;
    write_csv(&samples, out).map_err(|e| failed(e).context(out))?;
    let positives = samples.iter().filter(|s| s.label).count();
    println!(
        "{} samples ({} lane changes) from {} episodes -> {}",
        samples.len(),
        positives,
        dc.episodes,
        out.display()
    );
    Ok(())
}

fn replay_trace(path: &Path) -> Outcome {
    let report = replay(path).map_err(|e| classify(e).context(path))?;
    print(json!({
        "stored_hash": report.stored_hash,
        "replay_hash": report.replay_hash,
        "transitions_checked": report.transitions_checked,
        "matches": report.matches(),
    }));
    if report.matches() {
        Ok(())
    } else {
        Err(failed(anyhow!("replay hash differs from the stored trace")))
    }
}
