use std::path::{Path, PathBuf};
use std::time::Instant;

use canalbank_core::coeffs::{Block, CoefficientSet};
use canalbank_core::config::ModelConfig;
use canalbank_core::dataset::{self, CaptiveDataset, Scenario, SynthSpec, TestLabel};
use canalbank_core::error::Error;
use canalbank_core::hydro::PlanarState;
use canalbank_core::identify::{self, CoefficientsDocument};
use canalbank_core::shapley::{ShapleyBlock, ShapleyReport};
use canalbank_core::sim::{self, SimConfig};
use clap::Parser;
use serde_json::json;

use crate::cli::{
    BlockChoice, Cli, Command, DatagenArgs, IdentifyArgs, ModelArgs, ScenarioKind, ShapleyArgs, SimArgs, SimulateArgs,
    SweepArgs,
};
use crate::manifest::{write_atomic, write_json, RunManifest};

#[derive(Debug)]
pub enum Failure {
    /// Bad input, flags or files; exit code 2.
    User(String),
    /// A bug or an environment failure; exit code 1.
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::User(e.to_string())
    }
}

fn user(msg: impl Into<String>) -> Failure {
    Failure::User(msg.into())
}

fn in_file(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| match e {
        Error::Io { .. } => e.into(),
        other => user(format!("{}: {other}", path.display())),
    }
}

/// What a command read and wrote, for the manifest.
#[derive(Default)]
struct Trace {
    config: Option<PathBuf>,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

pub fn execute(cli: Cli, args: Vec<String>) -> Result<(), Failure> {
    if let Command::Replay { manifest_path } = &cli.command {
        let recorded = RunManifest::load(manifest_path)?;
        if recorded.args.first().map(String::as_str) == Some("replay") {
            return Err(user("refusing to replay a replay"));
        }
        let argv = std::iter::once("canalbank".to_string()).chain(recorded.args.iter().cloned());
        let replayed = Cli::try_parse_from(argv).map_err(|e| user(format!("manifest arguments: {e}")))?;
        return execute(replayed, recorded.args);
    }
    if cli.jobs == 0 {
        return Err(user("--jobs must be at least 1"));
    }
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build().map_err(|e| Failure::Internal(e.to_string()))?;
    let start = Instant::now();
    let (name, trace) = pool.install(|| -> Result<(&str, Trace), Failure> {
        Ok(match &cli.command {
            Command::Datagen(a) => ("datagen", datagen(a)?),
            Command::Identify(a) => ("identify", identify(a)?),
            Command::Shapley(a) => ("shapley", shapley(a)?),
            Command::Simulate(a) => ("simulate", simulate(a)?),
            Command::Sweep(a) => ("sweep", sweep(a)?),
            Command::Replay { .. } => unreachable!(),
        })
    })?;
    let manifest = RunManifest {
        command: name.to_string(),
        args,
        config: trace.config,
        seed: trace.seed,
        inputs: trace.inputs,
        outputs: trace.outputs.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        duration_s: start.elapsed().as_secs_f64(),
    };
    let path = cli.manifest.clone().unwrap_or_else(|| RunManifest::default_path(&trace.outputs[0]));
    write_json(&path, &manifest)
}

fn load_model(args: &ModelArgs, trace: &mut Trace) -> Result<ModelConfig, Failure> {
    match &args.config {
        Some(path) => {
            trace.config = Some(path.clone());
            trace.inputs.push(path.clone());
            Ok(ModelConfig::load(path)?)
        }
        None => Ok(ModelConfig::dtc_canal()),
    }
}

fn load_dataset(path: &Path, trace: &mut Trace) -> Result<CaptiveDataset, Failure> {
    trace.inputs.push(path.to_path_buf());
    CaptiveDataset::load_csv(path).map_err(in_file(path))
}

fn load_coeffs(path: &Path, trace: &mut Trace) -> Result<CoefficientSet, Failure> {
    trace.inputs.push(path.to_path_buf());
    identify::load_coefficients(path).map_err(in_file(path))
}

fn write_dataset(ds: &CaptiveDataset, path: &Path, trace: &mut Trace) -> Result<(), Failure> {
    let mut buf = Vec::new();
    ds.write_csv(&mut buf)?;
    write_atomic(path, &buf)?;
    trace.outputs.push(path.to_path_buf());
    Ok(())
}

fn datagen(a: &DatagenArgs) -> Result<Trace, Failure> {
    let mut trace = Trace::default();
    let noisy = a.noise.is_some_and(|f| f != 0.0) || a.noise_std.as_ref().is_some_and(|s| s.iter().any(|&v| v != 0.0));
    if noisy && a.seed.is_none() {
        return Err(user("noise requires --seed so the dataset can be reproduced"));
    }
    if let Some(f) = a.noise {
        if !(f.is_finite() && f >= 0.0) {
            return Err(user(format!("--noise must be a non-negative fraction, got {f}")));
        }
    }
    let seed = a.seed.unwrap_or(0);
    trace.seed = a.seed;
    let cfg = load_model(&a.model, &mut trace)?;
    let truth = match &a.truth {
        Some(p) => load_coeffs(p, &mut trace)?,
        None => CoefficientSet::reference_dtc(),
    };
    let mut ds = match a.scenario {
        ScenarioKind::Program => {
            dataset::synthesize_program(&cfg.vessel, &cfg.canal, cfg.current, &truth, a.dt, 0.0, seed)?
        }
        kind => {
            let (scenario, label) = match kind {
                ScenarioKind::Yaw => {
                    (Scenario::HarmonicYaw { amplitude: a.amplitude, period: a.period, offset: a.offset }, TestLabel::A)
                }
                _ => (
                    Scenario::HarmonicSway { amplitude: a.amplitude, period: a.period, offset: a.offset },
                    TestLabel::C,
                ),
            };
            let spec =
                SynthSpec { scenario, u0: a.u0, duration: a.duration, dt: a.dt, noise_std: [0.0; 3], seed, label };
            dataset::synthesize(&cfg.vessel, &cfg.canal, cfg.current, &truth, &spec)?
        }
    };
    if let Some(fraction) = a.noise.filter(|&f| f > 0.0) {
        let sigma = ds.channel_rms().map(|rms| fraction * rms);
        ds.add_noise(sigma, seed)?;
    }
    if let Some(std) = &a.noise_std {
        ds.add_noise([std[0], std[1], std[2]], seed)?;
    }
    write_dataset(&ds, &a.out, &mut trace)?;
    println!("wrote {} records to {}", ds.len(), a.out.display());
    Ok(trace)
}

fn identify(a: &IdentifyArgs) -> Result<Trace, Failure> {
    let mut trace = Trace { seed: Some(a.split.split_seed), ..Default::default() };
    let cfg = load_model(&a.model, &mut trace)?;
    let ds = load_dataset(&a.data, &mut trace)?;
    let split = dataset::split(ds.len(), a.split.train_fraction, a.split.split_seed)?;
    let report = identify::fit(&ds, &cfg, &split).map_err(in_file(&a.data))?;
    let id = &report.identification;

    for w in &id.warnings {
        eprintln!("warning: {w}");
    }
    if !id.added_mass_positive_definite() {
        eprintln!("warning: identified added-mass matrix is not positive definite");
    }
    println!("train rows {}, validation rows {}", report.train_rows, report.validation_rows);
    for (name, value) in id.coefficients.named() {
        println!("  {name:<8} {value:>14.6}");
    }
    if !id.active_bounds.is_empty() {
        println!("held at zero by sign constraints: {}", id.active_bounds.join(", "));
    }
    let (t, v) = (&id.train_mse, &report.validation_mse);
    println!("train MSE      X {:.6e}  Y {:.6e}  N {:.6e}", t.x, t.y, t.n);
    println!("validation MSE X {:.6e}  Y {:.6e}  N {:.6e}", v.x, v.y, v.n);
    if let Some(path) = &a.truth {
        let truth = load_coeffs(path, &mut trace)?;
        let (name, err) = id.coefficients.max_relative_error(&truth);
        println!("max relative error vs truth: {err:.3e} ({name})");
    }

    let doc = CoefficientsDocument {
        coefficients: id.coefficients,
        split_seed: Some(a.split.split_seed),
        split_fraction: Some(a.split.train_fraction),
        config: Some((&cfg).into()),
        fit: Some(report),
    };
    write_json(&a.out, &doc)?;
    trace.outputs.push(a.out.clone());
    Ok(trace)
}

fn shapley(a: &ShapleyArgs) -> Result<Trace, Failure> {
    let mut trace = Trace::default();
    let (mut seed, mut fraction) = (0, 0.8);
    if let Some(path) = &a.coeffs {
        trace.inputs.push(path.clone());
        let text = std::fs::read_to_string(path).map_err(|e| user(format!("{}: {e}", path.display())))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| user(format!("{}: {e}", path.display())))?;
        if value.get("coefficients").is_some() {
            let doc: CoefficientsDocument =
                serde_json::from_value(value).map_err(|e| user(format!("{}: {e}", path.display())))?;
            seed = doc.split_seed.unwrap_or(seed);
            fraction = doc.split_fraction.unwrap_or(fraction);
        }
    }
    seed = a.split_seed.unwrap_or(seed);
    fraction = a.train_fraction.unwrap_or(fraction);
    trace.seed = Some(seed);

    let cfg = load_model(&a.model, &mut trace)?;
    let ds = load_dataset(&a.data, &mut trace)?;
    let problem = identify::build_matrices(&ds, &cfg.vessel, &cfg.canal, cfg.current).map_err(in_file(&a.data))?;
    let split = dataset::split(ds.len(), fraction, seed)?;
    let (train, val) = (problem.select_rows(&split.train), problem.select_rows(&split.validation));
    let blocks: Vec<Block> = match a.block {
        BlockChoice::X => vec![Block::X],
        BlockChoice::Y => vec![Block::Y],
        BlockChoice::N => vec![Block::N],
        BlockChoice::All => Block::ALL.to_vec(),
    };
    let results = blocks
        .into_iter()
        .map(|b| ShapleyBlock::from_problems(&train, &val, b)?.attribute(Some(b)))
        .collect::<Result<Vec<_>, _>>()?;
    let report = ShapleyReport { blocks: results };
    print!("{}", report.to_table());
    write_json(&a.out, &report)?;
    trace.outputs.push(a.out.clone());
    Ok(trace)
}

fn sim_config(a: &SimArgs, cfg: &ModelConfig, y0: f64, psi0: f64) -> SimConfig {
    SimConfig {
        dt: a.dt,
        t_max: a.t_max,
        x_in: a.x_in,
        surge_mass: a.surge_mass.unwrap_or(cfg.vessel.mass),
        initial: PlanarState { y: y0, psi: psi0, u: a.u0, ..Default::default() },
        clearance_floor: a.clearance_floor.unwrap_or(0.05 * cfg.vessel.beam),
        current: cfg.current,
    }
}

fn summary_path(out: &Path, explicit: &Option<PathBuf>) -> PathBuf {
    explicit.clone().unwrap_or_else(|| out.with_extension("json"))
}

fn simulate(a: &SimulateArgs) -> Result<Trace, Failure> {
    let mut trace = Trace::default();
    let cfg = load_model(&a.sim.model, &mut trace)?;
    let coeffs = load_coeffs(&a.sim.coeffs, &mut trace)?;
    let config = sim_config(&a.sim, &cfg, a.y0, a.psi0);
    let result = sim::run(&config, &coeffs, &cfg.vessel, &cfg.canal)?;

    let mut buf = Vec::new();
    result.write_csv(&mut buf)?;
    write_atomic(&a.out, &buf)?;
    trace.outputs.push(a.out.clone());

    let summary = json!({ "y0": a.y0, "psi0": a.psi0, "samples": result.trajectory.len(), "result": result.outcome });
    let path = summary_path(&a.out, &a.summary);
    write_json(&path, &summary)?;
    trace.outputs.push(path);
    println!("{}", serde_json::to_string(&result.outcome).map_err(|e| Failure::Internal(e.to_string()))?);
    Ok(trace)
}

/// `start:stop:step`, inclusive of `stop` up to rounding.
pub fn parse_range(text: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || user(format!("range must be start:stop:step, got {text:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(start.is_finite() && stop.is_finite() && step.is_finite() && step > 0.0 && stop >= start) {
        return Err(user(format!("range needs finite start <= stop and step > 0, got {text:?}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| start + i as f64 * step).collect())
}

fn sweep(a: &SweepArgs) -> Result<Trace, Failure> {
    let mut trace = Trace::default();
    let y0s = parse_range(&a.y0_range)?;
    let cfg = load_model(&a.sim.model, &mut trace)?;
    let coeffs = load_coeffs(&a.sim.coeffs, &mut trace)?;
    let base = sim_config(&a.sim, &cfg, 0.0, 0.0);
    base.validate()?;
    let points = sim::sweep_grounding(&y0s, &base, &coeffs, &cfg.vessel, &cfg.canal);

    let mut buf = Vec::new();
    sim::write_sweep_csv(&points, &mut buf)?;
    write_atomic(&a.out, &buf)?;
    trace.outputs.push(a.out.clone());

    let flips = sim::side_flips(&points);
    let grounded = points.iter().filter(|p| p.grounding().is_some()).count();
    let failed = points.iter().filter(|p| p.outcome.is_err()).count();
    let summary = json!({ "points": points.len(), "grounded": grounded, "errors": failed, "side_flips_ys0": flips });
    let path = summary_path(&a.out, &a.summary);
    write_json(&path, &summary)?;
    trace.outputs.push(path);

    println!("{grounded}/{} runs grounded", points.len());
    for f in &flips {
        println!("grounding side flips near y_s(0) = {f:.3} m");
    }
    for p in points.iter().filter(|p| p.outcome.is_err()) {
        eprintln!("warning: y0 = {}: {}", p.y0, p.outcome.as_ref().unwrap_err());
    }
    Ok(trace)
}
