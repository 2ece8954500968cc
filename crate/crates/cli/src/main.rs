use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde_json::json;

use tomo_unfold_core::benchmark::{
    cleanup_profile, model_order_selection, run_benchmark, simulate_trial, trial_rng, RunManifest, TrialConfig,
};
use tomo_unfold_core::coherence::{mutual_coherence, optimize_weights, AnalyticWeights};
use tomo_unfold_core::config::{Model, RunConfig};
use tomo_unfold_core::io;
use tomo_unfold_core::linalg::{matrix_digest, CMatrix};
use tomo_unfold_core::solver::{EngineKind, Hyperparameters, InversionEngine};
use tomo_unfold_core::tuning::grid_search;
use tomo_unfold_core::{Error, Result};

const EXIT_USAGE: u8 = 1;
const EXIT_NONCONVERGENCE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "tomo-unfold", version, about = "Unfolded sparse inversion for SAR tomography")]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; overrides the configuration file.
    #[arg(long, global = true, env = "TOMO_UNFOLD_THREADS")]
    threads: Option<usize>,

    /// Repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute analytic weights for the configured dictionary.
    Weights(OutArgs),
    /// Report μ(W,R) and μ(R,R).
    Coherence(WeightsArg),
    /// Grid-search c1, c2, c3 on synthetic scenes.
    Tune {
        #[command(flatten)]
        weights: WeightsArg,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long)]
        engine: Option<EngineArg>,
        /// Number of training scenes.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Invert one measurement vector.
    Invert {
        /// Measurement as a CMX1 container or a `re,im` CSV.
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        weights: WeightsArg,
        #[command(flatten)]
        hp: HpArg,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long)]
        engine: Option<EngineArg>,
    },
    /// Write synthetic scenes and their measurements.
    Simulate {
        #[command(flatten)]
        out: OutArgs,
        #[arg(long)]
        trials: Option<usize>,
        /// Second-scatterer offset in Rayleigh cells.
        #[arg(long)]
        distance: Option<f64>,
    },
    /// Monte Carlo detection-rate curve.
    Benchmark {
        #[command(flatten)]
        weights: WeightsArg,
        #[command(flatten)]
        hp: HpArg,
        #[command(flatten)]
        out: OutArgs,
        #[arg(long)]
        engine: Option<EngineArg>,
        #[arg(long)]
        trials: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct OutArgs {
    /// Output directory; defaults to `output.dir` from the configuration.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct WeightsArg {
    /// Precomputed weights; recomputed from the dictionary when omitted.
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HpArg {
    /// JSON with c1, c2, c3 (bare or as written by `tune`).
    #[arg(long)]
    hyperparameters: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EngineArg {
    Baseline,
    Abt,
}

impl From<EngineArg> for EngineKind {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Baseline => EngineKind::Baseline,
            EngineArg::Abt => EngineKind::Abt,
        }
    }
}

enum Failure {
    Core(Error),
    NotConverged(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_) | Error::DimensionMismatch(_) => EXIT_USAGE,
        Error::Numerical(_) | Error::NonConvergence(_) => EXIT_NONCONVERGENCE,
        Error::Io { .. } | Error::Format { .. } => EXIT_IO,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::NotConverged(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_NONCONVERGENCE)
        }
    }
}

struct Session {
    cfg: RunConfig,
    config_path: Option<PathBuf>,
    model: Model,
    started: Instant,
}

impl Session {
    fn out_dir(&self, out: &OutArgs) -> Result<PathBuf> {
        let dir = out.out_dir.clone().unwrap_or_else(|| self.cfg.output.dir.clone());
        std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
        Ok(dir)
    }

    fn weights(&self, arg: &WeightsArg) -> Result<CMatrix> {
        let r = &self.model.dictionary.entries;
        let Some(path) = &arg.weights else {
            info!("computing analytic weights for {}x{} dictionary", r.nrows(), r.ncols());
            let w = optimize_weights(&self.model.dictionary, &self.cfg.weights)?;
            if !w.converged {
                warn!("weight optimization stopped after {} iterations without converging", w.iterations);
            }
            return Ok(w.entries);
        };
        let w = io::read_matrix(path)?;
        if w.shape() != r.shape() {
            return Err(Error::DimensionMismatch(format!(
                "weights {} are {:?}, dictionary is {:?}",
                path.display(),
                w.shape(),
                r.shape()
            )));
        }
        let sidecar = path.with_extension("json");
        if sidecar.exists() {
            let meta: AnalyticWeights = io::read_json(&sidecar)?;
            let digest = matrix_digest(r);
            if meta.source_matrix_digest != digest {
                return Err(Error::InvalidInput(format!(
                    "{} was computed for a different dictionary",
                    path.display()
                )));
            }
        }
        Ok(w)
    }

    fn hyperparameters(&self, arg: &HpArg) -> Result<Hyperparameters> {
        let Some(path) = &arg.hyperparameters else {
            return Ok(self.cfg.hyperparameters.clone());
        };
        let mut value: serde_json::Value = io::read_json(path)?;
        if let Some(inner) = value.get_mut("hyperparameters") {
            value = inner.take();
        }
        let hp: Hyperparameters = serde_json::from_value(value)
            .map_err(|e| Error::Format { path: path.clone(), message: e.to_string() })?;
        hp.validate()?;
        Ok(hp)
    }

    fn engine(&self, w: &CMatrix, kind: Option<EngineArg>) -> Result<InversionEngine> {
        let mut cfg = self.cfg.engine;
        if let Some(k) = kind {
            cfg.engine = k.into();
        }
        InversionEngine::new(&self.model.dictionary, w, self.model.rho_s, cfg)
    }

    fn manifest(&self, command: &str, w: Option<&CMatrix>, inputs: &[Option<&Path>]) -> Result<RunManifest> {
        let mut input_digests = BTreeMap::new();
        if let Some(p) = &self.config_path {
            input_digests.insert(p.display().to_string(), io::file_digest(p)?);
        }
        if let Some(p) = &self.cfg.geometry.csv {
            input_digests.insert(p.display().to_string(), io::file_digest(p)?);
        }
        for p in inputs.iter().flatten() {
            input_digests.insert(p.display().to_string(), io::file_digest(p)?);
        }
        let config = serde_json::to_value(&self.cfg).map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed: self.cfg.seed,
            config,
            input_digests,
            dictionary_digest: matrix_digest(&self.model.dictionary.entries),
            weights_digest: w.map(matrix_digest).unwrap_or_default(),
            elapsed_seconds: self.started.elapsed().as_secs_f64(),
        })
    }
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    let started = Instant::now();
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    match &cli.command {
        Command::Benchmark { trials: Some(t), .. } => cfg.benchmark.trials = *t,
        Command::Tune { samples: Some(s), .. } => cfg.tuning.samples = *s,
        Command::Simulate { trials: Some(t), .. } => cfg.benchmark.trials = *t,
        _ => {}
    }
    if let Command::Simulate { distance: Some(d), .. } = &cli.command {
        cfg.benchmark.distances = vec![*d];
    }
    cfg.validate()?;
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            warn!("thread pool already initialized: {e}");
        }
    }
    let model = cfg.build_model()?;
    info!(
        "dictionary {}x{}, Rayleigh resolution {:.3} m",
        model.dictionary.rows(),
        model.dictionary.cols(),
        model.rho_s
    );
    let session = Session {
        cfg,
        config_path: cli.config.clone(),
        model,
        started,
    };

    match &cli.command {
        Command::Weights(out) => cmd_weights(&session, out),
        Command::Coherence(w) => cmd_coherence(&session, w),
        Command::Tune {
            weights,
            out,
            engine,
            ..
        } => cmd_tune(&session, weights, out, *engine),
        Command::Invert {
            input,
            weights,
            hp,
            out,
            engine,
        } => cmd_invert(&session, input, weights, hp, out, *engine),
        Command::Simulate { out, .. } => cmd_simulate(&session, out),
        Command::Benchmark {
            weights,
            hp,
            out,
            engine,
            ..
        } => cmd_benchmark(&session, weights, hp, out, *engine),
    }
}

fn cmd_weights(s: &Session, out: &OutArgs) -> std::result::Result<(), Failure> {
    let dir = s.out_dir(out)?;
    let w = optimize_weights(&s.model.dictionary, &s.cfg.weights)?;
    let r = &s.model.dictionary.entries;
    let path = dir.join("weights.cmx");
    io::write_matrix(&path, &w.entries)?;
    io::write_json(&dir.join("weights.json"), &w)?;
    println!("mu_wr {:.6}", mutual_coherence(&w.entries, r)?);
    println!("mu_rr {:.6}", mutual_coherence(r, r)?);
    println!("iterations {}", w.iterations);
    if !w.converged {
        return Err(Failure::NotConverged(format!(
            "weight optimization did not converge in {} iterations; best iterate written to {}",
            w.iterations,
            path.display()
        )));
    }
    Ok(())
}

fn cmd_coherence(s: &Session, arg: &WeightsArg) -> std::result::Result<(), Failure> {
    let r = &s.model.dictionary.entries;
    let w = s.weights(arg)?;
    println!("mu_wr {:.6}", mutual_coherence(&w, r)?);
    println!("mu_rr {:.6}", mutual_coherence(r, r)?);
    Ok(())
}

fn cmd_tune(s: &Session, arg: &WeightsArg, out: &OutArgs, kind: Option<EngineArg>) -> std::result::Result<(), Failure> {
    let dir = s.out_dir(out)?;
    let w = s.weights(arg)?;
    let engine = s.engine(&w, kind)?;
    let tcfg = s.cfg.tuning.to_config(s.cfg.seed, &s.cfg.hyperparameters);
    let result = grid_search(&engine, &s.model.context()?, &tcfg)?;
    io::write_json(&dir.join("hyperparameters.json"), &result)?;
    io::write_json(&dir.join("tune_manifest.json"), &s.manifest("tune", Some(&w), &[arg.weights.as_deref()])?)?;
    let hp = &result.hyperparameters;
    println!("c1 {} c2 {} c3 {} nmse {}", hp.c1, hp.c2, hp.c3, result.nmse);
    Ok(())
}

fn cmd_invert(
    s: &Session,
    input: &Path,
    arg: &WeightsArg,
    hp_arg: &HpArg,
    out: &OutArgs,
    kind: Option<EngineArg>,
) -> std::result::Result<(), Failure> {
    let g = io::read_vector(input)?;
    let n = s.model.dictionary.rows();
    if g.len() != n {
        return Err(Error::DimensionMismatch(format!("measurement has {} samples, geometry has {n}", g.len())).into());
    }
    let dir = s.out_dir(out)?;
    let hp = s.hyperparameters(hp_arg)?;
    let w = s.weights(arg)?;
    let engine = s.engine(&w, kind)?;
    let mut rng = trial_rng(s.cfg.seed, 0);
    let gamma = engine.run(&g, &hp, Some(&mut rng))?;
    io::write_vector(&dir.join("gamma.cmx"), &gamma.entries)?;
    let post = &s.cfg.postprocess;
    let cleaned = cleanup_profile(&gamma, post.kappa)?;
    let detected = model_order_selection(&cleaned, &s.model.dictionary.grid, post.k_max, post.min_separation)?;
    io::write_json(&dir.join("detections.json"), &detected)?;
    let inputs = [Some(input), arg.weights.as_deref(), hp_arg.hyperparameters.as_deref()];
    io::write_json(&dir.join("invert_manifest.json"), &s.manifest("invert", Some(&w), &inputs)?)?;
    for d in &detected {
        println!("elevation {:.3} amplitude {:.4} motion {:?}", d.elevation, d.amplitude, d.motion_coeffs);
    }
    Ok(())
}

fn cmd_simulate(s: &Session, out: &OutArgs) -> std::result::Result<(), Failure> {
    let dir = s.out_dir(out)?;
    let ctx = s.model.context()?;
    let tcfg: TrialConfig = s.cfg.benchmark.template(s.cfg.seed);
    let (n, l) = (s.model.dictionary.rows(), s.model.dictionary.cols());
    let mut truths = CMatrix::zeros(l, tcfg.trials);
    let mut measurements = CMatrix::zeros(n, tcfg.trials);
    let mut scenes = Vec::with_capacity(tcfg.trials);
    for i in 0..tcfg.trials {
        let trial = simulate_trial(&tcfg, &ctx, &mut trial_rng(tcfg.seed, i))?;
        truths.set_column(i, &trial.truth.entries);
        measurements.set_column(i, &trial.measurement.entries);
        scenes.push(json!({
            "trial": i,
            "scatterers": trial.scatterers,
            "snr_db": trial.measurement.snr_db,
        }));
    }
    io::write_matrix(&dir.join("truth.cmx"), &truths)?;
    io::write_matrix(&dir.join("measurements.cmx"), &measurements)?;
    io::write_json(&dir.join("scenes.json"), &scenes)?;
    io::write_json(&dir.join("simulate_manifest.json"), &s.manifest("simulate", None, &[])?)?;
    println!("{} scenes written to {}", tcfg.trials, dir.display());
    Ok(())
}

fn cmd_benchmark(
    s: &Session,
    arg: &WeightsArg,
    hp_arg: &HpArg,
    out: &OutArgs,
    kind: Option<EngineArg>,
) -> std::result::Result<(), Failure> {
    let dir = s.out_dir(out)?;
    let hp = s.hyperparameters(hp_arg)?;
    let w = s.weights(arg)?;
    let engine = s.engine(&w, kind)?;
    let sweep = s.cfg.benchmark.sweep(s.cfg.seed);
    let curve = run_benchmark(&sweep, &s.model.context()?, &engine, &hp, &s.cfg.postprocess)?;
    io::write_curve_csv(&dir.join("curve.csv"), &curve)?;
    io::write_json(&dir.join("manifest.json"), &s.manifest("benchmark", Some(&w), &[arg.weights.as_deref(), hp_arg.hyperparameters.as_deref()])?)?;
    print!("{}", io::curve_csv_string(&curve));
    Ok(())
}
