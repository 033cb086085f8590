use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ensemble_core::io::{load_schedule, load_system, LoadError, LoadedSystem, ReportFile, SimulationSection, SynthesisSection};
use ensemble_core::synthesis::{simulate, synthesize, SynthesisOptions, DEFAULT_RIDGE, DEFAULT_STEPS_PER_SEGMENT};
use ensemble_core::system::Target;
use ensemble_core::Status;

const EXIT_NOT_CONTROLLABLE: u8 = 1;
const EXIT_INCONCLUSIVE: u8 = 2;
const EXIT_USAGE: u8 = 3;
const EXIT_INPUT: u8 = 4;

/// Uniform ensemble controllability of parameter-dependent linear systems.
#[derive(Parser)]
#[command(name = "ensemble", version)]
#[command(after_help = "Exit codes: 0 controllable / within epsilon, 1 not controllable / outside epsilon, \
2 inconclusive, 3 usage error, 4 input or I/O error.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide uniform ensemble controllability.
    Analyze(AnalyzeArgs),
    /// Compute a piecewise-constant control steering x0 toward xF.
    Synthesize(SynthesizeArgs),
    /// Integrate the ensemble under a given control schedule.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct Common {
    /// System description (JSON).
    spec: PathBuf,
    /// Override the parameter grid size.
    #[arg(long)]
    grid: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    eta_samples: Option<usize>,
    #[arg(long)]
    tol_rank: Option<f64>,
    #[arg(long)]
    tol_mono: Option<f64>,
    #[arg(long)]
    tol_merge: Option<f64>,
    #[arg(long)]
    tol_val: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Skip the refined-grid confirmation run.
    #[arg(long)]
    no_stability: bool,
}

#[derive(Args)]
struct SynthesizeArgs {
    #[command(flatten)]
    common: Common,
    /// Horizon.
    #[arg(long = "T")]
    horizon: f64,
    /// Number of constant segments.
    #[arg(long = "P")]
    segments: usize,
    #[arg(long)]
    epsilon: f64,
    /// Tikhonov weight relative to the largest singular value.
    #[arg(long, default_value_t = DEFAULT_RIDGE)]
    ridge: f64,
    #[arg(long, default_value_t = DEFAULT_STEPS_PER_SEGMENT)]
    steps: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Schedule JSON, or a synthesize report.
    #[arg(long)]
    schedule: PathBuf,
    #[arg(long, default_value_t = DEFAULT_STEPS_PER_SEGMENT)]
    steps: usize,
}

struct Failure(u8, String);

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        Failure(EXIT_INPUT, e.to_string())
    }
}

fn positive(name: &str, x: f64) -> Result<(), Failure> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Failure(EXIT_USAGE, format!("--{name} must be positive and finite")))
    }
}

fn load(common: &Common) -> Result<LoadedSystem, Failure> {
    let mut loaded = load_system(&common.spec)?;
    if let Some(g) = common.grid {
        if g < 2 {
            return Err(Failure(EXIT_USAGE, "--grid must be at least 2".into()));
        }
        loaded.system = loaded.spec.build(g)?;
        loaded.config.grid = g;
    }
    Ok(loaded)
}

fn emit(report: &ReportFile, output: &Option<PathBuf>) -> Result<(), Failure> {
    match output {
        Some(p) => report.write(p).map_err(Failure::from),
        None => {
            println!("{}", report.to_json());
            Ok(())
        }
    }
}

fn analyze(args: AnalyzeArgs) -> Result<u8, Failure> {
    let mut loaded = load(&args.common)?;
    let cfg = &mut loaded.config;
    if let Some(v) = args.eta_samples {
        if v == 0 {
            return Err(Failure(EXIT_USAGE, "--eta-samples must be at least 1".into()));
        }
        cfg.eta_samples = v;
        cfg.eta_per_channel = v;
    }
    for (name, flag, slot) in [
        ("tol-rank", args.tol_rank, &mut cfg.tol_rank),
        ("tol-mono", args.tol_mono, &mut cfg.tol_mono),
        ("tol-val", args.tol_val, &mut cfg.tol_val),
    ] {
        if let Some(v) = flag {
            positive(name, v)?;
            *slot = v;
        }
    }
    if let Some(v) = args.tol_merge {
        positive("tol-merge", v)?;
        cfg.tol_merge = Some(v);
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.no_stability {
        cfg.stability_check = false;
    }
    let verdict = loaded
        .system
        .analyze(&loaded.config)
        .map_err(|e| Failure(EXIT_INPUT, e.to_string()))?;
    let code = match verdict.status {
        Status::Controllable => 0,
        Status::NotControllable => EXIT_NOT_CONTROLLABLE,
        Status::Inconclusive => EXIT_INCONCLUSIVE,
    };
    let reasons: Vec<String> = verdict.reasons().iter().map(|r| format!("{r:?}")).collect();
    eprintln!("{} {}", verdict.status, reasons.join(" "));
    let mut report = ReportFile::new("analyze", &loaded);
    report.verdict = Some(verdict);
    emit(&report, &args.common.output)?;
    Ok(code)
}

fn synthesize_cmd(args: SynthesizeArgs) -> Result<u8, Failure> {
    positive("T", args.horizon)?;
    positive("epsilon", args.epsilon)?;
    if args.segments == 0 || args.steps == 0 {
        return Err(Failure(EXIT_USAGE, "--P and --steps must be at least 1".into()));
    }
    if !(args.ridge >= 0.0 && args.ridge.is_finite()) {
        return Err(Failure(EXIT_USAGE, "--ridge must be non-negative".into()));
    }
    let loaded = load(&args.common)?;
    if loaded.spec.x0.is_none() || loaded.spec.xf.is_none() {
        return Err(Failure(EXIT_INPUT, "synthesize needs both x0 and xF in the system file".into()));
    }
    let sys = &loaded.system;
    let x0 = sys.target(Target::Initial).map_err(|e| Failure(EXIT_INPUT, e.to_string()))?;
    let xf = sys.target(Target::Final).map_err(|e| Failure(EXIT_INPUT, e.to_string()))?;
    let opts = SynthesisOptions {
        horizon: args.horizon,
        segments: args.segments,
        ridge: args.ridge,
        steps_per_segment: args.steps,
        epsilon: Some(args.epsilon),
    };
    let (schedule, report) = synthesize(sys, &x0, &xf, &opts).map_err(|e| Failure(EXIT_INPUT, e.to_string()))?;
    eprintln!(
        "simulated error {:.3e} (predicted {:.3e}, epsilon {:.3e})",
        report.simulated_error, report.predicted_error, args.epsilon
    );
    let code = if report.converged { 0 } else { EXIT_NOT_CONTROLLABLE };
    let mut out = ReportFile::new("synthesize", &loaded);
    out.synthesis = Some(SynthesisSection { schedule, report });
    emit(&out, &args.common.output)?;
    Ok(code)
}

fn simulate_cmd(args: SimulateArgs) -> Result<u8, Failure> {
    if args.steps == 0 {
        return Err(Failure(EXIT_USAGE, "--steps must be at least 1".into()));
    }
    let loaded = load(&args.common)?;
    let schedule = load_schedule(&args.schedule)?;
    let sys = &loaded.system;
    let x0 = sys.target(Target::Initial).map_err(|e| Failure(EXIT_INPUT, e.to_string()))?;
    let xt = simulate(sys, &x0, &schedule, args.steps).map_err(|e| Failure(EXIT_INPUT, e.to_string()))?;
    let target_error = match loaded.spec.xf {
        Some(_) => {
            let xf = sys.target(Target::Final).map_err(|e| Failure(EXIT_INPUT, e.to_string()))?;
            Some(xt.values().iter().zip(xf.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
        }
        None => None,
    };
    let mut out = ReportFile::new("simulate", &loaded);
    out.simulation = Some(SimulationSection {
        horizon: schedule.horizon,
        steps_per_segment: args.steps,
        grid: xt.grid(),
        final_state: (0..xt.n_grid()).map(|j| xt.at(j).to_vec()).collect(),
        target_error,
    });
    emit(&out, &args.common.output)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Synthesize(a) => synthesize_cmd(a),
        Command::Simulate(a) => simulate_cmd(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
