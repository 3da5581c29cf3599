//! `mgddf`: run joint-limit experiments from presets or config files.
//!
//! Exit status: 0 success, 1 config error, 2 solver failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mgddf_core::config::{parse_config, presets, serialize_config};
use mgddf_core::simulation::{RunFailure, SimLog};
use mgddf_core::{run, BoundMode, SimConfig, ViolationReport};
use rayon::prelude::*;

const CONFIG_ERROR: u8 = 1;
const SOLVER_FAILURE: u8 = 2;

const DEFAULT_GRID: [(f64, f64); 5] = [(2.0, 2.0), (2.0, 3.0), (2.0, 4.0), (3.0, 1.0), (4.0, 1.0)];

#[derive(Parser)]
#[command(name = "mgddf", version, about = "Dual-arm redundancy resolution under time-varying joint limits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write its log and limit summary.
    Run(RunArgs),
    /// Run GDDF and MGDDF over a grid of (rho, N) pairs.
    Sweep(SweepArgs),
    /// List the built-in presets, or print one as a config file.
    Presets {
        /// Preset to print in config-file form.
        name: Option<String>,
    },
    /// Parse and check a config without running it.
    Validate(Source),
}

#[derive(Args)]
struct Source {
    /// Config file; keys override the preset named inside it.
    #[arg(long, short, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset (default paper-v-a).
    #[arg(long, short)]
    preset: Option<String>,
}

#[derive(Args)]
struct Output {
    /// Output directory.
    #[arg(long, short, env = "MGDDF_OUT", default_value = "mgddf-out")]
    out: PathBuf,
    /// Add the solver residual history column to the CSV.
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    output: Output,
    /// Override the bound mode.
    #[arg(long, short)]
    mode: Option<Mode>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    output: Output,
    /// Grid points as `rho,N` pairs separated by `;` (default: 2,2;2,3;2,4;3,1;4,1).
    #[arg(long, short, value_parser = parse_grid_point, value_delimiter = ';', num_args = 1..)]
    grid: Option<Vec<(f64, f64)>>,
    /// Concurrent runs (default: one per core).
    #[arg(long, short)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Gddf,
    Mgddf,
}

impl From<Mode> for BoundMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Gddf => BoundMode::Gddf,
            Mode::Mgddf => BoundMode::Mgddf,
        }
    }
}

fn parse_grid_point(text: &str) -> Result<(f64, f64), String> {
    let (rho, n) = text.split_once(',').ok_or_else(|| format!("grid point `{text}` is not `rho,N`"))?;
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("grid point `{text}`: {e}"));
    Ok((num(rho)?, num(n)?))
}

/// Failure carried to `main`: a message and the exit status.
struct Fail(u8, String);

fn config_error(e: impl std::fmt::Display) -> Fail {
    Fail(CONFIG_ERROR, e.to_string())
}

fn load(source: &Source) -> Result<SimConfig, Fail> {
    match (&source.config, &source.preset) {
        (Some(path), _) => parse_config(path).map_err(|e| config_error(format!("{}: {e}", path.display()))),
        (None, Some(name)) => presets::by_name(name).map_err(config_error),
        (None, None) => presets::by_name("paper-v-a").map_err(config_error),
    }
}

fn source_label(source: &Source) -> String {
    match (&source.config, &source.preset) {
        (Some(path), _) => path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned()),
        (None, Some(name)) => name.clone(),
        (None, None) => "paper-v-a".into(),
    }
}

fn prepare_dir(dir: &Path) -> Result<(), Fail> {
    fs::create_dir_all(dir).map_err(|e| config_error(format!("output directory {}: {e}", dir.display())))
}

fn write_log(path: &Path, log: &SimLog, verbose: bool) -> Result<(), String> {
    let file = fs::File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
    log.write_csv(std::io::BufWriter::new(file), verbose).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_run(args: &RunArgs) -> Result<(), Fail> {
    let mut config = load(&args.source)?;
    if let Some(mode) = args.mode {
        config.mode = mode.into();
    }
    config.validate().map_err(config_error)?;
    prepare_dir(&args.output.out)?;

    let stem = format!("{}_{}", source_label(&args.source), mode_name(config.mode));
    let csv = args.output.out.join(format!("{stem}.csv"));
    let txt = args.output.out.join(format!("{stem}_limits.txt"));
    let (log, report, failure) = match run(&config) {
        Ok((log, report)) => (log, report, None),
        Err(f) => {
            let RunFailure { error, log, report } = *f;
            (log, report, Some(error))
        }
    };
    write_log(&csv, &log, args.output.verbose).map_err(config_error)?;
    fs::write(&txt, report.summary()).map_err(|e| config_error(format!("{}: {e}", txt.display())))?;

    print!("{}", report.summary());
    println!("wrote {} ({} ticks) and {}", csv.display(), log.len(), txt.display());
    match failure {
        Some(e) => Err(Fail(SOLVER_FAILURE, e.to_string())),
        None => Ok(()),
    }
}

fn mode_name(mode: BoundMode) -> &'static str {
    match mode {
        BoundMode::Gddf => "gddf",
        BoundMode::Mgddf => "mgddf",
    }
}

struct SweepRun {
    rho: f64,
    n: f64,
    mode: BoundMode,
    report: ViolationReport,
    error: Option<String>,
}

fn sweep_one(base: &SimConfig, rho: f64, n: f64, mode: BoundMode, output: &Output) -> SweepRun {
    let attempt = || -> Result<ViolationReport, (ViolationReport, String)> {
        let mut config = base.clone();
        config.mode = mode;
        config.schedule = config.schedule.with_timing(rho, n).map_err(|e| (ViolationReport::default(), e.to_string()))?;
        let path = output.out.join(format!("rho{rho}_n{n}_{}.csv", mode_name(mode)));
        match run(&config) {
            Ok((log, report)) => match write_log(&path, &log, output.verbose) {
                Ok(()) => Ok(report),
                Err(e) => Err((report, e)),
            },
            Err(f) => {
                let msg = match write_log(&path, &f.log, output.verbose) {
                    Ok(()) => f.error.to_string(),
                    Err(e) => format!("{}; {e}", f.error),
                };
                Err((f.report, msg))
            }
        }
    };
    match attempt() {
        Ok(report) => SweepRun { rho, n, mode, report, error: None },
        Err((report, e)) => SweepRun { rho, n, mode, report, error: Some(e) },
    }
}

fn comparison_table(runs: &[SweepRun]) -> String {
    let mut s = String::from("rho  N  mode   joint  margin_overshoot  scheduled_overshoot  hard_overshoot  status\n");
    for r in runs {
        if let Some(e) = &r.error {
            let _ = writeln!(s, "{} {} {:<6} run failed: {e}", r.rho, r.n, mode_name(r.mode));
        }
        for (i, j) in r.report.joints.iter().enumerate() {
            let status = if r.report.hard_violations().contains(&(i + 1)) { "LIMIT EXCEEDED" } else { "within limits" };
            let _ = writeln!(
                s,
                "{} {} {:<6} {:>5}  {:>16.3e}  {:>19.3e}  {:>14.3e}  {status}",
                r.rho,
                r.n,
                mode_name(r.mode),
                i + 1,
                j.max_margin_overshoot,
                j.max_scheduled_overshoot,
                j.max_hard_overshoot,
            );
        }
    }
    s
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Fail> {
    let base = load(&args.source)?;
    base.validate().map_err(config_error)?;
    let grid = args.grid.clone().unwrap_or_else(|| DEFAULT_GRID.to_vec());
    if grid.is_empty() {
        return Err(config_error("sweep grid is empty"));
    }
    prepare_dir(&args.output.out)?;

    let jobs: Vec<(f64, f64, BoundMode)> =
        grid.iter().flat_map(|&(rho, n)| [(rho, n, BoundMode::Gddf), (rho, n, BoundMode::Mgddf)]).collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(config_error)?;
    let runs: Vec<SweepRun> =
        pool.install(|| jobs.par_iter().map(|&(rho, n, mode)| sweep_one(&base, rho, n, mode, &args.output)).collect());

    let table = comparison_table(&runs);
    let path = args.output.out.join("comparison.txt");
    fs::write(&path, &table).map_err(|e| config_error(format!("{}: {e}", path.display())))?;

    let mut failed = 0;
    for r in &runs {
        let status = match &r.error {
            Some(e) => {
                failed += 1;
                format!("FAILED: {e}")
            }
            None => format!("hard limits exceeded on {:?}, margin left on {:?}", r.report.hard_violations(), r.report.margin_violations()),
        };
        println!("rho {} N {} {}: {status}", r.rho, r.n, mode_name(r.mode));
    }
    println!("wrote {} runs and {}", runs.len(), path.display());
    if failed > 0 {
        return Err(Fail(SOLVER_FAILURE, format!("{failed} of {} runs failed", runs.len())));
    }
    Ok(())
}

fn cmd_presets(name: Option<&str>) -> Result<(), Fail> {
    match name {
        Some(name) => print!("{}", serialize_config(&presets::by_name(name).map_err(config_error)?)),
        None => {
            for name in presets::NAMES {
                println!("{name:<12} {}", presets::describe(name));
            }
        }
    }
    Ok(())
}

fn cmd_validate(source: &Source) -> Result<(), Fail> {
    let config = load(source)?;
    config.validate().map_err(config_error)?;
    println!(
        "ok: {} task, {} scheme, {} bounds, {} solver, {} s at dt {} ({} steps)",
        config.task.name(),
        config.scheme.name(),
        mode_name(config.mode),
        config.solver.name(),
        config.duration,
        config.dt,
        config.steps()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(CONFIG_ERROR) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Presets { name } => cmd_presets(name.as_deref()),
        Command::Validate(source) => cmd_validate(source),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
