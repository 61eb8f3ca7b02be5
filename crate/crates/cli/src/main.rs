use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use uavcollect::channel::CoverageRadii;
use uavcollect::experiment::{self, SweepAxis, SweepSpec};
use uavcollect::mission::{self, EvalReport};
use uavcollect::model::{self, ChannelParams, ScenarioConfig};
use uavcollect::planner::Algorithm;
use uavcollect::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(name = "uavcollect", version, about = "Multi-UAV data collection planner with a relay chain to the base station")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random scenario and write it as JSON.
    Generate(GenerateArgs),
    /// Cluster, plan, validate and evaluate one scenario.
    Plan(PlanArgs),
    /// Run every planner over a grid of parameter values and seeds.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    sensors: usize,
    /// Side of the square region in meters.
    #[arg(long)]
    size: f64,
    #[arg(long)]
    seed: u64,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
    /// JSON object overriding channel parameters.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long, value_enum)]
    algo: AlgoArg,
    scenario: PathBuf,
    /// Output prefix; defaults to the scenario path without its extension.
    #[arg(short = 'o', long = "output")]
    output: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    /// Number of seeds per value (seeds 0..n).
    #[arg(long)]
    seeds: u64,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
    #[arg(long, default_value_t = 1000)]
    sensors: usize,
    #[arg(long, default_value_t = 8000.0)]
    size: f64,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Pmtp,
    Ttp,
    Cstp,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Pmtp => Algorithm::Pmtp,
            AlgoArg::Ttp => Algorithm::Ttp,
            AlgoArg::Cstp => Algorithm::Cstp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Sensors,
    SnrG2uDb,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Sensors => SweepAxis::Sensors,
            AxisArg::SnrG2uDb => SweepAxis::SnrG2uDb,
        }
    }
}

/// A failed command and the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_infeasible() { EXIT_INFEASIBLE } else { EXIT_USAGE };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: format!("cannot write CSV: {e}"),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => generate(args),
        Command::Plan(args) => plan(args),
        Command::Sweep(args) => sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_params(base: &ChannelParams, config: Option<&Path>) -> Result<ChannelParams, Failure> {
    match config {
        None => Ok(*base),
        Some(path) => {
            let text = fs::read_to_string(path)?;
            Ok(model::apply_param_overrides(base, &text, &path.display().to_string())?)
        }
    }
}

fn generate(args: GenerateArgs) -> Result<(), Failure> {
    let cfg = ScenarioConfig {
        width_m: args.size,
        height_m: args.size,
        n_sensors: args.sensors,
        params: load_params(&ChannelParams::default(), args.config.as_deref())?,
        ..ScenarioConfig::default()
    };
    let scenario = cfg.generate(args.seed)?;
    model::save_scenario(&scenario, &args.output)?;
    info!("wrote {} sensors to {}", scenario.sensors.len(), args.output.display());
    Ok(())
}

#[derive(Serialize)]
struct PlanReport<'a> {
    algo: Algorithm,
    scenario_seed: u64,
    sensors: usize,
    clusters: usize,
    uavs: usize,
    radii: &'a CoverageRadii,
    #[serde(flatten)]
    report: &'a EvalReport,
}

#[derive(Serialize)]
struct CpRow {
    cp: usize,
    x_m: f64,
    y_m: f64,
    uav: usize,
    members: usize,
    min_hover_s: f64,
}

#[derive(Serialize)]
struct MemberRow {
    sensor: usize,
    cp: usize,
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn plan(args: PlanArgs) -> Result<(), Failure> {
    let algo = Algorithm::from(args.algo);
    let mut scenario = model::load_scenario(&args.scenario).map_err(|e| Failure {
        code: EXIT_USAGE,
        message: e.to_string(),
    })?;
    scenario.params = load_params(&scenario.params, args.config.as_deref())?;
    let prepared = experiment::prepare(scenario)?;
    let (plan, report) = prepared.run(algo)?;

    let prefix = args.output.unwrap_or_else(|| args.scenario.with_extension(""));
    let prefix = with_suffix(&prefix, &format!(".{algo}"));
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_rows(&with_suffix(&prefix, ".plan.csv"), mission::plan_rows(&plan))?;
    write_rows(
        &with_suffix(&prefix, ".cps.csv"),
        prepared.clusters.clusters.iter().enumerate().map(|(k, c)| CpRow {
            cp: k,
            x_m: c.cp.x,
            y_m: c.cp.y,
            uav: prepared.topology.association[k] + 1,
            members: c.members.len(),
            min_hover_s: c.min_hover_s,
        }),
    )?;
    write_rows(
        &with_suffix(&prefix, ".clusters.csv"),
        prepared
            .clusters
            .assignment_rows()
            .into_iter()
            .map(|(sensor, cp)| MemberRow { sensor, cp }),
    )?;
    let doc = PlanReport {
        algo,
        scenario_seed: prepared.scenario.rng_seed,
        sensors: prepared.scenario.sensors.len(),
        clusters: prepared.clusters.k(),
        uavs: prepared.topology.m_uavs,
        radii: &prepared.radii,
        report: &report,
    };
    let json = serde_json::to_string_pretty(&doc).expect("report serializes");
    fs::write(with_suffix(&prefix, ".report.json"), json)?;

    let passed = report.checks.iter().filter(|c| c.passed).count();
    println!(
        "{algo}: completion {:.1} s, lower bound {:.1} s (gap {:.2}%), {} CPs, {} UAVs, {passed}/{} checks passed",
        report.completion_s,
        report.lower_bound_s,
        100.0 * report.gap,
        prepared.clusters.k(),
        prepared.topology.m_uavs,
        report.checks.len()
    );
    if !report.all_passed() {
        for c in report.failed_checks() {
            warn!("{} failed: {}", c.name, c.detail);
        }
        let names: Vec<_> = report.failed_checks().iter().map(|c| c.name.clone()).collect();
        return Err(Failure {
            code: EXIT_VALIDATION,
            message: format!("plan fails validation: {}", names.join(", ")),
        });
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    if args.seeds == 0 {
        return Err(Error::InvalidArgument("--seeds must be at least 1".into()).into());
    }
    let base = ScenarioConfig {
        width_m: args.size,
        height_m: args.size,
        n_sensors: args.sensors,
        params: load_params(&ChannelParams::default(), args.config.as_deref())?,
        ..ScenarioConfig::default()
    };
    let spec = SweepSpec {
        axis: args.axis.into(),
        values: args.values,
        seeds: (0..args.seeds).collect(),
        base,
        algorithms: Algorithm::ALL.to_vec(),
    };
    let rows = experiment::run_sweep(&spec, experiment::workers_from_env()).map_err(|e| match e {
        Error::Validation(message) => Failure {
            code: EXIT_VALIDATION,
            message,
        },
        e => e.into(),
    })?;
    write_rows(&args.output, &rows)?;
    for algo in Algorithm::ALL {
        let means: Vec<String> = experiment::mean_completion(&rows, algo)
            .iter()
            .map(|(v, t)| format!("{v}:{t:.1}"))
            .collect();
        println!("{algo} mean completion_s {}", means.join(" "));
    }
    Ok(())
}
