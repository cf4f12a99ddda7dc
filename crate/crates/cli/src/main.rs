use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use synchro::generator::{grid, preset, random_connected, GeneratorError, PRESET_NAMES};
use synchro::io::{self, IoError};
use synchro::metrics::{render_table, MetricsReport};
use synchro::pipeline::{default_mode, plan};
use synchro::simulator::{run, EmissionPolicy, Engine, Failure, SimConfig, SimError, Strategy};
use synchro::{Instance, Schedule, ScheduleError, ScheduleMode};
use thiserror::Error;

/// Environment variable that redirects relative output paths.
const OUT_DIR_ENV: &str = "SYNCHRO_OUT_DIR";

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: IoError },
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Simulation(#[from] SimError),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::File { .. } => "file",
            CliError::Generator(_) => "generator",
            CliError::Schedule(_) => "schedule",
            CliError::Simulation(_) => "simulation",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    fn file(path: &Path, source: impl Into<IoError>) -> Self {
        CliError::File {
            path: path.to_path_buf(),
            source: source.into(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "synchro",
    version,
    about = "Synchronized rendezvous schedules and robustness experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an instance file from a grid, a random layout or a preset.
    Generate(GenerateArgs),
    /// Reduce the communication graph and compute a schedule.
    Schedule(ScheduleArgs),
    /// Simulate a schedule, writing one JSONL trace per seed.
    Simulate(SimulateArgs),
    /// Aggregate a directory of traces into a metrics table and summary.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Grid of unit circles, given as ROWSxCOLS.
    #[arg(long, value_name = "RxC", group = "source")]
    grid: Option<String>,
    /// Random connected layout with N circles.
    #[arg(long, value_name = "N", group = "source")]
    random: Option<usize>,
    /// Named preset.
    #[arg(long, group = "source")]
    preset: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Center spacing for grids.
    #[arg(long, default_value_t = 2.4)]
    spacing: f64,
    /// Communication range.
    #[arg(long, default_value_t = 0.5)]
    range: f64,
    /// System period stored with the instance.
    #[arg(long)]
    period: Option<f64>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Same,
    Opposite,
    General,
}

impl From<ModeArg> for ScheduleMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Same => ScheduleMode::SameDirection,
            ModeArg::Opposite => ScheduleMode::OppositeDirections,
            ModeArg::General => ScheduleMode::General,
        }
    }
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Defaults to opposite directions for circles, general otherwise.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Overrides the period stored in the instance.
    #[arg(long)]
    period: Option<f64>,
    #[arg(short, long)]
    out: PathBuf,
    /// Also write the preprocessing report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EmissionArg {
    RandomPhase,
    PeriodStart,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    schedule: PathBuf,
    #[arg(long)]
    horizon: f64,
    /// alw, rand:P, dfs:N or dfs:topleft.
    #[arg(long, default_value = "alw")]
    strategy: String,
    /// Number of randomly chosen agents to fail.
    #[arg(long, default_value_t = 0)]
    fail: usize,
    /// Seed for choosing failing agents; defaults to each run's seed.
    #[arg(long)]
    fail_seed: Option<u64>,
    /// Fail the instance's annotated white agents.
    #[arg(long)]
    fail_white: bool,
    /// Explicit failures as AGENT@TIME, comma separated.
    #[arg(long, value_delimiter = ',')]
    failures: Vec<String>,
    /// Failure time for --fail and --fail-white; defaults to one period.
    #[arg(long)]
    fail_at: Option<f64>,
    /// Number of runs, seeded consecutively from --first-seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    #[arg(long, value_enum, default_value_t = EmissionArg::RandomPhase)]
    emission: EmissionArg,
    /// Fixed time step; the event-driven engine is used when absent.
    #[arg(long)]
    dt: Option<f64>,
    /// Meeting tolerance in seconds.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Output directory; defaults to $SYNCHRO_OUT_DIR or the current directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding `.jsonl` traces.
    dir: PathBuf,
    /// Row label in the table.
    #[arg(long)]
    label: Option<String>,
    /// Summary file; defaults to `summary.json` inside the trace directory.
    #[arg(long)]
    json: Option<PathBuf>,
}

/// Record of one `simulate` invocation, written next to its traces.
#[derive(Serialize)]
struct ExperimentSpec {
    instance: PathBuf,
    schedule: PathBuf,
    runs: Vec<SimConfig>,
    traces: Vec<PathBuf>,
}

fn output_path(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::file(parent, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::file(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = io::to_json(value).map_err(|e| CliError::file(path, e))?;
    write_text(path, &text)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::file(path, e))?;
    io::from_json(&text).map_err(|e| CliError::file(path, e))
}

fn parse_grid(spec: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("--grid expects ROWSxCOLS, got {spec:?}"));
    let (r, c) = spec.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((
        r.trim().parse().map_err(|_| bad())?,
        c.trim().parse().map_err(|_| bad())?,
    ))
}

fn cmd_generate(args: GenerateArgs) -> Result<(), CliError> {
    let mut inst = match (&args.grid, args.random, &args.preset) {
        (Some(g), None, None) => {
            let (rows, cols) = parse_grid(g)?;
            grid(rows, cols, args.spacing, args.range)?
        }
        (None, Some(n), None) => random_connected(n, args.range, args.seed)?,
        (None, None, Some(name)) => preset(name).map_err(|e| match e {
            GeneratorError::UnknownPreset(_) => CliError::Usage(format!(
                "unknown preset {name:?}; known presets: {}",
                PRESET_NAMES.join(", ")
            )),
            other => other.into(),
        })?,
        _ => {
            return Err(CliError::Usage(
                "exactly one of --grid, --random or --preset is required".into(),
            ))
        }
    };
    if let Some(period) = args.period {
        inst.period = Some(period);
    }
    let g = inst.comm_graph().map_err(ScheduleError::from)?;
    write_json(&output_path(&args.out), &inst)?;
    println!("{} nodes, {} edges", g.node_count(), g.edge_count());
    Ok(())
}

fn cmd_schedule(args: ScheduleArgs) -> Result<(), CliError> {
    let inst: Instance = read_json(&args.instance)?;
    let period = args
        .period
        .or(inst.period)
        .ok_or_else(|| CliError::Usage("the instance has no period; pass --period".into()))?;
    let mode = args.mode.map_or_else(|| default_mode(&inst), Into::into);
    let (schedule, report) = plan(&inst, mode, period)?;
    write_json(&output_path(&args.out), &schedule)?;
    if let Some(path) = &args.report {
        write_json(&output_path(path), &report)?;
    }
    println!("{}", report.summary());
    Ok(())
}

fn parse_strategy(spec: &str, inst: &Instance) -> Result<Strategy, CliError> {
    if spec == "dfs:topleft" {
        let root = inst
            .top_left()
            .ok_or_else(|| CliError::Usage("empty instance has no top-left node".into()))?;
        return Ok(Strategy::Dfs { root });
    }
    spec.parse()
        .map_err(|e: SimError| CliError::Usage(e.to_string()))
}

fn parse_failure(spec: &str) -> Result<Failure, CliError> {
    let bad = || CliError::Usage(format!("--failures expects AGENT@TIME, got {spec:?}"));
    let (agent, time) = spec.split_once('@').ok_or_else(bad)?;
    Ok(Failure {
        agent: agent.trim().parse().map_err(|_| bad())?,
        time: time.trim().parse().map_err(|_| bad())?,
    })
}

fn failures_for(
    args: &SimulateArgs,
    inst: &Instance,
    agents: usize,
    period: f64,
    seed: u64,
) -> Result<Vec<Failure>, CliError> {
    let at = args.fail_at.unwrap_or(period);
    let mut out: Vec<Failure> = args
        .failures
        .iter()
        .map(|s| parse_failure(s))
        .collect::<Result<_, _>>()?;
    if args.fail_white {
        out.extend(
            inst.annotations
                .white
                .iter()
                .map(|&agent| Failure { agent, time: at }),
        );
    }
    if args.fail > 0 {
        let taken: Vec<usize> = out.iter().map(|f| f.agent).collect();
        let pool: Vec<usize> = (0..agents).filter(|a| !taken.contains(a)).collect();
        if args.fail > pool.len() {
            return Err(CliError::Usage(format!(
                "cannot fail {} of {} remaining agents",
                args.fail,
                pool.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(args.fail_seed.unwrap_or(seed));
        let mut picked: Vec<usize> = sample(&mut rng, pool.len(), args.fail)
            .into_iter()
            .map(|k| pool[k])
            .collect();
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|agent| Failure { agent, time: at }));
    }
    Ok(out)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    if args.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let inst: Instance = read_json(&args.instance)?;
    let schedule: Schedule = read_json(&args.schedule)?;
    let strategy = parse_strategy(&args.strategy, &inst)?;
    let out_dir = match (&args.out_dir, std::env::var_os(OUT_DIR_ENV)) {
        (Some(d), _) => output_path(d),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => PathBuf::from("."),
    };
    fs::create_dir_all(&out_dir).map_err(|e| CliError::file(&out_dir, e))?;

    let mut spec = ExperimentSpec {
        instance: args.instance.clone(),
        schedule: args.schedule.clone(),
        runs: vec![],
        traces: vec![],
    };
    for seed in args.first_seed..args.first_seed + args.seeds {
        let failures = failures_for(&args, &inst, schedule.agents.len(), schedule.period, seed)?;
        let config = SimConfig {
            emission: match args.emission {
                EmissionArg::RandomPhase => EmissionPolicy::RandomPhase,
                EmissionArg::PeriodStart => EmissionPolicy::PeriodStart,
            },
            tolerance: args.tolerance,
            engine: args.dt.map(|dt| Engine::FixedStep { dt }),
            ..SimConfig::new(args.horizon, strategy, seed).with_failures(failures)
        };
        let trace = run(&inst, &schedule, &config)?;
        let path = out_dir.join(format!("trace-seed-{seed:04}.jsonl"));
        let file = fs::File::create(&path).map_err(|e| CliError::file(&path, e))?;
        io::write_trace(&trace, BufWriter::new(file)).map_err(|e| CliError::file(&path, e))?;
        println!("{}", path.display());
        spec.runs.push(config);
        spec.traces.push(path);
    }
    write_json(&out_dir.join("experiment.json"), &spec)
}

fn cmd_report(args: ReportArgs) -> Result<(), CliError> {
    let entries = fs::read_dir(&args.dir).map_err(|e| {
        CliError::Usage(format!(
            "cannot read trace directory {}: {e}",
            args.dir.display()
        ))
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Usage(format!(
            "no .jsonl traces in {}",
            args.dir.display()
        )));
    }
    let mut traces = Vec::with_capacity(paths.len());
    for p in &paths {
        let file = fs::File::open(p).map_err(|e| CliError::file(p, e))?;
        traces.push(io::read_trace(BufReader::new(file)).map_err(|e| CliError::file(p, e))?);
    }
    let report = MetricsReport::from_traces(&traces);
    let label = args
        .label
        .unwrap_or_else(|| traces[0].header.strategy.to_string());
    print!("{}", render_table(&[(label, report.clone())]));
    let summary = args
        .json
        .map_or_else(|| args.dir.join("summary.json"), |p| output_path(&p));
    write_json(&summary, &report)?;
    Ok(())
}

fn error_line(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            let first = message.lines().next().unwrap_or_default();
            let first = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("{}", error_line("usage", first));
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Schedule(a) => cmd_schedule(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(e.kind(), &e.to_string()));
            ExitCode::from(e.exit_code())
        }
    }
}
