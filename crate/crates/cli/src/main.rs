use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use tinysdp_bench::cache::{cache_path, CacheFile};
use tinysdp_bench::scenario::{builtin, builtin_source, ScenarioFile};
use tinysdp_bench::suite::{run_scenario, run_suite, Suite, SuiteOptions};
use tinysdp_bench::{BenchError, Method, Profile, Scenario, TrajectoryLog};

/// Exit codes: 0 safe and at the goal, 1 unsafe, aborted or solver failure,
/// 2 usage or configuration error.
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Self { code: 2, msg: msg.into() }
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        let code = if matches!(e, BenchError::Solver(_)) { 1 } else { 2 };
        Self { code, msg: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::usage(e.to_string())
    }
}

type CliResult = Result<u8, Failure>;

#[derive(Parser)]
#[command(name = "tinysdp", version, about = "PSD-relaxed lifted MPC: runs, benchmarks, caches and plot data")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario in closed loop and write its logs.
    Run(RunArgs),
    /// Run a benchmark suite and write its metric tables.
    Bench(BenchArgs),
    /// Build or inspect a cached lifted Riccati file.
    #[command(subcommand)]
    Cache(CacheCmd),
    /// Turn a trajectory log into plot-ready series.
    Plotdata(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Tinysdp,
    Lin,
    Hocbf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Simulation,
    Hardware,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Built-in scenario name or path to a scenario TOML file.
    #[arg(long, default_value = "ushape")]
    scenario: String,
    /// Start variant; defaults to the first start of the scenario.
    #[arg(long)]
    start: Option<String>,
    #[arg(long, value_enum, default_value = "simulation")]
    profile: ProfileArg,
    #[arg(long)]
    max_iter: Option<usize>,
    /// ADMM penalty on the PSD consensus.
    #[arg(long)]
    rho: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scn: ScenarioArgs,
    #[arg(long, value_enum, default_value = "tinysdp")]
    method: MethodArg,
    /// Safety margin of the LIN and HOCBF baselines, in meters.
    #[arg(long, default_value_t = 0.0)]
    margin: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, env = "TINYSDP_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    tol_cert: Option<f64>,
    /// Recorded in the metadata; the built-in scenarios are deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Replace the logs of an earlier run in the same directory.
    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// ushape, dynamic, 3d or all.
    suite: String,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, env = "TINYSDP_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    tol_cert: Option<f64>,
}

#[derive(Subcommand)]
enum CacheCmd {
    /// Compute the lifted cache of a scenario and write it.
    Build {
        #[command(flatten)]
        scn: ScenarioArgs,
        /// Output file; defaults to a hash-named file in the cache directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "TINYSDP_CACHE_DIR", default_value = ".")]
        cache_dir: PathBuf,
    },
    /// Print dimensions, residual and closed-loop spectral radius.
    Inspect { path: PathBuf },
}

#[derive(Args)]
struct PlotArgs {
    /// Trajectory log written by `run`.
    log: PathBuf,
    #[arg(long, default_value = "plot")]
    out: PathBuf,
    /// Scenario for obstacle footprints; defaults to the `scenario.toml`
    /// next to the log.
    #[arg(long)]
    scenario: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Cache(c) => cmd_cache(c),
        Command::Plotdata(a) => cmd_plotdata(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

/// Scenario source text and its resolved instance.
fn load_scenario(a: &ScenarioArgs) -> Result<(String, Scenario), Failure> {
    let text = match builtin_source(&a.scenario) {
        Some(t) => t.to_string(),
        None if Path::new(&a.scenario).is_file() => fs::read_to_string(&a.scenario)?,
        None => {
            return Err(Failure::usage(format!(
                "unknown scenario `{}`; use one of ushape, moving-gap, sweeping-barrier, vertical-gate or a TOML path",
                a.scenario
            )))
        }
    };
    let file = ScenarioFile::parse(&text)?;
    let mut scn = file.resolve(a.start.as_deref())?;
    scn.profile = match a.profile {
        ProfileArg::Simulation => Profile::Simulation,
        ProfileArg::Hardware => Profile::Hardware,
    };
    if a.max_iter.is_some() {
        scn.solver.max_iter = a.max_iter;
    }
    if a.rho.is_some() {
        scn.solver.rho_psd = a.rho;
    }
    scn.solver_config().validate().map_err(BenchError::from)?;
    Ok((text, scn))
}

fn unix_time() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn cmd_run(a: RunArgs) -> CliResult {
    let (text, mut scn) = load_scenario(&a.scn)?;
    scn.method = match a.method {
        MethodArg::Tinysdp => Method::Tinysdp,
        MethodArg::Lin => Method::Lin { margin: a.margin },
        MethodArg::Hocbf => Method::Hocbf { margin: a.margin, alpha1: scn.hocbf.alpha1, alpha2: scn.hocbf.alpha2 },
    };
    if !(a.margin >= 0.0 && a.margin.is_finite()) {
        return Err(Failure::usage("--margin must be a nonnegative number"));
    }
    let traj_path = a.out.join("trajectory.csv");
    if traj_path.exists() && !a.overwrite {
        return Err(Failure::usage(format!("{} exists; pass --overwrite to replace it", traj_path.display())));
    }
    fs::create_dir_all(&a.out)?;
    let opts = SuiteOptions { tol_cert: a.tol_cert, cache_dir: a.cache_dir.clone() };
    let started = unix_time();
    let (log, metrics) = run_scenario(&scn, &opts)?;
    let finished = unix_time();

    log.write_csv(fs::File::create(&traj_path)?)?;
    fs::write(a.out.join("certificate.csv"), certificate_trace(&log))?;
    fs::write(a.out.join("scenario.toml"), &text)?;
    let mut summary = serde_json::to_value(&metrics).expect("metrics serialize");
    let timing = summary.as_object_mut().and_then(|o| o.remove("mean_solve_time"));
    summary["safe"] = json!(metrics.safe());
    summary["success"] = json!(metrics.success());
    summary["scenario"] = json!(scn.name);
    summary["start"] = json!(scn.start_name);
    summary["method"] = json!(scn.method.label());
    write_json(&a.out.join("metrics.json"), &summary)?;
    let meta = json!({
        "started_unix": started,
        "finished_unix": finished,
        "mean_solve_time": timing,
        "seed": a.seed,
        "profile": a.scn.profile.to_possible_value().map(|v| v.get_name().to_string()),
        "version": env!("CARGO_PKG_VERSION"),
    });
    write_json(&a.out.join("metadata.json"), &meta)?;

    println!(
        "{} {} {}: reached {} collided {} aborted {} path {} goal_dist {} min_clearance {} certified {}",
        scn.name,
        scn.start_name,
        scn.method,
        metrics.reached,
        metrics.collided,
        metrics.aborted,
        metrics.path_length,
        metrics.final_goal_distance,
        metrics.min_clearance,
        metrics.certified_fraction.map(|f| f.to_string()).unwrap_or_else(|| "-".into()),
    );
    Ok(if metrics.success() { 0 } else { 1 })
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<(), Failure> {
    let mut bytes = serde_json::to_vec_pretty(v).expect("json serializes");
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

/// One row per control step; the band is `|Δ| ≤ η_min`.
fn certificate_trace(log: &TrajectoryLog) -> String {
    let mut out = String::from("step,t,delta,eta_min,band_lo,band_hi,certified,fallback_active\n");
    let controls = &log.rows[..log.len().saturating_sub(1)];
    for (k, r) in controls.iter().enumerate() {
        let cert = match r.certified {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        out.push_str(&format!(
            "{k},{},{},{},{},{},{cert},{}\n",
            r.t,
            r.delta,
            r.eta_min,
            -r.eta_min,
            r.eta_min,
            u8::from(r.fallback)
        ));
    }
    out
}

fn cmd_bench(a: BenchArgs) -> CliResult {
    let suite: Suite = a.suite.parse()?;
    let opts = SuiteOptions { tol_cert: a.tol_cert, cache_dir: a.cache_dir };
    let report = run_suite(suite, &opts)?;
    fs::create_dir_all(&a.out)?;
    let table = report.table_csv();
    fs::write(a.out.join(format!("{}_table.csv", suite.name())), &table)?;
    if !report.ablation.is_empty() {
        fs::write(a.out.join(format!("{}_lin_margin.csv", suite.name())), report.ablation_csv())?;
    }
    print!("{table}");
    if !report.ablation.is_empty() {
        match report.lin_safe_margin {
            Some(m) => println!("LIN safe on every U-shape start from margin {m}"),
            None => println!("LIN unsafe on some U-shape start at every grid margin"),
        }
    }
    Ok(if report.tinysdp_all_safe() { 0 } else { 1 })
}

fn cmd_cache(c: CacheCmd) -> CliResult {
    match c {
        CacheCmd::Build { scn, out, cache_dir } => {
            let (_, scn) = load_scenario(&scn)?;
            let file = CacheFile::build(&scn)?;
            let path = out.unwrap_or_else(|| cache_path(&cache_dir, &scn));
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            file.write(&path)?;
            println!("wrote {} (config {})", path.display(), file.config_hash);
            Ok(0)
        }
        CacheCmd::Inspect { path } => {
            if !path.is_file() {
                return Err(Failure::usage(format!("no cache file at {}", path.display())));
            }
            let file = CacheFile::read(&path)?;
            let c = &file.cache;
            println!("format_version {}", file.format_version);
            println!("config_hash {}", file.config_hash);
            println!("dim {} dt {}", file.dim, file.dt);
            println!("n_bar_x {} n_bar_u {} horizon {}", c.nx(), c.nu(), c.horizon);
            println!("residual {:e} after {} iterations", c.residual, c.iterations);
            println!("spectral_radius {}", c.closed_loop_spectral_radius());
            Ok(0)
        }
    }
}

fn cmd_plotdata(a: PlotArgs) -> CliResult {
    let text = fs::read(&a.log).map_err(|e| Failure::usage(format!("{}: {e}", a.log.display())))?;
    let log = TrajectoryLog::read_csv(text.as_slice())?;
    if log.is_empty() {
        return Err(Failure::usage("log has no rows"));
    }
    let scn = match &a.scenario {
        Some(s) if builtin_source(s).is_some() => Some(builtin(s, None)?),
        Some(path) => Some(Scenario::load(Path::new(path), None)?),
        None => {
            let beside = a.log.with_file_name("scenario.toml");
            beside.is_file().then(|| Scenario::load(&beside, None)).transpose()?
        }
    };
    let d = log.rows[0].x.len() / 2;
    let axes = ["x", "y", "z"];
    fs::create_dir_all(&a.out)?;

    let mut traj = format!("t,{}\n", axes[..d].join(","));
    for r in &log.rows {
        let p: Vec<String> = r.x.iter().take(d).map(f64::to_string).collect();
        traj.push_str(&format!("{},{}\n", r.t, p.join(",")));
    }
    fs::write(a.out.join("trajectory.csv"), traj)?;
    fs::write(a.out.join("certificate.csv"), certificate_trace(&log))?;

    if let Some(scn) = scn {
        if scn.dim != d {
            return Err(Failure::usage(format!("log is {d}D but the scenario is {}D", scn.dim)));
        }
        let mut obs = format!("t,obstacle,{},radius\n", axes[..d].iter().map(|a| format!("c{a}")).collect::<Vec<_>>().join(","));
        for r in &log.rows {
            for (j, o) in scn.obstacles.iter().enumerate() {
                let c: Vec<String> = o.center_at(r.t).iter().map(f64::to_string).collect();
                obs.push_str(&format!("{},{j},{},{}\n", r.t, c.join(","), o.radius));
            }
        }
        fs::write(a.out.join("obstacles.csv"), obs)?;
    }
    println!("wrote plot series for {} rows to {}", log.len(), a.out.display());
    Ok(0)
}
