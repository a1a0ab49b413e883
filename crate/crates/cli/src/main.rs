use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use latticelock::experiments::{
    plan_for_point, run_case_cultivation, run_case_qldpc, run_latency, run_point, run_sweep, run_uarch,
    write_csv, CultivationScenario, ExperimentConfig, LatencyConfig,
};
use latticelock::policies::{
    solve_extra_rounds, solve_hybrid, PolicyKind, DEFAULT_EPSILON_NS, DEFAULT_M_MAX, DEFAULT_Z_MAX,
};
use latticelock::timing::{cycle_time_from_profile, LatencyProfile};

const THREADS_ENV: &str = "LATTICELOCK_THREADS";

#[derive(Parser)]
#[command(name = "latticelock", version, about = "Synchronization policies for lattice surgery between desynchronized patches")]
struct Cli {
    /// Worker threads (LATTICELOCK_THREADS takes precedence).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Policy solvers.
    Policy {
        #[command(subcommand)]
        command: PolicyCommand,
    },
    /// Run every point of a config and print full JSON reports.
    Simulate(RunArgs),
    /// Run a config and write LER rows and Passive/policy ratios as CSV.
    Sweep(RunArgs),
    /// Slack case studies.
    Case {
        #[command(subcommand)]
        command: CaseCommand,
    },
    /// Decoding-latency speedup of Active over Passive.
    Latency(LatencyArgs),
    /// Planning time of the synchronization engine versus patch count.
    Uarch(UarchArgs),
}

#[derive(Subcommand)]
enum PolicyCommand {
    /// Solve the extra-rounds and hybrid equations for one patch pair.
    Solve(SolveArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long = "t-p")]
    t_p: u64,
    #[arg(long = "t-p2")]
    t_p2: u64,
    #[arg(long)]
    tau: u64,
    #[arg(long, default_value_t = DEFAULT_EPSILON_NS)]
    epsilon: u64,
    #[arg(long = "z-max", default_value_t = DEFAULT_Z_MAX)]
    z_max: u64,
    #[arg(long = "m-max", default_value_t = DEFAULT_M_MAX)]
    m_max: u64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CaseCommand {
    /// Slack between a surface-code patch and a slower qLDPC block.
    Qldpc(QldpcArgs),
    /// Slack seen by a consumer of cultivated magic states.
    Cultivation(CultivationArgs),
}

#[derive(Args)]
struct QldpcArgs {
    /// Profile whose 4- and 7-layer cycles give the default times.
    #[arg(long, default_value = "google")]
    profile: String,
    #[arg(long = "t-surface")]
    t_surface: Option<u64>,
    #[arg(long = "t-qldpc")]
    t_qldpc: Option<u64>,
    #[arg(long = "max-rounds", default_value_t = 50)]
    max_rounds: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CultivationArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "attempt-ns", default_value_t = 2000)]
    attempt_ns: u64,
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    #[arg(long = "consumer-ns", default_value_t = 1100)]
    consumer_ns: u64,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 20)]
    bins: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Histogram CSV; summary JSON goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LatencyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    d: u32,
    #[arg(long = "hit-passive")]
    hit_passive: Option<f64>,
    #[arg(long = "hit-active")]
    hit_active: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct UarchArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32,50")]
    k: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    repetitions: usize,
    #[arg(long, default_value = "active")]
    policy: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n = v
                .trim()
                .parse::<usize>()
                .with_context(|| format!("{THREADS_ENV}={v:?} is not a thread count"))?;
            Ok(Some(n))
        }
        Err(_) => Ok(flag),
    }
}

/// Returns `Ok(false)` when some requested runs failed.
fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = thread_count(cli.threads)? {
        if n == 0 {
            bail!("thread count must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Policy {
            command: PolicyCommand::Solve(a),
        } => policy_solve(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Case {
            command: CaseCommand::Qldpc(a),
        } => case_qldpc(&a),
        Command::Case {
            command: CaseCommand::Cultivation(a),
        } => case_cultivation(&a),
        Command::Latency(a) => latency(&a),
        Command::Uarch(a) => uarch(&a),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_config(a: &RunArgs) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let mut cfg = ExperimentConfig::from_json(&text).with_context(|| format!("in {}", a.config.display()))?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.shots {
        cfg.shots = n;
    }
    if let Some(o) = &a.out {
        cfg.output = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn policy_solve(a: &SolveArgs) -> Result<bool> {
    let extra = solve_extra_rounds(a.t_p, a.t_p2, a.tau, a.m_max);
    let hybrid = solve_hybrid(a.t_p, a.t_p2, a.tau, a.epsilon, a.z_max)?;
    let report = json!({
        "t_p": a.t_p,
        "t_p2": a.t_p2,
        "tau_ns": a.tau,
        "extra_rounds": extra,
        "hybrid": hybrid,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(true)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    path.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

fn sweep(a: &RunArgs) -> Result<bool> {
    let cfg = load_config(a)?;
    let res = run_sweep(&cfg)?;
    match &cfg.output {
        Some(path) => {
            res.write_rows(File::create(path).with_context(|| format!("creating {}", path.display()))?)?;
            res.write_ratios(File::create(sibling(path, "ratios"))?)?;
            let errors = sibling(path, "errors");
            if res.errors.is_empty() {
                if errors.exists() {
                    fs::remove_file(&errors)?;
                }
            } else {
                res.write_errors(File::create(&errors)?)?;
            }
        }
        None => {
            let mut out = io::stdout().lock();
            res.write_rows(&mut out)?;
            writeln!(out)?;
            res.write_ratios(&mut out)?;
        }
    }
    for e in &res.errors {
        eprintln!("point {} tau={} failed: {}", e.policy, e.tau_ns, e.error);
    }
    Ok(res.is_complete())
}

fn simulate(a: &RunArgs) -> Result<bool> {
    let cfg = load_config(a)?;
    let profile = cfg.profile.resolve()?;
    let cycle = profile.surface_cycle_time();
    let params = cfg.plan_params();
    let mut reports = Vec::new();
    let mut ok = true;
    for &policy in &cfg.policies {
        for &tau in &cfg.tau_ns {
            let outcome = plan_for_point(
                policy,
                tau,
                cfg.t_p.unwrap_or(cycle),
                cfg.t_p2.unwrap_or(cycle),
                &params,
                cfg.extra_r,
            )
            .and_then(|plan| Ok((plan, run_point(&cfg, &plan, cfg.shots, cfg.seed)?)));
            reports.push(match outcome {
                Ok((plan, report)) => json!({
                    "policy": policy,
                    "tau_ns": tau,
                    "seed": cfg.seed,
                    "plan": plan,
                    "report": report,
                    "lut_hit_rate": report.lut_hit_rate(),
                }),
                Err(e) => {
                    ok = false;
                    json!({"policy": policy, "tau_ns": tau, "seed": cfg.seed, "error": e.to_string()})
                }
            });
        }
    }
    let mut out = output(cfg.output.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &reports)?;
    writeln!(out)?;
    Ok(ok)
}

fn case_qldpc(a: &QldpcArgs) -> Result<bool> {
    let profile = LatencyProfile::builtin(&a.profile)
        .with_context(|| format!("unknown profile `{}`", a.profile))?;
    let t_surface = a.t_surface.unwrap_or_else(|| cycle_time_from_profile(&profile, 4));
    let t_qldpc = a.t_qldpc.unwrap_or_else(|| cycle_time_from_profile(&profile, 7));
    let rows = run_case_qldpc(t_surface, t_qldpc, a.max_rounds)?;
    write_csv(output(a.out.as_deref())?, &rows)?;
    Ok(true)
}

fn case_cultivation(a: &CultivationArgs) -> Result<bool> {
    let mut s: CultivationScenario = match &a.config {
        Some(p) => read_json(p)?,
        None => CultivationScenario {
            attempt_duration_ns: a.attempt_ns,
            success_prob_per_attempt: a.q,
            consumer_cycle_ns: a.consumer_ns,
            n_samples: a.samples,
            seed: 0,
            bins: a.bins,
        },
    };
    if let Some(seed) = a.seed {
        s.seed = seed;
    }
    let stats = run_case_cultivation(&s)?;
    let summary = json!({
        "scenario": s,
        "mean_ns": stats.mean_ns,
        "median_ns": stats.median_ns,
        "model": stats.model,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if let Some(p) = &a.out {
        write_csv(File::create(p).with_context(|| format!("creating {}", p.display()))?, &stats.histogram)?;
    }
    Ok(true)
}

fn latency(a: &LatencyArgs) -> Result<bool> {
    let mut cfg: LatencyConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => serde_json::from_value(json!({"d": a.d}))?,
    };
    if a.hit_passive.is_some() || a.hit_active.is_some() {
        cfg.hit_passive = a.hit_passive;
        cfg.hit_active = a.hit_active;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.shots {
        cfg.shots = n;
    }
    let row = run_latency(&cfg)?;
    write_csv(output(a.out.as_deref())?, &[row])?;
    Ok(true)
}

fn uarch(a: &UarchArgs) -> Result<bool> {
    let policy: PolicyKind = serde_json::from_value(json!(a.policy))
        .with_context(|| format!("unknown policy `{}`", a.policy))?;
    let rows = run_uarch(&a.k, a.repetitions, policy, a.seed.unwrap_or(0))?;
    write_csv(output(a.out.as_deref())?, &rows)?;
    Ok(true)
}
