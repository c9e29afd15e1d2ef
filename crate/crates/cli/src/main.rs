//! `hss` runs tiered-storage scenarios and reshapes their artifacts into
//! plot-ready tables.
//!
//! Exit codes: 0 on success, 1 for configuration problems (bad config file,
//! unknown policy, invalid flag combinations), 2 for runtime failures.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hss_sim::config::{rep_seed, PolicyKind, ScenarioConfig};
use hss_sim::engine::{run_scenario, RunOutput};
use hss_sim::metrics::{
    read_jsonl, read_summary_json, write_agent_params_csv, write_heatmap_csv, write_jsonl,
    write_summary_json,
};
use rayon::prelude::*;

const OUT_DIR_ENV: &str = "HSS_OUT_DIR";

#[derive(Parser)]
#[command(name = "hss", version, about = "Tiered-storage migration simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario under one or more policies and write metrics.
    Run(RunArgs),
    /// Reshape run artifacts into tidy CSVs for plotting.
    EmitPlot(EmitPlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario description (TOML).
    config: PathBuf,
    /// Policies to run: comma-separated subset of rule1, rule2, rule3,
    /// rl-ft, rl-dt, rl-st, or "all".
    #[arg(long, default_value = "all", value_delimiter = ',')]
    policies: Vec<String>,
    /// Repetitions per policy, with consecutive seeds.
    #[arg(long, default_value_t = 1)]
    reps: u64,
    /// Base seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory. Falls back to $HSS_OUT_DIR, then the config's
    /// output section, then ./runs.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EmitPlotArgs {
    /// A single run directory (containing metrics.jsonl) or an experiment
    /// directory holding several run directories.
    dir: PathBuf,
    /// Which table to produce.
    #[arg(long, value_enum)]
    kind: PlotKind,
    /// Keep only these timesteps (heatmap tables).
    #[arg(long, value_delimiter = ',')]
    timesteps: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlotKind {
    Transfers,
    Esr,
    Heatmap,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::EmitPlot(args) => cmd_emit_plot(args).map_err(RunFailure::Runtime),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunFailure::Config(err)) => {
            eprintln!("configuration error: {err:#}");
            ExitCode::from(1)
        }
        Err(RunFailure::Runtime(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

enum RunFailure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

struct Job {
    policy: PolicyKind,
    rep: u64,
    seed: u64,
    dir: PathBuf,
}

fn cmd_run(args: RunArgs) -> std::result::Result<(), RunFailure> {
    let plan = plan_run(&args).map_err(RunFailure::Config)?;
    execute_run(plan).map_err(RunFailure::Runtime)
}

struct RunPlan {
    config: ScenarioConfig,
    jobs: Vec<Job>,
    out_dir: PathBuf,
}

fn plan_run(args: &RunArgs) -> Result<RunPlan> {
    let config = ScenarioConfig::from_path(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;
    let policies = parse_policies(&args.policies)?;
    if args.reps == 0 {
        bail!("--reps must be at least 1");
    }
    let out_dir = args
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .or_else(|| config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs"));
    let base_seed = args.seed.unwrap_or(config.seed);

    let mut jobs = Vec::new();
    for &policy in &policies {
        for rep in 1..=args.reps {
            let dir_name = if args.reps == 1 {
                policy.to_string()
            } else {
                format!("{policy}-rep{rep}")
            };
            jobs.push(Job {
                policy,
                rep,
                seed: rep_seed(base_seed, rep - 1),
                dir: out_dir.join(dir_name),
            });
        }
    }
    Ok(RunPlan { config, jobs, out_dir })
}

fn parse_policies(names: &[String]) -> Result<Vec<PolicyKind>> {
    if names.is_empty() {
        bail!("--policies must name at least one policy");
    }
    if names.len() == 1 && names[0] == "all" {
        return Ok(PolicyKind::ALL.to_vec());
    }
    let mut policies = Vec::with_capacity(names.len());
    for name in names {
        let policy: PolicyKind = name.parse()?;
        if policies.contains(&policy) {
            bail!("policy '{policy}' listed twice");
        }
        policies.push(policy);
    }
    Ok(policies)
}

fn execute_run(plan: RunPlan) -> Result<()> {
    std::fs::create_dir_all(&plan.out_dir)
        .with_context(|| format!("creating {}", plan.out_dir.display()))?;

    let rows: Vec<ComparisonRow> = plan
        .jobs
        .par_iter()
        .map(|job| {
            let row = run_job(&plan.config, job)
                .with_context(|| format!("running {} (seed {})", job.policy, job.seed))?;
            eprintln!(
                "{} seed={} transfers/step={:.2} final-esr={:.2}",
                job.dir.display(),
                job.seed,
                row.mean_total,
                row.final_esr
            );
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let comparison = plan.out_dir.join("comparison.csv");
    std::fs::write(&comparison, comparison_csv(&rows))
        .with_context(|| format!("writing {}", comparison.display()))?;
    println!("{}", comparison.display());
    Ok(())
}

struct ComparisonRow {
    policy: PolicyKind,
    rep: u64,
    seed: u64,
    mean_total: f64,
    mean_up_1_2: f64,
    mean_up_2_3: f64,
    mean_down_3_2: f64,
    mean_down_2_1: f64,
    final_esr: f64,
    final_occupancy: [f64; 3],
}

fn run_job(config: &ScenarioConfig, job: &Job) -> Result<ComparisonRow> {
    let scenario = config.clone().with_policy(job.policy).with_seed(job.seed);
    let output = run_scenario(&scenario)?;
    write_run_artifacts(&job.dir, &output)?;
    let m = &output.summary.mean_transfers;
    Ok(ComparisonRow {
        policy: job.policy,
        rep: job.rep,
        seed: job.seed,
        mean_total: m.total,
        mean_up_1_2: m.up_1_2,
        mean_up_2_3: m.up_2_3,
        mean_down_3_2: m.down_3_2,
        mean_down_2_1: m.down_2_1,
        final_esr: output.summary.final_esr,
        final_occupancy: output.summary.final_occupancy,
    })
}

fn write_run_artifacts(dir: &Path, output: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_jsonl(&dir.join("metrics.jsonl"), &output.frames)?;
    write_heatmap_csv(&dir.join("heatmap.csv"), &output.frames)?;
    write_summary_json(&dir.join("summary.json"), &output.summary)?;
    if let Some(rows) = &output.agent_trajectory {
        write_agent_params_csv(&dir.join("agent_params.csv"), rows)?;
    }
    Ok(())
}

fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut text = String::from(
        "policy,rep,seed,mean_transfers_total,mean_up_1_2,mean_up_2_3,\
         mean_down_3_2,mean_down_2_1,final_esr,final_occupancy_1,\
         final_occupancy_2,final_occupancy_3\n",
    );
    for r in rows {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.policy,
            r.rep,
            r.seed,
            r.mean_total,
            r.mean_up_1_2,
            r.mean_up_2_3,
            r.mean_down_3_2,
            r.mean_down_2_1,
            r.final_esr,
            r.final_occupancy[0],
            r.final_occupancy[1],
            r.final_occupancy[2]
        )
        .expect("writing to a String cannot fail");
    }
    text
}

fn cmd_emit_plot(args: EmitPlotArgs) -> Result<()> {
    let runs = discover_runs(&args.dir)?;
    let out_path = args.dir.join(match args.kind {
        PlotKind::Transfers => "plot-transfers.csv",
        PlotKind::Esr => "plot-esr.csv",
        PlotKind::Heatmap => "plot-heatmap.csv",
    });
    let text = match args.kind {
        PlotKind::Transfers => transfers_table(&runs)?,
        PlotKind::Esr => esr_table(&runs)?,
        PlotKind::Heatmap => heatmap_table(&runs, &args.timesteps)?,
    };
    std::fs::write(&out_path, text)
        .with_context(|| format!("writing {}", out_path.display()))?;
    println!("{}", out_path.display());
    Ok(())
}

struct RunDir {
    dir: PathBuf,
    policy: String,
}

fn discover_runs(dir: &Path) -> Result<Vec<RunDir>> {
    if dir.join("metrics.jsonl").is_file() {
        return Ok(vec![load_run_dir(dir)]);
    }
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.join("metrics.jsonl").is_file())
        .collect();
    subdirs.sort();
    if subdirs.is_empty() {
        bail!("no run metrics found under {}", dir.display());
    }
    Ok(subdirs.iter().map(|p| load_run_dir(p)).collect())
}

fn load_run_dir(dir: &Path) -> RunDir {
    let policy = read_summary_json(&dir.join("summary.json"))
        .map(|s| s.policy)
        .unwrap_or_else(|_| {
            dir.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "unknown".into())
        });
    RunDir { dir: dir.to_path_buf(), policy }
}

fn transfers_table(runs: &[RunDir]) -> Result<String> {
    let mut text = String::from("timestep,direction,count,policy\n");
    for run in runs {
        let frames = read_jsonl(&run.dir.join("metrics.jsonl"))?;
        if frames.is_empty() {
            bail!("{} holds no timesteps", run.dir.display());
        }
        for f in &frames {
            for (direction, count) in [
                ("up_1_2", f.transfers_up_1_2),
                ("up_2_3", f.transfers_up_2_3),
                ("down_3_2", f.transfers_down_3_2),
                ("down_2_1", f.transfers_down_2_1),
            ] {
                writeln!(text, "{},{},{},{}", f.timestep, direction, count, run.policy)
                    .expect("writing to a String cannot fail");
            }
        }
    }
    Ok(text)
}

fn esr_table(runs: &[RunDir]) -> Result<String> {
    let mut text = String::from("timestep,esr,policy\n");
    for run in runs {
        let frames = read_jsonl(&run.dir.join("metrics.jsonl"))?;
        if frames.is_empty() {
            bail!("{} holds no timesteps", run.dir.display());
        }
        for f in &frames {
            writeln!(text, "{},{},{}", f.timestep, f.estimated_system_response, run.policy)
                .expect("writing to a String cannot fail");
        }
    }
    Ok(text)
}

fn heatmap_table(runs: &[RunDir], timesteps: &[u64]) -> Result<String> {
    let single = runs.len() == 1;
    let mut text = if single {
        String::from("timestep,tier_id,slot_index,file_id,temperature,size\n")
    } else {
        String::from("timestep,tier_id,slot_index,file_id,temperature,size,policy\n")
    };
    let mut rows = 0usize;
    for run in runs {
        let path = run.dir.join("heatmap.csv");
        let content = std::fs::read_to_string(&path)
            .with_context(|| format!("reading {}", path.display()))?;
        for line in content.lines().skip(1) {
            let step: u64 = line
                .split(',')
                .next()
                .and_then(|s| s.parse().ok())
                .with_context(|| format!("malformed row in {}", path.display()))?;
            if timesteps.is_empty() || timesteps.contains(&step) {
                if single {
                    writeln!(text, "{line}").expect("writing to a String cannot fail");
                } else {
                    writeln!(text, "{line},{}", run.policy)
                        .expect("writing to a String cannot fail");
                }
                rows += 1;
            }
        }
    }
    if rows == 0 {
        bail!("no heatmap rows match the requested timesteps");
    }
    Ok(text)
}
