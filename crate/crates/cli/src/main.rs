//! `degbeam`: batch runs of the degenerate Timoshenko beam laboratory.

mod config;
mod output;
mod tasks;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{ConfigError, Task, SCHEMA_VERSION};

#[derive(Parser)]
#[command(name = "degbeam", version, about = "Constants, simulation, verification and HUM control for degenerate Timoshenko beams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Poincaré, observability and decay constants of the model.
    Constants(Common),
    /// Integrate the system and write the trajectory.
    Simulate(Common),
    /// Feedback run with decay fit and bound check.
    Stabilize(Common),
    /// Multiplier identities and observability inequalities on one run.
    Verify(Common),
    /// HUM null (or target) control.
    Control(Common),
    /// Run the task named in each config file.
    Run(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file(s); several are run independently.
    #[arg(long = "config", required = true, num_args = 1..)]
    configs: Vec<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scenarios run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Also write the mesh and free-dof operators as CSV.
    #[arg(long)]
    dump_matrices: bool,
}

enum Failure {
    Config(ConfigError),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    fn to_json(&self, path: &Path) -> serde_json::Value {
        let error = match self {
            Failure::Config(e) => json!({ "kind": "config", "field": e.field, "message": e.message }),
            Failure::Runtime(e) => json!({ "kind": "runtime", "message": format!("{e:#}") }),
        };
        json!({ "schema_version": SCHEMA_VERSION, "config_path": path, "error": error })
    }
}

fn classify(e: anyhow::Error) -> Failure {
    match e.downcast::<ConfigError>() {
        Ok(c) => Failure::Config(c),
        Err(e) => Failure::Runtime(e),
    }
}

fn out_dir(common: &Common, path: &Path, index: usize, scenario_dir: &Path) -> PathBuf {
    match &common.out {
        Some(base) if common.configs.len() > 1 => {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            base.join(format!("{index:02}-{stem}"))
        }
        Some(base) => base.clone(),
        None => scenario_dir.to_path_buf(),
    }
}

fn run_one(task: Option<Task>, common: &Common, index: usize) -> Result<serde_json::Value, Failure> {
    let path = &common.configs[index];
    let scenario = config::load(path).map_err(Failure::Config)?;
    let task = match task.or(scenario.task) {
        Some(t) => t,
        None => return Err(Failure::Config(ConfigError::new("task", "missing field `task`"))),
    };
    let report = tasks::run(task, &scenario).map_err(classify)?;
    let dir = out_dir(common, path, index, &scenario.output.dir);
    let files = report.write(&dir, &scenario, common.dump_matrices).map_err(Failure::Runtime)?;
    Ok(json!({ "config_path": path, "task": task, "out": dir, "files": files }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, common) = match cli.command {
        Command::Constants(c) => (Some(Task::Constants), c),
        Command::Simulate(c) => (Some(Task::Simulate), c),
        Command::Stabilize(c) => (Some(Task::Stabilize), c),
        Command::Verify(c) => (Some(Task::Verify), c),
        Command::Control(c) => (Some(Task::Control), c),
        Command::Run(c) => (None, c),
    };
    let n = common.configs.len();
    let next = AtomicUsize::new(0);
    let mut results: Vec<Option<Result<serde_json::Value, Failure>>> = (0..n).map(|_| None).collect();
    std::thread::scope(|s| {
        let workers: Vec<_> = (0..common.jobs.clamp(1, n))
            .map(|_| {
                s.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= n {
                            break done;
                        }
                        done.push((i, run_one(task, &common, i)));
                    }
                })
            })
            .collect();
        for w in workers {
            for (i, r) in w.join().expect("worker panicked") {
                results[i] = Some(r);
            }
        }
    });
    // reported in config order whatever the scheduling
    let mut code = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r.expect("every scenario runs") {
            Ok(v) => println!("{v}"),
            Err(f) => {
                eprintln!("{}", f.to_json(&common.configs[i]));
                code = code.max(f.code());
            }
        }
    }
    ExitCode::from(code)
}
