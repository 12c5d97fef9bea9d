use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tbrbf::harness::{parse_config, run_experiment, Experiment, ExperimentReport};
use tbrbf::Error;

/// Trajectory-based RBF experiments on closed surfaces.
///
/// Exit codes: 0 all checks pass, 1 a threshold failed, 2 configuration or
/// I/O error, 3 numerical failure. TBRBF_THREADS caps the worker threads.
#[derive(Parser, Debug)]
#[command(name = "tbrbf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Temporal convergence on the unit circle.
    ConvergeTime(Common),
    /// Spatial convergence on the unit circle.
    ConvergeSpace(Common),
    /// Shu multi-wave transport against the Eulerian baseline.
    Shu(Common),
    /// Transport along the (3,2) torus knot.
    TorusKnot(Common),
    /// Turing patterns on closed surfaces and point clouds.
    Turing(Common),
    /// Push-forward identity checks.
    PushforwardCheck(Common),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Key-value config file with an `[experiment]` section.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Time step(s), comma separated.
    #[arg(long)]
    dt: Option<String>,
    /// Node count(s), comma separated.
    #[arg(long)]
    nodes: Option<String>,
    #[arg(long)]
    kernel_order: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    /// cn, bdf1, bdf2, bdf3 or kansa.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    rk_stages: Option<usize>,
    /// circle, sphere, torus, bretzel2, cpd or cloud (comma separated).
    #[arg(long)]
    surface: Option<String>,
    /// Full-scale node counts (torus 11600, Turing per surface).
    #[arg(long)]
    full_scale: bool,
    #[arg(long)]
    kernel_scale: Option<f64>,
    /// Any other config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn flags(&self) -> Result<Vec<(String, String)>, Error> {
        let mut f = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                f.push((k.to_string(), v));
            }
        };
        push("out", self.out.as_ref().map(|p| p.display().to_string()));
        push("seed", self.seed.map(|s| s.to_string()));
        push("dt", self.dt.clone());
        push("nodes", self.nodes.clone());
        push("kernel_order", self.kernel_order.clone());
        push("epsilon", self.epsilon.clone());
        push("scheme", self.scheme.clone());
        push("rk_stages", self.rk_stages.map(|s| s.to_string()));
        push("surface", self.surface.clone());
        push("kernel_scale", self.kernel_scale.map(|s| s.to_string()));
        if self.full_scale {
            f.push(("full_scale".into(), "true".into()));
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config {
                key: kv.clone(),
                line: 0,
                message: "expected key=value".into(),
            })?;
            f.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(f)
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

fn print_report(rep: &ExperimentReport) {
    for t in &rep.tables {
        println!("# {}", t.label);
        println!("resolution,error,rate");
        for r in &t.rows {
            println!("{:e},{:e},{}", r.resolution, r.error, r.rate.map(|x| format!("{x:.3}")).unwrap_or_default());
        }
    }
    for (k, v) in &rep.metrics {
        println!("{k} = {v:e}");
    }
    for n in &rep.notes {
        println!("note: {n}");
    }
    for c in &rep.checks {
        println!("{c}");
    }
    for p in &rep.files {
        log::info!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<ExperimentReport, Error> {
    let (exp, common) = match &cli.command {
        Command::ConvergeTime(c) => (Experiment::ConvergeTime, c),
        Command::ConvergeSpace(c) => (Experiment::ConvergeSpace, c),
        Command::Shu(c) => (Experiment::Shu, c),
        Command::TorusKnot(c) => (Experiment::TorusKnot, c),
        Command::Turing(c) => (Experiment::Turing, c),
        Command::PushforwardCheck(c) => (Experiment::PushforwardCheck, c),
    };
    let mut flags = vec![("experiment".to_string(), exp.to_string())];
    flags.extend(common.flags()?);
    let cfg = parse_config(common.config.as_deref(), &flags)?;
    run_experiment(&cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("TBRBF_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("thread pool: {e}");
                }
            }
            _ => {
                eprintln!("error: TBRBF_THREADS must be a positive integer, got `{v}`");
                return ExitCode::from(2);
            }
        }
    }
    match run(cli) {
        Ok(rep) => {
            print_report(&rep);
            if rep.passed() {
                ExitCode::SUCCESS
            } else {
                let names: Vec<&str> = rep.failures().map(|c| c.name.as_str()).collect();
                eprintln!("FAILED checks={}", names.join(";"));
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
