use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gpe_bench::{cmd_converge, cmd_groundstate, cmd_run, cmd_stability, Context, Report, RunConfig};

/// Benchmarks for finite element and spectral Gross–Pitaevskii solvers.
#[derive(Parser)]
#[command(name = "gpe-bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One evolution with observable trace and timing repeats.
    Run(Common),
    /// Error table and convergence rates over step sizes (and meshes).
    Converge(Common),
    /// Ground state of a problem's stationary problem, saved as a state file.
    Groundstate(Common),
    /// First time at which the energy crosses a threshold, per scheme and step.
    Stability(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// `desk` or `paper` problem sizes.
    #[arg(long)]
    profile: Option<String>,
    /// Parallel sweep cells.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Recorded in the report; the runs themselves are deterministic.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    problem: Option<String>,
    /// Scheme of a single run (IM, CN, RE, LCN, TwoStep, SP2).
    #[arg(long)]
    scheme: Option<String>,
    /// Schemes of a sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    final_time: Option<f64>,
    /// Element counts, comma separated (one per direction).
    #[arg(long, value_delimiter = ',')]
    elements: Option<Vec<usize>>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(short, long)]
    verbose: bool,
}

impl Common {
    fn config(&self) -> gpe_bench::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.profile {
            cfg.profile = v.clone();
        }
        if let Some(v) = &self.problem {
            cfg.problem = v.clone();
        }
        if let Some(v) = &self.scheme {
            cfg.scheme = v.clone();
        }
        if let Some(v) = &self.schemes {
            cfg.schemes = v.clone();
        }
        // a step count or step size on the command line replaces both
        if self.steps.is_some() || self.tau.is_some() {
            cfg.n_steps = self.steps;
            cfg.tau = self.tau;
        }
        if self.final_time.is_some() {
            cfg.final_time = self.final_time;
        }
        if let Some(v) = &self.elements {
            cfg.elements = Some(v.clone());
        }
        if let Some(v) = self.repeats {
            cfg.repeats = v;
        }
        if let Some(v) = self.stride {
            cfg.stride = v;
        }
        Ok(cfg)
    }

    fn context(&self) -> Context {
        Context { out: self.out.clone(), workers: self.workers, seed: self.seed, verbose: self.verbose }
    }
}

fn summarize(report: &Report) {
    for r in &report.runs {
        println!(
            "{} tau={} steps={}/{} mass={:.12e} energy={:.12e} err_l2={} wall={:.3}s{}",
            r.method,
            r.tau,
            r.steps_taken,
            r.n_steps,
            r.final_mass,
            r.final_energy,
            r.err_l2.map_or("-".into(), |e| format!("{e:.4e}")),
            r.mean_wall_s,
            r.failure.as_ref().map_or(String::new(), |f| format!(" FAILED: {f}")),
        );
    }
    for r in &report.eoc {
        println!(
            "{} tau={} elements={} err_l2={:.4e} eoc_l2={}{}",
            r.method,
            r.tau,
            r.nx,
            r.err_l2,
            r.eoc_l2.map_or("-".into(), |e| format!("{e:.2}")),
            r.failure.as_ref().map_or(String::new(), |f| format!(" FAILED: {f}")),
        );
    }
    for r in &report.stability {
        println!("{} tau={} crossing={} max_energy={:.6e}", r.method, r.tau, r.crossing, r.max_energy);
    }
    if let Some(g) = &report.ground_state {
        println!(
            "eigenvalue={:.10} energy={:.10} iterations={} residual={:.3e}{}",
            g.eigenvalue,
            g.energy,
            g.iterations,
            g.residual,
            g.vortices.map_or(String::new(), |v| format!(" vortices={v}")),
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, cmd): (&Common, fn(&RunConfig, &Context) -> gpe_bench::Result<Report>) = match &cli.command {
        Command::Run(c) => (c, cmd_run),
        Command::Converge(c) => (c, cmd_converge),
        Command::Groundstate(c) => (c, cmd_groundstate),
        Command::Stability(c) => (c, cmd_stability),
    };
    let result = common.config().and_then(|cfg| cmd(&cfg, &common.context()));
    match result {
        Ok(report) => {
            summarize(&report);
            if report.ok() {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: {} run(s) failed; see {}", report.failed_runs, common.out.join("report.json").display());
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
