use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use elsim::config::{ConfigError, ConfigFile};
use elsim::engine::{EngineError, InitialConditions, Simulation};
use elsim::metrics::{metrics, MetricsOptions};
use elsim::network::{
    gain_bounds, has_spanning_tree, pq_certificate, pq_certificate_two_sided, GainReport,
    NetworkError, PqCertificate,
};
use elsim::observer::{error_matrix, ObserverGains};
use elsim::output::{figures, write_csv, Summary};
use elsim::verify::{run_suites, SUITES};
use log::{info, warn};

const EXIT_CONFIG: u8 = 1;
const EXIT_DIVERGED: u8 = 2;
const EXIT_ASSUMPTION: u8 = 3;
const EXIT_CHECK_FAILED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "elsim",
    version,
    about = "Networked two-link manipulator tracking simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write trajectories.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write fig2.svg, fig3.svg and fig4.svg.
        #[arg(long)]
        figures: bool,
        /// Overrides `init.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check the controller gains against the sufficient conditions.
    CheckGains {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the built-in property suites.
    Verify {
        /// Suite to run; repeatable. Defaults to all.
        #[arg(long)]
        suite: Vec<String>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl ToString) -> Self {
        Failure {
            code,
            message: message.to_string(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::new(EXIT_CONFIG, format!("config error: {e}"))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ELSIM_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            figures,
            seed,
        } => run(&config, &out, figures, seed),
        Command::CheckGains { config } => check_gains(&config),
        Command::Verify { suite, seed, jobs } => verify(suite, seed, jobs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("elsim: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new(
        EXIT_CONFIG,
        format!("cannot write `{}`: {e}", path.display()),
    )
}

fn run(config: &Path, out: &Path, with_figures: bool, seed: Option<u64>) -> Result<(), Failure> {
    let file = ConfigFile::load(config)?;
    let scenario = file.to_scenario(seed)?;
    let used_seed = match scenario.init {
        InitialConditions::Random { seed, .. } => Some(seed),
        InitialConditions::Explicit(_) => None,
    };
    let topology = scenario.topology.clone();
    let gains = scenario.gains;
    let sim = Simulation::new(scenario).map_err(|e| Failure::new(EXIT_CONFIG, e))?;
    let no_tree = !has_spanning_tree(&topology);
    if let Err(e) = sim.certificate() {
        warn!("{e}");
    }
    if let Some(r) = sim.gain_report() {
        if !r.passed() {
            warn!(
                "gains outside the sufficient conditions (kc2 {} vs {:.4}, kc3 {} vs {})",
                r.kc2, r.kc2_bound, r.kc3, r.kc3_bound
            );
        }
    }
    let output = sim.run().map_err(|e| match e {
        EngineError::Diverged { .. } => Failure::new(EXIT_DIVERGED, e),
        other => Failure::new(EXIT_CONFIG, other),
    })?;
    info!(
        "{} steps, {} rows",
        output.diagnostics.steps,
        output.log.rows.len()
    );

    fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    let csv_path = out.join("trajectories.csv");
    let f = File::create(&csv_path).map_err(|e| io_failure(&csv_path, e))?;
    write_csv(&output.log, BufWriter::new(f)).map_err(|e| io_failure(&csv_path, e))?;

    let m = metrics(&output.log, &topology, MetricsOptions::default());
    let summary = Summary {
        n_agents: output.log.n_agents,
        dt: sim.config().dt,
        t_end: sim.config().t_end,
        seed: used_seed,
        rows: output.log.rows.len(),
        metrics: &m,
        diagnostics: &output.diagnostics,
        observer_error_matrix: error_matrix(ObserverGains {
            ko1: gains.ko1,
            ko2: gains.ko2,
        }),
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    let summary_path = out.join("summary.json");
    fs::write(&summary_path, json + "\n").map_err(|e| io_failure(&summary_path, e))?;

    if with_figures {
        for (name, svg) in figures(&output.log) {
            let p = out.join(name);
            fs::write(&p, svg).map_err(|e| io_failure(&p, e))?;
        }
    }
    if no_tree {
        return Err(Failure::new(
            EXIT_ASSUMPTION,
            "results written, but the leader does not reach every follower",
        ));
    }
    Ok(())
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn print_certificate(c: &PqCertificate) {
    println!("  H                  {}", fmt_vec(&c.h));
    println!("  P diagonal         {}", fmt_vec(&c.p_diag));
    println!("  lambda_min(Q)      {:.12}", c.lambda_min_q);
    println!("  lambda_max(P)      {:.12}", c.lambda_max_p);
    println!("  sigma_max(L+B)     {:.12}", c.sigma_max_lb);
}

fn print_gains(r: &GainReport) {
    println!(
        "  kc2 = {} > {:.6}  {}",
        r.kc2,
        r.kc2_bound,
        verdict(r.kc2_ok)
    );
    println!(
        "  kc3 = {} > {:.6}  {}",
        r.kc3,
        r.kc3_bound,
        verdict(r.kc3_ok)
    );
}

fn check_gains(config: &Path) -> Result<(), Failure> {
    let file = ConfigFile::load(config)?;
    let scenario = file.to_scenario(None)?;
    let top = &scenario.topology;
    let g = scenario.gains;
    println!(
        "gains: ko1 {} ko2 {} kc1 {} kc2 {} kc3 {} kappa {} zbar0 {}",
        g.ko1, g.ko2, g.kc1, g.kc2, g.kc3, g.kappa, g.zbar0
    );
    let tree = has_spanning_tree(top);
    println!(
        "spanning tree rooted at leader: {}",
        if tree { "yes" } else { "no" }
    );
    if !tree {
        let message = match pq_certificate(top) {
            Err(e) => e.to_string(),
            Ok(_) => "no spanning tree rooted at the leader".into(),
        };
        return Err(Failure::new(EXIT_ASSUMPTION, message));
    }
    let bound_err = |e: NetworkError| Failure::new(EXIT_CONFIG, e);
    match pq_certificate(top) {
        Ok(c) => {
            println!("certificate P = diag(1/h):");
            print_certificate(&c);
            let r = gain_bounds(&c, &g).map_err(bound_err)?;
            print_gains(&r);
            println!("overall: {}", verdict(r.passed()));
            if r.passed() {
                Ok(())
            } else {
                Err(Failure::new(EXIT_CHECK_FAILED, "gain conditions not met"))
            }
        }
        Err(e) => {
            println!("certificate P = diag(1/h): FAIL ({e})");
            let c = pq_certificate_two_sided(top).map_err(|e| Failure::new(EXIT_ASSUMPTION, e))?;
            println!("certificate P = diag(w/h), w = (L+B)^-T 1:");
            print_certificate(&c);
            let r = gain_bounds(&c, &g).map_err(bound_err)?;
            print_gains(&r);
            println!("overall: FAIL");
            Err(Failure::new(
                EXIT_CHECK_FAILED,
                "P = diag(1/h) does not certify this graph",
            ))
        }
    }
}

fn verify(suites: Vec<String>, seed: u64, jobs: Option<usize>) -> Result<(), Failure> {
    let names: Vec<&str> = if suites.is_empty() {
        SUITES.to_vec()
    } else {
        suites.iter().map(String::as_str).collect()
    };
    let jobs = jobs
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1)
        .max(1);
    let reports = run_suites(&names, seed, jobs);
    let mut failures = Vec::new();
    for r in &reports {
        for c in &r.checks {
            println!(
                "{:<4}  {:<12} {:<60} {}",
                verdict(c.passed),
                r.suite,
                c.name,
                c.detail
            );
            if !c.passed {
                failures.push(format!("{}: {}", r.suite, c.name));
            }
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::new(
            EXIT_CHECK_FAILED,
            format!(
                "{} check(s) failed: {}",
                failures.len(),
                failures.join("; ")
            ),
        ))
    }
}
