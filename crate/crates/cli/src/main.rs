use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fracopt_cli::calibrate::calibrate;
use fracopt_cli::config::{parse_config, RunConfig};
use fracopt_cli::output::write_file;
use fracopt_cli::report::equilibrium_report;
use fracopt_cli::sweep::run_sweep;
use fracopt_core::Scenario;

const CONFIG_ERROR: u8 = 1;
const PARTIAL_FAILURE: u8 = 2;

#[derive(Parser)]
#[command(name = "fracopt", version, about = "Fractional-order cancer-obesity optimal control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimise dosing over an (alpha, gamma1) grid and write CSV output.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<Scenario>,
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        gamma1: Option<Vec<f64>>,
        #[arg(long)]
        tf: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Write the equilibrium and stability report for constant doses.
    Equilibria {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        u1: f64,
        #[arg(long)]
        u2: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tie c2 to c1 and fit them so one cell's optimal cost hits a target.
    Calibrate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        gamma1: f64,
        #[arg(long)]
        target: f64,
        #[arg(long, default_value_t = 1e-4)]
        lo: f64,
        #[arg(long, default_value_t = 1.0)]
        hi: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
}

fn load(path: Option<&Path>) -> Result<RunConfig, String> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?,
        None => String::new(),
    };
    let parsed = parse_config(&text).map_err(|e| e.to_string())?;
    for w in &parsed.warnings {
        eprintln!("{w}");
    }
    Ok(parsed.config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            scenario,
            alpha,
            gamma1,
            tf,
            dt,
            out,
            workers,
        } => {
            let mut cfg = match load(config.as_deref()) {
                Ok(c) => c,
                Err(e) => return config_error(&e),
            };
            if let Some(s) = scenario {
                cfg.scenario = s;
            }
            if let Some(a) = alpha {
                cfg.alpha_list = a;
            }
            if let Some(g) = gamma1 {
                cfg.gamma1_list = g;
            }
            if let Some(t) = tf {
                cfg.t_f = t;
            }
            if let Some(d) = dt {
                cfg.dt = d;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            if let Err(e) = cfg.validate() {
                return config_error(&e.to_string());
            }
            let result = match run_sweep(&cfg, &cfg.output_dir) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(PARTIAL_FAILURE);
                }
            };
            for c in &result.cells {
                match &c.outcome {
                    Ok(o) if o.converged => {
                        println!("alpha {} gamma1 {}: J = {:.6} ({} sweeps)", c.alpha, c.gamma1, o.cost, o.sweeps_used)
                    }
                    Ok(o) => eprintln!(
                        "alpha {} gamma1 {}: not converged after {} sweeps (J = {:.6})",
                        c.alpha, c.gamma1, o.sweeps_used, o.cost
                    ),
                    Err(e) => eprintln!("alpha {} gamma1 {}: failed: {e}", c.alpha, c.gamma1),
                }
            }
            if result.all_succeeded() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(PARTIAL_FAILURE)
            }
        }
        Command::Equilibria { config, u1, u2, out } => {
            let cfg = match load(config.as_deref()) {
                Ok(c) => c,
                Err(e) => return config_error(&e),
            };
            let mut text = String::new();
            for (alpha, gamma1) in cfg.cells() {
                match equilibrium_report(&cfg.cell_params(alpha, gamma1), u1, u2) {
                    Ok(section) => {
                        if !text.is_empty() {
                            text.push('\n');
                        }
                        text.push_str(&section);
                    }
                    Err(e) => return config_error(&e.to_string()),
                }
            }
            if let Err(e) = fs::create_dir_all(&out) {
                eprintln!("error: cannot create {}: {e}", out.display());
                return ExitCode::from(PARTIAL_FAILURE);
            }
            let path = out.join("report.txt");
            if let Err(e) = write_file(&path, &text) {
                eprintln!("error: {e}");
                return ExitCode::from(PARTIAL_FAILURE);
            }
            print!("{text}");
            ExitCode::SUCCESS
        }
        Command::Calibrate {
            config,
            alpha,
            gamma1,
            target,
            lo,
            hi,
            tol,
        } => {
            let cfg = match load(config.as_deref()) {
                Ok(c) => c,
                Err(e) => return config_error(&e),
            };
            match calibrate(&cfg, alpha, gamma1, target, lo, hi, tol) {
                Ok(c) => {
                    println!("c1 = c2 = {:e}, J = {} ({} evaluations)", c.c, c.cost, c.evaluations);
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(PARTIAL_FAILURE)
                }
            }
        }
    }
}

fn config_error(message: &str) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(CONFIG_ERROR)
}
