//! `(alpha, gamma1)` sweeps for one treatment scenario.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fracopt_core::optimizer::{evaluate_cost, forward_backward_sweep};
use fracopt_core::solver::{solve_adjoint, solve_state};
use fracopt_core::{ControlSchedule, OptimalSolution, Scenario, SweepError};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::output::{cell_file_name, emit_trajectory_csv, num, write_file, OutputError};

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub cost: f64,
    pub sweeps_used: usize,
    pub converged: bool,
    pub psi: f64,
    pub trajectory: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub alpha: f64,
    pub gamma1: f64,
    pub scenario: Scenario,
    pub outcome: Result<CellOutcome, String>,
}

impl Cell {
    /// A cell that produced a cost from a converged (or uncontrolled) run.
    pub fn succeeded(&self) -> bool {
        matches!(&self.outcome, Ok(o) if o.converged)
    }

    pub fn cost(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|o| o.cost)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub alpha_list: Vec<f64>,
    pub gamma1_list: Vec<f64>,
    pub scenario: Scenario,
    /// Row-major in `(alpha, gamma1)`.
    pub cells: Vec<Cell>,
}

impl SweepResult {
    pub fn get(&self, alpha: f64, gamma1: f64) -> Option<&Cell> {
        self.cells.iter().find(|c| c.alpha == alpha && c.gamma1 == gamma1)
    }

    pub fn all_succeeded(&self) -> bool {
        self.cells.iter().all(Cell::succeeded)
    }

    /// Cost grid with rows `alpha` and columns `gamma1`; failed cells are
    /// left empty.
    pub fn table_csv(&self) -> String {
        let mut s = String::from("alpha");
        for g in &self.gamma1_list {
            let _ = write!(s, ",gamma1={g}");
        }
        s.push('\n');
        for a in &self.alpha_list {
            let _ = write!(s, "{a}");
            for g in &self.gamma1_list {
                let v = self.get(*a, *g).and_then(Cell::cost).map(num).unwrap_or_default();
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn cells_csv(&self) -> String {
        let mut s = String::from("alpha,gamma1,scenario,cost,sweeps_used,converged,psi,trajectory,error\n");
        for c in &self.cells {
            match &c.outcome {
                Ok(o) => {
                    let file = o.trajectory.file_name().map(|f| f.to_string_lossy().into_owned());
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{},{},",
                        c.alpha,
                        c.gamma1,
                        c.scenario,
                        num(o.cost),
                        o.sweeps_used,
                        o.converged,
                        num(o.psi),
                        file.unwrap_or_default()
                    );
                }
                Err(e) => {
                    let quoted = e.replace('"', "\"\"");
                    let _ = writeln!(s, "{},{},{},,,false,,,\"{quoted}\"", c.alpha, c.gamma1, c.scenario);
                }
            }
        }
        s
    }
}

/// Solves one cell: a plain forward solve for the uncontrolled scenario,
/// the forward-backward sweep otherwise. The flag is false when the sweep
/// ran out of iterations and the last iterate is returned.
pub fn solve_cell(cfg: &RunConfig, alpha: f64, gamma1: f64) -> Result<(OptimalSolution, bool), String> {
    let params = cfg.cell_params(alpha, gamma1);
    let grid = cfg.grid();
    if cfg.scenario == Scenario::Uncontrolled {
        let controls = ControlSchedule::zero(&grid);
        let states = solve_state(&params, &controls, &cfg.x0, &grid, &cfg.newton).map_err(|e| e.to_string())?;
        let adjoints = solve_adjoint(&params, &states).map_err(|e| e.to_string())?;
        let cost = evaluate_cost(&states, &controls, &params);
        let sol = OptimalSolution {
            controls,
            states,
            adjoints,
            cost,
            sweeps_used: 0,
            psi_final: 0.0,
        };
        return Ok((sol, true));
    }
    let mut sweep = cfg.sweep;
    sweep.scenario = cfg.scenario;
    let init = ControlSchedule::initial(&grid, cfg.scenario);
    match forward_backward_sweep(&params, &cfg.x0, &init, &grid, &sweep, &cfg.newton) {
        Ok(sol) => Ok((sol, true)),
        Err(SweepError::NotConverged { partial, .. }) => Ok((*partial, false)),
        Err(e) => Err(e.to_string()),
    }
}

/// Runs one cell and writes its trajectory into `dir`.
pub fn run_cell(cfg: &RunConfig, alpha: f64, gamma1: f64, dir: &Path) -> Result<CellOutcome, String> {
    let (sol, converged) = solve_cell(cfg, alpha, gamma1)?;
    let path = dir.join(cell_file_name(alpha, gamma1));
    emit_trajectory_csv(&sol.states, &sol.controls, &sol.adjoints, &path).map_err(|e| e.to_string())?;
    Ok(CellOutcome {
        cost: sol.cost,
        sweeps_used: sol.sweeps_used,
        converged,
        psi: sol.psi_final,
        trajectory: path,
    })
}

/// Runs every cell of `cfg` on `cfg.workers` threads and writes the
/// trajectories, `table.csv` and `cells.csv` into `dir`.
pub fn run_sweep(cfg: &RunConfig, dir: &Path) -> Result<SweepResult, OutputError> {
    fs::create_dir_all(dir).map_err(|source| OutputError {
        path: dir.to_path_buf(),
        source,
    })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .expect("thread pool");
    let cells: Vec<Cell> = pool.install(|| {
        cfg.cells()
            .into_par_iter()
            .map(|(alpha, gamma1)| Cell {
                alpha,
                gamma1,
                scenario: cfg.scenario,
                outcome: run_cell(cfg, alpha, gamma1, dir),
            })
            .collect()
    });
    let result = SweepResult {
        alpha_list: cfg.alpha_list.clone(),
        gamma1_list: cfg.gamma1_list.clone(),
        scenario: cfg.scenario,
        cells,
    };
    write_file(&dir.join("table.csv"), &result.table_csv())?;
    write_file(&dir.join("cells.csv"), &result.cells_csv())?;
    Ok(result)
}
