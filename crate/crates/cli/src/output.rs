//! CSV writers. Numbers use 17 significant digits so every `f64` survives
//! a write/read round trip; lines end in LF.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use fracopt_core::{AdjointTrajectory, ControlSchedule, StateTrajectory};
use thiserror::Error;

pub const TRAJECTORY_HEADER: &str = "t,T,I,F,D1,D2,u1,u2,lambda1,lambda2,lambda3,lambda4,lambda5";

#[derive(Debug, Error)]
#[error("cannot write {}: {source}", path.display())]
pub struct OutputError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), OutputError> {
    fs::write(path, contents).map_err(|source| OutputError {
        path: path.to_path_buf(),
        source,
    })
}

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per grid node under [`TRAJECTORY_HEADER`].
pub fn trajectory_csv(
    states: &StateTrajectory,
    controls: &ControlSchedule,
    adjoints: &AdjointTrajectory,
) -> String {
    let grid = states.grid;
    let mut s = String::with_capacity(grid.nodes() * 13 * 24);
    s.push_str(TRAJECTORY_HEADER);
    s.push('\n');
    for k in 0..grid.nodes() {
        let x = states.points[k].to_array();
        let u = controls.points[k];
        let l = adjoints.points[k].lambda;
        let row: Vec<String> = std::iter::once(grid.time(k))
            .chain(x)
            .chain([u.u1, u.u2])
            .chain(l)
            .map(num)
            .collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

pub fn emit_trajectory_csv(
    states: &StateTrajectory,
    controls: &ControlSchedule,
    adjoints: &AdjointTrajectory,
    path: &Path,
) -> Result<(), OutputError> {
    write_file(path, &trajectory_csv(states, controls, adjoints))
}

/// File name of a sweep cell's trajectory.
pub fn cell_file_name(alpha: f64, gamma1: f64) -> String {
    format!("cell_{alpha}_{gamma1}.csv")
}
