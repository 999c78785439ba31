//! Projected forward-backward sweep for the dosing problem
//!
//! ```text
//! minimise J(u) = int_0^tf T + omega1 u1^2 + omega2 u2^2 dt,   u in [0,1]^2
//! ```
//!
//! Each sweep solves the state forward, the adjoint backward, projects
//! `-lambda_{4,5} / (2 omega_{1,2})` onto `[0, 1]` and blends the projection
//! with the previous controls. Iteration stops once every state, control and
//! adjoint component changed by at most `delta` times its own 1-norm.
//! The returned controls are the plain projection of the last adjoint, with
//! states, adjoint and cost recomputed for them, so the optimality condition
//! holds node by node instead of only up to the blending lag.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{ControlPoint, ModelParams, StatePoint};
use crate::scalar::Real;
use crate::solver::{
    solve_adjoint, solve_state, AdjointTrajectory, Grid, NewtonConfig, SolverError,
    StateTrajectory,
};

/// Which dose channels a treatment strategy may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    Uncontrolled,
    Immunotherapy,
    Chemotherapy,
    Combined,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Uncontrolled,
        Scenario::Immunotherapy,
        Scenario::Chemotherapy,
        Scenario::Combined,
    ];

    pub fn chemo_active(self) -> bool {
        matches!(self, Scenario::Chemotherapy | Scenario::Combined)
    }

    pub fn immuno_active(self) -> bool {
        matches!(self, Scenario::Immunotherapy | Scenario::Combined)
    }

    /// Short name used in configuration files and on the command line.
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Uncontrolled => "none",
            Scenario::Immunotherapy => "immuno",
            Scenario::Chemotherapy => "chemo",
            Scenario::Combined => "combined",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown scenario `{0}` (expected none, immuno, chemo or combined)")]
pub struct UnknownScenario(pub String);

impl FromStr for Scenario {
    type Err = UnknownScenario;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "uncontrolled" => Ok(Scenario::Uncontrolled),
            "immuno" | "immunotherapy" => Ok(Scenario::Immunotherapy),
            "chemo" | "chemotherapy" => Ok(Scenario::Chemotherapy),
            "combined" | "both" => Ok(Scenario::Combined),
            _ => Err(UnknownScenario(s.to_string())),
        }
    }
}

/// Dose samples on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule<T> {
    pub grid: Grid<T>,
    pub points: Vec<ControlPoint<T>>,
}

impl<T: Real> ControlSchedule<T> {
    /// Constant doses. Panics if they are not admissible.
    pub fn constant(grid: &Grid<T>, u1: T, u2: T) -> Self {
        let u = ControlPoint::new(u1, u2);
        assert!(u.is_admissible(), "doses must lie in [0,1]: {u:?}");
        Self {
            grid: *grid,
            points: vec![u; grid.nodes()],
        }
    }

    pub fn zero(grid: &Grid<T>) -> Self {
        Self::constant(grid, T::zero(), T::zero())
    }

    pub fn from_points(grid: &Grid<T>, points: Vec<ControlPoint<T>>) -> Result<Self, SolverError> {
        if points.len() != grid.nodes() {
            return Err(SolverError::GridMismatch {
                expected: grid.nodes(),
                got: points.len(),
            });
        }
        if let Some((k, u)) = points.iter().enumerate().find(|(_, u)| !u.is_admissible()) {
            return Err(SolverError::Input(format!("dose at node {k} outside [0,1]: {u:?}")));
        }
        Ok(Self { grid: *grid, points })
    }

    /// Constant 0.5 on the channels `scenario` uses, zero elsewhere.
    pub fn initial(grid: &Grid<T>, scenario: Scenario) -> Self {
        scenario_controls(scenario, &Self::constant(grid, T::lit(0.5), T::lit(0.5)))
    }

    pub fn u1(&self) -> Vec<T> {
        self.points.iter().map(|u| u.u1).collect()
    }

    pub fn u2(&self) -> Vec<T> {
        self.points.iter().map(|u| u.u2).collect()
    }

    pub fn is_admissible(&self) -> bool {
        self.points.iter().all(ControlPoint::is_admissible)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig<T> {
    /// Relative change threshold of the stopping test.
    pub delta: T,
    pub max_sweeps: usize,
    /// Weight of the fresh projection in the control update; 1 replaces the
    /// controls outright.
    pub relaxation: T,
    pub scenario: Scenario,
}

impl<T: Real> Default for SweepConfig<T> {
    fn default() -> Self {
        Self {
            delta: T::lit(0.001),
            max_sweeps: 500,
            relaxation: T::lit(0.5),
            scenario: Scenario::Combined,
        }
    }
}

impl<T: Real> SweepConfig<T> {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.delta > T::zero()) {
            return Err("delta must be positive".into());
        }
        if self.max_sweeps == 0 {
            return Err("max_sweeps must be >= 1".into());
        }
        if !(self.relaxation > T::zero() && self.relaxation <= T::one()) {
            return Err("relaxation must lie in (0,1]".into());
        }
        Ok(())
    }
}

/// Converged (or best available) control/state/adjoint triple.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalSolution<T> {
    pub controls: ControlSchedule<T>,
    pub states: StateTrajectory<T>,
    pub adjoints: AdjointTrajectory<T>,
    pub cost: T,
    pub sweeps_used: usize,
    pub psi_final: T,
}

#[derive(Debug, Error)]
pub enum SweepError<T: Real> {
    #[error("sweep did not converge after {sweeps} sweeps (psi = {psi:e})")]
    NotConverged {
        sweeps: usize,
        psi: f64,
        partial: Box<OptimalSolution<T>>,
    },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("invalid sweep configuration: {0}")]
    Config(String),
}

impl<T: Real> SweepError<T> {
    /// The last iterate, when the sweep ran out of iterations.
    pub fn partial(&self) -> Option<&OptimalSolution<T>> {
        match self {
            SweepError::NotConverged { partial, .. } => Some(partial),
            _ => None,
        }
    }
}

/// Pointwise minimiser of the Hamiltonian over `[0,1]^2`.
pub fn project_controls<T: Real>(
    adjoints: &AdjointTrajectory<T>,
    params: &ModelParams<T>,
) -> ControlSchedule<T> {
    let two = T::lit(2.0);
    let clamp = |v: T| v.max(T::zero()).min(T::one());
    ControlSchedule {
        grid: adjoints.grid,
        points: adjoints
            .points
            .iter()
            .map(|l| {
                ControlPoint::new(
                    clamp(-l.lambda[3] / (two * params.omega1)),
                    clamp(-l.lambda[4] / (two * params.omega2)),
                )
            })
            .collect(),
    }
}

/// Zeroes the dose channels `kind` does not use.
pub fn scenario_controls<T: Real>(kind: Scenario, schedule: &ControlSchedule<T>) -> ControlSchedule<T> {
    let keep1 = kind.chemo_active();
    let keep2 = kind.immuno_active();
    ControlSchedule {
        grid: schedule.grid,
        points: schedule
            .points
            .iter()
            .map(|u| {
                ControlPoint::new(
                    if keep1 { u.u1 } else { T::zero() },
                    if keep2 { u.u2 } else { T::zero() },
                )
            })
            .collect(),
    }
}

/// Composite trapezoid rule on `T + omega1 u1^2 + omega2 u2^2`.
pub fn evaluate_cost<T: Real>(
    states: &StateTrajectory<T>,
    controls: &ControlSchedule<T>,
    params: &ModelParams<T>,
) -> T {
    let rates = params.rates();
    let n = states.points.len();
    let half = T::lit(0.5);
    let sum = states
        .points
        .iter()
        .zip(&controls.points)
        .enumerate()
        .map(|(k, (x, u))| {
            let w = if k == 0 || k + 1 == n { half } else { T::one() };
            w * rates.cost_integrand(x, u)
        })
        .sum::<T>();
    sum * states.grid.dt()
}

/// Gradient of the discrete cost with respect to each control sample,
/// computed from the adjoint. Entry `k` is `(dJ/du1_k, dJ/du2_k)`.
///
/// Node 0 controls do not enter the discrete dynamics, and the terminal
/// adjoint is pinned at zero, so only interior entries carry the full
/// sensitivity.
pub fn control_gradient<T: Real>(
    controls: &ControlSchedule<T>,
    adjoints: &AdjointTrajectory<T>,
    params: &ModelParams<T>,
) -> Vec<[T; 2]> {
    let dt = controls.grid.dt();
    let n = controls.points.len();
    let two = T::lit(2.0);
    controls
        .points
        .iter()
        .zip(&adjoints.points)
        .enumerate()
        .map(|(k, (u, l))| {
            let w = if k == 0 || k + 1 == n { T::lit(0.5) } else { T::one() };
            let (l4, l5) = if k == 0 {
                (T::zero(), T::zero())
            } else {
                (l.lambda[3], l.lambda[4])
            };
            [
                dt * (w * two * params.omega1 * u.u1 + l4),
                dt * (w * two * params.omega2 * u.u2 + l5),
            ]
        })
        .collect()
}

fn l1_norm<T: Real>(v: impl Iterator<Item = T>) -> T {
    v.map(|x| x.abs()).sum()
}

fn l1_diff<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| (*x - *y).abs()).sum()
}

/// `min_i (delta * |v_i| - |v_i - old_i|)` over the component series.
fn convergence_margin<T: Real>(delta: T, new: &[Vec<T>], old: &[Vec<T>]) -> T {
    new.iter()
        .zip(old)
        .map(|(n, o)| delta * l1_norm(n.iter().copied()) - l1_diff(n, o))
        .fold(T::infinity(), |m, v| m.min(v))
}

fn series<T: Real>(
    states: &StateTrajectory<T>,
    controls: &ControlSchedule<T>,
    adjoints: &AdjointTrajectory<T>,
) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = (0..5).map(|c| states.component(c)).collect();
    out.push(controls.u1());
    out.push(controls.u2());
    out.extend((0..5).map(|c| adjoints.component(c)));
    out
}

/// Runs the projected forward-backward sweep from `u_init`.
///
/// Channels disabled by `cfg.scenario` are held at zero throughout. On
/// hitting `cfg.max_sweeps` the last iterate is returned inside
/// [`SweepError::NotConverged`].
pub fn forward_backward_sweep<T: Real>(
    params: &ModelParams<T>,
    x0: &StatePoint<T>,
    u_init: &ControlSchedule<T>,
    grid: &Grid<T>,
    cfg: &SweepConfig<T>,
    newton: &NewtonConfig<T>,
) -> Result<OptimalSolution<T>, SweepError<T>> {
    cfg.validate().map_err(SweepError::Config)?;
    if !u_init.is_admissible() {
        return Err(SweepError::Config("initial controls must lie in [0,1]".into()));
    }
    let mut controls = scenario_controls(cfg.scenario, u_init);
    let zero_series = |len: usize| vec![vec![T::zero(); len]; 12];
    let mut old = zero_series(grid.nodes());
    old[5] = controls.u1();
    old[6] = controls.u2();
    let relax = cfg.relaxation;
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let states = solve_state(params, &controls, x0, grid, newton)?;
        let adjoints = solve_adjoint(params, &states)?;
        let projected = scenario_controls(cfg.scenario, &project_controls(&adjoints, params));
        let updated = ControlSchedule {
            grid: *grid,
            points: projected
                .points
                .iter()
                .zip(&controls.points)
                .map(|(p, o)| {
                    ControlPoint::new(
                        relax * p.u1 + (T::one() - relax) * o.u1,
                        relax * p.u2 + (T::one() - relax) * o.u2,
                    )
                })
                .collect(),
        };
        let new = series(&states, &updated, &adjoints);
        let psi = convergence_margin(cfg.delta, &new, &old);
        if psi >= T::zero() {
            // Relaxation only reaches a clamped bound geometrically, so the
            // converged control is taken from the projection itself and the
            // state, adjoint and cost are recomputed to match it.
            let states = solve_state(params, &projected, x0, grid, newton)?;
            let adjoints = solve_adjoint(params, &states)?;
            let cost = evaluate_cost(&states, &projected, params);
            return Ok(OptimalSolution {
                controls: projected,
                states,
                adjoints,
                cost,
                sweeps_used: sweeps,
                psi_final: psi,
            });
        }
        let cost = evaluate_cost(&states, &controls, params);
        let solution = OptimalSolution {
            controls,
            states,
            adjoints,
            cost,
            sweeps_used: sweeps,
            psi_final: psi,
        };
        if sweeps >= cfg.max_sweeps {
            return Err(SweepError::NotConverged {
                sweeps,
                psi: psi.as_f64(),
                partial: Box::new(solution),
            });
        }
        old = new;
        controls = updated;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AdjointPoint;

    fn grid() -> Grid<f64> {
        Grid::new(120.0, 0.25).unwrap()
    }

    fn adj(grid: &Grid<f64>, l4: f64, l5: f64) -> AdjointTrajectory<f64> {
        AdjointTrajectory {
            grid: *grid,
            points: vec![AdjointPoint::new([0.0, 0.0, 0.0, l4, l5]); grid.nodes()],
        }
    }

    #[test]
    fn projection_cases() {
        let g = Grid::new(1.0, 0.5).unwrap();
        let p = ModelParams::<f64>::default();
        let u = project_controls(&adj(&g, 0.0, -1.0), &p);
        assert_eq!(u.points[0], ControlPoint::new(0.0, 0.25));
        let u = project_controls(&adj(&g, -4.0, 3.0), &p);
        assert_eq!(u.points[1], ControlPoint::new(1.0, 0.0));
    }

    #[test]
    fn cost_of_constant_profiles() {
        let g = grid();
        let p = ModelParams::<f64>::default();
        let states = |t: f64| StateTrajectory {
            grid: g,
            points: vec![StatePoint::new(t, 0.0, 0.0, 0.0, 0.0); g.nodes()],
        };
        let c = evaluate_cost(&states(2.0), &ControlSchedule::zero(&g), &p);
        assert!((c - 240.0).abs() < 1e-10);
        let c = evaluate_cost(&states(0.0), &ControlSchedule::constant(&g, 1.0, 0.0), &p);
        assert!((c - 120.0).abs() < 1e-10);
    }

    #[test]
    fn cost_is_exact_on_piecewise_linear_tumor() {
        // T(t) = 1 + t on [0, 60], 61 - (t - 60)/2 afterwards; integral by hand.
        let g = grid();
        let p = ModelParams::<f64>::default();
        let tf = |t: f64| if t <= 60.0 { 1.0 + t } else { 61.0 - 0.5 * (t - 60.0) };
        let states = StateTrajectory {
            grid: g,
            points: g.times().map(|t| StatePoint::new(tf(t), 0.0, 0.0, 0.0, 0.0)).collect(),
        };
        let exact = (60.0 + 0.5 * 60.0 * 60.0) + (61.0 * 60.0 - 0.25 * 60.0 * 60.0);
        let c = evaluate_cost(&states, &ControlSchedule::zero(&g), &p);
        assert!((c - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn scenario_masks() {
        let g = Grid::new(1.0, 0.25).unwrap();
        let base = ControlSchedule::constant(&g, 0.3, 0.6);
        let none = scenario_controls(Scenario::Uncontrolled, &base);
        assert!(none.points.iter().all(|u| *u == ControlPoint::zero()));
        let im = scenario_controls(Scenario::Immunotherapy, &base);
        assert!(im.points.iter().all(|u| u.u1 == 0.0 && u.u2 == 0.6));
        let ch = scenario_controls(Scenario::Chemotherapy, &base);
        assert!(ch.points.iter().all(|u| u.u1 == 0.3 && u.u2 == 0.0));
        assert_eq!(scenario_controls(Scenario::Combined, &base), base);
    }

    #[test]
    fn scenario_names() {
        for s in Scenario::ALL {
            assert_eq!(s.as_str().parse::<Scenario>().unwrap(), s);
        }
        assert_eq!("Chemotherapy".parse::<Scenario>().unwrap(), Scenario::Chemotherapy);
        assert!("radio".parse::<Scenario>().is_err());
    }

    #[test]
    fn sweep_config_validation() {
        let mut c = SweepConfig::<f64>::default();
        assert_eq!(c.delta, 0.001);
        assert_eq!(c.max_sweeps, 500);
        c.relaxation = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn schedule_rejects_inadmissible_points() {
        let g = Grid::new(1.0, 0.5).unwrap();
        let pts = vec![ControlPoint::new(0.0, 0.0), ControlPoint::new(1.2, 0.0), ControlPoint::zero()];
        assert!(ControlSchedule::from_points(&g, pts).is_err());
        assert!(ControlSchedule::from_points(&g, vec![ControlPoint::zero()]).is_err());
    }

    #[test]
    fn margin_matches_definition() {
        let new = vec![vec![1.0, 2.0], vec![0.0, 0.0]];
        let old = vec![vec![1.0, 1.99], vec![0.0, 0.0]];
        let m: f64 = convergence_margin(0.01, &new, &old);
        assert!((m - 0.0).abs() < 1e-12);
    }
}
