//! Implicit L1 time stepping.
//!
//! The forward solve finds, at every node `k >= 1`, the state `x_k` with
//!
//! ```text
//! c0 * x_k + history_k(x_0..x_{k-1}) - f(t_k, x_k) = 0
//! ```
//!
//! by damped Newton iteration on the `D x D` system `(c0 I - J) dx = -R`,
//! starting from `x_{k-1}`. The backward solve is linear: with the state frozen,
//! the adjoint at node `k` solves `(c0 I - J_k^T) lambda_k = b_k - history_k`,
//! marching from `lambda_n = 0` down to node 0.

use thiserror::Error;

use crate::fracops::{L1Stencil, StencilError};
use crate::linalg;
use crate::model::{AdjointPoint, ModelParams, ParamError, Rates, StatePoint};
use crate::optimizer::ControlSchedule;
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("Newton iteration did not converge at step {step} (residual {residual:e})")]
    NonConvergence { step: usize, residual: f64 },
    #[error("singular linear system at step {step}")]
    SingularSystem { step: usize },
    #[error("grid mismatch: expected {expected} samples, got {got}")]
    GridMismatch { expected: usize, got: usize },
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Stencil(#[from] StencilError),
    #[error(transparent)]
    Params(#[from] ParamError),
}

/// Uniform time grid `t_k = k * dt`, `k = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<T> {
    t_f: T,
    dt: T,
    n: usize,
}

impl<T: Real> Grid<T> {
    /// Grid with step `dt` on `[0, t_f]`. `t_f / dt` must be an integer
    /// (up to rounding) and at least 2.
    pub fn new(t_f: T, dt: T) -> Result<Self, SolverError> {
        if !(dt > T::zero()) || !(t_f > T::zero()) {
            return Err(SolverError::Grid(format!(
                "final time and step must be positive (t_f={t_f}, dt={dt})"
            )));
        }
        let ratio = t_f / dt;
        let n = ratio.round();
        if (ratio - n).abs() > T::lit(1e-9) * ratio.max(T::one()) {
            return Err(SolverError::Grid(format!(
                "t_f={t_f} is not a whole number of steps dt={dt}"
            )));
        }
        Self::from_steps(t_f, n.to_usize().unwrap_or(0))
    }

    /// Grid with `n` equal steps on `[0, t_f]`.
    pub fn from_steps(t_f: T, n: usize) -> Result<Self, SolverError> {
        if n < 2 {
            return Err(SolverError::Grid(format!("need at least 2 steps, got {n}")));
        }
        if !(t_f > T::zero()) {
            return Err(SolverError::Grid(format!("final time must be positive, got {t_f}")));
        }
        Ok(Self {
            t_f,
            dt: t_f / T::from_usize(n).unwrap(),
            n,
        })
    }

    pub fn t_f(&self) -> T {
        self.t_f
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Number of steps; there are `n + 1` nodes.
    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> usize {
        self.n + 1
    }

    pub fn time(&self, k: usize) -> T {
        if k == self.n {
            self.t_f
        } else {
            T::from_usize(k).unwrap() * self.dt
        }
    }

    pub fn times(&self) -> impl Iterator<Item = T> + '_ {
        (0..=self.n).map(|k| self.time(k))
    }

    pub fn stencil(&self, alpha: T) -> Result<L1Stencil<T>, StencilError> {
        L1Stencil::new(alpha, self.dt, self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig<T> {
    pub max_iter: usize,
    /// Absolute max-norm residual threshold.
    pub tol: T,
    /// Step shrink factor applied while the residual increases.
    pub damping: T,
}

impl<T: Real> Default for NewtonConfig<T> {
    fn default() -> Self {
        Self {
            max_iter: 25,
            tol: T::lit(1e-10),
            damping: T::lit(0.5),
        }
    }
}

impl<T: Real> NewtonConfig<T> {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.max_iter == 0 {
            return Err(SolverError::Input("newton max_iter must be >= 1".into()));
        }
        if !(self.tol > T::zero()) {
            return Err(SolverError::Input("newton tol must be positive".into()));
        }
        if !(self.damping > T::zero() && self.damping <= T::one()) {
            return Err(SolverError::Input("newton damping must lie in (0,1]".into()));
        }
        Ok(())
    }
}

/// A fractional system `D^alpha x = f(t, x)` sampled on grid nodes.
pub trait FractionalSystem<T: Real, const D: usize> {
    fn rhs(&self, k: usize, t: T, x: &[T; D]) -> [T; D];

    fn jacobian(&self, k: usize, t: T, x: &[T; D]) -> [[T; D]; D];

    /// Magnitude of the terms summed in each component of [`Self::rhs`];
    /// used to floor the Newton tolerance at the rounding level.
    fn rhs_scale(&self, k: usize, t: T, x: &[T; D]) -> [T; D] {
        self.rhs(k, t, x).map(|v| v.abs())
    }
}

fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Forward L1 solve of a generic fractional system from `x0`.
pub fn integrate<T, S, const D: usize>(
    system: &S,
    stencil: &L1Stencil<T>,
    grid: &Grid<T>,
    x0: [T; D],
    cfg: &NewtonConfig<T>,
) -> Result<Vec<[T; D]>, SolverError>
where
    T: Real,
    S: FractionalSystem<T, D>,
{
    cfg.validate()?;
    let n = grid.steps();
    if stencil.max_steps() < n {
        return Err(SolverError::GridMismatch {
            expected: n + 1,
            got: stencil.max_steps() + 1,
        });
    }
    let c0 = stencil.diag();
    let rounding = T::lit(64.0) * T::epsilon();
    let mut cols: Vec<Vec<T>> = (0..D)
        .map(|i| {
            let mut v = Vec::with_capacity(n + 1);
            v.push(x0[i]);
            v
        })
        .collect();
    let mut x = x0;
    for k in 1..=n {
        let t = grid.time(k);
        let mut hist = [T::zero(); D];
        for i in 0..D {
            hist[i] = stencil.left_history(&cols[i]);
        }
        let residual = |x: &[T; D]| -> [T; D] {
            let f = system.rhs(k, t, x);
            std::array::from_fn(|i| c0 * x[i] + hist[i] - f[i])
        };
        let floor = |x: &[T; D]| -> T {
            let s = system.rhs_scale(k, t, x);
            let m = (0..D).fold(T::zero(), |m, i| {
                m.max((c0 * x[i]).abs() + hist[i].abs() + s[i])
            });
            cfg.tol.max(rounding * m)
        };
        let mut r = residual(&x);
        let mut rn = max_abs(&r);
        let mut iter = 0;
        while rn > floor(&x) {
            if iter == cfg.max_iter || !rn.is_finite() {
                return Err(SolverError::NonConvergence {
                    step: k,
                    residual: rn.as_f64(),
                });
            }
            iter += 1;
            let j = system.jacobian(k, t, &x);
            let m: [[T; D]; D] = std::array::from_fn(|a| {
                std::array::from_fn(|b| {
                    let diag = if a == b { c0 } else { T::zero() };
                    diag - j[a][b]
                })
            });
            let dx = linalg::solve(m, r.map(|v| -v))
                .map_err(|_| SolverError::SingularSystem { step: k })?;
            let mut step = T::one();
            let mut trial: [T; D] = std::array::from_fn(|i| x[i] + dx[i]);
            let mut rt = residual(&trial);
            let mut tries = 0;
            while !(max_abs(&rt) < rn) && tries < 40 {
                step = step * cfg.damping;
                trial = std::array::from_fn(|i| x[i] + step * dx[i]);
                rt = residual(&trial);
                tries += 1;
            }
            x = trial;
            r = rt;
            rn = max_abs(&r);
        }
        for i in 0..D {
            cols[i].push(x[i]);
        }
    }
    Ok((0..=n).map(|k| std::array::from_fn(|i| cols[i][k])).collect())
}

/// Backward solve of the linear right-Caputo system
/// `R_k[lambda] = A_k^T lambda_k + b_k`, `lambda_n = 0`.
///
/// `coeffs(k)` returns `(A_k, b_k)` for node `k`.
pub fn integrate_adjoint<T, F, const D: usize>(
    stencil: &L1Stencil<T>,
    n: usize,
    coeffs: F,
) -> Result<Vec<[T; D]>, SolverError>
where
    T: Real,
    F: FnMut(usize) -> ([[T; D]; D], [T; D]),
{
    adjoint_sweep(stencil, n, false, coeffs)
}

/// Exact transpose of the forward L1 step equations.
///
/// Node `n` solves `(c0 I - A_n^T) lambda_n = b_n`; every earlier node
/// satisfies `R_k[lambda] - c0 w[n-k] lambda_n = A_k^T lambda_k + b_k`. The
/// extra term is the part of the transposed L1 matrix that the right
/// operator drops when `lambda_n != 0`.
pub fn integrate_adjoint_transposed<T, F, const D: usize>(
    stencil: &L1Stencil<T>,
    n: usize,
    coeffs: F,
) -> Result<Vec<[T; D]>, SolverError>
where
    T: Real,
    F: FnMut(usize) -> ([[T; D]; D], [T; D]),
{
    adjoint_sweep(stencil, n, true, coeffs)
}

fn adjoint_sweep<T, F, const D: usize>(
    stencil: &L1Stencil<T>,
    n: usize,
    terminal: bool,
    mut coeffs: F,
) -> Result<Vec<[T; D]>, SolverError>
where
    T: Real,
    F: FnMut(usize) -> ([[T; D]; D], [T; D]),
{
    if stencil.max_steps() < n {
        return Err(SolverError::GridMismatch {
            expected: n + 1,
            got: stencil.max_steps() + 1,
        });
    }
    let c0 = stencil.diag();
    let matrix = |a: &[[T; D]; D]| -> [[T; D]; D] {
        std::array::from_fn(|r| {
            std::array::from_fn(|c| {
                let diag = if r == c { c0 } else { T::zero() };
                diag - a[c][r]
            })
        })
    };
    let mut cols: Vec<Vec<T>> = vec![vec![T::zero(); n + 1]; D];
    let mut last = [T::zero(); D];
    if terminal {
        let (a, b) = coeffs(n);
        last = linalg::solve(matrix(&a), b).map_err(|_| SolverError::SingularSystem { step: n })?;
        for i in 0..D {
            cols[i][n] = last[i];
        }
    }
    for k in (0..n).rev() {
        let (a, b) = coeffs(k);
        let tail = c0 * stencil.weight(n - k);
        let rhs: [T; D] = std::array::from_fn(|i| {
            b[i] - stencil.right_history(&cols[i][k + 1..]) + tail * last[i]
        });
        let l = linalg::solve(matrix(&a), rhs).map_err(|_| SolverError::SingularSystem { step: k })?;
        for i in 0..D {
            cols[i][k] = l[i];
        }
    }
    Ok((0..=n).map(|k| std::array::from_fn(|i| cols[i][k])).collect())
}

/// State trajectory on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory<T> {
    pub grid: Grid<T>,
    pub points: Vec<StatePoint<T>>,
}

impl<T: Real> StateTrajectory<T> {
    /// Values of one state component (0 = T, ..., 4 = D2) over time.
    pub fn component(&self, c: usize) -> Vec<T> {
        self.points.iter().map(|p| p.to_array()[c]).collect()
    }

    pub fn last(&self) -> &StatePoint<T> {
        self.points.last().expect("trajectory is never empty")
    }
}

/// Adjoint trajectory on a grid; the terminal sample is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory<T> {
    pub grid: Grid<T>,
    pub points: Vec<AdjointPoint<T>>,
}

impl<T: Real> AdjointTrajectory<T> {
    pub fn component(&self, c: usize) -> Vec<T> {
        self.points.iter().map(|p| p.lambda[c]).collect()
    }
}

/// The cancer-obesity system driven by a sampled control schedule.
pub struct ControlledModel<'a, T> {
    pub rates: Rates<T>,
    pub controls: &'a ControlSchedule<T>,
}

impl<T: Real> FractionalSystem<T, 5> for ControlledModel<'_, T> {
    fn rhs(&self, k: usize, _t: T, x: &[T; 5]) -> [T; 5] {
        self.rates
            .state_rhs(&StatePoint::from_array(*x), &self.controls.points[k])
    }

    fn jacobian(&self, _k: usize, _t: T, x: &[T; 5]) -> [[T; 5]; 5] {
        self.rates.state_jacobian(&StatePoint::from_array(*x))
    }

    fn rhs_scale(&self, k: usize, _t: T, x: &[T; 5]) -> [T; 5] {
        self.rates
            .state_rhs_scale(&StatePoint::from_array(*x), &self.controls.points[k])
    }
}

/// Forward solve of the state system under `controls` from `x0`.
pub fn solve_state<T: Real>(
    params: &ModelParams<T>,
    controls: &ControlSchedule<T>,
    x0: &StatePoint<T>,
    grid: &Grid<T>,
    cfg: &NewtonConfig<T>,
) -> Result<StateTrajectory<T>, SolverError> {
    params.validate()?;
    if controls.points.len() != grid.nodes() {
        return Err(SolverError::GridMismatch {
            expected: grid.nodes(),
            got: controls.points.len(),
        });
    }
    if !x0.is_nonnegative() {
        return Err(SolverError::Input(format!("initial state must be >= 0: {x0:?}")));
    }
    let stencil = grid.stencil(params.alpha)?;
    let system = ControlledModel {
        rates: params.rates(),
        controls,
    };
    let raw = integrate(&system, &stencil, grid, x0.to_array(), cfg)?;
    Ok(StateTrajectory {
        grid: *grid,
        points: raw.into_iter().map(StatePoint::from_array).collect(),
    })
}

/// Backward solve of the adjoint system along `states`, with terminal value
/// zero and unit running-cost weight on the tumor population.
pub fn solve_adjoint<T: Real>(
    params: &ModelParams<T>,
    states: &StateTrajectory<T>,
) -> Result<AdjointTrajectory<T>, SolverError> {
    let mut e = [T::zero(); 5];
    e[0] = T::one();
    solve_adjoint_forced(params, states, |_| e)
}

/// Adjoint of the discretised problem itself: the exact gradient
/// companion of the L1 forward steps and the trapezoid cost.
///
/// Differs from [`solve_adjoint`] only through the terminal node, where the
/// half trapezoid weight on the tumor term forces
/// `lambda_n = (c0 I - J_n^T)^(-1) e_T / 2`. That value is `O(dt^alpha)`, so
/// both solves share the same continuous limit with `lambda(t_f) = 0`.
/// [`solve_adjoint`] is instead the exact companion of a cost that drops
/// the terminal tumor sample.
pub fn solve_discrete_adjoint<T: Real>(
    params: &ModelParams<T>,
    states: &StateTrajectory<T>,
) -> Result<AdjointTrajectory<T>, SolverError> {
    params.validate()?;
    let grid = states.grid;
    if states.points.len() != grid.nodes() {
        return Err(SolverError::GridMismatch {
            expected: grid.nodes(),
            got: states.points.len(),
        });
    }
    let stencil = grid.stencil(params.alpha)?;
    let rates = params.rates();
    let n = grid.steps();
    let raw = integrate_adjoint_transposed(&stencil, n, |k| {
        let mut e = [T::zero(); 5];
        e[0] = if k == n { T::lit(0.5) } else { T::one() };
        (rates.state_jacobian(&states.points[k]), e)
    })?;
    Ok(AdjointTrajectory {
        grid,
        points: raw.into_iter().map(AdjointPoint::new).collect(),
    })
}

/// Adjoint solve with an arbitrary per-node forcing `b_k` in place of the
/// running-cost gradient.
pub fn solve_adjoint_forced<T: Real>(
    params: &ModelParams<T>,
    states: &StateTrajectory<T>,
    forcing: impl Fn(usize) -> [T; 5],
) -> Result<AdjointTrajectory<T>, SolverError> {
    params.validate()?;
    let grid = states.grid;
    if states.points.len() != grid.nodes() {
        return Err(SolverError::GridMismatch {
            expected: grid.nodes(),
            got: states.points.len(),
        });
    }
    let stencil = grid.stencil(params.alpha)?;
    let rates = params.rates();
    let raw = integrate_adjoint(&stencil, grid.steps(), |k| {
        (rates.state_jacobian(&states.points[k]), forcing(k))
    })?;
    Ok(AdjointTrajectory {
        grid,
        points: raw.into_iter().map(AdjointPoint::new).collect(),
    })
}

/// Discrete residuals `R_k = D_k[x] - f(x_k, u_k)` for `k = 1..=n`.
pub fn state_residuals<T: Real>(
    params: &ModelParams<T>,
    controls: &ControlSchedule<T>,
    states: &StateTrajectory<T>,
) -> Result<Vec<[T; 5]>, SolverError> {
    let grid = states.grid;
    let stencil = grid.stencil(params.alpha)?;
    let rates = params.rates();
    let cols: Vec<Vec<T>> = (0..5).map(|c| states.component(c)).collect();
    (1..=grid.steps())
        .map(|k| {
            let f = rates.state_rhs(&states.points[k], &controls.points[k]);
            let mut r = [T::zero(); 5];
            for c in 0..5 {
                r[c] = stencil.caputo_left(&cols[c], k)? - f[c];
            }
            Ok(r)
        })
        .collect()
}
