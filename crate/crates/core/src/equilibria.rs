//! Steady states under constant doses and their fractional-order stability.
//!
//! With `u1`, `u2` held fixed the drug concentrations settle at
//! `D1 = u1 / gamma1^a` and `D2 = u2 / gamma2^a`. The tumor-free state then
//! has a closed form. A coexisting state (`T > 0`) is found by eliminating
//! `T` and `F`, which are affine in `I`, from the immune equation; what is
//! left is a quartic in `I`.
//!
//! Stability uses the Matignon test: the fractional system is locally
//! asymptotically stable at an equilibrium when every Jacobian eigenvalue
//! satisfies `|arg(lambda)| > alpha * pi / 2`.
//!
//! Two coefficients are easy to get wrong by hand, so the conventions are
//! spelled out here:
//!
//! * the `theta3` contribution to the linear quartic coefficient `m1` is
//!   `theta3 * k4^2`. A common slip writes `theta3 * k5^2`; that variant is
//!   kept in [`CoexistingAnalysis::m1_with_k5_squared`] for comparison only;
//! * the cubic factor of the characteristic polynomial is taken as the
//!   monic `det(lambda I - A)` of the tumor/immune/fat block, so that
//!   `c1 = -trace`, `c2 = sum of principal 2x2 minors`, `c3 = -det`. The
//!   Routh-Hurwitz branches below assume this convention;
//! * at the tumor-free state the fat level depends on the dose through
//!   `D1 = u1 / gamma1^a`, so the tumor eigenvalue carries `u1 / gamma1^a`
//!   on both its chemo-kill and its fat-growth terms.
//!
//! The immune-tumor competition rate in the immune balance is `xi2^a`; the
//! derivation's `k4` uses `k3` itself rather than a power of it.

use std::fmt;

use num_complex::Complex;
use thiserror::Error;

use crate::linalg;
use crate::model::{ControlPoint, ModelParams, ParamError, Rates, StatePoint};
use crate::scalar::Real;

/// Width of the band around zero Matignon margin that is reported as
/// marginal rather than stable or unstable.
pub const MARGINAL_TOLERANCE: f64 = 1e-9;

/// Largest accepted relative state residual for a coexisting candidate.
pub const CANDIDATE_RESIDUAL_TOLERANCE: f64 = 1e-6;

/// A quartic root counts as real when its imaginary part is below this
/// fraction of its modulus.
const REAL_ROOT_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EquilibriumKind {
    TumorFree,
    Coexisting,
}

impl fmt::Display for EquilibriumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EquilibriumKind::TumorFree => "tumor-free",
            EquilibriumKind::Coexisting => "coexisting",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    Unstable,
    Marginal,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::Marginal => "marginal",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriumError {
    #[error("doses must be non-negative and finite (u1={u1}, u2={u2})")]
    InvalidDose { u1: f64, u2: f64 },
    #[error("equilibrium does not exist: condition `{condition}` fails (margin {margin:e})")]
    NonexistentEquilibrium { condition: &'static str, margin: f64 },
    #[error("stability is marginal: Matignon margin {margin:e} is within {MARGINAL_TOLERANCE:e} of zero")]
    Marginal { margin: f64 },
    #[error("expected a {expected} equilibrium, got a {got} one")]
    WrongKind {
        expected: EquilibriumKind,
        got: EquilibriumKind,
    },
    #[error(transparent)]
    Params(#[from] ParamError),
}

/// A named scalar inequality `margin > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition<T> {
    pub name: &'static str,
    pub margin: T,
    pub holds: bool,
}

impl<T: Real> Condition<T> {
    fn positive(name: &'static str, margin: T) -> Self {
        Self {
            name,
            margin,
            holds: margin > T::zero(),
        }
    }

    fn flag(name: &'static str, holds: bool) -> Self {
        Self {
            name,
            margin: if holds { T::one() } else { -T::one() },
            holds,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumPoint<T> {
    pub kind: EquilibriumKind,
    pub point: StatePoint<T>,
    pub controls: ControlPoint<T>,
    /// Largest relative state residual, see [`relative_residual`].
    pub residual: T,
}

/// Cubic factor `lambda^3 + c1 lambda^2 + c2 lambda + c3` of the
/// characteristic polynomial at a coexisting state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicFactor {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub discriminant: f64,
    pub branch: Option<HurwitzBranch>,
    /// Conclusion of the applicable branch, `None` when no branch applies.
    pub analytic_verdict: Option<Verdict>,
}

/// Which Routh-Hurwitz style criterion applies to the cubic factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HurwitzBranch {
    /// Positive discriminant: stable iff `c1 > 0`, `c3 > 0`, `c1 c2 > c3`.
    DistinctReal,
    /// Negative discriminant, `c1, c2 >= 0`, `c3 > 0` and `alpha < 2/3`.
    SmallOrder,
    /// Negative discriminant, `c1, c2 > 0`, `c1 c2 = c3`.
    Balanced,
}

impl fmt::Display for HurwitzBranch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HurwitzBranch::DistinctReal => "(i) D(q) > 0",
            HurwitzBranch::SmallOrder => "(ii) D(q) < 0, alpha < 2/3",
            HurwitzBranch::Balanced => "(iii) D(q) < 0, c1 c2 = c3",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport<T> {
    pub equilibrium: EquilibriumPoint<T>,
    pub eigenvalues: [Complex<f64>; 5],
    /// Closed-form eigenvalues (tumor-free state only), in the order
    /// `-gamma1^a, -gamma2^a`, immune, fat, tumor.
    pub closed_form: Option<[Complex<f64>; 5]>,
    /// Largest relative gap between each closed-form eigenvalue and its
    /// nearest numeric eigenvalue.
    pub closed_form_mismatch: Option<f64>,
    pub matignon_margin: f64,
    pub verdict: Verdict,
    pub conditions: Vec<Condition<T>>,
    pub cubic: Option<CubicFactor>,
    pub descartes_case: Option<u8>,
}

impl<T: Real> StabilityReport<T> {
    pub fn condition(&self, name: &str) -> Option<&Condition<T>> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn is_stable(&self) -> bool {
        self.verdict == Verdict::Stable
    }
}

/// A real quartic root that did not give a coexisting equilibrium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rejected<T> {
    pub immune: T,
    pub reason: &'static str,
}

/// Everything computed on the way to the coexisting candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct CoexistingAnalysis<T> {
    pub controls: ControlPoint<T>,
    /// `k1..k7` at indices `0..7`.
    pub k: [T; 7],
    /// `theta1..theta7` at indices `0..7`.
    pub theta: [T; 7],
    /// Quartic coefficients `m0..m4` at indices `0..5`.
    pub m: [T; 5],
    /// `m1` with `theta3 * k5^2` in place of `theta3 * k4^2`.
    pub m1_with_k5_squared: T,
    /// Sign-pattern case `1..=8` of `(m1, m2, m3)`; `None` if any is zero.
    pub descartes_case: Option<u8>,
    /// Sign changes in `(m4, m3, m2, m1, m0)`, the Descartes bound on the
    /// number of positive roots.
    pub sign_changes: usize,
    pub roots: Vec<Complex<f64>>,
    pub real_roots: Vec<T>,
    /// Fat positivity requires `T` below this bound.
    pub tumor_bound: T,
    /// Tumor positivity requires `I` below this bound.
    pub immune_bound: T,
    pub candidates: Vec<EquilibriumPoint<T>>,
    pub rejected: Vec<Rejected<T>>,
}

/// Largest relative residual of the state equations at `x`: each component
/// of the right-hand side divided by the sum of the magnitudes of its terms.
/// Components whose terms all vanish contribute zero.
pub fn relative_residual<T: Real>(rates: &Rates<T>, x: &StatePoint<T>, u: &ControlPoint<T>) -> T {
    let f = rates.state_rhs(x, u);
    let s = rates.state_rhs_scale(x, u);
    f.iter().zip(s.iter()).fold(T::zero(), |m, (&fi, &si)| {
        let r = if si > T::zero() { fi.abs() / si } else { fi.abs() };
        m.max(r)
    })
}

fn check_dose<T: Real>(u1: T, u2: T) -> Result<ControlPoint<T>, EquilibriumError> {
    let ok = |v: T| v.is_finite() && v >= T::zero();
    if !(ok(u1) && ok(u2)) {
        return Err(EquilibriumError::InvalidDose {
            u1: u1.as_f64(),
            u2: u2.as_f64(),
        });
    }
    Ok(ControlPoint::new(u1, u2))
}

/// `min |arg(lambda_i)| - alpha pi / 2`.
pub fn matignon_margin(eigenvalues: &[Complex<f64>], alpha: f64) -> f64 {
    let min_arg = eigenvalues
        .iter()
        .map(|z| z.im.atan2(z.re).abs())
        .fold(f64::INFINITY, f64::min);
    min_arg - alpha * std::f64::consts::FRAC_PI_2
}

pub fn matignon_verdict(margin: f64) -> Verdict {
    if margin.abs() <= MARGINAL_TOLERANCE {
        Verdict::Marginal
    } else if margin > 0.0 {
        Verdict::Stable
    } else {
        Verdict::Unstable
    }
}

fn numeric_eigenvalues<T: Real>(jac: &[[T; 5]; 5]) -> [Complex<f64>; 5] {
    let m = nalgebra::DMatrix::from_fn(5, 5, |i, j| jac[i][j].as_f64());
    let ev = linalg::eigenvalues(&m);
    let mut out = [Complex::new(0.0, 0.0); 5];
    out.copy_from_slice(&ev[..5]);
    out
}

/// The two inequalities under which the tumor-free state has positive
/// immune and fat levels.
///
/// * `immune-positive`: `mu g gamma1 gamma2 + q2 g u1 gamma2 + q2 u1 u2
///   + u2 gamma1 mu - u2 gamma1 beta`
/// * `fat-positive`: `d gamma1 - q3 u1`
///
/// (every rate raised to `alpha`). Each margin is the left side minus the
/// right side.
pub fn tumor_free_existence<T: Real>(params: &ModelParams<T>, u1: T, u2: T) -> [Condition<T>; 2] {
    let k = params.rates();
    let immune = k.mu * k.g * k.gamma1 * k.gamma2
        + k.q2 * k.g * u1 * k.gamma2
        + k.q2 * u1 * u2
        + u2 * k.gamma1 * k.mu
        - u2 * k.gamma1 * k.beta;
    let fat = k.d * k.gamma1 - k.q3 * u1;
    [
        Condition::positive("immune-positive", immune),
        Condition::positive("fat-positive", fat),
    ]
}

/// Tumor-free steady state `(0, I, F, D1, D2)` under constant doses.
pub fn tumor_free_equilibrium<T: Real>(
    params: &ModelParams<T>,
    u1: T,
    u2: T,
) -> Result<EquilibriumPoint<T>, EquilibriumError> {
    params.validate()?;
    let controls = check_dose(u1, u2)?;
    for c in tumor_free_existence(params, u1, u2) {
        if !c.holds {
            return Err(EquilibriumError::NonexistentEquilibrium {
                condition: c.name,
                margin: c.margin.as_f64(),
            });
        }
    }
    let k = params.rates();
    let d1 = u1 / k.gamma1;
    let d2 = u2 / k.gamma2;
    let gd = k.g + d2;
    let immune = k.s * gd / ((k.mu + k.q2 * d1) * gd - k.beta * d2);
    let fat = T::one() / k.eps - k.q3 / (k.d * k.eps) * d1;
    let point = StatePoint::new(T::zero(), immune, fat, d1, d2);
    Ok(EquilibriumPoint {
        kind: EquilibriumKind::TumorFree,
        point,
        controls,
        residual: relative_residual(&k, &point, &controls),
    })
}

/// Stability of the tumor-free state: closed-form eigenvalues, the three
/// sufficient conditions, and a numeric eigensolve of the Jacobian.
pub fn tumor_free_stability<T: Real>(
    params: &ModelParams<T>,
    u1: T,
    u2: T,
) -> Result<StabilityReport<T>, EquilibriumError> {
    let eq = tumor_free_equilibrium(params, u1, u2)?;
    let k = params.rates();
    let i_hat = eq.point.immune;

    let lam_immune = k.beta * u2 / (k.gamma2 * k.g + u2) - (k.mu + k.q2 * u1 / k.gamma1);
    let lam_fat = k.q3 * u1 / k.gamma1 - k.d;
    let immune_threshold = k.r / k.xi1 + k.c1 / (k.xi1 * k.eps)
        - (k.c1 * k.q3 / (k.xi1 * k.d * k.eps) + k.q1 / k.xi1) * u1 / k.gamma1;
    let lam_tumor = k.xi1 * (immune_threshold - i_hat);
    let re = |v: T| Complex::new(v.as_f64(), 0.0);
    let closed = [re(-k.gamma1), re(-k.gamma2), re(lam_immune), re(lam_fat), re(lam_tumor)];

    let eigenvalues = numeric_eigenvalues(&k.state_jacobian(&eq.point));
    let mismatch = closed_form_gap(&closed, &eigenvalues);
    let margin = matignon_margin(&eigenvalues, k.alpha.as_f64());

    let mut conditions: Vec<Condition<T>> = tumor_free_existence(params, u1, u2).to_vec();
    conditions.push(Condition::positive("chemo-below-fat-growth", k.d * k.gamma1 - k.q3 * u1));
    conditions.push(Condition::positive(
        "immune-decay-dominates",
        (k.gamma1 * k.mu + k.q2 * u1) * (k.gamma2 * k.g + u2) - k.beta * k.gamma1 * u2,
    ));
    conditions.push(Condition::positive("immune-above-threshold", i_hat - immune_threshold));

    Ok(StabilityReport {
        equilibrium: eq,
        eigenvalues,
        closed_form: Some(closed),
        closed_form_mismatch: Some(mismatch),
        matignon_margin: margin,
        verdict: matignon_verdict(margin),
        conditions,
        cubic: None,
        descartes_case: None,
    })
}

/// Greedy nearest matching; returns the worst `|a - b| / max(|a|, |b|)`.
fn closed_form_gap(closed: &[Complex<f64>; 5], numeric: &[Complex<f64>; 5]) -> f64 {
    let mut used = [false; 5];
    let mut worst = 0.0_f64;
    for a in closed {
        let (j, d) = numeric
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, b)| (j, (a - b).norm()))
            .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        used[j] = true;
        let scale = a.norm().max(numeric[j].norm());
        if scale > 0.0 {
            worst = worst.max(d / scale);
        }
    }
    worst
}

/// Descartes sign-pattern case of `(m1, m2, m3)` for a quartic whose
/// leading and constant coefficients are negative.
pub fn descartes_case<T: Real>(m1: T, m2: T, m3: T) -> Option<u8> {
    let z = T::zero();
    if m1 == z || m2 == z || m3 == z {
        return None;
    }
    Some(match (m1 > z, m2 > z, m3 > z) {
        (false, false, false) => 1,
        (true, false, false) => 2,
        (false, true, false) => 3,
        (true, true, false) => 4,
        (false, false, true) => 5,
        (false, true, true) => 6,
        (true, true, true) => 7,
        (true, false, true) => 8,
    })
}

/// Upper bound on positive roots allowed by a Descartes case.
pub fn descartes_bound(case: u8) -> usize {
    match case {
        1 => 0,
        8 => 4,
        _ => 2,
    }
}

fn sign_changes<T: Real>(descending: &[T]) -> usize {
    let signs: Vec<bool> = descending
        .iter()
        .filter(|v| **v != T::zero())
        .map(|v| *v > T::zero())
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

fn eval_poly<T: Real>(m: &[T; 5], x: T) -> (T, T) {
    let mut p = T::zero();
    let mut dp = T::zero();
    for &a in m.iter().rev() {
        dp = dp * x + p;
        p = p * x + a;
    }
    (p, dp)
}

/// Quartic coefficients and the composite constants behind them.
fn quartic<T: Real>(k: &Rates<T>, d1: T, d2: T) -> ([T; 7], [T; 7], [T; 5], T) {
    let one = T::one();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let pr = k.p * k.r;
    let k1 = one / k.eps - k.q3 / (k.eps * k.d) * d1;
    let k2 = -k.c2 / (k.eps * k.d);
    let k3 = one / k.p - k.q1 / pr * d1;
    let k4 = (k3 * pr + k1 * k.c1) / (pr - k.c1 * k2);
    let k5 = -k.xi1 / (pr - k.c1 * k2);
    let k6 = k1 + k2 * k4;
    let k7 = k2 * k5;

    let gd = k.g + d2;
    let base = k.mu + k.q2 * d1;
    let t1 = gd * k.xi2;
    let t2 = gd * base - k.beta * d2;
    let t3 = gd * base - (k.rho * k.g + k.rho * d2 + k.beta * d2);
    let t4 = gd * k.xi2 * k.h;
    let t5 = -gd * k.s;
    let t6 = gd * (k.h * k.mu + k.q2 * k.h * d1) - k.beta * k.h * d2;
    let t7 = -gd * k.s * k.h;

    let m4 = t1 * k5 * (k5 * k5 + k7 * k7);
    let m3 = t1 * (three * k4 * k5 * k5 + k4 * k7 * k7 + two * k5 * k6 * k7) + t2 * k7 * k7 + t3 * k5 * k5;
    let m2 = t1 * (three * k4 * k4 * k5 + two * k4 * k6 * k7 + k5 * k6 * k6)
        + t2 * (two * k6 * k7)
        + t3 * (two * k4 * k5)
        + t4 * k5
        + t5 * (k5 * k5 + k7 * k7);
    let m1_rest = t1 * (k4 * k4 * k4 + k4 * k6 * k6)
        + t2 * k6 * k6
        + t4 * k4
        + t5 * (two * k4 * k5 + two * k6 * k7)
        + t6;
    let m1 = m1_rest + t3 * k4 * k4;
    let m1_slip = m1_rest + t3 * k5 * k5;
    let m0 = t5 * (k4 * k4 + k6 * k6) + t7;
    (
        [k1, k2, k3, k4, k5, k6, k7],
        [t1, t2, t3, t4, t5, t6, t7],
        [m0, m1, m2, m3, m4],
        m1_slip,
    )
}

/// Quartic in `I`, its roots, and the coexisting states they produce.
pub fn coexisting_analysis<T: Real>(
    params: &ModelParams<T>,
    u1: T,
    u2: T,
) -> Result<CoexistingAnalysis<T>, EquilibriumError> {
    params.validate()?;
    let controls = check_dose(u1, u2)?;
    let k = params.rates();
    let d1 = u1 / k.gamma1;
    let d2 = u2 / k.gamma2;
    let (kk, theta, m, m1_with_k5_squared) = quartic(&k, d1, d2);
    let [k1, k2, _, k4, k5, k6, k7] = kk;

    let coeffs: Vec<f64> = m.iter().map(|v| v.as_f64()).collect();
    let roots = linalg::polynomial_roots(&coeffs);
    let mut real_roots: Vec<T> = roots
        .iter()
        .filter(|z| z.im.abs() <= REAL_ROOT_TOLERANCE * z.norm())
        .map(|z| polish_real(&m, T::lit(z.re)))
        .collect();
    real_roots.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let tumor_bound = -k1 / k2;
    let immune_bound = -k4 / k5;
    let mut candidates = Vec::new();
    let mut rejected = Vec::new();
    for &immune in &real_roots {
        let tumor = k4 + k5 * immune;
        let fat = k6 + k7 * immune;
        let reason = if !(immune > T::zero()) {
            Some("immune level not positive")
        } else if !(immune < immune_bound) || !(tumor > T::zero()) {
            Some("tumor level not positive")
        } else if !(tumor < tumor_bound) || !(fat > T::zero()) {
            Some("fat level not positive")
        } else {
            None
        };
        if let Some(reason) = reason {
            rejected.push(Rejected { immune, reason });
            continue;
        }
        let point = refine(&k, StatePoint::new(tumor, immune, fat, d1, d2), &controls);
        let residual = relative_residual(&k, &point, &controls);
        if !(residual <= T::lit(CANDIDATE_RESIDUAL_TOLERANCE)) || !point.is_nonnegative() {
            rejected.push(Rejected {
                immune,
                reason: "residual certificate failed",
            });
            continue;
        }
        candidates.push(EquilibriumPoint {
            kind: EquilibriumKind::Coexisting,
            point,
            controls,
            residual,
        });
    }

    Ok(CoexistingAnalysis {
        controls,
        k: kk,
        theta,
        m,
        m1_with_k5_squared,
        descartes_case: descartes_case(m[1], m[2], m[3]),
        sign_changes: sign_changes(&[m[4], m[3], m[2], m[1], m[0]]),
        roots,
        real_roots,
        tumor_bound,
        immune_bound,
        candidates,
        rejected,
    })
}

/// Coexisting states (all components positive) under constant doses. An
/// empty list is a valid outcome.
pub fn coexisting_candidates<T: Real>(
    params: &ModelParams<T>,
    u1: T,
    u2: T,
) -> Result<Vec<EquilibriumPoint<T>>, EquilibriumError> {
    Ok(coexisting_analysis(params, u1, u2)?.candidates)
}

fn polish_real<T: Real>(m: &[T; 5], mut x: T) -> T {
    let (mut p, _) = eval_poly(m, x);
    for _ in 0..8 {
        let (_, dp) = eval_poly(m, x);
        if dp == T::zero() {
            break;
        }
        let next = x - p / dp;
        let (pn, _) = eval_poly(m, next);
        if !(pn.abs() < p.abs()) {
            break;
        }
        x = next;
        p = pn;
    }
    x
}

/// A few Newton steps on the tumor/immune/fat equations, kept only while
/// they lower the relative residual.
fn refine<T: Real>(k: &Rates<T>, mut x: StatePoint<T>, u: &ControlPoint<T>) -> StatePoint<T> {
    let mut best = relative_residual(k, &x, u);
    for _ in 0..6 {
        let f = k.state_rhs(&x, u);
        let j = k.state_jacobian(&x);
        let a = [
            [j[0][0], j[0][1], j[0][2]],
            [j[1][0], j[1][1], j[1][2]],
            [j[2][0], j[2][1], j[2][2]],
        ];
        let Ok(dx) = linalg::solve(a, [-f[0], -f[1], -f[2]]) else {
            break;
        };
        let mut next = x;
        next.tumor = x.tumor + dx[0];
        next.immune = x.immune + dx[1];
        next.fat = x.fat + dx[2];
        let r = relative_residual(k, &next, u);
        if !(r < best) {
            break;
        }
        x = next;
        best = r;
    }
    x
}

/// Cubic factor of the characteristic polynomial for the Jacobian block
/// `a` of the tumor, immune and fat equations.
pub fn cubic_factor(a: &[[f64; 3]; 3], alpha: f64) -> CubicFactor {
    let trace = a[0][0] + a[1][1] + a[2][2];
    let minors = a[0][0] * a[1][1] - a[0][1] * a[1][0] + a[0][0] * a[2][2] - a[0][2] * a[2][0]
        + a[1][1] * a[2][2]
        - a[1][2] * a[2][1];
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    cubic_from_coefficients(-trace, minors, -det, alpha)
}

/// Discriminant and Routh-Hurwitz branch for `l^3 + c1 l^2 + c2 l + c3`.
pub fn cubic_from_coefficients(c1: f64, c2: f64, c3: f64, alpha: f64) -> CubicFactor {
    let terms = [
        18.0 * c1 * c2 * c3,
        (c1 * c2) * (c1 * c2),
        -4.0 * c3 * c1 * c1 * c1,
        -4.0 * c2 * c2 * c2,
        -27.0 * c3 * c3,
    ];
    let discriminant: f64 = terms.iter().sum();
    let scale: f64 = terms.iter().map(|t| t.abs()).sum();
    let tiny = 1e-12 * scale;
    let close = |a: f64, b: f64| (a - b).abs() <= MARGINAL_TOLERANCE * a.abs().max(b.abs());

    let (branch, verdict) = if discriminant > tiny {
        let stable = c1 > 0.0 && c3 > 0.0 && c1 * c2 > c3;
        (
            Some(HurwitzBranch::DistinctReal),
            Some(if stable { Verdict::Stable } else { Verdict::Unstable }),
        )
    } else if discriminant < -tiny {
        if c1 > 0.0 && c2 > 0.0 && close(c1 * c2, c3) {
            (Some(HurwitzBranch::Balanced), Some(Verdict::Stable))
        } else if c1 >= 0.0 && c2 >= 0.0 && c3 > 0.0 && alpha < 2.0 / 3.0 {
            (Some(HurwitzBranch::SmallOrder), Some(Verdict::Stable))
        } else {
            (None, None)
        }
    } else {
        (None, None)
    };
    CubicFactor {
        c1,
        c2,
        c3,
        discriminant,
        branch,
        analytic_verdict: verdict,
    }
}

/// Full stability report for a coexisting state, whatever its verdict.
pub fn coexisting_report<T: Real>(
    eq: &EquilibriumPoint<T>,
    params: &ModelParams<T>,
) -> Result<StabilityReport<T>, EquilibriumError> {
    if eq.kind != EquilibriumKind::Coexisting {
        return Err(EquilibriumError::WrongKind {
            expected: EquilibriumKind::Coexisting,
            got: eq.kind,
        });
    }
    params.validate()?;
    let k = params.rates();
    let alpha = k.alpha.as_f64();
    let jac = k.state_jacobian(&eq.point);
    let eigenvalues = numeric_eigenvalues(&jac);
    let block = [
        [jac[0][0].as_f64(), jac[0][1].as_f64(), jac[0][2].as_f64()],
        [jac[1][0].as_f64(), jac[1][1].as_f64(), jac[1][2].as_f64()],
        [jac[2][0].as_f64(), jac[2][1].as_f64(), jac[2][2].as_f64()],
    ];
    let cubic = cubic_factor(&block, alpha);
    let margin = matignon_margin(&eigenvalues, alpha);

    let u = eq.controls;
    let analysis = coexisting_analysis(params, u.u1, u.u2)?;
    let x = eq.point;
    let lit = T::lit;
    let conditions = vec![
        Condition::positive("tumor-below-fat-bound", analysis.tumor_bound - x.tumor),
        Condition::positive("immune-below-tumor-bound", analysis.immune_bound - x.immune),
        Condition::flag(
            "descartes-allows-positive-root",
            analysis.descartes_case.map_or(false, |c| c >= 2),
        ),
        Condition::positive("discriminant-positive", lit(cubic.discriminant)),
        Condition::positive("c1-positive", lit(cubic.c1)),
        Condition::positive("c3-positive", lit(cubic.c3)),
        Condition::positive("c1c2-exceeds-c3", lit(cubic.c1 * cubic.c2 - cubic.c3)),
        Condition::positive("order-below-two-thirds", lit(2.0 / 3.0 - alpha)),
    ];

    Ok(StabilityReport {
        equilibrium: *eq,
        eigenvalues,
        closed_form: None,
        closed_form_mismatch: None,
        matignon_margin: margin,
        verdict: matignon_verdict(margin),
        conditions,
        cubic: Some(cubic),
        descartes_case: analysis.descartes_case,
    })
}

/// Stability of a coexisting state. A margin within
/// [`MARGINAL_TOLERANCE`] of zero is an error; use [`coexisting_report`] to
/// see the report anyway.
pub fn coexisting_stability<T: Real>(
    eq: &EquilibriumPoint<T>,
    params: &ModelParams<T>,
) -> Result<StabilityReport<T>, EquilibriumError> {
    let report = coexisting_report(eq, params)?;
    if report.verdict == Verdict::Marginal {
        return Err(EquilibriumError::Marginal {
            margin: report.matignon_margin,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn matignon_boundary_arithmetic() {
        let neg = [Complex::new(-1.0, 0.0)];
        for a in [0.1, 0.5, 0.99] {
            assert!((matignon_margin(&neg, a) - (PI - a * PI / 2.0)).abs() < 1e-15);
        }
        let imag = [Complex::new(0.0, 2.0), Complex::new(0.0, -2.0)];
        let m = matignon_margin(&imag, 0.9);
        assert!((m - 0.05 * PI).abs() < 1e-15);
        assert_eq!(matignon_verdict(m), Verdict::Stable);
        assert_eq!(matignon_verdict(5e-10), Verdict::Marginal);
        assert_eq!(matignon_verdict(-1e-3), Verdict::Unstable);
        let zero = [Complex::new(0.0, 0.0)];
        assert_eq!(matignon_verdict(matignon_margin(&zero, 0.5)), Verdict::Unstable);
    }

    #[test]
    fn descartes_table() {
        assert_eq!(descartes_case(-1.0, -1.0, -1.0), Some(1));
        assert_eq!(descartes_case(1.0, -1.0, 1.0), Some(8));
        assert_eq!(descartes_case(1.0, 1.0, 1.0), Some(7));
        assert_eq!(descartes_case(0.0, 1.0, 1.0), None);
        for (m1, m2, m3) in [(1.0, -1.0, -1.0), (-1.0, 1.0, 1.0), (1.0, 1.0, -1.0)] {
            let c = descartes_case(m1, m2, m3).unwrap();
            assert_eq!(sign_changes(&[-1.0, m3, m2, m1, -1.0]), descartes_bound(c));
        }
    }

    #[test]
    fn cubic_of_known_roots() {
        // roots -1, -2, -3: l^3 + 6 l^2 + 11 l + 6
        let a = [[-1.0, 0.0, 0.0], [5.0, -2.0, 0.0], [1.0, 7.0, -3.0]];
        let q = cubic_factor(&a, 0.9);
        assert_eq!((q.c1, q.c2, q.c3), (6.0, 11.0, 6.0));
        assert!((q.discriminant - 4.0).abs() < 1e-12);
        assert_eq!(q.branch, Some(HurwitzBranch::DistinctReal));
        assert_eq!(q.analytic_verdict, Some(Verdict::Stable));
        // roots +-i, -1: l^3 + l^2 + l + 1, c1 c2 = c3
        let b = cubic_from_coefficients(1.0, 1.0, 1.0, 0.9);
        assert_eq!(b.branch, Some(HurwitzBranch::Balanced));
        let c = cubic_from_coefficients(1.0, 3.0, 1.0, 0.5);
        assert!(c.discriminant < 0.0);
        assert_eq!(c.branch, Some(HurwitzBranch::SmallOrder));
        assert_eq!(cubic_from_coefficients(1.0, 3.0, 1.0, 0.7).branch, None);
    }

    #[test]
    fn tumor_free_without_doses() {
        let p = ModelParams::<f64>::table(0.9);
        let eq = tumor_free_equilibrium(&p, 0.0, 0.0).unwrap();
        let i_hat = 0.33_f64.powf(0.9) / 0.204_f64.powf(0.9);
        assert!((eq.point.immune - i_hat).abs() < 1e-13 * i_hat);
        // 0.33^0.9 / 0.204^0.9 at 30 digits
        assert!((eq.point.immune - 1.541_684_106_497_008).abs() < 1e-14);
        assert_eq!(eq.point.fat, 1.0 / p.eps.powf(0.9));
        assert_eq!((eq.point.chemo, eq.point.immuno), (0.0, 0.0));
        assert!(eq.residual <= 1e-10);
        let [a, b] = tumor_free_existence(&p, 0.0, 0.0);
        let k = p.rates();
        assert_eq!(a.margin, k.mu * k.g * k.gamma1 * k.gamma2);
        assert_eq!(b.margin, k.d * k.gamma1);
    }

    #[test]
    fn tumor_free_fat_boundary() {
        let p = ModelParams::<f64>::table(0.9);
        let k = p.rates();
        let u1: f64 = k.d * k.gamma1 / k.q3;
        let [_, fat] = tumor_free_existence(&p, u1, 0.0);
        assert!(fat.margin.abs() <= 1e-15 * (k.d * k.gamma1));
        let err = tumor_free_equilibrium(&p, 2.0 * u1, 0.0).unwrap_err();
        assert!(matches!(
            err,
            EquilibriumError::NonexistentEquilibrium {
                condition: "fat-positive",
                ..
            }
        ));
        assert!(matches!(
            tumor_free_equilibrium(&p, -0.1, 0.0),
            Err(EquilibriumError::InvalidDose { .. })
        ));
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let p = ModelParams::<f64>::table(0.9);
        let eq = tumor_free_equilibrium(&p, 0.1, 0.1).unwrap();
        assert!(matches!(
            coexisting_stability(&eq, &p),
            Err(EquilibriumError::WrongKind { .. })
        ));
    }
}
