//! Single-cell calibration of the fat-competition rates.
//!
//! `c1` and `c2` are tied (`c2 = c1`) and bisected on a log scale until the
//! optimal cost of one sweep cell hits a target value.

use crate::config::RunConfig;
use crate::sweep::solve_cell;

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub c: f64,
    pub cost: f64,
    pub evaluations: usize,
}

/// Bisects `log c` on `[lo, hi]` until the bracket is narrower than
/// `rel_tol` relative. The cost must be continuous in `c` and the target
/// bracketed by the endpoint costs.
pub fn calibrate(
    cfg: &RunConfig,
    alpha: f64,
    gamma1: f64,
    target: f64,
    lo: f64,
    hi: f64,
    rel_tol: f64,
) -> Result<Calibration, String> {
    if !(lo > 0.0 && hi > lo) {
        return Err(format!("invalid bracket [{lo}, {hi}]"));
    }
    let mut evaluations = 0;
    let mut cost_at = |c: f64| -> Result<f64, String> {
        let mut cfg = cfg.clone();
        cfg.params.c1 = c;
        cfg.params.c2 = c;
        evaluations += 1;
        let (sol, converged) = solve_cell(&cfg, alpha, gamma1)?;
        if !converged {
            return Err(format!("sweep did not converge at c = {c}"));
        }
        Ok(sol.cost - target)
    };
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let (fa, fb) = (cost_at(lo)?, cost_at(hi)?);
    if fa * fb > 0.0 {
        return Err(format!(
            "target {target} not bracketed: costs {} and {} at c = {lo} and {hi}",
            fa + target,
            fb + target
        ));
    }
    let mut fa = fa;
    while (b - a) > rel_tol {
        let mid = 0.5 * (a + b);
        let fm = cost_at(mid.exp())?;
        if fm == 0.0 {
            a = mid;
            b = mid;
            break;
        }
        if fa * fm < 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    let c = (0.5 * (a + b)).exp();
    let cost = cost_at(c)? + target;
    Ok(Calibration { c, cost, evaluations })
}
