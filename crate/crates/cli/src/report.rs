//! Plain-text equilibrium and stability report.

use std::fmt::Write as _;
use std::path::Path;

use fracopt_core::equilibria::{
    coexisting_analysis, coexisting_report, tumor_free_existence, tumor_free_stability, Condition,
    EquilibriumError, StabilityReport,
};
use fracopt_core::{ModelParams, StatePoint};
use num_complex::Complex;

use crate::output::{num, write_file, OutputError};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Output(#[from] OutputError),
}

fn complex(z: &Complex<f64>) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{} {sign} {}i", num(z.re), num(z.im.abs()))
}

fn point(x: &StatePoint) -> String {
    format!(
        "T = {}, I = {}, F = {}, D1 = {}, D2 = {}",
        num(x.tumor),
        num(x.immune),
        num(x.fat),
        num(x.chemo),
        num(x.immuno)
    )
}

fn conditions(s: &mut String, list: &[Condition<f64>]) {
    for c in list {
        let state = if c.holds { "holds" } else { "fails" };
        let _ = writeln!(s, "  condition {}: {state} (margin {})", c.name, num(c.margin));
    }
}

fn stability(s: &mut String, r: &StabilityReport<f64>) {
    let _ = writeln!(s, "  eigenvalues (numeric):");
    for z in &r.eigenvalues {
        let _ = writeln!(s, "    {}", complex(z));
    }
    if let Some(closed) = &r.closed_form {
        let _ = writeln!(s, "  eigenvalues (closed form):");
        for z in closed {
            let _ = writeln!(s, "    {}", complex(z));
        }
    }
    if let Some(gap) = r.closed_form_mismatch {
        let _ = writeln!(s, "  closed form vs numeric: {}", num(gap));
    }
    conditions(s, &r.conditions);
    if let Some(c) = &r.cubic {
        let _ = writeln!(s, "  cubic: c1 = {}, c2 = {}, c3 = {}", num(c.c1), num(c.c2), num(c.c3));
        let _ = writeln!(s, "  discriminant D(q) = {}", num(c.discriminant));
        match (c.branch, c.analytic_verdict) {
            (Some(b), Some(v)) => {
                let _ = writeln!(s, "  Hurwitz branch {b}: {v}");
            }
            _ => {
                let _ = writeln!(s, "  Hurwitz branch: none applies");
            }
        }
    }
    let _ = writeln!(s, "  Matignon margin: {}", num(r.matignon_margin));
    let _ = writeln!(s, "  verdict: {}", r.verdict);
}

/// Report for one parameter set under constant doses `(u1, u2)`.
pub fn equilibrium_report(params: &ModelParams, u1: f64, u2: f64) -> Result<String, EquilibriumError> {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "alpha = {}, gamma1 = {}, u1 = {u1}, u2 = {u2}",
        params.alpha, params.gamma1
    );

    let _ = writeln!(s, "\n[tumor-free]");
    match tumor_free_stability(params, u1, u2) {
        Ok(r) => {
            let _ = writeln!(s, "  point: {}", point(&r.equilibrium.point));
            let _ = writeln!(s, "  residual: {}", num(r.equilibrium.residual));
            stability(&mut s, &r);
        }
        Err(EquilibriumError::NonexistentEquilibrium { condition, .. }) => {
            conditions(&mut s, &tumor_free_existence(params, u1, u2));
            let _ = writeln!(s, "  no tumor-free equilibrium ({condition} fails)");
        }
        Err(e) => return Err(e),
    }

    let _ = writeln!(s, "\n[coexisting]");
    let a = coexisting_analysis(params, u1, u2)?;
    let m: Vec<String> = a.m.iter().map(|v| num(*v)).collect();
    let _ = writeln!(s, "  quartic m0..m4: {}", m.join(", "));
    match a.descartes_case {
        Some(case) => {
            let _ = writeln!(s, "  Descartes case ({case}), sign changes {}", a.sign_changes);
        }
        None => {
            let _ = writeln!(s, "  Descartes case: undetermined (zero coefficient), sign changes {}", a.sign_changes);
        }
    }
    let _ = writeln!(s, "  roots:");
    for z in &a.roots {
        let _ = writeln!(s, "    {}", complex(z));
    }
    for r in &a.rejected {
        let _ = writeln!(s, "  rejected I = {}: {}", num(r.immune), r.reason);
    }
    if a.descartes_case == Some(1) {
        let _ = writeln!(s, "  case (1): no coexisting equilibrium");
    } else if a.candidates.is_empty() {
        let _ = writeln!(s, "  no coexisting equilibrium");
    }
    for (i, c) in a.candidates.iter().enumerate() {
        let _ = writeln!(s, "  candidate {}: {}", i + 1, point(&c.point));
        let _ = writeln!(s, "  residual: {}", num(c.residual));
        stability(&mut s, &coexisting_report(c, params)?);
    }
    Ok(s)
}

pub fn emit_equilibrium_report(params: &ModelParams, u1: f64, u2: f64, path: &Path) -> Result<(), ReportError> {
    let text = equilibrium_report(params, u1, u2)?;
    write_file(path, &text)?;
    Ok(())
}
