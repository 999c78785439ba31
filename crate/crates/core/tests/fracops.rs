use fracopt_core::fracops::L1Stencil;
use fracopt_core::solver::{integrate, FractionalSystem, Grid, NewtonConfig};
use fracopt_core::Real;
use proptest::prelude::*;

fn gamma(x: f64) -> f64 {
    x.gamma_fn()
}

#[test]
fn left_operator_is_exact_on_linear_samples() {
    for alpha in [0.3, 0.5, 0.8, 0.95] {
        for dt in [0.25, 0.05] {
            let n = (10.0 / dt) as usize;
            let s = L1Stencil::new(alpha, dt, n).unwrap();
            let phi: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
            for k in 1..=n {
                let exact = phi[k].powf(1.0 - alpha) / gamma(2.0 - alpha);
                let got = s.caputo_left(&phi, k).unwrap();
                assert!((got - exact).abs() <= 1e-10 * exact, "alpha={alpha} dt={dt} k={k}");
            }
        }
    }
}

#[test]
fn right_operator_is_exact_on_linear_samples() {
    let (alpha, dt, n) = (0.7, 0.1, 50);
    let s = L1Stencil::new(alpha, dt, n).unwrap();
    let b = n as f64 * dt;
    let lam: Vec<f64> = (0..=n).map(|k| b - k as f64 * dt).collect();
    for k in 0..n {
        let exact = (b - k as f64 * dt).powf(1.0 - alpha) / gamma(2.0 - alpha);
        assert!((s.caputo_right(&lam, k).unwrap() - exact).abs() <= 1e-10 * exact);
    }
}

proptest! {
    #[test]
    fn operators_are_linear(
        alpha in 0.05f64..0.95,
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        phi in prop::collection::vec(-5.0f64..5.0, 12),
        psi in prop::collection::vec(-5.0f64..5.0, 12),
    ) {
        let s = L1Stencil::new(alpha, 0.3, 11).unwrap();
        let mix: Vec<f64> = phi.iter().zip(&psi).map(|(x, y)| a * x + b * y).collect();
        for k in 1..=11 {
            let lhs = s.caputo_left(&mix, k).unwrap();
            let rhs = a * s.caputo_left(&phi, k).unwrap() + b * s.caputo_left(&psi, k).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }
        for k in 0..11 {
            let lhs = s.caputo_right(&mix, k).unwrap();
            let rhs = a * s.caputo_right(&phi, k).unwrap() + b * s.caputo_right(&psi, k).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }
    }
}

/// `D^a x = 2 t^(2-a) / Gamma(3-a) + t^2 - x`, solved by `x = t^2`.
struct Manufactured {
    alpha: f64,
}

impl FractionalSystem<f64, 1> for Manufactured {
    fn rhs(&self, _k: usize, t: f64, x: &[f64; 1]) -> [f64; 1] {
        let a = self.alpha;
        [2.0 * t.powf(2.0 - a) / gamma(3.0 - a) + t * t - x[0]]
    }
    fn jacobian(&self, _k: usize, _t: f64, _x: &[f64; 1]) -> [[f64; 1]; 1] {
        [[-1.0]]
    }
}

fn max_error(alpha: f64, dt: f64) -> f64 {
    let grid = Grid::new(1.0, dt).unwrap();
    let stencil = grid.stencil(alpha).unwrap();
    let xs = integrate(&Manufactured { alpha }, &stencil, &grid, [0.0], &NewtonConfig::default()).unwrap();
    xs.iter()
        .enumerate()
        .map(|(k, x)| (x[0] - grid.time(k).powi(2)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn manufactured_solution_converges_at_l1_order() {
    for alpha in [0.5, 0.9] {
        let errs: Vec<f64> = [0.2, 0.1, 0.05, 0.025].iter().map(|&dt| max_error(alpha, dt)).collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order >= 2.0 - alpha - 0.2, "alpha={alpha}: errors {errs:?}");
        }
    }
}
