use fracopt_core::equilibria::tumor_free_equilibrium;
use fracopt_core::solver::{solve_adjoint_forced, solve_state, state_residuals};
use fracopt_core::{ControlSchedule, Grid, ModelParams, NewtonConfig, StatePoint};
use fracopt_core::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference() -> (ModelParams, Grid, NewtonConfig) {
    (ModelParams::table(0.9), Grid::new(120.0, 0.25).unwrap(), NewtonConfig::default())
}

#[test]
fn random_constant_doses_keep_states_nonnegative() {
    let (p, grid, cfg) = reference();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let u = ControlSchedule::constant(&grid, rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0));
        let tr = solve_state(&p, &u, &StatePoint::reference_initial(), &grid, &cfg).unwrap();
        for c in 0..5 {
            let col = tr.component(c);
            let top = col.iter().cloned().fold(0.0, f64::max);
            assert!(col.iter().all(|v| *v >= -1e-9 * top), "component {c}");
        }
    }
}

#[test]
fn discrete_equations_hold_along_the_trajectory() {
    let (p, grid, cfg) = reference();
    let u = ControlSchedule::constant(&grid, 0.5, 0.5);
    let tr = solve_state(&p, &u, &StatePoint::reference_initial(), &grid, &cfg).unwrap();
    let rates = p.rates();
    for (k, r) in state_residuals(&p, &u, &tr).unwrap().iter().enumerate() {
        let x = &tr.points[k + 1];
        let s = rates.state_rhs_scale(x, &u.points[k + 1]);
        for c in 0..5 {
            let scale = s[c] + x.to_array()[c].abs() + 1e-12;
            assert!(r[c].abs() <= 1e-9 * scale.max(1.0), "k={} c={c}: {}", k + 1, r[c]);
        }
    }
}

#[test]
fn tumor_free_equilibrium_is_a_fixed_point_of_the_solver() {
    let (p, grid, cfg) = reference();
    let (u1, u2) = (0.5, 0.5);
    let eq = tumor_free_equilibrium(&p, u1, u2).unwrap();
    let tr = solve_state(&p, &ControlSchedule::constant(&grid, u1, u2), &eq.point, &grid, &cfg).unwrap();
    let e = eq.point.to_array();
    for x in &tr.points {
        for (a, b) in x.to_array().iter().zip(e) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}

fn mittag_leffler(alpha: f64, z: f64) -> f64 {
    (0..200)
        .map(|k| z.powi(k) / (alpha * k as f64 + 1.0).gamma_fn())
        .take_while(|t| t.is_finite())
        .sum()
}

#[test]
fn drug_concentration_converges_to_mittag_leffler_solution() {
    // D' = u - g D has D(t) = u/g + (D0 - u/g) E_a(-g t^a).
    let p = ModelParams::table(0.8);
    let (u1, tf): (f64, f64) = (0.7, 8.0);
    let g = p.gamma1.powf(p.alpha);
    let d0 = StatePoint::reference_initial().chemo;
    let exact: f64 = u1 / g + (d0 - u1 / g) * mittag_leffler(p.alpha, -g * tf.powf(p.alpha));
    let cfg = NewtonConfig::default();
    let errs: Vec<f64> = [0.2, 0.1, 0.05, 0.025]
        .iter()
        .map(|&dt: &f64| {
            let grid = Grid::new(tf, dt).unwrap();
            let u = ControlSchedule::constant(&grid, u1, 0.0);
            let tr = solve_state(&p, &u, &StatePoint::reference_initial(), &grid, &cfg).unwrap();
            (tr.last().chemo - exact).abs()
        })
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[3] < 1e-3 * exact, "{errs:?}");
}

#[test]
fn adjoint_is_linear_in_its_forcing() {
    let p = ModelParams::table(0.9);
    let grid = Grid::new(20.0, 0.5).unwrap();
    let u = ControlSchedule::constant(&grid, 0.3, 0.6);
    let tr = solve_state(&p, &u, &StatePoint::reference_initial(), &grid, &NewtonConfig::default()).unwrap();
    let f = |k: usize| [1.0, 0.0, (k as f64).sin(), 0.0, 0.5];
    let g = |k: usize| [0.0, 2.0, 0.0, -1.0, (k as f64 * 0.3).cos()];
    let a = solve_adjoint_forced(&p, &tr, f).unwrap();
    let b = solve_adjoint_forced(&p, &tr, g).unwrap();
    let ab = solve_adjoint_forced(&p, &tr, |k| {
        let (x, y) = (f(k), g(k));
        std::array::from_fn(|i| 2.0 * x[i] - 3.0 * y[i])
    })
    .unwrap();
    for k in 0..grid.nodes() {
        for i in 0..5 {
            let e = 2.0 * a.points[k].lambda[i] - 3.0 * b.points[k].lambda[i];
            assert!((ab.points[k].lambda[i] - e).abs() <= 1e-9 * (1.0 + e.abs()));
        }
    }
    assert!(a.points[grid.steps()].lambda.iter().all(|v| *v == 0.0));
}
