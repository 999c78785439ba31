use fracopt_core::optimizer::{control_gradient, evaluate_cost, forward_backward_sweep};
use fracopt_core::solver::{solve_adjoint, solve_discrete_adjoint, solve_state};
use fracopt_core::{ControlPoint, ControlSchedule, Grid, ModelParams, NewtonConfig, Scenario, StatePoint, SweepConfig};

fn cost_of(p: &ModelParams, grid: &Grid, u: &ControlSchedule, drop_terminal_tumor: bool) -> f64 {
    let x0 = StatePoint::reference_initial();
    let tr = solve_state(p, u, &x0, grid, &NewtonConfig::default()).unwrap();
    let j = evaluate_cost(&tr, u, p);
    if drop_terminal_tumor {
        j - 0.5 * grid.dt() * tr.points.last().unwrap().tumor
    } else {
        j
    }
}

fn wavy_schedule(grid: &Grid) -> ControlSchedule {
    let points = (0..grid.nodes())
        .map(|k| ControlPoint::new(0.3 + 0.2 * (0.2 * k as f64).sin(), 0.5 + 0.1 * (0.1 * k as f64).cos()))
        .collect();
    ControlSchedule::from_points(grid, points).unwrap()
}

fn central_difference(p: &ModelParams, grid: &Grid, u: &ControlSchedule, k: usize, c: usize, drop: bool) -> f64 {
    let h = 1e-4;
    let bump = |s: f64| {
        let mut v = u.clone();
        if c == 0 {
            v.points[k].u1 += s;
        } else {
            v.points[k].u2 += s;
        }
        cost_of(p, grid, &v, drop)
    };
    (bump(h) - bump(-h)) / (2.0 * h)
}

#[test]
fn adjoint_gradient_matches_finite_differences() {
    let p = ModelParams::table(0.9);
    let grid = Grid::new(20.0, 0.5).unwrap();
    let u = wavy_schedule(&grid);
    let tr = solve_state(&p, &u, &StatePoint::reference_initial(), &grid, &NewtonConfig::default()).unwrap();
    let adj = solve_discrete_adjoint(&p, &tr).unwrap();
    let grad = control_gradient(&u, &adj, &p);
    for k in [1, 7, 20, 33, 39, 40] {
        for c in 0..2 {
            let fd = central_difference(&p, &grid, &u, k, c, false);
            let g = grad[k][c];
            assert!((fd - g).abs() <= 1e-6 * fd.abs().max(1e-3), "k={k} c={c}: adjoint {g} vs fd {fd}");
        }
    }
}

#[test]
fn sweep_adjoint_is_exact_for_cost_without_terminal_tumor_sample() {
    let p = ModelParams::table(0.8);
    let grid = Grid::new(20.0, 0.5).unwrap();
    let u = wavy_schedule(&grid);
    let tr = solve_state(&p, &u, &StatePoint::reference_initial(), &grid, &NewtonConfig::default()).unwrap();
    let adj = solve_adjoint(&p, &tr).unwrap();
    assert_eq!(adj.points.last().unwrap().lambda, [0.0; 5]);
    let grad = control_gradient(&u, &adj, &p);
    for k in [2, 11, 25, 38] {
        let fd = central_difference(&p, &grid, &u, k, 0, true);
        assert!((fd - grad[k][0]).abs() <= 1e-6 * fd.abs().max(1e-3), "k={k}: {} vs {fd}", grad[k][0]);
    }
}

#[test]
fn terminal_adjoint_gap_shrinks_with_step() {
    let p = ModelParams::table(0.9);
    let mut gaps = Vec::new();
    for dt in [0.5, 0.1, 0.02] {
        let grid = Grid::new(10.0, dt).unwrap();
        let u = ControlSchedule::initial(&grid, Scenario::Combined);
        let tr = solve_state(&p, &u, &StatePoint::reference_initial(), &grid, &NewtonConfig::default()).unwrap();
        let exact = solve_discrete_adjoint(&p, &tr).unwrap();
        let sweep = solve_adjoint(&p, &tr).unwrap();
        let k = grid.steps() / 2;
        gaps.push((exact.points[k].lambda[3] - sweep.points[k].lambda[3]).abs());
    }
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}

#[test]
fn converged_sweep_is_stationary() {
    let p = ModelParams::table(0.9);
    let grid = Grid::new(120.0, 0.25).unwrap();
    let cfg = SweepConfig::default();
    let sol = forward_backward_sweep(
        &p,
        &StatePoint::reference_initial(),
        &ControlSchedule::initial(&grid, cfg.scenario),
        &grid,
        &cfg,
        &NewtonConfig::default(),
    )
    .unwrap();
    assert!(sol.psi_final >= 0.0);
    assert!(sol.controls.is_admissible());
    let mut interior = 0;
    for (u, l) in sol.controls.points.iter().zip(&sol.adjoints.points) {
        if u.u1 > 0.0 && u.u1 < 1.0 {
            interior += 1;
            let r = 2.0 * p.omega1 * u.u1 + l.lambda[3];
            assert!(r.abs() <= 1e-3 * l.lambda[3].abs().max(1.0), "u1 {} lambda4 {}", u.u1, l.lambda[3]);
        }
        if u.u2 > 0.0 && u.u2 < 1.0 {
            let r = 2.0 * p.omega2 * u.u2 + l.lambda[4];
            assert!(r.abs() <= 1e-3 * l.lambda[4].abs().max(1.0));
        }
    }
    assert!(interior > 0);
}

#[test]
fn sweep_beats_every_piecewise_constant_schedule() {
    let p = ModelParams::table(0.9);
    let grid = Grid::new(10.0, 0.25).unwrap();
    let levels = [0.0, 0.25, 0.5, 0.75, 1.0];
    let per = grid.steps() / 4;
    let mut best = f64::INFINITY;
    for code in 0..625usize {
        let pick = [code % 5, code / 5 % 5, code / 25 % 5, code / 125];
        let points = (0..grid.nodes())
            .map(|k| ControlPoint::new(levels[pick[(k / per).min(3)]], 0.0))
            .collect();
        let u = ControlSchedule::from_points(&grid, points).unwrap();
        best = best.min(cost_of(&p, &grid, &u, false));
    }
    let cfg = SweepConfig {
        scenario: Scenario::Chemotherapy,
        ..SweepConfig::default()
    };
    let sol = forward_backward_sweep(
        &p,
        &StatePoint::reference_initial(),
        &ControlSchedule::initial(&grid, cfg.scenario),
        &grid,
        &cfg,
        &NewtonConfig::default(),
    )
    .unwrap();
    assert!(sol.cost <= 1.02 * best, "sweep {} vs enumerated {best}", sol.cost);
}

#[test]
fn untreated_tumor_grows_and_immune_level_plateaus() {
    let grid = Grid::new(120.0, 0.25).unwrap();
    for alpha in [0.8, 0.9, 0.95] {
        let p = ModelParams::table(alpha);
        let tr = solve_state(&p, &ControlSchedule::zero(&grid), &StatePoint::reference_initial(), &grid, &NewtonConfig::default())
            .unwrap();
        let t = tr.component(0);
        assert!(t.windows(2).all(|w| w[1] >= w[0]));
        let i = tr.component(1);
        let at100 = i[400];
        assert!((i[480] - at100).abs() <= 0.05 * at100);
    }
}

#[test]
fn disabled_channels_stay_off() {
    let p = ModelParams::table(0.9);
    let grid = Grid::new(20.0, 0.5).unwrap();
    for scenario in [Scenario::Chemotherapy, Scenario::Immunotherapy] {
        let cfg = SweepConfig { scenario, ..SweepConfig::default() };
        let sol = forward_backward_sweep(
            &p,
            &StatePoint::reference_initial(),
            &ControlSchedule::initial(&grid, scenario),
            &grid,
            &cfg,
            &NewtonConfig::default(),
        )
        .unwrap();
        let off = if scenario.chemo_active() { sol.controls.u2() } else { sol.controls.u1() };
        assert!(off.iter().all(|v| *v == 0.0));
    }
}
