mod common;

use std::sync::Arc;

use boussq_core::boussinesq::{advection, energy, nonlinear_term, uniform_wall, DtPolicy};
use boussq_core::spectral_core::{leray_project, spectral_gradient, ScalarField};
use boussq_core::{Boussinesq, Error, FrameTable, SimConfig, StateField};
use common::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn band_limited(grid: &Arc<boussq_core::WaveGrid>, seed: u64, band: i64) -> StateField {
    let f = rough(grid, seed);
    let cut = f.map_modes(|idx, v| {
        if grid.mode(idx).iter().all(|m| m.abs() <= band) {
            v
        } else {
            [Complex64::new(0.0, 0.0); 4]
        }
    });
    let mut p = leray_project(&cut);
    p.zero_mean();
    p
}

fn unit_energy(u: StateField) -> StateField {
    let e = energy(&u).sqrt();
    u.scale(1.0 / e)
}

fn cfg(mu: f64, n: f64, grid: usize, t: f64, dt: DtPolicy) -> SimConfig {
    SimConfig {
        mu,
        n,
        grid: [grid; 3],
        box_len: [2.0 * std::f64::consts::PI; 3],
        t_final: t,
        dt_policy: dt,
        samples: 4,
        ..SimConfig::default()
    }
}

#[test]
fn nonlinearity_of_zero_and_of_a_shear_vanishes() {
    let g = grid_2pi(16);
    assert_eq!(nonlinear_term(&StateField::zeros(&g)).norm_sq(), 0.0);
    let shear = ScalarField::from_fn(&g, |x| x[1].sin());
    let strat = ScalarField::from_fn(&g, |x| x[1].cos());
    let mut u = StateField::zeros(&g);
    u.comps[0] = shear.data;
    u.comps[3] = strat.data;
    assert!(advection(&u).norm_sq().sqrt() < 1e-15);
}

#[test]
fn advection_matches_physical_space_product() {
    // Band 2 on a 16 grid: every product is resolved, so the pseudo-spectral value is exact.
    let g = grid_2pi(16);
    let u = band_limited(&g, 12, 2);
    let phys = u.to_physical();
    let mut expect = vec![vec![0.0; g.total()]; 4];
    for c in 0..4 {
        let grads = spectral_gradient(&u.component(c));
        for j in 0..3 {
            let d = grads[j].to_physical();
            for i in 0..g.total() {
                expect[c][i] += phys.comps[j][i] * d[i];
            }
        }
    }
    let got = advection(&u).to_physical();
    for c in 0..4 {
        let scale = expect[c].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let d = max_diff(&got.comps[c], &expect[c]);
        assert!(d < 1e-13 * scale, "{c}: {d} vs scale {scale}");
    }
}

#[test]
fn nonlinearity_is_projected() {
    let g = grid_2pi(16);
    let nl = nonlinear_term(&unit_energy(solenoidal(&g, 3)));
    assert!(nl.max_divergence() < 1e-13);
    assert_eq!(nl.at(0), [Complex64::new(0.0, 0.0); 4]);
}

#[test]
fn linear_step_is_the_exact_flow() {
    let g = grid_2pi(8);
    let u = solenoidal(&g, 2);
    let mut c = cfg(1.5, 30.0, 8, 1.0, DtPolicy::Fixed { dt: 0.1 });
    c.nonlinear = false;
    let solver = Boussinesq::new(c).unwrap();
    let stepped = solver.step(&u, 0.137).unwrap();
    let frames = FrameTable::new(&g, 1.5).unwrap();
    assert!(stepped.sub(&frames.propagate(&u, 0.137, 30.0)).norm_sq().sqrt() < 1e-15);
}

fn solve_final(c: SimConfig, u0: &StateField) -> StateField {
    Boussinesq::new(c).unwrap().solve(u0, |_, _, _| Ok(())).unwrap().final_state
}

#[test]
fn time_stepping_is_fourth_order() {
    let g = grid_2pi(16);
    let u0 = unit_energy(solenoidal(&g, 5));
    let run = |dt: f64| solve_final(cfg(2.0, 10.0, 16, 0.4, DtPolicy::Fixed { dt }), &u0);
    let reference = run(0.4 / 256.0);
    let errs: Vec<f64> = [0.4 / 16.0, 0.4 / 32.0, 0.4 / 64.0]
        .iter()
        .map(|&dt| run(dt).sub(&reference).norm_sq().sqrt())
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((12.0..20.0).contains(&ratio), "{errs:?}");
    }
}

#[test]
fn energy_and_divergence_are_conserved() {
    let g = grid_2pi(16);
    let u0 = unit_energy(solenoidal(&g, 8));
    let solver = Boussinesq::new(cfg(2.0, 50.0, 16, 0.5, DtPolicy::default())).unwrap();
    let mut seen = Vec::new();
    let report = solver
        .solve(&u0, |k, t, u| {
            seen.push((k, t));
            assert!(u.max_divergence() < 1e-13);
            assert!((energy(u) - 1.0).abs() < 1e-6, "t = {t}: {}", energy(u) - 1.0);
            Ok(())
        })
        .unwrap();
    let wall = uniform_wall(0.5, 4);
    assert_eq!(seen.iter().map(|s| s.1).collect::<Vec<_>>(), wall);
    assert_eq!(seen.iter().map(|s| s.0).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
    assert!(report.steps >= 4);
}

#[test]
fn energy_drift_is_a_time_discretization_error() {
    let g = grid_2pi(16);
    let u0 = unit_energy(solenoidal(&g, 8));
    let drift = |dt: f64| (energy(&solve_final(cfg(2.0, 50.0, 16, 0.25, DtPolicy::Fixed { dt }), &u0)) - 1.0).abs();
    let (coarse, fine) = (drift(0.01), drift(0.005));
    assert!(coarse > 0.0 && fine < coarse / 8.0, "{coarse} {fine}");
}

#[test]
fn resuming_reproduces_the_uninterrupted_run() {
    let g = grid_2pi(8);
    let u0 = unit_energy(solenoidal(&g, 4));
    let solver = Boussinesq::new(cfg(0.5, 20.0, 8, 0.4, DtPolicy::default())).unwrap();
    let mut states = Vec::new();
    solver
        .solve(&u0, |_, _, u| {
            states.push(u.clone());
            Ok(())
        })
        .unwrap();
    let mut resumed = Vec::new();
    solver
        .solve_from(2, &states[2], |k, _, u| {
            resumed.push((k, u.clone()));
            Ok(())
        })
        .unwrap();
    assert_eq!(resumed.len(), 2);
    for (k, u) in resumed {
        assert_eq!(u.comps, states[k].comps);
    }
    assert!(matches!(solver.solve_from(5, &u0, |_, _, _| Ok(())), Err(Error::Config(_))));
}

#[test]
fn fixed_step_reports_cfl_violation() {
    let g = grid_2pi(8);
    let u0 = unit_energy(solenoidal(&g, 1)).scale(100.0);
    let solver = Boussinesq::new(cfg(1.0, 1.0, 8, 1.0, DtPolicy::Fixed { dt: 0.5 })).unwrap();
    assert!(matches!(solver.solve(&u0, |_, _, _| Ok(())), Err(Error::Numerical(_))));
}

#[test]
fn non_finite_states_are_a_blow_up() {
    let g = grid_2pi(8);
    let mut u = solenoidal(&g, 1);
    u.comps[0][3] = Complex64::new(f64::NAN, 0.0);
    let solver = Boussinesq::new(cfg(1.0, 1.0, 8, 1.0, DtPolicy::default())).unwrap();
    assert!(matches!(solver.step(&u, 0.01), Err(Error::BlowUp { .. })));
}

#[test]
fn invalid_configurations_are_rejected() {
    let base = cfg(1.0, 1.0, 8, 1.0, DtPolicy::default());
    for bad in [
        SimConfig { mu: 0.0, ..base.clone() },
        SimConfig { n: -1.0, ..base.clone() },
        SimConfig { t_final: 0.0, ..base.clone() },
        SimConfig { samples: 0, ..base.clone() },
        SimConfig { dt_policy: DtPolicy::Fixed { dt: 0.0 }, ..base.clone() },
        SimConfig { grid: [7; 3], ..base.clone() },
    ] {
        assert!(matches!(Boussinesq::new(bad), Err(Error::Config(_))));
    }
    let frames = Arc::new(FrameTable::new(&grid_2pi(8), 2.0).unwrap());
    assert!(matches!(Boussinesq::with_frames(base, frames), Err(Error::Config(_))));
}

#[test]
fn phase_cap_limits_the_step() {
    let g = grid_2pi(8);
    let u0 = solenoidal(&g, 3).scale(1e-6);
    let solver = Boussinesq::new(cfg(2.0, 1000.0, 8, 1.0, DtPolicy::default())).unwrap();
    let dt = solver.dt_target(&u0).unwrap();
    assert!((dt * 1000.0 * solver.frames.max_p() - 0.5).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn nonlinearity_does_no_work(seed in any::<u64>()) {
        let g = grid_2pi(16);
        let u = band_limited(&g, seed, 4);
        let nl = nonlinear_term(&u);
        let scale = nl.norm_sq().sqrt() * u.norm_sq().sqrt();
        prop_assert!(nl.inner(&u).norm() <= 1e-12 * scale.max(1e-300));
    }
}
