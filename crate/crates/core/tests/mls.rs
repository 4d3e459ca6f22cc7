mod common;

use std::sync::Arc;

use boussq_core::boussinesq::DtPolicy;
use boussq_core::mls::{
    duhamel_inhomog_norm, error_field, exp_moments, free_flow, largeness_constant, mls_direct, mls_solve,
    DecompositionBundle,
};
use boussq_core::qg::{lift, pv_from_boussinesq, qg_solve, QgInit, QgTrajectory};
use boussq_core::spectral_core::ScalarField;
use boussq_core::wave_ops::Which;
use boussq_core::{Error, FrameTable, SimConfig, StateField};
use common::*;
use num_complex::Complex64;

type C = Complex64;

/// Composite Simpson rule for `int_0^h e^{i s r} r^j dr`.
fn simpson_moment(s: f64, h: f64, j: i32) -> C {
    let m = 20_000;
    let dr = h / m as f64;
    let f = |r: f64| C::from_polar(1.0, s * r) * r.powi(j);
    let mut acc = f(0.0) + f(h);
    for i in 1..m {
        acc += f(i as f64 * dr) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * dr / 3.0
}

#[test]
fn exponential_moments_match_quadrature() {
    for (s, h) in [(0.0, 0.3), (0.5, 0.1), (9.99, 0.1), (10.01, 0.1), (300.0, 0.02), (-40.0, 0.05)] {
        let e = exp_moments(s, h);
        for j in 0..4 {
            let want = simpson_moment(s, h, j as i32);
            let scale = h.powi(j as i32 + 1);
            assert!((e[j] - want).norm() < 1e-12 * scale, "s={s} h={h} j={j}: {} vs {}", e[j], want);
        }
    }
}

fn box_cfg(mu: f64, t: f64, samples: usize) -> SimConfig {
    SimConfig {
        mu,
        grid: [8; 3],
        box_len: [4.0 * std::f64::consts::PI; 3],
        t_final: t,
        samples,
        dt_policy: DtPolicy::Fixed { dt: 1e-3 },
        ..SimConfig::default()
    }
}

fn qg_of(u0: &StateField, frames: &FrameTable, cfg: &SimConfig) -> QgTrajectory {
    qg_solve(QgInit::Pv(pv_from_boussinesq(u0, frames)), cfg, None, |_, _, _| Ok(())).unwrap()
}

fn amp_err(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn duhamel_update_matches_direct_integration_for_a_steady_flow() {
    let g = grid_4pi(8);
    let mu = 2.0;
    let frames = Arc::new(FrameTable::new(&g, mu).unwrap());
    // Both modes have |xi_H|^2 + mu^2 xi_3^2 = 1 + mu^2, so the QG flow is steady.
    let psi = ScalarField::from_fn(&g, |x| 0.4 * (x[0] + x[2]).cos() + 0.3 * (x[1] - x[2]).cos());
    let fast = solenoidal(&g, 3);
    let u0 = lift(&psi, mu).axpy(1.0, &fast.sub(&frames.project(&fast, Which::Mu)));
    let cfg = box_cfg(mu, 0.5, 16);
    let qg = qg_of(&u0, &frames, &cfg);
    for n in [3.0, 40.0] {
        let traj = mls_solve(&u0, &qg, &frames, n).unwrap();
        let (_, ap, am) = mls_direct(&u0, &frames.project(&u0, Which::Mu), &frames, n, 0.5, 4000);
        let scale = ap.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(amp_err(&traj.alpha_plus[16], &ap) < 1e-8 * scale, "N = {n}");
        assert!(amp_err(&traj.alpha_minus[16], &am) < 1e-8 * scale, "N = {n}");
    }
}

#[test]
fn duhamel_update_matches_direct_integration_for_an_evolving_flow() {
    let g = grid_4pi(8);
    let mu = 0.7;
    let frames = Arc::new(FrameTable::new(&g, mu).unwrap());
    let u0 = solenoidal(&g, 11).scale(20.0);
    let cfg = box_cfg(mu, 0.4, 64);
    let qg = qg_of(&u0, &frames, &cfg);
    let traj = mls_solve(&u0, &qg, &frames, 25.0).unwrap();
    let (umu, ap, am) = mls_direct(&u0, &frames.project(&u0, Which::Mu), &frames, 25.0, 0.4, 4000);
    let scale = ap.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(amp_err(&traj.alpha_plus[64], &ap) < 1e-6 * scale);
    assert!(amp_err(&traj.alpha_minus[64], &am) < 1e-6 * scale);
    assert!(qg.lifted(64).sub(&umu).norm_sq().sqrt() < 1e-8 * umu.norm_sq().sqrt());
}

#[test]
fn without_slow_forcing_the_fast_part_is_the_free_flow() {
    let g = grid_4pi(8);
    let mu = 1.5;
    let frames = Arc::new(FrameTable::new(&g, mu).unwrap());
    let f = solenoidal(&g, 5);
    let u0 = f.sub(&frames.project(&f, Which::Mu));
    let cfg = box_cfg(mu, 0.3, 6);
    let qg = qg_of(&u0, &frames, &cfg);
    let traj = mls_solve(&u0, &qg, &frames, 17.0).unwrap();
    for (k, &t) in traj.times.iter().enumerate() {
        let free = free_flow(&u0, &frames, 17.0, t);
        assert!(traj.fast(k).sub(&free).norm_sq().sqrt() < 1e-14);
    }
    assert!(duhamel_inhomog_norm(&traj, &u0, 3.0).iter().all(|(_, v)| *v < 1e-13));
}

#[test]
fn decomposition_is_exact_at_the_initial_time() {
    let g = grid_4pi(8);
    let mu = 2.0;
    let frames = Arc::new(FrameTable::new(&g, mu).unwrap());
    let u0 = solenoidal(&g, 2);
    let qg = qg_of(&u0, &frames, &box_cfg(mu, 0.1, 2));
    let traj = mls_solve(&u0, &qg, &frames, 10.0).unwrap();
    let b = DecompositionBundle::new(
        0.0,
        mu,
        10.0,
        u0.clone(),
        qg.lifted(0),
        traj.field(0, Which::Plus),
        traj.field(0, Which::Minus),
    );
    assert!(b.error_norm(3.0) < 1e-13);
    let e = error_field(&u0, &u0, &StateField::zeros(&g), &StateField::zeros(&g));
    assert_eq!(e.norm_sq(), 0.0);
}

#[test]
fn mismatched_ratio_is_rejected() {
    let g = grid_4pi(8);
    let frames = Arc::new(FrameTable::new(&g, 2.0).unwrap());
    let other = FrameTable::new(&g, 1.0).unwrap();
    let u0 = solenoidal(&g, 2);
    let qg = qg_of(&u0, &other, &box_cfg(1.0, 0.1, 2));
    assert!(matches!(mls_solve(&u0, &qg, &frames, 1.0), Err(Error::Config(_))));
}

#[test]
fn largeness_constant_is_homogeneous_and_ignores_slow_data() {
    let g = grid_4pi(16);
    let frames = FrameTable::new(&g, 1.0).unwrap();
    let u0 = solenoidal(&g, 7);
    let a = largeness_constant(&u0, &frames);
    let b = largeness_constant(&u0.scale(3.0), &frames);
    assert!(a.a > 0.0);
    assert!((b.a / a.a - 3.0).abs() < 1e-12);
    assert_eq!(a.radius, b.radius);
    assert!(a.radius <= 2.0 * std::f64::consts::PI * 3f64.sqrt());
    assert!(a.ball_volume > 0.0 && a.ball_volume <= g.volume());
    let slow = largeness_constant(&frames.project(&u0, Which::Mu), &frames);
    assert!(slow.l2 < 1e-12 * a.l2);
}
