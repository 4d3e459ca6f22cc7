use std::f64::consts::PI;

use boussq_core::dispersion::{
    c_mu_profile, cutoff_psi, decay_sweep, default_x_set, fit_decay, gauss_legendre, log_space, EvalPoint,
    DEFAULT_H,
};
use boussq_core::{AnnulusQuadrature, Error};
use num_complex::Complex64;

type C = Complex64;

fn simpson(a: f64, b: f64, m: usize, f: impl Fn(f64) -> C) -> C {
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// `I(s) = int r^2 psi(r)^2 e^{i r s} dr`.
fn radial(s: f64) -> C {
    simpson(0.25, 4.0, 4000, |r| C::from_polar(r * r * cutoff_psi(r).powi(2), r * s))
}

fn p_of_c(c: f64, mu: f64) -> f64 {
    (1.0 - c * c + mu * mu * c * c).sqrt()
}

/// `G` on the vertical axis, where the azimuthal integral is trivial.
fn axis_oracle(z: f64, nt: f64, mu: f64) -> C {
    // At least 100 Simpson cells per radian of outer phase.
    let cells = (4000.0f64.max(200.0 * nt * (mu * mu - 1.0).abs()) as usize + 1) & !1;
    let i0 = radial(0.0);
    let inner = |c: f64| if z == 0.0 { i0 } else { radial(z * c) };
    let outer = simpson(-1.0, 1.0, cells, |c| C::from_polar(1.0, nt * p_of_c(c, mu)) * inner(c));
    outer * 2.0 * PI / (2.0 * PI).powi(3)
}

#[test]
fn cutoff_has_the_stated_support_and_plateau() {
    assert_eq!(cutoff_psi(0.25), 0.0);
    assert_eq!(cutoff_psi(4.0), 0.0);
    assert_eq!(cutoff_psi(0.1), 0.0);
    assert_eq!(cutoff_psi(7.0), 0.0);
    for r in [0.5, 0.9, 1.5, 2.0] {
        assert_eq!(cutoff_psi(r), 1.0);
    }
    for r in [0.3, 0.45, 2.5, 3.9] {
        let v = cutoff_psi(r);
        assert!(v > 0.0 && v < 1.0);
    }
    // C^2 joins: one-sided second differences agree at the knots.
    for knot in [0.25, 0.5, 2.0, 4.0] {
        let e = 1e-4;
        let left = cutoff_psi(knot - 2.0 * e) - 2.0 * cutoff_psi(knot - e) + cutoff_psi(knot);
        let right = cutoff_psi(knot) - 2.0 * cutoff_psi(knot + e) + cutoff_psi(knot + 2.0 * e);
        assert!((left - right).abs() < 1e-6, "{knot}");
    }
}

#[test]
fn gauss_legendre_is_exact_to_degree_2n_minus_1() {
    let (x, w) = gauss_legendre(12);
    assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    for d in 0..24 {
        let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(d)).sum();
        let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
        assert!((q - exact).abs() < 1e-14, "degree {d}");
    }
}

fn quad_at(points: Vec<[f64; 3]>) -> AnnulusQuadrature {
    AnnulusQuadrature::new(DEFAULT_H, points.into_iter().map(|x| EvalPoint { x }).collect()).unwrap()
}

#[test]
fn propagator_at_the_origin_matches_the_radial_integral() {
    let quad = quad_at(vec![[0.0; 3]]);
    let g0 = quad.evaluate(0.0, 2.0).unwrap();
    let oracle = radial(0.0) * 4.0 * PI / (2.0 * PI).powi(3);
    assert!((g0.values[0] - oracle).norm() < 1e-8);
    assert!(oracle.im.abs() < 1e-15);
    assert!((oracle.re - 0.376_72).abs() < 1e-5, "{}", oracle.re);
    for (nt, mu) in [(10.0, 2.0), (100.0, 1.5), (1000.0, 0.5)] {
        let g = quad.evaluate(nt, mu).unwrap();
        let want = axis_oracle(0.0, nt, mu);
        let rel = (g.values[0] - want).norm() / want.norm();
        assert!(rel < 1e-5, "Nt={nt}: {} vs {want}", g.values[0]);
    }
}

#[test]
fn propagator_on_the_vertical_axis_matches_a_double_integral() {
    let quad = quad_at(vec![[0.0, 0.0, 3.0], [0.0, 0.0, -1.5]]);
    for (nt, mu) in [(0.0, 2.0), (5.0, 2.0), (40.0, 0.7)] {
        let g = quad.evaluate(nt, mu).unwrap();
        for (k, z) in [3.0, -1.5].into_iter().enumerate() {
            let want = axis_oracle(z, nt, mu);
            assert!((g.values[k] - want).norm() < 1e-6 * want.norm().max(1e-3), "z={z} Nt={nt}");
        }
        assert_eq!(g.sup, g.values.iter().map(|v| v.norm()).fold(0.0, f64::max));
    }
}

#[test]
fn resonant_ratio_gives_no_decay() {
    let quad = AnnulusQuadrature::new(DEFAULT_H, default_x_set(8.0, 1)).unwrap();
    let rows = decay_sweep(1.0, 1.0, &log_space(10.0, 1e4, 6), &quad).unwrap();
    let first = rows[0].sup_norm;
    assert!(rows.iter().all(|r| (r.sup_norm - first).abs() < 1e-10 * first));
}

#[test]
fn decay_fit_recovers_a_synthetic_power_law() {
    let samples: Vec<(f64, f64)> = log_space(10.0, 1e4, 16).iter().map(|&nt| (nt, 2.0 * (1.0 + nt).powf(-0.5))).collect();
    let fit = fit_decay(&samples).unwrap();
    assert!((fit.exponent + 0.5).abs() < 1e-12);
    assert!((fit.constant - 2.0).abs() < 1e-11);
    assert!((fit.pinned_constant - 2.0).abs() < 1e-11);
    assert!(!fit.non_monotone_tail);
    let bumpy: Vec<(f64, f64)> = samples.iter().enumerate().map(|(i, s)| (s.0, if i == 15 { 1.0 } else { s.1 })).collect();
    assert!(fit_decay(&bumpy).unwrap().non_monotone_tail);
    assert!(fit_decay(&samples[..5]).is_err());
    assert!(fit_decay(&log_space(10.0, 50.0, 10).iter().map(|&x| (x, 1.0)).collect::<Vec<_>>()).is_err());
}

#[test]
fn constant_table_excludes_resonance_and_grows_towards_it() {
    let quad = AnnulusQuadrature::new(DEFAULT_H, default_x_set(8.0, 20240601)).unwrap();
    let nts = log_space(10.0, 1e4, 16);
    assert!(matches!(c_mu_profile(&[1.0], &nts, &quad), Err(Error::Config(_))));
    let table = c_mu_profile(&[2.0, 1.5, 1.25], &nts, &quad).unwrap();
    assert!((table[0].c_hat - 0.288).abs() < 5e-3, "{}", table[0].c_hat);
    assert!(table.windows(2).all(|w| w[1].c_hat > w[0].c_hat));
    for e in &table {
        assert!((e.c_hat_times_gap - e.c_hat * (e.mu - 1.0).abs()).abs() < 1e-15);
        assert!(e.exponent < -0.4 && e.exponent > -0.6);
    }
}
