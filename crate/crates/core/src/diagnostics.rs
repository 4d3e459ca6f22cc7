//! Norms, time extrema and log-log fits.
//!
//! Sobolev norms are coefficient sums `(sum (1+|xi|^2)^s |f(xi)|^2)^{1/2}`;
//! `W^{k,inf}` norms are grid suprema and therefore lower bounds of the
//! continuum values.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral_core::{make_grid, ScalarField, StateField, WaveGrid};

/// Version of the norm-name schema written into records.
pub const NORM_SCHEMA_VERSION: u32 = 1;

pub const L2: &str = "L2";
pub const W1INF: &str = "W1inf";

pub fn hs_name(s: f64) -> String {
    format!("Hs:{s}")
}

pub fn diff_name(base: &str, against: &str) -> String {
    format!("diff:{base}:{against}")
}

pub fn error_name(base: &str) -> String {
    format!("E:{base}")
}

fn weight(xi: [f64; 3], s: f64) -> f64 {
    (1.0 + xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).powf(s)
}

pub fn sobolev_norm(f: &StateField, s: f64) -> f64 {
    let g = &f.grid;
    (0..g.total())
        .map(|idx| {
            let w = weight(g.xi(idx), s);
            w * f.comps.iter().map(|c| c[idx].norm_sqr()).sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

pub fn sobolev_norm_scalar(f: &ScalarField, s: f64) -> f64 {
    let g = &f.grid;
    f.data
        .iter()
        .enumerate()
        .map(|(idx, c)| weight(g.xi(idx), s) * c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `H^s` norm of `f - g` without allocating the difference.
pub fn sobolev_diff(f: &StateField, g: &StateField, s: f64) -> f64 {
    let gr = &f.grid;
    (0..gr.total())
        .map(|idx| {
            let w = weight(gr.xi(idx), s);
            w * (0..4).map(|c| (f.comps[c][idx] - g.comps[c][idx]).norm_sqr()).sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

/// Grid supremum of `|f|` plus, for `k = 1`, of `|grad f|` (Euclidean over components).
pub fn wkinf_norm(f: &StateField, k: u32) -> f64 {
    let g = &f.grid;
    let phys = f.to_physical();
    let mut value = phys.max_abs();
    if k >= 1 {
        let mut acc = vec![0.0; g.total()];
        for c in 0..4 {
            let grads = crate::spectral_core::spectral_gradient(&f.component(c));
            let (a, b) = g.inverse_pair(&grads[0].data, &grads[1].data);
            let d = grads[2].to_physical();
            for i in 0..g.total() {
                acc[i] += a[i] * a[i] + b[i] * b[i] + d[i] * d[i];
            }
        }
        value += acc.iter().cloned().fold(0.0, f64::max).sqrt();
    }
    value
}

/// Embeds the coefficients on a grid refined by `factor` in every axis (same box).
pub fn zero_pad(f: &StateField, factor: usize) -> Result<StateField> {
    let g = &f.grid;
    let fine = make_grid(g.n().map(|n| n * factor), g.len())?;
    let mut out = StateField::zeros(&fine);
    for idx in 0..g.total() {
        let m = g.mode(idx);
        if (0..3).any(|j| 2 * m[j].unsigned_abs() as usize >= g.n()[j]) {
            continue;
        }
        out.set(fine.flat_of_mode(m), f.at(idx));
    }
    Ok(out)
}

/// `W^{k,inf}` evaluated on a 2x zero-padded grid.
pub fn wkinf_norm_refined(f: &StateField, k: u32) -> Result<f64> {
    Ok(wkinf_norm(&zero_pad(f, 2)?, k))
}

/// Continuum estimate of `sup |f|` for a real band-limited scalar: Newton polishing of the
/// largest grid extrema on the trigonometric interpolant.
pub fn continuum_sup(f: &ScalarField, candidates: usize) -> f64 {
    let g = &f.grid;
    let vals = f.to_physical();
    let modes: Vec<([f64; 3], Complex64)> = f
        .data
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(idx, c)| (g.xi(idx), *c))
        .collect();
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].abs().total_cmp(&vals[a].abs()).then(a.cmp(&b)));
    let mut best = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for &start in order.iter().take(candidates) {
        let sign = vals[start].signum();
        let mut x = g.point(start);
        let mut fx = sign * vals[start];
        for _ in 0..8 {
            let (v, grad, hess) = eval_with_derivatives(&modes, x);
            let v = sign * v;
            let grad = grad.map(|d| sign * d);
            let mut hess = hess.map(|r| r.map(|d| sign * d));
            // Damping keeps Newton defined along directions in which the field is constant.
            let scale = (0..3).map(|j| hess[j][j].abs()).fold(0.0, f64::max);
            for (j, row) in hess.iter_mut().enumerate() {
                row[j] -= 1e-8 * scale;
            }
            fx = fx.max(v);
            let Some(step) = solve3(hess, grad) else { break };
            let mut next = x;
            for j in 0..3 {
                next[j] -= step[j];
            }
            let (nv, _, _) = eval_with_derivatives(&modes, next);
            if sign * nv <= v {
                break;
            }
            x = next;
            fx = fx.max(sign * nv);
            if step.iter().map(|s| s * s).sum::<f64>().sqrt() < 1e-12 {
                break;
            }
        }
        best = best.max(fx);
    }
    best
}

fn eval_with_derivatives(modes: &[([f64; 3], Complex64)], x: [f64; 3]) -> (f64, [f64; 3], [[f64; 3]; 3]) {
    let mut v = 0.0;
    let mut grad = [0.0; 3];
    let mut hess = [[0.0; 3]; 3];
    for (xi, c) in modes {
        let ph = xi[0] * x[0] + xi[1] * x[1] + xi[2] * x[2];
        let z = c * Complex64::from_polar(1.0, ph);
        v += z.re;
        for a in 0..3 {
            grad[a] -= xi[a] * z.im;
            for b in 0..3 {
                hess[a][b] -= xi[a] * xi[b] * z.re;
            }
        }
    }
    (v, grad, hess)
}

fn solve3(m: [[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let d = crate::wave_ops::det3(m);
    if d.abs() < 1e-300 {
        return None;
    }
    let mut out = [0.0; 3];
    for j in 0..3 {
        let mut mj = m;
        for i in 0..3 {
            mj[i][j] = r[i];
        }
        out[j] = crate::wave_ops::det3(mj) / d;
    }
    Some(out)
}

/// Result of a least-squares fit of `log y` against `log x`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the free fit in log space.
    pub residual: f64,
    /// Intercept with the slope pinned to the expected value.
    pub pinned_intercept: f64,
    pub expected_slope: f64,
}

pub fn rate_fit(series: &[(f64, f64)], expected_slope: f64) -> Result<RateFit> {
    if series.len() < 3 {
        return Err(Error::Numerical(format!("rate fit needs at least 3 points, got {}", series.len())));
    }
    if series.iter().any(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::Numerical("rate fit needs positive values".into()));
    }
    let pts: Vec<(f64, f64)> = series.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let (slope, intercept) = least_squares(&pts);
    let n = pts.len() as f64;
    let residual = (pts.iter().map(|(x, y)| (y - slope * x - intercept).powi(2)).sum::<f64>() / n).sqrt();
    let pinned_intercept = pts.iter().map(|(x, y)| y - expected_slope * x).sum::<f64>() / n;
    Ok(RateFit {
        slope,
        intercept,
        residual,
        pinned_intercept,
        expected_slope,
    })
}

pub(crate) fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Time-stamped named norm values of one run.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DiagnosticsRecord {
    pub run_id: String,
    pub time: f64,
    pub values: BTreeMap<String, f64>,
    pub config_hash: String,
}

impl DiagnosticsRecord {
    pub fn new(run_id: impl Into<String>, time: f64, config_hash: impl Into<String>) -> Self {
        DiagnosticsRecord {
            run_id: run_id.into(),
            time,
            values: BTreeMap::new(),
            config_hash: config_hash.into(),
        }
    }

    pub fn with(mut self, name: impl Into<String>, value: f64) -> Self {
        self.values.insert(name.into(), value);
        self
    }

    pub fn insert(&mut self, name: impl Into<String>, value: f64) {
        self.values.insert(name.into(), value);
    }
}

fn window_values<'a>(
    records: &'a [DiagnosticsRecord],
    name: &'a str,
    window: (f64, f64),
) -> impl Iterator<Item = f64> + 'a {
    let tol = 1e-12 * window.1.abs().max(1.0);
    records
        .iter()
        .filter(move |r| r.time >= window.0 - tol && r.time <= window.1 + tol)
        .filter_map(move |r| r.values.get(name).copied())
}

/// Minimum of a named series over samples with time in `window`.
pub fn time_infimum(records: &[DiagnosticsRecord], name: &str, window: (f64, f64)) -> Result<f64> {
    window_values(records, name, window)
        .reduce(f64::min)
        .ok_or_else(|| Error::Numerical(format!("no samples of {name} in window {window:?}")))
}

/// Maximum of a named series over samples with time in `window`.
pub fn time_supremum(records: &[DiagnosticsRecord], name: &str, window: (f64, f64)) -> Result<f64> {
    window_values(records, name, window)
        .reduce(f64::max)
        .ok_or_else(|| Error::Numerical(format!("no samples of {name} in window {window:?}")))
}

/// Trapezoidal `L^q(0, T)` norm of a sampled series `(t, value)`.
pub fn lq_time_norm(series: &[(f64, f64)], q: f64) -> f64 {
    series
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1.powf(q) + w[1].1.powf(q)))
        .sum::<f64>()
        .powf(1.0 / q)
}

/// Relative change between a measurement and a reference.
pub fn relative_drift(value: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        value.abs()
    } else {
        ((value - reference) / reference).abs()
    }
}

/// Shared grid accessor used by norm helpers that need a fresh padded grid.
pub fn same_grid(a: &Arc<WaveGrid>, b: &Arc<WaveGrid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}
