//! Modified linear system for the fast components and the residual field.
//!
//! Per mode the fast amplitudes `a_+-(t) = <u^+-(t), b_+->` obey
//! `a' = +-i w a - <(u^mu . grad~) u^mu, b_+->` with `w = N p_mu`. The Duhamel
//! integral is evaluated interval by interval with the forcing interpolated by a
//! cubic in time and the exponential moments `int_0^h e^{i s r} r^j dr` computed
//! exactly, so only the QG forcing is approximated.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::boussinesq::advection;
use crate::diagnostics::{sobolev_diff, sobolev_norm};
use crate::error::{Error, Result};
use crate::qg::{projected_tendency, QgTrajectory};
use crate::spectral_core::StateField;
use crate::wave_ops::{FrameTable, Which};

type C = Complex64;
const C0: C = C::new(0.0, 0.0);

/// Fast amplitudes on the diagnostic time wall.
#[derive(Clone, Debug)]
pub struct MlsTrajectory {
    pub n: f64,
    pub times: Vec<f64>,
    pub alpha_plus: Vec<Vec<C>>,
    pub alpha_minus: Vec<Vec<C>>,
    frames: Arc<FrameTable>,
}

impl MlsTrajectory {
    pub fn frames(&self) -> &Arc<FrameTable> {
        &self.frames
    }

    /// `u^+` or `u^-` at sample `k`.
    pub fn field(&self, k: usize, which: Which) -> StateField {
        let amps = match which {
            Which::Plus => &self.alpha_plus[k],
            Which::Minus => &self.alpha_minus[k],
            _ => panic!("fast field requested for a non-fast projection"),
        };
        amplitudes_to_field(&self.frames, amps, which)
    }

    /// `u^+ + u^-` at sample `k`.
    pub fn fast(&self, k: usize) -> StateField {
        let mut f = self.field(k, Which::Plus);
        f.add_scaled(1.0, &self.field(k, Which::Minus));
        f
    }
}

fn amplitudes_to_field(frames: &FrameTable, amps: &[C], which: Which) -> StateField {
    let mut out = StateField::zeros(frames.grid());
    for (idx, a) in amps.iter().enumerate() {
        if *a != C0 {
            out.set(idx, frames.vector(idx, which).map(|b| a * b));
        }
    }
    out
}

fn amplitudes(frames: &FrameTable, f: &StateField, which: Which) -> Vec<C> {
    (0..frames.grid().total())
        .map(|idx| if idx == 0 { C0 } else { frames.amplitude(idx, &f.at(idx), which) })
        .collect()
}

/// `E_j = int_0^h e^{i s r} r^j dr` for `j = 0..=3`.
pub fn exp_moments(s: f64, h: f64) -> [C; 4] {
    let x = s * h;
    let mut out = [C0; 4];
    if x.abs() < 1.0 {
        // Power series in (i s h); 24 terms reach double precision for |s h| < 1.
        for (j, slot) in out.iter_mut().enumerate() {
            let mut term = C::new(1.0, 0.0);
            let mut acc = C0;
            for m in 0..24 {
                if m > 0 {
                    term *= C::new(0.0, x) / m as f64;
                }
                acc += term / (m + j + 1) as f64;
            }
            *slot = acc * h.powi(j as i32 + 1);
        }
    } else {
        let e = C::from_polar(1.0, x);
        let is = C::new(0.0, s);
        out[0] = (e - 1.0) / is;
        for j in 1..4 {
            out[j] = (h.powi(j as i32) * e - j as f64 * out[j - 1]) / is;
        }
    }
    out
}

/// Monomial coefficients of the Lagrange basis polynomials on `nodes`.
fn lagrange_monomials(nodes: &[f64]) -> Vec<[f64; 4]> {
    nodes
        .iter()
        .enumerate()
        .map(|(i, &ri)| {
            let mut poly = [0.0; 4];
            poly[0] = 1.0;
            let mut deg = 0;
            for (j, &rj) in nodes.iter().enumerate() {
                if i == j {
                    continue;
                }
                let d = ri - rj;
                let mut next = [0.0; 4];
                for k in 0..=deg {
                    next[k + 1] += poly[k] / d;
                    next[k] -= poly[k] * rj / d;
                }
                poly = next;
                deg += 1;
            }
            poly
        })
        .collect()
}

fn stencil(k: usize, count: usize) -> Vec<usize> {
    let width = count.min(4);
    let start = if k == 0 { 0 } else { k - 1 };
    let start = start.min(count - width);
    (start..start + width).collect()
}

/// Fast components driven by the QG trajectory `qg`, started from `P_+- u0`.
pub fn mls_solve(u0: &StateField, qg: &QgTrajectory, frames: &Arc<FrameTable>, n: f64) -> Result<MlsTrajectory> {
    if qg.pv.len() != qg.times.len() || qg.times.is_empty() {
        return Err(Error::Numerical("QG trajectory has no samples".into()));
    }
    if (frames.mu() - qg.mu).abs() > 0.0 {
        return Err(Error::Config("frame table and QG trajectory use different mu".into()));
    }
    let total = frames.grid().total();
    let forcing: Vec<(Vec<C>, Vec<C>)> = (0..qg.times.len())
        .map(|k| {
            let adv = advection(&qg.lifted(k));
            (amplitudes(frames, &adv, Which::Plus), amplitudes(frames, &adv, Which::Minus))
        })
        .collect();
    let mut ap = amplitudes(frames, u0, Which::Plus);
    let mut am = amplitudes(frames, u0, Which::Minus);
    let mut traj = MlsTrajectory {
        n,
        times: qg.times.clone(),
        alpha_plus: vec![ap.clone()],
        alpha_minus: vec![am.clone()],
        frames: frames.clone(),
    };
    let times = &qg.times;
    for k in 0..times.len() - 1 {
        let h = times[k + 1] - times[k];
        let st = stencil(k, times.len());
        let nodes: Vec<f64> = st.iter().map(|&i| times[k + 1] - times[i]).collect();
        let basis = lagrange_monomials(&nodes);
        for idx in 1..total {
            let w = n * frames.p(idx);
            let mp = exp_moments(w, h);
            let mut gp = C0;
            let mut gm = C0;
            for (b, &node) in basis.iter().zip(&st) {
                let wp: C = (0..4).map(|j| b[j] * mp[j]).sum();
                let wm: C = (0..4).map(|j| b[j] * mp[j].conj()).sum();
                gp += wp * forcing[node].0[idx];
                gm += wm * forcing[node].1[idx];
            }
            let e = C::from_polar(1.0, w * h);
            ap[idx] = e * ap[idx] - gp;
            am[idx] = e.conj() * am[idx] - gm;
        }
        traj.alpha_plus.push(ap.clone());
        traj.alpha_minus.push(am.clone());
    }
    Ok(traj)
}

/// Final fast amplitudes and QG state from co-evolving the projected QG system and the
/// fast amplitudes with one integrating-factor RK4 scheme. Used as an oracle for [`mls_solve`].
pub fn mls_direct(
    u0: &StateField,
    umu0: &StateField,
    frames: &FrameTable,
    n: f64,
    t_final: f64,
    steps: usize,
) -> (StateField, Vec<C>, Vec<C>) {
    let total = frames.grid().total();
    let forcing = |u: &StateField| {
        let adv = advection(u);
        (amplitudes(frames, &adv, Which::Plus), amplitudes(frames, &adv, Which::Minus))
    };
    let rot = |a: &[C], sign: f64, h: f64| -> Vec<C> {
        a.iter()
            .enumerate()
            .map(|(idx, z)| z * C::from_polar(1.0, sign * n * frames.p(idx) * h))
            .collect()
    };
    let comb = |x: &[C], a: f64, y: &[C]| -> Vec<C> { x.iter().zip(y).map(|(p, q)| p + a * q).collect() };
    let neg = |x: (Vec<C>, Vec<C>)| (x.0.iter().map(|z| -z).collect::<Vec<_>>(), x.1.iter().map(|z| -z).collect::<Vec<_>>());

    let mut u = umu0.clone();
    let mut ap = amplitudes(frames, u0, Which::Plus);
    let mut am = amplitudes(frames, u0, Which::Minus);
    let h = t_final / steps as f64;
    for _ in 0..steps {
        let k1u = projected_tendency(&u, frames);
        let k1 = neg(forcing(&u));
        let u2 = u.axpy(0.5 * h, &k1u);
        let k2u = projected_tendency(&u2, frames);
        let k2 = neg(forcing(&u2));
        let u3 = u.axpy(0.5 * h, &k2u);
        let k3u = projected_tendency(&u3, frames);
        let k3 = neg(forcing(&u3));
        let u4 = u.axpy(h, &k3u);
        let k4 = neg(forcing(&u4));
        let k4u = projected_tendency(&u4, frames);

        for (amp, sign, ka, kb, kc, kd) in [
            (&mut ap, 1.0, &k1.0, &k2.0, &k3.0, &k4.0),
            (&mut am, -1.0, &k1.1, &k2.1, &k3.1, &k4.1),
        ] {
            let full = rot(amp, sign, h);
            let r1 = rot(ka, sign, h);
            let mid = rot(&comb(kb, 1.0, kc), sign, 0.5 * h);
            let mut next = vec![C0; total];
            for idx in 0..total {
                next[idx] = full[idx] + h / 6.0 * r1[idx] + h / 3.0 * mid[idx] + h / 6.0 * kd[idx];
            }
            *amp = next;
        }
        let mut un = u.clone();
        un.add_scaled(h / 6.0, &k1u);
        un.add_scaled(h / 3.0, &k2u);
        un.add_scaled(h / 3.0, &k3u);
        un.add_scaled(h / 6.0, &k4u);
        u = frames.project(&un, Which::Mu);
    }
    (u, ap, am)
}

/// Free fast flow `sum_+- e^{+-i t N p(D)} P_+- u0`.
pub fn free_flow(u0: &StateField, frames: &FrameTable, n: f64, t: f64) -> StateField {
    let fast = u0.sub(&frames.project(u0, Which::Mu));
    let fast = fast.sub(&frames.project(&fast, Which::N));
    frames.propagate(&fast, t, n)
}

/// `(t, ||u^+ + u^- - free flow||_{H^s})` on the time wall.
pub fn duhamel_inhomog_norm(traj: &MlsTrajectory, u0: &StateField, s: f64) -> Vec<(f64, f64)> {
    traj.times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let free = free_flow(u0, &traj.frames, traj.n, t);
            (t, sobolev_diff(&traj.fast(k), &free, s))
        })
        .collect()
}

/// Snapshot of the decomposition `u = u^mu + u^+ + u^- + E`.
#[derive(Clone, Debug)]
pub struct DecompositionBundle {
    pub time: f64,
    pub mu: f64,
    pub n: f64,
    pub u: StateField,
    pub u_mu: StateField,
    pub u_plus: StateField,
    pub u_minus: StateField,
    pub error: StateField,
}

impl DecompositionBundle {
    pub fn new(time: f64, mu: f64, n: f64, u: StateField, u_mu: StateField, u_plus: StateField, u_minus: StateField) -> Self {
        let error = error_field(&u, &u_mu, &u_plus, &u_minus);
        DecompositionBundle {
            time,
            mu,
            n,
            u,
            u_mu,
            u_plus,
            u_minus,
            error,
        }
    }

    pub fn error_norm(&self, s: f64) -> f64 {
        sobolev_norm(&self.error, s)
    }
}

/// `E = u - u^+ - u^- - u^mu`.
pub fn error_field(u: &StateField, u_mu: &StateField, u_plus: &StateField, u_minus: &StateField) -> StateField {
    let mut e = u.sub(u_plus);
    e.add_scaled(-1.0, u_minus);
    e.add_scaled(-1.0, u_mu);
    e
}

/// Constructive largeness constant of a fast field.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Largeness {
    /// `A = 1/2 |B(0; r)|^{-1/2} ||f||_{L^2}`.
    pub a: f64,
    pub radius: f64,
    pub ball_volume: f64,
    pub l2: f64,
    /// Grid supremum of `|f|`.
    pub sup: f64,
}

/// Largeness constant of `u0 - P_mu u0`, with `r` the smallest radius whose periodic ball
/// about the origin carries 75% of the `L^2` mass.
pub fn largeness_constant(u0: &StateField, frames: &FrameTable) -> Largeness {
    let f = u0.sub(&frames.project(u0, Which::Mu));
    let g = frames.grid();
    let phys = f.to_physical();
    let dv = g.cell_volume();
    let len = g.len();
    let mut pts: Vec<(f64, f64)> = (0..g.total())
        .map(|idx| {
            let x = g.point(idx);
            let d2: f64 = (0..3)
                .map(|j| {
                    let y = x[j].min(len[j] - x[j]);
                    y * y
                })
                .sum();
            let m: f64 = (0..4).map(|c| phys.comps[c][idx].powi(2)).sum();
            (d2.sqrt(), m)
        })
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mass: f64 = pts.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    let mut radius = pts.last().map(|p| p.0).unwrap_or(0.0);
    for p in &pts {
        acc += p.1;
        if acc >= 0.75 * mass {
            radius = p.0;
            break;
        }
    }
    let count = pts.iter().filter(|p| p.0 <= radius).count();
    let ball_volume = count as f64 * dv;
    let l2 = (mass * dv).sqrt();
    Largeness {
        a: 0.5 * l2 / ball_volume.sqrt(),
        radius,
        ball_volume,
        l2,
        sup: phys.max_abs(),
    }
}
