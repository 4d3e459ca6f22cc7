//! Quasi-geostrophic limit dynamics in potential-vorticity and projected form.
//!
//! `q = Delta_mu psi` with `Delta_mu = d1^2 + d2^2 + mu^2 d3^2`, and the lifted state is
//! `u = grad_mu psi = (-d2 psi, d1 psi, 0, mu d3 psi)`. Both forms generate the same
//! Galerkin trajectory; `grad_mu .` maps one onto the other.

use std::sync::Arc;

use num_complex::Complex64;

use crate::boussinesq::{advection, uniform_wall, DtPolicy, SimConfig};
use crate::error::{Error, Result};
use crate::spectral_core::{dealias_scalar, ScalarField, StateField, WaveGrid};
use crate::wave_ops::{FrameTable, Which};

type C = Complex64;
const C0: C = C::new(0.0, 0.0);

/// Potential vorticity `q` for a given `mu`.
#[derive(Clone, Debug)]
pub struct PVField {
    pub q: ScalarField,
    pub mu: f64,
}

fn symbol_delta_mu(xi: [f64; 3], mu: f64) -> f64 {
    -(xi[0] * xi[0] + xi[1] * xi[1] + mu * mu * xi[2] * xi[2])
}

/// `psi = Delta_mu^{-1} q` on mean-free data.
pub fn invert_pv(q: &PVField) -> Result<ScalarField> {
    if q.q.mean().norm() > 1e-14 * q.q.norm_sq().sqrt().max(1.0) {
        return Err(Error::NonzeroMean);
    }
    Ok(invert_unchecked(&q.q, q.mu))
}

fn invert_unchecked(q: &ScalarField, mu: f64) -> ScalarField {
    let g = &q.grid;
    let data = q
        .data
        .iter()
        .enumerate()
        .map(|(idx, c)| if idx == 0 { C0 } else { c / symbol_delta_mu(g.xi(idx), mu) })
        .collect();
    ScalarField { grid: g.clone(), data }
}

/// `Delta_mu psi`.
pub fn apply_delta_mu(psi: &ScalarField, mu: f64) -> ScalarField {
    let g = &psi.grid;
    let data = psi
        .data
        .iter()
        .enumerate()
        .map(|(idx, c)| c * symbol_delta_mu(g.xi(idx), mu))
        .collect();
    ScalarField { grid: g.clone(), data }
}

/// `grad_mu psi = (-d2 psi, d1 psi, 0, mu d3 psi)`.
pub fn lift(psi: &ScalarField, mu: f64) -> StateField {
    let g = &psi.grid;
    let mut out = StateField::zeros(g);
    let i = C::i();
    for (idx, c) in psi.data.iter().enumerate() {
        if idx == 0 {
            continue;
        }
        let [a, b, z] = g.xi(idx);
        out.comps[0][idx] = -i * b * c;
        out.comps[1][idx] = i * a * c;
        out.comps[3][idx] = i * mu * z * c;
    }
    out
}

/// `grad_mu . u`, the potential vorticity of a state.
pub fn pv_of_state(u: &StateField, mu: f64) -> PVField {
    let g = &u.grid;
    let i = C::i();
    let data = (0..g.total())
        .map(|idx| {
            if idx == 0 {
                return C0;
            }
            let [a, b, z] = g.xi(idx);
            i * (-b * u.comps[0][idx] + a * u.comps[1][idx] + mu * z * u.comps[3][idx])
        })
        .collect();
    PVField {
        q: ScalarField { grid: g.clone(), data },
        mu,
    }
}

/// QG initial potential vorticity `grad_mu . P_mu u0`.
pub fn pv_from_boussinesq(u0: &StateField, frames: &FrameTable) -> PVField {
    pv_of_state(&frames.project(u0, Which::Mu), frames.mu())
}

/// Lifted state `grad_mu Delta_mu^{-1} q`.
pub fn state_of_pv(q: &PVField) -> StateField {
    lift(&invert_unchecked(&q.q, q.mu), q.mu)
}

/// `-v_H . grad_H q` in conservative form, dealiased.
pub fn pv_tendency(q: &PVField) -> ScalarField {
    let g = &q.q.grid;
    let psi = invert_unchecked(&q.q, q.mu);
    let i = C::i();
    let v1: Vec<C> = psi.data.iter().enumerate().map(|(idx, c)| -i * g.xi(idx)[1] * c).collect();
    let v2: Vec<C> = psi.data.iter().enumerate().map(|(idx, c)| i * g.xi(idx)[0] * c).collect();
    let (v1p, v2p) = g.inverse_pair(&v1, &v2);
    let qp = g.inverse_real(&q.q.data);
    let f1: Vec<f64> = v1p.iter().zip(&qp).map(|(a, b)| a * b).collect();
    let f2: Vec<f64> = v2p.iter().zip(&qp).map(|(a, b)| a * b).collect();
    let (h1, h2) = g.forward_pair(&f1, &f2);
    let data = (0..g.total())
        .map(|idx| {
            if idx == 0 {
                return C0;
            }
            let [a, b, _] = g.xi(idx);
            -i * (a * h1[idx] + b * h2[idx])
        })
        .collect();
    let mut out = ScalarField { grid: g.clone(), data };
    dealias_scalar(&mut out);
    out
}

fn axpy_scalar(x: &ScalarField, a: f64, y: &ScalarField) -> ScalarField {
    ScalarField {
        grid: x.grid.clone(),
        data: x.data.iter().zip(&y.data).map(|(p, q)| p + a * q).collect(),
    }
}

/// One classical RK4 step of PV transport.
pub fn qg_step_pv(q: &PVField, dt: f64) -> Result<PVField> {
    let mu = q.mu;
    let f = |s: &ScalarField| pv_tendency(&PVField { q: s.clone(), mu });
    let k1 = f(&q.q);
    let k2 = f(&axpy_scalar(&q.q, 0.5 * dt, &k1));
    let k3 = f(&axpy_scalar(&q.q, 0.5 * dt, &k2));
    let k4 = f(&axpy_scalar(&q.q, dt, &k3));
    let mut out = q.q.clone();
    for idx in 0..out.data.len() {
        out.data[idx] += dt / 6.0 * (k1.data[idx] + 2.0 * k2.data[idx] + 2.0 * k3.data[idx] + k4.data[idx]);
    }
    if out.data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::BlowUp {
            time: f64::NAN,
            reason: "non-finite potential vorticity".into(),
        });
    }
    Ok(PVField { q: out, mu })
}

/// `-P_mu[(u . grad~) u]`.
pub fn projected_tendency(u: &StateField, frames: &FrameTable) -> StateField {
    frames.project(&advection(u), Which::Mu).scale(-1.0)
}

/// One RK4 step of the projected system, re-projecting every stage.
pub fn qg_step_projected(u: &StateField, dt: f64, frames: &FrameTable) -> Result<StateField> {
    let f = |s: &StateField| projected_tendency(s, frames);
    let k1 = f(u);
    let k2 = f(&u.axpy(0.5 * dt, &k1));
    let k3 = f(&u.axpy(0.5 * dt, &k2));
    let k4 = f(&u.axpy(dt, &k3));
    let mut out = u.clone();
    out.add_scaled(dt / 6.0, &k1);
    out.add_scaled(dt / 3.0, &k2);
    out.add_scaled(dt / 3.0, &k3);
    out.add_scaled(dt / 6.0, &k4);
    let out = frames.project(&out, Which::Mu);
    if !out.is_finite() {
        return Err(Error::BlowUp {
            time: f64::NAN,
            reason: "non-finite projected state".into(),
        });
    }
    Ok(out)
}

/// Starting point of a QG run.
#[derive(Clone, Debug)]
pub enum QgInit {
    Pv(PVField),
    Projected(StateField),
}

/// QG state in whichever form is being integrated.
#[derive(Clone, Debug)]
pub enum QgState {
    Pv(PVField),
    Projected(StateField),
}

impl QgState {
    pub fn lifted(&self) -> StateField {
        match self {
            QgState::Pv(q) => state_of_pv(q),
            QgState::Projected(u) => u.clone(),
        }
    }

    pub fn pv(&self, mu: f64) -> PVField {
        match self {
            QgState::Pv(q) => q.clone(),
            QgState::Projected(u) => pv_of_state(u, mu),
        }
    }
}

/// Sampled QG trajectory stored as potential vorticity.
#[derive(Clone, Debug)]
pub struct QgTrajectory {
    pub mu: f64,
    pub times: Vec<f64>,
    pub pv: Vec<PVField>,
    pub steps: usize,
}

impl QgTrajectory {
    pub fn lifted(&self, k: usize) -> StateField {
        state_of_pv(&self.pv[k])
    }

    pub fn grid(&self) -> &Arc<WaveGrid> {
        &self.pv[0].q.grid
    }
}

/// Largest horizontal advective rate of a PV field.
fn pv_rate(q: &PVField) -> f64 {
    let g = &q.q.grid;
    let u = state_of_pv(q);
    let phys = u.to_physical();
    (0..2)
        .map(|j| {
            let vmax = phys.comps[j].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            vmax * g.axis_wavenumbers(j).iter().fold(0.0f64, |m, k| m.max(k.abs()))
        })
        .sum()
}

/// Integrates the QG system on the sample wall of `cfg` (only `mu`, grid, `T`, samples
/// and the advective part of the step policy are used).
pub fn qg_solve(
    init: QgInit,
    cfg: &SimConfig,
    frames: Option<&FrameTable>,
    mut sink: impl FnMut(usize, f64, &QgState) -> Result<()>,
) -> Result<QgTrajectory> {
    cfg.validate()?;
    let times = uniform_wall(cfg.t_final, cfg.samples);
    let mu = cfg.mu;
    let mut state = match init {
        QgInit::Pv(q) => QgState::Pv(q),
        QgInit::Projected(u) => {
            if frames.is_none() {
                return Err(Error::Config("projected form needs a frame table".into()));
            }
            QgState::Projected(u)
        }
    };
    let mut traj = QgTrajectory {
        mu,
        times: times.clone(),
        pv: Vec::with_capacity(times.len()),
        steps: 0,
    };
    let sup0 = continuum_pv_sup(&state.pv(mu));
    sink(0, 0.0, &state)?;
    traj.pv.push(state.pv(mu));
    for k in 0..times.len() - 1 {
        let (ta, tb) = (times[k], times[k + 1]);
        let q = state.pv(mu);
        let target = match cfg.dt_policy {
            DtPolicy::Fixed { dt } => dt,
            DtPolicy::Cfl { cfl, dt_max, .. } => {
                let r = pv_rate(&q);
                if r > 0.0 {
                    dt_max.min(cfl / r)
                } else {
                    dt_max
                }
            }
        };
        let sub = ((tb - ta) / target - 1e-9).ceil().max(1.0) as usize;
        let h = (tb - ta) / sub as f64;
        for _ in 0..sub {
            state = match &state {
                QgState::Pv(q) => QgState::Pv(qg_step_pv(q, h)?),
                QgState::Projected(u) => QgState::Projected(qg_step_projected(u, h, frames.unwrap())?),
            };
            traj.steps += 1;
        }
        let q = state.pv(mu);
        let sup = q.q.to_physical().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if sup0 > 0.0 && sup > cfg.blowup_factor * sup0 {
            return Err(Error::BlowUp {
                time: tb,
                reason: format!("PV sup-norm {sup:.3e} exceeds {} x initial", cfg.blowup_factor),
            });
        }
        sink(k + 1, tb, &state)?;
        traj.pv.push(q);
    }
    Ok(traj)
}

/// Continuum estimate of `||q||_inf`.
pub fn continuum_pv_sup(q: &PVField) -> f64 {
    crate::diagnostics::continuum_sup(&q.q, 16)
}

/// `integral |grad_mu psi|^2` in coefficient normalization.
pub fn qg_energy(q: &PVField) -> f64 {
    state_of_pv(q).norm_sq()
}
