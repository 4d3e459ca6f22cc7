//! Integrating-factor RK4 for the full nonlinear system
//! `u_t = L u - P~ (u . grad~) u`, with `L` applied exactly through the eigenframe.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral_core::{dealias_in_place, leray_project, make_grid, StateField, WaveGrid};
use crate::wave_ops::FrameTable;

/// How the step size is chosen inside each interval between sample times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DtPolicy {
    /// Constant step (shortened to land on sample times).
    Fixed { dt: f64 },
    /// Advective CFL bound, optionally with a cap `N p_max dt <= max_phase` on the wave phase per step.
    Cfl { cfl: f64, max_phase: Option<f64>, dt_max: f64 },
}

impl Default for DtPolicy {
    fn default() -> Self {
        DtPolicy::Cfl {
            cfl: 0.3,
            max_phase: Some(0.5),
            dt_max: 0.05,
        }
    }
}

/// Physical and numerical parameters of one run. `Omega = mu N` is always derived.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub mu: f64,
    pub n: f64,
    pub grid: [usize; 3],
    pub box_len: [f64; 3],
    pub t_final: f64,
    pub dt_policy: DtPolicy,
    pub dealias: bool,
    pub nonlinear: bool,
    /// Number of uniformly spaced diagnostic samples after `t = 0`.
    pub samples: usize,
    /// Blow-up threshold relative to the initial physical sup-norm.
    pub blowup_factor: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            mu: 1.0,
            n: 1.0,
            grid: [32; 3],
            box_len: [4.0 * std::f64::consts::PI; 3],
            t_final: 1.0,
            dt_policy: DtPolicy::default(),
            dealias: true,
            nonlinear: true,
            samples: 64,
            blowup_factor: 1e3,
        }
    }
}

impl SimConfig {
    pub fn omega(&self) -> f64 {
        self.mu * self.n
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if !(self.n >= 0.0 && self.n.is_finite()) {
            return bad(format!("N must be nonnegative, got {}", self.n));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad(format!("T must be positive, got {}", self.t_final));
        }
        if self.samples == 0 {
            return bad("at least one sample is required".into());
        }
        match self.dt_policy {
            DtPolicy::Fixed { dt } if !(dt > 0.0) => return bad(format!("dt must be positive, got {dt}")),
            DtPolicy::Cfl { cfl, dt_max, .. } if !(cfl > 0.0 && dt_max > 0.0) => {
                return bad("cfl and dt_max must be positive".into())
            }
            _ => {}
        }
        Ok(())
    }

    pub fn make_grid(&self) -> Result<Arc<WaveGrid>> {
        make_grid(self.grid, self.box_len)
    }

    /// Diagnostic sample times `0, T/s, ..., T`.
    pub fn sample_times(&self) -> Vec<f64> {
        uniform_wall(self.t_final, self.samples)
    }
}

pub fn uniform_wall(t_final: f64, samples: usize) -> Vec<f64> {
    (0..=samples).map(|k| t_final * k as f64 / samples as f64).collect()
}

/// Physical fields needed for the conservative-form advection of a state.
fn advect(u: &StateField, dealias: bool) -> StateField {
    let g = &u.grid;
    let phys = u.to_physical();
    let [v1, v2, v3, th] = &phys.comps;
    let prod = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x * y).collect() };
    let (p11, p12) = g.forward_pair(&prod(v1, v1), &prod(v1, v2));
    let (p13, p22) = g.forward_pair(&prod(v1, v3), &prod(v2, v2));
    let (p23, p33) = g.forward_pair(&prod(v2, v3), &prod(v3, v3));
    let (p1t, p2t) = g.forward_pair(&prod(v1, th), &prod(v2, th));
    let p3t = g.forward_real(&prod(v3, th));
    let mut out = StateField::zeros(g);
    let i = Complex64::i();
    for idx in 0..g.total() {
        let [a, b, c] = g.xi(idx);
        out.comps[0][idx] = i * (a * p11[idx] + b * p12[idx] + c * p13[idx]);
        out.comps[1][idx] = i * (a * p12[idx] + b * p22[idx] + c * p23[idx]);
        out.comps[2][idx] = i * (a * p13[idx] + b * p23[idx] + c * p33[idx]);
        out.comps[3][idx] = i * (a * p1t[idx] + b * p2t[idx] + c * p3t[idx]);
    }
    if dealias {
        dealias_in_place(&mut out);
    }
    out.zero_mean();
    out
}

/// `(u . grad~) u` in conservative form, dealiased but not projected.
pub fn advection(u: &StateField) -> StateField {
    advect(u, true)
}

/// `P~ (u . grad~) u`, dealiased and Leray-projected.
pub fn nonlinear_term(u: &StateField) -> StateField {
    leray_project(&advection(u))
}

/// Largest advective CFL rate `sum_j max|v_j| kmax_j`.
pub fn advective_rate(u: &StateField) -> f64 {
    let g = &u.grid;
    let phys = u.to_physical();
    (0..3)
        .map(|j| {
            let vmax = phys.comps[j].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let kmax = g.axis_wavenumbers(j).iter().fold(0.0f64, |m, k| m.max(k.abs()));
            vmax * kmax
        })
        .sum()
}

/// Outcome of a completed integration.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub final_state: StateField,
    pub final_time: f64,
    pub steps: usize,
    pub wall_seconds: f64,
}

/// Full Boussinesq solver bound to one grid, `mu` and `N`.
pub struct Boussinesq {
    pub cfg: SimConfig,
    pub grid: Arc<WaveGrid>,
    pub frames: Arc<FrameTable>,
}

impl Boussinesq {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = cfg.make_grid()?;
        let frames = Arc::new(FrameTable::new(&grid, cfg.mu)?);
        Ok(Boussinesq { cfg, grid, frames })
    }

    /// Reuses a precomputed frame table (must match the grid and `mu`).
    pub fn with_frames(cfg: SimConfig, frames: Arc<FrameTable>) -> Result<Self> {
        cfg.validate()?;
        if frames.mu() != cfg.mu || frames.grid().n() != cfg.grid || frames.grid().len() != cfg.box_len {
            return Err(Error::Config("frame table does not match the configuration".into()));
        }
        let grid = frames.grid().clone();
        Ok(Boussinesq { cfg, grid, frames })
    }

    fn rhs(&self, u: &StateField) -> StateField {
        if !self.cfg.nonlinear {
            return StateField::zeros(&self.grid);
        }
        leray_project(&advect(u, self.cfg.dealias)).scale(-1.0)
    }

    fn lin(&self, u: &StateField, h: f64) -> StateField {
        self.frames.propagate(u, h, self.cfg.n)
    }

    /// One Lawson RK4 step of size `dt`.
    pub fn step(&self, u: &StateField, dt: f64) -> Result<StateField> {
        let h2 = 0.5 * dt;
        let k1 = self.rhs(u);
        let e_half_u = self.lin(u, h2);
        let k2 = self.rhs(&self.lin(&u.axpy(h2, &k1), h2));
        let k3 = self.rhs(&e_half_u.axpy(h2, &k2));
        let e_full_u = self.lin(u, dt);
        let k4 = self.rhs(&e_full_u.axpy(dt, &self.lin(&k3, h2)));
        let mut mid = k2;
        mid.add_scaled(1.0, &k3);
        let mut out = e_full_u;
        out.add_scaled(dt / 6.0, &self.lin(&k1, dt));
        out.add_scaled(dt / 3.0, &self.lin(&mid, h2));
        out.add_scaled(dt / 6.0, &k4);
        if !out.is_finite() {
            return Err(Error::BlowUp {
                time: f64::NAN,
                reason: "non-finite coefficients".into(),
            });
        }
        Ok(out)
    }

    /// Step size target for the interval starting at `u`.
    pub fn dt_target(&self, u: &StateField) -> Result<f64> {
        let rate = if self.cfg.nonlinear { advective_rate(u) } else { 0.0 };
        match self.cfg.dt_policy {
            DtPolicy::Fixed { dt } => {
                if dt * rate > 1.0 {
                    return Err(Error::Numerical(format!("CFL violation: dt * rate = {}", dt * rate)));
                }
                Ok(dt)
            }
            DtPolicy::Cfl { cfl, max_phase, dt_max } => {
                let mut dt = dt_max;
                if rate > 0.0 {
                    dt = dt.min(cfl / rate);
                }
                if let Some(ph) = max_phase {
                    let w = self.cfg.n * self.frames.max_p();
                    if w > 0.0 {
                        dt = dt.min(ph / w);
                    }
                }
                Ok(dt)
            }
        }
    }

    /// Integrates from `u0` at `t = 0` to `T`, calling `sink` at every sample time.
    pub fn solve(
        &self,
        u0: &StateField,
        sink: impl FnMut(usize, f64, &StateField) -> Result<()>,
    ) -> Result<SolveReport> {
        self.solve_from(0, u0, sink)
    }

    /// Resumes at sample index `start` (whose state is `u`), emitting later samples only.
    pub fn solve_from(
        &self,
        start: usize,
        u: &StateField,
        mut sink: impl FnMut(usize, f64, &StateField) -> Result<()>,
    ) -> Result<SolveReport> {
        let times = self.cfg.sample_times();
        if start >= times.len() {
            return Err(Error::Config(format!("resume index {start} beyond the sample wall")));
        }
        let clock = Instant::now();
        let sup0 = u.to_physical().max_abs();
        let mut state = u.clone();
        let mut steps = 0;
        if start == 0 {
            sink(0, 0.0, &state)?;
        }
        for k in start..times.len() - 1 {
            let (ta, tb) = (times[k], times[k + 1]);
            let target = self.dt_target(&state)?;
            let sub = ((tb - ta) / target - 1e-9).ceil().max(1.0) as usize;
            let h = (tb - ta) / sub as f64;
            for s in 0..sub {
                state = self.step(&state, h).map_err(|e| match e {
                    Error::BlowUp { reason, .. } => Error::BlowUp {
                        time: ta + (s + 1) as f64 * h,
                        reason,
                    },
                    other => other,
                })?;
                steps += 1;
            }
            let sup = state.to_physical().max_abs();
            if sup0 > 0.0 && sup > self.cfg.blowup_factor * sup0 {
                return Err(Error::BlowUp {
                    time: tb,
                    reason: format!("sup-norm {sup:.3e} exceeds {} x initial", self.cfg.blowup_factor),
                });
            }
            sink(k + 1, tb, &state)?;
        }
        Ok(SolveReport {
            final_state: state,
            final_time: *times.last().unwrap(),
            steps,
            wall_seconds: clock.elapsed().as_secs_f64(),
        })
    }
}

/// Combined energy `||v||^2 + ||theta||^2` in coefficient normalization.
pub fn energy(u: &StateField) -> f64 {
    u.norm_sq()
}
