//! Frequency-localized wave propagator on `R^3` by direct quadrature.
//!
//! `G(t)(x) = (2 pi)^{-3} int psi(|xi|)^2 phi(|xi|) e^{i (x.xi + t N p_mu(xi))} dxi`.
//! Because `p_mu` is homogeneous of degree zero and depends on the polar angle only,
//! the integral separates in spherical coordinates `xi = r (sin th cos ph, sin th sin ph, c)`:
//!
//! `G = (2 pi)^{-3} int_{-1}^{1} e^{i N t p(c)} J(c) dc`,
//! `J(c) = int_0^{2 pi} I(rho sqrt(1-c^2) cos ph + z c) dph`,
//! `I(s) = int r^2 psi^2 phi e^{i r s} dr`,
//!
//! with `x = (rho cos a, rho sin a, z)`; the azimuth `a` drops out. Only the outer `c`
//! integral depends on `N t`, and it is resolved so that the phase changes by less than
//! `pi/8` per cell.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::least_squares;
use crate::error::{Error, Result};

type C = Complex64;
const C0: C = C::new(0.0, 0.0);
const R_MIN: f64 = 0.25;
const R_MAX: f64 = 4.0;
/// Largest `|phase change|` per cell of the outer quadrature.
const MAX_CELL_PHASE: f64 = std::f64::consts::FRAC_PI_8;
/// Largest number of outer quadrature cells accepted a priori.
const MAX_OUTER_CELLS: usize = 1 << 24;

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

/// Radial C^2 bump: 0 outside `[1/4, 4]`, 1 on `[1/2, 2]`.
pub fn cutoff_psi(r: f64) -> f64 {
    if r <= R_MIN || r >= R_MAX {
        0.0
    } else if r < 0.5 {
        smoothstep((r - R_MIN) / 0.25)
    } else if r <= 2.0 {
        1.0
    } else {
        1.0 - smoothstep((r - 2.0) / 2.0)
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Four-point Lagrange interpolation on a uniform table starting at `x0` with step `dx`.
#[inline]
fn interp_uniform(table: &[C], x0: f64, dx: f64, x: f64) -> C {
    let u = (x - x0) / dx;
    let last = table.len() - 1;
    let i = (u.floor() as isize).clamp(1, last as isize - 2) as usize;
    let t = u - i as f64;
    let (tm, t0, t1, t2) = (t + 1.0, t, t - 1.0, t - 2.0);
    let w0 = -t0 * t1 * t2 / 6.0;
    let w1 = tm * t1 * t2 / 2.0;
    let w2 = -tm * t0 * t2 / 2.0;
    let w3 = tm * t0 * t1 / 6.0;
    table[i - 1] * w0 + table[i] * w1 + table[i + 1] * w2 + table[i + 2] * w3
}

/// Evaluation point in cylindrical form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub x: [f64; 3],
}

impl EvalPoint {
    fn rho(&self) -> f64 {
        self.x[0].hypot(self.x[1])
    }
}

/// Origin, a horizontal and a vertical ray of 16 points each up to `extent`, and 64
/// random points in the ball of radius `extent`.
pub fn default_x_set(extent: f64, seed: u64) -> Vec<EvalPoint> {
    let mut pts = vec![EvalPoint { x: [0.0; 3] }];
    for k in 0..16 {
        let s = 0.5 + (extent - 0.5) * k as f64 / 15.0;
        pts.push(EvalPoint { x: [s, 0.0, 0.0] });
    }
    for k in 0..16 {
        let s = 0.5 + (extent - 0.5) * k as f64 / 15.0;
        pts.push(EvalPoint { x: [0.0, 0.0, s] });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = rand_distr::StandardNormal;
    for _ in 0..64 {
        let v: [f64; 3] = [rng.sample(normal), rng.sample(normal), rng.sample(normal)];
        let nv = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let r = rng.gen_range(0.0..extent);
        pts.push(EvalPoint { x: v.map(|c| c * r / nv) });
    }
    pts
}

/// Precomputed quadrature for `G(t)` on a fixed point set.
#[derive(Clone, Debug)]
pub struct AnnulusQuadrature {
    /// Spacing of the polar-cosine base grid; the azimuthal grid and the
    /// radial-transform table are refined in proportion.
    pub h: f64,
    pub points: Vec<EvalPoint>,
    c_nodes: usize,
    j_tables: Vec<Vec<C>>,
}

/// Default base spacing of the polar-cosine grid.
pub const DEFAULT_H: f64 = 1.0 / 1024.0;

impl AnnulusQuadrature {
    /// Quadrature for `phi = 1`.
    pub fn new(h: f64, points: Vec<EvalPoint>) -> Result<Self> {
        Self::with_profile(h, points, |_| 1.0)
    }

    /// Quadrature for a radial profile `phi(|xi|)`.
    pub fn with_profile(h: f64, points: Vec<EvalPoint>, phi: impl Fn(f64) -> f64) -> Result<Self> {
        if !(h > 0.0 && h <= 0.05) {
            return Err(Error::Config(format!("quadrature spacing must lie in (0, 0.05], got {h}")));
        }
        let extent = points
            .iter()
            .map(|p| (p.x[0] * p.x[0] + p.x[1] * p.x[1] + p.x[2] * p.x[2]).sqrt())
            .fold(0.0, f64::max);
        // J varies at rate up to R_MAX * |x| in c; require a fine enough base grid.
        if R_MAX * extent * h > MAX_CELL_PHASE {
            return Err(Error::Config(format!(
                "spacing {h} too coarse for evaluation points up to |x| = {extent}"
            )));
        }
        let refine = DEFAULT_H / h;
        let (gx, gw) = gauss_legendre(((400.0 * refine.max(1.0)).ceil()) as usize);
        let half = 0.5 * (R_MAX - R_MIN);
        let radial: Vec<(f64, f64)> = gx
            .iter()
            .zip(&gw)
            .map(|(x, w)| {
                let r = R_MIN + (x + 1.0) * half;
                let psi = cutoff_psi(r);
                (r, w * half * r * r * psi * psi * phi(r))
            })
            .collect();
        let s_max = extent + 4.0;
        let ds = 0.005 / refine.max(1.0);
        let s_count = (2.0 * s_max / ds).ceil() as usize + 1;
        let s0 = -s_max;
        let i_table: Vec<C> = (0..s_count)
            .map(|k| {
                let s = s0 + k as f64 * ds;
                radial.iter().map(|(r, w)| w * C::from_polar(1.0, r * s)).sum()
            })
            .collect();
        let c_nodes = (2.0 / h).round() as usize + 1;
        let n_phi = ((128.0 * refine).ceil() as usize).max(128);
        let cos_phi: Vec<f64> = (0..n_phi)
            .map(|k| (2.0 * std::f64::consts::PI * k as f64 / n_phi as f64).cos())
            .collect();
        let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
        let j_tables = points
            .iter()
            .map(|p| {
                let (rho, z) = (p.rho(), p.x[2]);
                (0..c_nodes)
                    .map(|k| {
                        let c = -1.0 + 2.0 * k as f64 / (c_nodes - 1) as f64;
                        let sc = (1.0 - c * c).max(0.0).sqrt();
                        let sum: C = cos_phi
                            .iter()
                            .map(|cp| interp_uniform(&i_table, s0, ds, rho * sc * cp + z * c))
                            .sum();
                        sum * dphi
                    })
                    .collect()
            })
            .collect();
        Ok(AnnulusQuadrature {
            h,
            points,
            c_nodes,
            j_tables,
        })
    }

    /// Number of outer cells needed to keep the phase change per cell below `pi/8`.
    pub fn outer_cells(&self, nt: f64, mu: f64) -> Result<usize> {
        // max |d p / d c| = |mu^2 - 1| |c| / p(c) <= |mu^2 - 1| / min(1, mu)
        let slope = (mu * mu - 1.0).abs() / mu.min(1.0);
        let by_phase = (2.0 * nt.abs() * slope / MAX_CELL_PHASE).ceil() as usize;
        let cells = by_phase.max(self.c_nodes - 1).max(4);
        let cells = cells + cells % 2;
        if cells > MAX_OUTER_CELLS {
            return Err(Error::Config(format!(
                "N t = {nt} needs {cells} quadrature cells, above the limit {MAX_OUTER_CELLS}"
            )));
        }
        Ok(cells)
    }

    /// `G(t)` at every point for `N t = nt`.
    pub fn evaluate(&self, nt: f64, mu: f64) -> Result<GValues> {
        if !(mu > 0.0) {
            return Err(Error::Config(format!("mu must be positive, got {mu}")));
        }
        let cells = self.outer_cells(nt, mu)?;
        let dc = 2.0 / cells as f64;
        let base_dc = 2.0 / (self.c_nodes - 1) as f64;
        let norm = (2.0 * std::f64::consts::PI).powi(-3);
        let mut acc = vec![C0; self.points.len()];
        for k in 0..=cells {
            let c = -1.0 + k as f64 * dc;
            let w = if k == 0 || k == cells {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let p = (1.0 + (mu * mu - 1.0) * c * c).sqrt();
            let ph = C::from_polar(w * dc / 3.0, nt * p);
            for (a, table) in acc.iter_mut().zip(&self.j_tables) {
                *a += ph * interp_uniform(table, -1.0, base_dc, c);
            }
        }
        let values: Vec<C> = acc.into_iter().map(|v| v * norm).collect();
        let sup = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        Ok(GValues { values, sup })
    }
}

/// Values of `G(t)` on the point set with their supremum.
#[derive(Clone, Debug)]
pub struct GValues {
    pub values: Vec<C>,
    pub sup: f64,
}

/// `G(t)` for stratification `n` at time `t`.
pub fn evaluate_g(t: f64, n: f64, mu: f64, quad: &AnnulusQuadrature) -> Result<GValues> {
    quad.evaluate(n * t, mu)
}

/// One row of the dispersion CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionRow {
    pub mu: f64,
    #[serde(rename = "N")]
    pub n: f64,
    pub t: f64,
    #[serde(rename = "Nt")]
    pub nt: f64,
    pub sup_norm: f64,
    pub h: f64,
}

/// Log-spaced `N t` values in `[lo, hi]`.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (count - 1).max(1) as f64).exp())
        .collect()
}

/// Sup-norms at fixed `n` for each requested `N t`.
pub fn decay_sweep(mu: f64, n: f64, nt_list: &[f64], quad: &AnnulusQuadrature) -> Result<Vec<DispersionRow>> {
    nt_list
        .iter()
        .map(|&nt| {
            let g = quad.evaluate(nt, mu)?;
            Ok(DispersionRow {
                mu,
                n,
                t: nt / n,
                nt,
                sup_norm: g.sup,
                h: quad.h,
            })
        })
        .collect()
}

/// Decay fit `sup ~ C (1 + N t)^{exponent}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub constant: f64,
    /// Constant with the exponent pinned to `-1/2`.
    pub pinned_constant: f64,
    /// Set when the sampled tail is not non-increasing.
    pub non_monotone_tail: bool,
}

/// Least squares of `log sup` against `log(1 + N t)`.
pub fn fit_decay(samples: &[(f64, f64)]) -> Result<DecayFit> {
    if samples.len() < 8 {
        return Err(Error::Numerical(format!("decay fit needs at least 8 samples, got {}", samples.len())));
    }
    let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.0).fold(0.0, f64::max);
    if !(lo > 0.0) || hi / lo < 100.0 {
        return Err(Error::Numerical("decay fit needs samples spanning two decades".into()));
    }
    if samples.iter().any(|s| !(s.1 > 0.0)) {
        return Err(Error::Numerical("decay fit needs positive sup-norms".into()));
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|(nt, v)| ((1.0 + nt).ln(), v.ln())).collect();
    let (slope, intercept) = least_squares(&pts);
    let pinned = pts.iter().map(|(x, y)| y + 0.5 * x).sum::<f64>() / pts.len() as f64;
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let tail = &sorted[sorted.len() / 2..];
    let non_monotone_tail = tail.windows(2).any(|w| w[1].1 > w[0].1 * (1.0 + 1e-9));
    Ok(DecayFit {
        exponent: slope,
        constant: intercept.exp(),
        pinned_constant: pinned.exp(),
        non_monotone_tail,
    })
}

/// One entry of the empirical constant table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmuEntry {
    pub mu: f64,
    pub exponent: f64,
    pub c_hat: f64,
    pub c_hat_times_gap: f64,
}

/// Empirical `C_mu` (exponent pinned to `-1/2`) over `nt_list` for each `mu != 1`.
pub fn c_mu_profile(mu_list: &[f64], nt_list: &[f64], quad: &AnnulusQuadrature) -> Result<Vec<CmuEntry>> {
    mu_list
        .iter()
        .map(|&mu| {
            if mu == 1.0 {
                return Err(Error::Config("the constant table excludes mu = 1".into()));
            }
            let rows = decay_sweep(mu, 1.0, nt_list, quad)?;
            let fit = fit_decay(&rows.iter().map(|r| (r.nt, r.sup_norm)).collect::<Vec<_>>())?;
            Ok(CmuEntry {
                mu,
                exponent: fit.exponent,
                c_hat: fit.pinned_constant,
                c_hat_times_gap: fit.pinned_constant * (1.0 - mu).abs(),
            })
        })
        .collect()
}
