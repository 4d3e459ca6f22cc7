//! Exact linear algebra of the rotating stratified propagator.
//!
//! For `xi != 0` the symbol `L(xi)` is real skew-symmetric with eigenvalues
//! `0, 0, +i N p, -i N p`, where `p = |xi_mu| / |xi|` and
//! `xi_mu = (-xi2, xi1, 0, mu xi3)`. The eigenvectors `b_N, b_mu, b_+, b_-`
//! form an orthonormal basis of `C^4`; `b_- = conj(b_+)` componentwise.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral_core::{StateField, WaveGrid};

type C = Complex64;
const C0: C = C::new(0.0, 0.0);

pub type Mat4 = [[f64; 4]; 4];
pub type CVec4 = [C; 4];

fn norm3(x: [f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

fn check_xi(xi: [f64; 3]) -> Result<()> {
    if norm3(xi) == 0.0 || xi.iter().any(|v| !v.is_finite()) {
        return Err(Error::ZeroWavevector);
    }
    Ok(())
}

/// `p_mu(xi) = |xi_mu| / |xi|`, bounded between `min(1, mu)` and `max(1, mu)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseFunction {
    pub mu: f64,
}

impl PhaseFunction {
    pub fn eval(&self, xi: [f64; 3]) -> f64 {
        phase_p(xi, self.mu)
    }
}

pub fn phase_p(xi: [f64; 3], mu: f64) -> f64 {
    let h2 = xi[0] * xi[0] + xi[1] * xi[1];
    let z2 = xi[2] * xi[2];
    ((h2 + mu * mu * z2) / (h2 + z2)).sqrt()
}

/// The symbol matrix of the linear part for rotation `omega` and stratification `n`.
pub fn symbol_l(xi: [f64; 3], omega: f64, n: f64) -> Result<Mat4> {
    check_xi(xi)?;
    let [a, b, c] = xi;
    let k2 = a * a + b * b + c * c;
    let h2 = a * a + b * b;
    let s = 1.0 / k2;
    Ok([
        [0.0, omega * c * c * s, -omega * b * c * s, -n * a * c * s],
        [-omega * c * c * s, 0.0, omega * a * c * s, -n * b * c * s],
        [omega * b * c * s, -omega * a * c * s, 0.0, n * h2 * s],
        [n * a * c * s, n * b * c * s, -n * h2 * s, 0.0],
    ])
}

/// Orthonormal eigenbasis of the symbol at one wavevector.
#[derive(Clone, Debug)]
pub struct EigenFrame {
    pub xi: [f64; 3],
    pub mu: f64,
    pub b_n: CVec4,
    pub b_mu: CVec4,
    pub b_plus: CVec4,
    pub b_minus: CVec4,
    /// `p_mu(xi)`; the wave frequencies are `+-N p`.
    pub p: f64,
}

impl EigenFrame {
    /// Eigenvalues in the order `b_N, b_mu, b_+, b_-`.
    pub fn eigenvalues(&self, n: f64) -> [C; 4] {
        let w = n * self.p;
        [C0, C0, C::new(0.0, w), C::new(0.0, -w)]
    }

    pub fn vectors(&self) -> [CVec4; 4] {
        [self.b_n, self.b_mu, self.b_plus, self.b_minus]
    }
}

/// Closed-form eigenframe; on the vertical axis the `b_+-` limit `(1, +-i, 0, 0)/sqrt 2` is used.
pub fn eigenframe(xi: [f64; 3], mu: f64) -> Result<EigenFrame> {
    check_xi(xi)?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Config(format!("mu must be positive, got {mu}")));
    }
    let [a, b, c] = xi;
    let k = norm3(xi);
    let h = (a * a + b * b).sqrt();
    let km = (a * a + b * b + mu * mu * c * c).sqrt();
    let re = |x: f64| C::new(x, 0.0);
    let b_n = [re(a / k), re(b / k), re(c / k), C0];
    let b_mu = [re(-b / km), re(a / km), C0, re(mu * c / km)];
    let b_plus = if h == 0.0 {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        [re(r), C::new(0.0, r), C0, C0]
    } else {
        let d = 1.0 / (std::f64::consts::SQRT_2 * h * k * km);
        [
            C::new(mu * b * c * k * d, a * c * km * d),
            C::new(-mu * a * c * k * d, b * c * km * d),
            C::new(0.0, -h * h * km * d),
            C::new(h * h * k * d, 0.0),
        ]
    };
    let b_minus = b_plus.map(|z| z.conj());
    Ok(EigenFrame {
        xi,
        mu,
        b_n,
        b_mu,
        b_plus,
        b_minus,
        p: km / k,
    })
}

/// The slow projection matrix `xi_mu xi_mu^T / |xi_mu|^2`.
pub fn projection_matrix_mu(xi: [f64; 3], mu: f64) -> Result<Mat4> {
    check_xi(xi)?;
    let [a, b, c] = xi;
    let s = 1.0 / (a * a + b * b + mu * mu * c * c);
    Ok([
        [b * b * s, -a * b * s, 0.0, -mu * b * c * s],
        [-a * b * s, a * a * s, 0.0, mu * a * c * s],
        [0.0, 0.0, 0.0, 0.0],
        [-mu * b * c * s, mu * a * c * s, 0.0, mu * mu * c * c * s],
    ])
}

/// Closed-form `det Hess p_mu = (mu^2-1)^3 |xi_H|^2 xi3^4 / (|xi|^9 |xi_mu|^3)`.
pub fn hessian_det_p(xi: [f64; 3], mu: f64) -> Result<f64> {
    check_xi(xi)?;
    let [a, b, c] = xi;
    let h2 = a * a + b * b;
    let k = norm3(xi);
    let km = (h2 + mu * mu * c * c).sqrt();
    Ok((mu * mu - 1.0).powi(3) * h2 * c.powi(4) / (k.powi(9) * km.powi(3)))
}

/// Centered finite-difference Hessian of `p_mu`, Richardson-extrapolated from steps `h` and `h/2`.
pub fn hessian_fd(xi: [f64; 3], mu: f64, h: f64) -> [[f64; 3]; 3] {
    let raw = |h: f64| {
        let p = |d: [f64; 3]| phase_p([xi[0] + d[0], xi[1] + d[1], xi[2] + d[2]], mu);
        let mut hs = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                let e = |k: usize, s: f64| {
                    let mut d = [0.0; 3];
                    d[k] = s;
                    d
                };
                let add = |x: [f64; 3], y: [f64; 3]| [x[0] + y[0], x[1] + y[1], x[2] + y[2]];
                let v = if i == j {
                    (p(e(i, h)) - 2.0 * p([0.0; 3]) + p(e(i, -h))) / (h * h)
                } else {
                    (p(add(e(i, h), e(j, h))) - p(add(e(i, h), e(j, -h))) - p(add(e(i, -h), e(j, h)))
                        + p(add(e(i, -h), e(j, -h))))
                        / (4.0 * h * h)
                };
                hs[i][j] = v;
                hs[j][i] = v;
            }
        }
        hs
    };
    let coarse = raw(h);
    let fine = raw(0.5 * h);
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (4.0 * fine[i][j] - coarse[i][j]) / 3.0;
        }
    }
    out
}

pub fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Which spectral projection to apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Which {
    Mu,
    Plus,
    Minus,
    N,
}

#[inline]
fn dot(u: &CVec4, b: &CVec4) -> C {
    u[0] * b[0].conj() + u[1] * b[1].conj() + u[2] * b[2].conj() + u[3] * b[3].conj()
}

#[derive(Clone, Copy, Debug)]
struct ModeFrame {
    b_n: [f64; 3],
    b_mu: [f64; 4],
    b_plus: CVec4,
    p: f64,
}

/// Eigenframes of every lattice mode for one `mu`; the mean mode has an all-zero frame.
#[derive(Clone, Debug)]
pub struct FrameTable {
    grid: Arc<WaveGrid>,
    mu: f64,
    modes: Vec<ModeFrame>,
}

impl FrameTable {
    pub fn new(grid: &Arc<WaveGrid>, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::Config(format!("mu must be positive, got {mu}")));
        }
        let modes = (0..grid.total())
            .map(|idx| {
                if idx == 0 {
                    return Ok(ModeFrame {
                        b_n: [0.0; 3],
                        b_mu: [0.0; 4],
                        b_plus: [C0; 4],
                        p: 0.0,
                    });
                }
                let fr = eigenframe(grid.xi(idx), mu)?;
                Ok(ModeFrame {
                    b_n: [fr.b_n[0].re, fr.b_n[1].re, fr.b_n[2].re],
                    b_mu: fr.b_mu.map(|z| z.re),
                    b_plus: fr.b_plus,
                    p: fr.p,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FrameTable {
            grid: grid.clone(),
            mu,
            modes,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn grid(&self) -> &Arc<WaveGrid> {
        &self.grid
    }

    /// `p_mu` at a flat mode index (0 at the mean mode).
    pub fn p(&self, idx: usize) -> f64 {
        self.modes[idx].p
    }

    pub fn max_p(&self) -> f64 {
        self.modes.iter().map(|m| m.p).fold(0.0, f64::max)
    }

    /// Coefficient of `u` along `b_which` at one mode.
    #[inline]
    pub fn amplitude(&self, idx: usize, u: &CVec4, which: Which) -> C {
        let m = &self.modes[idx];
        match which {
            Which::Mu => u[0] * m.b_mu[0] + u[1] * m.b_mu[1] + u[3] * m.b_mu[3],
            Which::N => u[0] * m.b_n[0] + u[1] * m.b_n[1] + u[2] * m.b_n[2],
            Which::Plus => dot(u, &m.b_plus),
            Which::Minus => {
                let bm = m.b_plus.map(|z| z.conj());
                dot(u, &bm)
            }
        }
    }

    /// The eigenvector `b_which` at one mode.
    #[inline]
    pub fn vector(&self, idx: usize, which: Which) -> CVec4 {
        let m = &self.modes[idx];
        let re = |x: f64| C::new(x, 0.0);
        match which {
            Which::Mu => m.b_mu.map(re),
            Which::N => [re(m.b_n[0]), re(m.b_n[1]), re(m.b_n[2]), C0],
            Which::Plus => m.b_plus,
            Which::Minus => m.b_plus.map(|z| z.conj()),
        }
    }

    #[inline]
    pub fn project_mode(&self, idx: usize, u: &CVec4, which: Which) -> CVec4 {
        let a = self.amplitude(idx, u, which);
        self.vector(idx, which).map(|b| a * b)
    }

    pub fn project(&self, f: &StateField, which: Which) -> StateField {
        f.map_modes(|idx, u| self.project_mode(idx, &u, which))
    }

    /// Exact linear flow `e^{tL}` for stratification `n` (rotation `mu n`).
    pub fn propagate(&self, f: &StateField, t: f64, n: f64) -> StateField {
        f.map_modes(|idx, u| self.propagate_mode(idx, &u, t, n))
    }

    #[inline]
    pub fn propagate_mode(&self, idx: usize, u: &CVec4, t: f64, n: f64) -> CVec4 {
        if idx == 0 || u.iter().all(|z| *z == C0) {
            return [C0; 4];
        }
        let m = &self.modes[idx];
        let ap = dot(u, &m.b_plus);
        let bm = m.b_plus.map(|z| z.conj());
        let am = dot(u, &bm);
        let e = C::from_polar(1.0, n * m.p * t);
        let cp = ap * (e - 1.0);
        let cm = am * (e.conj() - 1.0);
        let mut out = *u;
        for c in 0..4 {
            out[c] += cp * m.b_plus[c] + cm * bm[c];
        }
        out
    }
}

/// `P_which f` for one `mu`.
pub fn project(f: &StateField, which: Which, mu: f64) -> Result<StateField> {
    Ok(FrameTable::new(&f.grid, mu)?.project(f, which))
}

/// Solution at time `t` of the linearized system started from `f`.
pub fn propagate_linear(f: &StateField, t: f64, n: f64, mu: f64) -> Result<StateField> {
    Ok(FrameTable::new(&f.grid, mu)?.propagate(f, t, n))
}

/// Applies a real 4x4 matrix to a complex 4-vector.
pub fn mat_vec(m: &Mat4, v: &CVec4) -> CVec4 {
    let mut out = [C0; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i] += m[i][j] * v[j];
        }
    }
    out
}

pub fn frobenius(m: &Mat4) -> f64 {
    m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}
