//! Periodic-box spectral infrastructure.
//!
//! Coefficients are stored in row-major order with axis 0 slowest. The forward
//! transform carries the factor `1/(n1 n2 n3)`, so a coefficient equals the
//! mean of `f(x) e^{-i xi.x}` over the grid and the inverse transform is a
//! plain sum. All coefficient norms in this crate use that normalization: the
//! physical `L^2` integral norm equals `sqrt(volume)` times the coefficient norm.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Uniform periodic grid together with cached FFT plans.
#[derive(Clone)]
pub struct WaveGrid {
    n: [usize; 3],
    len: [f64; 3],
    k: [Vec<f64>; 3],
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
    xis: Vec<[f64; 3]>,
    mirrors: Vec<usize>,
    resolved: Vec<bool>,
}

impl fmt::Debug for WaveGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WaveGrid")
            .field("n", &self.n)
            .field("len", &self.len)
            .finish()
    }
}

impl PartialEq for WaveGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.len == other.len
    }
}

/// Builds a grid with `n[j]` points on a box of side `len[j]`.
pub fn make_grid(n: [usize; 3], len: [f64; 3]) -> Result<Arc<WaveGrid>> {
    for j in 0..3 {
        if n[j] < 4 || n[j] % 2 != 0 {
            return Err(Error::Config(format!(
                "resolution must be even and at least 4, got {} on axis {j}",
                n[j]
            )));
        }
        if !(len[j].is_finite() && len[j] > 0.0) {
            return Err(Error::Config(format!(
                "box length must be positive, got {} on axis {j}",
                len[j]
            )));
        }
    }
    let mut planner = FftPlanner::new();
    let fwd = n.map(|nj| planner.plan_fft_forward(nj));
    let inv = n.map(|nj| planner.plan_fft_inverse(nj));
    let k = [0, 1, 2].map(|j| {
        (0..n[j])
            .map(|i| signed_index(i, n[j]) as f64 * 2.0 * std::f64::consts::PI / len[j])
            .collect()
    });
    let mut grid = WaveGrid {
        n,
        len,
        k,
        fwd,
        inv,
        xis: Vec::new(),
        mirrors: Vec::new(),
        resolved: Vec::new(),
    };
    let total = grid.total();
    grid.xis = (0..total).map(|i| grid.xi_uncached(i)).collect();
    grid.mirrors = (0..total).map(|i| grid.mirror_uncached(i)).collect();
    grid.resolved = (0..total).map(|i| grid.resolved_uncached(i)).collect();
    Ok(Arc::new(grid))
}

/// Maps a storage index to the signed mode index in `-n/2 .. n/2-1`.
pub fn signed_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl WaveGrid {
    pub fn n(&self) -> [usize; 3] {
        self.n
    }

    pub fn len(&self) -> [f64; 3] {
        self.len
    }

    pub fn total(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn volume(&self) -> f64 {
        self.len[0] * self.len[1] * self.len[2]
    }

    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.total() as f64
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.n[1] + j) * self.n[2] + l
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let l = idx % self.n[2];
        let r = idx / self.n[2];
        [r / self.n[1], r % self.n[1], l]
    }

    /// Signed mode indices of a flat index.
    pub fn mode(&self, idx: usize) -> [i64; 3] {
        let [i, j, l] = self.unravel(idx);
        [
            signed_index(i, self.n[0]),
            signed_index(j, self.n[1]),
            signed_index(l, self.n[2]),
        ]
    }

    /// Flat index of a signed mode, wrapping periodically.
    pub fn flat_of_mode(&self, m: [i64; 3]) -> usize {
        let w = |mj: i64, nj: usize| mj.rem_euclid(nj as i64) as usize;
        self.index(w(m[0], self.n[0]), w(m[1], self.n[1]), w(m[2], self.n[2]))
    }

    /// Physical wavevector of a flat index.
    #[inline]
    pub fn xi(&self, idx: usize) -> [f64; 3] {
        self.xis[idx]
    }

    fn xi_uncached(&self, idx: usize) -> [f64; 3] {
        let [i, j, l] = self.unravel(idx);
        [self.k[0][i], self.k[1][j], self.k[2][l]]
    }

    pub fn axis_wavenumbers(&self, axis: usize) -> &[f64] {
        &self.k[axis]
    }

    /// Flat index of the mode `-m`.
    #[inline]
    pub fn mirror(&self, idx: usize) -> usize {
        self.mirrors[idx]
    }

    fn mirror_uncached(&self, idx: usize) -> usize {
        let [i, j, l] = self.unravel(idx);
        self.index(
            (self.n[0] - i) % self.n[0],
            (self.n[1] - j) % self.n[1],
            (self.n[2] - l) % self.n[2],
        )
    }

    /// Whether a mode survives the 2/3 truncation (`|m_j| <= n_j/3` on every axis).
    #[inline]
    pub fn is_resolved(&self, idx: usize) -> bool {
        self.resolved[idx]
    }

    fn resolved_uncached(&self, idx: usize) -> bool {
        let m = self.mode(idx);
        (0..3).all(|j| 3 * m[j].unsigned_abs() as usize <= self.n[j])
    }

    /// Physical coordinates of a grid point.
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let [i, j, l] = self.unravel(idx);
        [
            i as f64 * self.len[0] / self.n[0] as f64,
            j as f64 * self.len[1] / self.n[1] as f64,
            l as f64 * self.len[2] / self.n[2] as f64,
        ]
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.total() {
            return Err(Error::Shape {
                expected: self.total(),
                found: len,
            });
        }
        Ok(())
    }

    fn fft3(&self, data: &mut [Complex64], inverse: bool) {
        let plans = if inverse { &self.inv } else { &self.fwd };
        let [n0, n1, n2] = self.n;
        let mut scratch = vec![C0; plans.iter().map(|p| p.get_inplace_scratch_len()).max().unwrap_or(0)];
        plans[2].process_with_scratch(data, &mut scratch);

        let mut buf = vec![C0; n1.max(n0) * n2.max(n1)];
        for i in 0..n0 {
            let plane = &mut data[i * n1 * n2..(i + 1) * n1 * n2];
            for j in 0..n1 {
                for l in 0..n2 {
                    buf[l * n1 + j] = plane[j * n2 + l];
                }
            }
            plans[1].process_with_scratch(&mut buf[..n1 * n2], &mut scratch);
            for j in 0..n1 {
                for l in 0..n2 {
                    plane[j * n2 + l] = buf[l * n1 + j];
                }
            }
        }

        let stride = n1 * n2;
        let mut col = vec![C0; n0 * n2];
        for j in 0..n1 {
            for i in 0..n0 {
                let row = &data[i * stride + j * n2..i * stride + (j + 1) * n2];
                for (l, v) in row.iter().enumerate() {
                    col[l * n0 + i] = *v;
                }
            }
            plans[0].process_with_scratch(&mut col, &mut scratch);
            for i in 0..n0 {
                let row = &mut data[i * stride + j * n2..i * stride + (j + 1) * n2];
                for (l, v) in row.iter_mut().enumerate() {
                    *v = col[l * n0 + i];
                }
            }
        }

        if !inverse {
            let s = 1.0 / self.total() as f64;
            data.iter_mut().for_each(|v| *v *= s);
        }
    }

    /// Coefficients to grid values of a complex field.
    pub fn inverse_complex(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut d = coeffs.to_vec();
        self.fft3(&mut d, true);
        d
    }

    /// Grid values to coefficients of a complex field.
    pub fn forward_complex(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut d = values.to_vec();
        self.fft3(&mut d, false);
        d
    }

    /// Synthesizes two real fields from conjugate-symmetric spectra with one transform.
    pub fn inverse_pair(&self, a: &[Complex64], b: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let i = Complex64::i();
        let mut d: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x + i * y).collect();
        self.fft3(&mut d, true);
        (d.iter().map(|z| z.re).collect(), d.iter().map(|z| z.im).collect())
    }

    /// Analyzes two real fields with one transform.
    pub fn forward_pair(&self, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut z: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| Complex64::new(*x, *y)).collect();
        self.fft3(&mut z, false);
        let mut fa = vec![C0; z.len()];
        let mut fb = vec![C0; z.len()];
        for idx in 0..z.len() {
            let zm = z[self.mirror(idx)].conj();
            fa[idx] = 0.5 * (z[idx] + zm);
            fb[idx] = Complex64::new(0.0, -0.5) * (z[idx] - zm);
        }
        (fa, fb)
    }

    pub fn inverse_real(&self, coeffs: &[Complex64]) -> Vec<f64> {
        self.inverse_complex(coeffs).into_iter().map(|z| z.re).collect()
    }

    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut d: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fft3(&mut d, false);
        d
    }
}

/// Spectral coefficients of one scalar field.
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub grid: Arc<WaveGrid>,
    pub data: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<WaveGrid>) -> Self {
        ScalarField {
            grid: grid.clone(),
            data: vec![C0; grid.total()],
        }
    }

    pub fn from_coeffs(grid: &Arc<WaveGrid>, data: Vec<Complex64>) -> Result<Self> {
        grid.check_len(data.len())?;
        Ok(ScalarField { grid: grid.clone(), data })
    }

    /// Samples a real function on the grid and transforms it.
    pub fn from_fn(grid: &Arc<WaveGrid>, f: impl Fn([f64; 3]) -> f64) -> Self {
        let vals: Vec<f64> = (0..grid.total()).map(|i| f(grid.point(i))).collect();
        ScalarField {
            grid: grid.clone(),
            data: grid.forward_real(&vals),
        }
    }

    pub fn to_physical(&self) -> Vec<f64> {
        self.grid.inverse_real(&self.data)
    }

    pub fn mean(&self) -> Complex64 {
        self.data[0]
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Multiplication by `i xi_j`, one output per axis.
pub fn spectral_gradient(f: &ScalarField) -> [ScalarField; 3] {
    let g = &f.grid;
    [0, 1, 2].map(|ax| {
        let data = f
            .data
            .iter()
            .enumerate()
            .map(|(idx, c)| Complex64::new(0.0, g.xi(idx)[ax]) * c)
            .collect();
        ScalarField { grid: g.clone(), data }
    })
}

/// Spectral coefficients of `u = (v1, v2, v3, theta)`.
#[derive(Clone, Debug)]
pub struct StateField {
    pub grid: Arc<WaveGrid>,
    pub comps: [Vec<Complex64>; 4],
}

/// Grid samples of the four components of a state.
#[derive(Clone, Debug)]
pub struct PhysicalState {
    pub grid: Arc<WaveGrid>,
    pub comps: [Vec<f64>; 4],
}

impl StateField {
    pub fn zeros(grid: &Arc<WaveGrid>) -> Self {
        let t = grid.total();
        StateField {
            grid: grid.clone(),
            comps: [vec![C0; t], vec![C0; t], vec![C0; t], vec![C0; t]],
        }
    }

    pub fn from_comps(grid: &Arc<WaveGrid>, comps: [Vec<Complex64>; 4]) -> Result<Self> {
        for c in &comps {
            grid.check_len(c.len())?;
        }
        Ok(StateField { grid: grid.clone(), comps })
    }

    #[inline]
    pub fn at(&self, idx: usize) -> [Complex64; 4] {
        [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx], self.comps[3][idx]]
    }

    #[inline]
    pub fn set(&mut self, idx: usize, v: [Complex64; 4]) {
        for c in 0..4 {
            self.comps[c][idx] = v[c];
        }
    }

    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            data: self.comps[c].clone(),
        }
    }

    pub fn to_physical(&self) -> PhysicalState {
        let g = &self.grid;
        let (a, b) = g.inverse_pair(&self.comps[0], &self.comps[1]);
        let (c, d) = g.inverse_pair(&self.comps[2], &self.comps[3]);
        PhysicalState {
            grid: g.clone(),
            comps: [a, b, c, d],
        }
    }

    /// Mode-wise map `u(xi) -> op(idx, u(xi))`.
    pub fn map_modes(&self, op: impl Fn(usize, [Complex64; 4]) -> [Complex64; 4]) -> StateField {
        let mut out = StateField::zeros(&self.grid);
        for idx in 0..self.grid.total() {
            out.set(idx, op(idx, self.at(idx)));
        }
        out
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &StateField) -> StateField {
        let mut out = self.clone();
        out.add_scaled(a, other);
        out
    }

    pub fn add_scaled(&mut self, a: f64, other: &StateField) {
        for c in 0..4 {
            for (x, y) in self.comps[c].iter_mut().zip(&other.comps[c]) {
                *x += a * y;
            }
        }
    }

    pub fn sub(&self, other: &StateField) -> StateField {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, a: f64) -> StateField {
        let mut out = self.clone();
        out.comps.iter_mut().for_each(|c| c.iter_mut().for_each(|v| *v *= a));
        out
    }

    /// Coefficient-space inner product `sum conj(g) f` over all components.
    pub fn inner(&self, other: &StateField) -> Complex64 {
        let mut s = C0;
        for c in 0..4 {
            for (x, y) in self.comps[c].iter().zip(&other.comps[c]) {
                s += x * y.conj();
            }
        }
        s
    }

    pub fn norm_sq(&self) -> f64 {
        self.comps.iter().flatten().map(|c| c.norm_sqr()).sum()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.comps.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest `|xi . v(xi)|` over all modes.
    pub fn max_divergence(&self) -> f64 {
        (0..self.grid.total())
            .map(|idx| {
                let xi = self.grid.xi(idx);
                let u = self.at(idx);
                (xi[0] * u[0] + xi[1] * u[1] + xi[2] * u[2]).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Largest deviation from `u(-xi) = conj(u(xi))`.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for idx in 0..self.grid.total() {
            let m = self.grid.mirror(idx);
            for c in 0..4 {
                d = d.max((self.comps[c][idx] - self.comps[c][m].conj()).norm());
            }
        }
        d
    }

    /// Replaces each pair of coefficients by its conjugate-symmetric average.
    pub fn symmetrize(&mut self) {
        for idx in 0..self.grid.total() {
            let m = self.grid.mirror(idx);
            if m < idx {
                continue;
            }
            for c in 0..4 {
                let a = 0.5 * (self.comps[c][idx] + self.comps[c][m].conj());
                self.comps[c][idx] = a;
                self.comps[c][m] = a.conj();
            }
        }
    }

    pub fn zero_mean(&mut self) {
        for c in 0..4 {
            self.comps[c][0] = C0;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl PhysicalState {
    pub fn to_spectral(&self) -> StateField {
        let g = &self.grid;
        let (a, b) = g.forward_pair(&self.comps[0], &self.comps[1]);
        let (c, d) = g.forward_pair(&self.comps[2], &self.comps[3]);
        StateField {
            grid: g.clone(),
            comps: [a, b, c, d],
        }
    }

    pub fn from_samples(grid: &Arc<WaveGrid>, comps: [Vec<f64>; 4]) -> Result<Self> {
        for c in &comps {
            grid.check_len(c.len())?;
        }
        Ok(PhysicalState { grid: grid.clone(), comps })
    }

    pub fn max_abs(&self) -> f64 {
        (0..self.grid.total())
            .map(|i| (0..4).map(|c| self.comps[c][i].powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Physical samples of a state.
pub fn to_physical(f: &StateField) -> PhysicalState {
    f.to_physical()
}

/// Spectral coefficients of sampled data.
pub fn to_spectral(samples: &PhysicalState) -> StateField {
    samples.to_spectral()
}

/// Helmholtz projection of the velocity; theta is left untouched and the mean is removed.
pub fn leray_project(f: &StateField) -> StateField {
    let g = f.grid.clone();
    f.map_modes(|idx, u| {
        if idx == 0 {
            return [C0; 4];
        }
        let xi = g.xi(idx);
        let k2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        let d = (xi[0] * u[0] + xi[1] * u[1] + xi[2] * u[2]) / k2;
        [u[0] - xi[0] * d, u[1] - xi[1] * d, u[2] - xi[2] * d, u[3]]
    })
}

/// 2/3-rule truncation.
pub fn dealias(f: &StateField) -> StateField {
    let mut out = f.clone();
    dealias_in_place(&mut out);
    out
}

pub fn dealias_in_place(f: &mut StateField) {
    let g = f.grid.clone();
    for idx in 0..g.total() {
        if !g.is_resolved(idx) {
            for c in 0..4 {
                f.comps[c][idx] = C0;
            }
        }
    }
}

pub fn dealias_scalar(f: &mut ScalarField) {
    let g = f.grid.clone();
    for idx in 0..g.total() {
        if !g.is_resolved(idx) {
            f.data[idx] = C0;
        }
    }
}
