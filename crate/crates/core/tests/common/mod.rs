#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use boussq_core::harness::{make_initial_data, DataKind, DataParams};
use boussq_core::{make_grid, StateField, WaveGrid};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn grid_2pi(n: usize) -> Arc<WaveGrid> {
    make_grid([n; 3], [2.0 * PI; 3]).unwrap()
}

pub fn grid_4pi(n: usize) -> Arc<WaveGrid> {
    make_grid([n; 3], [4.0 * PI; 3]).unwrap()
}

/// Divergence-free, mean-free, band-limited state of unit `H^6` norm.
pub fn solenoidal(grid: &Arc<WaveGrid>, seed: u64) -> StateField {
    make_initial_data(DataKind::RandomBandlimited, seed, grid, 1.0, &DataParams::default()).unwrap()
}

/// Real field with independent Gaussian coefficients, no constraints besides realness.
pub fn rough(grid: &Arc<WaveGrid>, seed: u64) -> StateField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = StateField::zeros(grid);
    for c in 0..4 {
        for z in f.comps[c].iter_mut() {
            *z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    f.symmetrize();
    f
}

/// Single real Fourier mode `amp * cos(m . x)` in component `c` (box `2 pi`).
pub fn cos_mode(grid: &Arc<WaveGrid>, m: [i64; 3], c: usize, amp: f64) -> StateField {
    let mut f = StateField::zeros(grid);
    f.comps[c][grid.flat_of_mode(m)] += Complex64::new(0.5 * amp, 0.0);
    f.comps[c][grid.flat_of_mode([-m[0], -m[1], -m[2]])] += Complex64::new(0.5 * amp, 0.0);
    f
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
