//! Random band-limited initial data.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diagnostics::sobolev_norm;
use crate::error::{Error, Result};
use crate::spectral_core::{leray_project, StateField, WaveGrid};
use crate::wave_ops::{FrameTable, Which};

/// Kind of initial datum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    RandomBandlimited,
    WellPrepared,
    IllPrepared,
}

/// Shape parameters of the random data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataParams {
    /// Sobolev index of the unit normalization.
    pub m: f64,
    /// Width `k0` of the spectral envelope `exp(-|xi|^2 / (2 k0^2))`.
    pub spectral_width: f64,
}

impl Default for DataParams {
    fn default() -> Self {
        DataParams {
            m: 6.0,
            spectral_width: 0.75,
        }
    }
}

/// Smallest `||u0 - P_mu u0||_{H^{m-3}}` accepted for ill-prepared data.
pub const ILL_PREPARED_FLOOR: f64 = 0.1;
const MAX_RESEEDS: u64 = 100;

fn random_field(seed: u64, grid: &Arc<WaveGrid>, params: &DataParams) -> StateField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = StateField::zeros(grid);
    let n = grid.n();
    let k0 = params.spectral_width;
    for idx in 0..grid.total() {
        let m = grid.mode(idx);
        let inside = (0..3).all(|j| 4 * m[j].unsigned_abs() as usize <= n[j]);
        let xi = grid.xi(idx);
        let env = (-(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]) / (2.0 * k0 * k0)).exp();
        for c in 0..4 {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            if inside {
                u.comps[c][idx] = Complex64::new(re, im) * env;
            }
        }
    }
    u.symmetrize();
    u.zero_mean();
    leray_project(&u)
}

fn normalize(u: StateField, m: f64) -> Result<StateField> {
    let nrm = sobolev_norm(&u, m);
    if !(nrm > 0.0) {
        return Err(Error::Numerical("initial datum vanished".into()));
    }
    Ok(u.scale(1.0 / nrm))
}

/// Band-limited (`|m_j| <= n_j/4`), mean-free, divergence-free data of unit `H^m` norm.
pub fn make_initial_data(
    kind: DataKind,
    seed: u64,
    grid: &Arc<WaveGrid>,
    mu: f64,
    params: &DataParams,
) -> Result<StateField> {
    match kind {
        DataKind::RandomBandlimited => normalize(random_field(seed, grid, params), params.m),
        DataKind::WellPrepared => {
            let frames = FrameTable::new(grid, mu)?;
            let u = random_field(seed, grid, params);
            normalize(frames.project(&u, Which::Mu), params.m)
        }
        DataKind::IllPrepared => {
            let frames = FrameTable::new(grid, mu)?;
            for attempt in 0..MAX_RESEEDS {
                let u = normalize(random_field(seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9)), grid, params), params.m)?;
                let fast = u.sub(&frames.project(&u, Which::Mu));
                if sobolev_norm(&fast, params.m - 3.0) >= ILL_PREPARED_FLOOR {
                    return Ok(u);
                }
            }
            Err(Error::Numerical(format!(
                "no ill-prepared datum with fast part >= {ILL_PREPARED_FLOOR} after {MAX_RESEEDS} seeds"
            )))
        }
    }
}
