//! Pinned acceptance thresholds. Every pass/fail clause in the harness reads from here.

/// Algebraic identities of the eigenframe (orthonormality, residuals, projection sums).
pub const ALGEBRAIC: f64 = 1e-12;

/// Relative agreement of the closed-form Hessian determinant with the finite-difference oracle.
pub const HESSIAN_FD_REL: f64 = 1e-6;
/// Base step of the Richardson-extrapolated finite-difference Hessian.
pub const HESSIAN_FD_STEP: f64 = 1e-3;

/// Constant factor of the projection-continuity inequality.
pub const PROJECTION_CONTINUITY_FACTOR: f64 = 3.0;

/// Admissible decay exponent window for `mu = 2`.
pub const DECAY_EXPONENT: (f64, f64) = (-0.6, -0.4);
/// Largest relative variation of the `mu = 1` sup-norm.
pub const DEGENERATE_VARIATION: f64 = 1e-3;
/// Largest relative change of sup-norms when the quadrature spacing halves.
pub const QUADRATURE_SELF_CONVERGENCE: f64 = 1e-2;
/// Smallest `C_mu |1 - mu|` relative to the `mu = 2` baseline.
pub const CMU_GAP_FLOOR: f64 = 0.1;

pub const ENERGY_DRIFT: f64 = 1e-6;
pub const DIVERGENCE: f64 = 1e-10;
/// Largest ratio of per-step wall time across the `N` sweep, minus one.
pub const STEP_COST_SPREAD: f64 = 0.2;
pub const PV_L2_DRIFT: f64 = 1e-8;
pub const PV_LINF_DRIFT: f64 = 1e-4;
pub const QG_ENERGY_DRIFT: f64 = 1e-6;
pub const FORMULATION_EQUIVALENCE: f64 = 1e-6;

/// Tolerance on fitted slopes that should equal `-1` (or `+1` in the continuity checks of `mu`).
pub const RATE_SLOPE: f64 = 0.15;
/// Tolerance on the continuity-in-`N` slope.
pub const CONTINUITY_N_SLOPE: f64 = 0.1;

/// Lower bound factor of the `H^s` non-convergence infimum.
pub const HS_INFIMUM_FACTOR: f64 = 0.5;
/// Lower bound factor of the `W^{1,inf}` infimum relative to the largeness constant.
pub const W1INF_INFIMUM_FACTOR: f64 = 0.5;
/// Largest-`N` infimum relative to the smallest-`N` infimum.
pub const NO_DECREASE_FACTOR: f64 = 0.9;

/// Required reduction of `sup ||E||` when the window halves.
pub const ERROR_HALVING_RATIO: f64 = 1.8;
/// Largest fitted log-log slope of `sup ||E||` against `N`.
pub const ERROR_GROWTH_SLOPE: f64 = 0.1;

/// Fast branch: final discrepancy below this fraction of the first.
pub const FAST_BRANCH_FRACTION: f64 = 0.5;
/// Slow branch: every discrepancy at least this fraction of the first.
pub const SLOW_BRANCH_FRACTION: f64 = 0.5;
