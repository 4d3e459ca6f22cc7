//! Fast and slow parameter sequences approaching the resonant ratio `mu = 1`.
//!
//! Member `k` uses `mu_k = 1 + 2^{-k}`. The fast branch takes `N_k = C_k k^2` with
//! `C_k` the empirical dispersive constant; the slow branch takes `N_k = |1 - mu_k|^{-1/2}`.
//! Both are measured against the `mu = 1` QG solution in `L^q(0, T; W^{1,inf})`.

use std::path::PathBuf;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boussinesq::Boussinesq;
use crate::diagnostics::{diff_name, lq_time_norm, DiagnosticsRecord, W1INF};
use crate::dispersion::{c_mu_profile, default_x_set, log_space, AnnulusQuadrature, CmuEntry};
use crate::error::{Error, Result};
use crate::spectral_core::StateField;
use crate::tolerances as tol;

use super::initial::{make_initial_data, DataKind};
use super::runner::{diff_values, frames_for, state_values, RunCtx};
use super::{store, Clause, Outcome};

/// Growth regime of a sequence `(mu_k, N_k)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceClass {
    /// `N_k / C_k` grows.
    Fast,
    /// `N_k |1 - mu_k|` decays.
    Slow,
    /// Both rules hold, which means the constant table contradicts the fast rule's premise.
    Both,
    Unclassified,
}

/// Finite-sequence proxy of the two growth conditions.
///
/// Fast: `h_k = N_k / C_k` is nondecreasing and grows at least 4x overall.
/// Slow: the last `g_k = N_k |1 - mu_k|` is at most a quarter of the largest.
pub fn classify_sequence(n: &[f64], mu: &[f64], c_hat: &[f64]) -> SequenceClass {
    let h: Vec<f64> = n.iter().zip(c_hat).map(|(n, c)| n / c).collect();
    let g: Vec<f64> = n.iter().zip(mu).map(|(n, m)| n * (1.0 - m).abs()).collect();
    let fast = h.len() >= 2 && h.windows(2).all(|w| w[1] >= w[0]) && h[h.len() - 1] >= 4.0 * h[0];
    let gmax = g.iter().copied().fold(0.0, f64::max);
    let slow = g.len() >= 2 && g[g.len() - 1] <= 0.25 * gmax;
    match (fast, slow) {
        (true, true) => SequenceClass::Both,
        (true, false) => SequenceClass::Fast,
        (false, true) => SequenceClass::Slow,
        (false, false) => SequenceClass::Unclassified,
    }
}

#[derive(Clone, Debug, Serialize)]
struct MemberRow {
    branch: &'static str,
    k: usize,
    mu: f64,
    n: f64,
    discrepancy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    versus_mu1: Option<f64>,
}

fn table_path(ctx: &RunCtx) -> PathBuf {
    ctx.spec.cmu_table.clone().unwrap_or_else(|| ctx.spec.out.join("cmu_table.json"))
}

/// Constant table covering `mus`, reusing the stored table and filling gaps by quadrature.
fn constant_table(ctx: &RunCtx, mus: &[f64]) -> Result<Vec<CmuEntry>> {
    let path = table_path(ctx);
    let mut table: Vec<CmuEntry> = if path.exists() { store::read_json(&path)? } else { Vec::new() };
    let missing: Vec<f64> = mus.iter().copied().filter(|m| !table.iter().any(|e| e.mu == *m)).collect();
    if !missing.is_empty() {
        let spec = ctx.spec;
        let quad = AnnulusQuadrature::new(spec.quad_h, default_x_set(spec.x_extent, spec.seed))?;
        let nts = log_space(spec.nt_range[0], spec.nt_range[1], spec.nt_points);
        table.extend(c_mu_profile(&missing, &nts, &quad)?);
        table.sort_by(|a, b| b.mu.total_cmp(&a.mu));
        store::write_json(&path, &table)?;
    }
    Ok(table)
}

pub(super) fn run(ctx: &RunCtx) -> Result<Outcome> {
    let spec = ctx.spec;
    let levels: Vec<usize> = (1..=spec.levels).collect();
    let mus: Vec<f64> = levels.iter().map(|&k| 1.0 + 0.5f64.powi(k as i32)).collect();
    let mut wanted = mus.clone();
    wanted.push(2.0);
    let table = constant_table(ctx, &wanted)?;
    let c_of = |mu: f64| table.iter().find(|e| e.mu == mu).map(|e| e.c_hat).expect("table covers every member");
    let c_hat: Vec<f64> = mus.iter().map(|&m| c_of(m)).collect();
    let fast_n: Vec<f64> = levels.iter().zip(&c_hat).map(|(&k, c)| c * (k * k) as f64).collect();
    let slow_n: Vec<f64> = mus.iter().map(|m| (m - 1.0).abs().powf(-0.5)).collect();

    let frames1 = frames_for(ctx, 1.0)?;
    let u0 = make_initial_data(DataKind::IllPrepared, spec.seed, frames1.grid(), 1.0, &spec.data_params())?;
    let qg = ctx.qg_reference(&u0, &frames1)?;

    let mut plan = Vec::new();
    for (i, &k) in levels.iter().enumerate() {
        plan.push(("fast", k, mus[i], fast_n[i]));
    }
    for (i, &k) in levels.iter().enumerate() {
        plan.push(("slow", k, mus[i], slow_n[i]));
    }
    let s = spec.s;
    let name = diff_name(W1INF, "qg");
    let name_mu1 = diff_name(W1INF, "mu1");
    let results: Vec<(MemberRow, Vec<DiagnosticsRecord>)> = plan
        .par_iter()
        .map(|&(branch, k, mu, n)| {
            let frames = frames_for(ctx, mu)?;
            let solver = Boussinesq::with_frames(ctx.sim_config(mu, n), frames)?;
            let resonant: OnceLock<std::result::Result<Vec<StateField>, String>> = OnceLock::new();
            let measure = |idx: usize, _t: f64, u: &StateField| {
                let mut v = state_values(u, s);
                diff_values(&mut v, u, &qg.lifted(idx), s, "qg");
                if spec.compare_mu1 {
                    let states = resonant
                        .get_or_init(|| {
                            let tilde = Boussinesq::with_frames(ctx.sim_config(1.0, n), frames1.clone())
                                .map_err(|e| e.to_string())?;
                            ctx.trajectory(&tilde, &u0).map_err(|e| e.to_string())
                        })
                        .as_ref()
                        .map_err(|e| Error::Numerical(format!("mu = 1 comparison run failed: {e}")))?;
                    diff_values(&mut v, u, &states[idx], s, "mu1");
                }
                Ok(v)
            };
            let id = format!("{branch}:k={k}:mu={mu}:N={n}");
            let records = ctx.execute(&id, &solver, &u0, &measure)?;
            let lq = |key: &str| -> Option<f64> {
                let series: Option<Vec<(f64, f64)>> =
                    records.iter().map(|r| r.values.get(key).map(|v| (r.time, *v))).collect();
                series.map(|s| lq_time_norm(&s, spec.q))
            };
            let row = MemberRow {
                branch,
                k,
                mu,
                n,
                discrepancy: lq(&name).ok_or_else(|| Error::Numerical(format!("run {id} lacks {name}")))?,
                versus_mu1: if spec.compare_mu1 { lq(&name_mu1) } else { None },
            };
            Ok((row, records))
        })
        .collect::<Result<_>>()?;

    let mut out = Outcome::default();
    let series = |branch: &str| -> Vec<f64> {
        results.iter().filter(|(r, _)| r.branch == branch).map(|(r, _)| r.discrepancy).collect()
    };
    let fast = series("fast");
    let slow = series("slow");
    out.clauses.push(Clause::check(
        "fast-branch",
        fast[fast.len() - 1] / fast[0],
        "<",
        tol::FAST_BRANCH_FRACTION,
    ));
    out.clauses.push(Clause::check(
        "slow-branch",
        slow.iter().copied().fold(f64::INFINITY, f64::min) / slow[0],
        ">=",
        tol::SLOW_BRANCH_FRACTION,
    ));
    let baseline = table.iter().find(|e| e.mu == 2.0).expect("baseline present").c_hat_times_gap;
    let floor = mus
        .iter()
        .map(|&m| c_of(m) * (m - 1.0).abs())
        .fold(f64::INFINITY, f64::min);
    out.clauses.push(Clause::check("cmu-gap-floor", floor / baseline, ">=", tol::CMU_GAP_FLOOR));
    let ordered = c_hat.windows(2).all(|w| w[1] > w[0]);
    out.clauses.push(Clause::check("cmu-increasing", if ordered { 1.0 } else { 0.0 }, "==", 1.0));

    out.table("members", results.iter().map(|(r, _)| r.clone()).collect::<Vec<_>>());
    out.table("classification:fast", classify_sequence(&fast_n, &mus, &c_hat));
    out.table("classification:slow", classify_sequence(&slow_n, &mus, &c_hat));
    out.table(
        "cmu",
        mus.iter()
            .zip(&c_hat)
            .map(|(m, c)| serde_json::json!({ "mu": m, "c_hat": c, "c_hat_times_gap": c * (m - 1.0).abs() }))
            .collect::<Vec<_>>(),
    );
    out.records = results.into_iter().flat_map(|(_, r)| r).collect();
    Ok(out)
}
