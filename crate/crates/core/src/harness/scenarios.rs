use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::boussinesq::{Boussinesq, DtPolicy};
use crate::diagnostics::{
    diff_name, error_name, hs_name, rate_fit, sobolev_norm, sobolev_norm_scalar, time_infimum, time_supremum, wkinf_norm,
    DiagnosticsRecord, W1INF,
};
use crate::dispersion::{c_mu_profile, decay_sweep, default_x_set, fit_decay, log_space, AnnulusQuadrature, DispersionRow};
use crate::error::Result;
use crate::mls::{error_field, free_flow, largeness_constant, mls_solve, MlsTrajectory};
use crate::qg::{continuum_pv_sup, pv_from_boussinesq, qg_energy, qg_solve, QgInit, QgState};
use crate::spectral_core::{make_grid, StateField};
use crate::tolerances as tol;
use crate::wave_ops::{det3, eigenframe, frobenius, hessian_det_p, hessian_fd, mat_vec, symbol_l, FrameTable, Which};

use super::initial::{make_initial_data, DataKind};
use super::runner::{diff_values, frames_for, state_values, RunCtx};
use super::{dichotomy, store, Clause, Outcome, Scenario};

pub(super) fn dispatch(ctx: &RunCtx) -> Result<Outcome> {
    match ctx.spec.scenario {
        Scenario::EigenCheck => eigen_check(ctx),
        Scenario::ProjBound => proj_bound(ctx),
        Scenario::Dispersion => dispersion(ctx),
        Scenario::ConvergePrepared => converge_prepared(ctx),
        Scenario::NonconvergeHs => nonconverge_hs(ctx),
        Scenario::NonconvergeMu1 => nonconverge_mu1(ctx),
        Scenario::Dichotomy => dichotomy::run(ctx),
        Scenario::ContinuityN => continuity_n(ctx),
        Scenario::ContinuityMu => continuity_mu(ctx),
        Scenario::DuhamelDecay => duhamel_decay(ctx),
        Scenario::Conservation => conservation(ctx),
    }
}

pub(super) fn run_id(mu: f64, n: f64) -> String {
    format!("mu={mu}:N={n}")
}

fn gaussian3(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)]
}

fn eigen_check(ctx: &RunCtx) -> Result<Outcome> {
    let spec = ctx.spec;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (mut ortho, mut resid, mut psum) = (0.0f64, 0.0f64, 0.0f64);
    for trial in 0..spec.trials {
        let mut xi = gaussian3(&mut rng);
        let scale = (rng.gen_range(0.1f64.ln()..10.0f64.ln())).exp();
        xi = xi.map(|c| c * scale);
        // Every 16th sample sits on the vertical axis, where the wave vectors switch formula.
        if trial % 16 == 0 {
            xi = [0.0, 0.0, xi[2]];
        }
        let mu = rng.gen_range(0.25..4.0);
        let fr = eigenframe(xi, mu)?;
        let vecs = fr.vectors();
        let lam = fr.eigenvalues(1.0);
        let l = symbol_l(xi, mu, 1.0)?;
        let lnorm = frobenius(&l);
        for i in 0..4 {
            for j in 0..4 {
                let ip: Complex64 = (0..4).map(|c| vecs[i][c] * vecs[j][c].conj()).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                ortho = ortho.max((ip - target).norm());
                let outer: Complex64 = (0..4).map(|k| vecs[k][i] * vecs[k][j].conj()).sum();
                psum = psum.max((outer - target).norm());
            }
            let lb = mat_vec(&l, &vecs[i]);
            let r = (0..4).map(|c| (lb[c] - lam[i] * vecs[i][c]).norm_sqr()).sum::<f64>().sqrt();
            resid = resid.max(r / lnorm);
        }
    }
    let mut out = Outcome::default();
    out.clauses.push(Clause::check("orthonormality", ortho, "<", tol::ALGEBRAIC));
    out.clauses.push(Clause::check("eigen-residual", resid, "<", tol::ALGEBRAIC));
    out.clauses.push(Clause::check("projection-sum", psum, "<", tol::ALGEBRAIC));

    let mut hess_err = 0.0f64;
    for &mu in &[0.5, 2.0, 3.0] {
        for _ in 0..spec.hessian_trials {
            let xi = off_axis_sample(&mut rng);
            let exact = hessian_det_p(xi, mu)?;
            let fd = det3(hessian_fd(xi, mu, tol::HESSIAN_FD_STEP));
            hess_err = hess_err.max(((fd - exact) / exact).abs());
        }
    }
    let mut degenerate = 0.0f64;
    for _ in 0..spec.hessian_trials {
        let xi = gaussian3(&mut rng);
        degenerate = degenerate.max(hessian_det_p(xi, 1.0)?.abs());
        let mu = rng.gen_range(0.25..4.0);
        degenerate = degenerate.max(hessian_det_p([0.0, 0.0, xi[2]], mu)?.abs());
    }
    out.clauses.push(Clause::check("hessian-fd", hess_err, "<", tol::HESSIAN_FD_REL));
    out.clauses.push(Clause::check("hessian-degenerate", degenerate, "==", 0.0));
    Ok(out)
}

/// Direction with `0.3 < |cos| < 0.95` to the vertical, radius in `[0.5, 2]`.
fn off_axis_sample(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let d = gaussian3(rng);
        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let c = (d[2] / n).abs();
        if c > 0.3 && c < 0.95 {
            let r = rng.gen_range(0.5..2.0);
            return d.map(|x| x * r / n);
        }
    }
}

fn proj_bound(ctx: &RunCtx) -> Result<Outcome> {
    let spec = ctx.spec;
    let grid = make_grid([spec.grid; 3], [spec.box_len; 3])?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let params = spec.data_params();
    let (mut worst, mut least) = (0.0f64, f64::INFINITY);
    for trial in 0..spec.trials {
        let mu: f64 = rng.gen_range(0.25..4.0);
        let nu: f64 = rng.gen_range(0.25..4.0);
        let k = (trial % 3) as f64;
        let f = make_initial_data(DataKind::RandomBandlimited, rng.gen(), &grid, mu, &params)?;
        let pm = FrameTable::new(&grid, mu)?.project(&f, Which::Mu);
        let pn = FrameTable::new(&grid, nu)?.project(&f, Which::Mu);
        let lhs = sobolev_norm(&pm.sub(&pn), k);
        let scale = (mu - nu).abs() / (mu * nu).sqrt() * sobolev_norm(&f, k);
        if scale > 0.0 {
            let ratio = lhs / scale;
            worst = worst.max(ratio);
            least = least.min(ratio);
        }
    }
    let mut out = Outcome::default();
    out.clauses.push(Clause::check("continuity-bound", worst, "<=", tol::PROJECTION_CONTINUITY_FACTOR));
    out.clauses.push(Clause::check("nondegenerate-ratio", least, ">", 0.0));
    Ok(out)
}

#[derive(Serialize)]
struct SymmetryRow {
    mu: f64,
    c_hat: f64,
    c_hat_reciprocal: f64,
    ratio: f64,
}

fn dispersion(ctx: &RunCtx) -> Result<Outcome> {
    let spec = ctx.spec;
    let points = default_x_set(spec.x_extent, spec.seed);
    let quad = AnnulusQuadrature::new(spec.quad_h, points.clone())?;
    let nts = log_space(spec.nt_range[0], spec.nt_range[1], spec.nt_points);
    let mut out = Outcome::default();

    let sweeps: Vec<(f64, Vec<DispersionRow>)> = spec
        .mu
        .par_iter()
        .map(|&mu| Ok((mu, decay_sweep(mu, 1.0, &nts, &quad)?)))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (mu, sweep) in &sweeps {
        for r in sweep {
            out.records.push(DiagnosticsRecord::new(format!("mu={mu}"), r.t, ctx.hash.clone()).with("sup:G", r.sup_norm));
        }
        rows.extend(sweep.iter().cloned());
    }
    store::write_rows(&spec.out.join("dispersion.csv"), &rows)?;
    let series = |mu: f64| -> Vec<(f64, f64)> {
        sweeps
            .iter()
            .find(|(m, _)| *m == mu)
            .map(|(_, s)| s.iter().map(|r| (r.nt, r.sup_norm)).collect())
            .unwrap_or_default()
    };

    let fit2 = fit_decay(&series(2.0))?;
    out.clauses.push(Clause::within("decay-exponent", fit2.exponent, tol::DECAY_EXPONENT.0, tol::DECAY_EXPONENT.1));
    out.fit("decay:mu=2", &fit2);
    let s1: Vec<f64> = series(1.0).iter().map(|p| p.1).collect();
    let hi = s1.iter().copied().fold(0.0, f64::max);
    let lo = s1.iter().copied().fold(f64::INFINITY, f64::min);
    out.clauses.push(Clause::check("degenerate-variation", (hi - lo) / hi, "<", tol::DEGENERATE_VARIATION));

    let fine = AnnulusQuadrature::new(0.5 * spec.quad_h, points)?;
    let refined = decay_sweep(2.0, 1.0, &nts, &fine)?;
    let change = series(2.0)
        .iter()
        .zip(&refined)
        .map(|((_, a), r)| ((a - r.sup_norm) / r.sup_norm).abs())
        .fold(0.0, f64::max);
    out.clauses.push(Clause::check("self-convergence", change, "<", tol::QUADRATURE_SELF_CONVERGENCE));

    let cmu_list: Vec<f64> = spec.mu.iter().copied().filter(|&m| m != 1.0).collect();
    let table = c_mu_profile(&cmu_list, &nts, &quad)?;
    store::write_json(&spec.out.join("cmu_table.json"), &table)?;
    let mut above: Vec<_> = table.iter().filter(|e| e.mu > 1.0).collect();
    above.sort_by(|a, b| b.mu.total_cmp(&a.mu));
    let increasing = above.windows(2).filter(|w| w[1].c_hat <= w[0].c_hat).count();
    out.clauses.push(Clause::check("cmu-increasing-violations", increasing as f64, "==", 0.0));
    let symmetry: Vec<SymmetryRow> = table
        .iter()
        .filter(|e| e.mu > 1.0)
        .filter_map(|e| {
            let r = table.iter().find(|o| (o.mu * e.mu - 1.0).abs() < 1e-12)?;
            Some(SymmetryRow {
                mu: e.mu,
                c_hat: e.c_hat,
                c_hat_reciprocal: r.c_hat,
                ratio: e.c_hat.max(r.c_hat) / e.c_hat.min(r.c_hat),
            })
        })
        .collect();
    out.table("cmu", &table);
    out.table("reciprocal-symmetry", &symmetry);
    Ok(out)
}

/// Records of one member of an `N` sweep.
pub(super) struct Member {
    pub mu: f64,
    pub n: f64,
    pub records: Vec<DiagnosticsRecord>,
}

struct SweepBase {
    mu: f64,
    u0: StateField,
    frames: Arc<FrameTable>,
}

/// Every `(mu, N)` pair of the spec against the QG reference, optionally with the modified linear system.
fn sweep(ctx: &RunCtx, kind: DataKind, with_mls: bool) -> Result<(Vec<SweepBase>, Vec<Member>)> {
    let spec = ctx.spec;
    let mut bases = Vec::new();
    let mut members = Vec::new();
    for &mu in &spec.mu {
        let frames = frames_for(ctx, mu)?;
        let u0 = make_initial_data(kind, spec.seed, frames.grid(), mu, &spec.data_params())?;
        let qg = ctx.qg_reference(&u0, &frames)?;
        let runs: Vec<Member> = spec
            .n_list
            .par_iter()
            .map(|&n| {
                let solver = Boussinesq::with_frames(ctx.sim_config(mu, n), frames.clone())?;
                let mls: Option<MlsTrajectory> = if with_mls { Some(mls_solve(&u0, &qg, &frames, n)?) } else { None };
                let s = spec.s;
                let measure = |k: usize, t: f64, u: &StateField| {
                    let mut v = state_values(u, s);
                    let umu = qg.lifted(k);
                    diff_values(&mut v, u, &umu, s, "qg");
                    if let Some(m) = &mls {
                        let (up, um) = (m.field(k, Which::Plus), m.field(k, Which::Minus));
                        v.insert(error_name(&hs_name(s)), sobolev_norm(&error_field(u, &umu, &up, &um), s));
                        let mut fast = up;
                        fast.add_scaled(1.0, &um);
                        let free = free_flow(&u0, &frames, n, t);
                        v.insert(format!("duhamel:{}", hs_name(s + 1.0)), sobolev_norm(&fast.sub(&free), s + 1.0));
                    }
                    Ok(v)
                };
                let records = ctx.execute(&run_id(mu, n), &solver, &u0, &measure)?;
                Ok(Member { mu, n, records })
            })
            .collect::<Result<_>>()?;
        members.extend(runs);
        bases.push(SweepBase { mu, u0, frames });
    }
    Ok((bases, members))
}

fn all_records(members: &[Member]) -> Vec<DiagnosticsRecord> {
    members.iter().flat_map(|m| m.records.iter().cloned()).collect()
}

#[derive(Serialize)]
struct SweepRow {
    mu: f64,
    n: f64,
    value: f64,
}

fn converge_prepared(ctx: &RunCtx) -> Result<Outcome> {
    let spec = ctx.spec;
    let (bases, members) = sweep(ctx, DataKind::WellPrepared, false)?;
    let name = diff_name(&hs_name(spec.s), "qg");
    let mut out = Outcome::default();
    let mut rows = Vec::new();
    for b in &bases {
        let series: Vec<(f64, f64)> = members
            .iter()
            .filter(|m| m.mu == b.mu)
            .map(|m| Ok((m.n, time_supremum(&m.records, &name, (0.0, spec.t_final))?)))
            .collect::<Result<_>>()?;
        rows.extend(series.iter().map(|&(n, value)| SweepRow { mu: b.mu, n, value }));
        let fit = rate_fit(&series, -1.0)?;
        out.clauses.push(Clause::within(
            format!("rate-slope:mu={}", b.mu),
            fit.slope,
            -1.0 - tol::RATE_SLOPE,
            -1.0 + tol::RATE_SLOPE,
        ));
        out.fit(format!("rate:mu={}", b.mu), &fit);
        let fast0 = sobolev_norm(&b.u0.sub(&b.frames.project(&b.u0, Which::Mu)), spec.m);
        out.table(format!("initial-fast-part:mu={}", b.mu), fast0);
    }
    out.table("sup-difference", &rows);
    out.records = all_records(&members);
    Ok(out)
}

fn nonconverge_hs(ctx: &RunCtx) -> Result<Outcome> {
    let spec = ctx.spec;
    let (bases, members) = sweep(ctx, DataKind::IllPrepared, false)?;
    let name = diff_name(&hs_name(spec.s), "qg");
    let mut out = Outcome::default();
    let mut rows = Vec::new();
    for b in &bases {
        let fast0 = sobolev_norm(&b.u0.sub(&b.frames.project(&b.u0, Which::Mu)), spec.s);
        let mut worst = f64::INFINITY;
        for m in members.iter().filter(|m| m.mu == b.mu) {
            let inf = time_infimum(&m.records, &name, (0.0, spec.t0))?;
            rows.push(SweepRow { mu: b.mu, n: m.n, value: inf });
            worst = worst.min(inf / fast0);
        }
        out.clauses.push(Clause::check(format!("hs-infimum:mu={}", b.mu), worst, ">=", tol::HS_INFIMUM_FACTOR));
        out.table(format!("initial-fast-part:mu={}", b.mu), fast0);
    }
    out.table("infimum", &rows);
    out.records = all_records(&members);
    Ok(out)
}

fn nonconverge_mu1(ctx: &RunCtx) -> Result<Outcome> {
    let spec = ctx.spec;
    let (bases, members) = sweep(ctx, DataKind::IllPrepared, false)?;
    let b = &bases[0];
    let large = largeness_constant(&b.u0, &b.frames);
    let name = diff_name(W1INF, "qg");
    let mut infs = Vec::new();
    for m in &members {
        infs.push(SweepRow {
            mu: m.mu,
            n: m.n,
            value: time_infimum(&m.records, &name, (0.0, spec.t0))?,
        });
    }
    let worst = infs.iter().map(|r| r.value / large.a).fold(f64::INFINITY, f64::min);
    let lo = infs.iter().min_by(|x, y| x.n.total_cmp(&y.n)).expect("nonempty sweep");
    let hi = infs.iter().max_by(|x, y| x.n.total_cmp(&y.n)).expect("nonempty sweep");

    let times = ctx.sim_config(1.0, 0.0).sample_times();
    let mut preserved = f64::INFINITY;
    for m in &members {
        for &t in times.iter().filter(|&&t| t <= spec.t0 * (1.0 + 1e-12)) {
            preserved = preserved.min(wkinf_norm(&free_flow(&b.u0, &b.frames, m.n, t), 0) / large.a);
        }
    }
    let mut out = Outcome::default();
    out.clauses.push(Clause::check("w1inf-infimum", worst, ">=", tol::W1INF_INFIMUM_FACTOR));
    out.clauses.push(Clause::check("no-decrease", hi.value / lo.value, ">=", tol::NO_DECREASE_FACTOR));
    out.clauses.push(Clause::check("largeness-preserved", preserved, ">=", 1.0));
    out.table("largeness", &large);
    out.table("infimum", &infs);
    out.records = all_records(&members);
    Ok(out)
}

fn duhamel_decay(ctx: &RunCtx) -> Result<Outcome> {
    let spec = ctx.spec;
    let (_, members) = sweep(ctx, DataKind::IllPrepared, true)?;
    let duh = format!("duhamel:{}", hs_name(spec.s + 1.0));
    let err = error_name(&hs_name(spec.s));
    let mut out = Outcome::default();
    let mut rows = Vec::new();
    let mut duh_series = Vec::new();
    let mut err_series = Vec::new();
    for m in members.iter().filter(|m| m.mu == spec.mu[0]) {
        let d = time_supremum(&m.records, &duh, (0.0, spec.t_final))?;
        let e = time_supremum(&m.records, &err, (0.0, spec.t0))?;
        let e_half = time_supremum(&m.records, &err, (0.0, 0.5 * spec.t0))?;
        duh_series.push((m.n, d));
        err_series.push((m.n, e));
        rows.push(serde_json::json!({ "N": m.n, "duhamel_sup": d, "error_sup": e, "error_sup_half_window": e_half }));
    }
    let fit = rate_fit(&duh_series, -1.0)?;
    out.clauses.push(Clause::within("duhamel-slope", fit.slope, -1.0 - tol::RATE_SLOPE, -1.0 + tol::RATE_SLOPE));
    out.fit("duhamel", &fit);
    let efit = rate_fit(&err_series, 0.0)?;
    out.clauses.push(Clause::check("error-growth-slope", efit.slope, "<=", tol::ERROR_GROWTH_SLOPE));
    out.fit("error", &efit);

    let probe = members
        .iter()
        .filter(|m| m.mu == spec.mu[0])
        .min_by(|a, b| (a.n - 200.0).abs().total_cmp(&(b.n - 200.0).abs()))
        .expect("nonempty sweep");
    let full = time_supremum(&probe.records, &err, (0.0, spec.t0))?;
    let half = time_supremum(&probe.records, &err, (0.0, 0.5 * spec.t0))?;
    out.clauses.push(Clause::check(format!("error-halving:N={}", probe.n), full / half, ">=", tol::ERROR_HALVING_RATIO));
    out.table("sweep", &rows);
    out.records = all_records(&members);
    Ok(out)
}

fn continuity_n(ctx: &RunCtx) -> Result<Outcome> {
    let spec = ctx.spec;
    let mu = spec.mu[0];
    let frames = frames_for(ctx, mu)?;
    let u0 = make_initial_data(DataKind::RandomBandlimited, spec.seed, frames.grid(), mu, &spec.data_params())?;
    let n_ref = spec.n_list[0];
    let base = Boussinesq::with_frames(ctx.sim_config(mu, n_ref), frames.clone())?;
    let states = ctx.trajectory(&base, &u0)?;
    let times = base.cfg.sample_times();
    let mut records: Vec<DiagnosticsRecord> = states
        .iter()
        .zip(&times)
        .map(|(u, &t)| {
            let mut r = DiagnosticsRecord::new(run_id(mu, n_ref), t, ctx.hash.clone());
            r.values = state_values(u, spec.s);
            r
        })
        .collect();
    let s = spec.s;
    let members: Vec<Member> = spec.n_list[1..]
        .par_iter()
        .map(|&n| {
            let solver = Boussinesq::with_frames(ctx.sim_config(mu, n), frames.clone())?;
            let measure = |k: usize, _t: f64, u: &StateField| {
                let mut v = state_values(u, s);
                diff_values(&mut v, u, &states[k], s, "ref");
                Ok(v)
            };
            Ok(Member {
                mu,
                n,
                records: ctx.execute(&run_id(mu, n), &solver, &u0, &measure)?,
            })
        })
        .collect::<Result<_>>()?;
    let name = diff_name(&hs_name(s), "ref");
    let series: Vec<(f64, f64)> = members
        .iter()
        .map(|m| Ok((m.n - n_ref, time_supremum(&m.records, &name, (0.0, spec.t_final))?)))
        .collect::<Result<_>>()?;
    let fit = rate_fit(&series, 1.0)?;
    let mut out = Outcome::default();
    out.clauses.push(Clause::within(
        "continuity-N-slope",
        fit.slope,
        1.0 - tol::CONTINUITY_N_SLOPE,
        1.0 + tol::CONTINUITY_N_SLOPE,
    ));
    out.fit("continuity-N", &fit);
    out.table("series", &series);
    records.extend(all_records(&members));
    out.records = records;
    Ok(out)
}

fn continuity_mu(ctx: &RunCtx) -> Result<Outcome> {
    let spec = ctx.spec;
    let grid = ctx.sim_config(spec.mu[0], 0.0).make_grid()?;
    let u0 = make_initial_data(DataKind::RandomBandlimited, spec.seed, &grid, spec.mu[0], &spec.data_params())?;
    let qg_run = |mu: f64| -> Result<Vec<StateField>> {
        let frames = FrameTable::new(&grid, mu)?;
        let mut cfg = ctx.sim_config(mu, 0.0);
        if spec.dt.is_none() {
            cfg.dt_policy = DtPolicy::Fixed { dt: 0.005 };
        }
        let traj = qg_solve(QgInit::Pv(pv_from_boussinesq(&u0, &frames)), &cfg, None, |_, _, _| Ok(()))?;
        Ok((0..traj.times.len()).map(|k| traj.lifted(k)).collect())
    };
    let nu = spec.mu[0];
    let reference = qg_run(nu)?;
    let times = ctx.sim_config(nu, 0.0).sample_times();
    let s = spec.s;
    let name = diff_name(&hs_name(s), "nu");
    let runs: Vec<(f64, Vec<DiagnosticsRecord>)> = spec.mu[1..]
        .par_iter()
        .map(|&mu| {
            let states = qg_run(mu)?;
            let recs = states
                .iter()
                .zip(&reference)
                .zip(&times)
                .map(|((u, r), &t)| {
                    DiagnosticsRecord::new(format!("qg:mu={mu}"), t, ctx.hash.clone())
                        .with(hs_name(s), sobolev_norm(u, s))
                        .with(name.clone(), crate::diagnostics::sobolev_diff(u, r, s))
                })
                .collect();
            Ok((mu, recs))
        })
        .collect::<Result<_>>()?;
    let series: Vec<(f64, f64)> = runs
        .iter()
        .map(|(mu, recs)| Ok(((nu - mu).abs(), time_supremum(recs, &name, (0.0, spec.t_final))?)))
        .collect::<Result<_>>()?;
    let fit = rate_fit(&series, 1.0)?;
    let mut out = Outcome::default();
    out.clauses.push(Clause::within("continuity-mu-slope", fit.slope, 1.0 - tol::RATE_SLOPE, 1.0 + tol::RATE_SLOPE));
    out.fit("continuity-mu", &fit);
    out.table("series", &series);
    out.records = runs.into_iter().flat_map(|(_, r)| r).collect();
    Ok(out)
}

/// Median wall time of one step over a few repetitions.
fn step_cost(solver: &Boussinesq, u: &StateField, dt: f64) -> Result<f64> {
    const STEPS: usize = 8;
    let mut state = solver.step(u, dt)?;
    let mut samples = Vec::new();
    for _ in 0..5 {
        let clock = Instant::now();
        for _ in 0..STEPS {
            state = solver.step(&state, dt)?;
        }
        samples.push(clock.elapsed().as_secs_f64() / STEPS as f64);
    }
    samples.sort_by(f64::total_cmp);
    Ok(samples[samples.len() / 2])
}

fn conservation(ctx: &RunCtx) -> Result<Outcome> {
    let spec = ctx.spec;
    let mu = spec.mu[0];
    let frames = frames_for(ctx, mu)?;
    let u0 = make_initial_data(DataKind::RandomBandlimited, spec.seed, frames.grid(), mu, &spec.data_params())?;
    let mut out = Outcome::default();

    let s = spec.s;
    let measure = |_k: usize, _t: f64, u: &StateField| Ok(state_values(u, s));
    let members: Vec<Member> = spec
        .n_list
        .par_iter()
        .map(|&n| {
            let solver = Boussinesq::with_frames(ctx.sim_config(mu, n), frames.clone())?;
            Ok(Member {
                mu,
                n,
                records: ctx.execute(&run_id(mu, n), &solver, &u0, &measure)?,
            })
        })
        .collect::<Result<_>>()?;
    let mut drift = 0.0f64;
    let mut div = 0.0f64;
    for m in &members {
        let e0 = m.records[0].values["L2"].powi(2);
        for r in &m.records {
            drift = drift.max((r.values["L2"].powi(2) - e0).abs() / e0);
            div = div.max(r.values["divergence"]);
        }
    }
    out.clauses.push(Clause::check("energy-drift", drift, "<", tol::ENERGY_DRIFT));
    out.clauses.push(Clause::check("divergence", div, "<", tol::DIVERGENCE));

    // Timing uses one common step size so only the N dependence is measured.
    let costs: Vec<(f64, f64)> = spec
        .n_list
        .iter()
        .map(|&n| {
            let solver = Boussinesq::with_frames(ctx.sim_config(mu, n), frames.clone())?;
            Ok((n, step_cost(&solver, &u0, 1e-3)?))
        })
        .collect::<Result<_>>()?;
    let cmax = costs.iter().map(|c| c.1).fold(0.0, f64::max);
    let cmin = costs.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    out.clauses.push(Clause::check("step-cost-spread", cmax / cmin - 1.0, "<", tol::STEP_COST_SPREAD));
    out.table("step-seconds", &costs);

    let qg_dt = spec.dt.unwrap_or(1e-3);
    let mut cfg = ctx.sim_config(mu, 0.0);
    cfg.dt_policy = DtPolicy::Fixed { dt: qg_dt };
    let q0 = pv_from_boussinesq(&u0, &frames);
    let l2_0 = sobolev_norm_scalar(&q0.q, 0.0);
    let sup0 = continuum_pv_sup(&q0);
    let en0 = qg_energy(&q0);
    let (mut l2_drift, mut sup_drift, mut en_drift) = (0.0f64, 0.0f64, 0.0f64);
    let mut qg_records = Vec::new();
    let pv_traj = qg_solve(QgInit::Pv(q0.clone()), &cfg, None, |_, t, st| {
        let q = st.pv(mu);
        let (l2, sup, en) = (sobolev_norm_scalar(&q.q, 0.0), continuum_pv_sup(&q), qg_energy(&q));
        l2_drift = l2_drift.max((l2 - l2_0).abs() / l2_0);
        sup_drift = sup_drift.max((sup - sup0).abs() / sup0);
        en_drift = en_drift.max((en - en0).abs() / en0);
        qg_records.push(
            DiagnosticsRecord::new(format!("qg-pv:mu={mu}"), t, ctx.hash.clone())
                .with("q:L2", l2)
                .with("q:Linf", sup)
                .with("qg-energy", en),
        );
        Ok(())
    })?;
    let umu0 = frames.project(&u0, Which::Mu);
    let proj = qg_solve(QgInit::Projected(umu0), &cfg, Some(&frames), |_, _, _| Ok(()))?;
    let k_last = pv_traj.times.len() - 1;
    let a = pv_traj.lifted(k_last);
    let b = QgState::Pv(proj.pv[k_last].clone()).lifted();
    let equivalence = crate::diagnostics::sobolev_diff(&a, &b, 3.0) / sobolev_norm(&a, 3.0);
    out.clauses.push(Clause::check("pv-l2-drift", l2_drift, "<", tol::PV_L2_DRIFT));
    out.clauses.push(Clause::check("pv-linf-drift", sup_drift, "<", tol::PV_LINF_DRIFT));
    out.clauses.push(Clause::check("qg-energy-drift", en_drift, "<", tol::QG_ENERGY_DRIFT));
    out.clauses.push(Clause::check("formulation-equivalence", equivalence, "<", tol::FORMULATION_EQUIVALENCE));
    let mut records = all_records(&members);
    records.extend(qg_records);
    out.records = records;
    Ok(out)
}
