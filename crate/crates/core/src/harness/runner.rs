//! Checkpointed execution of single runs and the shared measurement helpers.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use crate::boussinesq::{Boussinesq, DtPolicy, SimConfig};
use crate::checkpoint::{Checkpoint, FormTag};
use crate::diagnostics::{diff_name, hs_name, sobolev_diff, sobolev_norm, wkinf_norm, DiagnosticsRecord, L2, W1INF};
use crate::error::Result;
use crate::qg::{pv_from_boussinesq, qg_solve, QgInit, QgTrajectory};
use crate::spectral_core::StateField;
use crate::wave_ops::FrameTable;

use super::{store, ExperimentSpec};

/// Samples between two checkpoints.
pub(crate) const CHECKPOINT_EVERY: usize = 16;

pub(crate) struct RunCtx<'a> {
    pub spec: &'a ExperimentSpec,
    pub hash: String,
}

/// Named values recorded at one sample.
pub(crate) type Values = BTreeMap<String, f64>;

impl RunCtx<'_> {
    pub fn sim_config(&self, mu: f64, n: f64) -> SimConfig {
        let spec = self.spec;
        SimConfig {
            mu,
            n,
            grid: [spec.grid; 3],
            box_len: [spec.box_len; 3],
            t_final: spec.t_final,
            dt_policy: match spec.dt {
                Some(dt) => DtPolicy::Fixed { dt },
                None => DtPolicy::default(),
            },
            samples: spec.samples,
            ..SimConfig::default()
        }
    }

    fn run_hash(&self, run_id: &str) -> Result<String> {
        store::config_hash(&(&self.hash, run_id))
    }

    fn checkpoint_path(&self, run_id: &str) -> PathBuf {
        self.spec.out.join("checkpoints").join(format!("{}.bqck", file_stem(run_id)))
    }

    /// Integrates one Boussinesq run, resuming from its checkpoint when one matches.
    ///
    /// `measure` is evaluated at every sample; the records of a completed run are
    /// restored from its final checkpoint without recomputation.
    pub fn execute(
        &self,
        run_id: &str,
        solver: &Boussinesq,
        u0: &StateField,
        measure: &(dyn Fn(usize, f64, &StateField) -> Result<Values> + Sync),
    ) -> Result<Vec<DiagnosticsRecord>> {
        let hash = self.run_hash(run_id)?;
        let path = self.checkpoint_path(run_id);
        let last = solver.cfg.samples;
        let resumed = Checkpoint::load(&path).ok().filter(|cp| {
            cp.form == FormTag::Boussinesq
                && cp.config == solver.cfg
                && cp.sample_index <= last
                && cp.records.len() == cp.sample_index + 1
                && cp.records.first().is_some_and(|r| r.config_hash == hash)
        });
        let (start, state, mut records) = match resumed {
            Some(cp) => (cp.sample_index, cp.state(&solver.grid)?, cp.records),
            None => (0, u0.clone(), Vec::new()),
        };
        if start < last {
            solver.solve_from(start, &state, |k, t, u| {
                let mut rec = DiagnosticsRecord::new(run_id, t, hash.clone());
                rec.values = measure(k, t, u)?;
                records.push(rec);
                if k > 0 && (k % CHECKPOINT_EVERY == 0 || k == last) {
                    Checkpoint::from_state(&solver.cfg, k, t, u, &records).save(&path)?;
                }
                Ok(())
            })?;
        }
        store::write_records(&self.spec.out.join("runs").join(format!("{}.csv", file_stem(run_id))), &records)?;
        Ok(records)
    }

    /// QG trajectory seeded with `P_mu u0` on the sample wall of the spec.
    pub fn qg_reference(&self, u0: &StateField, frames: &FrameTable) -> Result<QgTrajectory> {
        let mut cfg = self.sim_config(frames.mu(), 0.0);
        cfg.dt_policy = match self.spec.dt {
            Some(dt) => DtPolicy::Fixed { dt },
            None => DtPolicy::Cfl {
                cfl: 0.3,
                max_phase: None,
                dt_max: 0.01,
            },
        };
        qg_solve(QgInit::Pv(pv_from_boussinesq(u0, frames)), &cfg, None, |_, _, _| Ok(()))
    }

    /// Every sampled state of a run, without checkpoints.
    pub fn trajectory(&self, solver: &Boussinesq, u0: &StateField) -> Result<Vec<StateField>> {
        let mut states = Vec::with_capacity(solver.cfg.samples + 1);
        solver.solve(u0, |_, _, u| {
            states.push(u.clone());
            Ok(())
        })?;
        Ok(states)
    }
}

fn file_stem(run_id: &str) -> String {
    run_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

/// Norms of the state itself.
pub(crate) fn state_values(u: &StateField, s: f64) -> Values {
    let mut v = Values::new();
    v.insert(L2.into(), sobolev_norm(u, 0.0));
    v.insert(hs_name(s), sobolev_norm(u, s));
    v.insert("divergence".into(), u.max_divergence());
    v
}

/// `H^s` and `W^{1,inf}` distances to a reference state, under the tag `against`.
pub(crate) fn diff_values(v: &mut Values, u: &StateField, reference: &StateField, s: f64, against: &str) {
    v.insert(diff_name(&hs_name(s), against), sobolev_diff(u, reference, s));
    v.insert(diff_name(W1INF, against), wkinf_norm(&u.sub(reference), 1));
}

pub(crate) fn frames_for(ctx: &RunCtx, mu: f64) -> Result<Arc<FrameTable>> {
    let grid = ctx.sim_config(mu, 0.0).make_grid()?;
    Ok(Arc::new(FrameTable::new(&grid, mu)?))
}
