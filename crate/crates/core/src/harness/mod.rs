//! Reproducible experiment runner.
//!
//! A run takes an [`ExperimentSpec`], executes one scenario and leaves
//! `records.csv`, `summary.json` and `checkpoints/` under the output directory.
//! Exit status: 0 when every clause passes, 1 on a failed check or numerical
//! error, 2 on a configuration error, 3 on solver blow-up.

mod dichotomy;
pub mod initial;
mod runner;
mod scenarios;
pub mod store;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub use dichotomy::{classify_sequence, SequenceClass};
pub use initial::{make_initial_data, DataKind, DataParams, ILL_PREPARED_FLOOR};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "BOUSSQ_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "eigen-check")]
    EigenCheck,
    #[serde(rename = "proj-bound")]
    ProjBound,
    #[serde(rename = "dispersion")]
    Dispersion,
    #[serde(rename = "converge-prepared")]
    ConvergePrepared,
    #[serde(rename = "nonconverge-hs")]
    NonconvergeHs,
    #[serde(rename = "nonconverge-mu1")]
    NonconvergeMu1,
    #[serde(rename = "dichotomy")]
    Dichotomy,
    #[serde(rename = "continuity-N")]
    ContinuityN,
    #[serde(rename = "continuity-mu")]
    ContinuityMu,
    #[serde(rename = "duhamel-decay")]
    DuhamelDecay,
    #[serde(rename = "conservation")]
    Conservation,
}

impl Scenario {
    pub const ALL: [Scenario; 11] = [
        Scenario::EigenCheck,
        Scenario::ProjBound,
        Scenario::Dispersion,
        Scenario::ConvergePrepared,
        Scenario::NonconvergeHs,
        Scenario::NonconvergeMu1,
        Scenario::Dichotomy,
        Scenario::ContinuityN,
        Scenario::ContinuityMu,
        Scenario::DuhamelDecay,
        Scenario::Conservation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::EigenCheck => "eigen-check",
            Scenario::ProjBound => "proj-bound",
            Scenario::Dispersion => "dispersion",
            Scenario::ConvergePrepared => "converge-prepared",
            Scenario::NonconvergeHs => "nonconverge-hs",
            Scenario::NonconvergeMu1 => "nonconverge-mu1",
            Scenario::Dichotomy => "dichotomy",
            Scenario::ContinuityN => "continuity-N",
            Scenario::ContinuityMu => "continuity-mu",
            Scenario::DuhamelDecay => "duhamel-decay",
            Scenario::Conservation => "conservation",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

/// Full parameter set of one experiment. Unused fields are ignored by a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    /// Ratios `mu = Omega / N`. For continuity-mu the first entry is the reference `nu`.
    pub mu: Vec<f64>,
    /// Stratification values `N`. For continuity-N the first entry is the reference.
    pub n_list: Vec<f64>,
    /// Points per axis.
    pub grid: usize,
    /// Box side length.
    pub box_len: f64,
    pub t_final: f64,
    /// Infimum/supremum window `[0, t0]`.
    pub t0: f64,
    /// Sobolev index of the measured differences.
    pub s: f64,
    /// Sobolev index of the unit normalization of the initial data.
    pub m: f64,
    pub spectral_width: f64,
    pub seed: u64,
    pub samples: usize,
    /// Time exponent of the `L^q(0, T; W^{1,inf})` discrepancy.
    pub q: f64,
    /// Number of sequence members `K` (dichotomy) or refinement levels.
    pub levels: usize,
    pub trials: usize,
    pub hessian_trials: usize,
    /// Fixed step size; `None` selects the adaptive policy.
    pub dt: Option<f64>,
    /// Also compare each dichotomy member against the `mu = 1` solution with the same `N`.
    pub compare_mu1: bool,
    /// `N t` range and point count of the dispersion sweep.
    pub nt_range: [f64; 2],
    pub nt_points: usize,
    pub x_extent: f64,
    pub quad_h: f64,
    /// Precomputed constant table for the dichotomy; defaults to `<out>/cmu_table.json`.
    pub cmu_table: Option<PathBuf>,
    pub jobs: usize,
    pub out: PathBuf,
}

fn dyadic_mus(levels: usize) -> Vec<f64> {
    (1..=levels).map(|k| 1.0 + 0.5f64.powi(k as i32)).collect()
}

impl ExperimentSpec {
    /// Defaults of each scenario.
    pub fn for_scenario(scenario: Scenario) -> Self {
        let mut s = ExperimentSpec {
            scenario,
            mu: vec![0.5, 1.0, 2.0],
            n_list: vec![50.0, 100.0, 200.0, 400.0],
            grid: 32,
            box_len: 4.0 * std::f64::consts::PI,
            t_final: 0.5,
            t0: 0.1,
            s: 3.0,
            m: 6.0,
            spectral_width: DataParams::default().spectral_width,
            seed: 20240601,
            samples: 64,
            q: 4.0,
            levels: 6,
            trials: 1000,
            hessian_trials: 1000,
            dt: None,
            compare_mu1: false,
            nt_range: [10.0, 1e4],
            nt_points: 16,
            x_extent: 8.0,
            quad_h: crate::dispersion::DEFAULT_H,
            cmu_table: None,
            jobs: 1,
            out: default_out_root().join(scenario.name()),
        };
        match scenario {
            Scenario::EigenCheck => s.trials = 10_000,
            Scenario::ProjBound => s.grid = 16,
            Scenario::Dispersion => {
                let mut mus = vec![2.0, 1.5, 1.25, 1.1, 1.05];
                for mu in dyadic_mus(s.levels) {
                    if !mus.contains(&mu) {
                        mus.push(mu);
                    }
                }
                mus.extend([0.5, 1.0]);
                s.mu = mus;
            }
            Scenario::ConvergePrepared => {}
            Scenario::NonconvergeHs => s.t_final = s.t0,
            Scenario::NonconvergeMu1 => {
                s.mu = vec![1.0];
                s.t_final = s.t0;
            }
            Scenario::Dichotomy => s.t_final = 1.0,
            Scenario::ContinuityN => {
                s.mu = vec![2.0];
                s.n_list = vec![100.0, 100.1, 100.2, 100.4];
                s.dt = Some(0.002);
                s.s = 5.0;
            }
            Scenario::ContinuityMu => {
                s.mu = vec![2.0, 1.9, 1.95, 1.975];
                s.t_final = 1.0;
                s.dt = Some(0.005);
                s.s = 5.0;
            }
            Scenario::DuhamelDecay => {
                s.mu = vec![1.0];
                s.samples = 80;
            }
            Scenario::Conservation => {
                s.mu = vec![2.0];
                s.n_list = vec![10.0, 100.0, 1000.0];
                s.t_final = 1.0;
            }
        }
        s
    }

    /// Overrides fields with the keys of a JSON object.
    pub fn merge_json(&self, overrides: &Value) -> Result<Self> {
        let Value::Object(map) = overrides else {
            return Err(Error::Config("configuration must be a JSON object".into()));
        };
        let mut base = serde_json::to_value(self)?;
        let obj = base.as_object_mut().expect("spec serializes to an object");
        for (k, v) in map {
            obj.insert(k.clone(), v.clone());
        }
        serde_json::from_value(base).map_err(|e| Error::Config(format!("invalid configuration: {e}")))
    }

    pub fn data_params(&self) -> DataParams {
        DataParams {
            m: self.m,
            spectral_width: self.spectral_width,
        }
    }

    /// Checks that the scenario has every parameter it needs.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let positive = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x > 0.0);
        if !positive(&self.mu) || self.mu.is_empty() {
            return bad("mu list must be nonempty and positive".into());
        }
        if !self.n_list.iter().all(|x| x.is_finite() && *x >= 0.0) {
            return bad("N values must be nonnegative".into());
        }
        if self.grid < 8 || self.grid % 2 != 0 {
            return bad(format!("grid must be even and at least 8, got {}", self.grid));
        }
        if !(self.box_len > 0.0 && self.t_final > 0.0 && self.t0 > 0.0) {
            return bad("box, T and t0 must be positive".into());
        }
        if !(self.s >= 0.0 && self.m >= 3.0 && self.spectral_width > 0.0 && self.q >= 1.0) {
            return bad("need s >= 0, m >= 3, positive spectral width and q >= 1".into());
        }
        if self.samples == 0 || self.jobs == 0 {
            return bad("samples and jobs must be positive".into());
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        let needs_window = matches!(
            self.scenario,
            Scenario::NonconvergeHs | Scenario::NonconvergeMu1 | Scenario::DuhamelDecay
        );
        if needs_window && self.t0 > self.t_final * (1.0 + 1e-12) {
            return bad(format!("t0 = {} exceeds T = {}", self.t0, self.t_final));
        }
        match self.scenario {
            Scenario::EigenCheck if self.trials == 0 || self.hessian_trials == 0 => bad("trials must be positive".into()),
            Scenario::ProjBound if self.trials == 0 => bad("trials must be positive".into()),
            Scenario::Dispersion => {
                if !self.mu.contains(&2.0) || !self.mu.contains(&1.0) {
                    return bad("dispersion needs mu = 2 and mu = 1 in the list".into());
                }
                if !(self.nt_range[0] > 0.0 && self.nt_range[1] >= 100.0 * self.nt_range[0]) || self.nt_points < 8 {
                    return bad("the N t range must span two decades with at least 8 points".into());
                }
                Ok(())
            }
            Scenario::ConvergePrepared | Scenario::NonconvergeHs | Scenario::NonconvergeMu1 | Scenario::DuhamelDecay => {
                let need = if self.scenario == Scenario::NonconvergeHs { 1 } else { 3 };
                if self.n_list.len() < need || !positive(&self.n_list) {
                    return bad(format!("{} needs at least {need} positive N values", self.scenario));
                }
                if self.scenario == Scenario::NonconvergeMu1 && self.mu != [1.0] {
                    return bad("nonconverge-mu1 runs at mu = 1 only".into());
                }
                Ok(())
            }
            Scenario::Dichotomy if self.levels < 2 => bad("dichotomy needs at least two levels".into()),
            Scenario::ContinuityN => {
                if self.n_list.len() < 4 || self.n_list[1..].iter().any(|&n| n <= self.n_list[0]) {
                    return bad("continuity-N needs a reference N followed by at least three larger values".into());
                }
                if self.dt.is_none() {
                    return bad("continuity-N needs a fixed dt so that both runs share one step sequence".into());
                }
                Ok(())
            }
            Scenario::ContinuityMu => {
                if self.mu.len() < 4 || self.mu[1..].iter().any(|&m| m == self.mu[0]) {
                    return bad("continuity-mu needs a reference nu followed by at least three distinct mu".into());
                }
                Ok(())
            }
            Scenario::Conservation if self.n_list.len() < 2 || !positive(&self.n_list) => {
                bad("conservation needs at least two positive N values".into())
            }
            _ => Ok(()),
        }
    }
}

/// Output root from the environment, falling back to `./boussq-out`.
pub fn default_out_root() -> PathBuf {
    std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("boussq-out"))
}

/// One pass/fail check of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub name: String,
    pub value: f64,
    /// `<`, `<=`, `>=`, `>`, `==` or `in` (closed interval `[threshold, upper]`).
    pub relation: String,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    pub pass: bool,
}

impl Clause {
    pub fn check(name: impl Into<String>, value: f64, relation: &str, threshold: f64) -> Self {
        let pass = match relation {
            "<" => value < threshold,
            "<=" => value <= threshold,
            ">=" => value >= threshold,
            ">" => value > threshold,
            "==" => value == threshold,
            _ => panic!("unknown relation {relation}"),
        };
        Clause {
            name: name.into(),
            value,
            relation: relation.into(),
            threshold,
            upper: None,
            pass,
        }
    }

    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Clause {
            name: name.into(),
            value,
            relation: "in".into(),
            threshold: lo,
            upper: Some(hi),
            pass: value >= lo && value <= hi,
        }
    }
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: Scenario,
    pub config: ExperimentSpec,
    pub config_hash: String,
    pub clauses: Vec<Clause>,
    pub fits: BTreeMap<String, Value>,
    pub tables: BTreeMap<String, Value>,
    pub pass: bool,
}

impl Summary {
    pub fn clause(&self, name: &str) -> Option<&Clause> {
        self.clauses.iter().find(|c| c.name == name)
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

/// Exit status of a finished or failed run.
pub fn exit_code(outcome: &Result<Summary>) -> i32 {
    match outcome {
        Ok(s) => s.exit_code(),
        Err(Error::Config(_)) => 2,
        Err(Error::BlowUp { .. }) => 3,
        Err(_) => 1,
    }
}

/// What a scenario hands back to [`run`].
#[derive(Default)]
pub(crate) struct Outcome {
    pub clauses: Vec<Clause>,
    pub fits: BTreeMap<String, Value>,
    pub tables: BTreeMap<String, Value>,
    pub records: Vec<crate::diagnostics::DiagnosticsRecord>,
}

impl Outcome {
    pub fn fit(&mut self, key: impl Into<String>, value: impl Serialize) {
        self.fits.insert(key.into(), serde_json::to_value(value).expect("serializable fit"));
    }

    pub fn table(&mut self, key: impl Into<String>, value: impl Serialize) {
        self.tables.insert(key.into(), serde_json::to_value(value).expect("serializable table"));
    }
}

/// Hash of everything that determines the numerical results (not `out` or `jobs`).
pub fn spec_hash(spec: &ExperimentSpec) -> Result<String> {
    let mut v = serde_json::to_value(spec)?;
    if let Some(o) = v.as_object_mut() {
        o.remove("out");
        o.remove("jobs");
        o.remove("cmu_table");
    }
    store::config_hash(&v)
}

/// Runs a scenario and writes its artifacts.
pub fn run(spec: &ExperimentSpec) -> Result<Summary> {
    spec.validate()?;
    std::fs::create_dir_all(spec.out.join("checkpoints"))?;
    std::fs::create_dir_all(spec.out.join("runs"))?;
    let hash = spec_hash(spec)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot build the worker pool: {e}")))?;
    let ctx = runner::RunCtx {
        spec,
        hash: hash.clone(),
    };
    let outcome = pool.install(|| scenarios::dispatch(&ctx))?;
    store::write_records(&spec.out.join("records.csv"), &outcome.records)?;
    let pass = outcome.clauses.iter().all(|c| c.pass);
    let summary = Summary {
        scenario: spec.scenario,
        config: spec.clone(),
        config_hash: hash,
        clauses: outcome.clauses,
        fits: outcome.fits,
        tables: outcome.tables,
        pass,
    };
    store::write_json(&spec.out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Reads a previously written `summary.json`.
pub fn load_summary(dir: &Path) -> Result<Summary> {
    store::read_json(&dir.join("summary.json"))
}
