use std::path::PathBuf;
use std::process::ExitCode;

use boussq_core::harness::{exit_code, run, ExperimentSpec, Scenario};
use boussq_core::Error;
use clap::{Args, Parser, Subcommand};

/// Experiment runner for rotating stratified Boussinesq flows and their QG limit.
///
/// Exit status: 0 all checks pass, 1 a check or numerical step failed,
/// 2 configuration error, 3 solver blow-up.
#[derive(Parser)]
#[command(name = "boussq", version)]
struct Cli {
    #[command(subcommand)]
    scenario: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenframe identities and the phase Hessian determinant on random wavevectors.
    EigenCheck(Flags),
    /// Continuity of the slow projection in mu.
    ProjBound(Flags),
    /// Dispersive decay of the frequency-localized propagator and the constant table.
    Dispersion(Flags),
    /// Convergence to QG for well-prepared data.
    ConvergePrepared(Flags),
    /// Non-convergence in H^s for ill-prepared data.
    NonconvergeHs(Flags),
    /// Non-convergence in W^{1,inf} at mu = 1.
    NonconvergeMu1(Flags),
    /// Fast and slow sequences mu_k -> 1.
    Dichotomy(Flags),
    /// Continuity of Boussinesq solutions in N.
    #[command(name = "continuity-N")]
    ContinuityN(Flags),
    /// Continuity of QG solutions in mu.
    ContinuityMu(Flags),
    /// O(1/N) Duhamel term and the residual of the decomposition.
    DuhamelDecay(Flags),
    /// Energy, divergence, step cost and QG invariants.
    Conservation(Flags),
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// Comma-separated mu values.
    #[arg(long, value_delimiter = ',')]
    mu: Option<Vec<f64>>,
    /// Comma-separated N values.
    #[arg(long = "n-list", value_delimiter = ',')]
    n_list: Option<Vec<f64>>,
    /// Points per axis.
    #[arg(long)]
    grid: Option<usize>,
    /// Box side length.
    #[arg(long = "box")]
    box_len: Option<f64>,
    /// Final time.
    #[arg(long = "T")]
    t_final: Option<f64>,
    /// Infimum window length.
    #[arg(long)]
    t0: Option<f64>,
    /// Sobolev index of measured differences.
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Diagnostic samples per run.
    #[arg(long)]
    samples: Option<usize>,
    /// Time exponent of the dichotomy norm.
    #[arg(long)]
    q: Option<f64>,
    /// Number of dichotomy members.
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Fixed time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Add the comparison against the mu = 1 solution to the dichotomy.
    #[arg(long)]
    compare_mu1: bool,
    /// Constant table to use for the dichotomy.
    #[arg(long)]
    cmu_table: Option<PathBuf>,
    /// Parallel sweep members.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory (default: $BOUSSQ_OUT/<scenario>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON object whose keys override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Command {
    fn split(self) -> (Scenario, Flags) {
        match self {
            Command::EigenCheck(f) => (Scenario::EigenCheck, f),
            Command::ProjBound(f) => (Scenario::ProjBound, f),
            Command::Dispersion(f) => (Scenario::Dispersion, f),
            Command::ConvergePrepared(f) => (Scenario::ConvergePrepared, f),
            Command::NonconvergeHs(f) => (Scenario::NonconvergeHs, f),
            Command::NonconvergeMu1(f) => (Scenario::NonconvergeMu1, f),
            Command::Dichotomy(f) => (Scenario::Dichotomy, f),
            Command::ContinuityN(f) => (Scenario::ContinuityN, f),
            Command::ContinuityMu(f) => (Scenario::ContinuityMu, f),
            Command::DuhamelDecay(f) => (Scenario::DuhamelDecay, f),
            Command::Conservation(f) => (Scenario::Conservation, f),
        }
    }
}

fn build_spec(scenario: Scenario, f: Flags) -> Result<ExperimentSpec, Error> {
    let mut spec = ExperimentSpec::for_scenario(scenario);
    macro_rules! set {
        ($($field:ident => $target:ident),* $(,)?) => {
            $(if let Some(v) = f.$field { spec.$target = v; })*
        };
    }
    set!(mu => mu, n_list => n_list, grid => grid, box_len => box_len, t_final => t_final, t0 => t0,
         s => s, seed => seed, samples => samples, q => q, levels => levels, trials => trials,
         jobs => jobs, out => out);
    if f.dt.is_some() {
        spec.dt = f.dt;
    }
    if f.cmu_table.is_some() {
        spec.cmu_table = f.cmu_table;
    }
    spec.compare_mu1 |= f.compare_mu1;
    if let Some(path) = f.config {
        let text = std::fs::read_to_string(&path)?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        spec = spec.merge_json(&value)?;
    }
    Ok(spec)
}

fn bound(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-3 {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (scenario, flags) = cli.scenario.split();
    let outcome = build_spec(scenario, flags).and_then(|spec| run(&spec));
    match &outcome {
        Ok(summary) => {
            for c in &summary.clauses {
                let range = match c.upper {
                    Some(hi) => format!("[{}, {}]", bound(c.threshold), bound(hi)),
                    None => format!("{} {}", c.relation, bound(c.threshold)),
                };
                println!("{} {:<36} {:<14.6e} {range}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value);
            }
            println!("artifacts: {}", summary.config.out.display());
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&outcome) as u8)
}
