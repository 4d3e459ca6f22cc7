//! Runs one scenario with its default parameters: `cargo run --release --example scenario -- <name> [json]`.

use boussq_core::harness::{exit_code, run, ExperimentSpec};

fn main() {
    let mut args = std::env::args().skip(1);
    let name = args.next().expect("scenario name");
    let mut spec = ExperimentSpec::for_scenario(name.parse().expect("known scenario"));
    if let Some(json) = args.next() {
        spec = spec.merge_json(&serde_json::from_str(&json).expect("valid JSON")).expect("valid overrides");
    }
    let clock = std::time::Instant::now();
    let outcome = run(&spec);
    match &outcome {
        Ok(s) => {
            for c in &s.clauses {
                println!("{:<32} {:>12.5e} {} {:e} {}", c.name, c.value, c.relation, c.threshold, if c.pass { "pass" } else { "FAIL" });
            }
            println!("{}", serde_json::to_string_pretty(&s.tables).unwrap());
        }
        Err(e) => println!("error: {e}"),
    }
    println!("elapsed {:.1}s", clock.elapsed().as_secs_f64());
    std::process::exit(exit_code(&outcome));
}
