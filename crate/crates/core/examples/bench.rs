//! Measure masking overhead against an unmasked scan on synthetic data.
//!
//! `cargo run --release --example bench -- depth 20000`

use maskgate::bench::{run_experiment, BenchConfig, Experiment};

fn main() -> Result<(), String> {
    let mut args = std::env::args().skip(1);
    let experiment: Experiment = args.next().as_deref().unwrap_or("depth").parse()?;
    let rows = args.next().map(|r| r.parse().map_err(|e| format!("rows: {e}"))).transpose()?;
    let cfg = BenchConfig {
        rows: rows.unwrap_or(20_000),
        ..BenchConfig::default()
    };
    let report = run_experiment(experiment, &cfg);
    print!("{}", report.table());
    Ok(())
}
