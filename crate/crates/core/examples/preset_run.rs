//! Runs one benchmark preset end to end and prints the learned equations.
//!
//! ```text
//! cargo run --release --example preset_run -- mass-spring desk [sigma] [integrator] [seed]
//! ```

use phsysid::config::{preset, Budget};
use phsysid::experiments::run_experiment_full;

fn main() -> phsysid::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.first().map_or("mass-spring", String::as_str);
    let budget: Budget = args.get(1).map_or(Ok(Budget::Desk), |s| s.parse())?;
    let mut cfg = preset(name, budget)?;
    if let Some(s) = args.get(2) {
        cfg.data.sigma = s.parse().map_err(|_| phsysid::Error::Config(format!("bad sigma {s}")))?;
    }
    if let Some(s) = args.get(3) {
        cfg.train.integrator = s.parse()?;
    }
    if let Some(s) = args.get(4) {
        let seed = s.parse().map_err(|_| phsysid::Error::Config(format!("bad seed {s}")))?;
        cfg = cfg.with_seed(seed);
    }
    let run = run_experiment_full(&cfg)?;
    println!("{}", run.report.equations);
    for row in &run.report.coefficients {
        println!("{:>16} truth {:>10?} learned {:>10.5}", row.term, row.truth, row.learned);
    }
    println!("mean trajectory error {:?} ({} blow-ups)", run.report.errors.mean_finite, run.report.errors.blowups);
    if !run.report.friction_ratios.is_empty() {
        println!("friction ratios {:?}", run.report.friction_ratios);
    }
    println!("{:.1}s", run.seconds);
    Ok(())
}
