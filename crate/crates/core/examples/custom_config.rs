//! Builds a run from a TOML string layered over a preset, then echoes the
//! resolved config.
//!
//! ```text
//! cargo run --release --example custom_config
//! ```

use phsysid::config::ExperimentConfig;
use phsysid::experiments::run_experiment;

const CONFIG: &str = r#"
preset = "nls"

[data]
sigma = 0.0
seed = 11

[train]
integrator = "midpoint"
"#;

fn main() -> phsysid::Result<()> {
    let cfg = ExperimentConfig::from_toml_str(CONFIG)?;
    println!("{}", cfg.to_toml_string());
    let report = run_experiment(&cfg)?;
    println!("{}", report.equations);
    println!("active terms {}, mean trajectory error {:?}", report.active_terms, report.errors.mean_finite);
    Ok(())
}
