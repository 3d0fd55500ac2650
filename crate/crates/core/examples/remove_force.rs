//! Fits the forced, damped mass-spring system, then drops the learned force
//! and simulates the internal dynamics alone: the learned energy decays
//! through the learned damping.
//!
//! ```text
//! cargo run --release --example remove_force -- [paper|desk]
//! ```

use phsysid::config::{preset, Budget};
use phsysid::dynamics::{make_benchmark, ParamValue};
use phsysid::experiments::run_experiment_full;
use phsysid::integrators::reference_simulate;
use phsysid::models::{remove_external_force, AnyModel};

fn main() -> phsysid::Result<()> {
    let budget: Budget = std::env::args().nth(1).map_or(Ok(Budget::Paper), |s| s.parse())?;
    let run = run_experiment_full(&preset("mass-spring", budget)?)?;
    let AnyModel::Phsi(model) = &run.model else {
        unreachable!("mass-spring preset trains a PHSI model")
    };
    println!("{}", run.report.equations);
    let internal = remove_external_force(model);
    let x0 = [1.0, 0.0];
    let learned = reference_simulate(&internal, &x0, 20.0, 0.5, 10)?;
    let mut params = run.system.params.clone();
    params.insert("alpha".into(), ParamValue::Number(0.0));
    let unforced = make_benchmark("mass_spring", &params)?;
    let truth = reference_simulate(&unforced, &x0, 20.0, 0.5, 10)?;
    println!("{:>6} {:>12} {:>12}", "t", "H learned", "H true");
    for (i, t) in learned.times.iter().enumerate().step_by(4) {
        println!(
            "{t:>6.1} {:>12.5} {:>12.5}",
            internal.hamiltonian(&learned.states[i]),
            unforced.hamiltonian(&truth.states[i])
        );
    }
    Ok(())
}
