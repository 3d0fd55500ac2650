//! Trains one model per integrator on the same data and compares
//! trajectory errors (and, for the tank system, recovered friction).
//! Uses the smallest data budget of the standard study at one noise level.
//!
//! ```text
//! cargo run --release --example integrator_sweep -- henon-heiles [sigma] [seed]
//! ```

use phsysid::config::{preset, Budget};
use phsysid::experiments::{default_sweep_plan, integrator_sweep};

fn main() -> phsysid::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.first().map_or("henon-heiles", String::as_str);
    let sigma: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.03);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let (base, plan) = default_sweep_plan(&preset(name, Budget::Paper)?)?;
    let budget = &plan.budgets[..1];
    println!("{}: {} trajectories, t_end {}, dt {}, sigma {sigma}", budget[0].label, budget[0].n_traj, budget[0].t_end, budget[0].dt);
    let sweep = integrator_sweep(&base, &plan.schemes, budget, &[sigma], seed)?;
    for c in &sweep.cells {
        print!("{:>9} mean error {:>12.5e} blow-ups {}", c.integrator.name(), c.errors.mean_finite.unwrap_or(f64::NAN), c.errors.blowups);
        if let Some(r) = c.friction_ratio_mean {
            print!("  friction ratio {r:.3}");
        }
        println!();
    }
    Ok(())
}
