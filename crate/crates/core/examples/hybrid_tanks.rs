//! Tank network with a symbolic Hamiltonian and a neural-network leak.
//! Compares the network against the true leak on a held-out trajectory,
//! then simulates far outside the training box against the baselines.
//!
//! ```text
//! cargo run --release --example hybrid_tanks -- [paper|desk]
//! ```

use phsysid::config::{preset, Budget, ModelKind};
use phsysid::dynamics::{child_rng, uniform_state};
use phsysid::experiments::{fit_model, run_experiment_full, trajectory_errors};
use phsysid::integrators::reference_simulate;
use phsysid::models::AnyModel;

fn main() -> phsysid::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let budget: Budget = std::env::args().nth(1).map_or(Ok(Budget::Desk), |s| s.parse())?;
    let cfg = preset("tanks", budget)?;
    let run = run_experiment_full(&cfg)?;
    println!("{}", run.report.equations);
    println!("friction ratios {:.3?}", run.report.friction_ratios);

    let AnyModel::Phsi(model) = &run.model else {
        unreachable!("tanks preset trains a PHSI model")
    };
    let x0 = uniform_state(&mut child_rng(cfg.data.seed + 1, 99), run.system.dim(), -1.0, 1.0);
    let held_out = reference_simulate(&run.system, &x0, cfg.data.t_end, cfg.data.dt, 10)?;
    let comps = run.system.force_components();
    let mut abs = 0.0;
    let mut n = 0;
    for (x, &t) in held_out.states.iter().zip(&held_out.times) {
        let learned = model.force_values(x, t);
        let truth = run.system.force(x, t);
        for (k, &c) in comps.iter().enumerate() {
            abs += (learned[k] - truth[c]).abs();
            n += 1;
        }
    }
    println!("leak mean absolute error on a held-out trajectory: {:.4}", abs / n as f64);

    let far = &cfg.eval.extrapolation_inits;
    let t_end = cfg.eval.extrapolation_t_end;
    let phsi = trajectory_errors(&run.model, &run.system, far, t_end, cfg.dt_out(), cfg.eval.substeps)?;
    println!("extrapolation error PHSI-hybrid {:?}", phsi.mean_finite);
    for kind in [ModelKind::Bsi, ModelKind::Sindy] {
        let mut c = cfg.clone();
        c.model.kind = kind;
        let (m, _) = fit_model(&c, &run.system, &run.dataset)?;
        let e = trajectory_errors(&m, &run.system, far, t_end, cfg.dt_out(), cfg.eval.substeps)?;
        println!("extrapolation error {kind:?} {:?} ({} blow-ups)", e.mean_finite, e.blowups);
    }
    Ok(())
}
