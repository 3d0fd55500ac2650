//! Checks reverse-mode gradients of the training loss against central
//! differences, for a symbolic time-dependent force and for a neural force.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use phsysid::autodiff::central_difference;
use phsysid::config::{preset, Budget};
use phsysid::dynamics::{child_rng, generate_dataset, DataSpec};
use phsysid::experiments::{build_model, system_of};
use phsysid::models::{AnyModel, TrainableModel};
use phsysid::training::{batch_gradient, loss, Penalties};
use rand::Rng;

fn check(name: &str, hidden: Option<Vec<usize>>) -> phsysid::Result<()> {
    let mut cfg = preset(name, Budget::Desk)?;
    if let Some(h) = hidden {
        cfg.model.force.hidden = h;
    }
    let system = system_of(&cfg)?;
    let spec = DataSpec {
        n_traj: 2,
        t_end: 4.0 * cfg.data.dt,
        dt: cfg.data.dt,
        seed: 1,
        ..Default::default()
    };
    let pairs = generate_dataset(&system, &spec)?.pairs();
    let batch: Vec<_> = pairs.iter().collect();
    let AnyModel::Phsi(mut model) = build_model(&cfg, &system)? else {
        unreachable!("presets build PHSI models")
    };
    let mut rng = child_rng(7, 0);
    for v in model.params_mut() {
        *v += rng.random_range(-0.1..0.1);
    }
    let lambdas = Penalties {
        hamiltonian: 0.1,
        force: 0.01,
        damping: 0.0,
    };
    let scheme = cfg.train.integrator;
    let (value, _, reverse) = batch_gradient(&model, &batch, cfg.data.dt, scheme, lambdas, true)?;
    let f = |p: &[f64]| loss(&model, p, &batch, cfg.data.dt, scheme, lambdas, true).map_or(f64::NAN, |l| l.0);
    let numeric = central_difference(model.params(), 1e-6, f);
    let diff = reverse.iter().zip(&numeric).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = numeric.iter().map(|b| b.abs()).fold(0.0, f64::max);
    println!(
        "{name:>12}: {} parameters, loss {value:.6}, max |reverse - numeric| / max |numeric| = {:.2e}",
        model.params().len(),
        diff / scale
    );
    Ok(())
}

fn main() -> phsysid::Result<()> {
    check("mass-spring", None)?;
    check("tanks", Some(vec![12, 12]))?;
    Ok(())
}
