//! Hybrid tank model at the full preset budget: the network tracks the true
//! leak in distribution and the model extrapolates better than the direct
//! baselines.

use phsysid::config::{preset, Budget, ModelKind};
use phsysid::dynamics::{child_rng, uniform_state};
use phsysid::experiments::{fit_model, run_experiment_full, trajectory_errors};
use phsysid::integrators::reference_simulate;
use phsysid::models::AnyModel;

#[test]
fn leak_fidelity_and_extrapolation_ordering() {
    let cfg = preset("tanks", Budget::Paper).unwrap();
    let run = run_experiment_full(&cfg).unwrap();
    let AnyModel::Phsi(model) = &run.model else { unreachable!() };

    let x0 = uniform_state(&mut child_rng(cfg.data.seed + 1, 99), run.system.dim(), -1.0, 1.0);
    let held_out = reference_simulate(&run.system, &x0, cfg.data.t_end, cfg.data.dt, 10).unwrap();
    let comps = run.system.force_components();
    let mut abs = Vec::new();
    for (x, &t) in held_out.states.iter().zip(&held_out.times) {
        let learned = model.force_values(x, t);
        let truth = run.system.force(x, t);
        abs.extend(comps.iter().enumerate().map(|(k, &c)| (learned[k] - truth[c]).abs()));
    }
    let mae = abs.iter().sum::<f64>() / abs.len() as f64;

    let far = &cfg.eval.extrapolation_inits;
    let t_end = cfg.eval.extrapolation_t_end;
    let score = |m: &AnyModel| {
        trajectory_errors(m, &run.system, far, t_end, cfg.dt_out(), cfg.eval.substeps).unwrap().score()
    };
    let phsi = score(&run.model);
    let mut baselines = Vec::new();
    for kind in [ModelKind::Bsi, ModelKind::Sindy] {
        let mut c = cfg.clone();
        c.model.kind = kind;
        let (m, _) = fit_model(&c, &run.system, &run.dataset).unwrap();
        baselines.push((kind, score(&m)));
    }
    for (kind, e) in &baselines {
        assert!(phsi < *e, "PHSI-hybrid {phsi} vs {kind:?} {e}");
    }
    assert!(mae < 0.1, "leak mean absolute error {mae}");
}
