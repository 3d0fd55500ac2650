//! Acceptance gate. Prints one PASS/FAIL line per criterion with the
//! measured values and exits nonzero if any criterion fails.
//!
//! ```text
//! cargo test --release --test acceptance
//! ```

mod common;

use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use common::{
    brute_force_sizes, conservation_defect, cubic_probe, loss_gradient_error, midpoint_noise_std, probe_pairs,
    reversal_defect,
};
use phsysid::basis::{bsi_library_size, library_size};
use phsysid::config::{preset, Budget, ExperimentConfig};
use phsysid::dynamics::{child_rng, two_point_noise_std};
use phsysid::experiments::{
    build_model, default_reg_grid, default_sweep_plan, integrator_sweep, reg_prune_sweep, run_experiment,
    system_of, ExperimentReport,
};
use phsysid::integrators::{convergence_order, Scheme, TestProblem};
use phsysid::models::AnyModel;
use phsysid::report::{emit_report, Format};
use rand::Rng;

type Outcome = phsysid::Result<(bool, String)>;
type Criterion = (&'static str, fn() -> Outcome);

fn paper(name: &str) -> ExperimentConfig {
    preset(name, Budget::Paper).expect("known preset")
}

fn c1_orders() -> Outcome {
    let start = Instant::now();
    let problem = TestProblem::exponential();
    let dts = [0.2, 0.1, 0.05, 0.025];
    let mut ok = true;
    let mut msg = Vec::new();
    for (scheme, expected) in [(Scheme::Euler, 1.0), (Scheme::Midpoint, 2.0), (Scheme::Rk4, 4.0), (Scheme::Srk4, 4.0)] {
        let slope = convergence_order(scheme, &problem, &dts)?;
        ok &= (slope - expected).abs() <= 0.2;
        msg.push(format!("{} {slope:.3}", scheme.name()));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 1.0;
    Ok((ok, format!("{} in {secs:.3}s", msg.join(", "))))
}

fn c2_symmetry() -> Outcome {
    let start = Instant::now();
    let mut rng = child_rng(2, 0);
    let mut worst: f64 = 0.0;
    for probe in 0..100u64 {
        let d = rng.random_range(1..5);
        let g = cubic_probe(d, probe);
        let x0: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x1: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = rng.random_range(-2.0..2.0);
        let dt = rng.random_range(0.01..0.5);
        for scheme in [Scheme::Midpoint, Scheme::Srk4] {
            worst = worst.max(reversal_defect(scheme, &g, &x0, &x1, t, dt));
        }
    }
    let g = cubic_probe(2, 3);
    let euler = reversal_defect(Scheme::Euler, &g, &[0.6, -0.4], &[0.7, -0.2], 0.3, 0.2);
    let rk4 = reversal_defect(Scheme::Rk4, &g, &[0.6, -0.4], &[0.7, -0.2], 0.3, 0.2);
    let secs = start.elapsed().as_secs_f64();
    let ok = worst <= 1e-12 && euler > 1e-6 && rk4 > 1e-6 && secs < 1.0;
    Ok((ok, format!("symmetric worst {worst:.1e}, euler {euler:.1e}, rk4 {rk4:.1e}, {secs:.3}s")))
}

fn c3_gradients() -> Outcome {
    let start = Instant::now();
    let mut worst_trig: f64 = 0.0;
    let mut worst_mlp: f64 = 0.0;
    for (name, hidden, points) in [("mass-spring", None, 10u64), ("tanks", Some(vec![16, 16]), 10)] {
        let mut cfg = preset(name, Budget::Desk)?;
        if let Some(h) = hidden {
            cfg.model.force.hidden = h;
        }
        let system = system_of(&cfg)?;
        let pairs = probe_pairs(&system, cfg.data.dt, 1);
        for seed in 0..points {
            let AnyModel::Phsi(mut m) = build_model(&cfg, &system)? else {
                unreachable!("presets build PHSI models")
            };
            let e = loss_gradient_error(&mut m, &pairs, cfg.data.dt, Scheme::Srk4, seed);
            if name == "tanks" {
                worst_mlp = worst_mlp.max(e);
            } else {
                worst_trig = worst_trig.max(e);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst_trig <= 1e-5 && worst_mlp <= 1e-4 && secs < 10.0;
    Ok((ok, format!("trig force {worst_trig:.1e}, MLP force {worst_mlp:.1e} over 20 points, {secs:.2}s")))
}

fn c4_conservation() -> Outcome {
    let start = Instant::now();
    let worst = conservation_defect(2, 4, 1000).max(conservation_defect(1, 5, 1000));
    let secs = start.elapsed().as_secs_f64();
    Ok((worst < 1e-12 && secs < 1.0, format!("max |dH/dt| {worst:.1e}, {secs:.3}s")))
}

fn worst_true_error(r: &ExperimentReport, skip: &[&str]) -> (f64, String) {
    r.coefficients
        .iter()
        .filter(|c| c.truth.is_some_and(|t| t != 0.0) && !skip.contains(&c.term.as_str()))
        .map(|c| (c.abs_error.unwrap_or(f64::INFINITY), c.term.clone()))
        .fold((0.0, String::new()), |a, b| if b.0 > a.0 { b } else { a })
}

fn c5_henon_heiles_clean() -> Outcome {
    let mut cfg = paper("henon-heiles");
    cfg.data.sigma = 0.0;
    let r = run_experiment(&cfg)?;
    let (worst, term) = worst_true_error(&r, &[]);
    let spurious: Vec<String> = r
        .coefficients
        .iter()
        .filter(|c| c.truth == Some(0.0) && c.learned != 0.0)
        .filter(|c| !(c.term == "q2·p1^2" && c.learned.abs() <= 1e-2))
        .map(|c| format!("{}={:.3}", c.term, c.learned))
        .collect();
    let ok = worst <= 1e-2 && spurious.is_empty();
    Ok((ok, format!("worst true-term error {worst:.1e} ({term}), retained false terms {spurious:?}")))
}

fn c6_henon_heiles_noisy() -> Outcome {
    let r = run_experiment(&paper("henon-heiles"))?;
    let band: f64 = r
        .coefficients
        .iter()
        .filter(|c| c.term != "q2·p1^2")
        .filter_map(|c| c.abs_error)
        .fold(0.0, f64::max);
    let (base, plan) = default_sweep_plan(&paper("henon-heiles"))?;
    let sweep = integrator_sweep(&base, &[Scheme::Euler, Scheme::Srk4], &plan.budgets[..1], &[0.02], 0)?;
    let label = &plan.budgets[0].label;
    let score = |s| sweep.cell(s, label, 0.02).map_or(f64::INFINITY, |c| c.errors.score());
    let (euler, srk4) = (score(Scheme::Euler), score(Scheme::Srk4));
    let ok = band <= 0.05 && srk4 < euler;
    Ok((
        ok,
        format!("coefficient band {band:.3}; {label} sigma 0.02: srk4 {srk4:.3} vs euler {euler:.3}"),
    ))
}

fn c7_nls() -> Outcome {
    let mut cfg = paper("nls");
    cfg.data.sigma = 0.0;
    let r = run_experiment(&cfg)?;
    let (worst, term) = worst_true_error(&r, &[]);
    let n_true = system_of(&cfg)?.true_hamiltonian_terms().len();
    let total = library_size(4, cfg.model.hamiltonian.degree as usize);
    let kept_false = r.coefficients.iter().filter(|c| c.truth == Some(0.0) && c.learned != 0.0).count();
    let excluded = total - n_true - kept_false;
    let ok = worst <= 1e-3 && excluded >= 50;
    Ok((
        ok,
        format!("worst true-term error {worst:.1e} ({term}), excluded {excluded} of {} false terms", total - n_true),
    ))
}

fn within(r: &ExperimentReport, term: &str, target: f64, tol: f64) -> (bool, String) {
    match r.coefficient(term) {
        Some(c) => ((c.learned - target).abs() <= tol, format!("{term} {:.3}", c.learned)),
        None => (false, format!("{term} missing")),
    }
}

fn c8_mass_spring() -> Outcome {
    let r = run_experiment(&paper("mass-spring"))?;
    let checks = [
        within(&r, "c", 0.3, 0.05),
        within(&r, "alpha", 2.0, 0.1),
        within(&r, "omega", 0.5, 0.02),
        within(&r, "q^2", 0.5, 0.05),
        within(&r, "p^2", 0.5, 0.05),
    ];
    let ok = checks.iter().all(|c| c.0);
    let msg: Vec<String> = checks.iter().map(|c| format!("{}{}", c.1, if c.0 { "" } else { " (out)" })).collect();
    Ok((ok, msg.join(", ")))
}

fn c9_tanks() -> Outcome {
    let cfg = paper("tanks");
    let r = run_experiment(&cfg)?;
    let system = system_of(&cfg)?;
    let mut worst_rel: f64 = 0.0;
    let mut worst_term = String::new();
    let mut n = 0;
    for (exps, truth) in system.true_hamiltonian_terms() {
        let label = (0..exps.len())
            .filter(|&i| exps[i] > 0)
            .map(|i| if exps[i] == 1 { format!("x{}", i + 1) } else { format!("x{}^{}", i + 1, exps[i]) })
            .collect::<Vec<_>>()
            .join("·");
        let learned = r.coefficient(&label).map_or(0.0, |c| c.learned);
        let rel = (learned - truth).abs() / truth.abs();
        n += 1;
        if rel > worst_rel {
            worst_rel = rel;
            worst_term = format!("{label} {learned:.3} vs {truth}");
        }
    }
    let friction: Vec<(String, f64)> = r
        .coefficients
        .iter()
        .filter(|c| c.term.starts_with('r'))
        .map(|c| (c.term.clone(), c.abs_error.unwrap_or(f64::INFINITY)))
        .collect();
    let worst_r = friction.iter().map(|f| f.1).fold(0.0, f64::max);
    let ok = n == 9 && worst_rel <= 0.02 && friction.len() == 5 && worst_r <= 0.01;
    Ok((
        ok,
        format!("worst H relative error {:.1}% ({worst_term}), worst friction error {worst_r:.3}", 100.0 * worst_rel),
    ))
}

fn c10_tank_integrators() -> Outcome {
    let (base, plan) = default_sweep_plan(&paper("tanks"))?;
    let sweep = integrator_sweep(&base, &[Scheme::Euler, Scheme::Srk4], &plan.budgets[..1], &[0.0], 0)?;
    let label = &plan.budgets[0].label;
    let ratio = |s| sweep.cell(s, label, 0.0).and_then(|c| c.friction_ratio_mean).unwrap_or(f64::NAN);
    let (euler, srk4) = (ratio(Scheme::Euler), ratio(Scheme::Srk4));
    let ok = euler > 5.0 && (0.8..=1.4).contains(&srk4);
    Ok((ok, format!("{label}: euler friction ratio {euler:.2}, srk4 {srk4:.3}")))
}

fn reg_heatmap(name: &str) -> phsysid::Result<phsysid::experiments::Heatmap> {
    let mut cfg = paper(name);
    cfg.data.sigma = 0.0;
    let grid = default_reg_grid(cfg.system);
    cfg.eval.n_inits = grid.n_inits;
    reg_prune_sweep(&cfg, &grid.lambdas, &grid.intervals, grid.epochs, 0)
}

fn c11_reg_sweeps() -> Outcome {
    let tanks = reg_heatmap("tanks")?;
    let ratio = tanks.worst_best_ratio();
    let hh = reg_heatmap("henon-heiles")?;
    let unreg = &hh.scores[0];
    let violations: Vec<String> = hh.scores[1..]
        .iter()
        .zip(&hh.lambdas[1..])
        .flat_map(|(row, l)| {
            row.iter()
                .zip(unreg)
                .zip(&hh.intervals)
                .filter(|((r, u), _)| u > r)
                .map(move |((r, u), p)| format!("lambda {l} P={p}: {r:.3} < {u:.3}"))
        })
        .collect();
    let ok = ratio > 10.0 && violations.is_empty();
    Ok((ok, format!("tanks worst/best {ratio:.1}; henon-heiles cells below lambda 0: {violations:?}")))
}

fn c12_noise() -> Outcome {
    let start = Instant::now();
    let sigma = 0.02;
    let s = midpoint_noise_std(sigma, 100_000, 12);
    let r = two_point_noise_std(sigma);
    let rel = (s - r).abs() / r;
    let secs = start.elapsed().as_secs_f64();
    Ok((rel < 0.02 && secs < 1.0, format!("std {s:.5} vs {r:.5} ({:.2}%), {secs:.3}s", 100.0 * rel)))
}

fn c13_combinatorics() -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    for d in 1..=6 {
        for n in 1..=5 {
            let (lib, bsi) = brute_force_sizes(d, n);
            if library_size(d, n) != lib || bsi_library_size(d, n) != bsi {
                bad.push((d, n));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((bad.is_empty() && secs < 1.0, format!("mismatches {bad:?}, {secs:.3}s")))
}

fn c14_determinism() -> Outcome {
    let cfg = paper("henon-heiles");
    let dirs = [tempfile::tempdir().expect("tempdir"), tempfile::tempdir().expect("tempdir")];
    for d in &dirs {
        emit_report(&run_experiment(&cfg)?, d.path(), &Format::ALL)?;
    }
    let read = |d: &tempfile::TempDir| {
        let mut v: Vec<(std::ffi::OsString, Vec<u8>)> = fs::read_dir(d.path())
            .expect("report dir")
            .map(|e| {
                let p = e.expect("entry").path();
                (p.file_name().expect("file").to_owned(), fs::read(&p).expect("report file"))
            })
            .collect();
        v.sort();
        v
    };
    let (a, b) = (read(&dirs[0]), read(&dirs[1]));
    Ok((!a.is_empty() && a == b, format!("{} report files compared", a.len())))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 14] = [
        ("integrator orders", c1_orders),
        ("symmetry", c2_symmetry),
        ("gradient oracle", c3_gradients),
        ("conservation", c4_conservation),
        ("henon-heiles noise-free", c5_henon_heiles_clean),
        ("henon-heiles noisy", c6_henon_heiles_noisy),
        ("nls noise-free", c7_nls),
        ("mass-spring noisy", c8_mass_spring),
        ("tanks noisy", c9_tanks),
        ("tank integrator friction", c10_tank_integrators),
        ("regularization sweeps", c11_reg_sweeps),
        ("noise averaging", c12_noise),
        ("combinatorics", c13_combinatorics),
        ("determinism", c14_determinism),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let start = Instant::now();
        let (ok, msg) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!ok);
        println!(
            "{} {:>2} {name}: {msg} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
