//! End-to-end runs: data, fitting, trajectory metrics and the two sweeps.

use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisLibrary, Term, TrigShape};
use crate::config::{Budget, ExperimentConfig, ForceKind, ModelKind};
use crate::dynamics::{child_rng, generate_dataset, make_benchmark, uniform_state, Benchmark, Dataset, Dynamics, OdeSystem, Trajectory};
use crate::error::{Error, Result};
use crate::integrators::{reference_simulate, Scheme};
use crate::models::{
    sindy_fit, AnyModel, BaselineModel, ForceModel, MlpForce, PhsiModel, SymbolicForce,
};
use crate::training::{train, TrainHistory};

const EVAL_STREAM: u64 = 0xe7a1;

pub fn system_of(cfg: &ExperimentConfig) -> Result<OdeSystem> {
    make_benchmark(cfg.system.name(), &cfg.params)
}

/// Untrained model described by `cfg`.
pub fn build_model(cfg: &ExperimentConfig, system: &OdeSystem) -> Result<AnyModel> {
    let d = system.dim();
    let names = system.var_names();
    let spec = &cfg.model;
    match spec.kind {
        ModelKind::Phsi | ModelKind::PhsiHybrid => {
            let mut h_lib = BasisLibrary::from_spec(&spec.hamiltonian, d).with_names(&names);
            let split = if cfg.train.integrator == Scheme::Prk4 {
                let n = system.separable_split().ok_or(Error::NonSeparable("prk4"))?;
                h_lib = h_lib.retain_separable(n);
                Some(n)
            } else {
                None
            };
            let damping = match &spec.damping {
                Some(c) => c.clone(),
                None => system
                    .damping_support()
                    .iter()
                    .enumerate()
                    .filter_map(|(i, &s)| s.then_some(i))
                    .collect(),
            };
            let components = if spec.force.components.is_empty() {
                system.force_components()
            } else {
                spec.force.components.clone()
            };
            let force = match spec.force.kind {
                _ if components.is_empty() => ForceModel::None,
                ForceKind::None => ForceModel::None,
                ForceKind::Symbolic => {
                    let lib_dim = if spec.force.library.time_only { 1 } else { d };
                    ForceModel::Symbolic(SymbolicForce {
                        lib: BasisLibrary::from_spec(&spec.force.library, lib_dim),
                        components,
                        time_only: spec.force.library.time_only,
                    })
                }
                ForceKind::Mlp => ForceModel::Mlp(MlpForce::new(d, &spec.force.hidden, components)),
            };
            let model = PhsiModel::new(&system.structure(), h_lib, damping, force, &spec.init, cfg.train.seed)?;
            let model = match split {
                Some(n) => model.with_split(n)?,
                None => model,
            };
            Ok(AnyModel::Phsi(model))
        }
        ModelKind::Bsi | ModelKind::Sindy => {
            let aug = spec.kind == ModelKind::Sindy && spec.time_augmented;
            if cfg.train.integrator == Scheme::Prk4 && spec.kind == ModelKind::Bsi {
                return Err(Error::NonSeparable("prk4"));
            }
            let lib = BasisLibrary::from_spec(&spec.baseline, d + aug as usize);
            Ok(AnyModel::Baseline(
                BaselineModel::new(d, lib, aug, &spec.init)?.with_names(&names),
            ))
        }
    }
}

/// Fits the configured model to `dataset`. SINDy has no training history.
pub fn fit_model(cfg: &ExperimentConfig, system: &OdeSystem, dataset: &Dataset) -> Result<(AnyModel, Option<TrainHistory>)> {
    let model = build_model(cfg, system)?;
    match (model, cfg.model.kind) {
        (AnyModel::Baseline(m), ModelKind::Sindy) => {
            let fitted = sindy_fit(
                dataset,
                &m.lib,
                cfg.model.sindy_threshold,
                cfg.model.sindy_sweeps,
                m.time_augmented,
                &cfg.model.init,
            )?
            .with_names(&m.names);
            Ok((AnyModel::Baseline(fitted), None))
        }
        (AnyModel::Baseline(mut m), _) => {
            let h = train(&mut m, dataset, &cfg.train)?;
            Ok((AnyModel::Baseline(m), Some(h)))
        }
        (AnyModel::Phsi(mut m), _) => {
            let h = train(&mut m, dataset, &cfg.train)?;
            Ok((AnyModel::Phsi(m), Some(h)))
        }
    }
}

/// Evaluation initial states. Draws whose true trajectory escapes to
/// infinity within the window are redrawn, as are draws whose true energy
/// is not below `max_energy`.
pub fn eval_inits(cfg: &ExperimentConfig, system: &OdeSystem) -> Result<Vec<Vec<f64>>> {
    let e = &cfg.eval;
    let mut rng = child_rng(e.seed, EVAL_STREAM);
    let mut out = Vec::with_capacity(e.n_inits);
    let mut draws = 0usize;
    while out.len() < e.n_inits {
        draws += 1;
        if draws > 1_000_000 {
            return Err(Error::Config("could not draw evaluation states below max_energy".into()));
        }
        let x = uniform_state(&mut rng, system.dim(), e.init_low, e.init_high);
        if let Some(level) = e.max_energy {
            if !(system.hamiltonian(&x) < level) {
                continue;
            }
        }
        match reference_simulate(system, &x, e.t_end, cfg.dt_out(), e.substeps) {
            Ok(_) => out.push(x),
            Err(Error::BlowUp { .. }) => continue,
            Err(err) => return Err(err),
        }
    }
    Ok(out)
}

/// Trajectory errors over a set of initial states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    /// One entry per initial state; `None` marks a model blow-up.
    pub per_init: Vec<Option<f64>>,
    /// Mean over trajectories that stayed finite.
    pub mean_finite: Option<f64>,
    pub median: Option<f64>,
    pub p90: Option<f64>,
    pub blowups: usize,
}

impl ErrorSummary {
    fn from_errors(per_init: Vec<Option<f64>>) -> Self {
        let mut finite: Vec<f64> = per_init.iter().flatten().copied().collect();
        finite.sort_by(f64::total_cmp);
        let blowups = per_init.len() - finite.len();
        let pick = |q: f64| {
            (!finite.is_empty()).then(|| finite[((finite.len() - 1) as f64 * q).round() as usize])
        };
        Self {
            mean_finite: (!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64),
            median: pick(0.5),
            p90: pick(0.9),
            blowups,
            per_init,
        }
    }

    /// Mean error with blow-ups counted as infinite.
    pub fn score(&self) -> f64 {
        if self.blowups > 0 {
            f64::INFINITY
        } else {
            self.mean_finite.unwrap_or(f64::INFINITY)
        }
    }
}

/// `sqrt(Σ_n |x̂(t_n) − x(t_n)|² · dt)` on the common output grid.
pub fn l2_trajectory_distance(a: &Trajectory, b: &Trajectory) -> f64 {
    let s: f64 = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(u, v)| u.iter().zip(v).map(|(p, q)| (p - q) * (p - q)).sum::<f64>())
        .sum();
    (s * a.dt).sqrt()
}

pub fn trajectory_errors<M: Dynamics + ?Sized>(
    model: &M,
    system: &OdeSystem,
    inits: &[Vec<f64>],
    t_end: f64,
    dt_out: f64,
    substeps: usize,
) -> Result<ErrorSummary> {
    let mut per = Vec::with_capacity(inits.len());
    for x0 in inits {
        let truth = reference_simulate(system, x0, t_end, dt_out, substeps)?;
        per.push(match reference_simulate(model, x0, t_end, dt_out, substeps) {
            Ok(tr) => Some(l2_trajectory_distance(&tr, &truth)).filter(|e| e.is_finite()),
            Err(Error::BlowUp { .. }) => None,
            Err(e) => return Err(e),
        });
    }
    Ok(ErrorSummary::from_errors(per))
}

/// Mean trajectory error from `n_inits` uniform(−1, 1) initial states;
/// infinite if any model trajectory blows up.
pub fn trajectory_error<M: Dynamics + ?Sized>(
    model: &M,
    system: &OdeSystem,
    n_inits: usize,
    t_end: f64,
    dt_out: f64,
    seed: u64,
) -> Result<f64> {
    if n_inits == 0 {
        return Err(Error::Config("n_inits must be at least 1".into()));
    }
    let mut rng = child_rng(seed, EVAL_STREAM);
    let inits: Vec<Vec<f64>> = (0..n_inits).map(|_| uniform_state(&mut rng, system.dim(), -1.0, 1.0)).collect();
    Ok(trajectory_errors(model, system, &inits, t_end, dt_out, 10)?.score())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub term: String,
    pub truth: Option<f64>,
    pub learned: f64,
    pub abs_error: Option<f64>,
}

impl CoefficientRow {
    fn new(term: impl Into<String>, truth: Option<f64>, learned: f64) -> Self {
        Self {
            term: term.into(),
            truth,
            learned,
            abs_error: truth.map(|t| (learned - t).abs()),
        }
    }
}

/// Learned-versus-true coefficient table.
pub fn coefficient_table(model: &AnyModel, system: &OdeSystem) -> Vec<CoefficientRow> {
    let names = system.var_names();
    let mut rows = Vec::new();
    match model {
        AnyModel::Phsi(m) => {
            let lib = m.h_lib.clone().with_names(&names);
            let truth = system.true_hamiltonian_terms();
            let offsets = lib.param_offsets();
            for (i, term) in lib.terms.iter().enumerate() {
                let learned = m.params[offsets[i]];
                let t = match term {
                    Term::Monomial(e) => truth.iter().find(|(te, _)| te == e).map_or(0.0, |x| x.1),
                    Term::Trig(_) => 0.0,
                };
                if t != 0.0 || learned != 0.0 {
                    rows.push(CoefficientRow::new(lib.term_label(i), Some(t), learned));
                }
            }
            let true_r = system.damping();
            let lay = m.layout();
            for (k, &c) in m.damping_components.iter().enumerate() {
                let label = match system.benchmark {
                    Benchmark::MassSpring => "c".to_string(),
                    Benchmark::Tanks if system.tanks().is_some_and(|n| c < n.n_pipes()) => format!("r{}", c + 1),
                    _ => format!("r[{}]", names[c]),
                };
                rows.push(CoefficientRow::new(label, Some(true_r[c]), m.params[lay.damping.start + k]));
            }
            if let ForceModel::Symbolic(f) = &m.force {
                let lib = if f.time_only {
                    f.lib.clone().with_names(&["t"])
                } else {
                    f.lib.clone().with_names(&names)
                };
                let np = lib.n_params();
                let offsets = lib.param_offsets();
                let ms = system.mass_spring().filter(|_| f.time_only);
                for (k, &c) in f.components.iter().enumerate() {
                    let p = &m.params[lay.force.start + k * np..lay.force.start + (k + 1) * np];
                    for (i, term) in lib.terms.iter().enumerate() {
                        let v = &p[offsets[i]..offsets[i] + term.n_params()];
                        match (term, ms) {
                            (Term::Trig(TrigShape::Sin), Some(ms)) if c == 1 => {
                                let (a, w) = if v[1] < 0.0 { (-v[0], -v[1]) } else { (v[0], v[1]) };
                                rows.push(CoefficientRow::new("alpha", Some(ms.alpha), a));
                                rows.push(CoefficientRow::new("omega", Some(ms.omega), if a == 0.0 { 0.0 } else { w }));
                            }
                            _ if v[0] != 0.0 => {
                                rows.push(CoefficientRow::new(
                                    format!("F[{}]:{}", names[c], lib.term_label(i)),
                                    Some(0.0),
                                    v[0],
                                ));
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
        AnyModel::Baseline(m) => {
            let mut lib_names = names.clone();
            if m.time_augmented {
                lib_names.push("t".into());
            }
            let lib = m.lib.clone().with_names(&lib_names);
            let offsets = lib.param_offsets();
            for c in 0..m.dim {
                let p = m.component(c);
                for (i, term) in lib.terms.iter().enumerate() {
                    let v = p[offsets[i]];
                    if v == 0.0 {
                        continue;
                    }
                    rows.push(CoefficientRow::new(format!("d{}/dt:{}", names[c], lib.term_label(i)), None, v));
                    if let Term::Trig(_) = term {
                        rows.push(CoefficientRow::new(
                            format!("d{}/dt:{}:frequency", names[c], lib.term_label(i)),
                            None,
                            p[offsets[i] + 1],
                        ));
                    }
                }
            }
        }
    }
    rows
}

/// Learned friction over true friction, per damped pipe.
pub fn friction_ratios(model: &AnyModel, system: &OdeSystem) -> Vec<f64> {
    match (model, system.tanks()) {
        (AnyModel::Phsi(m), Some(_)) => {
            let truth = system.damping();
            let learned = m.damping();
            m.damping_components
                .iter()
                .filter(|&&c| truth[c] != 0.0)
                .map(|&c| learned[c] / truth[c])
                .collect()
        }
        _ => Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub system: Benchmark,
    pub model: ModelKind,
    pub integrator: Scheme,
    pub budget: Budget,
    pub coefficients: Vec<CoefficientRow>,
    pub equations: String,
    pub errors: ErrorSummary,
    pub extrapolation: Option<ErrorSummary>,
    pub friction_ratios: Vec<f64>,
    pub active_terms: usize,
    pub final_loss: Option<f64>,
    pub history: Option<TrainHistory>,
    pub config: ExperimentConfig,
}

impl ExperimentReport {
    pub fn coefficient(&self, term: &str) -> Option<&CoefficientRow> {
        self.coefficients.iter().find(|r| r.term == term)
    }
}

/// Everything a run produces. Only `report` is deterministic output;
/// `seconds` is wall-clock time.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report: ExperimentReport,
    pub model: AnyModel,
    pub dataset: Dataset,
    pub system: OdeSystem,
    pub seconds: f64,
}

pub fn evaluate(cfg: &ExperimentConfig, system: &OdeSystem, model: &AnyModel) -> Result<(ErrorSummary, Option<ErrorSummary>)> {
    let inits = eval_inits(cfg, system)?;
    let errors = trajectory_errors(model, system, &inits, cfg.eval.t_end, cfg.dt_out(), cfg.eval.substeps)?;
    let extrapolation = if cfg.eval.extrapolation_inits.is_empty() {
        None
    } else {
        Some(trajectory_errors(
            model,
            system,
            &cfg.eval.extrapolation_inits,
            cfg.eval.extrapolation_t_end,
            cfg.dt_out(),
            cfg.eval.substeps,
        )?)
    };
    Ok((errors, extrapolation))
}

/// Builds the report for an already fitted model.
pub fn make_report(
    cfg: &ExperimentConfig,
    system: &OdeSystem,
    model: &AnyModel,
    history: Option<TrainHistory>,
) -> Result<ExperimentReport> {
    let (errors, extrapolation) = evaluate(cfg, system, model)?;
    let mut history = history;
    if let Some(h) = history.as_mut() {
        h.params.clear();
    }
    Ok(ExperimentReport {
        name: cfg.name.clone(),
        system: cfg.system,
        model: cfg.model.kind,
        integrator: cfg.train.integrator,
        budget: cfg.budget,
        coefficients: coefficient_table(model, system),
        equations: model.equations(&system.var_names()).to_string(),
        errors,
        extrapolation,
        friction_ratios: friction_ratios(model, system),
        active_terms: model.active_terms(),
        final_loss: history.as_ref().and_then(|h| h.epochs.last()).map(|e| e.loss),
        history,
        config: cfg.clone(),
    })
}

/// Generate data, fit, evaluate.
pub fn run_experiment_full(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let start = Instant::now();
    let system = system_of(cfg)?;
    let dataset = generate_dataset(&system, &cfg.data)?;
    let (model, history) = fit_model(cfg, &system, &dataset)?;
    let report = make_report(cfg, &system, &model, history)?;
    let seconds = start.elapsed().as_secs_f64();
    info!(
        "{} ({:?}, {}) finished in {:.1}s, mean error {:?}",
        cfg.name, cfg.model.kind, cfg.train.integrator, seconds, report.errors.mean_finite
    );
    Ok(RunArtifacts {
        report,
        model,
        dataset,
        system,
        seconds,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    Ok(run_experiment_full(cfg)?.report)
}

/// A data budget of the integrator study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepBudget {
    pub label: String,
    pub n_traj: usize,
    pub t_end: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub integrator: Scheme,
    pub budget: String,
    pub sigma: f64,
    pub errors: ErrorSummary,
    pub friction_ratios: Vec<f64>,
    pub friction_ratio_mean: Option<f64>,
    pub active_terms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSweep {
    pub system: Benchmark,
    pub cells: Vec<SweepCell>,
}

impl IntegratorSweep {
    pub fn cell(&self, integrator: Scheme, budget: &str, sigma: f64) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.integrator == integrator && c.budget == budget && c.sigma == sigma)
    }
}

/// Integrators, data budgets and noise levels of one integrator study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub schemes: Vec<Scheme>,
    pub budgets: Vec<SweepBudget>,
    pub noise: Vec<f64>,
}

/// Standard integrator study for the system of `cfg`. Returns the base
/// config to sweep from (orbits of the Hénon–Heiles study are kept bounded)
/// and the plan. The desk budget keeps the first data budget at a fifth of
/// the trajectories and drops the high-noise level.
pub fn default_sweep_plan(cfg: &ExperimentConfig) -> Result<(ExperimentConfig, SweepPlan)> {
    let mut base = cfg.clone();
    let system = system_of(cfg)?;
    let mut schemes = vec![Scheme::Euler, Scheme::Midpoint, Scheme::Rk4, Scheme::Srk4];
    if Scheme::Srk6.available() {
        schemes.push(Scheme::Srk6);
    }
    let budget = |label: &str, n_traj, t_end, dt| SweepBudget {
        label: label.into(),
        n_traj,
        t_end,
        dt,
    };
    let mut budgets = match cfg.system {
        Benchmark::Tanks => vec![budget("7500 points", 300, 0.5, 0.02), budget("30000 points", 150, 2.0, 0.01)],
        Benchmark::HenonHeiles => {
            base.data.max_energy = Some(1.0 / 6.0);
            vec![budget("250 points", 25, 10.0, 1.0), budget("1000 points", 50, 10.0, 0.5)]
        }
        _ => vec![budget("preset", cfg.data.n_traj, cfg.data.t_end, cfg.data.dt)],
    };
    if system.separable_split().is_some() {
        schemes.push(Scheme::Prk4);
    }
    let mut noise = vec![0.0, 0.03, 0.05];
    if cfg.budget == Budget::Desk {
        budgets.truncate(1);
        for b in &mut budgets {
            b.n_traj = (b.n_traj / 5).max(1);
        }
        noise.truncate(2);
    }
    Ok((base, SweepPlan { schemes, budgets, noise }))
}

/// Regularization strengths, pruning intervals and epoch count of the
/// sparsity study for one system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegGrid {
    pub lambdas: Vec<f64>,
    pub intervals: Vec<usize>,
    pub epochs: usize,
    /// Evaluation trajectories per cell.
    pub n_inits: usize,
}

pub fn default_reg_grid(system: Benchmark) -> RegGrid {
    let (lambdas, intervals, epochs) = match system {
        Benchmark::HenonHeiles => (vec![0.0, 0.05, 0.5], vec![1, 2, 4], 3),
        Benchmark::Nls => (vec![0.0, 0.05, 0.5], vec![1, 5, 10], 10),
        Benchmark::MassSpring => (vec![0.0, 0.1, 0.5], vec![20, 40, 80], 80),
        Benchmark::Tanks => (vec![0.0, 0.05, 0.5], vec![10, 40, 80], 80),
    };
    RegGrid {
        lambdas,
        intervals,
        epochs,
        n_inits: 30,
    }
}

/// Seed of the dataset shared by all integrators in one (budget, noise)
/// cell group.
fn group_seed(seed: u64, budget: usize, noise: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add((budget * 1009 + noise) as u64)
}

/// One model per (integrator, budget, noise) cell. All integrators of a
/// (budget, noise) group see the same data.
pub fn integrator_sweep(
    base: &ExperimentConfig,
    schemes: &[Scheme],
    budgets: &[SweepBudget],
    noise: &[f64],
    seed: u64,
) -> Result<IntegratorSweep> {
    let system = system_of(base)?;
    for &s in schemes {
        if s == Scheme::Prk4 && system.separable_split().is_none() {
            return Err(Error::NonSeparable("prk4"));
        }
        if !s.available() {
            return Err(Error::Unavailable(s.name()));
        }
    }
    let mut cells = Vec::new();
    for (bi, b) in budgets.iter().enumerate() {
        for (ni, &sigma) in noise.iter().enumerate() {
            let mut cfg = base.clone();
            cfg.data.n_traj = b.n_traj;
            cfg.data.t_end = b.t_end;
            cfg.data.dt = b.dt;
            cfg.data.sigma = sigma;
            cfg.data.seed = group_seed(seed, bi, ni);
            cfg.train.seed = seed;
            cfg.eval.seed = seed;
            let dataset = generate_dataset(&system, &cfg.data)?;
            for &scheme in schemes {
                let mut c = cfg.clone();
                c.train.integrator = scheme;
                let start = Instant::now();
                let (model, _) = match fit_model(&c, &system, &dataset) {
                    Ok(r) => r,
                    Err(Error::Diverged { epoch }) => {
                        warn!("{} diverged at epoch {epoch}", scheme.name());
                        cells.push(SweepCell {
                            integrator: scheme,
                            budget: b.label.clone(),
                            sigma,
                            errors: ErrorSummary::from_errors(vec![None; c.eval.n_inits]),
                            friction_ratios: Vec::new(),
                            friction_ratio_mean: None,
                            active_terms: 0,
                        });
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let (errors, _) = evaluate(&c, &system, &model)?;
                let ratios = friction_ratios(&model, &system);
                info!(
                    "sweep cell {} {} sigma={sigma}: {:?} ({:.1}s)",
                    scheme.name(),
                    b.label,
                    errors.mean_finite,
                    start.elapsed().as_secs_f64()
                );
                cells.push(SweepCell {
                    integrator: scheme,
                    budget: b.label.clone(),
                    sigma,
                    friction_ratio_mean: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
                    friction_ratios: ratios,
                    errors,
                    active_terms: model.active_terms(),
                });
            }
        }
    }
    Ok(IntegratorSweep {
        system: base.system,
        cells,
    })
}

/// Mean trajectory error per (λ_H, P) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub system: Benchmark,
    pub lambdas: Vec<f64>,
    pub intervals: Vec<usize>,
    /// `scores[i][j]` for `lambdas[i]`, `intervals[j]`; blow-ups score as
    /// infinity and serialize as null.
    pub scores: Vec<Vec<f64>>,
    pub active_terms: Vec<Vec<usize>>,
}

impl Heatmap {
    pub fn worst_best_ratio(&self) -> f64 {
        let all: Vec<f64> = self.scores.iter().flatten().copied().collect();
        let best = all.iter().copied().fold(f64::INFINITY, f64::min);
        let worst = all.iter().copied().fold(0.0, f64::max);
        worst / best
    }
}

pub fn reg_prune_sweep(
    base: &ExperimentConfig,
    lambdas: &[f64],
    intervals: &[usize],
    epochs: usize,
    seed: u64,
) -> Result<Heatmap> {
    if lambdas.is_empty() || intervals.is_empty() {
        return Err(Error::Config("sweep grids must be nonempty".into()));
    }
    let system = system_of(base)?;
    let mut cfg = base.clone().with_seed(seed);
    cfg.train.epochs = epochs;
    let dataset = generate_dataset(&system, &cfg.data)?;
    let mut scores = Vec::new();
    let mut terms = Vec::new();
    for &lambda in lambdas {
        let mut row = Vec::new();
        let mut trow = Vec::new();
        for &p in intervals {
            let mut c = cfg.clone();
            c.train.lambda_h = lambda;
            c.train.prune_interval = p;
            match fit_model(&c, &system, &dataset) {
                Ok((model, _)) => {
                    let (errors, _) = evaluate(&c, &system, &model)?;
                    info!("reg sweep lambda={lambda} P={p}: {:?}", errors.mean_finite);
                    row.push(errors.score());
                    trow.push(model.active_terms());
                }
                Err(Error::Diverged { epoch }) => {
                    warn!("lambda={lambda} P={p} diverged at epoch {epoch}");
                    row.push(f64::INFINITY);
                    trow.push(0);
                }
                Err(e) => return Err(e),
            }
        }
        scores.push(row);
        terms.push(trow);
    }
    Ok(Heatmap {
        system: base.system,
        lambdas: lambdas.to_vec(),
        intervals: intervals.to_vec(),
        scores,
        active_terms: terms,
    })
}

/// Truth and model trajectories from one initial state.
pub fn simulate_pair<M: Dynamics + ?Sized>(
    model: &M,
    system: &OdeSystem,
    x0: &[f64],
    t_end: f64,
    dt_out: f64,
) -> Result<(Trajectory, Option<Trajectory>)> {
    let truth = reference_simulate(system, x0, t_end, dt_out, 10)?;
    let learned = match reference_simulate(model, x0, t_end, dt_out, 10) {
        Ok(t) => Some(t),
        Err(Error::BlowUp { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok((truth, learned))
}
