//! `phsysid` command line. Every subcommand writes its files into `--out`;
//! failures print one JSON line `{"error": kind, "message": ...}` to stderr
//! and exit with status 1.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use phsysid::config::{preset, Budget, ExperimentConfig};
use phsysid::dynamics::{generate_dataset, Dataset};
use phsysid::experiments::{
    default_reg_grid, default_sweep_plan, eval_inits, fit_model, integrator_sweep, make_report, reg_prune_sweep,
    run_experiment_full, simulate_pair, system_of,
};
use phsysid::integrators::Scheme;
use phsysid::io::{load_dataset, load_model, save_dataset, save_history, save_model, write_json, write_text};
use phsysid::report::{emit_heatmap, emit_report, emit_sweep, trajectory_svg, Format};
use phsysid::{Error, Result};

#[derive(Parser)]
#[command(name = "phsysid", version, about = "Sparse identification of pseudo-Hamiltonian systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate and save a training dataset.
    Generate(Common),
    /// Fit a model and save it with its training history.
    Train {
        #[command(flatten)]
        common: Common,
        /// Train on a saved dataset instead of generating one.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Trajectory errors of a saved model.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Model file; defaults to `<out>/model.json`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Simulate the true system and, if given, a saved model.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Initial state, comma separated; defaults to the first evaluation state.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
    },
    /// Train one model per integrator, data budget and noise level.
    SweepIntegrators(Common),
    /// Train one model per regularization strength and pruning interval.
    SweepReg(Common),
    /// Full run: data, training, evaluation and every report file.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; may itself name a preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// henon-heiles, nls, mass-spring or tanks.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    integrator: Option<Scheme>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<Budget>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                let mut cfg = ExperimentConfig::from_toml_str(&text)?;
                if let Some(b) = self.budget {
                    cfg = cfg.with_budget(b);
                }
                if let Some(name) = &self.preset {
                    if name.replace('_', "-") != cfg.name {
                        return Err(Error::Config(format!("--preset {name} conflicts with config `{}`", cfg.name)));
                    }
                }
                cfg
            }
            (None, Some(name)) => preset(name, self.budget.unwrap_or(Budget::Paper))?,
            (None, None) => return Err(Error::Config("one of --config or --preset is required".into())),
        };
        if let Some(s) = self.integrator {
            cfg.train.integrator = s;
        }
        if let Some(seed) = self.seed {
            cfg = cfg.with_seed(seed);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn dataset_for(cfg: &ExperimentConfig, path: Option<&Path>) -> Result<Dataset> {
    match path {
        Some(p) => {
            let ds = load_dataset(p)?;
            if ds.system != cfg.system {
                return Err(Error::Config(format!("dataset is for {}, config for {}", ds.system.name(), cfg.system.name())));
            }
            Ok(ds)
        }
        None => generate_dataset(&system_of(cfg)?, &cfg.data),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(c) => {
            let cfg = c.config()?;
            let ds = dataset_for(&cfg, None)?;
            save_dataset(&c.out.join("dataset.csv"), &ds)?;
            write_text(&c.out.join("config.toml"), &cfg.to_toml_string())?;
            info!("wrote {} trajectories to {}", ds.trajectories.len(), c.out.display());
        }
        Command::Train { common: c, data } => {
            let cfg = c.config()?;
            let system = system_of(&cfg)?;
            let ds = dataset_for(&cfg, data.as_deref())?;
            let (model, history) = fit_model(&cfg, &system, &ds)?;
            save_model(&c.out.join("model.json"), &model)?;
            if let Some(h) = &history {
                save_history(&c.out.join("history.json"), h)?;
            }
            write_text(&c.out.join("equations.txt"), &model.equations(&system.var_names()).to_string())?;
            write_text(&c.out.join("config.toml"), &cfg.to_toml_string())?;
        }
        Command::Evaluate { common: c, model } => {
            let cfg = c.config()?;
            let system = system_of(&cfg)?;
            let model = load_model(&model.unwrap_or_else(|| c.out.join("model.json")))?;
            let report = make_report(&cfg, &system, &model, None)?;
            emit_report(&report, &c.out, &[Format::Csv, Format::Json])?;
            println!("{}", serde_json::json!({"mean_error": report.errors.mean_finite, "blowups": report.errors.blowups}));
        }
        Command::Simulate { common: c, model, x0 } => {
            let cfg = c.config()?;
            let system = system_of(&cfg)?;
            let x0 = match x0 {
                Some(x) => x,
                None => eval_inits(&cfg, &system)?.swap_remove(0),
            };
            let learned = model.map(|p| load_model(&p)).transpose()?;
            let (truth, sim) = match &learned {
                Some(m) => simulate_pair(m, &system, &x0, cfg.eval.t_end, cfg.dt_out())?,
                None => (simulate_pair(&system, &system, &x0, cfg.eval.t_end, cfg.dt_out())?.0, None),
            };
            let mut series = vec![("truth", &truth)];
            if let Some(s) = &sim {
                series.push(("model", s));
            } else if learned.is_some() {
                log::warn!("model trajectory blew up");
            }
            let mut csv = String::from("series,t");
            for i in 0..system.dim() {
                csv.push_str(&format!(",x{i}"));
            }
            csv.push('\n');
            for (name, tr) in &series {
                for (t, x) in tr.times.iter().zip(&tr.states) {
                    csv.push_str(&format!("{name},{t}"));
                    for v in x {
                        csv.push_str(&format!(",{v}"));
                    }
                    csv.push('\n');
                }
            }
            write_text(&c.out.join("trajectory.csv"), &csv)?;
            let refs: Vec<_> = series.iter().map(|(_, t)| *t).collect();
            write_text(&c.out.join("trajectory.svg"), &trajectory_svg(&cfg.name, &refs))?;
        }
        Command::SweepIntegrators(c) => {
            let cfg = c.config()?;
            let (base, mut plan) = default_sweep_plan(&cfg)?;
            if let Some(s) = c.integrator {
                plan.schemes = vec![s];
            }
            let sweep = integrator_sweep(&base, &plan.schemes, &plan.budgets, &plan.noise, base.train.seed)?;
            emit_sweep(&sweep, &c.out)?;
        }
        Command::SweepReg(c) => {
            let mut cfg = c.config()?;
            if c.config.is_none() {
                cfg.data.sigma = 0.0;
            }
            let grid = default_reg_grid(cfg.system);
            cfg.eval.n_inits = grid.n_inits;
            let epochs = if cfg.budget == Budget::Desk { (grid.epochs / 5).max(1) } else { grid.epochs };
            let h = reg_prune_sweep(&cfg, &grid.lambdas, &grid.intervals, epochs, cfg.train.seed)?;
            emit_heatmap(&h, &c.out)?;
        }
        Command::Report(c) => {
            let cfg = c.config()?;
            let run = run_experiment_full(&cfg)?;
            emit_report(&run.report, &c.out, &Format::ALL)?;
            save_model(&c.out.join("model.json"), &run.model)?;
            write_json(&c.out.join("timing.json"), &serde_json::json!({"seconds": run.seconds}))?;
            let x0 = eval_inits(&cfg, &run.system)?.swap_remove(0);
            let (truth, sim) = simulate_pair(&run.model, &run.system, &x0, cfg.eval.t_end, cfg.dt_out())?;
            let mut refs = vec![&truth];
            refs.extend(sim.as_ref());
            write_text(&c.out.join("trajectory.svg"), &trajectory_svg(&cfg.name, &refs))?;
        }
    }
    Ok(())
}

fn fail(kind: &str, message: &str) -> ExitCode {
    eprintln!("{}", serde_json::json!({"error": kind, "message": message}));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim()),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}
