//! Experiment configuration and the four benchmark presets.
//!
//! A config file is TOML. It may name a `preset` and a `budget`; every other
//! table overrides fields of that preset:
//!
//! ```toml
//! preset = "mass-spring"
//! budget = "desk"
//!
//! [data]
//! sigma = 0.1
//!
//! [train]
//! epochs = 40
//! integrator = "midpoint"
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::basis::{LibrarySpec, TrigSpec};
use crate::dynamics::{Benchmark, DataSpec, SystemParams};
use crate::error::{Error, Result};
use crate::integrators::Scheme;
use crate::models::InitSpec;
use crate::training::Hyperparams;

/// `paper` uses the published budgets; `desk` divides trajectory counts and
/// epochs by five.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    #[default]
    Paper,
    Desk,
}

impl FromStr for Budget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Budget::Paper),
            "desk" => Ok(Budget::Desk),
            _ => Err(Error::Unknown {
                what: "budget",
                name: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Budget::Paper => "paper",
            Budget::Desk => "desk",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Phsi,
    Bsi,
    Sindy,
    PhsiHybrid,
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "phsi" => Ok(ModelKind::Phsi),
            "bsi" => Ok(ModelKind::Bsi),
            "sindy" => Ok(ModelKind::Sindy),
            "phsi_hybrid" => Ok(ModelKind::PhsiHybrid),
            _ => Err(Error::Unknown {
                what: "model",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceKind {
    #[default]
    None,
    Symbolic,
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForceSpec {
    pub kind: ForceKind,
    /// Used by `symbolic`; `time_only` selects a library in `t`.
    pub library: LibrarySpec,
    /// Hidden widths for `mlp`.
    pub hidden: Vec<usize>,
    /// Forced state components; empty means the system's own.
    pub components: Vec<usize>,
}

impl Default for ForceSpec {
    fn default() -> Self {
        Self {
            kind: ForceKind::None,
            library: LibrarySpec::default(),
            hidden: vec![100, 100, 100],
            components: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub hamiltonian: LibrarySpec,
    /// Damped components; absent means the system's damping support.
    pub damping: Option<Vec<usize>>,
    pub force: ForceSpec,
    /// Library for `bsi` and `sindy`.
    pub baseline: LibrarySpec,
    /// SINDy regresses on `(x, t)` and treats time as a state.
    pub time_augmented: bool,
    pub sindy_threshold: f64,
    pub sindy_sweeps: usize,
    pub init: InitSpec,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::Phsi,
            hamiltonian: LibrarySpec::default(),
            damping: None,
            force: ForceSpec::default(),
            baseline: LibrarySpec {
                degree: 2,
                constant: true,
                ..Default::default()
            },
            time_augmented: false,
            sindy_threshold: 0.05,
            sindy_sweeps: 10,
            init: InitSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSpec {
    pub n_inits: usize,
    pub t_end: f64,
    /// Output spacing; absent means the training `dt`.
    pub dt_out: Option<f64>,
    pub init_low: f64,
    pub init_high: f64,
    /// Redraw initial states whose true energy is not below this level.
    pub max_energy: Option<f64>,
    pub seed: u64,
    pub substeps: usize,
    /// Out-of-distribution initial states scored separately.
    pub extrapolation_inits: Vec<Vec<f64>>,
    pub extrapolation_t_end: f64,
}

impl Default for EvalSpec {
    fn default() -> Self {
        Self {
            n_inits: 10,
            t_end: 10.0,
            dt_out: None,
            init_low: -1.0,
            init_high: 1.0,
            max_energy: None,
            seed: 0,
            substeps: 10,
            extrapolation_inits: Vec::new(),
            extrapolation_t_end: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub system: Benchmark,
    pub params: SystemParams,
    pub budget: Budget,
    pub data: DataSpec,
    pub model: ModelSpec,
    pub train: Hyperparams,
    pub eval: EvalSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            system: Benchmark::HenonHeiles,
            params: SystemParams::new(),
            budget: Budget::Paper,
            data: DataSpec::default(),
            model: ModelSpec::default(),
            train: Hyperparams::default(),
            eval: EvalSpec::default(),
        }
    }
}

pub const PRESETS: [&str; 4] = ["henon-heiles", "nls", "mass-spring", "tanks"];

/// Published setup of a benchmark, scaled to `budget`.
pub fn preset(name: &str, budget: Budget) -> Result<ExperimentConfig> {
    let system: Benchmark = name.parse()?;
    let poly = |degree: u32| LibrarySpec {
        degree,
        ..Default::default()
    };
    let mut cfg = match system {
        Benchmark::HenonHeiles => ExperimentConfig {
            data: DataSpec {
                n_traj: 3000,
                t_end: 0.1,
                dt: 0.1,
                sigma: 0.02,
                ..Default::default()
            },
            model: ModelSpec {
                hamiltonian: poly(3),
                baseline: LibrarySpec {
                    degree: 2,
                    constant: true,
                    ..Default::default()
                },
                ..Default::default()
            },
            train: Hyperparams {
                epochs: 60,
                learning_rate: 3e-3,
                prune_interval: 5,
                ..Default::default()
            },
            eval: EvalSpec {
                n_inits: 10,
                t_end: 10.0,
                max_energy: Some(1.0 / 6.0),
                ..Default::default()
            },
            ..Default::default()
        },
        Benchmark::Nls => ExperimentConfig {
            data: DataSpec {
                n_traj: 30,
                t_end: 0.99,
                dt: 0.01,
                sigma: 5e-5,
                ..Default::default()
            },
            model: ModelSpec {
                hamiltonian: poly(4),
                baseline: LibrarySpec {
                    degree: 3,
                    constant: true,
                    ..Default::default()
                },
                ..Default::default()
            },
            train: Hyperparams {
                epochs: 100,
                learning_rate: 1e-2,
                prune_interval: 20,
                ..Default::default()
            },
            eval: EvalSpec {
                n_inits: 10,
                t_end: 1.0,
                ..Default::default()
            },
            ..Default::default()
        },
        Benchmark::MassSpring => ExperimentConfig {
            data: DataSpec {
                n_traj: 50,
                t_end: 10.0,
                dt: 0.1,
                sigma: 0.2,
                ..Default::default()
            },
            model: ModelSpec {
                hamiltonian: poly(3),
                force: ForceSpec {
                    kind: ForceKind::Symbolic,
                    library: LibrarySpec {
                        degree: 3,
                        constant: true,
                        trig: TrigSpec { sin: true, cos: true },
                        time_only: true,
                        ..Default::default()
                    },
                    ..Default::default()
                },
                baseline: LibrarySpec {
                    degree: 3,
                    constant: true,
                    trig: TrigSpec { sin: true, cos: false },
                    ..Default::default()
                },
                ..Default::default()
            },
            train: Hyperparams {
                epochs: 150,
                learning_rate: 5e-3,
                prune_interval: 20,
                lambda_h: 0.1,
                lambda_f: 0.01,
                ..Default::default()
            },
            eval: EvalSpec {
                n_inits: 30,
                t_end: 10.0,
                ..Default::default()
            },
            ..Default::default()
        },
        Benchmark::Tanks => ExperimentConfig {
            data: DataSpec {
                n_traj: 60,
                t_end: 0.5,
                dt: 0.01,
                sigma: 0.005,
                ..Default::default()
            },
            model: ModelSpec {
                kind: ModelKind::PhsiHybrid,
                hamiltonian: poly(2),
                force: ForceSpec {
                    kind: ForceKind::Mlp,
                    ..Default::default()
                },
                baseline: LibrarySpec {
                    degree: 1,
                    constant: true,
                    ..Default::default()
                },
                ..Default::default()
            },
            train: Hyperparams {
                epochs: 100,
                learning_rate: 3e-2,
                prune_interval: 10,
                lambda_h: 0.5,
                lambda_f: 0.001,
                ..Default::default()
            },
            eval: EvalSpec {
                n_inits: 30,
                t_end: 1.0,
                extrapolation_inits: vec![vec![10.0, 19.0, 4.0, 19.0, 7.0, 9.0, 17.0, 9.0, 11.0]],
                extrapolation_t_end: 1.0,
                ..Default::default()
            },
            ..Default::default()
        },
    };
    cfg.name = system.name().replace('_', "-");
    cfg.system = system;
    cfg.budget = Budget::Paper;
    Ok(cfg.with_budget(budget))
}

impl ExperimentConfig {
    pub fn with_budget(mut self, budget: Budget) -> Self {
        if budget == Budget::Desk && self.budget == Budget::Paper {
            self.data.n_traj = (self.data.n_traj / 5).max(1);
            self.train.epochs = (self.train.epochs / 5).max(1);
        }
        self.budget = budget;
        self
    }

    /// One seed for data, training and evaluation.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.data.seed = seed;
        self.train.seed = seed;
        self.eval.seed = seed;
        self
    }

    /// Evaluation output spacing.
    pub fn dt_out(&self) -> f64 {
        self.eval.dt_out.unwrap_or(self.data.dt)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.eval.n_inits == 0 {
            return Err(Error::Config("eval.n_inits must be at least 1".into()));
        }
        if !(self.eval.t_end > 0.0) || !(self.dt_out() > 0.0) {
            return Err(Error::Config("evaluation window and dt_out must be positive".into()));
        }
        Ok(())
    }

    /// Parses a config. A `preset` key selects the base; `budget` scales it.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
            what: "config",
            reason: e.message().to_string(),
        })?;
        let budget = match table.remove("budget") {
            Some(toml::Value::String(s)) => s.parse()?,
            Some(other) => {
                return Err(Error::Parse {
                    what: "config",
                    reason: format!("budget must be a string, got {other}"),
                })
            }
            None => Budget::Paper,
        };
        let base = match table.remove("preset") {
            Some(toml::Value::String(s)) => preset(&s, budget)?,
            Some(other) => {
                return Err(Error::Parse {
                    what: "config",
                    reason: format!("preset must be a string, got {other}"),
                })
            }
            None => ExperimentConfig {
                budget,
                ..Default::default()
            },
        };
        let mut merged = toml::Table::try_from(&base).map_err(|e| Error::Parse {
            what: "config",
            reason: e.to_string(),
        })?;
        merge(&mut merged, table);
        let cfg: ExperimentConfig = merged.try_into().map_err(|e: toml::de::Error| Error::Parse {
            what: "config",
            reason: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Scheme names for CLI help.
pub fn scheme_names() -> Vec<&'static str> {
    Scheme::ALL.iter().map(|s| s.name()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_published_budgets() {
        let hh = preset("henon-heiles", Budget::Paper).unwrap();
        assert_eq!((hh.data.n_traj, hh.data.t_end, hh.data.dt, hh.data.sigma), (3000, 0.1, 0.1, 0.02));
        assert_eq!((hh.train.epochs, hh.train.learning_rate, hh.train.prune_interval), (60, 3e-3, 5));
        let nls = preset("nls", Budget::Paper).unwrap();
        assert_eq!((nls.data.n_traj, nls.data.dt, nls.model.hamiltonian.degree), (30, 0.01, 4));
        let ms = preset("mass-spring", Budget::Paper).unwrap();
        assert_eq!((ms.data.n_traj, ms.data.t_end, ms.data.sigma), (50, 10.0, 0.2));
        assert_eq!((ms.train.lambda_h, ms.train.lambda_f, ms.train.epochs), (0.1, 0.01, 150));
        let tk = preset("tanks", Budget::Paper).unwrap();
        assert_eq!((tk.data.n_traj, tk.data.t_end, tk.data.dt, tk.data.sigma), (60, 0.5, 0.01, 0.005));
        assert_eq!((tk.train.learning_rate, tk.train.lambda_h, tk.train.lambda_f), (3e-2, 0.5, 0.001));
        for cfg in [&hh, &nls, &ms, &tk] {
            assert_eq!(cfg.train.batch_size, 32);
            assert_eq!(cfg.train.weight_decay, 1e-4);
            assert_eq!(cfg.train.integrator, Scheme::Srk4);
            assert_eq!((cfg.data.init_low, cfg.data.init_high), (-1.0, 1.0));
        }
    }

    #[test]
    fn desk_budget_divides_by_five() {
        let d = preset("henon-heiles", Budget::Desk).unwrap();
        assert_eq!((d.data.n_traj, d.train.epochs), (600, 12));
        assert_eq!(d.budget, Budget::Desk);
        assert!(preset("pendulum", Budget::Paper).is_err());
    }

    #[test]
    fn toml_overrides_preset() {
        let cfg = ExperimentConfig::from_toml_str(
            "preset = \"mass-spring\"\nbudget = \"desk\"\n[data]\nsigma = 0.0\n[train]\nintegrator = \"midpoint\"\n",
        )
        .unwrap();
        assert_eq!(cfg.data.sigma, 0.0);
        assert_eq!(cfg.data.n_traj, 10);
        assert_eq!(cfg.train.integrator, Scheme::Midpoint);
        assert_eq!(cfg.train.lambda_h, 0.1);
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        assert!(ExperimentConfig::from_toml_str("[train]\nepochz = 3\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[train]\nepochs = 0\n").is_err());
    }
}
