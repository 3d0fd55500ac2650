//! Dataset, model and history files.
//!
//! A dataset is a CSV with header `traj_id,t,x0,...,x{d-1}` next to a TOML
//! sidecar (same stem, `.toml`) holding the system name, parameters and
//! sampling settings. Floats are written in shortest round-trip form, so a
//! save/load cycle is bit-exact.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Benchmark, Dataset, SystemParams, Trajectory};
use crate::error::{Error, Result};
use crate::models::AnyModel;
use crate::training::TrainHistory;

/// Sidecar metadata for a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub system: Benchmark,
    pub dt: f64,
    pub sigma: f64,
    pub seed: u64,
    pub n_traj: usize,
    pub dim: usize,
    #[serde(default)]
    pub params: SystemParams,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("toml")
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
        }
        _ => Ok(()),
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse {
        what: "json",
        reason: e.to_string(),
    })?;
    write_text(path, &(text + "\n"))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::Parse {
        what: "json",
        reason: format!("{}: {e}", path.display()),
    })
}

pub fn save_model(path: &Path, model: &AnyModel) -> Result<()> {
    write_json(path, model)
}

pub fn load_model(path: &Path) -> Result<AnyModel> {
    read_json(path)
}

pub fn save_history(path: &Path, history: &TrainHistory) -> Result<()> {
    write_json(path, history)
}

/// Writes the noisy trajectories of `dataset` to `path` and its sidecar.
pub fn save_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    ensure_parent(path)?;
    let dim = dataset.dim();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["traj_id".to_string(), "t".to_string()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (id, tr) in dataset.trajectories.iter().enumerate() {
        for (t, x) in tr.times.iter().zip(&tr.states) {
            let mut row = vec![id.to_string(), format!("{t:e}")];
            row.extend(x.iter().map(|v| format!("{v:e}")));
            w.write_record(&row).map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let meta = DatasetMeta {
        system: dataset.system,
        dt: dataset.dt,
        sigma: dataset.noise_sigma,
        seed: dataset.seed,
        n_traj: dataset.trajectories.len(),
        dim,
        params: dataset.params.clone(),
    };
    let text = toml::to_string(&meta).map_err(|e| Error::Parse {
        what: "dataset metadata",
        reason: e.to_string(),
    })?;
    write_text(&sidecar_path(path), &text)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        what: "dataset csv",
        reason: format!("{}: {e}", path.display()),
    }
}

fn parse_f64(field: &str, line: u64) -> Result<f64> {
    field.trim().parse().map_err(|_| Error::Parse {
        what: "dataset csv",
        reason: format!("line {line}: bad number `{field}`"),
    })
}

/// Reads a dataset written by [`save_dataset`]. Clean trajectories are not
/// stored, so `clean` is `None`.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let meta: DatasetMeta =
        toml::from_str(&read_text(&sidecar_path(path))?).map_err(|e| Error::Parse {
            what: "dataset metadata",
            reason: e.to_string(),
        })?;
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() != meta.dim + 2 || &header[0] != "traj_id" || &header[1] != "t" {
        return Err(Error::Parse {
            what: "dataset csv",
            reason: format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut trajectories: Vec<Trajectory> = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let id: usize = record[0].trim().parse().map_err(|_| Error::Parse {
            what: "dataset csv",
            reason: format!("line {line}: bad trajectory id `{}`", &record[0]),
        })?;
        if id > trajectories.len() {
            return Err(Error::Parse {
                what: "dataset csv",
                reason: format!("line {line}: trajectory {id} out of order"),
            });
        }
        if id == trajectories.len() {
            trajectories.push(Trajectory {
                times: Vec::new(),
                states: Vec::new(),
                dt: meta.dt,
            });
        }
        let tr = &mut trajectories[id];
        tr.times.push(parse_f64(&record[1], line)?);
        tr.states.push(
            (2..record.len())
                .map(|i| parse_f64(&record[i], line))
                .collect::<Result<_>>()?,
        );
    }
    if trajectories.len() != meta.n_traj {
        return Err(Error::Dimension {
            expected: meta.n_traj,
            got: trajectories.len(),
        });
    }
    for tr in &trajectories {
        tr.validate()?;
    }
    Ok(Dataset {
        system: meta.system,
        params: meta.params,
        trajectories,
        clean: None,
        noise_sigma: meta.sigma,
        seed: meta.seed,
        dt: meta.dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{generate_dataset, make_benchmark, DataSpec};

    #[test]
    fn dataset_round_trip_is_bit_exact() {
        let sys = make_benchmark("mass_spring", &SystemParams::new()).unwrap();
        let spec = DataSpec {
            n_traj: 3,
            t_end: 1.0,
            dt: 0.1,
            sigma: 0.2,
            seed: 4,
            ..Default::default()
        };
        let ds = generate_dataset(&sys, &spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/data.csv");
        save_dataset(&path, &ds).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(back.trajectories, ds.trajectories);
        assert_eq!(back.noise_sigma, 0.2);
        assert_eq!(back.seed, 4);
        let head = fs::read_to_string(&path).unwrap();
        assert!(head.starts_with("traj_id,t,x0,x1\n"));
    }

    #[test]
    fn bad_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        fs::write(&path, "id,t,x0\n0,0,1\n").unwrap();
        fs::write(
            sidecar_path(&path),
            "system = \"nls\"\ndt = 0.1\nsigma = 0.0\nseed = 0\nn_traj = 1\ndim = 1\n",
        )
        .unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Parse { .. })));
    }
}
