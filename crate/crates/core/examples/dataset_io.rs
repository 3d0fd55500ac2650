//! Writes a dataset to CSV, reads it back and trains on the copy.
//!
//! ```text
//! cargo run --release --example dataset_io -- [dir]
//! ```

use std::path::PathBuf;

use phsysid::config::{preset, Budget};
use phsysid::dynamics::generate_dataset;
use phsysid::experiments::{fit_model, system_of};
use phsysid::io::{load_dataset, save_dataset, save_model};

fn main() -> phsysid::Result<()> {
    let dir = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("phsysid-dataset-io"), PathBuf::from);
    let cfg = preset("henon-heiles", Budget::Desk)?;
    let system = system_of(&cfg)?;
    let data = generate_dataset(&system, &cfg.data)?;
    let path = dir.join("hh.csv");
    save_dataset(&path, &data)?;
    let back = load_dataset(&path)?;
    assert_eq!(back.trajectories, data.trajectories);
    println!("{} trajectories, {} points, round trip exact", back.trajectories.len(), back.n_points());

    let (model, _) = fit_model(&cfg, &system, &back)?;
    save_model(&dir.join("model.json"), &model)?;
    println!("{}", model.equations(&system.var_names()));
    println!("files in {}", dir.display());
    Ok(())
}
