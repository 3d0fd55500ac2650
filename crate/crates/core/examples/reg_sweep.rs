//! Sparsity study: one model per (λ_H, P) cell on noise-free data, printed
//! as a score grid with the number of surviving terms per cell.
//!
//! ```text
//! cargo run --release --example reg_sweep -- tanks [seed]
//! ```

use phsysid::config::{preset, Budget};
use phsysid::experiments::{default_reg_grid, reg_prune_sweep};

fn main() -> phsysid::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.first().map_or("henon-heiles", String::as_str);
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut cfg = preset(name, Budget::Paper)?;
    cfg.data.sigma = 0.0;
    let grid = default_reg_grid(cfg.system);
    cfg.eval.n_inits = grid.n_inits;
    let h = reg_prune_sweep(&cfg, &grid.lambdas, &grid.intervals, grid.epochs, seed)?;
    print!("{:>10}", "lambda_H");
    for p in &h.intervals {
        print!("{:>22}", format!("P={p}"));
    }
    println!();
    for ((lambda, row), terms) in h.lambdas.iter().zip(&h.scores).zip(&h.active_terms) {
        print!("{lambda:>10}");
        for (s, n) in row.iter().zip(terms) {
            print!("{:>22}", format!("{s:.4e} ({n} terms)"));
        }
        println!();
    }
    println!("worst/best {:.1}", h.worst_best_ratio());
    Ok(())
}
