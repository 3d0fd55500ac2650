//! Fits the same noisy mass-spring data with PHSI, the direct baseline
//! trained on the scheme, and sequentially thresholded least squares.
//!
//! ```text
//! cargo run --release --example sindy_baseline -- [paper|desk] [sigma]
//! ```

use phsysid::config::{preset, Budget, ModelKind};
use phsysid::dynamics::generate_dataset;
use phsysid::experiments::{fit_model, make_report, system_of};

fn main() -> phsysid::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let budget: Budget = args.first().map_or(Ok(Budget::Desk), |s| s.parse())?;
    let mut base = preset("mass-spring", budget)?;
    if let Some(s) = args.get(1) {
        base.data.sigma = s.parse().map_err(|_| phsysid::Error::Config(format!("bad sigma {s}")))?;
    }
    let system = system_of(&base)?;
    let data = generate_dataset(&system, &base.data)?;
    for kind in [ModelKind::Phsi, ModelKind::Bsi, ModelKind::Sindy] {
        let mut cfg = base.clone();
        cfg.model.kind = kind;
        let (model, history) = fit_model(&cfg, &system, &data)?;
        let report = make_report(&cfg, &system, &model, history)?;
        println!("== {kind:?}: {} active terms", report.active_terms);
        println!("{}", report.equations);
        println!(
            "mean trajectory error {:?}, {} blow-ups\n",
            report.errors.mean_finite, report.errors.blowups
        );
    }
    Ok(())
}
