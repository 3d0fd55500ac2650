//! Prints the property table of the one-step schemes, their measured
//! convergence orders and the reversal symmetry of their residuals.
//!
//! ```text
//! cargo run --release --example integrator_orders
//! ```

use phsysid::integrators::{convergence_order, scheme_residual, Scheme, TestProblem};

fn main() -> phsysid::Result<()> {
    let dts = [0.2, 0.1, 0.05, 0.025];
    let cubic = |x: &[f64], t: f64| vec![x[1], -x[0] * x[0] * x[0] + 0.5 * t];
    let (x0, x1, t, dt) = ([0.4, -0.3], [0.37, -0.29], 0.2, 0.1);
    println!(
        "{:>9} {:>5} {:>7} {:>10} {:>10} {:>10} {:>9} {:>14}",
        "scheme", "order", "g-evals", "explicit", "symmetric", "exp-slope", "osc-slope", "reversal-err"
    );
    for s in Scheme::ALL.into_iter().filter(|s| s.available()) {
        let info = s.info();
        let exp = if s == Scheme::Prk4 {
            f64::NAN
        } else {
            convergence_order(s, &TestProblem::exponential(), &dts)?
        };
        let osc = convergence_order(s, &TestProblem::oscillator(), &dts)?;
        // prk4 needs the partitioned form and has no plain residual.
        let rev = match (
            scheme_residual(s, &cubic, &x0, &x1, t, dt),
            scheme_residual(s, &cubic, &x1, &x0, t + dt, -dt),
        ) {
            (Ok(f), Ok(b)) => f.iter().zip(&b).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max),
            _ => f64::NAN,
        };
        println!(
            "{:>9} {:>5} {:>7} {:>10} {:>10} {:>10.3} {:>9.3} {:>14.3e}",
            info.name, info.order, info.g_evals, info.explicit.to_string(), info.symmetric, exp, osc, rev
        );
    }
    Ok(())
}
