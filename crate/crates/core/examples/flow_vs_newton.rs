//! The parabolic flow from u₀ = 0 against the Newton solution on the disk,
//! with the Lyapunov functional along the way, and a run above λ* that
//! ends in blow-up.
//!
//!     cargo run --release --example flow_vs_newton

use std::sync::Arc;

use gelfand::domain::{build_grid, DomainSpec, ScalarField};
use gelfand::flow::{run_monitored, FlowControls};
use gelfand::steady::newton_solve;

fn main() -> gelfand::Result<()> {
    let grid = Arc::new(build_grid(DomainSpec::ball(2, 1.0), 401)?);
    let lambda = 1.0;
    let phi = newton_solve(&grid, lambda, &ScalarField::zeros(&grid), 1e-10)?;
    let controls = FlowControls { record_stride: 200, ..FlowControls::default() };
    let report = run_monitored(ScalarField::zeros(&grid), lambda, &controls, Some(&phi.phi))?;
    for row in &report.series {
        println!("t {:>8.3}  max u {:.8}  F {:.10}", row.t, row.max_u, row.lyapunov);
    }
    println!(
        "converged {} after {} steps; |u - phi| = {:.2e}; max relative F increase {:.1e}; max (u - phi)+ = {:.1e}",
        report.converged,
        report.wall_steps,
        report.state.u.distance(&phi.phi)?,
        report.max_lyapunov_increase(),
        report.max_comparison_violation.unwrap_or(0.0)
    );

    let above = run_monitored(ScalarField::zeros(&grid), 2.5, &FlowControls::default(), None)?;
    match above.blow_up {
        Some(b) => println!("lambda = 2.5 > lambda*: blow-up at t = {:.4} (max u {:.1})", b.t, b.max_u),
        None => println!("lambda = 2.5: no blow-up within {} steps", above.wall_steps),
    }
    Ok(())
}
