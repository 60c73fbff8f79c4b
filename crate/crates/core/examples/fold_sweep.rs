//! Continue the minimal branch from λ = 0 to the fold on the interval, the
//! disk and the unit ball in ℝ³, and print the branch table.
//!
//!     cargo run --release --example fold_sweep

use std::sync::Arc;

use gelfand::domain::{build_grid, DomainSpec};
use gelfand::steady::{continue_branch, ContinuationControls};

fn main() -> gelfand::Result<()> {
    for spec in [DomainSpec::interval(1.0), DomainSpec::ball(2, 1.0), DomainSpec::ball(3, 1.0)] {
        let grid = Arc::new(build_grid(spec, 801)?);
        let branch = continue_branch(&grid, 100.0, ContinuationControls::default())?;
        println!(
            "{:?}: lambda* ≈ {:.6} ({:?}, {} points)",
            spec,
            branch.lambda_star_estimate,
            branch.termination_reason,
            branch.points.len()
        );
        for p in branch.points.iter().step_by(4) {
            println!("  lambda {:>9.6}  max phi {:>9.6}  mu1 {:>10.4e}", p.lambda, p.max_phi, p.mu1);
        }
        if let Some(f) = branch.fold_point {
            println!("  fold   {:>9.6}  max phi {:>9.6}  mu1 {:>10.4e}", f.lambda, f.max_phi, f.mu1);
        }
    }
    Ok(())
}
