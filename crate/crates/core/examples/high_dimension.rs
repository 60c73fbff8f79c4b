//! The unit ball in ℝ¹⁰: no fold below λ* = 2(n−2) = 16 and φ(0.5) creeping
//! up toward log 4, the value of the singular solution log(1/|x|²).
//!
//!     cargo run --release --example high_dimension

use std::sync::Arc;

use gelfand::domain::{build_grid, DomainSpec};
use gelfand::steady::{continue_branch, ContinuationControls};

fn main() -> gelfand::Result<()> {
    for res in [401, 801, 1601, 3201] {
        let grid = Arc::new(build_grid(DomainSpec::ball(10, 1.0), res)?);
        let branch = continue_branch(&grid, 15.99, ContinuationControls::default())?;
        let i = grid.node_at_radius(0.5);
        let last = branch.solutions.last().expect("branch has points");
        let min_mu1 = branch.points.iter().map(|p| p.mu1).fold(f64::INFINITY, f64::min);
        println!(
            "res {res:>4}: {:?}, fold {}, min mu1 {:.3e}, max phi {:.4}, phi(0.5) {:.10}, log 4 - phi(0.5) {:.4e}",
            branch.termination_reason,
            branch.fold_detected,
            min_mu1,
            last.phi.max(),
            last.phi.at(i),
            4f64.ln() - last.phi.at(i)
        );
    }
    Ok(())
}
