//! Quadratic barriers θ ≤ φ ≤ e^M θ on balls, the normal-derivative bounds
//! and the threshold λ̄ with its 1/r² scaling.
//!
//!     cargo run --release --example barrier_sandwich

use std::sync::Arc;

use gelfand::barriers::{check_barriers, lambda_bar, lambda_bar_refined};
use gelfand::domain::{build_grid, DomainSpec};
use gelfand::steady::{continue_branch, ContinuationControls};

fn main() -> gelfand::Result<()> {
    for n in [2, 3, 5] {
        let grid = Arc::new(build_grid(DomainSpec::ball(n, 1.0), 801)?);
        let branch = continue_branch(&grid, 100.0, ContinuationControls::default())?;
        let table = branch.table();
        let refined = lambda_bar_refined(&branch, 0.0)?;
        println!(
            "n = {n}: lambda* ≈ {:.5}, lambda_bar = {:.6} (lambda1 {:.6}, (n-1)²/2 {:.3}, growth {:.6}); table-only {:.6}",
            branch.lambda_star_estimate,
            refined.lambda_bar,
            refined.lambda1,
            refined.quadratic_term,
            refined.growth_term,
            lambda_bar(n, 1.0, &table)?.lambda_bar
        );
        for f in [0.1, 0.25, 0.5] {
            let sol = branch.solve_at(f * branch.lambda_star_estimate)?;
            let (r, _) = check_barriers(&sol, Some(&table))?;
            println!(
                "  lambda {:.4}: M {:.5}  lower {:.1e}  upper {:.1e}  phi_nu {:.5} in [{:.5}, {:.5}]  G_min {:.4}",
                r.lambda, r.m, r.lower_violation, r.upper_violation, r.phi_nu, r.phi_nu_bounds[0], r.phi_nu_bounds[1], r.g_min
            );
        }
    }
    for r in [0.5, 1.0, 2.0, 4.0] {
        let grid = Arc::new(build_grid(DomainSpec::ball(3, r), 801)?);
        let branch = continue_branch(&grid, 100.0, ContinuationControls::default())?;
        let lb = lambda_bar_refined(&branch, 0.0)?.lambda_bar;
        println!("B_{r} in R^3: lambda_bar = {lb:.8}, r² lambda_bar = {:.8}", lb * r * r);
    }
    Ok(())
}
