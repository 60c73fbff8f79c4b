//! Conservative threshold λ̄ on ellipses of growing eccentricity, with G
//! sampled below it.
//!
//!     cargo run --release --example ellipse_threshold

use std::sync::Arc;

use gelfand::barriers::lambda_bar_refined;
use gelfand::domain::{boundary_geometry, build_grid, DomainSpec};
use gelfand::geometry::{boundary_g, default_k, mixed_derivative_ratio};
use gelfand::steady::{continue_branch, ContinuationControls};

fn main() -> gelfand::Result<()> {
    for a in [1.0, 1.1, 1.2, 1.3, 1.5] {
        let grid = Arc::new(build_grid(DomainSpec::ellipse(a, 1.0), 49)?);
        let geo = boundary_geometry(&grid);
        let branch = continue_branch(&grid, 100.0, ContinuationControls::default())?;
        let probe = branch.solve_at(0.2 * branch.lambda_star_estimate)?;
        let k = default_k(&grid, mixed_derivative_ratio(&probe.phi)?.value);
        let lb = lambda_bar_refined(&branch, k)?;
        println!(
            "a = {a}: r_in {:.4}  R_out {:.4}  K {:.4}  lambda* ≈ {:.4}  lambda_bar = {:.5}",
            geo.inradius, geo.circumradius, k, branch.lambda_star_estimate, lb.lambda_bar
        );
        if lb.lambda_bar > 0.0 {
            for f in [0.25, 0.5, 0.9] {
                let l = f * lb.lambda_bar;
                let g = boundary_g(&branch.solve_at(l)?.phi, l, k)?;
                println!("  lambda {l:.5}: G_min {:.5} at {:?}", g.value, g.location);
            }
        }
    }
    Ok(())
}
