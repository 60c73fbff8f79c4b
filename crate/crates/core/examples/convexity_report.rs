//! f-convexity of the minimal solution: smallest Hessian eigenvalue of
//! w = e^{-φ/2}, the boundary functional G and the mixed-derivative ratio, on
//! the disk and on an ellipse. Writes the Hessian field as CSV.
//!
//!     cargo run --release --example convexity_report

use std::path::Path;
use std::sync::Arc;

use gelfand::domain::{build_grid, DomainSpec, ScalarField};
use gelfand::geometry::convexity_report;
use gelfand::io::{to_json, write_field_csv};
use gelfand::steady::newton_solve;

fn main() -> gelfand::Result<()> {
    for (spec, n, lambda) in [(DomainSpec::ball(2, 1.0), 401, 0.25), (DomainSpec::ellipse(1.3, 1.0), 65, 0.25)] {
        let grid = Arc::new(build_grid(spec, n)?);
        let sol = newton_solve(&grid, lambda, &ScalarField::zeros(&grid), 1e-10)?;
        let (report, hessian) = convexity_report(&sol.phi, lambda, None)?;
        print!("{}", to_json(&report)?);
        let path = std::env::temp_dir().join(format!("hessian_{}.csv", spec.kind_name()));
        write_field_csv(Path::new(&path), &hessian.field)?;
        println!("hessian field written to {}", path.display());
    }
    Ok(())
}
