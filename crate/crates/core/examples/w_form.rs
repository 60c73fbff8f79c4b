//! One flow step in the u variable against the same step taken for
//! w = e^{-u/2}, for shrinking h and dt.
//!
//!     cargo run --release --example w_form

use std::sync::Arc;

use gelfand::domain::{build_grid, DomainSpec, ScalarField};
use gelfand::flow::{step_imex, step_w_form, FlowState};
use gelfand::geometry::to_w;

fn main() -> gelfand::Result<()> {
    let lambda = 1.0;
    for n in [101, 201, 401, 801] {
        let grid = Arc::new(build_grid(DomainSpec::interval(1.0), n)?);
        let dt = 0.5 * grid.spacing();
        let u0 = ScalarField::from_fn(&grid, |[x, _]| 0.5 * x * (1.0 - x));
        let w1 = step_w_form(&to_w(&u0), lambda, dt)?;
        let mut state = FlowState::new(u0, lambda, dt)?;
        step_imex(&mut state)?;
        let gap = to_w(&state.u).distance(&w1)?;
        println!("h {:.5}  dt {:.5}  |w(u1) - w1| = {gap:.3e}", grid.spacing(), dt);
    }
    Ok(())
}
