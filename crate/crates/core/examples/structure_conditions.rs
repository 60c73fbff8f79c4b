//! Structural conditions of the degenerate equation for the w-form of the
//! flow, and a ρ that violates them.
//!
//!     cargo run --release --example structure_conditions

use gelfand::geometry::check_structure_conditions;

fn main() -> gelfand::Result<()> {
    let lambda = 1.5;
    let zero = |_: f64| 0.0;
    let b2 = |w: f64| -w;
    let b3 = move |w: f64| -0.5 * lambda * w;
    let good = check_structure_conditions(|w| w * w, [&zero, &b2, &b3], [0.05, 1.0], 256, 2.0)?;
    println!("rho = w²: {good:?} holds {}", good.holds(1e-10));
    let bad = check_structure_conditions(|w| w.powi(3), [&zero, &b2, &b3], [0.5, 1.0], 256, 2.0)?;
    println!("rho = w³: I.2 violation {:.4} at w = {:.3}, holds {}", bad.i2_violation, bad.i2_argmax, bad.holds(1e-10));
    Ok(())
}
