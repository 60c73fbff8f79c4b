use serde::Serialize;

use crate::error::{GelfandError, Result};

const MIN_SAMPLES: usize = 64;

/// Sampled check of `ρ'' − (ρ')²/(2ρ) = 0` and convexity of `b₁, b₂, b₃`.
#[derive(Debug, Clone, Serialize)]
pub struct StructureReport {
    pub range: [f64; 2],
    pub samples: usize,
    pub p: f64,
    /// `max |ρ'' − (ρ')²/(2ρ)|` over the sample points.
    pub i2_violation: f64,
    /// Where the violation peaks.
    pub i2_argmax: f64,
    /// Minimum second difference of each `bᵢ`.
    pub convexity_margins: [f64; 3],
}

impl StructureReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.i2_violation <= tol && self.convexity_margins.iter().all(|&m| m >= -tol)
    }
}

/// Evaluate the structural conditions on `samples` equispaced points of
/// `range`, with derivatives by central differences at the sample spacing.
pub fn check_structure_conditions(
    rho: impl Fn(f64) -> f64,
    b: [&dyn Fn(f64) -> f64; 3],
    range: [f64; 2],
    samples: usize,
    p: f64,
) -> Result<StructureReport> {
    let [lo, hi] = range;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(GelfandError::Geometry(format!(
            "range must be positive and increasing (got [{lo}, {hi}])"
        )));
    }
    if samples < MIN_SAMPLES {
        return Err(GelfandError::Geometry(format!(
            "need at least {MIN_SAMPLES} samples (got {samples})"
        )));
    }
    if !(p >= 2.0) {
        return Err(GelfandError::Geometry(format!("p must be ≥ 2 (got {p})")));
    }
    let d = (hi - lo) / (samples - 1) as f64;
    let points = (0..samples).map(|k| lo + k as f64 * d);
    let second = |f: &dyn Fn(f64) -> f64, s: f64| (f(s + d) - 2.0 * f(s) + f(s - d)) / (d * d);
    let mut viol = 0.0f64;
    let mut at = lo;
    let mut margins = [f64::INFINITY; 3];
    for s in points {
        let r = rho(s);
        if !(r > 0.0) {
            return Err(GelfandError::Geometry(format!("rho({s}) = {r} is not positive")));
        }
        let r1 = (rho(s + d) - rho(s - d)) / (2.0 * d);
        let r2 = second(&rho, s);
        let v = (r2 - r1 * r1 / (2.0 * r)).abs();
        if v > viol {
            viol = v;
            at = s;
        }
        for (m, f) in margins.iter_mut().zip(b) {
            *m = m.min(second(f, s));
        }
    }
    Ok(StructureReport {
        range,
        samples,
        p,
        i2_violation: viol,
        i2_argmax: at,
        convexity_margins: margins,
    })
}
