//! Direct solution of `Δφ + λe^φ = 0` by damped Newton, the principal
//! eigenvalue of the linearization, and pseudo-arclength continuation of the
//! minimal branch up to the fold.

mod continuation;
mod eigen;

use std::sync::Arc;

use serde::Serialize;

pub use continuation::{
    continue_branch, scaling_check, BranchPoint, BranchSummary, ContinuationBranch, ContinuationControls,
    Termination,
};
pub use eigen::{principal_eigenvalue, EIG_TOL};

use crate::domain::{Grid, ScalarField};
use crate::error::{GelfandError, Result};
use crate::linalg::{max_abs, BandMatrix};

const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 30;
const MAX_NEWTON_ITERATIONS: usize = 60;

/// Default Newton tolerance `1e-10·(1+λ)` on the max-norm residual.
pub fn default_newton_tol(lambda: f64) -> f64 {
    1e-10 * (1.0 + lambda)
}

/// Smallest residual the discrete operator can certify in double precision,
/// `4·ε·‖Δ_h‖_∞·max(1, ‖φ‖_∞)`.
pub fn residual_floor(grid: &Grid, phi_max: f64) -> f64 {
    4.0 * f64::EPSILON * grid.laplacian().inf_norm() * phi_max.abs().max(1.0)
}

/// A converged point of the minimal branch.
#[derive(Debug, Clone)]
pub struct SteadySolution {
    pub phi: ScalarField,
    pub lambda: f64,
    /// `‖Δ_h φ + λe^φ‖_∞` over interior nodes.
    pub residual_norm: f64,
    /// Tolerance the residual was certified against (requested tolerance
    /// raised to the round-off floor of the operator).
    pub tolerance: f64,
    /// Smallest eigenvalue of `-Δ_h - λe^φ`.
    pub mu1: f64,
    pub newton_iterations: usize,
    pub minimal: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SteadySummary {
    pub lambda: f64,
    pub max_phi: f64,
    pub residual_norm: f64,
    pub tolerance: f64,
    pub mu1: f64,
    pub newton_iterations: usize,
    pub minimal: bool,
}

impl SteadySolution {
    pub fn summary(&self) -> SteadySummary {
        SteadySummary {
            lambda: self.lambda,
            max_phi: self.phi.max(),
            residual_norm: self.residual_norm,
            tolerance: self.tolerance,
            mu1: self.mu1,
            newton_iterations: self.newton_iterations,
            minimal: self.minimal,
        }
    }
}

/// `Δ_h φ + λe^φ` at the unknowns, with `φ = 0` on the boundary.
pub fn residual(grid: &Grid, unknowns: &[f64], lambda: f64) -> Vec<f64> {
    Workspace::new(grid).residual(unknowns, lambda)
}

fn residual_of_values(grid: &Grid, values: &[f64], unknowns: &[f64], lambda: f64) -> Vec<f64> {
    let lap = grid.laplacian();
    unknowns
        .iter()
        .enumerate()
        .map(|(k, &p)| lap.apply_row(k, values) + lambda * p.exp())
        .collect()
}

/// Reusable work state: full nodal vector mirroring the unknowns.
pub(crate) struct Workspace<'g> {
    grid: &'g Grid,
    full: Vec<f64>,
}

impl<'g> Workspace<'g> {
    pub fn new(grid: &'g Grid) -> Self {
        Self {
            grid,
            full: vec![0.0; grid.len()],
        }
    }

    pub fn residual(&mut self, x: &[f64], lambda: f64) -> Vec<f64> {
        for (k, &i) in self.grid.interior().iter().enumerate() {
            self.full[i] = x[k];
        }
        residual_of_values(self.grid, &self.full, x, lambda)
    }

    /// Jacobian `Δ_h + λ diag(e^φ)`.
    pub fn jacobian(&self, x: &[f64], lambda: f64) -> BandMatrix {
        BandMatrix::from_stencil(
            self.grid.laplacian(),
            self.grid.unknown_of(),
            |_| 1.0,
            |k| lambda * x[k].exp(),
        )
    }
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Damped Newton on unknowns. Returns `(x, residual max-norm, tolerance, iterations)`.
pub(crate) fn newton_unknowns(
    grid: &Grid,
    lambda: f64,
    mut x: Vec<f64>,
    tol: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, f64, f64, usize)> {
    let mut ws = Workspace::new(grid);
    let mut r = ws.residual(&x, lambda);
    for it in 0..=max_iterations {
        let rn = max_abs(&r);
        let eff_tol = tol.max(residual_floor(grid, max_abs(&x)));
        if rn <= eff_tol {
            return Ok((x, rn, eff_tol, it));
        }
        if it == max_iterations || !rn.is_finite() {
            break;
        }
        let lu = match ws.jacobian(&x, lambda).factor() {
            Ok(lu) => lu,
            Err(_) => {
                return Err(GelfandError::NewtonFailure {
                    lambda,
                    iterations: it,
                    residual: rn,
                    last_iterate: x,
                })
            }
        };
        let step: Vec<f64> = lu.solve(&r).into_iter().map(|v| -v).collect();
        let f0 = sq_norm(&r);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a + alpha * d).collect();
            let rt = ws.residual(&trial, lambda);
            let ft = sq_norm(&rt);
            if ft.is_finite() && ft <= (1.0 - 2.0 * ARMIJO_C * alpha) * f0 {
                x = trial;
                r = rt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // Stalled at round-off: accept if already within a few floors.
            let floor = residual_floor(grid, max_abs(&x));
            if rn <= 4.0 * eff_tol.max(floor) {
                return Ok((x, rn, 4.0 * eff_tol.max(floor), it));
            }
            return Err(GelfandError::NewtonFailure {
                lambda,
                iterations: it,
                residual: rn,
                last_iterate: x,
            });
        }
    }
    let rn = max_abs(&r);
    Err(GelfandError::NewtonFailure {
        lambda,
        iterations: max_iterations,
        residual: rn,
        last_iterate: x,
    })
}

/// Solve `Δ_h φ + λe^φ = 0`, `φ = 0` on the boundary, from `phi_init`.
///
/// `newton_tol` bounds the max-norm residual; it is raised to
/// [`residual_floor`] when the operator cannot resolve it in double precision.
pub fn newton_solve(
    grid: &Arc<Grid>,
    lambda: f64,
    phi_init: &ScalarField,
    newton_tol: f64,
) -> Result<SteadySolution> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(GelfandError::Steady(format!(
            "lambda must be ≥ 0 (got {lambda})"
        )));
    }
    if !(newton_tol > 0.0) {
        return Err(GelfandError::Steady("newton_tol must be > 0".into()));
    }
    phi_init.check_grid(grid)?;
    let x0 = phi_init.unknowns();
    let (x, rn, tol, iters) = newton_unknowns(grid, lambda, x0, newton_tol, MAX_NEWTON_ITERATIONS)?;
    finish_solution(grid, lambda, x, rn, tol, iters)
}

pub(crate) fn finish_solution(
    grid: &Arc<Grid>,
    lambda: f64,
    x: Vec<f64>,
    residual_norm: f64,
    tolerance: f64,
    newton_iterations: usize,
) -> Result<SteadySolution> {
    let phi = ScalarField::from_unknowns(grid, &x, 0.0);
    let mu1 = principal_eigenvalue(grid, &phi, lambda)?;
    Ok(SteadySolution {
        phi,
        lambda,
        residual_norm,
        tolerance,
        mu1,
        newton_iterations,
        minimal: mu1 >= -EIG_TOL * mu1.abs().max(1.0),
    })
}
