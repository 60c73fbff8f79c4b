//! The parabolic flow `(e^u)_t = Δu + λe^u`, integrated as
//! `u_t = e^{-u}Δu + λ`, and its twin in `w = e^{-u/2}`,
//! `w_t = w²Δw − w|∇w|² − (λ/2)w`.
//!
//! Both are stepped semi-implicitly: the diffusion coefficient is frozen at
//! the current step, diffusion is implicit and the remaining terms explicit.
//! When the quadrature weights make `Δ_h` self-adjoint (interval and balls)
//! the u-scheme decreases the discrete Lyapunov functional for every `dt`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{discrete_gradient, Grid, NodeClass, ScalarField};
use crate::error::{GelfandError, Result};
use crate::geometry::{hessian_min_eig_field, to_w};
use crate::linalg::BandMatrix;

/// Largest `u` tolerated before a run is declared a suspected blow-up.
pub const BLOW_UP_CAP: f64 = 50.0;

#[derive(Debug, Clone)]
pub struct FlowState {
    pub u: ScalarField,
    pub t: f64,
    pub lambda: f64,
    pub dt: f64,
    pub step_count: usize,
    /// `(t, F(u(t)))`.
    pub lyapunov_history: Vec<(f64, f64)>,
    /// `(t, min Hessian eigenvalue of e^{-u/2})`.
    pub convexity_history: Vec<(f64, f64)>,
}

impl FlowState {
    pub fn new(u0: ScalarField, lambda: f64, dt: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(GelfandError::Flow(format!("lambda must be ≥ 0 (got {lambda})")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(GelfandError::Flow(format!("dt must be > 0 (got {dt})")));
        }
        let grid = Arc::clone(u0.grid());
        for (i, &v) in u0.values().iter().enumerate() {
            if grid.class(i) == NodeClass::Boundary && v != 0.0 {
                return Err(GelfandError::Flow(format!(
                    "u0 must vanish on the boundary (node {i} has {v})"
                )));
            }
        }
        Ok(Self {
            u: u0,
            t: 0.0,
            lambda,
            dt,
            step_count: 0,
            lyapunov_history: Vec::new(),
            convexity_history: Vec::new(),
        })
    }
}

/// Solve `(I − dt·diag(coef)·Δ_h) x = rhs + dt·coef·Δ_h(boundary data)` on
/// the unknowns, with `boundary` held on every boundary node.
fn implicit_diffusion(
    grid: &Grid,
    coef: &[f64],
    dt: f64,
    mut rhs: Vec<f64>,
    boundary: f64,
) -> Result<Vec<f64>> {
    let lap = grid.laplacian();
    if boundary != 0.0 {
        for (k, r) in rhs.iter_mut().enumerate() {
            let lift: f64 = lap
                .row(k)
                .filter(|&(j, _)| grid.unknown_of()[j].is_none())
                .map(|(_, c)| c * boundary)
                .sum();
            *r += dt * coef[k] * lift;
        }
    }
    let m = BandMatrix::from_stencil(lap, grid.unknown_of(), |k| -dt * coef[k], |_| 1.0);
    let lu = m.factor()?;
    lu.solve_in_place(&mut rhs);
    Ok(rhs)
}

/// One IMEX step of `u_t = e^{-u}Δu + λ`:
/// `(u⁺ − u)/dt = e^{-u}Δ_h u⁺ + λ`, `u⁺ = 0` on the boundary.
pub fn step_imex(state: &mut FlowState) -> Result<()> {
    let grid = Arc::clone(state.u.grid());
    let x = state.u.unknowns();
    let coef: Vec<f64> = x.iter().map(|v| (-v).exp()).collect();
    let rhs: Vec<f64> = x.iter().map(|v| v + state.dt * state.lambda).collect();
    let next = implicit_diffusion(&grid, &coef, state.dt, rhs, 0.0)
        .map_err(|e| GelfandError::Flow(format!("step {} at t = {}: {e}", state.step_count, state.t)))?;
    let t_next = state.t + state.dt;
    let max_u = next.iter().fold(0.0f64, |m, &v| m.max(v));
    if !max_u.is_finite() || max_u > BLOW_UP_CAP {
        return Err(GelfandError::BlowUp { t: t_next, max_u });
    }
    state.u = ScalarField::from_unknowns(&grid, &next, 0.0);
    state.t = t_next;
    state.step_count += 1;
    Ok(())
}

/// One semi-implicit step of `w_t = w²Δw − w|∇w|² − (λ/2)w` with `w = 1` on
/// the boundary: `(w⁺ − w)/dt = w²Δ_h w⁺ − w|∇_h w|² − (λ/2)w`.
pub fn step_w_form(w: &ScalarField, lambda: f64, dt: f64) -> Result<ScalarField> {
    if !(dt > 0.0) || !(lambda >= 0.0) {
        return Err(GelfandError::Flow(format!(
            "need dt > 0 and lambda ≥ 0 (got dt = {dt}, lambda = {lambda})"
        )));
    }
    let grid = Arc::clone(w.grid());
    let grad = discrete_gradient(&grid, w)?;
    let x = w.unknowns();
    let coef: Vec<f64> = x.iter().map(|v| v * v).collect();
    let rhs: Vec<f64> = grid
        .interior()
        .iter()
        .zip(&x)
        .map(|(&i, &v)| {
            let g2 = grad[i][0] * grad[i][0] + grad[i][1] * grad[i][1];
            v + dt * (-v * g2 - 0.5 * lambda * v)
        })
        .collect();
    let next = implicit_diffusion(&grid, &coef, dt, rhs, 1.0)?;
    let min_w = next.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if !(min_w > 0.0) {
        return Err(GelfandError::PositivityLost { t: dt, min_w });
    }
    Ok(ScalarField::from_unknowns(&grid, &next, 1.0))
}

/// Discrete `F(u) = −∫(½uΔu + λe^u)` with the grid's quadrature weights.
pub fn lyapunov(u: &ScalarField, lambda: f64) -> f64 {
    let grid = u.grid();
    let lap = grid.laplacian();
    let w = grid.weights();
    let v = u.values();
    let mut dirichlet = 0.0;
    for (k, &i) in grid.interior().iter().enumerate() {
        dirichlet += w[i] * 0.5 * v[i] * lap.apply_row(k, v);
    }
    let source: f64 = (0..grid.len())
        .filter(|&i| grid.class(i) != NodeClass::Ghost)
        .map(|i| w[i] * v[i].exp())
        .sum();
    -(dirichlet + lambda * source)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowControls {
    /// Time step; `None` means `0.5·h`.
    pub dt: Option<f64>,
    pub steady_tol: f64,
    pub max_steps: usize,
    /// Steps between Lyapunov / time-series records.
    pub record_stride: usize,
    /// Steps between convexity records; 0 disables them.
    pub convexity_stride: usize,
    /// Steps between field snapshots; 0 disables them.
    pub snapshot_stride: usize,
    pub comparison_tol: f64,
}

impl Default for FlowControls {
    fn default() -> Self {
        Self {
            dt: None,
            steady_tol: 1e-8,
            max_steps: 200_000,
            record_stride: 1,
            convexity_stride: 50,
            snapshot_stride: 0,
            comparison_tol: 1e-8,
        }
    }
}

impl FlowControls {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                bad.push(format!("dt must be > 0 (got {dt})"));
            }
        }
        if !(self.steady_tol > 0.0) {
            bad.push("steady_tol must be > 0".to_string());
        }
        if !(self.comparison_tol > 0.0) {
            bad.push("comparison_tol must be > 0".to_string());
        }
        if self.max_steps == 0 || self.record_stride == 0 {
            bad.push("max_steps and record_stride must be ≥ 1".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(GelfandError::Flow(bad.join("; ")))
        }
    }

    pub fn dt_for(&self, grid: &Grid) -> f64 {
        self.dt.unwrap_or(0.5 * grid.spacing())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesRow {
    pub step: usize,
    pub t: f64,
    pub max_u: f64,
    pub lyapunov: f64,
    /// NaN on steps without a convexity record.
    pub min_hessian_eig_w: f64,
    pub steady_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowUp {
    pub t: f64,
    pub max_u: f64,
}

#[derive(Debug, Clone)]
pub struct FlowReport {
    pub state: FlowState,
    pub converged: bool,
    /// `‖u^{k+1} − u^k‖_∞ / dt` at the last step.
    pub steady_residual: f64,
    pub wall_steps: usize,
    /// `max(u − φ, 0)` over the run, when a reference φ was supplied.
    pub max_comparison_violation: Option<f64>,
    pub blow_up: Option<BlowUp>,
    pub series: Vec<SeriesRow>,
    pub snapshots: Vec<(usize, f64, ScalarField)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowSummary {
    pub lambda: f64,
    pub dt: f64,
    pub t_final: f64,
    pub converged: bool,
    pub steady_residual: f64,
    pub wall_steps: usize,
    pub max_u: f64,
    pub final_lyapunov: f64,
    pub max_lyapunov_increase: f64,
    pub min_convexity: Option<f64>,
    pub max_comparison_violation: Option<f64>,
    pub blow_up: Option<BlowUp>,
}

impl FlowReport {
    /// Largest relative rise between consecutive Lyapunov records,
    /// `(F_{k+1} − F_k)/(1 + |F_k|)`; non-positive on a monotone run.
    pub fn max_lyapunov_increase(&self) -> f64 {
        self.state
            .lyapunov_history
            .windows(2)
            .map(|p| (p[1].1 - p[0].1) / (1.0 + p[0].1.abs()))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_convexity(&self) -> Option<f64> {
        self.state
            .convexity_history
            .iter()
            .map(|c| c.1)
            .reduce(f64::min)
    }

    pub fn summary(&self) -> FlowSummary {
        FlowSummary {
            lambda: self.state.lambda,
            dt: self.state.dt,
            t_final: self.state.t,
            converged: self.converged,
            steady_residual: self.steady_residual,
            wall_steps: self.wall_steps,
            max_u: self.state.u.max(),
            final_lyapunov: lyapunov(&self.state.u, self.state.lambda),
            max_lyapunov_increase: self.max_lyapunov_increase(),
            min_convexity: self.min_convexity(),
            max_comparison_violation: self.max_comparison_violation,
            blow_up: self.blow_up,
        }
    }
}

fn check_initial(u0: &ScalarField, reference: Option<&ScalarField>, tol: f64) -> Result<()> {
    if u0.min() < 0.0 {
        return Err(GelfandError::Flow(format!("u0 must be ≥ 0 (min {})", u0.min())));
    }
    if let Some(phi) = reference {
        let above = u0
            .axpby(1.0, phi, -1.0)?
            .max();
        if above > tol {
            return Err(GelfandError::Flow(format!(
                "u0 exceeds the reference by {above:e}"
            )));
        }
    }
    Ok(())
}

/// Run the flow until `‖u^{k+1} − u^k‖_∞/dt ≤ steady_tol` or the step budget
/// runs out. A suspected blow-up ends the run and is recorded in the report.
pub fn run_monitored(
    u0: ScalarField,
    lambda: f64,
    controls: &FlowControls,
    reference: Option<&ScalarField>,
) -> Result<FlowReport> {
    controls.validate()?;
    check_initial(&u0, reference, controls.comparison_tol)?;
    let dt = controls.dt_for(u0.grid());
    let mut state = FlowState::new(u0, lambda, dt)?;
    let mut series = Vec::new();
    let mut snapshots = Vec::new();
    let mut violation = reference.map(|_| 0.0f64);
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut blow_up = None;

    let mut observe = |state: &mut FlowState, residual: f64, force: bool| -> Result<()> {
        let k = state.step_count;
        if let (Some(phi), Some(v)) = (reference, violation.as_mut()) {
            *v = v.max(state.u.axpby(1.0, phi, -1.0)?.max().max(0.0));
        }
        let conv = if controls.convexity_stride > 0 && (k % controls.convexity_stride == 0 || force) {
            let c = hessian_min_eig_field(&to_w(&state.u))?.min;
            state.convexity_history.push((state.t, c));
            c
        } else {
            f64::NAN
        };
        if k % controls.record_stride == 0 || force {
            let f = lyapunov(&state.u, state.lambda);
            state.lyapunov_history.push((state.t, f));
            series.push(SeriesRow {
                step: k,
                t: state.t,
                max_u: state.u.max(),
                lyapunov: f,
                min_hessian_eig_w: conv,
                steady_residual: residual,
            });
        }
        if controls.snapshot_stride > 0 && (k % controls.snapshot_stride == 0 || force) {
            snapshots.push((k, state.t, state.u.clone()));
        }
        Ok(())
    };

    observe(&mut state, residual, false)?;
    while state.step_count < controls.max_steps {
        let prev = state.u.clone();
        match step_imex(&mut state) {
            Ok(()) => {}
            Err(GelfandError::BlowUp { t, max_u }) => {
                blow_up = Some(BlowUp { t, max_u });
                break;
            }
            Err(e) => return Err(e),
        }
        residual = state.u.distance(&prev)? / dt;
        converged = residual <= controls.steady_tol;
        let last = converged || state.step_count == controls.max_steps;
        observe(&mut state, residual, last)?;
        if converged {
            break;
        }
    }
    let wall_steps = state.step_count;
    Ok(FlowReport {
        state,
        converged,
        steady_residual: residual,
        wall_steps,
        max_comparison_violation: violation,
        blow_up,
        series,
        snapshots,
    })
}

/// As [`run_monitored`], but a suspected blow-up is returned as an error.
pub fn run_to_steady(
    u0: ScalarField,
    lambda: f64,
    controls: &FlowControls,
    reference: Option<&ScalarField>,
) -> Result<FlowReport> {
    let report = run_monitored(u0, lambda, controls, reference)?;
    match report.blow_up {
        Some(BlowUp { t, max_u }) => Err(GelfandError::BlowUp { t, max_u }),
        None => Ok(report),
    }
}
