//! Quadratic barriers for the minimal solution on a ball,
//! `θ = λ(r² − |x|²)/(2n) ≤ φ ≤ e^M θ`, the normal-derivative bounds they
//! imply, and the threshold `λ̄` below which `G(φ_λ, λ, Ω) > 0`.
//!
//! On a ball of radius `r`,
//! `λ̄ = min{λ₁, (n−1)²/(2r²), n(n−1)/(e^{M(λ̄)} r²)}` where `λ₁` is the
//! largest `λ` with `e^{M(λ)} < n/(n−1)` and `M(λ) = max φ_λ`. The ellipse
//! version replaces `(n−1)/r` by `β = (n−1)/r_Ω + K` and uses `R_Ω` for the
//! outer end of the normal-derivative interval.

use std::sync::Arc;

use serde::Serialize;

use crate::domain::{boundary_geometry, DomainSpec, Grid, NodeClass, ScalarField};
use crate::error::{GelfandError, Result};
use crate::geometry::{boundary_derivatives, boundary_g};
use crate::steady::{ContinuationBranch, SteadySolution};

const FIXED_POINT_ITERATIONS: usize = 20;
const FIXED_POINT_TOL: f64 = 1e-10;

fn ball_params(grid: &Grid) -> Result<(usize, f64)> {
    match *grid.spec() {
        DomainSpec::RadialBall { dim, radius } => Ok((dim, radius)),
        other => Err(GelfandError::Barriers(format!(
            "barriers need a ball (got {})",
            other.kind_name()
        ))),
    }
}

/// `(θ, θ̄)` sampled on a ball grid; both vanish on the boundary.
pub fn barrier_fields(grid: &Arc<Grid>, lambda: f64, m: f64) -> Result<(ScalarField, ScalarField)> {
    let (n, r) = ball_params(grid)?;
    if !(lambda > 0.0) || !(m >= 0.0) {
        return Err(GelfandError::Barriers(format!(
            "need lambda > 0 and M ≥ 0 (got lambda = {lambda}, M = {m})"
        )));
    }
    let c = lambda / (2.0 * n as f64);
    let lower = ScalarField::from_fn(grid, |[x, _]| c * (r * r - x * x));
    let upper = lower.map(|v| m.exp() * v);
    Ok((lower, upper))
}

/// Components of `λ̄`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaBar {
    pub lambda_bar: f64,
    /// Largest tabulated `λ` with `e^M` below the threshold.
    pub lambda1: f64,
    /// `β²/2`, i.e. `(n−1)²/(2r²)` on a ball.
    pub quadratic_term: f64,
    /// `nβ/(e^{M(λ̄)} R)`, i.e. `n(n−1)/(e^{M(λ̄)} r²)` on a ball.
    pub growth_term: f64,
    /// `M(λ̄)` used in the growth term.
    pub m_at_lambda_bar: f64,
}

/// Piecewise-linear `M(λ)` from a `(λ, M)` table sorted by `λ`; clamped to
/// the end values outside the table.
fn m_of(table: &[(f64, f64)], lambda: f64) -> f64 {
    if lambda <= table[0].0 {
        return table[0].1;
    }
    for w in table.windows(2) {
        let ((l0, m0), (l1, m1)) = (w[0], w[1]);
        if lambda <= l1 {
            return m0 + (m1 - m0) * (lambda - l0) / (l1 - l0);
        }
    }
    table[table.len() - 1].1
}

fn check_table(table: &[(f64, f64)]) -> Result<()> {
    if table.is_empty() {
        return Err(GelfandError::Barriers("empty (lambda, M) table".into()));
    }
    if table.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(GelfandError::Barriers(
            "(lambda, M) table must be strictly increasing in lambda".into(),
        ));
    }
    Ok(())
}

/// Shared analysis: `n` dimensions, `β` the linear coefficient bound and
/// `outer` the radius in the upper normal-derivative bound. `m` evaluates
/// `M(λ)`; with `refine` the table only brackets `λ₁`, which is then found by
/// bisection on `m`.
fn threshold(
    n: usize,
    beta: f64,
    outer: f64,
    table: &[(f64, f64)],
    m: &mut dyn FnMut(f64) -> Result<f64>,
    refine: bool,
) -> Result<LambdaBar> {
    check_table(table)?;
    let nf = n as f64;
    let cap = nf / (beta * outer);
    if !(cap > 1.0) {
        return Ok(LambdaBar {
            lambda_bar: 0.0,
            lambda1: 0.0,
            quadratic_term: 0.5 * beta * beta,
            growth_term: 0.0,
            m_at_lambda_bar: 0.0,
        });
    }
    // λ₁: first crossing of e^M = cap, interpolated linearly in (λ, e^M).
    let mut lambda1 = table[table.len() - 1].0;
    let mut prev: Option<(f64, f64)> = None;
    for &(l, mm) in table {
        let e = mm.exp();
        if e >= cap {
            lambda1 = match prev {
                Some((l0, _)) if refine => {
                    let (mut lo, mut hi) = (l0, l);
                    while hi - lo > FIXED_POINT_TOL * hi {
                        let mid = 0.5 * (lo + hi);
                        if m(mid)?.exp() < cap {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    lo
                }
                Some((l0, e0)) => l0 + (l - l0) * (cap - e0) / (e - e0),
                None => l,
            };
            break;
        }
        prev = Some((l, e));
    }
    let c2 = 0.5 * beta * beta;
    let mut f = |l: f64| -> Result<(f64, f64)> {
        let mm = m(l)?;
        Ok((lambda1.min(c2).min(nf * beta / (mm.exp() * outer)), mm))
    };
    let mut l = f(0.0)?.0;
    let mut converged = false;
    for _ in 0..FIXED_POINT_ITERATIONS {
        let next = f(l)?.0;
        let done = (next - l).abs() <= FIXED_POINT_TOL * l.max(1e-300);
        l = next;
        if done {
            converged = true;
            break;
        }
    }
    if !converged {
        // λ − f(λ) is increasing, so bisection finds its unique root.
        let (mut lo, mut hi) = (0.0, f(0.0)?.0);
        while hi - lo > FIXED_POINT_TOL * hi {
            let mid = 0.5 * (lo + hi);
            if mid - f(mid)?.0 > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        l = lo;
    }
    let (_, m_bar) = f(l)?;
    Ok(LambdaBar {
        lambda_bar: l,
        lambda1,
        quadratic_term: c2,
        growth_term: nf * beta / (m_bar.exp() * outer),
        m_at_lambda_bar: m_bar,
    })
}

fn table_m(table: &[(f64, f64)]) -> impl FnMut(f64) -> Result<f64> + '_ {
    move |l| Ok(m_of(table, l))
}

/// `λ̄` on the ball of radius `r` in `ℝⁿ` from the `(λ, M)` table of that ball.
pub fn lambda_bar(n: usize, r: f64, table: &[(f64, f64)]) -> Result<LambdaBar> {
    if n < 2 {
        return Err(GelfandError::Barriers(
            "n = 1 is the normal-direction-only regime; λ̄ is not defined".into(),
        ));
    }
    if !(r > 0.0) {
        return Err(GelfandError::Barriers(format!("r must be > 0 (got {r})")));
    }
    threshold(n, (n as f64 - 1.0) / r, r, table, &mut table_m(table), false)
}

/// Conservative `λ̄` on an ellipse grid with `H ≤ 1/r_Ω`, the normal
/// derivative in `[−λe^M R_Ω/n, −λ r_Ω/n]` and the boundary constant `k`.
/// Returns 0 when the analysis leaves no positive window.
pub fn lambda_bar_general(grid: &Grid, table: &[(f64, f64)], k: f64) -> Result<LambdaBar> {
    if !matches!(grid.spec(), DomainSpec::Ellipse { .. }) {
        return Err(GelfandError::Barriers("lambda_bar_general needs an ellipse grid".into()));
    }
    if !(k >= 0.0) {
        return Err(GelfandError::Barriers(format!("K must be ≥ 0 (got {k})")));
    }
    let geo = boundary_geometry(grid);
    let n = grid.dimension();
    let beta = (n as f64 - 1.0) / geo.inradius + k;
    threshold(n, beta, geo.circumradius, table, &mut table_m(table), false)
}

/// `λ̄` from a computed branch with `M(λ)` taken from Newton solves instead
/// of table interpolation, so `λ₁` and the fixed point are resolved to
/// solver precision. Balls with `n ≥ 2` ignore `k`; ellipses use it as in
/// [`lambda_bar_general`].
pub fn lambda_bar_refined(branch: &ContinuationBranch, k: f64) -> Result<LambdaBar> {
    let grid = branch.grid();
    let table = branch.table();
    let (n, beta, outer) = match *grid.spec() {
        DomainSpec::RadialBall { dim, radius } if dim >= 2 => (dim, (dim as f64 - 1.0) / radius, radius),
        DomainSpec::Ellipse { .. } if k >= 0.0 => {
            let geo = boundary_geometry(grid);
            (2, 1.0 / geo.inradius + k, geo.circumradius)
        }
        other => {
            return Err(GelfandError::Barriers(format!(
                "refined λ̄ needs a ball with n ≥ 2 or an ellipse with K ≥ 0 (got {}, K = {k})",
                other.kind_name()
            )))
        }
    };
    let mut m = |l: f64| -> Result<f64> {
        if l <= 0.0 {
            Ok(0.0)
        } else {
            Ok(branch.solve_at(l)?.phi.max())
        }
    };
    threshold(n, beta, outer, &table, &mut m, true)
}

#[derive(Debug, Clone, Serialize)]
pub struct BarrierReport {
    pub domain: DomainSpec,
    pub resolution: usize,
    pub lambda: f64,
    #[serde(rename = "M")]
    pub m: f64,
    /// `max(θ − φ)` over grid nodes.
    pub lower_violation: f64,
    /// `max(φ − θ̄)` over grid nodes.
    pub upper_violation: f64,
    /// `max(1e-8, 10h²)`.
    pub barrier_tol: f64,
    pub phi_nu: f64,
    /// `[−λe^M r/n, −λr/n]`.
    pub phi_nu_bounds: [f64; 2],
    /// Both bounds hold with slack `10h`.
    pub phi_nu_bounds_ok: bool,
    pub lambda1: Option<f64>,
    pub lambda_bar: Option<LambdaBar>,
    #[serde(rename = "G_min")]
    pub g_min: f64,
}

impl BarrierReport {
    pub fn sandwich_ok(&self) -> bool {
        self.lower_violation <= self.barrier_tol && self.upper_violation <= self.barrier_tol
    }
}

/// Barrier checks for a solved minimal solution on a ball. `table` (the
/// branch's `(λ, M)` pairs) adds `λ₁` and `λ̄` for `n ≥ 2`.
pub fn check_barriers(
    sol: &SteadySolution,
    table: Option<&[(f64, f64)]>,
) -> Result<(BarrierReport, ScalarField)> {
    let grid = Arc::clone(sol.phi.grid());
    let (n, r) = ball_params(&grid)?;
    let lambda = sol.lambda;
    let m = sol.phi.max();
    let (lower, upper) = barrier_fields(&grid, lambda, m)?;
    let phi = sol.phi.values();
    let mut lower_violation = f64::NEG_INFINITY;
    let mut upper_violation = f64::NEG_INFINITY;
    let mut worst = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        if grid.class(i) == NodeClass::Ghost {
            continue;
        }
        let lo = lower.at(i) - phi[i];
        let hi = phi[i] - upper.at(i);
        lower_violation = lower_violation.max(lo);
        upper_violation = upper_violation.max(hi);
        worst[i] = lo.max(hi);
    }
    let h = grid.spacing();
    let nf = n as f64;
    let phi_nu = boundary_derivatives(&sol.phi)?[0].u_nu;
    let bounds = [-lambda * m.exp() * r / nf, -lambda * r / nf];
    let slack = 10.0 * h;
    let phi_nu_bounds_ok = phi_nu >= bounds[0] - slack && phi_nu <= bounds[1] + slack;
    let lb = match table {
        Some(t) if n >= 2 => Some(lambda_bar(n, r, t)?),
        _ => None,
    };
    let report = BarrierReport {
        domain: *grid.spec(),
        resolution: grid.resolution(),
        lambda,
        m,
        lower_violation,
        upper_violation,
        barrier_tol: (10.0 * h * h).max(1e-8),
        phi_nu,
        phi_nu_bounds: bounds,
        phi_nu_bounds_ok,
        lambda1: lb.map(|l| l.lambda1),
        lambda_bar: lb,
        g_min: boundary_g(&sol.phi, lambda, 0.0)?.value,
    };
    Ok((report, ScalarField::from_values(&grid, worst)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, discrete_laplacian};
    use crate::steady::{continue_branch, newton_solve, ContinuationControls};

    fn grid(spec: DomainSpec, n: usize) -> Arc<Grid> {
        Arc::new(build_grid(spec, n).unwrap())
    }

    #[test]
    fn barrier_fields_basics() {
        let g = grid(DomainSpec::ball(3, 2.0), 81);
        let (lo, hi) = barrier_fields(&g, 0.6, 0.4).unwrap();
        assert!((lo.at(0) - 0.6 * 4.0 / 6.0).abs() < 1e-15);
        assert!((hi.at(0) - 0.4f64.exp() * lo.at(0)).abs() < 1e-15);
        assert_eq!(lo.at(80), 0.0);
        assert_eq!(hi.at(80), 0.0);
        let lap = discrete_laplacian(&g, &lo).unwrap();
        for &i in g.interior() {
            assert!((lap.at(i) + 0.6).abs() < 1e-9, "{}", lap.at(i));
        }
        let (a, b) = barrier_fields(&g, 0.6, 0.0).unwrap();
        assert_eq!(a.values(), b.values());
        let e = grid(DomainSpec::ellipse(1.5, 1.0), 24);
        assert!(barrier_fields(&e, 0.6, 0.1).is_err());
    }

    #[test]
    fn sandwich_and_normal_bounds_on_disk() {
        let g = grid(DomainSpec::ball(2, 1.0), 801);
        let s = newton_solve(&g, 0.5, &ScalarField::zeros(&g), 1e-10).unwrap();
        let (rep, _) = check_barriers(&s, None).unwrap();
        assert!(rep.lower_violation <= 1e-8);
        assert!(rep.upper_violation <= 1e-8);
        assert!(rep.phi_nu_bounds_ok);
        assert!(rep.lambda_bar.is_none());
    }

    #[test]
    fn lambda_bar_rules() {
        let table = [(0.0, 0.0), (0.5, 0.3), (1.0, 0.8)];
        assert!(lambda_bar(1, 1.0, &table).is_err());
        assert!(lambda_bar(2, 1.0, &[]).is_err());
        let lb = lambda_bar(2, 1.0, &table).unwrap();
        assert_eq!(lb.quadratic_term, 0.5);
        assert!(lb.lambda_bar <= lb.lambda1 && lb.lambda_bar <= lb.quadratic_term);
        assert!(lb.lambda_bar <= lb.growth_term + 1e-12);
        // e^M crosses 2 between λ = 0.5 and 1.0
        let (e0, e1) = (0.3f64.exp(), 0.8f64.exp());
        assert!((lb.lambda1 - (0.5 + 0.5 * (2.0 - e0) / (e1 - e0))).abs() < 1e-14);
        // r-scaling with a consistently scaled table
        let r = 3.0;
        let scaled: Vec<_> = table.iter().map(|&(l, m)| (l / (r * r), m)).collect();
        let lr = lambda_bar(2, r, &scaled).unwrap();
        assert!((lr.lambda_bar * r * r - lb.lambda_bar).abs() <= 1e-12 * lb.lambda_bar);
    }

    #[test]
    fn circle_matches_disk_and_ellipse_is_conservative() {
        let b = continue_branch(&grid(DomainSpec::ball(2, 1.0), 201), 100.0, ContinuationControls::default()).unwrap();
        let t = b.table();
        let disk = lambda_bar(2, 1.0, &t).unwrap().lambda_bar;
        assert!(disk > 0.0 && disk <= b.lambda_star_estimate);
        let circle = grid(DomainSpec::ellipse(1.0, 1.0), 32);
        let c = lambda_bar_general(&circle, &t, 0.0).unwrap().lambda_bar;
        assert!((c - disk).abs() <= 1e-6 * disk);
        let e = grid(DomainSpec::ellipse(2.0, 1.0), 32);
        assert!(lambda_bar_general(&e, &t, 0.0).unwrap().lambda_bar <= disk);
        let refined = lambda_bar_refined(&b, 0.0).unwrap();
        assert!((refined.lambda_bar - disk).abs() < 1e-3 * disk);
        let m = b.solve_at(refined.lambda1).unwrap().phi.max();
        assert!((m.exp() - 2.0).abs() < 1e-8, "{m}");
    }
}
