//! f-convexity diagnostics for `f(u) = e^{-u/2}`: the Hessian eigenvalue
//! field of `w = e^{-u/2}`, the boundary functional
//! `G = ½u_ν² + λ + (n−1)u_ν H + K u_ν`, second derivatives of `w` along
//! boundary directions, the mixed-derivative ratio `|u_τν|/|u_ν|`, and the
//! structural conditions on `(ρ, b₁, b₂, b₃)`.

mod fit;
mod structure;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use structure::{check_structure_conditions, StructureReport};

use crate::domain::{boundary_geometry, DomainSpec, Grid, NodeClass, ScalarField};
use crate::error::{GelfandError, Result};
use fit::Neighborhood;

/// Below this, `|u_ν|` is treated as a failed Hopf lemma.
pub const DEGENERATE_NORMAL: f64 = 1e-12;
/// Largest fraction of interior nodes the Hessian field may skip.
pub const MAX_FLAGGED_FRACTION: f64 = 0.05;

/// `w = e^{-u/2}`; exactly 1 where `u = 0`.
pub fn to_w(u: &ScalarField) -> ScalarField {
    u.map(|v| if v == 0.0 { 1.0 } else { (-0.5 * v).exp() })
}

/// Smallest Hessian eigenvalue at each interior node.
#[derive(Debug, Clone)]
pub struct HessianField {
    /// Eigenvalue per node; zero on boundary, ghost and flagged nodes.
    pub field: ScalarField,
    /// Interior nodes without a usable stencil, excluded from `min`.
    pub flagged: Vec<usize>,
    pub min: f64,
    pub argmin: usize,
}

fn min_eig_sym(xx: f64, xy: f64, yy: f64) -> f64 {
    let mean = 0.5 * (xx + yy);
    let dev = (0.5 * (xx - yy)).hypot(xy);
    mean - dev
}

/// Smallest eigenvalue of the discrete Hessian of `w` at interior nodes.
///
/// 1D: `w''`. Balls: `min(w_rr, w_r/r)`, with `w_rr` at the center from
/// `2(w₁ − w₀)/h²`. Ellipse: centered differences when the 3×3 lattice
/// neighborhood is on the grid, a local quartic fit otherwise.
pub fn hessian_min_eig_field(w: &ScalarField) -> Result<HessianField> {
    let grid = Arc::clone(w.grid());
    let v = w.values();
    let h = grid.spacing();
    let h2 = h * h;
    let mut out = vec![0.0; grid.len()];
    let mut flagged = Vec::new();
    match grid.spec() {
        DomainSpec::Interval { .. } => {
            for &i in grid.interior() {
                out[i] = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / h2;
            }
        }
        DomainSpec::RadialBall { dim, .. } => {
            for &i in grid.interior() {
                out[i] = if i == 0 {
                    2.0 * (v[1] - v[0]) / h2
                } else {
                    let rr = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / h2;
                    if *dim == 1 {
                        rr
                    } else {
                        let tangential = (v[i + 1] - v[i - 1]) / (2.0 * h * grid.coords(i)[0]);
                        rr.min(tangential)
                    }
                };
            }
        }
        DomainSpec::Ellipse { .. } => {
            let lat = grid.lattice().expect("ellipse grid carries a lattice");
            let nb = Neighborhood::new(&grid);
            let on_grid = |n: Option<usize>| n.filter(|&n| grid.class(n) != NodeClass::Ghost);
            for (k, &i) in grid.interior().iter().enumerate() {
                let (ci, cj) = lat.index_of_unknown(k);
                let (ci, cj) = (ci as isize, cj as isize);
                let mut nbr = [[0usize; 3]; 3];
                let mut full = true;
                'scan: for (dj, row) in nbr.iter_mut().enumerate() {
                    for (di, slot) in row.iter_mut().enumerate() {
                        match on_grid(lat.node_at(ci + di as isize - 1, cj + dj as isize - 1)) {
                            Some(n) => *slot = n,
                            None => {
                                full = false;
                                break 'scan;
                            }
                        }
                    }
                }
                if full {
                    let at = |di: usize, dj: usize| v[nbr[dj][di]];
                    let xx = (at(2, 1) - 2.0 * at(1, 1) + at(0, 1)) / h2;
                    let yy = (at(1, 2) - 2.0 * at(1, 1) + at(1, 0)) / h2;
                    let xy = (at(2, 2) - at(2, 0) - at(0, 2) + at(0, 0)) / (4.0 * h2);
                    out[i] = min_eig_sym(xx, xy, yy);
                } else if let Some(jet) = nb.fit(v, grid.coords(i)) {
                    out[i] = min_eig_sym(jet.hess[0], jet.hess[1], jet.hess[2]);
                } else {
                    flagged.push(i);
                }
            }
            let total = grid.num_unknowns();
            if flagged.len() as f64 > MAX_FLAGGED_FRACTION * total as f64 {
                return Err(GelfandError::TooManyFlagged {
                    flagged: flagged.len(),
                    total,
                });
            }
        }
    }
    let mut min = f64::INFINITY;
    let mut argmin = grid.interior().first().copied().unwrap_or(0);
    for &i in grid.interior() {
        if !flagged.contains(&i) && out[i] < min {
            min = out[i];
            argmin = i;
        }
    }
    Ok(HessianField {
        field: ScalarField::from_values(&grid, out)?,
        flagged,
        min,
        argmin,
    })
}

/// First and mixed derivatives of `u` at a boundary node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryDerivatives {
    pub node: usize,
    /// Outward normal derivative.
    pub u_nu: f64,
    /// `u_τν`; zero by symmetry on the interval and on balls.
    pub u_tau_nu: f64,
    /// Mean curvature `H`.
    pub curvature: f64,
}

/// Normal and mixed derivatives at every boundary node. Interval and balls
/// use the one-sided difference `(3u_N − 4u_{N−1} + u_{N−2})/(2h)`; the
/// ellipse uses a local quartic fit centered on the boundary point.
pub fn boundary_derivatives(u: &ScalarField) -> Result<Vec<BoundaryDerivatives>> {
    let grid = u.grid();
    let v = u.values();
    let h = grid.spacing();
    match grid.spec() {
        DomainSpec::Ellipse { .. } => {
            let nb = Neighborhood::new(grid);
            grid.boundary()
                .iter()
                .map(|bp| {
                    let jet = nb.fit(v, grid.coords(bp.node)).ok_or_else(|| {
                        GelfandError::Geometry(format!(
                            "no usable fit around boundary node {}",
                            bp.node
                        ))
                    })?;
                    let [nx, ny] = bp.normal;
                    let (tx, ty) = (-ny, nx);
                    let [xx, xy, yy] = jet.hess;
                    Ok(BoundaryDerivatives {
                        node: bp.node,
                        u_nu: jet.grad[0] * nx + jet.grad[1] * ny,
                        u_tau_nu: tx * (xx * nx + xy * ny) + ty * (xy * nx + yy * ny),
                        curvature: bp.curvature,
                    })
                })
                .collect()
        }
        _ => Ok(grid
            .boundary()
            .iter()
            .map(|bp| {
                let i = bp.node;
                // Step inward: towards lower indices at the far end, higher at x = 0.
                let (a, b, c) = if i == 0 { (0, 1, 2) } else { (i, i - 1, i - 2) };
                BoundaryDerivatives {
                    node: i,
                    u_nu: (3.0 * v[a] - 4.0 * v[b] + v[c]) / (2.0 * h),
                    u_tau_nu: 0.0,
                    curvature: bp.curvature,
                }
            })
            .collect()),
    }
}

/// Value and node of a boundary minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryMin {
    pub value: f64,
    pub node: usize,
    pub location: [f64; 2],
}

fn boundary_min(grid: &Grid, values: impl Iterator<Item = (usize, f64)>) -> BoundaryMin {
    let (node, value) = values.fold((0, f64::INFINITY), |best, (n, v)| if v < best.1 { (n, v) } else { best });
    BoundaryMin {
        value,
        node,
        location: grid.coords(node),
    }
}

/// `min over ∂Ω of ½u_ν² + λ + (n−1)u_ν H + K u_ν`. `K` is ignored (taken
/// as 0) on the interval and on balls.
pub fn boundary_g(u: &ScalarField, lambda: f64, k: f64) -> Result<BoundaryMin> {
    let grid = u.grid();
    let n1 = grid.dimension() as f64 - 1.0;
    let k = if matches!(grid.spec(), DomainSpec::Ellipse { .. }) { k } else { 0.0 };
    let d = boundary_derivatives(u)?;
    Ok(boundary_min(
        grid,
        d.iter()
            .map(|b| (b.node, 0.5 * b.u_nu * b.u_nu + lambda + n1 * b.u_nu * b.curvature + k * b.u_nu)),
    ))
}

/// A direction at the boundary, in the (tangent, outward normal) frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Tangential,
    Normal,
    /// `k₁τ + k₂ν`, normalized.
    General { k1: f64, k2: f64 },
}

/// Second derivative of `w = e^{-u/2}` along a boundary direction,
/// `½(½u_α² − u_αα)`, with `u_ττ = u_ν·H` and `u_νν = −λ − (n−1)H u_ν`
/// taken from the boundary geometry and the equation.
pub fn boundary_convexity(u: &ScalarField, lambda: f64, direction: Direction) -> Result<BoundaryMin> {
    let grid = u.grid();
    let n = grid.dimension();
    let (k1, k2) = match direction {
        Direction::Tangential => (1.0, 0.0),
        Direction::Normal => (0.0, 1.0),
        Direction::General { k1, k2 } => {
            let norm = k1.hypot(k2);
            if !(norm > 0.0) {
                return Err(GelfandError::Geometry("direction (0, 0) has no length".into()));
            }
            (k1 / norm, k2 / norm)
        }
    };
    if n == 1 && k1 != 0.0 {
        return Err(GelfandError::Geometry(
            "no tangential directions in one dimension".into(),
        ));
    }
    let d = boundary_derivatives(u)?;
    let mut vals = Vec::with_capacity(d.len());
    for b in &d {
        if b.u_nu.abs() < DEGENERATE_NORMAL {
            return Err(GelfandError::DegenerateNormal {
                node: b.node,
                value: b.u_nu,
            });
        }
        vals.push((b.node, direction_value(b, lambda, n, k1, k2)));
    }
    Ok(boundary_min(grid, vals.into_iter()))
}

fn direction_value(b: &BoundaryDerivatives, lambda: f64, n: usize, k1: f64, k2: f64) -> f64 {
    let tangential = -0.5 * b.u_nu * b.curvature;
    let normal = 0.5 * (0.5 * b.u_nu * b.u_nu + lambda + (n as f64 - 1.0) * b.u_nu * b.curvature);
    k1 * k1 * tangential + k2 * k2 * normal - k1 * k2 * b.u_tau_nu
}

/// Minimum over all unit directions at one boundary node.
fn min_over_directions(b: &BoundaryDerivatives, lambda: f64, n: usize) -> f64 {
    let normal = direction_value(b, lambda, n, 0.0, 1.0);
    if n == 1 {
        return normal;
    }
    let tangential = direction_value(b, lambda, n, 1.0, 0.0);
    min_eig_sym(tangential, -0.5 * b.u_tau_nu, normal)
}

/// `max over ∂Ω of |u_τν|/|u_ν|`. Zero on balls, where `u_τν` vanishes
/// identically in the radial representation.
pub fn mixed_derivative_ratio(u: &ScalarField) -> Result<BoundaryMin> {
    let grid = u.grid();
    if grid.dimension() < 2 {
        return Err(GelfandError::Geometry(
            "mixed derivative ratio needs a tangential direction".into(),
        ));
    }
    let d = boundary_derivatives(u)?;
    let mut best = BoundaryMin {
        value: 0.0,
        node: d[0].node,
        location: grid.coords(d[0].node),
    };
    for b in &d {
        if b.u_nu.abs() < DEGENERATE_NORMAL {
            return Err(GelfandError::DegenerateNormal {
                node: b.node,
                value: b.u_nu,
            });
        }
        let r = b.u_tau_nu.abs() / b.u_nu.abs();
        if r > best.value {
            best = BoundaryMin {
                value: r,
                node: b.node,
                location: grid.coords(b.node),
            };
        }
    }
    Ok(best)
}

/// Default `K`: 0 on the interval, balls and circles; on a proper ellipse
/// `C₁²/(4κ_min)` with `C₁` the mixed-derivative ratio and `κ_min = b/a²`.
pub fn default_k(grid: &Grid, mixed_ratio: f64) -> f64 {
    match *grid.spec() {
        DomainSpec::Ellipse { a, b } if a != b => {
            let kappa_min = boundary_geometry(grid)
                .points
                .iter()
                .map(|p| p.curvature)
                .fold(f64::INFINITY, f64::min);
            mixed_ratio * mixed_ratio / (4.0 * kappa_min)
        }
        _ => 0.0,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityReport {
    pub domain: DomainSpec,
    pub resolution: usize,
    pub h: f64,
    pub lambda: f64,
    pub min_interior_eig: f64,
    pub argmin_node: usize,
    pub argmin_location: [f64; 2],
    /// `max(min_interior_eig, 0)`.
    pub c1_estimate: f64,
    pub boundary_min_g: BoundaryMin,
    pub boundary_min_w_second: BoundaryMin,
    pub mixed_ratio_max: f64,
    pub k_used: f64,
    /// `10·h²·‖w‖_∞`.
    pub conv_tol: f64,
    pub flagged_nodes: usize,
    /// `min_interior_eig ≥ −conv_tol`.
    pub convex: bool,
}

/// Full f-convexity report for `u` at `lambda`. `k = None` uses [`default_k`].
pub fn convexity_report(u: &ScalarField, lambda: f64, k: Option<f64>) -> Result<(ConvexityReport, HessianField)> {
    let grid = u.grid();
    let w = to_w(u);
    let hess = hessian_min_eig_field(&w)?;
    let conv_tol = 10.0 * grid.spacing().powi(2) * w.max_abs();
    let n = grid.dimension();
    let mixed = if n >= 2 { mixed_derivative_ratio(u)?.value } else { 0.0 };
    let k_used = match k {
        Some(k) if !(k >= 0.0) => {
            return Err(GelfandError::Geometry(format!("K must be ≥ 0 (got {k})")));
        }
        Some(k) => k,
        None => default_k(grid, mixed),
    };
    let k_used = if matches!(grid.spec(), DomainSpec::Ellipse { .. }) { k_used } else { 0.0 };
    let g = boundary_g(u, lambda, k_used)?;
    let d = boundary_derivatives(u)?;
    let w2 = boundary_min(grid, d.iter().map(|b| (b.node, min_over_directions(b, lambda, n))));
    Ok((
        ConvexityReport {
            domain: *grid.spec(),
            resolution: grid.resolution(),
            h: grid.spacing(),
            lambda,
            min_interior_eig: hess.min,
            argmin_node: hess.argmin,
            argmin_location: grid.coords(hess.argmin),
            c1_estimate: hess.min.max(0.0),
            boundary_min_g: g,
            boundary_min_w_second: w2,
            mixed_ratio_max: mixed,
            k_used,
            conv_tol,
            flagged_nodes: hess.flagged.len(),
            convex: hess.min >= -conv_tol,
        },
        hess,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_grid;
    use crate::steady::newton_solve;

    fn grid(spec: DomainSpec, n: usize) -> Arc<Grid> {
        Arc::new(build_grid(spec, n).unwrap())
    }

    #[test]
    fn w_transform() {
        let g = grid(DomainSpec::interval(1.0), 9);
        let u = ScalarField::from_unknowns(&g, &[0.0, 2.0 * 2f64.ln(), 1.0, 0.5, 0.0, 0.0, 0.0], 0.0);
        let w = to_w(&u);
        assert_eq!(w.at(0), 1.0);
        assert!((w.at(2) - 0.5).abs() < 1e-15);
        assert!(w.at(3) < w.at(4));
    }

    #[test]
    fn hessian_of_quadratics() {
        let g = grid(DomainSpec::interval(1.0), 33);
        let w = ScalarField::from_fn(&g, |[x, _]| x * x);
        let f = hessian_min_eig_field(&w).unwrap();
        for &i in g.interior() {
            assert!((f.field.at(i) - 2.0).abs() < 1e-9);
        }
        let ones = ScalarField::constant(&g, 1.0);
        assert_eq!(hessian_min_eig_field(&ones).unwrap().min, 0.0);

        let e = grid(DomainSpec::ellipse(1.5, 1.0), 40);
        let w = ScalarField::from_fn(&e, |[x, y]| 3.0 * x * x + x * y + y * y);
        let f = hessian_min_eig_field(&w).unwrap();
        let exact = min_eig_sym(6.0, 1.0, 2.0);
        assert!(f.flagged.is_empty());
        for &i in e.interior() {
            assert!((f.field.at(i) - exact).abs() < 1e-7, "{} vs {exact}", f.field.at(i));
        }
        let b = grid(DomainSpec::ball(3, 1.0), 41);
        let w = ScalarField::from_fn(&b, |[r, _]| r * r);
        let f = hessian_min_eig_field(&w).unwrap();
        for &i in b.interior() {
            assert!((f.field.at(i) - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn solved_interval_is_f_convex() {
        let g = grid(DomainSpec::interval(1.0), 201);
        let s = newton_solve(&g, 1.0, &ScalarField::zeros(&g), 1e-10).unwrap();
        let f = hessian_min_eig_field(&to_w(&s.phi)).unwrap();
        assert!(f.min > 0.0);
    }

    #[test]
    fn normal_value_under_barrier_equality() {
        // u = λ(r² − |x|²)/(2n) has u_ν = −λr/n exactly.
        let (n, r, lambda) = (3usize, 1.0, 0.7);
        let g = grid(DomainSpec::ball(n, r), 101);
        let u = ScalarField::from_fn(&g, |[x, _]| lambda * (r * r - x * x) / (2.0 * n as f64));
        let v = boundary_convexity(&u, lambda, Direction::Normal).unwrap().value;
        let nf = n as f64;
        let expected = 0.5 * lambda * (lambda * r * r / (2.0 * nf * nf) + 1.0 / nf);
        assert!((v - expected).abs() < 1e-10, "{v} vs {expected}");
        let t = boundary_convexity(&u, lambda, Direction::Tangential).unwrap().value;
        let g10 = boundary_convexity(&u, lambda, Direction::General { k1: 1.0, k2: 0.0 }).unwrap().value;
        assert_eq!(t, g10);
        assert!((t - 0.5 * lambda * r / nf).abs() < 1e-10);
    }

    #[test]
    fn g_identity_on_balls_and_limit() {
        let g = grid(DomainSpec::ball(2, 1.0), 201);
        let s = newton_solve(&g, 0.1, &ScalarField::zeros(&g), 1e-10).unwrap();
        let d = boundary_derivatives(&s.phi).unwrap()[0];
        let gm = boundary_g(&s.phi, 0.1, 5.0).unwrap();
        assert_eq!(gm.value, 0.5 * d.u_nu * d.u_nu + 0.1 + d.u_nu);
        assert!(gm.value > 0.0);
        assert_eq!(boundary_g(&ScalarField::zeros(&g), 0.0, 0.0).unwrap().value, 0.0);
        assert_eq!(mixed_derivative_ratio(&s.phi).unwrap().value, 0.0);
    }

    #[test]
    fn degenerate_normal_reported() {
        let g = grid(DomainSpec::ball(2, 1.0), 33);
        assert!(matches!(
            boundary_convexity(&ScalarField::zeros(&g), 0.0, Direction::Normal),
            Err(GelfandError::DegenerateNormal { .. })
        ));
        let i = grid(DomainSpec::interval(1.0), 33);
        assert!(boundary_convexity(&ScalarField::zeros(&i), 1.0, Direction::Tangential).is_err());
    }

    #[test]
    fn mixed_ratio_of_xy_on_disk() {
        let g = grid(DomainSpec::ellipse(1.0, 1.0), 81);
        // Shift so u_ν stays away from zero: u = xy + 2(x² + y²).
        let u = ScalarField::from_fn(&g, |[x, y]| x * y + 2.0 * (x * x + y * y));
        let m = mixed_derivative_ratio(&u).unwrap();
        let [x, y] = m.location;
        let t = y.atan2(x);
        // On the unit circle u_ν = 4 + sin 2t and u_τν = cos 2t; the ratio peaks at 1/√15.
        let (nx, ny) = (t.cos(), t.sin());
        let (tx, ty) = (-ny, nx);
        let u_nu = (y + 4.0 * x) * nx + (x + 4.0 * y) * ny;
        let u_tn = tx * (4.0 * nx + ny) + ty * (nx + 4.0 * ny);
        assert!((m.value - u_tn.abs() / u_nu.abs()).abs() < 1e-6);
        assert!((m.value - 15f64.sqrt().recip()).abs() < 5.0 * g.spacing(), "{}", m.value);
    }
}
