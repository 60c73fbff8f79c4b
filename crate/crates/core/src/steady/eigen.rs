use crate::domain::{Grid, ScalarField};
use crate::error::{GelfandError, Result};
use crate::linalg::{BandLu, BandMatrix};

/// Relative accuracy of the principal eigenvalue.
pub const EIG_TOL: f64 = 1e-8;

const MAX_INVERSE_ITERATIONS: usize = 500;
const MAX_RQI_ITERATIONS: usize = 12;
const DENSE_FALLBACK_LIMIT: usize = 2500;

/// Smallest eigenvalue of `-Δ_h - λ·diag(e^φ)` with homogeneous Dirichlet data.
///
/// Tridiagonal operators (interval, radial ball) are solved by bisection on
/// the Sturm count of the symmetrized matrix. Other grids use shifted inverse
/// iteration started below the spectrum, refined by Rayleigh-quotient
/// shifts, with a dense fallback for small systems.
pub fn principal_eigenvalue(grid: &Grid, phi: &ScalarField, lambda: f64) -> Result<f64> {
    phi.check_grid(grid)?;
    let x = phi.unknowns();
    let pot: Vec<f64> = x.iter().map(|p| lambda * p.exp()).collect();
    let a = operator(grid, &pot, 0.0);
    if a.dim() == 0 {
        return Err(GelfandError::Steady("grid has no interior unknowns".into()));
    }
    let (kl, ku) = a.bandwidths();
    if kl <= 1 && ku <= 1 {
        if let Some(mu) = sturm_smallest(&a) {
            return Ok(mu);
        }
    }
    match inverse_iteration(grid, &a, &pot) {
        Ok(mu) => Ok(mu),
        Err(e) if a.dim() <= DENSE_FALLBACK_LIMIT => dense_smallest(&a).ok_or(e),
        Err(e) => Err(e),
    }
}

/// `-Δ_h - diag(pot) - σ` on unknowns.
fn operator(grid: &Grid, pot: &[f64], sigma: f64) -> BandMatrix {
    BandMatrix::from_stencil(
        grid.laplacian(),
        grid.unknown_of(),
        |_| -1.0,
        |k| -pot[k] - sigma,
    )
}

/// Bisection on the Sturm count. Needs positive off-diagonal products, which
/// holds for every tridiagonal Laplacian built here; returns `None` otherwise.
fn sturm_smallest(a: &BandMatrix) -> Option<f64> {
    let n = a.dim();
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    let prod: Vec<f64> = (0..n.saturating_sub(1))
        .map(|i| a.get(i, i + 1) * a.get(i + 1, i))
        .collect();
    if prod.iter().any(|&p| p <= 0.0) {
        return None;
    }
    let off: Vec<f64> = prod.iter().map(|p| p.sqrt()).collect();
    let radius = |i: usize| {
        let left = if i > 0 { off[i - 1] } else { 0.0 };
        let right = if i + 1 < n { off[i] } else { 0.0 };
        left + right
    };
    let mut lo = (0..n).map(|i| diag[i] - radius(i)).fold(f64::INFINITY, f64::min);
    let mut hi = (0..n).map(|i| diag[i] + radius(i)).fold(f64::NEG_INFINITY, f64::max);
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    let tiny = f64::EPSILON * scale * 1e-3;
    let count_below = |x: f64| {
        let mut count = 0usize;
        let mut d = 1.0f64;
        for i in 0..n {
            let p = if i > 0 { prod[i - 1] } else { 0.0 };
            d = diag[i] - x - if i > 0 { p / d } else { 0.0 };
            if d == 0.0 {
                d = -tiny;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    lo -= tiny.max(1e-300);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 2.0 * f64::EPSILON * scale {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    for x in v.iter_mut() {
        *x /= n;
    }
}

fn inverse_iteration(grid: &Grid, a: &BandMatrix, pot: &[f64]) -> Result<f64> {
    let n = a.dim();
    let max_pot = pot.iter().fold(0.0f64, |m, &p| m.max(p));
    let mut sigma = -max_pot - 1.0;
    let mut lu: BandLu = operator(grid, pot, sigma).factor()?;
    // Positive start vector: the principal eigenvector of this Z-matrix is positive.
    let mut v = vec![1.0; n];
    normalize(&mut v);
    let mut mu = f64::NAN;
    let mut res = f64::INFINITY;
    let mut rqi = 0usize;
    for it in 0..MAX_INVERSE_ITERATIONS + MAX_RQI_ITERATIONS {
        let mut y = lu.solve(&v);
        let theta = dot(&v, &y);
        if !theta.is_finite() || theta == 0.0 {
            break;
        }
        normalize(&mut y);
        let av = a.mul_vec(&y);
        mu = dot(&y, &av);
        res = av
            .iter()
            .zip(&y)
            .map(|(p, q)| (p - mu * q).powi(2))
            .sum::<f64>()
            .sqrt();
        v = y;
        let scale = mu.abs().max(1.0);
        if res <= EIG_TOL * scale {
            return Ok(mu);
        }
        let close = res <= 1e-3 * scale;
        if (close || it >= MAX_INVERSE_ITERATIONS) && rqi < MAX_RQI_ITERATIONS {
            rqi += 1;
            // Stay a hair below the estimate so the shifted matrix stays regular.
            sigma = mu - res;
            lu = operator(grid, pot, sigma).factor()?;
        } else if rqi >= MAX_RQI_ITERATIONS {
            break;
        }
    }
    Err(GelfandError::EigenFailure {
        estimate: mu,
        residual: res,
    })
}

fn dense_smallest(a: &BandMatrix) -> Option<f64> {
    let n = a.dim();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a.get(i, j));
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .min_by(|p, q| p.total_cmp(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, DomainSpec};
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn interval_dirichlet_spectrum() {
        let g = Arc::new(build_grid(DomainSpec::interval(1.0), 201).unwrap());
        let h = g.spacing();
        let exact = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        let zero = ScalarField::zeros(&g);
        let mu0 = principal_eigenvalue(&g, &zero, 0.0).unwrap();
        assert!((mu0 - exact).abs() <= 1e-10 * exact);
        assert!((mu0 - PI * PI).abs() <= PI.powi(4) * h * h / 12.0 * 1.01);
        let mu1 = principal_eigenvalue(&g, &zero, 1.0).unwrap();
        assert!((mu1 - (exact - 1.0)).abs() <= 1e-10 * exact);
    }

    #[test]
    fn disk_first_bessel_zero() {
        let g = Arc::new(build_grid(DomainSpec::ball(2, 1.0), 401).unwrap());
        let mu = principal_eigenvalue(&g, &ScalarField::zeros(&g), 0.0).unwrap();
        let j01 = 2.404_825_557_695_773_f64;
        assert!((mu - j01 * j01).abs() < 1e-3, "{mu}");
    }

    #[test]
    fn ellipse_inverse_iteration_matches_dense() {
        let g = Arc::new(build_grid(DomainSpec::ellipse(1.5, 1.0), 24).unwrap());
        let phi = ScalarField::from_fn(&g, |[x, y]| 0.3 * (1.0 - x * x / 2.25 - y * y).max(0.0));
        let pot: Vec<f64> = phi.unknowns().iter().map(|p| 0.7 * p.exp()).collect();
        let a = operator(&g, &pot, 0.0);
        let dense = dense_smallest(&a).unwrap();
        let iter = inverse_iteration(&g, &a, &pot).unwrap();
        assert!((dense - iter).abs() <= 1e-7 * dense.abs(), "{dense} vs {iter}");
    }

    #[test]
    fn circle_ellipse_close_to_disk() {
        let g = Arc::new(build_grid(DomainSpec::ellipse(1.0, 1.0), 65).unwrap());
        let mu = principal_eigenvalue(&g, &ScalarField::zeros(&g), 0.0).unwrap();
        let j01 = 2.404_825_557_695_773_f64;
        assert!((mu - j01 * j01).abs() < 10.0 * g.spacing().powi(2) * j01.powi(4), "{mu}");
    }

    #[test]
    fn sturm_agrees_with_dense_on_radial() {
        let g = Arc::new(build_grid(DomainSpec::ball(3, 1.0), 40).unwrap());
        let phi = ScalarField::from_fn(&g, |[r, _]| 1.0 - r * r);
        let pot: Vec<f64> = phi.unknowns().iter().map(|p| 2.0 * p.exp()).collect();
        let a = operator(&g, &pot, 0.0);
        let s = sturm_smallest(&a).unwrap();
        let d = dense_smallest(&a).unwrap();
        assert!((s - d).abs() <= 1e-9 * d.abs().max(1.0), "{s} vs {d}");
    }
}
