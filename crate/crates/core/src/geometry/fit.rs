//! Local least-squares quartic fits on the ellipse grid, used where the
//! centered stencils reach past the boundary.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::domain::{Grid, NodeClass};

const MIN_POINTS: usize = 20;
const TERMS: usize = 15;
const RANK_TOL: f64 = 1e-8;

/// Derivatives of the fitted quartic at the fit center.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Jet {
    pub grad: [f64; 2],
    /// `[f_xx, f_xy, f_yy]`.
    pub hess: [f64; 3],
}

/// Buckets of non-ghost nodes by nearest lattice point.
pub(crate) struct Neighborhood<'g> {
    grid: &'g Grid,
    origin: f64,
    cells: HashMap<(isize, isize), Vec<usize>>,
}

impl<'g> Neighborhood<'g> {
    pub fn new(grid: &'g Grid) -> Self {
        let origin = grid.lattice().map_or(0.0, |l| l.coord(0));
        let h = grid.spacing();
        let mut cells: HashMap<(isize, isize), Vec<usize>> = HashMap::new();
        for i in 0..grid.len() {
            if grid.class(i) == NodeClass::Ghost {
                continue;
            }
            let [x, y] = grid.coords(i);
            let key = (((x - origin) / h).round() as isize, ((y - origin) / h).round() as isize);
            cells.entry(key).or_default().push(i);
        }
        Self { grid, origin, cells }
    }

    fn near(&self, c: [f64; 2], radius: f64) -> Vec<usize> {
        let h = self.grid.spacing();
        let reach = (radius / h).ceil() as isize + 1;
        let ci = ((c[0] - self.origin) / h).round() as isize;
        let cj = ((c[1] - self.origin) / h).round() as isize;
        let mut out = Vec::new();
        for dj in -reach..=reach {
            for di in -reach..=reach {
                if let Some(nodes) = self.cells.get(&(ci + di, cj + dj)) {
                    for &n in nodes {
                        let [x, y] = self.grid.coords(n);
                        if (x - c[0]).hypot(y - c[1]) <= radius {
                            out.push(n);
                        }
                    }
                }
            }
        }
        out
    }

    /// Quartic least-squares fit of `values` around `c`, trying radii of
    /// 3h and 4h. `None` when too few points or the design is rank deficient.
    pub fn fit(&self, values: &[f64], c: [f64; 2]) -> Option<Jet> {
        let h = self.grid.spacing();
        [3.0, 4.0].iter().find_map(|&s| self.fit_radius(values, c, s * h))
    }

    fn fit_radius(&self, values: &[f64], c: [f64; 2], radius: f64) -> Option<Jet> {
        let h = self.grid.spacing();
        let nodes = self.near(c, radius);
        if nodes.len() < MIN_POINTS {
            return None;
        }
        let mut a = DMatrix::zeros(nodes.len(), TERMS);
        let mut b = DVector::zeros(nodes.len());
        for (row, &n) in nodes.iter().enumerate() {
            let [x, y] = self.grid.coords(n);
            let (p, q) = ((x - c[0]) / h, (y - c[1]) / h);
            let m = [
                1.0,
                p,
                q,
                p * p,
                p * q,
                q * q,
                p * p * p,
                p * p * q,
                p * q * q,
                q * q * q,
                p * p * p * p,
                p * p * p * q,
                p * p * q * q,
                p * q * q * q,
                q * q * q * q,
            ];
            for (col, v) in m.into_iter().enumerate() {
                a[(row, col)] = v;
            }
            b[row] = values[n];
        }
        let svd = a.svd(true, true);
        let s = &svd.singular_values;
        let smax = s.max();
        if !(smax > 0.0) || s.min() < RANK_TOL * smax {
            return None;
        }
        let coef = svd.solve(&b, RANK_TOL * smax).ok()?;
        let h2 = h * h;
        Some(Jet {
            grad: [coef[1] / h, coef[2] / h],
            hess: [2.0 * coef[3] / h2, coef[4] / h2, 2.0 * coef[5] / h2],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, DomainSpec};

    #[test]
    fn reproduces_polynomials_at_the_boundary() {
        let g = build_grid(DomainSpec::ellipse(1.5, 1.0), 41).unwrap();
        let f = |x: f64, y: f64| 1.0 + x - 2.0 * y + x * y + 0.5 * y * y + x * x * y - y * y * y;
        let values: Vec<f64> = (0..g.len())
            .map(|i| {
                let [x, y] = g.coords(i);
                f(x, y)
            })
            .collect();
        let nb = Neighborhood::new(&g);
        for bp in g.boundary() {
            let [x, y] = g.coords(bp.node);
            let jet = nb.fit(&values, [x, y]).expect("fit");
            assert!((jet.grad[0] - (1.0 + y + 2.0 * x * y)).abs() < 1e-8);
            assert!((jet.grad[1] - (-2.0 + x + y + x * x - 3.0 * y * y)).abs() < 1e-8);
            assert!((jet.hess[1] - (1.0 + 2.0 * x)).abs() < 1e-7);
            assert!((jet.hess[2] - (1.0 - 6.0 * y)).abs() < 1e-7);
        }
    }
}
