//! Cut-cell lattice for the ellipse `(x/a)² + (y/b)² < 1`.

use std::f64::consts::TAU;

use serde::Serialize;

use super::{BoundaryPoint, DomainSpec, Grid, NodeClass};
use crate::error::{GelfandError, Result};
use crate::linalg::Stencil;

/// Lattice points with `|g| ≤ ON_BOUNDARY` are treated as boundary nodes.
const ON_BOUNDARY: f64 = 1e-12;
/// Interior points whose crossing arm is shorter than this are snapped to the boundary.
const MIN_ARM: f64 = 1e-8;

/// One Shortley-Weller arm: the neighbor node along an axis direction and
/// the fraction of `h` separating it from the center node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Arm {
    pub node: usize,
    pub frac: f64,
}

/// Directions in arm order.
pub const EAST: usize = 0;
pub const WEST: usize = 1;
pub const NORTH: usize = 2;
pub const SOUTH: usize = 3;

/// Lattice bookkeeping of an ellipse grid.
#[derive(Debug, Clone)]
pub struct Lattice {
    size: usize,
    origin: f64,
    h: f64,
    /// Node at lattice point `(i, j)` (interior, on-boundary or ghost).
    node_at: Vec<Option<usize>>,
    /// Lattice index of each interior node, in unknown order.
    ij: Vec<(usize, usize)>,
    /// Arms per unknown, ordered east, west, north, south.
    arms: Vec<[Arm; 4]>,
}

impl Lattice {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn coord(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.h
    }

    /// Node at lattice point `(i, j)`, if it is part of the grid.
    pub fn node_at(&self, i: isize, j: isize) -> Option<usize> {
        let m = self.size as isize;
        if i < 0 || j < 0 || i >= m || j >= m {
            return None;
        }
        self.node_at[j as usize * self.size + i as usize]
    }

    /// Lattice index of the unknown `k`.
    pub fn index_of_unknown(&self, k: usize) -> (usize, usize) {
        self.ij[k]
    }

    pub fn arms(&self, k: usize) -> &[Arm; 4] {
        &self.arms[k]
    }

    /// Arm fractions of unknown `k` that are shorter than one cell.
    pub fn is_cut(&self, k: usize) -> bool {
        self.arms[k].iter().any(|a| a.frac < 1.0)
    }
}

fn level(x: f64, y: f64, a: f64, b: f64) -> f64 {
    (x / a).powi(2) + (y / b).powi(2) - 1.0
}

/// Crossing fractions (east, west, north, south) from an inside point.
fn crossings(x: f64, y: f64, a: f64, b: f64, h: f64) -> [f64; 4] {
    let xb = a * (1.0 - (y / b).powi(2)).max(0.0).sqrt();
    let yb = b * (1.0 - (x / a).powi(2)).max(0.0).sqrt();
    [(xb - x) / h, (x + xb) / h, (yb - y) / h, (y + yb) / h]
}

fn boundary_point(node: usize, x: f64, y: f64, a: f64, b: f64) -> BoundaryPoint {
    let mut t = (y / b).atan2(x / a);
    if t < 0.0 {
        t += TAU;
    }
    let (nx, ny) = (x / (a * a), y / (b * b));
    let norm = nx.hypot(ny);
    let (s, c) = t.sin_cos();
    let curvature = a * b / (a * a * s * s + b * b * c * c).powf(1.5);
    BoundaryPoint {
        node,
        normal: [nx / norm, ny / norm],
        curvature,
        arc: t,
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Site {
    Inside,
    OnBoundary,
    Outside,
}

pub(super) fn build(spec: DomainSpec, a: f64, b: f64, m: usize) -> Result<Grid> {
    let h = 2.0 * a / (m - 1) as f64;
    let origin = -a;
    let c = |k: usize| origin + k as f64 * h;
    let at = |i: usize, j: usize| j * m + i;

    let mut site = vec![Site::Outside; m * m];
    for j in 0..m {
        for i in 0..m {
            let (x, y) = (c(i), c(j));
            let g = level(x, y, a, b);
            site[at(i, j)] = if g.abs() <= ON_BOUNDARY {
                Site::OnBoundary
            } else if g < 0.0 {
                Site::Inside
            } else {
                Site::Outside
            };
        }
    }
    // Snap inside points that sit within MIN_ARM·h of the curve.
    for j in 0..m {
        for i in 0..m {
            if site[at(i, j)] == Site::Inside {
                let cr = crossings(c(i), c(j), a, b, h);
                if cr.iter().any(|&f| f < MIN_ARM) {
                    site[at(i, j)] = Site::OnBoundary;
                }
            }
        }
    }

    let mut node_at: Vec<Option<usize>> = vec![None; m * m];
    let mut coords = Vec::new();
    let mut ij = Vec::new();
    for j in 0..m {
        for i in 0..m {
            if site[at(i, j)] == Site::Inside {
                node_at[at(i, j)] = Some(coords.len());
                coords.push([c(i), c(j)]);
                ij.push((i, j));
            }
        }
    }
    let n_int = coords.len();
    if n_int == 0 {
        return Err(GelfandError::InvalidDomain(
            "resolution too small to contain an interior node".into(),
        ));
    }

    // Boundary candidates: on-boundary lattice points, then axis crossings.
    // Arms referencing them are patched after sorting by arc parameter.
    let mut bpts: Vec<[f64; 2]> = Vec::new();
    let mut lattice_boundary: Vec<Option<usize>> = vec![None; m * m];
    for j in 0..m {
        for i in 0..m {
            if site[at(i, j)] == Site::OnBoundary {
                lattice_boundary[at(i, j)] = Some(bpts.len());
                bpts.push([c(i), c(j)]);
            }
        }
    }
    enum Pending {
        Node(usize),
        Boundary(usize),
    }
    let mut pending: Vec<[(Pending, f64); 4]> = Vec::with_capacity(n_int);
    let steps: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
    for &(i, j) in &ij {
        let (x, y) = (c(i), c(j));
        let cr = crossings(x, y, a, b, h);
        let arms = std::array::from_fn(|d| {
            let (di, dj) = steps[d];
            let (ni, nj) = ((i as isize + di) as usize, (j as isize + dj) as usize);
            match site[at(ni, nj)] {
                Site::Inside => (Pending::Node(node_at[at(ni, nj)].unwrap()), 1.0),
                Site::OnBoundary => (Pending::Boundary(lattice_boundary[at(ni, nj)].unwrap()), 1.0),
                Site::Outside => {
                    let f = cr[d].clamp(MIN_ARM, 1.0);
                    let p = [x + di as f64 * f * h, y + dj as f64 * f * h];
                    bpts.push(p);
                    (Pending::Boundary(bpts.len() - 1), f)
                }
            }
        });
        pending.push(arms);
    }

    let mut order: Vec<usize> = (0..bpts.len()).collect();
    let arc_of = |p: &[f64; 2]| boundary_point(0, p[0], p[1], a, b).arc;
    order.sort_by(|&p, &q| {
        arc_of(&bpts[p])
            .total_cmp(&arc_of(&bpts[q]))
            .then(bpts[p][0].total_cmp(&bpts[q][0]))
            .then(bpts[p][1].total_cmp(&bpts[q][1]))
    });
    let mut bnode = vec![0usize; bpts.len()];
    let mut boundary = Vec::with_capacity(bpts.len());
    for &p in &order {
        let node = coords.len();
        bnode[p] = node;
        let [x, y] = bpts[p];
        boundary.push(boundary_point(node, x, y, a, b));
        coords.push([x, y]);
    }
    for j in 0..m {
        for i in 0..m {
            if let Some(p) = lattice_boundary[at(i, j)] {
                node_at[at(i, j)] = Some(bnode[p]);
            }
        }
    }
    let arms: Vec<[Arm; 4]> = pending
        .into_iter()
        .map(|row| {
            row.map(|(p, frac)| Arm {
                node: match p {
                    Pending::Node(n) => n,
                    Pending::Boundary(q) => bnode[q],
                },
                frac,
            })
        })
        .collect();

    // Ghosts: outside lattice neighbors of interior nodes.
    for &(i, j) in &ij {
        for (di, dj) in steps {
            let (ni, nj) = ((i as isize + di) as usize, (j as isize + dj) as usize);
            if site[at(ni, nj)] == Site::Outside && node_at[at(ni, nj)].is_none() {
                node_at[at(ni, nj)] = Some(coords.len());
                coords.push([c(ni), c(nj)]);
            }
        }
    }

    let n_nodes = coords.len();
    let n_bnd = boundary.len();
    let mut class = vec![NodeClass::Ghost; n_nodes];
    class[..n_int].fill(NodeClass::Interior);
    class[n_int..n_int + n_bnd].fill(NodeClass::Boundary);
    let interior: Vec<usize> = (0..n_int).collect();
    let mut unknown_of = vec![None; n_nodes];
    for k in 0..n_int {
        unknown_of[k] = Some(k);
    }

    let mut st = Stencil::builder();
    let mut weights = vec![0.0; n_nodes];
    let inv_h2 = 1.0 / (h * h);
    for (k, arm) in arms.iter().enumerate() {
        let mut row = Vec::with_capacity(5);
        for (p, q) in [(EAST, WEST), (NORTH, SOUTH)] {
            let (fp, fq) = (arm[p].frac, arm[q].frac);
            let s = fp + fq;
            row.push((arm[p].node, 2.0 * inv_h2 / (fp * s)));
            row.push((arm[q].node, 2.0 * inv_h2 / (fq * s)));
            row.push((k, -2.0 * inv_h2 / (fp * fq)));
        }
        st.push_row(&row);
        weights[k] = h * h * 0.25 * (arm[EAST].frac + arm[WEST].frac) * (arm[NORTH].frac + arm[SOUTH].frac);
    }

    Ok(Grid {
        spec,
        resolution: m,
        h,
        coords,
        class,
        interior,
        unknown_of,
        boundary,
        laplacian: st.finish(),
        weights,
        lattice: Some(Lattice {
            size: m,
            origin,
            h,
            node_at,
            ij,
            arms,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::super::build_grid;
    use super::*;

    #[test]
    fn circle_interior_matches_disk_lattice() {
        let g = build_grid(DomainSpec::ellipse(1.0, 1.0), 64).unwrap();
        let h = g.spacing();
        let mut expected = Vec::new();
        for j in 0..64 {
            for i in 0..64 {
                let (x, y) = (-1.0 + i as f64 * h, -1.0 + j as f64 * h);
                if x * x + y * y < 1.0 - 1e-12 {
                    expected.push([x, y]);
                }
            }
        }
        let got: Vec<[f64; 2]> = g.interior().iter().map(|&i| g.coords(i)).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn arms_are_fractions_and_boundary_nodes_on_curve() {
        let g = build_grid(DomainSpec::ellipse(1.5, 1.0), 41).unwrap();
        let lat = g.lattice().unwrap();
        for k in 0..g.num_unknowns() {
            for arm in lat.arms(k) {
                assert!(arm.frac > 0.0 && arm.frac <= 1.0);
                assert_ne!(g.class(arm.node), NodeClass::Ghost);
            }
        }
        for p in g.boundary() {
            let [x, y] = g.coords(p.node);
            assert!(level(x, y, 1.5, 1.0).abs() < 1e-8);
            let n = p.normal[0].hypot(p.normal[1]);
            assert!((n - 1.0).abs() < 1e-14);
            // outward: normal points away from the center
            assert!(p.normal[0] * x + p.normal[1] * y > 0.0);
        }
        // boundary sorted by arc parameter
        assert!(g.boundary().windows(2).all(|w| w[0].arc <= w[1].arc));
    }

    #[test]
    fn quadratic_is_exact_under_shortley_weller() {
        // Δ(x² + 3y²) = 8 regardless of arm lengths.
        let g = build_grid(DomainSpec::ellipse(1.3, 0.7), 37).unwrap();
        let vals: Vec<f64> = (0..g.len())
            .map(|i| {
                let [x, y] = g.coords(i);
                x * x + 3.0 * y * y
            })
            .collect();
        for k in 0..g.num_unknowns() {
            let v = g.laplacian().apply_row(k, &vals);
            assert!((v - 8.0).abs() < 1e-8, "{v}");
        }
    }
}
