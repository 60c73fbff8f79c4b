//! Computational domains, grids and the discrete Laplacian.
//!
//! Three families are supported:
//!
//! * [`DomainSpec::Interval`]: `[0, L]` with a uniform 3-point stencil.
//! * [`DomainSpec::RadialBall`]: the ball of radius `R` in `ℝⁿ`, reduced to
//!   the radial profile on `r ∈ [0, R]`. The Laplacian is written in flux
//!   form `r^{1-n} (r^{n-1} f')'` on dual cells, which makes it exact on
//!   `r²` and symmetric with respect to the quadrature weights.
//! * [`DomainSpec::Ellipse`]: a uniform Cartesian lattice cut by the ellipse,
//!   with Shortley-Weller arms at nodes next to the boundary.

mod ellipse;
mod field;

use serde::Serialize;

pub use ellipse::{Arm, Lattice, EAST, NORTH, SOUTH, WEST};
pub use field::{discrete_gradient, discrete_laplacian, ScalarField};

use crate::error::{GelfandError, Result};
use crate::linalg::Stencil;

pub const MIN_RESOLUTION_1D: usize = 8;
pub const MAX_RESOLUTION_1D: usize = 4097;
pub const MIN_RESOLUTION_2D: usize = 16;
pub const MAX_RESOLUTION_2D: usize = 513;

/// Geometry of the computational domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Interval { length: f64 },
    RadialBall { dim: usize, radius: f64 },
    Ellipse { a: f64, b: f64 },
}

impl DomainSpec {
    pub fn interval(length: f64) -> Self {
        Self::Interval { length }
    }

    pub fn ball(dim: usize, radius: f64) -> Self {
        Self::RadialBall { dim, radius }
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        Self::Ellipse { a, b }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(GelfandError::InvalidDomain(format!(
                    "{name} must be > 0 (got {v})"
                )))
            }
        };
        match *self {
            Self::Interval { length } => positive("length", length),
            Self::RadialBall { dim, radius } => {
                if dim < 1 {
                    return Err(GelfandError::InvalidDomain(
                        "dimension must be ≥ 1".into(),
                    ));
                }
                positive("radius", radius)
            }
            Self::Ellipse { a, b } => {
                positive("a", a)?;
                positive("b", b)?;
                if a < b {
                    return Err(GelfandError::InvalidDomain(format!(
                        "require a ≥ b (got a = {a}, b = {b})"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Space dimension `n` of the domain.
    pub fn dimension(&self) -> usize {
        match *self {
            Self::Interval { .. } => 1,
            Self::RadialBall { dim, .. } => dim,
            Self::Ellipse { .. } => 2,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Interval { .. } => "interval",
            Self::RadialBall { .. } => "ball",
            Self::Ellipse { .. } => "ellipse",
        }
    }

    pub fn resolution_bounds(&self) -> (usize, usize) {
        match self {
            Self::Ellipse { .. } => (MIN_RESOLUTION_2D, MAX_RESOLUTION_2D),
            _ => (MIN_RESOLUTION_1D, MAX_RESOLUTION_1D),
        }
    }

    /// Lebesgue measure of the domain.
    pub fn volume(&self) -> f64 {
        match *self {
            Self::Interval { length } => length,
            Self::RadialBall { dim, radius } => {
                unit_sphere_area(dim) * radius.powi(dim as i32) / dim as f64
            }
            Self::Ellipse { a, b } => std::f64::consts::PI * a * b,
        }
    }

    /// True for the interval and radial balls, where the minimal solution is
    /// radially symmetric.
    pub fn is_radial(&self) -> bool {
        !matches!(self, Self::Ellipse { a, b } if a != b)
    }
}

/// Surface area of the unit sphere `S^{n-1}` in `ℝⁿ`.
pub fn unit_sphere_area(n: usize) -> f64 {
    use std::f64::consts::PI;
    // |S^{k+1}| = 2π/k · |S^{k-1}|
    let (mut area, mut k) = if n % 2 == 1 { (2.0, 1) } else { (2.0 * PI, 2) };
    while k < n {
        area *= 2.0 * PI / k as f64;
        k += 2;
    }
    area
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeClass {
    Interior,
    Boundary,
    Ghost,
}

impl NodeClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Interior => "interior",
            Self::Boundary => "boundary",
            Self::Ghost => "ghost",
        }
    }
}

/// Geometric data attached to a boundary node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub node: usize,
    /// Outward unit normal. For the interval and radial grids only the first
    /// component is used (signed direction along the axis / radius).
    pub normal: [f64; 2],
    /// Mean curvature `H`; `(n-1)H` is the sum of principal curvatures.
    pub curvature: f64,
    /// Arc parameter: ellipse angle `t` with `(a cos t, b sin t)`; node
    /// coordinate otherwise.
    pub arc: f64,
}

/// Boundary normals and curvatures plus the inner and outer touching radii.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryGeometry {
    pub points: Vec<BoundaryPoint>,
    /// `r_Ω`: smallest radius of curvature of `∂Ω`.
    pub inradius: f64,
    /// `R_Ω`: largest radius of curvature of `∂Ω`.
    pub circumradius: f64,
}

/// A discretized domain. Immutable once built.
#[derive(Debug, Clone)]
pub struct Grid {
    spec: DomainSpec,
    resolution: usize,
    h: f64,
    coords: Vec<[f64; 2]>,
    class: Vec<NodeClass>,
    interior: Vec<usize>,
    unknown_of: Vec<Option<usize>>,
    boundary: Vec<BoundaryPoint>,
    laplacian: Stencil,
    weights: Vec<f64>,
    lattice: Option<Lattice>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.resolution == other.resolution
    }
}

/// Build the grid for `spec` with `resolution` nodes per axis.
///
/// For the interval and radial balls `resolution` is the total node count
/// including both ends; for the ellipse it is the lattice size per axis over
/// `[-a, a]`.
pub fn build_grid(spec: DomainSpec, resolution: usize) -> Result<Grid> {
    spec.validate()?;
    let (min, max) = spec.resolution_bounds();
    if !(min..=max).contains(&resolution) {
        return Err(GelfandError::Resolution {
            kind: spec.kind_name(),
            resolution,
            min,
            max,
        });
    }
    match spec {
        DomainSpec::Interval { length } => Ok(build_interval(spec, length, resolution)),
        DomainSpec::RadialBall { dim, radius } => Ok(build_radial(spec, dim, radius, resolution)),
        DomainSpec::Ellipse { a, b } => ellipse::build(spec, a, b, resolution),
    }
}

fn build_interval(spec: DomainSpec, length: f64, n: usize) -> Grid {
    let h = length / (n - 1) as f64;
    let coords: Vec<[f64; 2]> = (0..n).map(|i| [i as f64 * h, 0.0]).collect();
    let mut class = vec![NodeClass::Interior; n];
    class[0] = NodeClass::Boundary;
    class[n - 1] = NodeClass::Boundary;
    let interior: Vec<usize> = (1..n - 1).collect();
    let mut unknown_of = vec![None; n];
    for (k, &i) in interior.iter().enumerate() {
        unknown_of[i] = Some(k);
    }
    let c = 1.0 / (h * h);
    let mut st = Stencil::builder();
    for &i in &interior {
        st.push_row(&[(i - 1, c), (i, -2.0 * c), (i + 1, c)]);
    }
    let mut weights = vec![h; n];
    weights[0] = 0.5 * h;
    weights[n - 1] = 0.5 * h;
    let boundary = vec![
        BoundaryPoint {
            node: 0,
            normal: [-1.0, 0.0],
            curvature: 0.0,
            arc: 0.0,
        },
        BoundaryPoint {
            node: n - 1,
            normal: [1.0, 0.0],
            curvature: 0.0,
            arc: length,
        },
    ];
    Grid {
        spec,
        resolution: n,
        h,
        coords,
        class,
        interior,
        unknown_of,
        boundary,
        laplacian: st.finish(),
        weights,
        lattice: None,
    }
}

fn build_radial(spec: DomainSpec, dim: usize, radius: f64, n: usize) -> Grid {
    let h = radius / (n - 1) as f64;
    let r = |i: usize| i as f64 * h;
    let nd = dim as f64;
    let coords: Vec<[f64; 2]> = (0..n).map(|i| [r(i), 0.0]).collect();
    let mut class = vec![NodeClass::Interior; n];
    class[n - 1] = NodeClass::Boundary;
    let interior: Vec<usize> = (0..n - 1).collect();
    let mut unknown_of = vec![None; n];
    for (k, &i) in interior.iter().enumerate() {
        unknown_of[i] = Some(k);
    }
    // Dual cell [r_{i-1/2}, r_{i+1/2}] with measure ∫ r^{n-1} dr.
    let mid = |i: usize| (i as f64 + 0.5) * h;
    let cell = |lo: f64, hi: f64| (hi.powi(dim as i32) - lo.powi(dim as i32)) / nd;
    let flux = |rm: f64| rm.powi(dim as i32 - 1) / h;
    let mut st = Stencil::builder();
    // Center: the cell [0, h/2] has measure (h/2)^n/n and a single face flux
    // (h/2)^{n-1}(f_1 - f_0)/h, giving 2n (f_1 - f_0)/h², the limit n·f''(0).
    let c0 = 2.0 * nd / (h * h);
    st.push_row(&[(0, -c0), (1, c0)]);
    for i in 1..n - 1 {
        let vol = cell(mid(i - 1), mid(i));
        let cp = flux(mid(i)) / vol;
        let cm = flux(mid(i - 1)) / vol;
        st.push_row(&[(i - 1, cm), (i, -(cp + cm)), (i + 1, cp)]);
    }
    let area = unit_sphere_area(dim);
    let mut weights = Vec::with_capacity(n);
    weights.push(area * cell(0.0, 0.5 * h));
    for i in 1..n - 1 {
        weights.push(area * cell(mid(i - 1), mid(i)));
    }
    weights.push(area * cell(mid(n - 2), radius));
    let boundary = vec![BoundaryPoint {
        node: n - 1,
        normal: [1.0, 0.0],
        curvature: 1.0 / radius,
        arc: radius,
    }];
    Grid {
        spec,
        resolution: n,
        h,
        coords,
        class,
        interior,
        unknown_of,
        boundary,
        laplacian: st.finish(),
        weights,
        lattice: None,
    }
}

impl Grid {
    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Uniform lattice spacing `h`.
    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension()
    }

    /// Number of nodes of every class.
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Number of coordinate columns: 1 for the interval and radial grids
    /// (position / radius), 2 for the ellipse.
    pub fn coord_dim(&self) -> usize {
        if self.lattice.is_some() {
            2
        } else {
            1
        }
    }

    pub fn coords(&self, node: usize) -> [f64; 2] {
        self.coords[node]
    }

    pub fn class(&self, node: usize) -> NodeClass {
        self.class[node]
    }

    /// Interior nodes in unknown order.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn num_unknowns(&self) -> usize {
        self.interior.len()
    }

    /// Unknown index of each node (`None` on boundary and ghost nodes).
    pub fn unknown_of(&self) -> &[Option<usize>] {
        &self.unknown_of
    }

    pub fn boundary(&self) -> &[BoundaryPoint] {
        &self.boundary
    }

    /// Discrete Laplacian rows, one per unknown, columns in node indices.
    pub fn laplacian(&self) -> &Stencil {
        &self.laplacian
    }

    /// Quadrature weights per node (zero on ghost nodes).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn lattice(&self) -> Option<&Lattice> {
        self.lattice.as_ref()
    }

    /// Radial coordinate of a node measured from the domain center.
    pub fn radius_of(&self, node: usize) -> f64 {
        let [x, y] = self.coords[node];
        match self.spec {
            DomainSpec::Interval { length } => (x - 0.5 * length).abs(),
            DomainSpec::RadialBall { .. } => x,
            DomainSpec::Ellipse { .. } => x.hypot(y),
        }
    }

    /// Node whose radial coordinate is closest to `r` (ties go to the lower index).
    pub fn node_at_radius(&self, r: f64) -> usize {
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for i in 0..self.len() {
            if self.class[i] == NodeClass::Ghost {
                continue;
            }
            let d = (self.radius_of(i) - r).abs();
            if d < dist {
                dist = d;
                best = i;
            }
        }
        best
    }
}

/// Outward normals, mean curvature and the touching radii `r_Ω`, `R_Ω`.
pub fn boundary_geometry(grid: &Grid) -> BoundaryGeometry {
    let (inradius, circumradius) = match *grid.spec() {
        DomainSpec::Interval { length } => (0.5 * length, 0.5 * length),
        DomainSpec::RadialBall { radius, .. } => (radius, radius),
        DomainSpec::Ellipse { a, b } => (b * b / a, a * a / b),
    };
    BoundaryGeometry {
        points: grid.boundary.clone(),
        inradius,
        circumradius,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        use std::f64::consts::PI;
        assert_eq!(unit_sphere_area(1), 2.0);
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-15);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        // |S^9| = 2π^5/4!
        assert!((unit_sphere_area(10) - 2.0 * PI.powi(5) / 24.0).abs() < 1e-12);
    }

    #[test]
    fn radial_grid_spacing_and_center() {
        let g = build_grid(DomainSpec::ball(2, 1.0), 101).unwrap();
        assert_eq!(g.len(), 101);
        assert!((g.spacing() - 0.01).abs() < 1e-15);
        assert_eq!(g.class(0), NodeClass::Interior);
        assert_eq!(g.coords(0), [0.0, 0.0]);
        assert_eq!(g.class(100), NodeClass::Boundary);
        assert_eq!(g.num_unknowns(), 100);
    }

    #[test]
    fn rejects_bad_specs() {
        let e = build_grid(DomainSpec::ball(0, 1.0), 32).unwrap_err();
        assert!(e.to_string().contains("dimension must be ≥ 1"), "{e}");
        assert!(build_grid(DomainSpec::interval(-1.0), 32).is_err());
        assert!(build_grid(DomainSpec::interval(1.0), 4).is_err());
        assert!(build_grid(DomainSpec::interval(1.0), 5000).is_err());
        let e = build_grid(DomainSpec::ellipse(1.0, 2.0), 32).unwrap_err();
        assert!(e.to_string().contains("require a ≥ b"), "{e}");
        assert!(build_grid(DomainSpec::ellipse(1.0, 1.0), 15).is_err());
    }

    #[test]
    fn weights_integrate_volume() {
        for spec in [
            DomainSpec::interval(2.5),
            DomainSpec::ball(1, 0.5),
            DomainSpec::ball(2, 1.0),
            DomainSpec::ball(3, 2.0),
            DomainSpec::ball(10, 1.0),
        ] {
            let g = build_grid(spec, 65).unwrap();
            let total: f64 = g.weights().iter().sum();
            assert!(
                (total - spec.volume()).abs() < 1e-12 * spec.volume(),
                "{spec:?}: {total} vs {}",
                spec.volume()
            );
        }
    }

    #[test]
    fn boundary_geometry_matches_closed_forms() {
        let g = build_grid(DomainSpec::ball(3, 2.0), 33).unwrap();
        let bg = boundary_geometry(&g);
        assert_eq!(bg.points.len(), 1);
        assert_eq!(bg.points[0].curvature, 0.5);
        assert_eq!((bg.inradius, bg.circumradius), (2.0, 2.0));

        let g = build_grid(DomainSpec::ellipse(2.0, 1.0), 33).unwrap();
        let bg = boundary_geometry(&g);
        assert_eq!((bg.inradius, bg.circumradius), (0.5, 4.0));
        for p in &bg.points {
            assert!(p.curvature >= 1.0 / 4.0 - 1e-12 && p.curvature <= 2.0 + 1e-12);
        }

        let g = build_grid(DomainSpec::ellipse(1.0, 1.0), 33).unwrap();
        for p in boundary_geometry(&g).points {
            assert!((p.curvature - 1.0).abs() < 1e-12);
        }
    }
}
