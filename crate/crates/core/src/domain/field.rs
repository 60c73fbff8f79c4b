use std::sync::Arc;

use super::ellipse::{EAST, NORTH, SOUTH, WEST};
use super::{DomainSpec, Grid, NodeClass};
use crate::error::{GelfandError, Result};

/// Grid-sampled function. Values are finite at every node.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Self {
        Self {
            grid: Arc::clone(grid),
            values: vec![c; grid.len()],
        }
    }

    /// Sample `f(coords)` at every node.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(GelfandError::GridMismatch);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GelfandError::InvalidDomain(format!(
                "field value at node {i} is not finite"
            )));
        }
        Ok(Self {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Field built from unknown values, with `boundary` on every boundary
    /// node and zero on ghosts.
    pub fn from_unknowns(grid: &Arc<Grid>, unknowns: &[f64], boundary: f64) -> Self {
        let mut values = vec![0.0; grid.len()];
        for i in 0..grid.len() {
            if grid.class(i) == NodeClass::Boundary {
                values[i] = boundary;
            }
        }
        for (k, &i) in grid.interior().iter().enumerate() {
            values[i] = unknowns[k];
        }
        Self {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, node: usize) -> f64 {
        self.values[node]
    }

    /// Values at interior nodes, in unknown order.
    pub fn unknowns(&self) -> Vec<f64> {
        self.grid.interior().iter().map(|&i| self.values[i]).collect()
    }

    /// Largest value over interior and boundary nodes.
    pub fn max(&self) -> f64 {
        self.active().map(|i| self.values[i]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.active().map(|i| self.values[i]).fold(f64::INFINITY, f64::min)
    }

    /// Max-norm over interior and boundary nodes.
    pub fn max_abs(&self) -> f64 {
        self.active().map(|i| self.values[i].abs()).fold(0.0, f64::max)
    }

    /// `max |self - other|` over interior and boundary nodes.
    pub fn distance(&self, other: &ScalarField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .active()
            .map(|i| (self.values[i] - other.values[i]).abs())
            .fold(0.0, f64::max))
    }

    /// Pointwise map; the result lives on the same grid.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `alpha * self + beta * other`.
    pub fn axpby(&self, alpha: f64, other: &ScalarField, beta: f64) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        })
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(GelfandError::GridMismatch)
        }
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if std::ptr::eq(&*self.grid, grid) || *self.grid == *grid {
            Ok(())
        } else {
            Err(GelfandError::GridMismatch)
        }
    }

    fn active(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.grid.len()).filter(|&i| self.grid.class(i) != NodeClass::Ghost)
    }
}

/// Discrete Laplacian at interior nodes; zero elsewhere.
pub fn discrete_laplacian(grid: &Grid, f: &ScalarField) -> Result<ScalarField> {
    f.check_grid(grid)?;
    let lap = grid.laplacian();
    let mut out = vec![0.0; grid.len()];
    for (k, &i) in grid.interior().iter().enumerate() {
        out[i] = lap.apply_row(k, f.values());
    }
    Ok(ScalarField {
        grid: Arc::clone(f.grid()),
        values: out,
    })
}

/// Gradient at interior nodes (zero elsewhere). Centered differences on
/// the interval and in `r` on balls (zero at the center); on the ellipse the
/// three-point formula over the Shortley-Weller arms of each axis.
pub fn discrete_gradient(grid: &Grid, f: &ScalarField) -> Result<Vec<[f64; 2]>> {
    f.check_grid(grid)?;
    let v = f.values();
    let h = grid.spacing();
    let mut out = vec![[0.0; 2]; grid.len()];
    match grid.lattice() {
        None => {
            let radial = matches!(grid.spec(), DomainSpec::RadialBall { .. });
            for &i in grid.interior() {
                if radial && i == 0 {
                    continue;
                }
                out[i][0] = (v[i + 1] - v[i - 1]) / (2.0 * h);
            }
        }
        Some(lat) => {
            for (k, &i) in grid.interior().iter().enumerate() {
                let arms = lat.arms(k);
                for (axis, (p, q)) in [(EAST, WEST), (NORTH, SOUTH)].into_iter().enumerate() {
                    let (ap, aq) = (arms[p], arms[q]);
                    let (fp, fq) = (ap.frac, aq.frac);
                    out[i][axis] = (fq * fq * v[ap.node] - fp * fp * v[aq.node]
                        - (fq * fq - fp * fp) * v[i])
                        / (fp * fq * (fp + fq) * h);
                }
            }
        }
    }
    Ok(out)
}
