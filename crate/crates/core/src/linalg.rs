//! Sparse stencil storage and a banded LU factorization with partial pivoting.
//!
//! Every operator in this crate acts on the interior unknowns of a grid and
//! couples them to fixed Dirichlet values on boundary nodes. [`Stencil`]
//! keeps one row per unknown, with columns expressed as node indices, so the
//! same rows serve both for applying the operator to a full field and for
//! assembling the banded systems solved by [`BandLu`].

use crate::error::{GelfandError, Result};

/// Compressed rows of a linear operator on grid nodes.
///
/// Row `k` belongs to the unknown `k`; columns are node indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Stencil {
    pub(crate) fn builder() -> StencilBuilder {
        StencilBuilder {
            row_ptr: vec![0],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    /// `(node, coefficient)` pairs of row `k`.
    pub fn row(&self, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[k]..self.row_ptr[k + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    /// Apply row `k` to a full nodal vector.
    pub fn apply_row(&self, k: usize, values: &[f64]) -> f64 {
        self.row(k).map(|(j, c)| c * values[j]).sum()
    }

    /// Largest absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows())
            .map(|k| self.row(k).map(|(_, c)| c.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

pub(crate) struct StencilBuilder {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl StencilBuilder {
    /// Append a row; repeated columns are merged.
    pub fn push_row(&mut self, entries: &[(usize, f64)]) {
        let start = self.cols.len();
        for &(j, c) in entries {
            if let Some(pos) = self.cols[start..].iter().position(|&x| x == j) {
                self.vals[start + pos] += c;
            } else {
                self.cols.push(j);
                self.vals.push(c);
            }
        }
        self.row_ptr.push(self.cols.len());
    }

    pub fn finish(self) -> Stencil {
        Stencil {
            row_ptr: self.row_ptr,
            cols: self.cols,
            vals: self.vals,
        }
    }
}

/// Square banded matrix with `kl` sub- and `ku` super-diagonals, stored with
/// room for the fill produced by partial pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ld,
            data: vec![0.0; n * ld],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `(kl, ku)`: number of sub- and super-diagonals.
    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.ld + (j + self.kl - i)
    }

    /// Add `v` to entry `(i, j)`; panics when `(i, j)` is outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            return 0.0;
        }
        self.data[self.idx(i, j)]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.idx(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// Assemble `diag(row_scale) * S + diag(shift)` restricted to unknowns,
    /// where `unknown_of` maps node indices to unknown indices (boundary
    /// nodes map to `None` and are dropped).
    pub fn from_stencil(
        stencil: &Stencil,
        unknown_of: &[Option<usize>],
        row_scale: impl Fn(usize) -> f64,
        shift: impl Fn(usize) -> f64,
    ) -> Self {
        let n = stencil.rows();
        let (mut kl, mut ku) = (0usize, 0usize);
        for k in 0..n {
            for (j, _) in stencil.row(k) {
                if let Some(c) = unknown_of[j] {
                    if c < k {
                        kl = kl.max(k - c);
                    } else {
                        ku = ku.max(c - k);
                    }
                }
            }
        }
        let mut m = Self::zeros(n, kl, ku);
        for k in 0..n {
            let s = row_scale(k);
            for (j, c) in stencil.row(k) {
                if let Some(col) = unknown_of[j] {
                    m.add(k, col, s * c);
                }
            }
            m.add(k, k, shift(k));
        }
        m
    }

    /// LU factorization with partial pivoting (row interchanges inside the band).
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut piv = vec![0usize; n];
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !scale.is_finite() {
            return Err(GelfandError::SingularSystem(
                "matrix has non-finite entries".into(),
            ));
        }
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for i in k + 1..=last {
                let v = self.data[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || best <= scale * f64::EPSILON * 1e-6 {
                return Err(GelfandError::SingularSystem(format!(
                    "zero pivot in column {k} of {n}"
                )));
            }
            piv[k] = p;
            let jmax = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for i in k + 1..=last {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                if l != 0.0 {
                    for j in k + 1..=jmax {
                        let kj = self.data[self.idx(k, j)];
                        let ij = self.idx(i, j);
                        self.data[ij] -= l * kj;
                    }
                }
            }
        }
        Ok(BandLu { m: self, piv })
    }
}

/// Factored banded matrix.
#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn dim(&self) -> usize {
        self.m.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let m = &self.m;
        let n = m.n;
        assert_eq!(x.len(), n);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for (i, xi) in x.iter_mut().enumerate().take((k + m.kl).min(n - 1) + 1).skip(k + 1) {
                    *xi -= m.data[m.idx(i, k)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let jmax = (k + m.kl + m.ku).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=jmax {
                s -= m.data[m.idx(k, j)] * x[j];
            }
            x[k] = s / m.data[m.idx(k, k)];
        }
    }
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
