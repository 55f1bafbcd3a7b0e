//! Dense third-order tensors and the multilinear primitives built on them.
//!
//! A [`HsiCube`] stores `h × w × p` values with the first mode varying fastest,
//! so voxel `(i, j, k)` lives at `i + h * (j + w * k)` and every band is one
//! contiguous `h * w` slice. Mode-n unfoldings follow the Kolda–Bader column
//! ordering: the remaining indices in ascending mode order, lower mode fastest.

use std::ops::{Add, Sub};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Dense `h × w × p` cube of intensities, mode-1 fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl HsiCube {
    pub fn new(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        check_dims(dims)?;
        let len = dims[0] * dims[1] * dims[2];
        if data.len() != len {
            return Err(Error::shape(format!(
                "cube {}x{}x{} needs {} values, got {}",
                dims[0],
                dims[1],
                dims[2],
                len,
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: [usize; 3]) -> Result<Self> {
        check_dims(dims)?;
        Ok(Self { dims, data: vec![0.0; dims[0] * dims[1] * dims[2]] })
    }

    pub fn filled(dims: [usize; 3], value: f64) -> Result<Self> {
        check_dims(dims)?;
        Ok(Self { dims, data: vec![value; dims[0] * dims[1] * dims[2]] })
    }

    /// Builds a cube by evaluating `f(i, j, k)` at every voxel.
    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        check_dims(dims)?;
        let [h, w, p] = dims;
        let mut data = Vec::with_capacity(h * w * p);
        for k in 0..p {
            for j in 0..w {
                for i in 0..h {
                    data.push(f(i, j, k));
                }
            }
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let idx = self.index(i, j, k);
        self.data[idx] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Contiguous `h * w` slice of band `k`.
    pub fn band(&self, k: usize) -> &[f64] {
        let n = self.dims[0] * self.dims[1];
        &self.data[k * n..(k + 1) * n]
    }

    pub fn band_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.dims[0] * self.dims[1];
        &mut self.data[k * n..(k + 1) * n]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { dims: self.dims, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Elementwise combination of two cubes of identical shape.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same(other)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { dims: self.dims, data })
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Self) -> Result<()> {
        self.check_same(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn fro_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Frobenius norm: square root of the sum of squared entries.
    pub fn fro_norm(&self) -> f64 {
        self.fro_norm_sq().sqrt()
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::shape(format!(
                "cube dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }
}

impl Add for &HsiCube {
    type Output = HsiCube;

    /// Panics on shape mismatch; use [`HsiCube::zip_map`] for a checked version.
    fn add(self, rhs: &HsiCube) -> HsiCube {
        self.zip_map(rhs, |a, b| a + b).expect("cube shapes differ")
    }
}

impl Sub for &HsiCube {
    type Output = HsiCube;

    fn sub(self, rhs: &HsiCube) -> HsiCube {
        self.zip_map(rhs, |a, b| a - b).expect("cube shapes differ")
    }
}

fn check_dims(dims: [usize; 3]) -> Result<()> {
    if dims.contains(&0) {
        return Err(Error::arg(format!("cube dims must be positive, got {dims:?}")));
    }
    Ok(())
}

fn check_mode(mode: usize) -> Result<usize> {
    if !(1..=3).contains(&mode) {
        return Err(Error::arg(format!("mode must be 1, 2 or 3, got {mode}")));
    }
    Ok(mode - 1)
}

/// Column of voxel `(i, j, k)` in the mode-`m` unfolding (0-based mode).
#[inline]
fn unfold_pos(dims: [usize; 3], m: usize, i: usize, j: usize, k: usize) -> (usize, usize) {
    let [h, w, _] = dims;
    match m {
        0 => (i, j + w * k),
        1 => (j, i + h * k),
        _ => (k, i + h * j),
    }
}

/// Mode-n matricization (`mode` in 1..=3).
pub fn unfold(t: &HsiCube, mode: usize) -> Result<Matrix> {
    let m = check_mode(mode)?;
    let dims = t.dims;
    let rows = dims[m];
    let cols = t.len() / rows;
    let mut out = Matrix::zeros(rows, cols);
    let [h, w, p] = dims;
    for k in 0..p {
        for j in 0..w {
            for i in 0..h {
                let (r, c) = unfold_pos(dims, m, i, j, k);
                out[(r, c)] = t.data[i + h * (j + w * k)];
            }
        }
    }
    Ok(out)
}

/// Inverse of [`unfold`] for a cube of shape `dims`.
pub fn fold(mat: &Matrix, mode: usize, dims: [usize; 3]) -> Result<HsiCube> {
    let m = check_mode(mode)?;
    check_dims(dims)?;
    let total = dims[0] * dims[1] * dims[2];
    if mat.nrows() != dims[m] || mat.nrows() * mat.ncols() != total {
        return Err(Error::shape(format!(
            "cannot fold {}x{} matrix along mode {} into {:?}",
            mat.nrows(),
            mat.ncols(),
            mode,
            dims
        )));
    }
    let [h, w, p] = dims;
    let mut data = vec![0.0; total];
    for k in 0..p {
        for j in 0..w {
            for i in 0..h {
                let (r, c) = unfold_pos(dims, m, i, j, k);
                data[i + h * (j + w * k)] = mat[(r, c)];
            }
        }
    }
    Ok(HsiCube { dims, data })
}

/// Mode-n product `t ×_n m`: the `mode` dimension of `t` is replaced by `m.nrows()`.
pub fn mode_product(t: &HsiCube, m: &Matrix, mode: usize) -> Result<HsiCube> {
    let n = check_mode(mode)?;
    if m.ncols() != t.dims[n] {
        return Err(Error::shape(format!(
            "mode-{} product needs {} matrix columns, got {}",
            mode,
            t.dims[n],
            m.ncols()
        )));
    }
    let mut dims = t.dims;
    dims[n] = m.nrows();
    check_dims(dims)?;
    let prod = m * unfold(t, mode)?;
    fold(&prod, mode, dims)
}

/// Frobenius norm of a cube.
pub fn fro_norm(t: &HsiCube) -> f64 {
    t.fro_norm()
}

/// Top-`r` left singular vectors of `m`, `r <= min(rows, cols)`.
///
/// Columns are ordered by decreasing singular value and each column's
/// largest-magnitude entry is made nonnegative.
pub fn leading_left_singular_vectors(m: &Matrix, r: usize) -> Result<Matrix> {
    let limit = m.nrows().min(m.ncols());
    if r == 0 || r > limit {
        return Err(Error::arg(format!(
            "rank {r} out of range 1..={limit} for {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(leading_left_basis(m, r))
}

/// Orthonormal `rows × r` basis whose leading columns span the dominant left
/// singular subspace of `m`. Unlike [`leading_left_singular_vectors`], `r` may
/// exceed the column count: the basis is completed from the null space of `m mᵀ`.
pub(crate) fn leading_left_basis(m: &Matrix, r: usize) -> Matrix {
    let rows = m.nrows();
    debug_assert!(r >= 1 && r <= rows);
    let gram = m * m.transpose();
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..rows).collect();
    // Stable sort keeps ties in eigen-solver order, so results are reproducible.
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out = Matrix::zeros(rows, r);
    for (c, &src) in order.iter().take(r).enumerate() {
        let col = eig.eigenvectors.column(src);
        out.set_column(c, &col);
    }
    fix_signs(&mut out);
    out
}

/// Flips each column so its largest-magnitude entry is nonnegative.
pub(crate) fn fix_signs(m: &mut Matrix) {
    for mut col in m.column_iter_mut() {
        let mut best = 0.0f64;
        let mut best_val = 0.0f64;
        for &v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                best_val = v;
            }
        }
        if best_val < 0.0 {
            col.neg_mut();
        }
    }
}
