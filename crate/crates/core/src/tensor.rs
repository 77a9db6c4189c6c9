//! Dense multiway arrays, matrices and the multilinear kernels used by the CP solvers.
//!
//! Layout conventions, fixed crate-wide:
//!
//! * `DenseTensor` stores entries with the first index varying fastest.
//! * `Matrix` is column-major; factor vectors are columns.
//! * The mode-`n` unfolding `X_(n)` has `I_n` rows; its column index enumerates the
//!   remaining modes with the lowest-numbered remaining mode varying fastest.
//! * `khatri_rao(&[A, B])` has the row index of the *last* matrix varying fastest, so the
//!   Khatri–Rao product matching `X_(n)` lists the factors in reverse mode order,
//!   `A_{N-1} ⊙ … ⊙ A_{n+1} ⊙ A_{n-1} ⊙ … ⊙ A_0` (see [`mode_khatri_rao`]).

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor<T> {
    shape: Vec<usize>,
    values: Vec<T>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.len() < 2 {
        return Err(Error::InvalidShape(format!("a tensor needs at least 2 modes, got {}", shape.len())));
    }
    if let Some(m) = shape.iter().position(|&e| e == 0) {
        return Err(Error::InvalidShape(format!("extent of mode {m} is zero")));
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &e| acc.checked_mul(e))
        .ok_or_else(|| Error::InvalidShape("element count overflows".into()))
}

fn check_finite<T: Scalar>(values: &[T]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

impl<T: Scalar> DenseTensor<T> {
    pub fn new(shape: Vec<usize>, values: Vec<T>) -> Result<Self> {
        let len = check_shape(&shape)?;
        if values.len() != len {
            return Err(Error::DimensionMismatch(format!("shape {shape:?} holds {len} values, got {}", values.len())));
        }
        check_finite(&values)?;
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len = check_shape(&shape)?;
        Ok(Self { shape, values: vec![T::zero(); len] })
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in layout order.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> T) -> Result<Self> {
        let len = check_shape(&shape)?;
        let mut idx = vec![0usize; shape.len()];
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            values.push(f(&idx));
            advance_index(&mut idx, &shape);
        }
        check_finite(&values)?;
        Ok(Self { shape, values })
    }

    /// Wraps values produced by the crate's own kernels; finiteness is not re-checked.
    pub(crate) fn from_parts(shape: Vec<usize>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), shape.iter().product::<usize>());
        Self { shape, values }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter().zip(&self.shape).rev().fold(0, |acc, (&i, &e)| acc * e + i)
    }

    pub fn get(&self, idx: &[usize]) -> T {
        self.values[self.linear_index(idx)]
    }

    /// Elementwise combination of two tensors of identical shape.
    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::DimensionMismatch(format!("shapes {:?} and {:?} differ", self.shape, other.shape)));
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self::from_parts(self.shape.clone(), values))
    }

    pub fn scale(&self, s: T) -> Self {
        Self::from_parts(self.shape.clone(), self.values.iter().map(|&v| v * s).collect())
    }

    pub fn cast<U: Scalar>(&self) -> DenseTensor<U> {
        DenseTensor {
            shape: self.shape.clone(),
            values: self.values.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        }
    }
}

/// Increments a first-index-fastest multi-index in place.
pub(crate) fn advance_index(idx: &mut [usize], shape: &[usize]) {
    for (i, &e) in idx.iter_mut().zip(shape) {
        *i += 1;
        if *i < e {
            return;
        }
        *i = 0;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    values: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn new(rows: usize, cols: usize, values: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidShape(format!("matrix must be non-empty, got {rows}x{cols}")));
        }
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(Self { rows, cols, values })
    }

    pub(crate) fn from_parts(rows: usize, cols: usize, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), rows * cols);
        Self { rows, cols, values }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_parts(rows, cols, vec![T::zero(); rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                values.push(f(i, j));
            }
        }
        Self::from_parts(rows, cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i + j * self.rows]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.values[i + j * self.rows] = v;
    }

    pub fn column(&self, j: usize) -> &[T] {
        &self.values[j * self.rows..(j + 1) * self.rows]
    }

    pub fn column_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.values[j * self.rows..(j + 1) * self.rows]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            for k in 0..self.cols {
                let b = other.get(k, j);
                let a = self.column(k);
                for (o, &x) in out.column_mut(j).iter_mut().zip(a) {
                    *o += x * b;
                }
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> T {
        dot(&self.values, &self.values).sqrt()
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }
}

fn check_mode<T>(t: &DenseTensor<T>, mode: usize) -> Result<()> {
    if mode >= t.shape.len() {
        return Err(Error::ModeOutOfRange { mode, order: t.shape.len() });
    }
    Ok(())
}

/// Splits `shape` around `mode` into (product of lower extents, extent, product of higher extents).
fn split_extents(shape: &[usize], mode: usize) -> (usize, usize, usize) {
    let left = shape[..mode].iter().product();
    let right = shape[mode + 1..].iter().product();
    (left, shape[mode], right)
}

/// Mode-`mode` matricization `X_(mode)`.
pub fn unfold<T: Scalar>(t: &DenseTensor<T>, mode: usize) -> Result<Matrix<T>> {
    check_mode(t, mode)?;
    let (left, extent, right) = split_extents(&t.shape, mode);
    let mut out = Matrix::zeros(extent, left * right);
    for ir in 0..right {
        for i in 0..extent {
            let base = left * (i + extent * ir);
            for il in 0..left {
                out.set(i, il + left * ir, t.values[base + il]);
            }
        }
    }
    Ok(out)
}

/// Inverse of [`unfold`].
pub fn refold<T: Scalar>(m: &Matrix<T>, mode: usize, shape: &[usize]) -> Result<DenseTensor<T>> {
    let len = check_shape(shape)?;
    if mode >= shape.len() {
        return Err(Error::ModeOutOfRange { mode, order: shape.len() });
    }
    let (left, extent, right) = split_extents(shape, mode);
    if m.rows != extent || m.cols != left * right {
        return Err(Error::DimensionMismatch(format!(
            "a {}x{} matrix is not a mode-{mode} unfolding of {shape:?}",
            m.rows, m.cols
        )));
    }
    let mut values = vec![T::zero(); len];
    for ir in 0..right {
        for i in 0..extent {
            let base = left * (i + extent * ir);
            for il in 0..left {
                values[base + il] = m.get(i, il + left * ir);
            }
        }
    }
    Ok(DenseTensor::from_parts(shape.to_vec(), values))
}

/// Column-wise Kronecker product; the row index of the last matrix varies fastest.
pub fn khatri_rao<T: Scalar>(ms: &[&Matrix<T>]) -> Result<Matrix<T>> {
    let first = ms.first().ok_or_else(|| Error::InvalidParameter("khatri_rao needs at least one matrix".into()))?;
    let r = first.cols;
    if let Some(bad) = ms.iter().find(|m| m.cols != r) {
        return Err(Error::DimensionMismatch(format!("khatri_rao column counts differ: {r} vs {}", bad.cols)));
    }
    let rows: usize = ms.iter().map(|m| m.rows).product();
    let mut out = Matrix::zeros(rows, r);
    for j in 0..r {
        let mut col = vec![T::one()];
        for m in ms {
            let mc = m.column(j);
            let mut next = Vec::with_capacity(col.len() * mc.len());
            for &a in &col {
                next.extend(mc.iter().map(|&b| a * b));
            }
            col = next;
        }
        out.column_mut(j).copy_from_slice(&col);
    }
    Ok(out)
}

/// Khatri–Rao product of every factor except `mode`, ordered to match [`unfold`].
pub fn mode_khatri_rao<T: Scalar>(factors: &[Matrix<T>], mode: usize) -> Result<Matrix<T>> {
    let others: Vec<&Matrix<T>> =
        factors.iter().enumerate().rev().filter(|&(m, _)| m != mode).map(|(_, f)| f).collect();
    khatri_rao(&others)
}

/// Row-wise products `out[i, j] = Π_m factors[m][i_m, j]` where `i` enumerates the
/// multi-index over `factors` with the first factor's row varying fastest.
pub(crate) fn partial_khatri_rao<T: Scalar>(factors: &[Matrix<T>], r: usize) -> Matrix<T> {
    let rows: usize = factors.iter().map(|f| f.rows).product();
    let mut out = Matrix::zeros(rows, r);
    for j in 0..r {
        let col = out.column_mut(j);
        col[0] = T::one();
        let mut len = 1;
        for f in factors {
            let fc = f.column(j);
            for (im, &a) in fc.iter().enumerate().rev() {
                for p in (0..len).rev() {
                    col[p + len * im] = col[p] * a;
                }
            }
            len *= f.rows;
        }
    }
    out
}

pub(crate) fn check_factors<T: Scalar>(shape: &[usize], factors: &[Matrix<T>]) -> Result<usize> {
    if factors.len() != shape.len() {
        return Err(Error::DimensionMismatch(format!("{} factors for a {}-way tensor", factors.len(), shape.len())));
    }
    let r = factors[0].cols;
    for (m, (f, &e)) in factors.iter().zip(shape).enumerate() {
        if f.rows != e {
            return Err(Error::DimensionMismatch(format!("factor {m} has {} rows, mode extent is {e}", f.rows)));
        }
        if f.cols != r {
            return Err(Error::DimensionMismatch(format!("factor {m} has {} columns, expected {r}", f.cols)));
        }
    }
    Ok(r)
}

/// Matricized tensor times Khatri–Rao product, `X_(mode) · mode_khatri_rao(factors, mode)`,
/// computed slice by slice without forming the full Khatri–Rao matrix.
pub fn mttkrp<T: Scalar>(t: &DenseTensor<T>, factors: &[Matrix<T>], mode: usize) -> Result<Matrix<T>> {
    check_mode(t, mode)?;
    let r = check_factors(&t.shape, factors)?;
    Ok(mttkrp_unchecked(t, factors, mode, r))
}

pub(crate) fn mttkrp_unchecked<T: Scalar>(
    t: &DenseTensor<T>,
    factors: &[Matrix<T>],
    mode: usize,
    r: usize,
) -> Matrix<T> {
    let (left, extent, right) = split_extents(&t.shape, mode);
    let lkr = partial_khatri_rao(&factors[..mode], r);
    let rkr = partial_khatri_rao(&factors[mode + 1..], r);
    let mut out = Matrix::zeros(extent, r);
    let mut acc = vec![T::zero(); r];
    for ir in 0..right {
        for i in 0..extent {
            let base = left * (i + extent * ir);
            let slice = &t.values[base..base + left];
            for (j, a) in acc.iter_mut().enumerate() {
                *a = dot(slice, lkr.column(j));
            }
            for (j, &a) in acc.iter().enumerate() {
                let v = out.get(i, j) + a * rkr.get(ir, j);
                out.set(i, j, v);
            }
        }
    }
    out
}

/// `mᵀm`, exactly symmetric.
pub fn gram<T: Scalar>(m: &Matrix<T>) -> Matrix<T> {
    let r = m.cols;
    let mut out = Matrix::zeros(r, r);
    for a in 0..r {
        for b in a..r {
            let v = dot(m.column(a), m.column(b));
            out.set(a, b, v);
            out.set(b, a, v);
        }
    }
    out
}

/// Elementwise product of already-computed Gram matrices, skipping index `skip` if given.
pub(crate) fn hadamard_of<T: Scalar>(grams: &[Matrix<T>], skip: Option<usize>) -> Matrix<T> {
    let r = grams[0].cols;
    let mut out = Matrix::from_parts(r, r, vec![T::one(); r * r]);
    for (m, g) in grams.iter().enumerate() {
        if Some(m) == skip {
            continue;
        }
        for (o, &v) in out.values.iter_mut().zip(&g.values) {
            *o *= v;
        }
    }
    out
}

/// `⊛_{m ≠ skip} factors[m]ᵀ factors[m]`; with `skip = None` every factor takes part.
pub fn hadamard_grams<T: Scalar>(factors: &[Matrix<T>], skip: Option<usize>) -> Result<Matrix<T>> {
    let first =
        factors.first().ok_or_else(|| Error::InvalidParameter("hadamard_grams needs at least one factor".into()))?;
    if let Some(bad) = factors.iter().find(|f| f.cols != first.cols) {
        return Err(Error::DimensionMismatch(format!("factor column counts differ: {} vs {}", first.cols, bad.cols)));
    }
    let grams: Vec<_> = factors.iter().map(gram).collect();
    Ok(hadamard_of(&grams, skip))
}

pub fn inner<T: Scalar>(t: &DenseTensor<T>, u: &DenseTensor<T>) -> Result<T> {
    if t.shape != u.shape {
        return Err(Error::DimensionMismatch(format!("shapes {:?} and {:?} differ", t.shape, u.shape)));
    }
    Ok(dot(&t.values, &u.values))
}

pub fn norm_sq<T: Scalar>(t: &DenseTensor<T>) -> T {
    dot(&t.values, &t.values)
}
