//! Dense tensors and the multilinear algebra the rest of the crate builds on.
//!
//! # Storage convention
//!
//! A [`DenseTensor`] stores its elements in a flat buffer with the *first*
//! dimension varying fastest (generalized column-major): the flat index of
//! `(i_0, i_1, ..., i_{N-1})` is
//!
//! ```text
//! i_0 + d_0 * (i_1 + d_1 * (i_2 + ... ))
//! ```
//!
//! [`vectorize`] is a plain copy of that buffer. This is the one layout for
//! which the factored and flattened forms of a separable operator agree
//! without any permutation:
//!
//! ```text
//! vec(T x_0 A_0 x_1 A_1 ... x_{N-1} A_{N-1})
//!     = (A_{N-1} ⊗ ... ⊗ A_1 ⊗ A_0) vec(T)
//! ```
//!
//! Note the Kronecker factors appear in *reverse* mode order. Everything in
//! this crate that flattens an operator relies on this identity, and the
//! tests in this module pin it down against brute-force oracles.
//!
//! # Mode indexing
//!
//! Modes are zero-based everywhere: a 5-way tensor has modes `0..5`.
//!
//! # Unfolding convention
//!
//! [`unfold`] along mode `m` produces a `d_m x (prod of other extents)`
//! matrix whose columns enumerate the remaining dimensions in increasing
//! mode order, first of them varying fastest. [`fold`] is its exact inverse.

use crate::error::{Error, Result};

/// A dense N-way tensor of `f64` values.
///
/// Construction validates that every extent is at least 1 and that the data
/// length matches the product of the extents. Library operations never
/// mutate their tensor arguments; they return fresh tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    /// Wraps a flat buffer (first dimension fastest) as a tensor.
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        validate_dims(&dims)?;
        let expected: usize = dims.iter().product();
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    /// An all-zero tensor with the given extents.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        validate_dims(dims)?;
        let len: usize = dims.iter().product();
        Ok(Self {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut out = Self::zeros(dims)?;
        let mut idx = vec![0usize; dims.len()];
        for flat in 0..out.data.len() {
            out.data[flat] = f(&idx);
            increment_index(&mut idx, dims);
            let _ = flat;
        }
        Ok(out)
    }

    /// Tensor extents, one per mode.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of modes.
    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Total number of elements.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// True if the tensor has no elements (never the case for valid dims).
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The flat buffer, first dimension fastest.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access to the flat buffer for in-place element updates.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Consumes the tensor, returning its flat buffer.
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Flat offset of a multi-index. Panics on out-of-range indices.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.dims.len(), "index rank mismatch");
        let mut flat = 0usize;
        for m in (0..idx.len()).rev() {
            assert!(idx[m] < self.dims[m], "index out of range on mode {m}");
            flat = flat * self.dims[m] + idx[m];
        }
        flat
    }

    /// Element at a multi-index.
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.flat_index(idx)]
    }

    /// Overwrites the element at a multi-index.
    pub fn set(&mut self, idx: &[usize], value: f64) {
        let flat = self.flat_index(idx);
        self.data[flat] = value;
    }

    /// Largest absolute element value (0 for the all-zero tensor).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()))
    }

    /// True when every element is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// A dense column-major matrix of `f64` values.
///
/// Kept separate from [`DenseTensor`] so that two-way operator factors have
/// explicit `rows`/`cols` vocabulary; the storage layout (column-major) is
/// the two-way special case of the tensor layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Wraps a column-major buffer as a `rows x cols` matrix.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "matrix extents must be positive, got {rows} x {cols}"
            )));
        }
        let expected = rows * cols;
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// An all-zero `rows x cols` matrix.
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0.0; rows.saturating_mul(cols)])
    }

    /// The `n x n` identity.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n).expect("identity extent must be positive");
        for i in 0..n {
            m.data[i + n * i] = 1.0;
        }
        m
    }

    /// Builds a matrix by evaluating `f(row, col)` at every entry.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols).expect("matrix extents must be positive");
        for c in 0..cols {
            for r in 0..rows {
                m.data[r + rows * c] = f(r, c);
            }
        }
        m
    }

    /// Builds a matrix from row-major literal data; handy for tests.
    pub fn from_row_major(rows: usize, cols: usize, row_major: &[f64]) -> Result<Self> {
        if row_major.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                actual: row_major.len(),
            });
        }
        Ok(Self::from_fn(rows, cols, |r, c| row_major[r * cols + c]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// The column-major buffer.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access to the column-major buffer.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        assert!(
            row < self.rows && col < self.cols,
            "matrix index out of range"
        );
        self.data[row + self.rows * col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        assert!(
            row < self.rows && col < self.cols,
            "matrix index out of range"
        );
        self.data[row + self.rows * col] = value;
    }

    /// Materialized transpose.
    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// Dense product `self * rhs`.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::InvalidArgument(format!(
                "matmul shape mismatch: {}x{} times {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, rhs.cols)?;
        gemm_col_major(
            self.rows,
            self.cols,
            rhs.cols,
            &self.data,
            &rhs.data,
            &mut out.data,
        );
        Ok(out)
    }

    /// Dense matrix-vector product `self * x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::LengthMismatch {
                expected: self.cols,
                actual: x.len(),
            });
        }
        let mut y = vec![0.0; self.rows];
        for c in 0..self.cols {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            let col = &self.data[self.rows * c..self.rows * (c + 1)];
            for (yi, &a) in y.iter_mut().zip(col) {
                *yi += a * xc;
            }
        }
        Ok(y)
    }

    /// Largest absolute entry (0 for the all-zero matrix).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()))
    }

    /// Max-norm of `self - rhs`; panics on shape mismatch (test helper).
    pub fn max_abs_diff(&self, rhs: &DenseMatrix) -> f64 {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "shape mismatch"
        );
        self.data
            .iter()
            .zip(&rhs.data)
            .fold(0.0f64, |acc, (&a, &b)| acc.max((a - b).abs()))
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::InvalidArgument(
            "tensor must have at least one dimension".to_string(),
        ));
    }
    if let Some(pos) = dims.iter().position(|&d| d == 0) {
        return Err(Error::InvalidArgument(format!(
            "tensor extents must be positive; extent of mode {pos} is 0"
        )));
    }
    Ok(())
}

/// Advances a multi-index in first-dimension-fastest order.
fn increment_index(idx: &mut [usize], dims: &[usize]) {
    for m in 0..idx.len() {
        idx[m] += 1;
        if idx[m] < dims[m] {
            return;
        }
        idx[m] = 0;
    }
}

/// `C = A * B` for dense column-major buffers: A is m x k, B is k x n.
fn gemm_col_major(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    // SAFETY: the buffers are dense column-major with the exact lengths
    // asserted above, so the strides (1, leading dimension) are in bounds.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            1,
            k as isize,
            0.0,
            c.as_mut_ptr(),
            1,
            m as isize,
        );
    }
}

/// Mode-`mode` unfolding: a `d_mode x (len / d_mode)` matrix whose columns
/// enumerate the remaining dimensions in increasing mode order, the first of
/// them varying fastest.
pub fn unfold(t: &DenseTensor, mode: usize) -> Result<DenseMatrix> {
    let ndim = t.ndim();
    if mode >= ndim {
        return Err(Error::InvalidMode { mode, ndim });
    }
    let d = t.dims[mode];
    let inner: usize = t.dims[..mode].iter().product();
    let outer: usize = t.dims[mode + 1..].iter().product();
    let cols = inner * outer;
    let mut out = DenseMatrix::zeros(d, cols)?;
    for o in 0..outer {
        for j in 0..d {
            let src = inner * (j + d * o);
            let dst_col0 = o * inner;
            for i in 0..inner {
                out.data[j + d * (dst_col0 + i)] = t.data[src + i];
            }
        }
    }
    Ok(out)
}

/// Inverse of [`unfold`]: reshapes a `dims[mode] x (prod of others)` matrix
/// back into a tensor with extents `dims`.
pub fn fold(m: &DenseMatrix, mode: usize, dims: &[usize]) -> Result<DenseTensor> {
    validate_dims(dims)?;
    let ndim = dims.len();
    if mode >= ndim {
        return Err(Error::InvalidMode { mode, ndim });
    }
    let d = dims[mode];
    let inner: usize = dims[..mode].iter().product();
    let outer: usize = dims[mode + 1..].iter().product();
    if m.rows != d || m.cols != inner * outer {
        return Err(Error::LengthMismatch {
            expected: d * inner * outer,
            actual: m.rows * m.cols,
        });
    }
    let mut t = DenseTensor::zeros(dims)?;
    for o in 0..outer {
        for j in 0..d {
            let dst = inner * (j + d * o);
            let src_col0 = o * inner;
            for i in 0..inner {
                t.data[dst + i] = m.data[j + d * (src_col0 + i)];
            }
        }
    }
    Ok(t)
}

/// n-mode product `T x_mode M`: contracts mode `mode` of `T` (extent `d`)
/// with the columns of the `r x d` matrix `M`, producing a tensor whose
/// extent on that mode is `r`.
///
/// Modes 0 and `ndim - 1` are computed as single GEMM calls directly on the
/// tensor buffer; interior modes go through an unfold/GEMM/fold round trip.
pub fn nmode_product(t: &DenseTensor, m: &DenseMatrix, mode: usize) -> Result<DenseTensor> {
    let ndim = t.ndim();
    if mode >= ndim {
        return Err(Error::InvalidMode { mode, ndim });
    }
    if m.cols != t.dims[mode] {
        return Err(Error::ModeShapeMismatch {
            mode,
            operator_cols: m.cols,
            tensor_extent: t.dims[mode],
        });
    }
    let mut out_dims = t.dims.clone();
    out_dims[mode] = m.rows;
    let mut out = DenseTensor::zeros(&out_dims)?;

    if mode == 0 {
        // The buffer is already the mode-0 unfolding: d_0 x (rest).
        let rest: usize = t.dims[1..].iter().product();
        gemm_col_major(m.rows, t.dims[0], rest, &m.data, &t.data, &mut out.data);
        return Ok(out);
    }
    if mode == ndim - 1 {
        // The buffer viewed as (inner x d_last) column-major; right-multiply
        // by M^T without materializing either the unfolding or the transpose.
        let inner: usize = t.dims[..mode].iter().product();
        let d = t.dims[mode];
        // SAFETY: dense buffers with the stated shapes; B = M^T is addressed
        // through strides (rows of B step by m.rows in M's buffer).
        unsafe {
            matrixmultiply::dgemm(
                inner,
                d,
                m.rows,
                1.0,
                t.data.as_ptr(),
                1,
                inner as isize,
                m.data.as_ptr(),
                m.rows as isize,
                1,
                0.0,
                out.data.as_mut_ptr(),
                1,
                inner as isize,
            );
        }
        return Ok(out);
    }

    let unfolded = unfold(t, mode)?;
    let product = m.matmul(&unfolded)?;
    fold(&product, mode, &out_dims)
}

/// Applies one matrix per mode in ascending mode order:
/// `T x_0 M_0 x_1 M_1 ...`. Requires exactly one matrix per mode.
pub fn nmode_product_all(t: &DenseTensor, mats: &[DenseMatrix]) -> Result<DenseTensor> {
    if mats.len() != t.ndim() {
        return Err(Error::InvalidArgument(format!(
            "expected one matrix per mode ({}), got {}",
            t.ndim(),
            mats.len()
        )));
    }
    let mut cur = t.clone();
    for (mode, m) in mats.iter().enumerate() {
        cur = nmode_product(&cur, m, mode)?;
    }
    Ok(cur)
}

/// Kronecker product `A ⊗ B`: block `(i, j)` of the result is `A[i,j] * B`.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = DenseMatrix::zeros(rows, cols).expect("kron extents must be positive");
    for ja in 0..a.cols {
        for jb in 0..b.cols {
            let col = ja * b.cols + jb;
            let dst0 = rows * col;
            for ia in 0..a.rows {
                let scale = a.data[ia + a.rows * ja];
                if scale == 0.0 {
                    continue;
                }
                let row0 = ia * b.rows;
                for ib in 0..b.rows {
                    out.data[dst0 + row0 + ib] += scale * b.data[ib + b.rows * jb];
                }
            }
        }
    }
    out
}

/// Kronecker product of a list of factors combined right-to-left:
/// `mats[n-1] ⊗ ... ⊗ mats[1] ⊗ mats[0]`.
///
/// With factors ordered by the mode they act on, this is exactly the
/// flattened operator matching [`vectorize`]'s element order.
pub fn kron_all_rev(mats: &[DenseMatrix]) -> Result<DenseMatrix> {
    let mut iter = mats.iter().rev();
    let first = iter
        .next()
        .ok_or_else(|| Error::InvalidArgument("kron of an empty factor list".to_string()))?;
    let mut acc = first.clone();
    for m in iter {
        acc = kron(&acc, m);
    }
    Ok(acc)
}

/// Flattens a tensor to a vector in first-dimension-fastest order.
pub fn vectorize(t: &DenseTensor) -> Vec<f64> {
    t.data.clone()
}

/// Rebuilds a tensor from a [`vectorize`]d buffer.
pub fn devectorize(v: Vec<f64>, dims: &[usize]) -> Result<DenseTensor> {
    DenseTensor::new(dims.to_vec(), v)
}
