//! Dense row-major tensors and the numeric kernels shared by the tape and
//! the inference path.
//!
//! Everything here is generic over [`Float`] so that the same kernels run in
//! 64-bit mode (training, correctness checks) and 32-bit mode (throughput
//! benchmarking).

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Scalar element type of a [`Tensor`].
pub trait Float:
    Copy
    + Debug
    + Default
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
{
    const ZERO: Self;
    const ONE: Self;
    /// Name used in checkpoint headers and reports.
    const DTYPE: &'static str;

    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn tanh(self) -> Self;
    fn erf(self) -> Self;
    fn is_finite(self) -> bool;

    fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    /// `c = alpha * a·b + beta * c` on strided matrices.
    ///
    /// # Safety
    /// Every pointer/stride combination must address memory inside its
    /// allocation for the given extents, and `c` must not alias `a` or `b`.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Float for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    const DTYPE: &'static str = "f64";

    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn erf(self) -> Self {
        libm::erf(self)
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }

    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

impl Float for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    const DTYPE: &'static str = "f32";

    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn exp(self) -> Self {
        f32::exp(self)
    }
    fn ln(self) -> Self {
        f32::ln(self)
    }
    fn sqrt(self) -> Self {
        f32::sqrt(self)
    }
    fn tanh(self) -> Self {
        f32::tanh(self)
    }
    fn erf(self) -> Self {
        libm::erff(self)
    }
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }

    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc)
    }
}

/// Dense n-dimensional array, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T: Float = f64> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Float> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape("tensor", &shape, &[data.len()]));
        }
        Ok(Self { shape, data })
    }

    pub fn from_vec(data: Vec<T>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn scalar(x: T) -> Self {
        Self {
            shape: vec![],
            data: vec![x],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::ZERO)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, T::ONE)
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> T) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..len).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Extent of the last axis (1 for scalars).
    pub fn last_dim(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    /// Number of rows when viewed as `[len / last_dim, last_dim]`.
    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.last_dim()).unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[T] {
        let n = self.last_dim();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::shape("reshape", &self.shape, shape));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn cast<U: Float>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| U::from_f64(x.to_f64())).collect(),
        }
    }

    pub fn ensure_finite(&self, op: &'static str) -> Result<()> {
        ensure_finite(op, &self.data)
    }

    pub fn max_abs_diff(&self, other: &Tensor<T>) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.to_f64() - b.to_f64()).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn ensure_finite<T: Float>(op: &'static str, data: &[T]) -> Result<()> {
    if data.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { op })
    }
}

/// Borrowed strided matrix view.
#[derive(Clone, Copy)]
pub(crate) struct MatRef<'a, T> {
    pub data: &'a [T],
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub row_stride: usize,
    pub col_stride: usize,
}

impl<'a, T: Float> MatRef<'a, T> {
    pub fn row_major(data: &'a [T], rows: usize, cols: usize) -> Self {
        Self {
            data,
            offset: 0,
            rows,
            cols,
            row_stride: cols,
            col_stride: 1,
        }
    }

    pub fn t(self) -> Self {
        Self {
            rows: self.cols,
            cols: self.rows,
            row_stride: self.col_stride,
            col_stride: self.row_stride,
            ..self
        }
    }

    fn in_bounds(&self) -> bool {
        if self.rows == 0 || self.cols == 0 {
            return true;
        }
        let last = self.offset + (self.rows - 1) * self.row_stride + (self.cols - 1) * self.col_stride;
        last < self.data.len()
    }

    fn skip_rows(self, r: usize, count: usize) -> Self {
        Self {
            offset: self.offset + r * self.row_stride,
            rows: count,
            ..self
        }
    }
}

/// Rows of output handled by one rayon task in [`gemm_into`].
const GEMM_ROW_CHUNK: usize = 64;

/// `out[m×n] = a·b` (or `+=` when `accumulate`), `out` row-major contiguous.
///
/// Work is split over output rows only; each element keeps the same
/// reduction order regardless of thread count.
pub(crate) fn gemm_into<T: Float>(a: MatRef<T>, b: MatRef<T>, out: &mut [T], accumulate: bool) {
    assert_eq!(a.cols, b.rows, "gemm inner extents");
    assert_eq!(out.len(), a.rows * b.cols, "gemm output extent");
    assert!(a.in_bounds() && b.in_bounds(), "gemm view out of bounds");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            out.fill(T::ZERO);
        }
        return;
    }
    let beta = if accumulate { T::ONE } else { T::ZERO };
    let run = |row0: usize, chunk: &mut [T]| {
        let rows = chunk.len() / n;
        let a = a.skip_rows(row0, rows);
        // SAFETY: bounds verified above, chunk is a disjoint slice of `out`.
        unsafe {
            T::gemm(
                rows,
                k,
                n,
                T::ONE,
                a.data.as_ptr().add(a.offset),
                a.row_stride as isize,
                a.col_stride as isize,
                b.data.as_ptr().add(b.offset),
                b.row_stride as isize,
                b.col_stride as isize,
                beta,
                chunk.as_mut_ptr(),
                n as isize,
                1,
            )
        }
    };
    if m > GEMM_ROW_CHUNK && rayon::current_num_threads() > 1 {
        out.par_chunks_mut(GEMM_ROW_CHUNK * n)
            .enumerate()
            .for_each(|(i, chunk)| run(i * GEMM_ROW_CHUNK, chunk));
    } else {
        run(0, out);
    }
}

/// Matrix product. `a` may carry leading batch axes (`[..., k]`); they are
/// flattened into rows and restored on the output.
pub fn matmul<T: Float>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    matmul_impl(a, b, false)
}

/// `a · bᵀ` with `b` of shape `[n×k]`.
pub fn matmul_nt<T: Float>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    matmul_impl(a, b, true)
}

pub(crate) fn matmul_out_shape(a: &[usize], b: &[usize], transpose_b: bool) -> Result<Vec<usize>> {
    let op = if transpose_b { "matmul_nt" } else { "matmul" };
    if a.is_empty() || b.len() != 2 {
        return Err(Error::shape(op, a, b));
    }
    let k = a[a.len() - 1];
    let (bk, n) = if transpose_b { (b[1], b[0]) } else { (b[0], b[1]) };
    if k != bk {
        return Err(Error::shape(op, a, b));
    }
    let mut shape = a.to_vec();
    *shape.last_mut().unwrap() = n;
    Ok(shape)
}

fn matmul_impl<T: Float>(a: &Tensor<T>, b: &Tensor<T>, transpose_b: bool) -> Result<Tensor<T>> {
    let shape = matmul_out_shape(a.shape(), b.shape(), transpose_b)?;
    let k = a.last_dim();
    let m = a.rows();
    let bm = MatRef::row_major(b.data(), b.shape()[0], b.shape()[1]);
    let bm = if transpose_b { bm.t() } else { bm };
    let n = bm.cols;
    let mut out = vec![T::ZERO; m * n];
    gemm_into(MatRef::row_major(a.data(), m, k), bm, &mut out, false);
    ensure_finite("matmul", &out)?;
    Tensor::new(shape, out)
}

/// Splits `shape` around `axis` into `(outer, extent, inner)`.
pub(crate) fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// Numerically stable softmax along `axis`.
pub fn softmax<T: Float>(x: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    if axis >= x.shape().len() || x.shape()[axis] == 0 {
        return Err(Error::Contract(format!(
            "softmax axis {axis} invalid for shape {:?}",
            x.shape()
        )));
    }
    let (outer, n, inner) = axis_split(x.shape(), axis);
    let mut out = vec![T::ZERO; x.len()];
    let src = x.data();
    for o in 0..outer {
        for j in 0..inner {
            let idx = |i: usize| (o * n + i) * inner + j;
            let mut max = src[idx(0)];
            for i in 1..n {
                max = max.max(src[idx(i)]);
            }
            let mut sum = T::ZERO;
            for i in 0..n {
                let e = (src[idx(i)] - max).exp();
                out[idx(i)] = e;
                sum += e;
            }
            for i in 0..n {
                out[idx(i)] /= sum;
            }
        }
    }
    ensure_finite("softmax", &out)?;
    Tensor::new(x.shape().to_vec(), out)
}

/// In-place stable softmax of one contiguous row.
pub(crate) fn softmax_row_in_place<T: Float>(row: &mut [T]) {
    let max = row.iter().copied().fold(row[0], T::max);
    let mut sum = T::ZERO;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Result of a layer-norm forward pass over the last axis.
pub(crate) struct LayerNormOut<T> {
    pub output: Vec<T>,
    pub normalized: Vec<T>,
    pub inv_std: Vec<T>,
}

pub(crate) fn layer_norm_kernel<T: Float>(
    x: &[T],
    width: usize,
    gamma: &[T],
    beta: &[T],
    eps: T,
) -> LayerNormOut<T> {
    let rows = x.len() / width;
    let mut output = vec![T::ZERO; x.len()];
    let mut normalized = vec![T::ZERO; x.len()];
    let mut inv_std = vec![T::ZERO; rows];
    let denom = T::from_f64(width as f64);
    for r in 0..rows {
        let row = &x[r * width..(r + 1) * width];
        let mean = row.iter().copied().sum::<T>() / denom;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / denom;
        let inv = T::ONE / (var + eps).sqrt();
        inv_std[r] = inv;
        for c in 0..width {
            let xh = (row[c] - mean) * inv;
            normalized[r * width + c] = xh;
            output[r * width + c] = xh * gamma[c] + beta[c];
        }
    }
    LayerNormOut {
        output,
        normalized,
        inv_std,
    }
}

/// `(x − μ)/√(σ² + eps)·gamma + beta` over the last axis (population variance).
pub fn layer_norm<T: Float>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: f64,
) -> Result<Tensor<T>> {
    let h = x.last_dim();
    if gamma.shape() != [h] || beta.shape() != [h] {
        return Err(Error::shape("layer_norm", x.shape(), gamma.shape()));
    }
    if eps <= 0.0 {
        return Err(Error::Contract(format!("layer_norm eps must be > 0, got {eps}")));
    }
    let out = layer_norm_kernel(x.data(), h, gamma.data(), beta.data(), T::from_f64(eps)).output;
    ensure_finite("layer_norm", &out)?;
    Tensor::new(x.shape().to_vec(), out)
}

/// Which GELU formula to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum GeluKind {
    /// `x·Φ(x)` with the exact error function.
    #[default]
    #[serde(rename = "gelu")]
    Exact,
    /// The tanh approximation.
    #[serde(rename = "gelu_tanh", alias = "gelu_new")]
    Tanh,
}

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

pub(crate) fn gelu_scalar<T: Float>(x: T, kind: GeluKind) -> T {
    let half = T::from_f64(0.5);
    match kind {
        GeluKind::Exact => x * half * (T::ONE + (x * T::from_f64(std::f64::consts::FRAC_1_SQRT_2)).erf()),
        GeluKind::Tanh => {
            let inner = T::from_f64(SQRT_2_OVER_PI) * (x + T::from_f64(0.044715) * x * x * x);
            half * x * (T::ONE + inner.tanh())
        }
    }
}

/// d/dx gelu(x).
pub(crate) fn gelu_grad_scalar<T: Float>(x: T, kind: GeluKind) -> T {
    let half = T::from_f64(0.5);
    match kind {
        GeluKind::Exact => {
            let cdf = half * (T::ONE + (x * T::from_f64(std::f64::consts::FRAC_1_SQRT_2)).erf());
            let pdf = (-(x * x) * half).exp() * T::from_f64(0.398_942_280_401_432_7);
            cdf + x * pdf
        }
        GeluKind::Tanh => {
            let c = T::from_f64(SQRT_2_OVER_PI);
            let a = T::from_f64(0.044715);
            let inner = c * (x + a * x * x * x);
            let t = inner.tanh();
            let dinner = c * (T::ONE + T::from_f64(3.0) * a * x * x);
            half * (T::ONE + t) + half * x * (T::ONE - t * t) * dinner
        }
    }
}

pub fn gelu<T: Float>(x: &Tensor<T>, kind: GeluKind) -> Result<Tensor<T>> {
    let out: Vec<T> = x.data().iter().map(|&v| gelu_scalar(v, kind)).collect();
    ensure_finite("gelu", &out)?;
    Tensor::new(x.shape().to_vec(), out)
}
