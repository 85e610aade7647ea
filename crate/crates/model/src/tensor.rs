//! Dense row-major 2-D tensors and the matrix-multiply backend.

use scengen_core::Scalar;

/// Floating point types the model can run in: a [`Scalar`] with a GEMM kernel.
pub trait Element: Scalar {
    /// `c = alpha * op(a) * op(b) + beta * c`, where `op` optionally transposes.
    ///
    /// `a` is stored `m×k` (or `k×m` when `transpose_a`), `b` is `k×n` (or `n×k`), `c` is `m×n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        transpose_a: bool,
        b: &[Self],
        transpose_b: bool,
        beta: Self,
        c: &mut [Self],
    );
}

/// (row, column) strides of the logical operand for a row-major buffer `stored_cols` wide.
fn strides(stored_cols: usize, transpose: bool) -> (isize, isize) {
    if transpose {
        (1, stored_cols as isize)
    } else {
        (stored_cols as isize, 1)
    }
}

macro_rules! impl_element {
    ($t:ty, $kernel:path) => {
        impl Element for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                transpose_a: bool,
                b: &[Self],
                transpose_b: bool,
                beta: Self,
                c: &mut [Self],
            ) {
                assert_eq!(a.len(), m * k, "gemm: lhs size");
                assert_eq!(b.len(), k * n, "gemm: rhs size");
                assert_eq!(c.len(), m * n, "gemm: output size");
                if m == 0 || n == 0 {
                    return;
                }
                // Stored widths: a is m×k unless transposed (then k×m); likewise for b.
                let (rsa, csa) = strides(if transpose_a { m } else { k }, transpose_a);
                let (rsb, csb) = strides(if transpose_b { k } else { n }, transpose_b);
                // SAFETY: the slices have exactly the sizes implied by the dimensions and strides
                // checked above, and `c` does not alias `a` or `b` (distinct borrows).
                unsafe {
                    $kernel(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
            }
        }
    };
}

impl_element!(f32, matrixmultiply::sgemm);
impl_element!(f64, matrixmultiply::dgemm);

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Element> Tensor<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, v: T) -> Self {
        Self { rows, cols, data: vec![v; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "tensor data does not match {rows}x{cols}");
        Self { rows, cols, data }
    }

    pub fn from_f64(rows: usize, cols: usize, data: &[f64]) -> Self {
        Self::from_vec(rows, cols, data.iter().map(|&v| T::of(v)).collect())
    }

    pub fn scalar(v: T) -> Self {
        Self { rows: 1, cols: 1, data: vec![v] }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        t
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale_assign(&mut self, s: T) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn norm_sq(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// `op(self) · op(other)`.
    pub fn matmul(&self, transpose_self: bool, other: &Self, transpose_other: bool) -> Self {
        let (m, k) = if transpose_self { (self.cols, self.rows) } else { (self.rows, self.cols) };
        let (k2, n) = if transpose_other { (other.cols, other.rows) } else { (other.rows, other.cols) };
        assert_eq!(k, k2, "matmul inner dimensions {:?} x {:?}", self.shape(), other.shape());
        let mut out = Self::zeros(m, n);
        T::gemm(m, k, n, T::one(), &self.data, transpose_self, &other.data, transpose_other, T::zero(), &mut out.data);
        out
    }

    pub fn cast<U: Element>(&self) -> Tensor<U> {
        Tensor { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| U::of(v.as_f64())).collect() }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.as_f64()).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
