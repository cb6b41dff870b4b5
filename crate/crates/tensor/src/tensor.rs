//! Dense row-major tensors. The model only ever needs rank 2 (vectors are
//! `1 x n` rows), so the shape is stored as `[rows, cols]`.

use crate::error::TensorError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: S) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must match shape");
        Self { rows, cols, data }
    }

    /// A `1 x 1` tensor.
    pub fn scalar(value: S) -> Self {
        Self::from_vec(1, 1, vec![value])
    }

    /// A `1 x n` row vector.
    pub fn row(data: Vec<S>) -> Self {
        Self {
            rows: 1,
            cols: data.len(),
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape_string(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn at(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: S) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row_slice(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// The single element of a `1 x 1` tensor.
    pub fn item(&self) -> Result<S, TensorError> {
        if self.len() == 1 {
            Ok(self.data[0])
        } else {
            Err(TensorError::NotScalar(self.shape_string()))
        }
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(S, S) -> S) -> Self {
        debug_assert!(self.same_shape(other));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert!(self.same_shape(other));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
    }

    pub fn sum(&self) -> S {
        self.data.iter().copied().sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Index of the largest element (first on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &x) in self.data.iter().enumerate() {
            if x > self.data[best] {
                best = i;
            }
        }
        best
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.at(r, c));
            }
        }
        out
    }
}

/// `a (r x k) * b (k x c)`, plain ikj loop.
pub fn matmul<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Tensor<S> {
    debug_assert_eq!(a.cols, b.rows);
    let (r, k, c) = (a.rows, a.cols, b.cols);
    let mut out = Tensor::zeros(r, c);
    for i in 0..r {
        for p in 0..k {
            let aip = a.data[i * k + p];
            if aip == S::zero() {
                continue;
            }
            let brow = &b.data[p * c..(p + 1) * c];
            let orow = &mut out.data[i * c..(i + 1) * c];
            for j in 0..c {
                orow[j] = orow[j] + aip * brow[j];
            }
        }
    }
    out
}

/// `a (r x k) * b^T` where `b` is `(c x k)`.
pub fn matmul_nt<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Tensor<S> {
    debug_assert_eq!(a.cols, b.cols);
    let (r, k, c) = (a.rows, a.cols, b.rows);
    let mut out = Tensor::zeros(r, c);
    for i in 0..r {
        let arow = &a.data[i * k..(i + 1) * k];
        for j in 0..c {
            let brow = &b.data[j * k..(j + 1) * k];
            let mut acc = S::zero();
            for p in 0..k {
                acc = acc + arow[p] * brow[p];
            }
            out.data[i * c + j] = acc;
        }
    }
    out
}

/// `a^T (k x r) * b (k x c)` computed without materializing the transpose.
pub fn matmul_tn<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Tensor<S> {
    debug_assert_eq!(a.rows, b.rows);
    let (r, k, c) = (a.cols, a.rows, b.cols);
    let mut out = Tensor::zeros(r, c);
    for p in 0..k {
        let arow = &a.data[p * r..(p + 1) * r];
        let brow = &b.data[p * c..(p + 1) * c];
        for i in 0..r {
            let aip = arow[i];
            if aip == S::zero() {
                continue;
            }
            let orow = &mut out.data[i * c..(i + 1) * c];
            for j in 0..c {
                orow[j] = orow[j] + aip * brow[j];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_matmul() {
        let eye = Tensor::from_vec(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let a = Tensor::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(matmul(&eye, &a), a);
    }

    #[test]
    fn transposed_variants_agree() {
        let a = Tensor::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Tensor::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let ab = matmul(&a, &b);
        assert_eq!(matmul_nt(&a, &b.transpose()), ab);
        assert_eq!(matmul_tn(&a.transpose(), &b), ab);
    }

    #[test]
    fn argmax_first_on_ties() {
        let t = Tensor::<f64>::row(vec![1.0, 3.0, 3.0, 2.0]);
        assert_eq!(t.argmax(), 1);
    }
}
