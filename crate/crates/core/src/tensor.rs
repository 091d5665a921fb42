//! Dense rank-2 tensor over f64. Vectors are 1xN rows by convention; scalars
//! are 1x1. This is the plain value type; differentiable ops live on the
//! [`crate::tape::Tape`].

use crate::error::{Error, Result};
use ndarray::{concatenate, Array2, Axis};

pub const NORM_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    a: Array2<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            a: Array2::zeros((rows, cols)),
        }
    }

    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::BadDataLength {
                len: data.len(),
                rows,
                cols,
            });
        }
        Ok(Tensor {
            a: Array2::from_shape_vec((rows, cols), data).expect("length checked"),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |v| v.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::BadDataLength {
                    len: row.len(),
                    rows: r,
                    cols: c,
                });
            }
            data.extend_from_slice(row);
        }
        Tensor::from_flat(r, c, data)
    }

    pub fn row_vec(v: &[f64]) -> Self {
        Tensor::from_flat(1, v.len(), v.to_vec()).expect("consistent")
    }

    pub fn col_vec(v: &[f64]) -> Self {
        Tensor::from_flat(v.len(), 1, v.to_vec()).expect("consistent")
    }

    pub fn scalar(v: f64) -> Self {
        Tensor::from_flat(1, 1, vec![v]).expect("consistent")
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        Tensor {
            a: Array2::from_elem((rows, cols), v),
        }
    }

    pub fn identity(n: usize) -> Self {
        Tensor { a: Array2::eye(n) }
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.len() == 1
    }

    pub fn scalar_value(&self) -> Result<f64> {
        if !self.is_scalar() {
            return Err(Error::BadShape {
                op: "scalar_value",
                expected: "a single element",
                rows: self.rows(),
                cols: self.cols(),
            });
        }
        Ok(self.a[(0, 0)])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[(i, j)] = v;
    }

    /// Row-major contiguous data.
    pub fn data(&self) -> &[f64] {
        self.a.as_slice().expect("tensors are standard layout")
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        self.a.as_slice_mut().expect("tensors are standard layout")
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data()[i * c..(i + 1) * c]
    }

    pub fn is_finite(&self) -> bool {
        self.data().iter().all(|v| v.is_finite())
    }

    fn check_same_shape(&self, other: &Tensor, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                op,
                lhs_rows: self.rows(),
                lhs_cols: self.cols(),
                rhs_rows: other.rows(),
                rhs_cols: other.cols(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.check_same_shape(other, "add")?;
        Ok(Tensor { a: &self.a + &other.a })
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.check_same_shape(other, "sub")?;
        Ok(Tensor { a: &self.a - &other.a })
    }

    pub fn mul_elem(&self, other: &Tensor) -> Result<Tensor> {
        self.check_same_shape(other, "mul_elem")?;
        Ok(Tensor { a: &self.a * &other.a })
    }

    pub fn scale(&self, c: f64) -> Tensor {
        Tensor { a: &self.a * c }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            a: self.a.mapv(&f),
        }
    }

    /// self += c * other, used by gradient accumulation and the optimizer.
    pub fn add_assign_scaled(&mut self, other: &Tensor, c: f64) -> Result<()> {
        self.check_same_shape(other, "add_assign_scaled")?;
        self.a.scaled_add(c, &other.a);
        Ok(())
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols() != other.rows() {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs_rows: self.rows(),
                lhs_cols: self.cols(),
                rhs_rows: other.rows(),
                rhs_cols: other.cols(),
            });
        }
        Ok(Tensor {
            a: self.a.dot(&other.a),
        })
    }

    pub fn transpose(&self) -> Tensor {
        Tensor {
            a: self.a.t().as_standard_layout().to_owned(),
        }
    }

    pub fn reshape(&self, rows: usize, cols: usize) -> Result<Tensor> {
        Tensor::from_flat(rows, cols, self.data().to_vec())
    }

    pub fn sum(&self) -> f64 {
        self.a.sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.data().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Plain (non-differentiable) unit normalization; errors on near-zero input.
    pub fn l2_normalized(&self) -> Result<Tensor> {
        let n = self.l2_norm();
        if n <= NORM_EPS {
            return Err(Error::NearZeroNorm(n));
        }
        Ok(self.scale(1.0 / n))
    }

    pub fn gather_rows(&self, indices: &[usize]) -> Result<Tensor> {
        for &i in indices {
            if i >= self.rows() {
                return Err(Error::InvalidId {
                    kind: "row",
                    id: i,
                    count: self.rows(),
                });
            }
        }
        let mut data = Vec::with_capacity(indices.len() * self.cols());
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Tensor::from_flat(indices.len(), self.cols(), data)
    }

    pub fn concat_rows(parts: &[&Tensor]) -> Result<Tensor> {
        let views: Vec<_> = parts.iter().map(|t| t.a.view()).collect();
        concatenate(Axis(0), &views).map(|a| Tensor { a }).map_err(|_| {
            Error::BadShape {
                op: "concat_rows",
                expected: "parts with equal column counts",
                rows: parts.len(),
                cols: 0,
            }
        })
    }

    pub fn concat_cols(parts: &[&Tensor]) -> Result<Tensor> {
        let views: Vec<_> = parts.iter().map(|t| t.a.view()).collect();
        let a = concatenate(Axis(1), &views).map_err(|_| Error::BadShape {
            op: "concat_cols",
            expected: "parts with equal row counts",
            rows: parts.len(),
            cols: 0,
        })?;
        Ok(Tensor {
            a: a.as_standard_layout().to_owned(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let i3 = Tensor::identity(3);
        assert_eq!(i3.matmul(&a).unwrap(), a);
    }

    #[test]
    fn matmul_shape_error_reports_both_shapes() {
        let a = Tensor::zeros(2, 3);
        let b = Tensor::zeros(2, 3);
        let err = a.matmul(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3"), "{msg}");
    }

    #[test]
    fn gather_rows_permutation() {
        let m = Tensor::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 5.0]]).unwrap();
        let g = m.gather_rows(&[2, 0]).unwrap();
        assert_eq!(g.row(0), &[4.0, 5.0]);
        assert_eq!(g.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn normalize_three_four_five() {
        let v = Tensor::row_vec(&[3.0, 4.0]);
        let n = v.l2_normalized().unwrap();
        assert!((n.get(0, 0) - 0.6).abs() < 1e-15);
        assert!((n.get(0, 1) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn normalize_zero_errors() {
        let v = Tensor::row_vec(&[0.0, 0.0]);
        assert!(matches!(v.l2_normalized(), Err(Error::NearZeroNorm(_))));
    }

    #[test]
    fn concat_and_transpose() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let b = Tensor::from_rows(&[vec![3.0, 4.0]]).unwrap();
        let v = Tensor::concat_rows(&[&a, &b]).unwrap();
        assert_eq!(v.shape(), (2, 2));
        let h = Tensor::concat_cols(&[&a, &b]).unwrap();
        assert_eq!(h.shape(), (1, 4));
        assert_eq!(h.data(), &[1.0, 2.0, 3.0, 4.0]);
        let t = v.transpose();
        assert_eq!(t.get(0, 1), 3.0);
    }
}
