//! Affine maps `x -> W x + b` on column vectors. Sample batches are stored as
//! matrices with one sample per column.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl AffineMap {
    pub fn new(w: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if !w.is_square() || w.nrows() != b.len() {
            return Err(Error::arg(format!(
                "affine map needs a square matrix matching the offset, got {}x{} and {}",
                w.nrows(),
                w.ncols(),
                b.len()
            )));
        }
        Ok(AffineMap { w, b })
    }

    pub fn identity(d: usize) -> Self {
        AffineMap {
            w: DMatrix::identity(d, d),
            b: DVector::zeros(d),
        }
    }

    pub fn linear(w: DMatrix<f64>) -> Self {
        let d = w.nrows();
        AffineMap {
            w,
            b: DVector::zeros(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.w * x + &self.b
    }

    pub fn apply_batch(&self, xs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = &self.w * xs;
        for mut col in out.column_iter_mut() {
            col += &self.b;
        }
        out
    }

    /// `self ∘ inner`, i.e. apply `inner` first.
    pub fn after(&self, inner: &AffineMap) -> AffineMap {
        AffineMap {
            w: &self.w * &inner.w,
            b: &self.w * &inner.b + &self.b,
        }
    }

    pub fn inverse(&self) -> Result<AffineMap> {
        let w_inv = self
            .w
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Conditioning("affine map has a singular linear part".into()))?;
        let b = -(&w_inv * &self.b);
        Ok(AffineMap { w: w_inv, b })
    }

    /// `self⁻¹ ∘ inner`, solved by LU without forming the inverse.
    pub fn solve_after(&self, inner: &AffineMap) -> Result<AffineMap> {
        let lu = self.w.clone().full_piv_lu();
        let singular = || Error::Conditioning("affine map has a singular linear part".into());
        let w = lu.solve(&inner.w).ok_or_else(singular)?;
        let b = lu.solve(&(&inner.b - &self.b)).ok_or_else(singular)?;
        Ok(AffineMap { w, b })
    }

    pub fn singular_values(&self) -> DVector<f64> {
        self.w.singular_values()
    }

    /// Lipschitz constant, the largest singular value of `W`.
    pub fn op_norm(&self) -> f64 {
        self.singular_values().max()
    }

    pub fn min_singular_value(&self) -> f64 {
        self.singular_values().min()
    }

    /// Max absolute entry difference over both `W` and `b`.
    pub fn max_abs_diff(&self, other: &AffineMap) -> f64 {
        let dw = (&self.w - &other.w).amax();
        let db = (&self.b - &other.b).amax();
        dw.max(db)
    }

    pub fn to_data(&self) -> AffineData {
        AffineData {
            w: self.w.row_iter().map(|r| r.iter().copied().collect()).collect(),
            b: self.b.iter().copied().collect(),
        }
    }
}

/// Row-major serialized form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineData {
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl TryFrom<AffineData> for AffineMap {
    type Error = Error;

    fn try_from(data: AffineData) -> Result<Self> {
        let d = data.b.len();
        if data.w.len() != d || data.w.iter().any(|r| r.len() != d) {
            return Err(Error::arg(format!("W must be {d}x{d} to match b")));
        }
        let w = DMatrix::from_row_iterator(d, d, data.w.into_iter().flatten());
        AffineMap::new(w, DVector::from_vec(data.b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> AffineMap {
        AffineMap::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 1.0]),
            DVector::from_vec(vec![1.0, -1.0]),
        )
        .unwrap()
    }

    #[test]
    fn inverse_round_trips() {
        let m = sample();
        let inv = m.inverse().unwrap();
        let x = DVector::from_vec(vec![0.3, -0.7]);
        assert!((inv.apply(&m.apply(&x)) - &x).amax() < 1e-12);
        assert!(m.after(&inv).max_abs_diff(&AffineMap::identity(2)) < 1e-12);
    }

    #[test]
    fn composition_matches_sequential_application() {
        let m = sample();
        let n = AffineMap::new(
            DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.5]),
            DVector::from_vec(vec![0.2, 0.0]),
        )
        .unwrap();
        let x = DVector::from_vec(vec![1.5, 2.0]);
        assert!((n.after(&m).apply(&x) - n.apply(&m.apply(&x))).amax() < 1e-12);
    }

    #[test]
    fn batch_matches_columns() {
        let m = sample();
        let xs = DMatrix::from_column_slice(2, 3, &[1.0, 0.0, 0.0, 1.0, -2.0, 3.0]);
        let ys = m.apply_batch(&xs);
        for j in 0..3 {
            assert!((ys.column(j) - m.apply(&xs.column(j).into_owned())).amax() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_rejected() {
        let m = AffineMap::linear(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]));
        assert!(matches!(m.inverse(), Err(Error::Conditioning(_))));
    }

    #[test]
    fn data_round_trip_is_row_major() {
        let m = sample();
        let data = m.to_data();
        assert_eq!(data.w, vec![vec![2.0, 1.0], vec![0.0, 1.0]]);
        assert_eq!(AffineMap::try_from(data).unwrap(), m);
    }

    #[test]
    fn norms() {
        let m = AffineMap::linear(DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 0.5])));
        assert!((m.op_norm() - 3.0).abs() < 1e-12);
        assert!((m.min_singular_value() - 0.5).abs() < 1e-12);
    }
}
