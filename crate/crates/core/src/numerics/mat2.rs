use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Determinant threshold below which a 2×2 matrix is treated as singular.
pub const SINGULAR_DET: f64 = 1e-14;

/// Tolerance on the determinant when checking positive semidefiniteness.
const PSD_TOL: f64 = 1e-12;

pub type Vec2 = [f64; 2];

/// Dense 2×2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Mat2 {
    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Self { a11, a12, a21, a22 }
    }

    pub const fn symmetric(a11: f64, a12: f64, a22: f64) -> Self {
        Self::new(a11, a12, a12, a22)
    }

    pub const fn diag(d1: f64, d2: f64) -> Self {
        Self::new(d1, 0.0, 0.0, d2)
    }

    pub const fn identity() -> Self {
        Self::diag(1.0, 1.0)
    }

    pub const fn zeros() -> Self {
        Self::diag(0.0, 0.0)
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.a11, self.a21, self.a12, self.a22)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(c * self.a11, c * self.a12, c * self.a21, c * self.a22)
    }

    pub fn diagonal(&self) -> Vec2 {
        [self.a11, self.a22]
    }

    pub fn inv(&self) -> Result<Self> {
        let det = self.det();
        if !(det.abs() > SINGULAR_DET) {
            return Err(Error::Singular { det });
        }
        Ok(Self::new(
            self.a22 / det,
            -self.a12 / det,
            -self.a21 / det,
            self.a11 / det,
        ))
    }

    /// Lower Cholesky factor `L` with `L·Lᵀ = self`.
    pub fn chol(&self) -> Result<Self> {
        let det = self.det();
        if !(det > SINGULAR_DET) {
            return Err(Error::Singular { det });
        }
        if !(self.a11 > 0.0) {
            return Err(Error::NotPsd);
        }
        let l11 = self.a11.sqrt();
        let l21 = self.a21 / l11;
        let l22 = (self.a22 - l21 * l21).sqrt();
        Ok(Self::new(l11, 0.0, l21, l22))
    }

    /// Lower-triangular square root that also accepts singular PSD input.
    pub fn psd_factor(&self) -> Result<Self> {
        if !self.is_psd() {
            return Err(Error::NotPsd);
        }
        let l11 = self.a11.max(0.0).sqrt();
        let l21 = if l11 > 0.0 { self.a21 / l11 } else { 0.0 };
        let l22 = (self.a22 - l21 * l21).max(0.0).sqrt();
        Ok(Self::new(l11, 0.0, l21, l22))
    }

    pub fn is_symmetric(&self) -> bool {
        self.a12 == self.a21
    }

    pub fn is_psd(&self) -> bool {
        self.a11 >= 0.0
            && self.a22 >= 0.0
            && self.a11 * self.a22 - self.a12 * self.a21 >= -PSD_TOL
            && self.a11.is_finite()
            && self.a22.is_finite()
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        [self.a11 * v[0] + self.a12 * v[1], self.a21 * v[0] + self.a22 * v[1]]
    }

    /// `vᵀ · self · v`
    pub fn quad_form(&self, v: Vec2) -> f64 {
        let mv = self.mul_vec(v);
        v[0] * mv[0] + v[1] * mv[1]
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.a11 - other.a11)
            .abs()
            .max((self.a12 - other.a12).abs())
            .max((self.a21 - other.a21).abs())
            .max((self.a22 - other.a22).abs())
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a11 + o.a11, self.a12 + o.a12, self.a21 + o.a21, self.a22 + o.a22)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a11 - o.a11, self.a12 - o.a12, self.a21 - o.a21, self.a22 - o.a22)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }
}

impl std::iter::Sum for Mat2 {
    fn sum<I: Iterator<Item = Mat2>>(iter: I) -> Mat2 {
        iter.fold(Mat2::zeros(), |acc, m| acc + m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_inverse_and_chol() {
        let i = Mat2::identity();
        assert_eq!(i.inv().unwrap(), i);
        assert_eq!(i.chol().unwrap(), i);
    }

    #[test]
    fn chol_of_diagonal() {
        let l = Mat2::diag(4.0, 9.0).chol().unwrap();
        assert_eq!(l, Mat2::diag(2.0, 3.0));
    }

    #[test]
    fn singular_reports_determinant() {
        let m = Mat2::new(1.0, 2.0, 2.0, 4.0);
        match m.inv() {
            Err(Error::Singular { det }) => assert_eq!(det, 0.0),
            other => panic!("expected singular error, got {other:?}"),
        }
        assert!(matches!(m.chol(), Err(Error::Singular { .. })));
    }

    #[test]
    fn psd_factor_accepts_zero_matrix() {
        assert_eq!(Mat2::zeros().psd_factor().unwrap(), Mat2::zeros());
        assert!(Mat2::symmetric(1.0, 2.0, 1.0).psd_factor().is_err());
    }

    fn spd() -> impl Strategy<Value = Mat2> {
        (0.1f64..10.0, 0.1f64..10.0, -0.95f64..0.95)
            .prop_map(|(s1, s2, r)| Mat2::symmetric(s1 * s1, r * s1 * s2, s2 * s2))
    }

    proptest! {
        #[test]
        fn chol_reconstructs(m in spd()) {
            let l = m.chol().unwrap();
            prop_assert_eq!(l.a12, 0.0);
            // direct multiplication oracle
            let llt = Mat2::new(
                l.a11 * l.a11,
                l.a11 * l.a21,
                l.a21 * l.a11,
                l.a21 * l.a21 + l.a22 * l.a22,
            );
            prop_assert!(llt.max_abs_diff(&m) <= 1e-12 * m.a11.max(m.a22).max(1.0));
        }

        #[test]
        fn inverse_is_inverse(m in spd()) {
            let prod = m * m.inv().unwrap();
            prop_assert!(prod.max_abs_diff(&Mat2::identity()) < 1e-10);
            let back = m.inv().unwrap().inv().unwrap();
            prop_assert!(back.max_abs_diff(&m) < 1e-9);
        }
    }
}
