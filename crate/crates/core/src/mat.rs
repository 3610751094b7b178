//! Dense matrix carrier.
//!
//! All public semantics are complex double-precision; matrices whose entries
//! are exactly real are stored in a packed real representation and dispatched
//! to real kernels internally. Results of mixed operations are promoted to
//! complex. Vectors are n-by-1 matrices.

use faer::Mat as FMat;
use num_complex::Complex64 as C64;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone)]
pub(crate) enum Repr {
    Real(FMat<f64>),
    Complex(FMat<C64>),
}

/// Dense matrix of complex scalars, row-major in its public interface.
#[derive(Debug, Clone)]
pub struct Mat {
    pub(crate) repr: Repr,
}

fn promote(r: &FMat<f64>) -> FMat<C64> {
    FMat::from_fn(r.nrows(), r.ncols(), |i, j| C64::new(r[(i, j)], 0.0))
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            repr: Repr::Real(FMat::zeros(rows, cols)),
        }
    }

    pub fn identity(n: usize) -> Self {
        Mat {
            repr: Repr::Real(FMat::identity(n, n)),
        }
    }

    pub fn from_fn_real(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        Mat {
            repr: Repr::Real(FMat::from_fn(rows, cols, f)),
        }
    }

    /// Builds from a complex-valued closure; all-real data (every imaginary
    /// part with zero bit pattern) collapses to the real representation.
    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        let m: FMat<C64> = FMat::from_fn(rows, cols, f);
        Self::from_complex_faer(m)
    }

    /// Row-major construction with realness detection.
    pub fn from_row_major(rows: usize, cols: usize, data: &[C64]) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length");
        Self::from_fn(rows, cols, |i, j| data[i * cols + j])
    }

    pub fn from_row_major_real(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length");
        Self::from_fn_real(rows, cols, |i, j| data[i * cols + j])
    }

    /// Column vector (n-by-1).
    pub fn col_from_complex(data: &[C64]) -> Self {
        Self::from_row_major(data.len(), 1, data)
    }

    pub fn col_from_real(data: &[f64]) -> Self {
        Self::from_row_major_real(data.len(), 1, data)
    }

    pub(crate) fn from_complex_faer(m: FMat<C64>) -> Self {
        let all_real = (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].im.to_bits() == 0));
        if all_real {
            Mat {
                repr: Repr::Real(FMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re)),
            }
        } else {
            Mat {
                repr: Repr::Complex(m),
            }
        }
    }

    pub(crate) fn from_real_faer(m: FMat<f64>) -> Self {
        Mat { repr: Repr::Real(m) }
    }

    pub fn rows(&self) -> usize {
        match &self.repr {
            Repr::Real(m) => m.nrows(),
            Repr::Complex(m) => m.nrows(),
        }
    }

    pub fn cols(&self) -> usize {
        match &self.repr {
            Repr::Real(m) => m.ncols(),
            Repr::Complex(m) => m.ncols(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    /// True when the packed representation is real (imaginary parts all zero).
    pub fn is_real(&self) -> bool {
        matches!(self.repr, Repr::Real(_))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        match &self.repr {
            Repr::Real(m) => C64::new(m[(i, j)], 0.0),
            Repr::Complex(m) => m[(i, j)],
        }
    }

    pub fn is_finite(&self) -> bool {
        match &self.repr {
            Repr::Real(m) => {
                (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].is_finite()))
            }
            Repr::Complex(m) => (0..m.ncols()).all(|j| {
                (0..m.nrows()).all(|i| m[(i, j)].re.is_finite() && m[(i, j)].im.is_finite())
            }),
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Mat {
        match &self.repr {
            Repr::Real(m) => Mat::from_real_faer(m.transpose().to_owned()),
            Repr::Complex(m) => Mat {
                repr: Repr::Complex(m.adjoint().to_owned()),
            },
        }
    }

    pub fn scale_re(&self, s: f64) -> Mat {
        match &self.repr {
            Repr::Real(m) => Mat::from_real_faer(m * faer::Scale(s)),
            Repr::Complex(m) => Mat {
                repr: Repr::Complex(m * faer::Scale(C64::new(s, 0.0))),
            },
        }
    }

    pub fn scale(&self, s: C64) -> Mat {
        if s.im == 0.0 {
            return self.scale_re(s.re);
        }
        let c = self.to_complex_faer();
        Mat {
            repr: Repr::Complex(&c * faer::Scale(s)),
        }
    }

    pub fn norm_fro(&self) -> f64 {
        match &self.repr {
            Repr::Real(m) => m.norm_l2(),
            Repr::Complex(m) => m.norm_l2(),
        }
    }

    pub fn norm_max(&self) -> f64 {
        match &self.repr {
            Repr::Real(m) => m.norm_max(),
            Repr::Complex(m) => m.norm_max(),
        }
    }

    /// Euclidean norm, intended for column vectors but defined as Frobenius.
    pub fn norm2(&self) -> f64 {
        self.norm_fro()
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff shape");
        (self - other).norm_max()
    }

    pub fn to_row_major_vec(&self) -> Vec<C64> {
        let (r, c) = self.shape();
        let mut out = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                out.push(self.get(i, j));
            }
        }
        out
    }

    /// Inner product y^H x of two column vectors.
    pub fn inner(&self, y: &Mat) -> C64 {
        assert_eq!(self.cols(), 1);
        assert_eq!(y.cols(), 1);
        assert_eq!(self.rows(), y.rows());
        let p = &y.adjoint() * self;
        p.get(0, 0)
    }

    pub(crate) fn to_complex_faer(&self) -> FMat<C64> {
        match &self.repr {
            Repr::Real(m) => promote(m),
            Repr::Complex(m) => m.clone(),
        }
    }

    /// Horizontal concatenation.
    pub fn hstack(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows(), other.rows(), "hstack rows");
        let (r, c1) = self.shape();
        let c2 = other.cols();
        match (&self.repr, &other.repr) {
            (Repr::Real(a), Repr::Real(b)) => Mat::from_real_faer(FMat::from_fn(r, c1 + c2, |i, j| {
                if j < c1 {
                    a[(i, j)]
                } else {
                    b[(i, j - c1)]
                }
            })),
            _ => {
                let a = self.to_complex_faer();
                let b = other.to_complex_faer();
                Mat {
                    repr: Repr::Complex(FMat::from_fn(r, c1 + c2, |i, j| {
                        if j < c1 {
                            a[(i, j)]
                        } else {
                            b[(i, j - c1)]
                        }
                    })),
                }
            }
        }
    }

    /// Copy of columns `[start, start+count)`.
    pub fn columns(&self, start: usize, count: usize) -> Mat {
        assert!(start + count <= self.cols(), "column range");
        match &self.repr {
            Repr::Real(m) => {
                Mat::from_real_faer(FMat::from_fn(m.nrows(), count, |i, j| m[(i, start + j)]))
            }
            Repr::Complex(m) => Mat {
                repr: Repr::Complex(FMat::from_fn(m.nrows(), count, |i, j| m[(i, start + j)])),
            },
        }
    }

    pub fn column(&self, j: usize) -> Mat {
        self.columns(j, 1)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&Mat> for &Mat {
            type Output = Mat;
            fn $method(self, rhs: &Mat) -> Mat {
                match (&self.repr, &rhs.repr) {
                    (Repr::Real(a), Repr::Real(b)) => Mat::from_real_faer(a $op b),
                    (Repr::Real(a), Repr::Complex(b)) => Mat {
                        repr: Repr::Complex(&promote(a) $op b),
                    },
                    (Repr::Complex(a), Repr::Real(b)) => Mat {
                        repr: Repr::Complex(a $op &promote(b)),
                    },
                    (Repr::Complex(a), Repr::Complex(b)) => Mat {
                        repr: Repr::Complex(a $op b),
                    },
                }
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl Neg for &Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        self.scale_re(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn realness_detection_and_promotion() {
        let r = Mat::from_row_major(2, 2, &[C64::new(1.0, 0.0); 4]);
        assert!(r.is_real());
        let c = Mat::from_row_major(2, 2, &[
            C64::new(1.0, 0.0),
            C64::new(0.0, 1.0),
            C64::new(0.0, 0.0),
            C64::new(2.0, 0.0),
        ]);
        assert!(!c.is_real());
        let p = &r * &c;
        assert!(!p.is_real());
        assert_eq!(p.get(0, 1), C64::new(2.0, 1.0));
    }

    #[test]
    fn negative_zero_imag_stays_complex() {
        let m = Mat::from_row_major(1, 1, &[C64::new(1.0, -0.0)]);
        assert!(!m.is_real());
        assert_eq!(m.get(0, 0).im.to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn adjoint_conjugates() {
        let m = Mat::from_row_major(1, 2, &[C64::new(1.0, 2.0), C64::new(3.0, -4.0)]);
        let a = m.adjoint();
        assert_eq!(a.shape(), (2, 1));
        assert_eq!(a.get(0, 0), C64::new(1.0, -2.0));
        assert_eq!(a.get(1, 0), C64::new(3.0, 4.0));
    }

    #[test]
    fn matmul_real_fast_path_matches_complex() {
        let a = Mat::from_row_major_real(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Mat::from_row_major_real(3, 2, &[1.0, 0.5, -1.0, 2.0, 0.0, 1.0]);
        let ab = &a * &b;
        assert!(ab.is_real());
        let ac = Mat {
            repr: Repr::Complex(a.to_complex_faer()),
        };
        let bc = Mat {
            repr: Repr::Complex(b.to_complex_faer()),
        };
        let ab2 = &ac * &bc;
        assert!(ab.max_abs_diff(&ab2) < 1e-14);
    }

    #[test]
    fn hstack_and_columns() {
        let a = Mat::identity(2);
        let b = Mat::from_row_major_real(2, 1, &[5.0, 6.0]);
        let h = a.hstack(&b);
        assert_eq!(h.shape(), (2, 3));
        assert_eq!(h.get(1, 2), C64::new(6.0, 0.0));
        let c = h.columns(1, 2);
        assert_eq!(c.get(0, 0), C64::new(0.0, 0.0));
        assert_eq!(c.get(0, 1), C64::new(5.0, 0.0));
    }
}
