//! Graph inner product and graph norms on the domain of an operator.
//!
//! For a matrix `T`, the domain carries the inner product
//! `(x, y)_T = (x, y) + (Tx, Ty)`, whose Gram matrix is `W = I + T^H T`.
//! Every supremum-type operator norm relative to this metric reduces to a
//! spectral norm after substituting `y = W^{1/2} x`, which is how the
//! routines here compute them.

use crate::error::{Error, Result};
use crate::linalg::{self};
use crate::mat::Mat;
use num_complex::Complex64 as C64;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

/// The domain of `T` equipped with the Gram matrix `W = I + T^H T` and its
/// Hermitian square root and inverse square root.
#[derive(Debug, Clone)]
pub struct GraphSpace {
    t: Mat,
    w: Mat,
    w_half: Mat,
    w_half_inv: Mat,
}

impl GraphSpace {
    /// Builds the graph space of `T`.
    ///
    /// `W` always has eigenvalues >= 1, so the Hermitian eigendecomposition
    /// used for the square roots is well-conditioned; eigenvalues are floored
    /// at `rank_tol` purely as a guard.
    pub fn new(t: &Mat) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::InvalidInput(
                "graph space: operator has non-finite entries".into(),
            ));
        }
        let n = t.cols();
        let w = &Mat::identity(n) + &(&t.adjoint() * t);
        let (vals, vecs) = linalg::eigh(&w)?;
        let rank_tol = linalg::default_rank_tol(n, n);
        let floor = rank_tol;
        let half: Vec<f64> = vals.iter().map(|&l| l.max(floor).sqrt()).collect();
        let w_half = symmetric_from_eigs(&vecs, &half);
        let inv_half: Vec<f64> = half.iter().map(|&s| 1.0 / s).collect();
        let w_half_inv = symmetric_from_eigs(&vecs, &inv_half);
        Ok(GraphSpace {
            t: t.clone(),
            w,
            w_half,
            w_half_inv,
        })
    }

    pub fn operator(&self) -> &Mat {
        &self.t
    }

    pub fn gram(&self) -> &Mat {
        &self.w
    }

    pub fn gram_half(&self) -> &Mat {
        &self.w_half
    }

    pub fn gram_half_inv(&self) -> &Mat {
        &self.w_half_inv
    }

    pub fn domain_dim(&self) -> usize {
        self.t.cols()
    }

    /// Both graph norms of a vector: `norm_T = (|x|^2 + |Tx|^2)^{1/2}` and
    /// `norm_G = |x| + |Tx|`.
    pub fn graph_norms(&self, x: &Mat) -> Result<(f64, f64)> {
        if x.rows() != self.domain_dim() || x.cols() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "graph_norms expects a {}x1 vector, got {}x{}",
                self.domain_dim(),
                x.rows(),
                x.cols()
            )));
        }
        let nx = x.norm2();
        let ntx = (&self.t * x).norm2();
        Ok(((nx * nx + ntx * ntx).sqrt(), nx + ntx))
    }

    /// Operator norm of `dT` as a map out of the graph space:
    /// `sup_x |dT x| / |x|_T = |dT W^{-1/2}|_2`, computed exactly via the
    /// metric substitution.
    pub fn t_norm_dom(&self, dt: &Mat) -> Result<f64> {
        if dt.cols() != self.domain_dim() {
            return Err(Error::DimensionMismatch(format!(
                "t_norm_dom: operator has {} columns, domain dimension is {}",
                dt.cols(),
                self.domain_dim()
            )));
        }
        Ok(linalg::spectral_norm(&(dt * &self.w_half_inv)))
    }

    /// Operator norm of `S` as a map into the graph space:
    /// `sup_y |S y|_T / |y| = |W^{1/2} S|_2`.
    pub fn t_norm_cod(&self, s: &Mat) -> Result<f64> {
        if s.rows() != self.domain_dim() {
            return Err(Error::DimensionMismatch(format!(
                "t_norm_cod: operator has {} rows, domain dimension is {}",
                s.rows(),
                self.domain_dim()
            )));
        }
        Ok(linalg::spectral_norm(&(&self.w_half * s)))
    }

    /// Checks the relative bound `|dT x| <= a |x| + b |T x|` on `samples`
    /// random unit vectors plus the extremal directions of `dT` in the graph
    /// metric (mapped top singular vectors of `dT W^{-1/2}`).
    pub fn t_bound_certificate(
        &self,
        dt: &Mat,
        a: f64,
        b: f64,
        samples: usize,
        seed: u64,
    ) -> Result<TBoundCertificate> {
        if dt.cols() != self.domain_dim() {
            return Err(Error::DimensionMismatch(format!(
                "t_bound_certificate: operator has {} columns, domain dimension is {}",
                dt.cols(),
                self.domain_dim()
            )));
        }
        if a < 0.0 || b < 0.0 {
            return Err(Error::InvalidInput(
                "t_bound_certificate: constants a, b must be nonnegative".into(),
            ));
        }
        let n = self.domain_dim();
        let complex = !(dt.is_real() && self.t.is_real());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        let mut holds = true;

        let check = |x: &Mat, worst: &mut f64, holds: &mut bool| {
            let num = (dt * x).norm2();
            let den = a * x.norm2() + b * (&self.t * x).norm2();
            let ratio = if den <= f64::MIN_POSITIVE {
                if num <= linalg::ATOL {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                num / den
            };
            if ratio > *worst {
                *worst = ratio;
            }
            if !(num <= den * (1.0 + 1e-10) + 1e-12) {
                *holds = false;
            }
        };

        for _ in 0..samples {
            let x = random_unit_vector(n, complex, &mut rng);
            check(&x, &mut worst, &mut holds);
        }

        // Extremal directions: top singular vectors v of dT W^{-1/2}, mapped
        // back through x = W^{-1/2} v.
        let mapped = dt * &self.w_half_inv;
        if mapped.norm_fro() > 0.0 {
            let svd = linalg::svd_full(&mapped);
            let top = svd.rank(linalg::default_rank_tol(mapped.rows(), mapped.cols())).min(3);
            for j in 0..top {
                let v = svd.v.column(j);
                let x = &self.w_half_inv * &v;
                let norm = x.norm2();
                if norm > 0.0 {
                    check(&x.scale_re(1.0 / norm), &mut worst, &mut holds);
                }
            }
        }

        Ok(TBoundCertificate {
            a,
            b,
            holds,
            worst_ratio: worst,
        })
    }
}

/// Outcome of a `|dT x| <= a |x| + b |T x|` certificate check.
#[derive(Debug, Clone, Copy)]
pub struct TBoundCertificate {
    pub a: f64,
    pub b: f64,
    pub holds: bool,
    pub worst_ratio: f64,
}

fn symmetric_from_eigs(vecs: &Mat, scaled: &[f64]) -> Mat {
    let n = vecs.rows();
    let scaled_vecs = Mat::from_fn(n, n, |i, j| vecs.get(i, j) * scaled[j]);
    // V diag(s) V^H is Hermitian by construction.
    &scaled_vecs * &vecs.adjoint()
}

pub(crate) fn random_unit_vector(n: usize, complex: bool, rng: &mut ChaCha8Rng) -> Mat {
    loop {
        let v = if complex {
            Mat::from_fn(n, 1, |_, _| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                C64::new(re, im)
            })
        } else {
            Mat::from_fn_real(n, 1, |_, _| StandardNormal.sample(rng))
        };
        let norm = v.norm2();
        if norm > 1e-6 {
            return v.scale_re(1.0 / norm);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{spectral_norm, tol_for};

    #[test]
    fn zero_operator_gives_identity_gram() {
        let gs = GraphSpace::new(&Mat::zeros(2, 2)).unwrap();
        assert!(gs.gram().max_abs_diff(&Mat::identity(2)) < 1e-14);
        let x = Mat::col_from_real(&[0.6, 0.8]);
        let (nt, ng) = gs.graph_norms(&x).unwrap();
        assert!((nt - 1.0).abs() < 1e-14);
        assert!((ng - 1.0).abs() < 1e-14);
    }

    #[test]
    fn diag_gram_and_roots() {
        // T = diag(2,0): W = diag(5,1), W^{1/2} = diag(sqrt5, 1).
        let t = Mat::from_row_major_real(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let gs = GraphSpace::new(&t).unwrap();
        let w_expected = Mat::from_row_major_real(2, 2, &[5.0, 0.0, 0.0, 1.0]);
        assert!(gs.gram().max_abs_diff(&w_expected) < 1e-12);
        let wh_expected = Mat::from_row_major_real(2, 2, &[5.0f64.sqrt(), 0.0, 0.0, 1.0]);
        assert!(gs.gram_half().max_abs_diff(&wh_expected) < 1e-12);
        assert!(
            (gs.gram_half() * gs.gram_half_inv())
                .max_abs_diff(&Mat::identity(2))
                < 1e-12
        );
    }

    #[test]
    fn gram_of_rank_one_row() {
        // T = [[1,1],[0,0]]: W = I + T^H T = [[2,1],[1,2]].
        let t = Mat::from_row_major_real(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let gs = GraphSpace::new(&t).unwrap();
        let w_expected = Mat::from_row_major_real(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!(gs.gram().max_abs_diff(&w_expected) < 1e-12);
        assert!(
            (gs.gram_half() * gs.gram_half()).max_abs_diff(&w_expected) < 1e-11
        );
    }

    #[test]
    fn graph_norms_identity_operator() {
        let gs = GraphSpace::new(&Mat::identity(2)).unwrap();
        let e1 = Mat::col_from_real(&[1.0, 0.0]);
        let (nt, ng) = gs.graph_norms(&e1).unwrap();
        assert!((nt - 2.0f64.sqrt()).abs() < 1e-14);
        assert!((ng - 2.0).abs() < 1e-14);
    }

    #[test]
    fn t_norm_dom_examples() {
        // T = 0 reduces to the plain spectral norm.
        let gs = GraphSpace::new(&Mat::zeros(2, 2)).unwrap();
        let dt = Mat::from_row_major_real(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        assert!((gs.t_norm_dom(&dt).unwrap() - 3.0).abs() < 1e-12);

        // dT = T = diag(2,0): sup sigma/sqrt(1+sigma^2) = 2/sqrt(5).
        let t = Mat::from_row_major_real(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let gs = GraphSpace::new(&t).unwrap();
        let expected = 2.0 / 5.0f64.sqrt();
        assert!((gs.t_norm_dom(&t).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn t_norm_cod_examples() {
        let gs = GraphSpace::new(&Mat::zeros(2, 2)).unwrap();
        let s = Mat::from_row_major_real(2, 2, &[0.0, 2.0, 0.0, 0.0]);
        assert!((gs.t_norm_cod(&s).unwrap() - 2.0).abs() < 1e-12);

        // T = diag(2,0), S = diag(0.5, 0): |W^{1/2} S| = sqrt(5)/2.
        let t = Mat::from_row_major_real(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let gs = GraphSpace::new(&t).unwrap();
        let s = Mat::from_row_major_real(2, 2, &[0.5, 0.0, 0.0, 0.0]);
        assert!((gs.t_norm_cod(&s).unwrap() - 5.0f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn certificate_zero_perturbation() {
        let t = Mat::from_row_major_real(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let gs = GraphSpace::new(&t).unwrap();
        let cert = gs
            .t_bound_certificate(&Mat::zeros(2, 2), 0.5, 0.5, 50, 7)
            .unwrap();
        assert!(cert.holds);
        assert_eq!(cert.worst_ratio, 0.0);
    }

    #[test]
    fn certificate_equality_case() {
        // dT = T with (a,b) = (0,1) holds with worst ratio 1.
        let t = Mat::from_row_major_real(2, 2, &[2.0, 0.0, 0.0, 0.7]);
        let gs = GraphSpace::new(&t).unwrap();
        let cert = gs.t_bound_certificate(&t, 0.0, 1.0, 100, 11).unwrap();
        assert!(cert.holds);
        assert!((cert.worst_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn certificate_detects_violation_at_kernel_direction() {
        // T = diag(2,0), dT = I, (a,b) = (0,1): x = e2 gives |dT x| = 1 > 0.
        let t = Mat::from_row_major_real(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let gs = GraphSpace::new(&t).unwrap();
        let cert = gs
            .t_bound_certificate(&Mat::identity(2), 0.0, 1.0, 20, 3)
            .unwrap();
        assert!(!cert.holds);
        assert!(cert.worst_ratio.is_infinite());
    }

    #[test]
    fn norm_equivalence_sandwich_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..200 {
            let n = 2 + (trial % 5);
            let m = 2 + (trial % 4);
            let t = Mat::from_fn(m, n, |_, _| {
                C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
            });
            let gs = GraphSpace::new(&t).unwrap();
            let x = random_unit_vector(n, true, &mut rng);
            let (nt, ng) = gs.graph_norms(&x).unwrap();
            assert!(nt <= ng + 1e-12);
            assert!(nt >= ng * std::f64::consts::FRAC_1_SQRT_2 - 1e-12);
        }
    }

    #[test]
    fn t_norm_dom_is_suprenum_of_sampled_ratios() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = Mat::from_fn(3, 4, |_, _| {
            C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        });
        let dt = Mat::from_fn(3, 4, |_, _| {
            C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        });
        let gs = GraphSpace::new(&t).unwrap();
        let sup = gs.t_norm_dom(&dt).unwrap();
        for _ in 0..500 {
            let x = random_unit_vector(4, true, &mut rng);
            let (nt, _) = gs.graph_norms(&x).unwrap();
            let ratio = (&dt * &x).norm2() / nt;
            assert!(ratio <= sup + 1e-9);
        }
        // Equality is attained at the mapped top right singular vector.
        let svd = linalg::svd_full(&(&dt * gs.gram_half_inv()));
        let x = gs.gram_half_inv() * &svd.v.column(0);
        let (nt, _) = gs.graph_norms(&x).unwrap();
        let ratio = (&dt * &x).norm2() / nt;
        assert!((ratio - sup).abs() < 1e-8);
    }

    #[test]
    fn cod_norm_sandwich_for_pinv() {
        // |T^+|^2 <= |T^+|_T^2 <= |T^+|^2 + |T T^+|^2 on random instances.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let t = Mat::from_fn(4, 3, |_, _| {
                C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
            });
            let gs = GraphSpace::new(&t).unwrap();
            let pinv = linalg::pinv_oracle(&t, linalg::default_rank_tol(4, 3)).unwrap();
            let lhs = spectral_norm(&pinv);
            let mid = gs.t_norm_cod(&pinv).unwrap();
            let proj = spectral_norm(&(&t * &pinv));
            assert!(lhs * lhs <= mid * mid + tol_for(lhs * lhs));
            assert!(mid * mid <= lhs * lhs + proj * proj + tol_for(lhs * lhs + proj * proj));
        }
    }
}
