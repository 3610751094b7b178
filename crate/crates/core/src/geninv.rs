//! Generalized inverses and their conversion to the Moore-Penrose inverse.
//!
//! A (1,2)-inverse `S` of `T` satisfies `TST = T` and `STS = S`; it is
//! determined by a choice of complements to `ker T` and `R(T)` and is
//! generally not the Moore-Penrose inverse. The closed form
//!
//! `T^dag = -P_{ker T^perp} (I + P (I - P - P^*)^{-1}) S (I - Q - Q^*)^{-1}`
//!
//! with `P = I - ST`, `Q = TS` recovers the Moore-Penrose inverse from any
//! such `S`, in the standard metric or with the domain adjoint taken in the
//! graph metric.

use crate::error::{Error, Result};
use crate::graph::GraphSpace;
use crate::linalg::{self, tol_for, LuFactor, SubspaceKind};
use crate::mat::Mat;
use num_complex::Complex64 as C64;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

/// Which inner product the domain-side adjoint `P^*` is taken in.
/// The codomain adjoint `Q^*` is always the standard one.
#[derive(Clone, Copy)]
pub enum Metric<'a> {
    Standard,
    Graph(&'a GraphSpace),
}

/// A generalized inverse `S` of `T` bundled with the idempotents
/// `P = I - ST` (onto `ker T`) and `Q = TS` (onto `R(T)`).
#[derive(Debug, Clone)]
pub struct GenInverseBundle {
    t: Mat,
    s: Mat,
    p: Mat,
    q: Mat,
    tol: f64,
    rank_tol: f64,
}

impl GenInverseBundle {
    /// Validates the (1,2)-inverse identities, the idempotency of `P` and
    /// `Q`, and the complement dimension counts before wrapping.
    pub fn new(t: Mat, s: Mat, rank_tol: f64) -> Result<Self> {
        if s.rows() != t.cols() || s.cols() != t.rows() {
            return Err(Error::DimensionMismatch(format!(
                "generalized inverse of a {}x{} matrix must be {}x{}, got {}x{}",
                t.rows(),
                t.cols(),
                t.cols(),
                t.rows(),
                s.rows(),
                s.cols()
            )));
        }
        let norm_t = linalg::spectral_norm(&t);
        let norm_s = linalg::spectral_norm(&s);
        let tol = tol_for(norm_t.max(norm_s) * norm_t.max(norm_s));
        let st = &s * &t;
        let ts = &t * &s;
        let tst = &ts * &t;
        let sts = &st * &s;
        if linalg::spectral_norm(&(&tst - &t)) > tol {
            return Err(Error::InvalidInput(
                "not a generalized inverse: TST != T".into(),
            ));
        }
        if linalg::spectral_norm(&(&sts - &s)) > tol {
            return Err(Error::InvalidInput(
                "not a generalized inverse: STS != S".into(),
            ));
        }
        let p = &Mat::identity(t.cols()) - &st;
        let q = ts;
        if linalg::spectral_norm(&(&(&p * &p) - &p)) > tol {
            return Err(Error::InvalidInput("P = I - ST is not idempotent".into()));
        }
        if linalg::spectral_norm(&(&(&q * &q) - &q)) > tol {
            return Err(Error::InvalidInput("Q = TS is not idempotent".into()));
        }
        // Complement dimension counts: X = ker T (+) R(S), Y = R(T) (+) ker S.
        let n = t.cols();
        let m = t.rows();
        let rank_t = linalg::numerical_rank(&t, rank_tol);
        let rank_s = linalg::numerical_rank(&s, rank_tol);
        if (n - rank_t) + rank_s != n || rank_t + (m - rank_s) != m {
            return Err(Error::InvalidInput(format!(
                "complement dimension count failed: rank T = {rank_t}, rank S = {rank_s}"
            )));
        }
        Ok(GenInverseBundle {
            t,
            s,
            p,
            q,
            tol,
            rank_tol,
        })
    }

    pub fn t(&self) -> &Mat {
        &self.t
    }

    pub fn geninv(&self) -> &Mat {
        &self.s
    }

    pub fn p(&self) -> &Mat {
        &self.p
    }

    pub fn q(&self) -> &Mat {
        &self.q
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }
}

/// Draws a generically non-Moore-Penrose (1,2)-inverse
/// `S = (I + (I - T^dag T) Z1) T^dag (I + Z2 (I - T T^dag))`
/// with Gaussian `Z1` (n x n) and `Z2` (m x m), validating the bundle and
/// resampling up to 10 times on a degenerate draw.
pub fn random_geninv(t: &Mat, seed: u64, rank_tol: f64) -> Result<GenInverseBundle> {
    if !t.is_finite() {
        return Err(Error::InvalidInput(
            "random_geninv: input has non-finite entries".into(),
        ));
    }
    let (m, n) = t.shape();
    let pinv = linalg::pinv_oracle(t, rank_tol)?;
    let ker_proj = &Mat::identity(n) - &(&pinv * t);
    let coker_proj = &Mat::identity(m) - &(t * &pinv);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let complex = !t.is_real();
    let mut last_err = None;
    for _attempt in 0..10 {
        let z1 = gaussian(n, n, complex, &mut rng);
        let z2 = gaussian(m, m, complex, &mut rng);
        let left = &Mat::identity(n) + &(&ker_proj * &z1);
        let right = &Mat::identity(m) + &(&z2 * &coker_proj);
        let s = &(&left * &pinv) * &right;
        match GenInverseBundle::new(t.clone(), s, rank_tol) {
            Ok(bundle) => return Ok(bundle),
            Err(e) => last_err = Some(e),
        }
    }
    Err(Error::ConstructionFailed {
        attempts: 10,
        reason: format!(
            "random generalized inverse kept failing validation: {}",
            last_err.map(|e| e.to_string()).unwrap_or_default()
        ),
    })
}

fn gaussian(rows: usize, cols: usize, complex: bool, rng: &mut ChaCha8Rng) -> Mat {
    if complex {
        Mat::from_fn(rows, cols, |_, _| {
            C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
        })
    } else {
        Mat::from_fn_real(rows, cols, |_, _| StandardNormal.sample(rng))
    }
}

/// The four Penrose residuals of a candidate inverse `X` of `T`, in spectral
/// norm: `|TXT - T|", |XTX - X|, |(TX)^H - TX|, |(XT)^H - XT|`.
pub fn penrose_residuals(t: &Mat, x: &Mat) -> [f64; 4] {
    let tx = t * x;
    let xt = x * t;
    [
        linalg::spectral_norm(&(&(&tx * t) - t)),
        linalg::spectral_norm(&(&(&xt * x) - x)),
        linalg::spectral_norm(&(&tx.adjoint() - &tx)),
        linalg::spectral_norm(&(&xt.adjoint() - &xt)),
    ]
}

/// Moore-Penrose inverse from a generalized-inverse bundle via the closed
/// form, with the leading `P_{ker T^perp}` factor applied.
pub fn mp_from_geninv(bundle: &GenInverseBundle, metric: Metric<'_>) -> Result<Mat> {
    mp_from_geninv_opts(bundle, metric, true)
}

/// Same closed form without the leading kernel-complement projector. In the
/// standard metric the prefix is redundant; in the graph metric the
/// unprefixed output is the W-weighted pseudoinverse and generally differs.
pub fn mp_from_geninv_unprefixed(bundle: &GenInverseBundle, metric: Metric<'_>) -> Result<Mat> {
    mp_from_geninv_opts(bundle, metric, false)
}

fn mp_from_geninv_opts(
    bundle: &GenInverseBundle,
    metric: Metric<'_>,
    with_prefix: bool,
) -> Result<Mat> {
    let prefix = if with_prefix {
        let kernel = linalg::orthonormal_basis(&bundle.t, SubspaceKind::Kernel, bundle.rank_tol);
        let pk = linalg::projector_onto(&kernel);
        Some(&Mat::identity(bundle.t.cols()) - &pk.mat)
    } else {
        None
    };
    mp_closed_form(
        &bundle.s,
        &bundle.p,
        &bundle.q,
        metric,
        prefix.as_ref(),
        bundle.rank_tol,
    )
}

/// Shared evaluation of `-(prefix)(I + P (I-P-P^*)^{-1}) S (I-Q-Q^*)^{-1}`.
pub(crate) fn mp_closed_form(
    s: &Mat,
    p: &Mat,
    q: &Mat,
    metric: Metric<'_>,
    prefix: Option<&Mat>,
    rank_tol: f64,
) -> Result<Mat> {
    let n = p.rows();
    let m = q.rows();
    let p_star = match metric {
        Metric::Standard => p.adjoint(),
        Metric::Graph(gs) => {
            if gs.domain_dim() != n {
                return Err(Error::DimensionMismatch(format!(
                    "graph space has domain dimension {}, expected {n}",
                    gs.domain_dim()
                )));
            }
            linalg::weighted_adjoint(p, gs.gram(), gs.gram())?
        }
    };
    let mid_dom = &(&Mat::identity(n) - p) - &p_star;
    let mid_cod = &(&Mat::identity(m) - q) - &q.adjoint();

    let lu_cod = invert_guarded(&mid_cod, "I - Q - Q^*", rank_tol)?;
    let x = lu_cod.solve_right(s);
    let lu_dom = invert_guarded(&mid_dom, "I - P - P^*", rank_tol)?;
    let z = lu_dom.solve(&x);
    let y = &x + &(p * &z);
    let out = match prefix {
        Some(pre) => pre * &y,
        None => y,
    };
    Ok(-&out)
}

pub(crate) fn invert_guarded(m: &Mat, factor: &str, rank_tol: f64) -> Result<LuFactor> {
    let sigma_min = linalg::min_singular_value(m);
    let sigma_max = linalg::spectral_norm(m);
    let cond = if sigma_min > 0.0 {
        sigma_max / sigma_min
    } else {
        f64::INFINITY
    };
    if !cond.is_finite() || cond > 1.0 / rank_tol {
        return Err(Error::FormulaBreakdown {
            factor: factor.to_string(),
            cond,
        });
    }
    LuFactor::new(m)
}

/// Moore-Penrose inverse of a product via the closed form
/// `(AB)^dag = P_{ker(AB)^perp} (B^dag C^dag A^dag)
///  {A C C^dag A^dag + (A^dag)^H C C^dag A^H - I}^{-1}`
/// with `C = A^dag A B B^dag`; inner daggers are taken with the SVD oracle.
pub fn mp_of_product(a: &Mat, b: &Mat, rank_tol: f64) -> Result<Mat> {
    if a.cols() != b.rows() {
        return Err(Error::DimensionMismatch(format!(
            "product {}x{} * {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let a_dag = linalg::pinv_oracle(a, rank_tol)?;
    let b_dag = linalg::pinv_oracle(b, rank_tol)?;
    let c = &(&a_dag * a) * &(b * &b_dag);
    let c_dag = linalg::pinv_oracle(&c, rank_tol)?;
    let cc = &c * &c_dag;
    let braced = &(&(&(a * &cc) * &a_dag) + &(&(&a_dag.adjoint() * &cc) * &a.adjoint()))
        - &Mat::identity(a.rows());
    let lu = invert_guarded(&braced, "braced product factor", rank_tol)?;
    let core = &(&b_dag * &c_dag) * &a_dag;
    let solved = lu.solve_right(&core);
    let ab = a * b;
    let kernel = linalg::orthonormal_basis(&ab, SubspaceKind::Kernel, rank_tol);
    let prefix = &Mat::identity(ab.cols()) - &linalg::projector_onto(&kernel).mat;
    Ok(&prefix * &solved)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{default_rank_tol, pinv_oracle};

    fn mat2(rows: [[f64; 2]; 2]) -> Mat {
        Mat::from_row_major_real(2, 2, &[rows[0][0], rows[0][1], rows[1][0], rows[1][1]])
    }

    #[test]
    fn bundle_accepts_hand_checked_examples() {
        // T = diag(2,0), S = [[0.5,1],[1,2]]: TST = T and STS = S by direct
        // multiplication.
        let t = mat2([[2.0, 0.0], [0.0, 0.0]]);
        let s = mat2([[0.5, 1.0], [1.0, 2.0]]);
        assert!(GenInverseBundle::new(t, s, default_rank_tol(2, 2)).is_ok());

        let t = mat2([[1.0, 1.0], [0.0, 0.0]]);
        let s = mat2([[0.5, 1.0], [0.5, 1.0]]);
        assert!(GenInverseBundle::new(t, s, default_rank_tol(2, 2)).is_ok());
    }

    #[test]
    fn bundle_rejects_non_inverse() {
        let t = mat2([[2.0, 0.0], [0.0, 0.0]]);
        let s = mat2([[0.5, 1.0], [1.0, 2.1]]);
        assert!(GenInverseBundle::new(t, s, default_rank_tol(2, 2)).is_err());
    }

    #[test]
    fn penrose_residuals_of_oracle_vanish() {
        let t = mat2([[2.0, 1.0], [0.0, 0.5]]);
        let x = pinv_oracle(&t, default_rank_tol(2, 2)).unwrap();
        let norm_t = linalg::spectral_norm(&t);
        for r in penrose_residuals(&t, &x) {
            assert!(r <= 1e-10 * (1.0 + norm_t));
        }
    }

    #[test]
    fn penrose_residuals_flag_non_mp_inverse() {
        // (1,2)-inverse of diag(2,0) that is not MP: symmetry residuals are 2.
        let t = mat2([[2.0, 0.0], [0.0, 0.0]]);
        let s = mat2([[0.5, 1.0], [1.0, 2.0]]);
        let r = penrose_residuals(&t, &s);
        assert!(r[0] < 1e-12 && r[1] < 1e-12);
        assert!(r[2] > 0.1 && r[3] > 0.1);
    }

    #[test]
    fn penrose_residuals_zero_matrix() {
        let r = penrose_residuals(&Mat::zeros(2, 2), &Mat::zeros(2, 2));
        assert_eq!(r, [0.0; 4]);
    }

    #[test]
    fn mp_from_geninv_invertible_case() {
        let t = mat2([[2.0, 1.0], [1.0, 1.0]]);
        let t_inv = mat2([[1.0, -1.0], [-1.0, 2.0]]);
        let bundle = GenInverseBundle::new(t.clone(), t_inv.clone(), default_rank_tol(2, 2)).unwrap();
        let mp = mp_from_geninv(&bundle, Metric::Standard).unwrap();
        assert!(mp.max_abs_diff(&t_inv) < 1e-12);
    }

    #[test]
    fn mp_from_geninv_hand_evaluated_diag() {
        // Hand evaluation of the closed form gives [[0.5,0],[0,0]].
        let t = mat2([[2.0, 0.0], [0.0, 0.0]]);
        let s = mat2([[0.5, 1.0], [1.0, 2.0]]);
        let bundle = GenInverseBundle::new(t.clone(), s, default_rank_tol(2, 2)).unwrap();
        let expected = mat2([[0.5, 0.0], [0.0, 0.0]]);
        let mp = mp_from_geninv(&bundle, Metric::Standard).unwrap();
        assert!(mp.max_abs_diff(&expected) < 1e-12);
        let oracle = pinv_oracle(&t, default_rank_tol(2, 2)).unwrap();
        assert!(mp.max_abs_diff(&oracle) < 1e-12);
    }

    #[test]
    fn mp_from_geninv_hand_evaluated_rank_one() {
        let t = mat2([[1.0, 1.0], [0.0, 0.0]]);
        let s = mat2([[0.5, 1.0], [0.5, 1.0]]);
        let bundle = GenInverseBundle::new(t.clone(), s, default_rank_tol(2, 2)).unwrap();
        let expected = mat2([[0.5, 0.0], [0.5, 0.0]]);
        let mp = mp_from_geninv(&bundle, Metric::Standard).unwrap();
        assert!(mp.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn graph_metric_agrees_with_standard() {
        let t = mat2([[2.0, 0.0], [0.0, 0.0]]);
        let s = mat2([[0.5, 1.0], [1.0, 2.0]]);
        let gs = GraphSpace::new(&t).unwrap();
        let bundle = GenInverseBundle::new(t.clone(), s, default_rank_tol(2, 2)).unwrap();
        let standard = mp_from_geninv(&bundle, Metric::Standard).unwrap();
        let graph = mp_from_geninv(&bundle, Metric::Graph(&gs)).unwrap();
        assert!(standard.max_abs_diff(&graph) < 1e-10);
    }

    #[test]
    fn unprefixed_standard_still_matches_oracle() {
        let t = mat2([[1.0, 1.0], [0.0, 0.0]]);
        let s = mat2([[0.5, 1.0], [0.5, 1.0]]);
        let bundle = GenInverseBundle::new(t.clone(), s, default_rank_tol(2, 2)).unwrap();
        let mp = mp_from_geninv_unprefixed(&bundle, Metric::Standard).unwrap();
        let oracle = pinv_oracle(&t, default_rank_tol(2, 2)).unwrap();
        assert!(mp.max_abs_diff(&oracle) < 1e-12);
    }

    #[test]
    fn random_geninv_unique_for_invertible() {
        let t = mat2([[2.0, 1.0], [1.0, 1.0]]);
        let t_inv = mat2([[1.0, -1.0], [-1.0, 2.0]]);
        let bundle = random_geninv(&t, 5, default_rank_tol(2, 2)).unwrap();
        assert!(bundle.geninv().max_abs_diff(&t_inv) < 1e-10);
    }

    #[test]
    fn random_geninv_is_generically_not_mp() {
        let t = Mat::from_row_major_real(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let mut non_mp = 0;
        for seed in 0..50 {
            let bundle = random_geninv(&t, seed, default_rank_tol(3, 2)).unwrap();
            let r = penrose_residuals(&t, bundle.geninv());
            if r[2] > 0.01 || r[3] > 0.01 {
                non_mp += 1;
            }
        }
        assert!(non_mp >= 45, "only {non_mp}/50 draws were non-MP");
    }

    #[test]
    fn mp_of_product_trivial_cases() {
        let i = Mat::identity(2);
        let mp = mp_of_product(&i, &i, default_rank_tol(2, 2)).unwrap();
        assert!(mp.max_abs_diff(&i) < 1e-12);

        let a = mat2([[1.0, 0.0], [0.0, 0.0]]);
        let mp = mp_of_product(&a, &i, default_rank_tol(2, 2)).unwrap();
        assert!(mp.max_abs_diff(&a) < 1e-12);
    }

    #[test]
    fn mp_of_product_matches_oracle_on_rank_deficient_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        // A = outer products of rank 2, B of rank 1 so that rank(AB) = 1.
        let u = gaussian(3, 2, true, &mut rng);
        let v = gaussian(2, 3, true, &mut rng);
        let a = &u * &v; // rank 2
        let x = gaussian(3, 1, true, &mut rng);
        let y = gaussian(1, 3, true, &mut rng);
        let b = &x * &y; // rank 1
        let rank_tol = default_rank_tol(3, 3);
        let mp = mp_of_product(&a, &b, rank_tol).unwrap();
        let oracle = pinv_oracle(&(&a * &b), rank_tol).unwrap();
        assert!(linalg::spectral_norm(&(&mp - &oracle)) < 1e-8);
    }
}
