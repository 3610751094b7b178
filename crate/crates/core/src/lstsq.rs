//! Perturbation theory for least-squares problems `Tx = b`.
//!
//! The least-squares solutions of `Tx = b` form the affine set
//! `S(T, b) = { T^dag b + (I - T^dag T) z }`. For a stable perturbation
//! `(Tbar, bbar)`, each solution of one problem can be paired with a solution
//! of the other so that the distance between them is controlled by the
//! residual of the starting solution, and the minimum-norm solutions satisfy
//! a combined data-perturbation bound.

use crate::error::{Error, Result};
use crate::linalg::{self, orthonormal_basis, spectral_norm, Subspace, SubspaceKind};
use crate::mat::Mat;
use crate::perturb::{stability_predicates, BoundRow, PerturbationInstance, GOLDEN};

/// A least-squares perturbation problem: an operator perturbation instance
/// plus right-hand sides `b` and `bbar = b + db`.
pub struct LsqProblem<'a> {
    inst: &'a PerturbationInstance,
    b: Mat,
    db: Mat,
    bbar: Mat,
}

impl<'a> LsqProblem<'a> {
    pub fn new(inst: &'a PerturbationInstance, b: Mat, db: Mat) -> Result<Self> {
        let m = inst.t().rows();
        for (name, v) in [("b", &b), ("db", &db)] {
            if v.rows() != m || v.cols() != 1 {
                return Err(Error::DimensionMismatch(format!(
                    "{name} must be {m}x1, got {}x{}",
                    v.rows(),
                    v.cols()
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} has non-finite entries")));
            }
        }
        let bbar = &b + &db;
        Ok(LsqProblem { inst, b, db, bbar })
    }

    pub fn instance(&self) -> &PerturbationInstance {
        self.inst
    }

    pub fn b(&self) -> &Mat {
        &self.b
    }

    pub fn db(&self) -> &Mat {
        &self.db
    }

    pub fn bbar(&self) -> &Mat {
        &self.bbar
    }

    fn require_stable(&self) -> Result<()> {
        let report = stability_predicates(self.inst)?;
        if !report.all_hold() {
            return Err(Error::NotStable(format!(
                "least-squares pairing requires a stable perturbation (class: {})",
                report.class.as_str()
            )));
        }
        Ok(())
    }
}

/// Affine representation of the least-squares solution set of `Tx = b`:
/// the minimum-norm solution plus an orthonormal kernel basis.
pub struct SolutionSet {
    pub particular: Mat,
    pub kernel_basis: Subspace,
}

/// Minimum-norm least-squares solution `T^dag b` with the kernel of `T`.
pub fn min_norm_solution(t: &Mat, b: &Mat, rank_tol: f64) -> Result<SolutionSet> {
    if b.rows() != t.rows() || b.cols() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "b must be {}x1, got {}x{}",
            t.rows(),
            b.rows(),
            b.cols()
        )));
    }
    let pinv = linalg::pinv_oracle(t, rank_tol)?;
    Ok(SolutionSet {
        particular: &pinv * b,
        kernel_basis: orthonormal_basis(t, SubspaceKind::Kernel, rank_tol),
    })
}

/// A solution of one problem paired with a constructed solution of the other,
/// the certified distance bound, and the membership residual of the
/// constructed solution (scaled normal-equations residual).
pub struct SolutionPair {
    pub x: Mat,
    pub xbar: Mat,
    pub bound: BoundRow,
    pub membership_residual: f64,
}

/// From `x = T^dag b + (I - T^dag T) z` in `S(T, b)`, constructs
/// `xbar = Tbar^dag bbar + (I - Tbar^dag Tbar) x` in `S(Tbar, bbar)` with
/// `|xbar - x| <= |Tbar^dag| |(b - Tx) + (db - dT x)|`.
pub fn forward_pair(p: &LsqProblem<'_>, z: &Mat) -> Result<SolutionPair> {
    p.require_stable()?;
    let inst = p.instance();
    let x = solution_from_parameter(inst.t(), inst.pinv_t(), p.b(), z)?;
    let xbar = solution_from_parameter(inst.tbar(), inst.pinv_tbar_oracle(), p.bbar(), &x)?;

    let lhs = (&xbar - &x).norm2();
    let residual = &(&(p.b() - &(inst.t() * &x)) + p.db()) - &(inst.dt() * &x);
    let rhs = spectral_norm(inst.pinv_tbar_oracle()) * residual.norm2();
    let bound = BoundRow::inequality("theorem41_forward", lhs, rhs);
    let membership_residual = normal_eq_residual(inst.tbar(), &xbar, p.bbar());
    Ok(SolutionPair {
        x,
        xbar,
        bound,
        membership_residual,
    })
}

/// Symmetric construction from `xbar in S(Tbar, bbar)` to `x in S(T, b)` with
/// `|xbar - x| <= |T^dag| |(bbar - Tbar xbar) - (db - dT xbar)|`.
pub fn backward_pair(p: &LsqProblem<'_>, z: &Mat) -> Result<SolutionPair> {
    p.require_stable()?;
    let inst = p.instance();
    let xbar = solution_from_parameter(inst.tbar(), inst.pinv_tbar_oracle(), p.bbar(), z)?;
    let x = solution_from_parameter(inst.t(), inst.pinv_t(), p.b(), &xbar)?;

    let lhs = (&xbar - &x).norm2();
    let residual = &(p.bbar() - &(inst.tbar() * &xbar)) - &(p.db() - &(inst.dt() * &xbar));
    let rhs = spectral_norm(inst.pinv_t()) * residual.norm2();
    let bound = BoundRow::inequality("theorem41_backward", lhs, rhs);
    let membership_residual = normal_eq_residual(inst.t(), &x, p.b());
    Ok(SolutionPair {
        x,
        xbar,
        bound,
        membership_residual,
    })
}

/// Combined data-perturbation bound on `|Tbar^dag bbar - T^dag b|`.
///
/// Returns the bound in two variants: the one stated with the second term
/// carrying `(1 + |T^dag|^2)^{1/2}`, reported for comparison only, and the
/// derivable variant with the full first power, which is the asserted row
/// (chaining the norm bound into the difference bound yields the full power,
/// and only re-derivable inequalities are asserted).
pub fn solution_bounds(p: &LsqProblem<'_>) -> Result<(BoundRow, BoundRow)> {
    p.require_stable()?;
    let inst = p.instance();
    let lhs = (&(inst.pinv_tbar_oracle() * p.bbar()) - &(inst.pinv_t() * p.b())).norm2();

    let m0 = &Mat::identity(inst.t().rows()) + &(inst.dt() * inst.pinv_t());
    let inv_norm = {
        let sigma_min = linalg::min_singular_value(&m0);
        if sigma_min < inst.rank_tol() {
            return Err(Error::NotInvertible { sigma_min });
        }
        1.0 / sigma_min
    };
    let np = spectral_norm(inst.pinv_t());
    let dt_norm_t = inst.graph_space().t_norm_dom(inst.dt())?;
    let norm_b = p.b().norm2();
    let norm_db = p.db().norm2();
    let first_term = inv_norm * (np * np + 1.0).sqrt() * norm_db;

    let as_printed = BoundRow::context(
        "theorem42_as_printed",
        lhs,
        first_term + GOLDEN * inv_norm * dt_norm_t * (1.0 + np * np).sqrt() * norm_b,
    );
    let derived_safe = BoundRow::inequality(
        "theorem42_derived_safe",
        lhs,
        first_term + GOLDEN * inv_norm * dt_norm_t * (1.0 + np * np) * norm_b,
    );
    Ok((as_printed, derived_safe))
}

fn solution_from_parameter(t: &Mat, pinv: &Mat, b: &Mat, z: &Mat) -> Result<Mat> {
    if z.rows() != t.cols() || z.cols() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "parameter z must be {}x1, got {}x{}",
            t.cols(),
            z.rows(),
            z.cols()
        )));
    }
    let particular = pinv * b;
    let kernel_part = z - &(pinv * &(t * z));
    Ok(&particular + &kernel_part)
}

/// Scaled normal-equations residual `|T^H (T x - b)| / (1 + |T| |b|)`.
pub fn normal_eq_residual(t: &Mat, x: &Mat, b: &Mat) -> f64 {
    let r = &(t * x) - b;
    let num = (&t.adjoint() * &r).norm2();
    num / (1.0 + spectral_norm(t) * b.norm2())
}

/// Membership test against the tolerance used throughout the ledger.
pub fn is_least_squares_solution(t: &Mat, x: &Mat, b: &Mat) -> bool {
    normal_eq_residual(t, x, b) <= 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{default_rank_tol, tol_for};
    use crate::perturb::InstanceOptions;

    fn instance(t: Mat, dt: Mat) -> PerturbationInstance {
        PerturbationInstance::new(t, dt, InstanceOptions::default()).unwrap()
    }

    #[test]
    fn min_norm_identity_case() {
        let t = Mat::identity(2);
        let b = Mat::col_from_real(&[3.0, -1.0]);
        let sol = min_norm_solution(&t, &b, default_rank_tol(2, 2)).unwrap();
        assert!(sol.particular.max_abs_diff(&b) < 1e-14);
        assert!(sol.kernel_basis.is_trivial());
    }

    #[test]
    fn min_norm_rank_deficient_diag() {
        let t = Mat::from_row_major_real(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let b = Mat::col_from_real(&[1.0, 1.0]);
        let sol = min_norm_solution(&t, &b, default_rank_tol(2, 2)).unwrap();
        assert!(sol.particular.max_abs_diff(&Mat::col_from_real(&[1.0, 0.0])) < 1e-14);
        assert_eq!(sol.kernel_basis.dim(), 1);
    }

    #[test]
    fn min_norm_rank_one_row() {
        // T^dag b with T^dag = [[0.5,0],[0.5,0]] gives (1,1).
        let t = Mat::from_row_major_real(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let b = Mat::col_from_real(&[2.0, 3.0]);
        let sol = min_norm_solution(&t, &b, default_rank_tol(2, 2)).unwrap();
        assert!(sol.particular.max_abs_diff(&Mat::col_from_real(&[1.0, 1.0])) < 1e-13);
        // Normal equations hold and the particular solution is kernel-orthogonal.
        assert!(is_least_squares_solution(&t, &sol.particular, &b));
        let k = sol.kernel_basis.basis();
        assert!((&k.adjoint() * &sol.particular).norm2() < 1e-12);
    }

    #[test]
    fn forward_pair_unperturbed_is_identity_at_zero_parameter() {
        let t = Mat::from_row_major_real(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let inst = instance(t, Mat::zeros(2, 2));
        let p = LsqProblem::new(&inst, Mat::col_from_real(&[1.0, 2.0]), Mat::zeros(2, 1)).unwrap();
        let z = Mat::zeros(2, 1);
        let pair = forward_pair(&p, &z).unwrap();
        assert!(pair.bound.lhs < 1e-14);
        assert!(pair.bound.holds);
        assert!(pair.membership_residual < 1e-12);
    }

    #[test]
    fn forward_pair_pure_data_perturbation_attains_equality() {
        // T = I: S(T, b) is a singleton and |xbar - x| = |db|.
        let inst = instance(Mat::identity(2), Mat::zeros(2, 2));
        let db = Mat::col_from_real(&[0.3, -0.4]);
        let p = LsqProblem::new(&inst, Mat::col_from_real(&[1.0, 1.0]), db).unwrap();
        let pair = forward_pair(&p, &Mat::zeros(2, 1)).unwrap();
        assert!((pair.bound.lhs - 0.5).abs() < 1e-13);
        assert!((pair.bound.rhs - 0.5).abs() < 1e-13);
        assert!(pair.bound.holds);
    }

    #[test]
    fn backward_pair_diagonal_example() {
        let t = Mat::from_row_major_real(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let dt = Mat::from_row_major_real(2, 2, &[0.1, 0.0, 0.0, 0.0]);
        let inst = instance(t, dt);
        let p = LsqProblem::new(&inst, Mat::col_from_real(&[1.0, 0.0]), Mat::zeros(2, 1)).unwrap();
        let pair = backward_pair(&p, &Mat::zeros(2, 1)).unwrap();
        // xbar = (1/1.1, 0), x = (1, 0).
        assert!(pair
            .xbar
            .max_abs_diff(&Mat::col_from_real(&[1.0 / 1.1, 0.0]))
            < 1e-13);
        assert!(pair.x.max_abs_diff(&Mat::col_from_real(&[1.0, 0.0])) < 1e-13);
        assert!(pair.bound.holds);
        assert!(pair.membership_residual < 1e-12);
    }

    #[test]
    fn solution_bounds_diagonal_example() {
        let t = Mat::from_row_major_real(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let dt = Mat::from_row_major_real(2, 2, &[0.1, 0.0, 0.0, 0.0]);
        let inst = instance(t, dt);
        let p = LsqProblem::new(&inst, Mat::col_from_real(&[1.0, 0.0]), Mat::zeros(2, 1)).unwrap();
        let (as_printed, derived_safe) = solution_bounds(&p).unwrap();
        assert!((derived_safe.lhs - (1.0 - 1.0 / 1.1)).abs() < 1e-12);
        assert!(derived_safe.holds);
        // For this instance even the printed variant holds; only record it.
        assert!(as_printed.rhs >= as_printed.lhs);
    }

    #[test]
    fn zero_perturbation_bounds_vanish() {
        let inst = instance(Mat::identity(2), Mat::zeros(2, 2));
        let p = LsqProblem::new(&inst, Mat::col_from_real(&[1.0, -1.0]), Mat::zeros(2, 1)).unwrap();
        let (as_printed, derived_safe) = solution_bounds(&p).unwrap();
        assert!(derived_safe.lhs < 1e-14 && derived_safe.holds);
        assert!(as_printed.lhs < 1e-14);
    }

    #[test]
    fn pairing_requires_stability() {
        let t = Mat::from_row_major_real(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let dt = Mat::from_row_major_real(2, 2, &[0.0, 0.0, 0.0, 0.5]);
        let inst = instance(t, dt);
        let p = LsqProblem::new(&inst, Mat::col_from_real(&[1.0, 0.0]), Mat::zeros(2, 1)).unwrap();
        assert!(matches!(
            forward_pair(&p, &Mat::zeros(2, 1)),
            Err(Error::NotStable(_))
        ));
    }

    #[test]
    fn minimum_norm_property() {
        let t = Mat::from_row_major_real(2, 3, &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let b = Mat::col_from_real(&[2.0, 1.0]);
        let sol = min_norm_solution(&t, &b, default_rank_tol(2, 3)).unwrap();
        let base = sol.particular.norm2();
        for s in [-2.0, -0.5, 0.3, 1.7] {
            for j in 0..sol.kernel_basis.dim() {
                let shifted = &sol.particular + &sol.kernel_basis.basis().column(j).scale_re(s);
                assert!(base <= shifted.norm2() + 1e-12);
            }
        }
    }

    #[test]
    fn membership_tolerance_is_scaled() {
        let t = Mat::from_row_major_real(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let b = Mat::col_from_real(&[2.0, 3.0]);
        let x = Mat::col_from_real(&[1.0, 1.0]);
        assert!(normal_eq_residual(&t, &x, &b) < tol_for(0.0));
        let not_sol = Mat::col_from_real(&[5.0, 1.0]);
        assert!(!is_least_squares_solution(&t, &not_sol, &b));
    }
}
