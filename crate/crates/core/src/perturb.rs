//! Stable-perturbation analysis of the Moore-Penrose inverse.
//!
//! Given `T` and a perturbation `dT`, the perturbed operator `Tbar = T + dT`
//! is a stable perturbation when `R(Tbar)` meets `ker T^dag` trivially. Under
//! that condition (checked here through five equivalent predicates) the
//! operator `G = T^dag (I + dT T^dag)^{-1}` is a generalized inverse of
//! `Tbar` with the same range and kernel as `T^dag`, the closed form
//!
//! `Tbar^dag = -P_{ker Tbar^perp} (I + Pbar (I - Pbar - Pbar^*)^{-1}) G
//!             (I - Tbar G - (Tbar G)^*)^{-1}`
//!
//! recovers the perturbed Moore-Penrose inverse, and a ledger of norm, gap
//! and difference bounds can be certified numerically.

use crate::error::{Error, Result};
use crate::geninv::{mp_closed_form, Metric};
use crate::graph::GraphSpace;
use crate::linalg::{
    self, bound_holds, orthonormalize_cols, projector_onto, spectral_norm, tol_for, LuFactor,
    Subspace,
};
use crate::mat::Mat;

/// Golden-ratio constant `(1 + sqrt 5) / 2` from the difference bound.
pub const GOLDEN: f64 = 1.618033988749894848204586834365638118;

/// Ambient dimension up to which the one-sided-gap / projector-norm identity
/// is cross-checked inside `gap_hat` (exact spectral norms are available
/// there; above it the estimator noise would exceed the check's tolerance).
const GAP_CHECK_CUTOFF: usize = 512;

/// One-sided gap `delta(M, N) = sup { dist(mu, N) : mu in M, |mu| = 1 }`,
/// computed as `|(I - P_N) B_M|_2` and clamped to [0, 1].
pub fn gap(m: &Subspace, n: &Subspace) -> Result<f64> {
    if m.ambient_dim() != n.ambient_dim() {
        return Err(Error::DimensionMismatch(format!(
            "gap: ambient dimensions {} and {}",
            m.ambient_dim(),
            n.ambient_dim()
        )));
    }
    if m.is_trivial() {
        return Ok(0.0);
    }
    if n.is_trivial() {
        return Ok(1.0);
    }
    let bm = m.basis();
    let bn = n.basis();
    let resid = bm - &(bn * &(&bn.adjoint() * bm));
    Ok(spectral_norm(&resid).clamp(0.0, 1.0))
}

/// Symmetric gap `max(delta(M,N), delta(N,M))`; equals `|P_M - P_N|_2`.
/// The projector identity is cross-checked at small ambient dimension.
pub fn gap_hat(m: &Subspace, n: &Subspace) -> Result<f64> {
    let d1 = gap(m, n)?;
    let d2 = gap(n, m)?;
    let g = d1.max(d2);
    if m.ambient_dim() <= GAP_CHECK_CUTOFF {
        let pd = projector_diff_norm(m, n)?;
        assert!(
            (g - pd).abs() <= 1e-10 * (1.0 + g),
            "gap_hat / projector-norm identity violated: max gap {g}, |P_M - P_N| = {pd}"
        );
    }
    Ok(g)
}

/// Spectral norm of `P_M - P_N`.
pub fn projector_diff_norm(m: &Subspace, n: &Subspace) -> Result<f64> {
    if m.ambient_dim() != n.ambient_dim() {
        return Err(Error::DimensionMismatch(format!(
            "projector_diff_norm: ambient dimensions {} and {}",
            m.ambient_dim(),
            n.ambient_dim()
        )));
    }
    let pm = projector_onto(m).mat;
    let pn = projector_onto(n).mat;
    Ok(spectral_norm(&(&pm - &pn)).clamp(0.0, 1.0))
}

/// A perturbation instance `(T, dT, Tbar = T + dT)` with the graph space of
/// the unperturbed `T` and cached factorizations of both operators.
pub struct PerturbationInstance {
    t: Mat,
    dt: Mat,
    tbar: Mat,
    gs: GraphSpace,
    rank_tol: f64,
    stability_margin: f64,
    rank_t: usize,
    rank_tbar: usize,
    pinv_t: Mat,
    pinv_tbar: Mat,
    range_t: Subspace,
    ker_t: Subspace,
    range_tbar: Subspace,
    ker_tbar: Subspace,
    /// ker T^dag = R(T)^perp, from the identity rather than from T^dag.
    ker_pinv_t: Subspace,
    /// R(T^dag) = (ker T)^perp.
    range_pinv_t: Subspace,
}

/// Construction options; defaults follow the crate-wide tolerance scheme.
#[derive(Debug, Clone, Copy)]
pub struct InstanceOptions {
    pub rank_tol: Option<f64>,
    pub stability_margin: f64,
}

impl Default for InstanceOptions {
    fn default() -> Self {
        InstanceOptions {
            rank_tol: None,
            stability_margin: 1e-6,
        }
    }
}

impl PerturbationInstance {
    pub fn new(t: Mat, dt: Mat, opts: InstanceOptions) -> Result<Self> {
        if t.shape() != dt.shape() {
            return Err(Error::DimensionMismatch(format!(
                "T is {}x{} but dT is {}x{}",
                t.rows(),
                t.cols(),
                dt.rows(),
                dt.cols()
            )));
        }
        if !t.is_finite() || !dt.is_finite() {
            return Err(Error::InvalidInput(
                "perturbation instance: non-finite entries".into(),
            ));
        }
        let (m, n) = t.shape();
        let rank_tol = opts.rank_tol.unwrap_or_else(|| linalg::default_rank_tol(m, n));
        let tbar = &t + &dt;
        let gs = GraphSpace::new(&t)?;

        let svd_t = linalg::svd_full(&t);
        let rank_t = svd_t.rank(rank_tol);
        let pinv_t = linalg::pinv_oracle(&t, rank_tol)?;
        let range_t = Subspace::new(m, svd_t.u.columns(0, rank_t), rank_tol.max(1e-10))?;
        let ker_t = Subspace::new(n, svd_t.v.columns(rank_t, n - rank_t), rank_tol.max(1e-10))?;
        let ker_pinv_t = Subspace::new(m, svd_t.u.columns(rank_t, m - rank_t), rank_tol.max(1e-10))?;
        let range_pinv_t = Subspace::new(n, svd_t.v.columns(0, rank_t), rank_tol.max(1e-10))?;

        let svd_tbar = linalg::svd_full(&tbar);
        let rank_tbar = svd_tbar.rank(rank_tol);
        let pinv_tbar = linalg::pinv_oracle(&tbar, rank_tol)?;
        let range_tbar = Subspace::new(m, svd_tbar.u.columns(0, rank_tbar), rank_tol.max(1e-10))?;
        let ker_tbar = Subspace::new(
            n,
            svd_tbar.v.columns(rank_tbar, n - rank_tbar),
            rank_tol.max(1e-10),
        )?;

        Ok(PerturbationInstance {
            t,
            dt,
            tbar,
            gs,
            rank_tol,
            stability_margin: opts.stability_margin,
            rank_t,
            rank_tbar,
            pinv_t,
            pinv_tbar,
            range_t,
            ker_t,
            range_tbar,
            ker_tbar,
            ker_pinv_t,
            range_pinv_t,
        })
    }

    pub fn t(&self) -> &Mat {
        &self.t
    }

    pub fn dt(&self) -> &Mat {
        &self.dt
    }

    pub fn tbar(&self) -> &Mat {
        &self.tbar
    }

    pub fn graph_space(&self) -> &GraphSpace {
        &self.gs
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn stability_margin(&self) -> f64 {
        self.stability_margin
    }

    pub fn rank_t(&self) -> usize {
        self.rank_t
    }

    pub fn rank_tbar(&self) -> usize {
        self.rank_tbar
    }

    /// SVD-oracle pseudoinverse of the unperturbed operator.
    pub fn pinv_t(&self) -> &Mat {
        &self.pinv_t
    }

    /// SVD-oracle pseudoinverse of the perturbed operator.
    pub fn pinv_tbar_oracle(&self) -> &Mat {
        &self.pinv_tbar
    }

    pub fn range_t(&self) -> &Subspace {
        &self.range_t
    }

    pub fn ker_t(&self) -> &Subspace {
        &self.ker_t
    }

    pub fn range_tbar(&self) -> &Subspace {
        &self.range_tbar
    }

    pub fn ker_tbar(&self) -> &Subspace {
        &self.ker_tbar
    }

    /// `I + dT T^dag` with its LU factorization and smallest singular value.
    /// Errors when the hypothesis operator is numerically singular.
    fn hypothesis_factor(&self) -> Result<(Mat, LuFactor, f64)> {
        let m0 = &Mat::identity(self.t.rows()) + &(&self.dt * &self.pinv_t);
        let sigma_min = linalg::min_singular_value(&m0);
        if sigma_min < self.rank_tol {
            return Err(Error::NotInvertible { sigma_min });
        }
        let lu = LuFactor::new(&m0)?;
        Ok((m0, lu, sigma_min))
    }
}

/// One evaluated stability predicate: the flag and the distance to its
/// decision threshold (positive on the passing side).
#[derive(Debug, Clone, Copy)]
pub struct Predicate {
    pub holds: bool,
    pub margin: f64,
}

/// Trichotomy produced by the guarded classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityClass {
    Stable,
    Unstable,
    Indeterminate,
}

impl StabilityClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            StabilityClass::Stable => "stable",
            StabilityClass::Unstable => "unstable",
            StabilityClass::Indeterminate => "indeterminate",
        }
    }
}

/// The five Lemma-equivalent predicates with margins, the raw intersection
/// score of the first predicate, and the guarded classification.
#[derive(Debug, Clone)]
pub struct PredicateReport {
    pub predicates: [Predicate; 5],
    /// `sigma_max((I - P_{R(T)}) B_{R(Tbar)})`; 1 signals a nontrivial
    /// intersection of `R(Tbar)` with `ker T^dag`.
    pub sigma_p1: f64,
    pub class: StabilityClass,
}

impl PredicateReport {
    pub fn all_hold(&self) -> bool {
        self.predicates.iter().all(|p| p.holds)
    }

    pub fn none_hold(&self) -> bool {
        self.predicates.iter().all(|p| !p.holds)
    }
}

/// Evaluates the five equivalent stability conditions.
///
/// p1: trivial-intersection test through the sigma score;
/// p2: `G` is a (1,2)-inverse of `Tbar` with `R(G) = R(T^dag)`,
///     `ker G = ker T^dag`;
/// p3: `(I + dT T^dag)^{-1} Tbar` maps `ker T` into `R(T)`;
/// p4: `(I + dT T^dag)^{-1} R(Tbar) = R(T)`;
/// p5: `(I + T^dag dT)^{-1} ker T = ker Tbar`.
pub fn stability_predicates(inst: &PerturbationInstance) -> Result<PredicateReport> {
    let (m0, lu_m0, _sigma_min) = inst.hypothesis_factor()?;
    let margin = inst.stability_margin;

    // p1
    let sigma_p1 = if inst.range_tbar.is_trivial() {
        0.0
    } else if inst.range_t.is_trivial() {
        1.0
    } else {
        let bt = inst.range_t.basis();
        let bb = inst.range_tbar.basis();
        let resid = bb - &(bt * &(&bt.adjoint() * bb));
        spectral_norm(&resid).clamp(0.0, 1.0)
    };
    let p1 = Predicate {
        holds: sigma_p1 < 1.0 - margin,
        margin: (1.0 - margin) - sigma_p1,
    };

    // p2
    let p2 = predicate_two(inst, &m0, &lu_m0)?;
    // p3
    let p3 = predicate_three(inst, &lu_m0)?;
    // p4
    let p4 = predicate_four(inst, &lu_m0)?;
    // p5
    let p5 = predicate_five(inst)?;

    let predicates = [p1, p2, p3, p4, p5];
    let class = classify(&predicates, sigma_p1, margin);
    Ok(PredicateReport {
        predicates,
        sigma_p1,
        class,
    })
}

fn classify(predicates: &[Predicate; 5], sigma_p1: f64, margin: f64) -> StabilityClass {
    let all = predicates.iter().all(|p| p.holds);
    let none = predicates.iter().all(|p| !p.holds);
    // Guard band around the exact threshold sigma = 1: inside it p1 cannot be
    // trusted on its own; unanimity of the remaining predicates decides.
    if (1.0 - sigma_p1).abs() <= margin {
        let others_fail = predicates[1..].iter().all(|p| !p.holds);
        return if others_fail {
            StabilityClass::Unstable
        } else {
            StabilityClass::Indeterminate
        };
    }
    if all {
        StabilityClass::Stable
    } else if none {
        StabilityClass::Unstable
    } else {
        StabilityClass::Indeterminate
    }
}

fn predicate_two(inst: &PerturbationInstance, m0: &Mat, lu_m0: &LuFactor) -> Result<Predicate> {
    let g = lu_m0.solve_right(inst.pinv_t());
    let tbar = inst.tbar();
    let tgt = &(tbar * &g) * tbar;
    let gtg = &(&g * tbar) * &g;
    let res1 = spectral_norm(&(&tgt - tbar));
    let res2 = spectral_norm(&(&gtg - &g));
    let thr1 = tol_for(spectral_norm(tbar));
    let thr2 = tol_for(spectral_norm(&g));

    // R(G) = R(T^dag) and ker G = ker T^dag, realized through the exact
    // factored identities R(G) = T^dag R(T) and ker G = (I + dT T^dag) ker T^dag,
    // then re-orthonormalized and compared as subspaces.
    let m = inst.t().rows();
    let range_g = {
        let image = inst.pinv_t() * inst.range_t().basis();
        Subspace::new(
            inst.t().cols(),
            orthonormalize_cols(&image, inst.rank_tol()),
            inst.rank_tol().max(1e-10),
        )?
    };
    let ker_g = if inst.ker_pinv_t.is_trivial() {
        Subspace::trivial(m, inst.rank_tol().max(1e-10))
    } else {
        let image = m0 * inst.ker_pinv_t.basis();
        Subspace::new(
            m,
            orthonormalize_cols(&image, inst.rank_tol()),
            inst.rank_tol().max(1e-10),
        )?
    };
    let gap_range = gap_hat(&range_g, &inst.range_pinv_t)?;
    let gap_ker = gap_hat(&ker_g, &inst.ker_pinv_t)?;
    let gtol = tol_for(1.0);

    let margins = [thr1 - res1, thr2 - res2, gtol - gap_range, gtol - gap_ker];
    let holds = margins.iter().all(|&s| s >= 0.0);
    let margin = margins.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(Predicate { holds, margin })
}

fn predicate_three(inst: &PerturbationInstance, lu_m0: &LuFactor) -> Result<Predicate> {
    if inst.ker_t().is_trivial() {
        return Ok(Predicate {
            holds: true,
            margin: tol_for(0.0),
        });
    }
    let bt = inst.range_t().basis();
    let mut worst = f64::INFINITY;
    let mut holds = true;
    for j in 0..inst.ker_t().dim() {
        let k = inst.ker_t().basis().column(j);
        let w = inst.tbar() * &k;
        let mapped = lu_m0.solve(&w);
        let outside = if inst.range_t().is_trivial() {
            mapped.clone()
        } else {
            &mapped - &(bt * &(&bt.adjoint() * &mapped))
        };
        let val = outside.norm2();
        let thr = tol_for(w.norm2());
        if val > thr {
            holds = false;
        }
        worst = worst.min(thr - val);
    }
    Ok(Predicate {
        holds,
        margin: worst,
    })
}

fn predicate_four(inst: &PerturbationInstance, lu_m0: &LuFactor) -> Result<Predicate> {
    let mapped = if inst.range_tbar().is_trivial() {
        Subspace::trivial(inst.t().rows(), inst.rank_tol().max(1e-10))
    } else {
        let image = lu_m0.solve(inst.range_tbar().basis());
        Subspace::new(
            inst.t().rows(),
            orthonormalize_cols(&image, inst.rank_tol()),
            inst.rank_tol().max(1e-10),
        )?
    };
    let gap = gap_hat(&mapped, inst.range_t())?;
    let gtol = tol_for(1.0);
    Ok(Predicate {
        holds: gap <= gtol,
        margin: gtol - gap,
    })
}

fn predicate_five(inst: &PerturbationInstance) -> Result<Predicate> {
    let n = inst.t().cols();
    let n0 = &Mat::identity(n) + &(inst.pinv_t() * inst.dt());
    let sigma_min = linalg::min_singular_value(&n0);
    if sigma_min < inst.rank_tol() {
        return Err(Error::NotInvertible { sigma_min });
    }
    let mapped = if inst.ker_t().is_trivial() {
        Subspace::trivial(n, inst.rank_tol().max(1e-10))
    } else {
        let lu = LuFactor::new(&n0)?;
        let image = lu.solve(inst.ker_t().basis());
        Subspace::new(
            n,
            orthonormalize_cols(&image, inst.rank_tol()),
            inst.rank_tol().max(1e-10),
        )?
    };
    let gap = gap_hat(&mapped, inst.ker_tbar())?;
    let gtol = tol_for(1.0);
    Ok(Predicate {
        holds: gap <= gtol,
        margin: gtol - gap,
    })
}

/// `G = T^dag (I + dT T^dag)^{-1}`; under the stability predicates this is a
/// (1,2)-inverse of `Tbar` with `R(G) = R(T^dag)` and `ker G = ker T^dag`.
pub fn compute_g(inst: &PerturbationInstance) -> Result<Mat> {
    let (_m0, lu_m0, _s) = inst.hypothesis_factor()?;
    Ok(lu_m0.solve_right(inst.pinv_t()))
}

/// Which domain metric the closed-form adjoint `Pbar^*` is taken in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Standard,
    Graph,
}

/// Closed-form perturbed Moore-Penrose inverse. Requires the stability
/// predicates to hold; the graph metric uses `W` built from the original `T`.
pub fn perturbed_mp(inst: &PerturbationInstance, metric: MetricKind) -> Result<Mat> {
    let report = stability_predicates(inst)?;
    if !report.all_hold() {
        return Err(Error::NotStable(format!(
            "predicates do not all hold (class: {})",
            report.class.as_str()
        )));
    }
    let metric = match metric {
        MetricKind::Standard => Metric::Standard,
        MetricKind::Graph => Metric::Graph(inst.graph_space()),
    };
    perturbed_mp_formula(inst, metric)
}

/// Same closed form with an explicit graph space (used to compare the
/// alternative convention `W = I + Tbar^H Tbar` in paranoid mode).
pub fn perturbed_mp_with_graph(inst: &PerturbationInstance, gs: &GraphSpace) -> Result<Mat> {
    let report = stability_predicates(inst)?;
    if !report.all_hold() {
        return Err(Error::NotStable(format!(
            "predicates do not all hold (class: {})",
            report.class.as_str()
        )));
    }
    perturbed_mp_formula(inst, Metric::Graph(gs))
}

fn perturbed_mp_formula(inst: &PerturbationInstance, metric: Metric<'_>) -> Result<Mat> {
    let g = compute_g(inst)?;
    let n = inst.t().cols();
    let pbar = &Mat::identity(n) - &(&g * inst.tbar());
    let qbar = inst.tbar() * &g;
    let prefix = &Mat::identity(n) - &projector_onto(inst.ker_tbar()).mat;
    mp_closed_form(&g, &pbar, &qbar, metric, Some(&prefix), inst.rank_tol())
}

/// How a ledger row is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// `lhs <= rhs` is asserted on stable instances.
    Inequality,
    /// `lhs = rhs` is asserted to the identity tolerance.
    Identity,
    /// Reported for comparison only, never asserted.
    Context,
}

/// One certified inequality or identity.
#[derive(Debug, Clone)]
pub struct BoundRow {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
    pub kind: RowKind,
}

impl BoundRow {
    pub fn inequality(name: &str, lhs: f64, rhs: f64) -> Self {
        BoundRow {
            name: name.to_string(),
            lhs,
            rhs,
            slack: rhs - lhs,
            holds: bound_holds(lhs, rhs),
            kind: RowKind::Inequality,
        }
    }

    pub fn identity(name: &str, lhs: f64, rhs: f64) -> Self {
        BoundRow {
            name: name.to_string(),
            lhs,
            rhs,
            slack: rhs - lhs,
            holds: (lhs - rhs).abs() <= 1e-10 * (1.0 + lhs),
            kind: RowKind::Identity,
        }
    }

    pub fn context(name: &str, lhs: f64, rhs: f64) -> Self {
        BoundRow {
            name: name.to_string(),
            lhs,
            rhs,
            slack: rhs - lhs,
            holds: bound_holds(lhs, rhs),
            kind: RowKind::Context,
        }
    }
}

/// Gap metrics between the fundamental subspaces of `T` and `Tbar`.
#[derive(Debug, Clone, Copy)]
pub struct GapRecord {
    /// `delta(R(T), R(Tbar))`.
    pub range_gap: f64,
    /// `delta(ker T, ker Tbar)`.
    pub kernel_gap: f64,
    /// `gap_hat(R(T), R(Tbar))`.
    pub gap_hat_range: f64,
    /// `|P_{R(T)} - P_{R(Tbar)}|_2` from the orthonormal bases.
    pub projector_diff: f64,
}

/// Full analysis record for one perturbation instance.
pub struct StabilityReport {
    pub predicates: PredicateReport,
    /// `G = T^dag (I + dT T^dag)^{-1}`.
    pub g: Mat,
    /// Closed-form `Tbar^dag` (when stable and the formula did not break down).
    pub tbar_dag_formula: Option<Mat>,
    /// SVD-oracle `Tbar^dag`.
    pub tbar_dag_oracle: Mat,
    /// Spectral distance between the formula and oracle routes.
    pub formula_oracle_dist: Option<f64>,
    /// Breakdown message if the closed form failed on a stable instance.
    pub formula_error: Option<String>,
    /// `|(I + dT T^dag)^{-1}|_2`.
    pub inv_norm: f64,
    pub norm_t: f64,
    pub norm_tbar: f64,
    pub norm_pinv_t: f64,
    pub norm_pinv_tbar: f64,
    /// `|dT|_T` in the graph metric of the unperturbed `T`.
    pub dt_norm_t: f64,
    /// Plain spectral norm of `dT`.
    pub dt_norm_2: f64,
    pub bounds: Vec<BoundRow>,
    pub gaps: GapRecord,
    pub warnings: Vec<String>,
}

impl StabilityReport {
    pub fn is_stable(&self) -> bool {
        self.predicates.class == StabilityClass::Stable
    }

    pub fn asserted_rows_hold(&self) -> bool {
        self.bounds
            .iter()
            .filter(|r| r.kind != RowKind::Context)
            .all(|r| r.holds)
    }
}

/// Evaluates the predicates, the closed form (standard metric) and the full
/// bound ledger. On non-stable instances the report carries the predicates,
/// gaps and norms, with an empty bound ledger.
pub fn verify_bounds(inst: &PerturbationInstance) -> Result<StabilityReport> {
    verify_bounds_with(inst, MetricKind::Standard)
}

pub fn verify_bounds_with(
    inst: &PerturbationInstance,
    metric: MetricKind,
) -> Result<StabilityReport> {
    let predicates = stability_predicates(inst)?;
    let (_m0, lu_m0, sigma_min) = inst.hypothesis_factor()?;
    let g = lu_m0.solve_right(inst.pinv_t());
    let inv_norm = 1.0 / sigma_min;

    let norm_t = spectral_norm(inst.t());
    let norm_tbar = spectral_norm(inst.tbar());
    let norm_pinv_t = spectral_norm(inst.pinv_t());
    let norm_pinv_tbar = spectral_norm(inst.pinv_tbar_oracle());
    let dt_norm_t = inst.graph_space().t_norm_dom(inst.dt())?;
    let dt_norm_2 = spectral_norm(inst.dt());

    let range_gap = gap(inst.range_t(), inst.range_tbar())?;
    let kernel_gap = gap(inst.ker_t(), inst.ker_tbar())?;
    let gap_hat_range = gap_hat(inst.range_t(), inst.range_tbar())?;
    let projector_diff = projector_diff_norm(inst.range_t(), inst.range_tbar())?;
    let gaps = GapRecord {
        range_gap,
        kernel_gap,
        gap_hat_range,
        projector_diff,
    };

    let mut warnings = Vec::new();
    let mut bounds = Vec::new();
    let mut tbar_dag_formula = None;
    let mut formula_oracle_dist = None;
    let mut formula_error = None;

    if predicates.all_hold() {
        let sqrt_term = (norm_pinv_t * norm_pinv_t + 1.0).sqrt();
        bounds.push(BoundRow::inequality(
            "norm_bound",
            norm_pinv_tbar,
            inv_norm * sqrt_term,
        ));
        let diff_norm = spectral_norm(&(inst.pinv_tbar_oracle() - inst.pinv_t()));
        bounds.push(BoundRow::inequality(
            "diff_bound",
            diff_norm,
            GOLDEN * norm_pinv_tbar * dt_norm_t * sqrt_term,
        ));
        bounds.push(BoundRow::inequality(
            "range_gap_bound",
            range_gap,
            dt_norm_t * sqrt_term,
        ));
        bounds.push(BoundRow::inequality(
            "kernel_gap_bound",
            kernel_gap,
            norm_pinv_tbar * dt_norm_t,
        ));
        let proj_lhs = spectral_norm(
            &(&(inst.t() * inst.pinv_t()) - &(inst.tbar() * inst.pinv_tbar_oracle())),
        );
        bounds.push(BoundRow::identity(
            "projector_range_identity",
            proj_lhs,
            range_gap,
        ));
        // Lemma-level identity between the one-sided kernel gap and the
        // kernel projector difference, valid under gap_hat < 1.
        let kernel_gap_hat = gap_hat(inst.ker_t(), inst.ker_tbar())?;
        if kernel_gap_hat < 1.0 {
            let pd = projector_diff_norm(inst.ker_t(), inst.ker_tbar())?;
            let row = BoundRow::identity("kernel_gap_identity", kernel_gap, pd);
            if !row.holds {
                warnings.push(format!(
                    "kernel gap identity counterexample: delta = {kernel_gap:.17e}, |P - Q| = {pd:.17e}"
                ));
            }
            bounds.push(row);
        } else {
            warnings.push(
                "kernel gap identity skipped: gap_hat(ker T, ker Tbar) = 1".to_string(),
            );
        }

        match perturbed_mp_formula(inst, metric_of(inst, metric)) {
            Ok(formula) => {
                let dist = spectral_norm(&(&formula - inst.pinv_tbar_oracle()));
                formula_oracle_dist = Some(dist);
                tbar_dag_formula = Some(formula);
            }
            Err(e) => {
                formula_error = Some(e.to_string());
                warnings.push(format!("perturbed MP formula breakdown: {e}"));
            }
        }
    }

    Ok(StabilityReport {
        predicates,
        g,
        tbar_dag_formula,
        tbar_dag_oracle: inst.pinv_tbar_oracle().clone(),
        formula_oracle_dist,
        formula_error,
        inv_norm,
        norm_t,
        norm_tbar,
        norm_pinv_t,
        norm_pinv_tbar,
        dt_norm_t,
        dt_norm_2,
        bounds,
        gaps,
        warnings,
    })
}

fn metric_of<'a>(inst: &'a PerturbationInstance, kind: MetricKind) -> Metric<'a> {
    match kind {
        MetricKind::Standard => Metric::Standard,
        MetricKind::Graph => Metric::Graph(inst.graph_space()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pinv_oracle;

    fn diag_instance(t_diag: [f64; 2], dt_diag: [f64; 2]) -> PerturbationInstance {
        let t = Mat::from_row_major_real(2, 2, &[t_diag[0], 0.0, 0.0, t_diag[1]]);
        let dt = Mat::from_row_major_real(2, 2, &[dt_diag[0], 0.0, 0.0, dt_diag[1]]);
        PerturbationInstance::new(t, dt, InstanceOptions::default()).unwrap()
    }

    #[test]
    fn gap_one_dimensional_rotation() {
        let tol = 1e-12;
        let m = Subspace::new(2, Mat::col_from_real(&[1.0, 0.0]), tol).unwrap();
        let theta = std::f64::consts::PI / 6.0;
        let n = Subspace::new(2, Mat::col_from_real(&[theta.cos(), theta.sin()]), tol).unwrap();
        let d = gap(&m, &n).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gap_subset_is_zero() {
        let tol = 1e-12;
        let m = Subspace::new(3, Mat::col_from_real(&[1.0, 0.0, 0.0]), tol).unwrap();
        let n = Subspace::new(
            3,
            Mat::from_row_major_real(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
            tol,
        )
        .unwrap();
        assert!(gap(&m, &n).unwrap() < 1e-14);
        // One-sided gap in the other direction is 1, so gap_hat is 1.
        assert!((gap_hat(&m, &n).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gap_identical_and_orthogonal() {
        let tol = 1e-12;
        let m = Subspace::new(2, Mat::col_from_real(&[1.0, 0.0]), tol).unwrap();
        let n = Subspace::new(2, Mat::col_from_real(&[0.0, 1.0]), tol).unwrap();
        assert!(gap_hat(&m, &m.clone()).unwrap() < 1e-14);
        assert!((gap_hat(&m, &n).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_perturbation_is_stable_with_g_equal_pinv() {
        let inst = diag_instance([1.0, 0.0], [0.0, 0.0]);
        let report = stability_predicates(&inst).unwrap();
        assert!(report.all_hold());
        assert_eq!(report.class, StabilityClass::Stable);
        let g = compute_g(&inst).unwrap();
        assert!(g.max_abs_diff(inst.pinv_t()) < 1e-13);
    }

    #[test]
    fn diagonal_stable_perturbation() {
        let inst = diag_instance([1.0, 0.0], [0.1, 0.0]);
        let report = stability_predicates(&inst).unwrap();
        assert!(report.all_hold(), "margins: {:?}", report.predicates);
        let g = compute_g(&inst).unwrap();
        let expected = Mat::from_row_major_real(2, 2, &[1.0 / 1.1, 0.0, 0.0, 0.0]);
        assert!(g.max_abs_diff(&expected) < 1e-13);
        let mp = perturbed_mp(&inst, MetricKind::Standard).unwrap();
        assert!(mp.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn diagonal_unstable_perturbation() {
        // e2 lands in R(Tbar) while staying in ker T^dag.
        let inst = diag_instance([1.0, 0.0], [0.0, 0.5]);
        let report = stability_predicates(&inst).unwrap();
        assert!(report.none_hold(), "predicates: {:?}", report.predicates);
        assert_eq!(report.class, StabilityClass::Unstable);
        assert!(perturbed_mp(&inst, MetricKind::Standard).is_err());
    }

    #[test]
    fn compute_g_with_orthogonal_shift() {
        // dT hits only ker T, so dT T^dag = 0 and G = T^dag.
        let t = Mat::from_row_major_real(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let dt = Mat::from_row_major_real(2, 2, &[0.0, 0.3, 0.0, 0.0]);
        let inst = PerturbationInstance::new(t, dt, InstanceOptions::default()).unwrap();
        let g = compute_g(&inst).unwrap();
        assert!(g.max_abs_diff(&Mat::from_row_major_real(2, 2, &[0.5, 0.0, 0.0, 0.0])) < 1e-13);
    }

    #[test]
    fn singular_hypothesis_is_reported() {
        // dT = -T makes I + dT T^dag = I - T T^dag singular on R(T).
        let t = Mat::identity(2);
        let dt = t.scale_re(-1.0);
        let inst = PerturbationInstance::new(t, dt, InstanceOptions::default()).unwrap();
        match stability_predicates(&inst) {
            Err(Error::NotInvertible { sigma_min }) => assert!(sigma_min < 1e-12),
            other => panic!("expected NotInvertible, got {other:?}"),
        }
    }

    #[test]
    fn bounds_ledger_on_diagonal_example() {
        let inst = diag_instance([1.0, 0.0], [0.1, 0.0]);
        let report = verify_bounds(&inst).unwrap();
        assert!(report.is_stable());
        let row_a = report.bounds.iter().find(|r| r.name == "norm_bound").unwrap();
        assert!((row_a.lhs - 1.0 / 1.1).abs() < 1e-12);
        assert!((row_a.rhs - 2f64.sqrt()).abs() < 1e-12);
        assert!(row_a.holds);
        assert!(report.asserted_rows_hold(), "rows: {:?}", report.bounds);
        let dist = report.formula_oracle_dist.unwrap();
        assert!(dist < 1e-12);
    }

    #[test]
    fn zero_perturbation_ledger_collapses() {
        let inst = diag_instance([1.0, 0.5], [0.0, 0.0]);
        let report = verify_bounds(&inst).unwrap();
        assert!(report.is_stable());
        for name in ["range_gap_bound", "kernel_gap_bound"] {
            let row = report.bounds.iter().find(|r| r.name == name).unwrap();
            assert!(row.lhs.abs() < 1e-12);
            assert!(row.holds);
        }
        let id_row = report
            .bounds
            .iter()
            .find(|r| r.name == "projector_range_identity")
            .unwrap();
        assert!(id_row.lhs < 1e-12 && id_row.rhs < 1e-12 && id_row.holds);
    }

    #[test]
    fn perturbed_mp_matches_oracle_both_metrics() {
        let inst = diag_instance([1.0, 0.0], [0.1, 0.0]);
        let oracle = pinv_oracle(inst.tbar(), inst.rank_tol()).unwrap();
        for metric in [MetricKind::Standard, MetricKind::Graph] {
            let mp = perturbed_mp(&inst, metric).unwrap();
            assert!(mp.max_abs_diff(&oracle) < 1e-11);
        }
    }
}
