//! Instance generators: random low-rank operators with stable, unstable or
//! boundary perturbation directions, and the large-norm finite-difference
//! surrogate.

use crate::error::{CliError, Result};
use mpinv_core::error::Error;
use mpinv_core::linalg::{self, spectral_norm, SubspaceKind};
use mpinv_core::perturb::{
    stability_predicates, InstanceOptions, PerturbationInstance, StabilityClass,
};
use mpinv_core::Mat;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Which side of the stable-perturbation condition the generated direction
/// targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenKind {
    /// `R(Tbar)` stays inside `R(T)`: all predicates pass.
    Stable,
    /// An exact intersection direction is injected: all predicates fail.
    Unstable,
    /// An intersection direction far below the predicate tolerances is
    /// injected, landing in the guard band (classification robustness only).
    Boundary,
}

impl GenKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "stable" => Ok(GenKind::Stable),
            "unstable" => Ok(GenKind::Unstable),
            "boundary" => Ok(GenKind::Boundary),
            other => Err(CliError::Usage(format!(
                "unknown kind {other:?} (expected stable, unstable or boundary)"
            ))),
        }
    }
}

/// Generation parameters shared by `gen_instance` and the sweep driver.
#[derive(Debug, Clone, Copy)]
pub struct GenSpec {
    pub m: usize,
    pub n: usize,
    pub rank: usize,
    pub kind: GenKind,
    pub seed: u64,
    pub scale: f64,
    pub options: InstanceOptions,
}

/// A base operator with a unit-spectral-norm perturbation direction; the
/// actual perturbation is `scale * direction`, so sweeps can rescale a fixed
/// direction.
pub struct GenBase {
    pub t: Mat,
    pub direction: Mat,
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    Mat::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    })
}

fn haar_columns(dim: usize, count: usize, rng: &mut ChaCha8Rng) -> Mat {
    let g = gaussian(dim, count, rng);
    linalg::orthonormalize_cols(&g, linalg::default_rank_tol(dim, count))
}

/// Draws `T = U diag(sigma) V^H` with prescribed rank (singular values in
/// [0.5, 2], descending) and a perturbation direction of the requested kind.
pub fn gen_base(
    m: usize,
    n: usize,
    rank: usize,
    kind: GenKind,
    seed: u64,
    rank_tol: f64,
) -> Result<GenBase> {
    if rank > m.min(n) {
        return Err(CliError::Usage(format!(
            "rank {rank} exceeds min(m, n) = {}",
            m.min(n)
        )));
    }
    if matches!(kind, GenKind::Unstable | GenKind::Boundary) && rank >= m.min(n) {
        return Err(CliError::Usage(format!(
            "kind requires rank < min(m, n) = {} so that ker T and ker T^dag are nontrivial",
            m.min(n)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = haar_columns(m, rank, &mut rng);
    let v = haar_columns(n, rank, &mut rng);
    let mut sigmas: Vec<f64> = (0..rank).map(|_| 0.5 + 1.5 * uniform(&mut rng)).collect();
    sigmas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let us = Mat::from_fn(m, rank, |i, j| u.get(i, j) * sigmas[j]);
    let t = &us * &v.adjoint();

    // Stable component: a Gaussian direction projected onto R(T), so that
    // R(T + scale * direction) stays inside R(T).
    let e = gaussian(m, n, &mut rng);
    let stable_dir = if rank == 0 {
        Mat::zeros(m, n)
    } else {
        let pe = &u * &(&u.adjoint() * &e);
        let norm = spectral_norm(&pe);
        pe.scale_re(1.0 / norm)
    };

    let direction = match kind {
        GenKind::Stable => stable_dir,
        GenKind::Unstable | GenKind::Boundary => {
            // Exact intersection injection: map a kernel vector of T onto a
            // direction orthogonal to R(T).
            let ker = linalg::orthonormal_basis(&t, SubspaceKind::Kernel, rank_tol);
            let coker = linalg::orthonormal_basis(&t.adjoint(), SubspaceKind::Kernel, rank_tol);
            let v_ker = ker.basis().column(0);
            let u_out = coker.basis().column(0);
            let rogue = &u_out * &v_ker.adjoint();
            match kind {
                GenKind::Unstable => {
                    let mixed = &stable_dir.scale_re(std::f64::consts::FRAC_1_SQRT_2)
                        + &rogue.scale_re(std::f64::consts::FRAC_1_SQRT_2);
                    let norm = spectral_norm(&mixed);
                    mixed.scale_re(1.0 / norm)
                }
                // The rogue component is injected at a size far below the
                // predicate tolerances: the intersection is mathematically
                // exact (sigma_p1 = 1) while every residual-based predicate
                // still passes numerically.
                GenKind::Boundary => &stable_dir + &rogue.scale_re(1e-10),
                GenKind::Stable => unreachable!(),
            }
        }
    };
    Ok(GenBase { t, direction })
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    use rand::Rng;
    rng.random::<f64>()
}

/// Generates a perturbation instance of the requested kind, retrying with
/// derived seeds when the generated instance fails its post-condition
/// (stable instances must classify stable, unstable ones unstable).
pub fn gen_instance(spec: &GenSpec) -> Result<PerturbationInstance> {
    let rank_tol = spec
        .options
        .rank_tol
        .unwrap_or_else(|| linalg::default_rank_tol(spec.m, spec.n));
    let mut last: Option<String> = None;
    for attempt in 0..10u64 {
        let seed = derive_seed(spec.seed, attempt);
        let base = gen_base(spec.m, spec.n, spec.rank, spec.kind, seed, rank_tol)?;
        let dt = base.direction.scale_re(spec.scale);
        let inst = PerturbationInstance::new(base.t, dt, spec.options)
            .map_err(CliError::Core)?;
        match check_post_condition(&inst, spec.kind) {
            Ok(()) => return Ok(inst),
            Err(msg) => last = Some(msg),
        }
    }
    Err(CliError::Core(Error::ConstructionFailed {
        attempts: 10,
        reason: last.unwrap_or_else(|| "generator post-condition kept failing".into()),
    }))
}

fn check_post_condition(inst: &PerturbationInstance, kind: GenKind) -> std::result::Result<(), String> {
    // Zero-scale perturbations are stable regardless of the requested kind.
    if inst.dt().norm_fro() == 0.0 {
        return Ok(());
    }
    let report = match stability_predicates(inst) {
        Ok(r) => r,
        Err(e) => return Err(format!("predicates failed to evaluate: {e}")),
    };
    let expected = match kind {
        GenKind::Stable => StabilityClass::Stable,
        GenKind::Unstable => StabilityClass::Unstable,
        GenKind::Boundary => StabilityClass::Indeterminate,
    };
    if report.class == expected {
        Ok(())
    } else {
        Err(format!(
            "generated instance classified {} (wanted {})",
            report.class.as_str(),
            expected.as_str()
        ))
    }
}

/// SplitMix64 step, used to derive independent per-instance seeds.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Finite-dimensional surrogate of an unbounded operator: `T = n * D` with
/// `D` the forward-difference matrix, so the spectral norm grows linearly in
/// `n` while `dT = eps * T` stays T-bounded with constants `(0, eps)`.
pub fn gen_surrogate(n: usize, eps: f64, _seed: u64) -> Result<PerturbationInstance> {
    if n < 2 {
        return Err(CliError::Usage("surrogate requires n >= 2".into()));
    }
    let scale = n as f64;
    let t = Mat::from_fn_real(n - 1, n, |i, j| {
        if j == i {
            -scale
        } else if j == i + 1 {
            scale
        } else {
            0.0
        }
    });
    let dt = t.scale_re(eps);
    PerturbationInstance::new(t, dt, InstanceOptions::default()).map_err(CliError::Core)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: GenKind, m: usize, n: usize, rank: usize, scale: f64, seed: u64) -> GenSpec {
        GenSpec {
            m,
            n,
            rank,
            kind,
            seed,
            scale,
            options: InstanceOptions::default(),
        }
    }

    #[test]
    fn stable_kind_passes_predicates() {
        let inst = gen_instance(&spec(GenKind::Stable, 6, 4, 3, 1e-3, 42)).unwrap();
        let report = stability_predicates(&inst).unwrap();
        assert!(report.all_hold());
    }

    #[test]
    fn unstable_kind_fails_all_predicates() {
        let inst = gen_instance(&spec(GenKind::Unstable, 6, 4, 3, 1e-2, 43)).unwrap();
        let report = stability_predicates(&inst).unwrap();
        assert!(report.none_hold(), "{:?}", report.predicates);
        assert_eq!(report.class, StabilityClass::Unstable);
    }

    #[test]
    fn boundary_kind_lands_in_guard_band() {
        let inst = gen_instance(&spec(GenKind::Boundary, 6, 4, 3, 1e-3, 44)).unwrap();
        let report = stability_predicates(&inst).unwrap();
        assert_eq!(report.class, StabilityClass::Indeterminate);
        assert!((1.0 - report.sigma_p1).abs() <= inst.stability_margin());
    }

    #[test]
    fn full_rank_square_is_stable() {
        let inst = gen_instance(&spec(GenKind::Stable, 4, 4, 4, 1e-3, 45)).unwrap();
        let report = stability_predicates(&inst).unwrap();
        assert!(report.all_hold());
    }

    #[test]
    fn surrogate_shape_and_norm() {
        let inst = gen_surrogate(2, 0.0, 0).unwrap();
        // T = 2 * [-1, 1].
        assert_eq!(inst.t().shape(), (1, 2));
        assert_eq!(inst.t().get(0, 0), C64::new(-2.0, 0.0));
        assert_eq!(inst.t().get(0, 1), C64::new(2.0, 0.0));
        let report = stability_predicates(&inst).unwrap();
        assert!(report.all_hold());
    }

    #[test]
    fn surrogate_norm_grows_linearly() {
        let n64 = spectral_norm(gen_surrogate(64, 1e-2, 0).unwrap().t());
        let n256 = spectral_norm(gen_surrogate(256, 1e-2, 0).unwrap().t());
        // |T|_2 = 2 n cos(pi / 2n) -> 2n.
        assert!((n64 / 128.0 - 1.0).abs() < 0.01);
        assert!((n256 / 512.0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(0, 0), derive_seed(0, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}
