//! Bound-tightness sweeps: batches of generated instances across
//! perturbation scales, written as deterministic CSV.

use crate::error::Result;
use crate::gen::{derive_seed, gen_base, GenKind};
use crate::matfile::fmt_f64;
use mpinv_core::linalg;
use mpinv_core::perturb::{
    verify_bounds, InstanceOptions, PerturbationInstance, RowKind, StabilityClass,
};
use mpinv_core::Mat;

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub count: usize,
    pub m: usize,
    pub n: usize,
    pub rank: usize,
    pub kind: GenKind,
    pub scales: Vec<f64>,
    pub seed: u64,
    pub options: InstanceOptions,
}

pub const SWEEP_HEADER: &str =
    "seed,m,n,rank,scale,stable,bound_name,lhs,rhs,tightness,p1_margin,p2_margin,p3_margin,p4_margin,p5_margin";

/// CSV float formatting: same 17-significant-digit scheme as reports, with
/// bare inf/nan tokens.
fn fmt_csv(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn tightness(lhs: f64, rhs: f64) -> f64 {
    if rhs == 0.0 {
        if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        lhs / rhs
    }
}

/// Runs the sweep and returns the CSV text. Rows are ordered by
/// (instance index, scale index, bound name order); one fixed direction is
/// drawn per instance and rescaled across the scale list.
pub fn run_sweep(cfg: &SweepConfig) -> Result<String> {
    let rank_tol = cfg
        .options
        .rank_tol
        .unwrap_or_else(|| linalg::default_rank_tol(cfg.m, cfg.n));
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for idx in 0..cfg.count {
        let inst_seed = derive_seed(cfg.seed, idx as u64);
        let base = gen_base(cfg.m, cfg.n, cfg.rank, cfg.kind, inst_seed, rank_tol)?;
        for &scale in &cfg.scales {
            let dt = base.direction.scale_re(scale);
            let inst = PerturbationInstance::new(base.t.clone(), dt, cfg.options)?;
            write_rows(&mut out, inst_seed, &inst, scale)?;
        }
    }
    Ok(out)
}

fn write_rows(out: &mut String, seed: u64, inst: &PerturbationInstance, scale: f64) -> Result<()> {
    let report = verify_bounds(inst)?;
    let stable = report.predicates.class == StabilityClass::Stable;
    let margins: Vec<f64> = report.predicates.predicates.iter().map(|p| p.margin).collect();
    let prefix = format!(
        "{seed},{},{},{},{},{}",
        inst.t().rows(),
        inst.t().cols(),
        inst.rank_t(),
        fmt_csv(scale),
        stable
    );
    let margin_cols = margins
        .iter()
        .map(|&m| fmt_csv(m))
        .collect::<Vec<_>>()
        .join(",");

    let mut rows: Vec<(String, f64, f64)> = Vec::new();
    if stable {
        for row in report
            .bounds
            .iter()
            .filter(|r| r.kind == RowKind::Inequality)
        {
            rows.push((row.name.clone(), row.lhs, row.rhs));
        }
        // Classical bounded-operator comparison, reported for context only:
        // |T^dag| / (1 - |T^dag| |dT|) against the achieved |Tbar^dag|.
        let denom = 1.0 - report.norm_pinv_t * report.dt_norm_2;
        let classical = if denom > 0.0 {
            report.norm_pinv_t / denom
        } else {
            f64::INFINITY
        };
        rows.push((
            "classical_norm_bound".to_string(),
            report.norm_pinv_tbar,
            classical,
        ));
    } else {
        rows.push(("predicates_only".to_string(), 0.0, 0.0));
    }
    for (name, lhs, rhs) in rows {
        out.push_str(&format!(
            "{prefix},{name},{},{},{},{margin_cols}\n",
            fmt_csv(lhs),
            fmt_csv(rhs),
            fmt_csv(tightness(lhs, rhs)),
        ));
    }
    Ok(())
}
