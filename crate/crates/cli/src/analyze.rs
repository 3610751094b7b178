//! Analysis driver: loads or generates an instance, runs the predicate and
//! bound suite, and renders the structured report.

use crate::error::{CliError, Result};
use crate::gen::{self, GenKind, GenSpec};
use crate::matfile;
use crate::report::{
    bound_row_json, gaps_json, matrix_json, norms_json, predicates_json, Json,
};
use mpinv_core::error::Error;
use mpinv_core::graph::GraphSpace;
use mpinv_core::linalg::spectral_norm;
use mpinv_core::lstsq::{backward_pair, forward_pair, solution_bounds, LsqProblem, SolutionPair};
use mpinv_core::perturb::{
    perturbed_mp_with_graph, verify_bounds_with, MetricKind, PerturbationInstance,
    StabilityClass, StabilityReport,
};
use mpinv_core::Mat;
use std::path::PathBuf;

/// Matrices larger than this (entry count) are omitted from reports unless
/// explicitly requested; everything else in the report is unaffected.
const MAX_REPORT_ENTRIES: usize = 65_536;

#[derive(Debug, Clone)]
pub enum Source {
    Files {
        t: PathBuf,
        dt: PathBuf,
        b: Option<PathBuf>,
        db: Option<PathBuf>,
    },
    Surrogate {
        n: usize,
        eps: f64,
    },
    Generated {
        kind: GenKind,
        m: usize,
        n: usize,
        rank: usize,
        scale: f64,
    },
}

#[derive(Debug, Clone)]
pub struct AnalyzeConfig {
    pub source: Source,
    pub metric: MetricKind,
    pub paranoid: bool,
    pub rank_tol: Option<f64>,
    pub stability_margin: f64,
    pub seed: u64,
    pub cert: Option<(f64, f64)>,
    pub cert_samples: usize,
    pub full_matrices: bool,
}

pub struct AnalyzeOutput {
    pub report_text: String,
    pub exit_code: i32,
}

pub fn run_analyze(cfg: &AnalyzeConfig) -> Result<AnalyzeOutput> {
    let options = mpinv_core::perturb::InstanceOptions {
        rank_tol: cfg.rank_tol,
        stability_margin: cfg.stability_margin,
    };

    let (inst, b, db) = match &cfg.source {
        Source::Files { t, dt, b, db } => {
            let t = matfile::read_matrix(t)?;
            let dt = matfile::read_matrix(dt)?;
            let b_vec = b.as_ref().map(|p| matfile::read_matrix(p)).transpose()?;
            let db_vec = db.as_ref().map(|p| matfile::read_matrix(p)).transpose()?;
            let inst = PerturbationInstance::new(t, dt, options)?;
            (inst, b_vec, db_vec)
        }
        Source::Surrogate { n, eps } => (gen::gen_surrogate(*n, *eps, cfg.seed)?, None, None),
        Source::Generated {
            kind,
            m,
            n,
            rank,
            scale,
        } => {
            let spec = GenSpec {
                m: *m,
                n: *n,
                rank: *rank,
                kind: *kind,
                seed: cfg.seed,
                scale: *scale,
                options,
            };
            (gen::gen_instance(&spec)?, None, None)
        }
    };

    let meta = meta_json(cfg, &inst);

    // The singular-hypothesis case still produces a (minimal) report so the
    // caller sees sigma_min, with the documented exit code.
    let report = match verify_bounds_with(&inst, cfg.metric) {
        Ok(r) => r,
        Err(Error::NotInvertible { sigma_min }) => {
            let doc = Json::obj(vec![
                ("meta", meta),
                (
                    "error",
                    Json::obj(vec![
                        ("type", Json::Str("not_invertible".into())),
                        ("sigma_min", Json::Num(sigma_min)),
                    ]),
                ),
            ]);
            return Ok(AnalyzeOutput {
                report_text: doc.to_pretty_string(),
                exit_code: 3,
            });
        }
        Err(e) => return Err(e.into()),
    };

    let mut norm_extra = Vec::new();
    if let Some((a, b_const)) = cfg.cert {
        let cert = inst
            .graph_space()
            .t_bound_certificate(inst.dt(), a, b_const, cfg.cert_samples, cfg.seed)?;
        norm_extra.push((
            "certificate",
            Json::obj(vec![
                ("a", Json::Num(cert.a)),
                ("b", Json::Num(cert.b)),
                ("holds", Json::Bool(cert.holds)),
                ("worst_ratio", Json::Num(cert.worst_ratio)),
            ]),
        ));
    }

    let mut top = vec![("meta", meta)];
    top.push(("norms", norms_json(&report, norm_extra)));
    top.push(("predicates", predicates_json(&report.predicates)));
    top.push((
        "bounds",
        Json::Arr(report.bounds.iter().map(bound_row_json).collect()),
    ));
    top.push(("gaps", gaps_json(&report.gaps)));
    top.push(("operators", operators_json(&report, cfg.full_matrices)));

    let mut warnings: Vec<String> = report.warnings.clone();
    if let Some(para) = paranoid_json(cfg, &inst, &report)? {
        top.push(("paranoid", para));
    }

    let mut lstsq_failed = false;
    if let Some(b_vec) = b {
        let db_vec = db.unwrap_or_else(|| Mat::zeros(inst.t().rows(), 1));
        match lstsq_json(&inst, &report, b_vec, db_vec) {
            Ok((json, ok)) => {
                lstsq_failed = !ok;
                top.push(("lstsq", json));
            }
            Err(CliError::Core(Error::NotStable(msg))) => {
                warnings.push(format!("least-squares section skipped: {msg}"));
            }
            Err(e) => return Err(e),
        }
    }

    top.push((
        "warnings",
        Json::Arr(warnings.iter().map(|w| Json::Str(w.clone())).collect()),
    ));

    let exit_code = exit_code_for(&report, lstsq_failed);
    Ok(AnalyzeOutput {
        report_text: Json::Obj(
            top.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        )
        .to_pretty_string(),
        exit_code,
    })
}

fn exit_code_for(report: &StabilityReport, lstsq_failed: bool) -> i32 {
    if report.predicates.class != StabilityClass::Stable {
        return 2;
    }
    if report.formula_error.is_some() {
        return 3;
    }
    if !report.asserted_rows_hold() || lstsq_failed {
        return 3;
    }
    0
}

fn meta_json(cfg: &AnalyzeConfig, inst: &PerturbationInstance) -> Json {
    let source = match &cfg.source {
        Source::Files { t, dt, b, db } => {
            let mut f = vec![
                ("type", Json::Str("files".into())),
                ("t", Json::Str(t.display().to_string())),
                ("dt", Json::Str(dt.display().to_string())),
            ];
            if let Some(b) = b {
                f.push(("b", Json::Str(b.display().to_string())));
            }
            if let Some(db) = db {
                f.push(("db", Json::Str(db.display().to_string())));
            }
            Json::obj(f)
        }
        Source::Surrogate { n, eps } => Json::obj(vec![
            ("type", Json::Str("surrogate".into())),
            ("n", Json::UInt(*n as u64)),
            ("eps", Json::Num(*eps)),
        ]),
        Source::Generated {
            kind,
            m,
            n,
            rank,
            scale,
        } => Json::obj(vec![
            ("type", Json::Str("generated".into())),
            (
                "kind",
                Json::Str(
                    match kind {
                        GenKind::Stable => "stable",
                        GenKind::Unstable => "unstable",
                        GenKind::Boundary => "boundary",
                    }
                    .into(),
                ),
            ),
            ("m", Json::UInt(*m as u64)),
            ("n", Json::UInt(*n as u64)),
            ("rank", Json::UInt(*rank as u64)),
            ("scale", Json::Num(*scale)),
        ]),
    };
    Json::obj(vec![
        ("tool", Json::Str("mpinv".into())),
        ("source", source),
        ("m", Json::UInt(inst.t().rows() as u64)),
        ("n", Json::UInt(inst.t().cols() as u64)),
        ("rank_t", Json::UInt(inst.rank_t() as u64)),
        ("rank_tbar", Json::UInt(inst.rank_tbar() as u64)),
        ("rank_tol", Json::Num(inst.rank_tol())),
        ("stability_margin", Json::Num(inst.stability_margin())),
        (
            "metric",
            Json::Str(
                match cfg.metric {
                    MetricKind::Standard => "standard",
                    MetricKind::Graph => "graph",
                }
                .into(),
            ),
        ),
        ("paranoid", Json::Bool(cfg.paranoid)),
        ("seed", Json::UInt(cfg.seed)),
    ])
}

fn operators_json(report: &StabilityReport, full: bool) -> Json {
    let entries = report.g.rows() * report.g.cols();
    let include = full || entries <= MAX_REPORT_ENTRIES;
    let mut fields = vec![("included", Json::Bool(include))];
    if include {
        fields.push(("g", matrix_json(&report.g)));
        if let Some(formula) = &report.tbar_dag_formula {
            fields.push(("tbar_dag_formula", matrix_json(formula)));
        }
        fields.push(("tbar_dag_oracle", matrix_json(&report.tbar_dag_oracle)));
    } else {
        fields.push((
            "note",
            Json::Str(format!(
                "matrices with {entries} entries omitted; rerun with --full-matrices to include"
            )),
        ));
    }
    Json::obj(fields)
}

fn paranoid_json(
    cfg: &AnalyzeConfig,
    inst: &PerturbationInstance,
    report: &StabilityReport,
) -> Result<Option<Json>> {
    if !cfg.paranoid || report.predicates.class != StabilityClass::Stable {
        return Ok(None);
    }
    // Compare the perturbed-MP formula under both domain-adjoint conventions:
    // W built from T (the default) and W built from Tbar.
    let oracle = report.tbar_dag_oracle.clone();
    let dist = |m: &Mat| spectral_norm(&(m - &oracle));
    let standard = mpinv_core::perturb::perturbed_mp(inst, MetricKind::Standard)?;
    let graph_t = mpinv_core::perturb::perturbed_mp(inst, MetricKind::Graph)?;
    let gs_bar = GraphSpace::new(inst.tbar())?;
    let graph_tbar = perturbed_mp_with_graph(inst, &gs_bar)?;
    Ok(Some(Json::obj(vec![
        ("standard_dist", Json::Num(dist(&standard))),
        ("graph_w_t_dist", Json::Num(dist(&graph_t))),
        ("graph_w_tbar_dist", Json::Num(dist(&graph_tbar))),
    ])))
}

fn pair_json(pair: &SolutionPair) -> Json {
    Json::obj(vec![
        ("lhs", Json::Num(pair.bound.lhs)),
        ("rhs", Json::Num(pair.bound.rhs)),
        ("holds", Json::Bool(pair.bound.holds)),
        ("membership_residual", Json::Num(pair.membership_residual)),
    ])
}

fn lstsq_json(
    inst: &PerturbationInstance,
    _report: &StabilityReport,
    b: Mat,
    db: Mat,
) -> Result<(Json, bool)> {
    let problem = LsqProblem::new(inst, b, db)?;
    let z = Mat::zeros(inst.t().cols(), 1);
    let fwd = forward_pair(&problem, &z)?;
    let bwd = backward_pair(&problem, &z)?;
    let (as_printed, derived_safe) = solution_bounds(&problem)?;
    let ok = fwd.bound.holds
        && bwd.bound.holds
        && derived_safe.holds
        && fwd.membership_residual <= 1e-9
        && bwd.membership_residual <= 1e-9;
    let json = Json::obj(vec![
        ("forward", pair_json(&fwd)),
        ("backward", pair_json(&bwd)),
        ("theorem42_as_printed", bound_row_json(&as_printed)),
        ("theorem42_derived_safe", bound_row_json(&derived_safe)),
    ]);
    Ok((json, ok))
}
