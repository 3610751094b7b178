use clap::{Args, Parser, Subcommand};
use mpinv_cli::analyze::{run_analyze, AnalyzeConfig, Source};
use mpinv_cli::error::{CliError, Result};
use mpinv_cli::gen::{gen_base, gen_surrogate, GenKind};
use mpinv_cli::matfile;
use mpinv_cli::sweep::{run_sweep, SweepConfig};
use mpinv_core::perturb::{InstanceOptions, MetricKind};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mpinv")]
#[command(about = "Numerical certification of Moore-Penrose inverse perturbation bounds")]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Relative singular-value cutoff for rank decisions (default:
    /// max(m, n) * machine epsilon)
    #[arg(long)]
    rank_tol: Option<f64>,

    /// Guard band half-width for the stability classification
    #[arg(long, default_value_t = 1e-6)]
    stability_margin: f64,

    /// RNG seed for generators and sampling
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Commands {
    /// Analyze one perturbation instance and write a JSON report
    Analyze {
        #[command(flatten)]
        common: CommonOpts,

        /// Matrix file for T
        #[arg(long, requires = "dt")]
        t: Option<PathBuf>,

        /// Matrix file for dT
        #[arg(long, requires = "t")]
        dt: Option<PathBuf>,

        /// Optional right-hand side b (enables the least-squares section)
        #[arg(long)]
        b: Option<PathBuf>,

        /// Optional right-hand side perturbation db
        #[arg(long, requires = "b")]
        db: Option<PathBuf>,

        /// Generate the finite-difference surrogate instead of reading files: N,EPS
        #[arg(long, value_name = "N,EPS", conflicts_with_all = ["t", "dt"])]
        surrogate: Option<String>,

        /// Generate a random instance instead of reading files: KIND,M,N,RANK,SCALE
        #[arg(long, value_name = "KIND,M,N,RANK,SCALE", conflicts_with_all = ["t", "dt", "surrogate"])]
        gen: Option<String>,

        /// Domain metric for the closed-form adjoint: standard or graph
        #[arg(long, default_value = "standard")]
        metric: String,

        /// Also compare both graph-metric adjoint conventions (W from T and
        /// W from Tbar) against the oracle
        #[arg(long)]
        paranoid: bool,

        /// Check a T-boundedness certificate |dT x| <= a|x| + b|Tx|: A,B
        #[arg(long, value_name = "A,B")]
        cert: Option<String>,

        /// Number of random unit vectors for the certificate check
        #[arg(long, default_value_t = 200)]
        cert_samples: usize,

        /// Include G and the pseudoinverses in the report regardless of size
        #[arg(long)]
        full_matrices: bool,

        /// Output path (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a batch of generated instances across scales, writing CSV
    Sweep {
        #[command(flatten)]
        common: CommonOpts,

        /// Number of instances
        #[arg(long, default_value_t = 50)]
        count: usize,

        /// Codomain dimension
        #[arg(long, default_value_t = 8)]
        m: usize,

        /// Domain dimension
        #[arg(long, default_value_t = 6)]
        n: usize,

        /// Rank of the generated operator
        #[arg(long, default_value_t = 4)]
        rank: usize,

        /// Perturbation kind: stable, unstable or boundary
        #[arg(long, default_value = "stable")]
        kind: String,

        /// Comma-separated perturbation scales
        #[arg(long, default_value = "1e-4,1e-3,1e-2,1e-1")]
        scales: String,

        /// Output CSV path (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate an instance and write its matrices to files
    Gen {
        #[command(flatten)]
        common: CommonOpts,

        /// Random instance spec: KIND,M,N,RANK,SCALE
        #[arg(long, value_name = "KIND,M,N,RANK,SCALE", conflicts_with = "surrogate")]
        spec: Option<String>,

        /// Surrogate spec: N,EPS
        #[arg(long, value_name = "N,EPS")]
        surrogate: Option<String>,

        /// Output path for T
        #[arg(long)]
        out_t: PathBuf,

        /// Output path for dT
        #[arg(long)]
        out_dt: PathBuf,
    },
}

fn main() -> ExitCode {
    // Deterministic kernels: identical inputs must give identical bytes.
    faer::set_global_parallelism(faer::Par::Seq);
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Commands::Analyze {
            common,
            t,
            dt,
            b,
            db,
            surrogate,
            gen,
            metric,
            paranoid,
            cert,
            cert_samples,
            full_matrices,
            out,
        } => {
            let source = if let Some(s) = surrogate {
                let (n, eps) = parse_surrogate(&s)?;
                Source::Surrogate { n, eps }
            } else if let Some(g) = gen {
                let (kind, m, n, rank, scale) = parse_gen_spec(&g)?;
                Source::Generated {
                    kind,
                    m,
                    n,
                    rank,
                    scale,
                }
            } else if let (Some(t), Some(dt)) = (t, dt) {
                Source::Files { t, dt, b, db }
            } else {
                return Err(CliError::Usage(
                    "provide --t/--dt files, --surrogate, or --gen".into(),
                ));
            };
            let cfg = AnalyzeConfig {
                source,
                metric: parse_metric(&metric)?,
                paranoid,
                rank_tol: common.rank_tol,
                stability_margin: common.stability_margin,
                seed: common.seed,
                cert: cert.map(|c| parse_pair(&c, "cert")).transpose()?,
                cert_samples,
                full_matrices,
            };
            let output = run_analyze(&cfg)?;
            write_out(out.as_deref(), &output.report_text)?;
            Ok(output.exit_code)
        }
        Commands::Sweep {
            common,
            count,
            m,
            n,
            rank,
            kind,
            scales,
            out,
        } => {
            let cfg = SweepConfig {
                count,
                m,
                n,
                rank,
                kind: GenKind::parse(&kind)?,
                scales: parse_scales(&scales)?,
                seed: common.seed,
                options: InstanceOptions {
                    rank_tol: common.rank_tol,
                    stability_margin: common.stability_margin,
                },
            };
            let csv = run_sweep(&cfg)?;
            write_out(out.as_deref(), &csv)?;
            Ok(0)
        }
        Commands::Gen {
            common,
            spec,
            surrogate,
            out_t,
            out_dt,
        } => {
            let (t, dt) = if let Some(s) = surrogate {
                let (n, eps) = parse_surrogate(&s)?;
                let inst = gen_surrogate(n, eps, common.seed)?;
                (inst.t().clone(), inst.dt().clone())
            } else if let Some(g) = spec {
                let (kind, m, n, rank, scale) = parse_gen_spec(&g)?;
                let rank_tol = common
                    .rank_tol
                    .unwrap_or_else(|| mpinv_core::linalg::default_rank_tol(m, n));
                let base = gen_base(m, n, rank, kind, common.seed, rank_tol)?;
                (base.t, base.direction.scale_re(scale))
            } else {
                return Err(CliError::Usage("provide --spec or --surrogate".into()));
            };
            matfile::write_matrix(&out_t, &t)?;
            matfile::write_matrix(&out_dt, &dt)?;
            Ok(0)
        }
    }
}

fn write_out(path: Option<&std::path::Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Io(format!("writing {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_metric(s: &str) -> Result<MetricKind> {
    match s {
        "standard" => Ok(MetricKind::Standard),
        "graph" => Ok(MetricKind::Graph),
        other => Err(CliError::Usage(format!(
            "unknown metric {other:?} (expected standard or graph)"
        ))),
    }
}

fn parse_pair(s: &str, flag: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Usage(format!("--{flag} expects A,B")));
    }
    Ok((parse_f64(parts[0], flag)?, parse_f64(parts[1], flag)?))
}

fn parse_surrogate(s: &str) -> Result<(usize, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Usage("--surrogate expects N,EPS".into()));
    }
    Ok((
        parse_usize(parts[0], "surrogate")?,
        parse_f64(parts[1], "surrogate")?,
    ))
}

fn parse_gen_spec(s: &str) -> Result<(GenKind, usize, usize, usize, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 5 {
        return Err(CliError::Usage("--gen expects KIND,M,N,RANK,SCALE".into()));
    }
    Ok((
        GenKind::parse(parts[0])?,
        parse_usize(parts[1], "gen")?,
        parse_usize(parts[2], "gen")?,
        parse_usize(parts[3], "gen")?,
        parse_f64(parts[4], "gen")?,
    ))
}

fn parse_scales(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|p| parse_f64(p, "scales")).collect()
}

fn parse_f64(s: &str, flag: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("--{flag}: {s:?} is not a number")))
}

fn parse_usize(s: &str, flag: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("--{flag}: {s:?} is not a nonnegative integer")))
}
