use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use upcap::capacity2d::{self, GridCondenser, Preconditioner, SolveOptions};
use upcap::geom::Point;
use upcap::mask::DomainMask;
use upcap::specfun::{self, TauMode};
use upcap::testfn::{self, CubeTestOptions, EvalOptions};
use upcap::whitney::{self, ExportFormat};
use upcap::{bounds, metrics, sets, Error, Result};

#[derive(Parser)]
#[command(name = "upcap", about = "Uniform perfectness, condenser capacity and Whitney-cube experiments")]
#[command(disable_version_flag = true)]
struct Cli {
    /// Print version and constant-table provenance.
    #[arg(long)]
    version: bool,

    /// Worker threads for independent solves and scans.
    #[arg(long, default_value_t = 1, global = true)]
    jobs: usize,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the middle-third Cantor set.
    Cantor {
        #[arg(long)]
        depth: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the uniform-perfectness parameter of a point set.
    UpEstimate {
        #[arg(long)]
        set: PathBuf,
        #[arg(long, default_value_t = sets::UP_SAFETY)]
        safety: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form bounds for UP_n(c) sets.
    Bounds {
        #[arg(long)]
        c: f64,
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Evaluate the lower bound for cap(G, E) with this UP constant of the boundary.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, requires = "delta")]
        de: Option<f64>,
        #[arg(long, requires = "delta")]
        dist: Option<f64>,
        #[arg(long, default_value = "numeric")]
        tau: String,
    },
    /// Whitney decomposition of a raster domain.
    Whitney {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, default_value_t = 0)]
        kmin: u32,
        #[arg(long, default_value_t = 8)]
        kmax: u32,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Condenser capacity.
    Capacity {
        #[command(subcommand)]
        action: CapacityCmd,
    },
    /// Metric computations.
    Metrics {
        #[command(subcommand)]
        action: MetricsCmd,
    },
    /// Capacity test functions.
    Testfn {
        #[command(subcommand)]
        action: TestfnCmd,
    },
}

#[derive(Subcommand)]
enum CapacityCmd {
    /// Solve a condenser given as JSON masks.
    Solve {
        #[arg(long)]
        cond: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
        #[arg(long, default_value = "mic0")]
        precond: String,
        /// Repeat on a refined grid and extrapolate.
        #[arg(long)]
        refine: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact ring capacity omega_{n-1} (log(b/a))^{1-n}.
    Ring {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
    },
}

#[derive(Subcommand)]
enum MetricsCmd {
    /// Quasihyperbolic distance on the cell graph.
    Qh {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, value_parser = parse_point)]
        from: Point,
        #[arg(long, value_parser = parse_point)]
        to: Point,
    },
}

#[derive(Subcommand)]
enum TestfnCmd {
    /// Whitney-cube scan: u_alpha over cube centres and the cube capacity sandwich.
    Scan {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, default_value_t = testfn::DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long, default_value_t = 6)]
        kmax: u32,
        #[arg(long, default_value_t = 0.03)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Single evaluation of u_alpha.
    Eval {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, value_parser = parse_point)]
        at: Point,
        #[arg(long, default_value_t = testfn::DEFAULT_ALPHA)]
        alpha: f64,
    },
}

#[derive(Args)]
struct DomainArgs {
    /// Mask file: JSON (rows or runs) or plain PBM.
    #[arg(long, conflicts_with = "builtin")]
    mask: Option<PathBuf>,
    /// Built-in domain: square, l-shape, punctured-square, disk, strip.
    #[arg(long)]
    builtin: Option<String>,
    /// Raster level for built-in domains and PBM files.
    #[arg(long, default_value_t = 10)]
    level: u32,
}

impl DomainArgs {
    fn load(&self) -> Result<DomainMask> {
        match (&self.mask, &self.builtin) {
            (Some(path), _) => {
                let text = fs::read_to_string(path)?;
                if path.extension().is_some_and(|e| e == "pbm") {
                    DomainMask::from_pbm(&text, self.level, vec![0, 0])
                } else {
                    DomainMask::from_json(&text)
                }
            }
            (None, Some(name)) => DomainMask::builtin(name, self.level),
            (None, None) => Err(Error::Malformed("give --mask FILE or --builtin NAME".into())),
        }
    }
}

fn parse_point(s: &str) -> std::result::Result<Point, String> {
    let coords: std::result::Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    match coords {
        Ok(c) if c.len() == 2 => Ok(Point::new(c)),
        _ => Err(format!("expected 'x,y', got '{s}'")),
    }
}

fn tau_mode(s: &str) -> Result<TauMode> {
    match s {
        "numeric" => Ok(TauMode::Numeric),
        "conservative" => Ok(TauMode::Conservative),
        other => Err(Error::Unsupported(format!("tau mode '{other}'"))),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn pretty<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

fn version_text() -> String {
    let mut s = format!("upcap {}\n", env!("CARGO_PKG_VERSION"));
    s.push_str(&format!("gamma function: {}\n", specfun::GAMMA_METHOD));
    s.push_str("kissing numbers (n, kappa, N*):\n");
    for &(n, _) in specfun::KISSING_TABLE.iter() {
        if let Ok(e) = specfun::kissing_table(n, None) {
            s.push_str(&format!("  {n} {} {}\n", e.kappa, e.n_star));
        }
    }
    s
}

#[derive(Serialize)]
struct WhitneySummary {
    cubes: usize,
    remainder: usize,
    #[serde(rename = "Nk")]
    nk: std::collections::BTreeMap<u32, usize>,
    verify: whitney::VerifyReport,
}

#[derive(Serialize)]
struct ScanSummary {
    inf: testfn::InfScan,
    up_parameter: f64,
    cubes: testfn::CubeTestReport,
}

#[derive(Serialize)]
struct QhSummary {
    j: f64,
    k: metrics::QhReport,
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Cantor { depth, out } => {
            let e = sets::cantor_middle_third(depth);
            emit(out.as_deref(), &e.to_json()?)
        }
        Command::UpEstimate { set, safety, out } => {
            let e = sets::CompactSet::from_json(&fs::read_to_string(set)?)?;
            let est = sets::up_parameter_estimate_with(&e, safety)?;
            emit(out.as_deref(), &pretty(&est)?)
        }
        Command::Bounds {
            c,
            n,
            delta,
            de,
            dist,
            tau,
        } => {
            let mode = tau_mode(&tau)?;
            let mut reports = bounds::up_summary(n, c)?;
            if let Some(delta) = delta {
                let (de, dist) = match (de, dist) {
                    (Some(a), Some(b)) => (a, b),
                    _ => return Err(Error::Malformed("--delta needs --de and --dist".into())),
                };
                reports.push(bounds::cap_ge_lower(n, delta, de, dist, mode)?);
            }
            emit(None, &pretty(&reports)?)
        }
        Command::Whitney {
            domain,
            kmin,
            kmax,
            svg,
            json,
        } => {
            let g = domain.load()?;
            let d = whitney::decompose(&g, kmin, kmax)?;
            if let Some(p) = svg {
                fs::write(p, whitney::export(&d, ExportFormat::Svg)?)?;
            }
            if let Some(p) = json {
                fs::write(p, whitney::export(&d, ExportFormat::Json)?)?;
            }
            let rep = whitney::verify(&d, &g);
            let summary = WhitneySummary {
                cubes: d.cubes.len(),
                remainder: d.remainder.len(),
                nk: whitney::level_counts(&d),
                verify: rep,
            };
            emit(None, &pretty(&summary)?)
        }
        Command::Capacity { action } => match action {
            CapacityCmd::Solve {
                cond,
                tol,
                max_iter,
                precond,
                refine,
                out,
            } => {
                let c = GridCondenser::from_json(&fs::read_to_string(cond)?)?;
                let opts = SolveOptions {
                    tol,
                    max_iter,
                    precond: precond.parse::<Preconditioner>()?,
                };
                let rep = if refine {
                    capacity2d::solve_capacity_refined(&c, &opts)?
                } else {
                    capacity2d::solve_capacity(&c, &opts)?
                };
                emit(out.as_deref(), &pretty(&rep)?)
            }
            CapacityCmd::Ring { n, a, b } => {
                emit(None, &format!("{:.15e}", capacity2d::ring_modulus_exact(n, a, b)?))
            }
        },
        Command::Metrics {
            action: MetricsCmd::Qh { domain, from, to },
        } => {
            let g = domain.load()?;
            let k = metrics::quasihyperbolic_approx(&g, &from, &to)?;
            let j = metrics::j_metric_in(&g, &from, &to)?;
            emit(None, &pretty(&QhSummary { j, k })?)
        }
        Command::Testfn { action } => match action {
            TestfnCmd::Scan {
                domain,
                alpha,
                kmax,
                tol,
                out,
                csv,
            } => {
                let g = domain.load()?;
                let d = whitney::decompose(&g, 0, kmax)?;
                let eval = EvalOptions::default();
                let inf = testfn::inf_scan(&g, &d, alpha, &eval)?;
                let cubes = testfn::whitney_cube_test(
                    &g,
                    &d,
                    &CubeTestOptions {
                        eval,
                        tolerance: tol,
                        all_points: false,
                    },
                )?;
                if let Some(p) = csv {
                    fs::write(p, testfn::cube_report_csv(&cubes))?;
                }
                let up_parameter = testfn::up_param_from_inf_u(2, inf.corrected_inf)?;
                emit(
                    out.as_deref(),
                    &pretty(&ScanSummary {
                        inf,
                        up_parameter,
                        cubes,
                    })?,
                )
            }
            TestfnCmd::Eval { domain, at, alpha } => {
                let g = domain.load()?;
                let s = testfn::u_alpha(&testfn::TestDomain::mask(g), &at, alpha, &EvalOptions::default())?;
                emit(None, &pretty(&s)?)
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.version {
        print!("{}", version_text());
        return ExitCode::SUCCESS;
    }
    let Some(cmd) = cli.command else {
        eprintln!("error: no command given (see --help)");
        return ExitCode::from(1);
    };
    if cli.jobs == 0 {
        eprintln!("error: --jobs must be at least 1");
        return ExitCode::from(1);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
