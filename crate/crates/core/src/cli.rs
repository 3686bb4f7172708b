//! Command-line front end. Exit codes: 0 success, 1 usage or validation,
//! 2 numeric failure, 3 failed verification.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::constructions::{build, theoretical_hardy, ConstructionError, Family};
use crate::estimators::{hardy_window, harmonic_measure_upper, EstimateError};
use crate::geometry::{circle_arcs, theta_profile, CombSpec, DomainRef, GeometryError, Tooth};
use crate::io::{self, IoError};
use crate::stochastic::{
    default_start, hardy_mc, harmonic_measure_wos, run_batch_with_threads, tail_fit, HitClass, SimConfig,
    StochasticError, TailMethod,
};
use crate::verify::{self, Suite};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hardylab", version, about = "Hardy numbers of comb domains, by quadrature and by Brownian exit times")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    Case1,
    Case2,
    Case3,
    Sector,
    Slitplane,
    Halfplane,
    Explicit,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Hill,
    Ls,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SuiteArg {
    Fast,
    Full,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a domain file and print its theoretical Hardy number.
    Construct {
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// Opening angle in radians (case1, sector).
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<f64>,
        /// Slit height (slitplane).
        #[arg(long, allow_hyphen_values = true)]
        b0: Option<f64>,
        /// JSON list of [n, x, b] triples (explicit).
        #[arg(long)]
        teeth: Option<PathBuf>,
        #[arg(long)]
        min_gap: Option<f64>,
        /// Continue an explicit comb past its last listed teeth.
        #[arg(long)]
        extend: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the angular width of the real-axis arc.
    ThetaProfile {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        t_min: f64,
        #[arg(long)]
        t_max: f64,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long)]
        log: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Window estimate of the Hardy number from the angular-width integral.
    HardyEstimate {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        r1: f64,
        #[arg(long)]
        r2: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Simulate Brownian exit times into a batch file.
    ExitTimes {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e4)]
        t_cap: f64,
        #[arg(long, default_value_t = 0.01)]
        dt_max: f64,
        #[arg(long, default_value_t = 0.1)]
        step_factor: f64,
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        /// Start point as "x,y"; defaults to a standard interior point.
        #[arg(long, allow_hyphen_values = true)]
        z0: Option<String>,
        #[arg(long, env = "HARDYLAB_THREADS")]
        threads: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the exit-time tail exponent of a batch.
    TailFit {
        #[arg(long)]
        batch: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        k: Option<usize>,
        /// Quantile window "q1,q2" for the survival fit.
        #[arg(long)]
        window: Option<String>,
    },
    /// Walk-on-spheres harmonic measure of the arcs of a circle.
    HarmonicMeasure {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, allow_hyphen_values = true)]
        z0: Option<String>,
        /// Add the angular-width upper bound (combs only).
        #[arg(long)]
        with_bound: bool,
        #[arg(long, env = "HARDYLAB_THREADS")]
        threads: Option<usize>,
    },
    /// Run the acceptance checks.
    Verify {
        #[arg(long, value_enum, default_value = "fast")]
        suite: SuiteArg,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Debug)]
struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    fn numeric(message: impl Into<String>) -> Self {
        Self { code: EXIT_NUMERIC, message: message.into() }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<ConstructionError> for CliError {
    fn from(e: ConstructionError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<EstimateError> for CliError {
    fn from(e: EstimateError) -> Self {
        match e {
            EstimateError::BadRange { .. }
            | EstimateError::InvalidTolerance(_)
            | EstimateError::InvalidPath(_)
            | EstimateError::Geometry(_) => Self::usage(e.to_string()),
            _ => Self::numeric(e.to_string()),
        }
    }
}

impl From<StochasticError> for CliError {
    fn from(e: StochasticError) -> Self {
        match e {
            StochasticError::CapContamination { .. } | StochasticError::InsufficientSamples { .. } => {
                Self::numeric(e.to_string())
            }
            _ => Self::usage(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Finite values as numbers, infinities as `"inf"`.
fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn parse_point(s: &str) -> Result<Complex64> {
    let (x, y) = s.split_once(',').ok_or_else(|| CliError::usage(format!("expected \"x,y\", got {s:?}")))?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|_| CliError::usage(format!("bad coordinate {v:?}")));
    Ok(Complex64::new(p(x)?, p(y)?))
}

fn need_comb(d: &DomainRef, what: &str) -> Result<CombSpec> {
    d.as_comb().cloned().ok_or_else(|| CliError::numeric(format!("{what} requires a comb")))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn construct(
    family: FamilyArg,
    theta: Option<f64>,
    b0: Option<f64>,
    teeth: Option<PathBuf>,
    min_gap: Option<f64>,
    extend: bool,
    out: Option<PathBuf>,
) -> Result<Value> {
    let need_theta = || theta.ok_or_else(|| CliError::usage("--theta is required for this family"));
    let domain = match family {
        FamilyArg::Case1 => build(Family::Case1 { theta: need_theta()? })?.domain,
        FamilyArg::Case2 => build(Family::Case2)?.domain,
        FamilyArg::Case3 => build(Family::Case3)?.domain,
        FamilyArg::Sector => build(Family::Sector { theta: need_theta()? })?.domain,
        FamilyArg::Slitplane => {
            build(Family::SlitPlane { b0: b0.ok_or_else(|| CliError::usage("--b0 is required for slitplane"))? })?.domain
        }
        FamilyArg::Halfplane => DomainRef::UpperHalfPlane,
        FamilyArg::Explicit => {
            let path = teeth.ok_or_else(|| CliError::usage("--teeth is required for explicit combs"))?;
            let text = fs::read_to_string(&path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            let rows: Vec<(i64, f64, f64)> = serde_json::from_str(&text)
                .map_err(|e| CliError::usage(format!("{}: expected [[n, x, b], ...]: {e}", path.display())))?;
            let teeth = rows.into_iter().map(|(n, x, b)| Tooth { n, x, b }).collect();
            DomainRef::Comb(CombSpec::explicit(teeth, min_gap, extend)?)
        }
    };
    if let Some(path) = &out {
        io::save_domain(path, &domain)?;
    }
    let mut report = json!({
        "kind": match domain {
            DomainRef::Comb(_) => "comb",
            DomainRef::Sector { .. } => "sector",
            DomainRef::SlitPlane { .. } => "slitplane",
            DomainRef::UpperHalfPlane => "halfplane",
        },
        "domain_digest": io::domain_digest(&domain),
        "out": out.as_ref().map(|p| p.display().to_string()),
    });
    match theoretical_hardy(&domain) {
        Ok(h) => {
            report["h_theory"] = num(h.value());
            report["critical_moment"] = num(h.critical_moment());
            report["source"] = json!(h.source().as_str());
        }
        Err(ConstructionError::UnknownDomain { lower, upper }) => {
            report["h_theory"] = Value::Null;
            report["h_lower"] = num(lower);
            report["h_upper"] = num(upper);
        }
        Err(e) => return Err(e.into()),
    }
    Ok(report)
}

fn profile(domain: &Path, t_min: f64, t_max: f64, points: usize, log: bool) -> Result<String> {
    let d = io::load_domain(domain)?;
    let spec = need_comb(&d, "profile")?;
    if !(t_min > 0.0 && t_max >= t_min && t_max.is_finite()) {
        return Err(CliError::usage(format!("need 0 < t-min <= t-max, got {t_min}, {t_max}")));
    }
    if points == 0 {
        return Err(CliError::usage("--points must be at least 1"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::usage(e.to_string());
    w.write_record(["t", "theta", "arc_count", "bound"]).map_err(csv_err)?;
    for i in 0..points {
        let s = if points == 1 { 0.0 } else { i as f64 / (points - 1) as f64 };
        let t = if log { t_min * (t_max / t_min).powf(s) } else { t_min + (t_max - t_min) * s };
        let theta = theta_profile(&spec, t)?.theta;
        let arcs = circle_arcs(&spec, t)?.arcs.len();
        let bound = spec.case1_theta().map(|th| format!("{:e}", th + 2.0 / (t * (th / 2.0).sin()))).unwrap_or_default();
        w.write_record([format!("{t:e}"), format!("{theta:e}"), arcs.to_string(), bound]).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::usage(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::usage(e.to_string()))
}

fn estimate(domain: &Path, r1: f64, r2: f64, tol: f64) -> Result<Value> {
    let d = io::load_domain(domain)?;
    let spec = need_comb(&d, "hardy-estimate")?;
    let est = hardy_window(&spec, r1, r2, tol)?;
    Ok(json!({
        "r1": est.r1,
        "r2": est.r2,
        "integral": est.integral.value,
        "error_bound": est.integral.error_bound,
        "segments": est.integral.segments,
        "h_window": num(est.h_window),
        "d_lower": est.d_lower,
        "omega_upper": est.omega_upper,
    }))
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::usage(e.to_string()))
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    let print = |out: &mut dyn Write, v: &Value| {
        writeln!(out, "{v}").map_err(|e| CliError::usage(e.to_string()))
    };
    match cmd {
        Command::Construct { family, theta, b0, teeth, min_gap, extend, out: path } => {
            let v = construct(family, theta, b0, teeth, min_gap, extend, path)?;
            print(out, &v)?;
        }
        Command::ThetaProfile { domain, t_min, t_max, points, log, out: path } => {
            let text = profile(&domain, t_min, t_max, points, log)?;
            match path {
                Some(p) => write_text(&p, &text)?,
                None => out.write_all(text.as_bytes()).map_err(|e| CliError::usage(e.to_string()))?,
            }
        }
        Command::HardyEstimate { domain, r1, r2, tol } => print(out, &estimate(&domain, r1, r2, tol)?)?,
        Command::ExitTimes { domain, samples, seed, t_cap, dt_max, step_factor, eps, z0, threads, out: path } => {
            let d = io::load_domain(&domain)?;
            let z0 = z0.as_deref().map(parse_point).transpose()?.unwrap_or_else(|| default_start(&d));
            let cfg = SimConfig { step_factor, dt_max, eps_absorb: eps, t_cap, r_stop: None, master_seed: seed };
            let threads = match threads {
                Some(0) => return Err(CliError::usage("--threads must be at least 1")),
                Some(n) => n,
                None => rayon::current_num_threads(),
            };
            let batch = run_batch_with_threads(&d, z0, &cfg, samples, threads)?;
            io::save_batch(&path, &batch)?;
            print(
                out,
                &json!({
                    "m": batch.len(),
                    "capped": batch.capped_count(),
                    "capped_fraction": batch.capped_fraction(),
                    "out": path.display().to_string(),
                }),
            )?;
        }
        Command::TailFit { batch, method, k, window } => {
            let b = io::load_batch(&batch)?;
            let method = match method {
                MethodArg::Hill => TailMethod::Hill { k },
                MethodArg::Ls => {
                    let (q_lo, q_hi) = match window {
                        None => TailMethod::DEFAULT_WINDOW,
                        Some(w) => {
                            let p = parse_point(&w)?;
                            (p.re, p.im)
                        }
                    };
                    TailMethod::SurvivalLs { q_lo, q_hi }
                }
            };
            let fit = tail_fit(&b, method)?;
            let h = hardy_mc(&fit);
            print(
                out,
                &json!({
                    "method": fit.method.name(),
                    "k": fit.k,
                    "alpha_hat": fit.alpha_hat,
                    "stderr": fit.stderr,
                    "h_hat": h.h_hat,
                    "h_stderr": h.stderr,
                    "out_of_range": h.out_of_range,
                    "capped_fraction": fit.capped_fraction,
                }),
            )?;
        }
        Command::HarmonicMeasure { domain, r, samples, eps, seed, z0, with_bound, threads } => {
            let d = io::load_domain(&domain)?;
            let z0 = z0.as_deref().map(parse_point).transpose()?.unwrap_or_else(|| match d {
                DomainRef::UpperHalfPlane => Complex64::new(0.0, 1.0),
                _ => Complex64::new(0.0, 0.0),
            });
            let bound = if with_bound {
                Some(harmonic_measure_upper(&need_comb(&d, "--with-bound")?, r)?)
            } else {
                None
            };
            let est = pool(threads)?.install(|| harmonic_measure_wos(&d, z0, r, samples, eps, seed))?;
            let decomposition = d.circle_arcs(r)?;
            let arcs: Vec<Value> = est
                .classes
                .iter()
                .zip(est.probabilities.iter().zip(&est.ci95))
                .filter_map(|(c, (p, ci))| match c {
                    HitClass::Arc(id) => {
                        let arc = decomposition.arcs[*id];
                        Some(json!({"id": id, "phi_lo": arc.phi_lo, "phi_hi": arc.phi_hi, "probability": p, "ci95": ci}))
                    }
                    HitClass::Boundary => None,
                })
                .collect();
            let last = est.probabilities.len() - 1;
            let (total, ci) = (est.circle_total(), est.circle_total_ci95());
            let mut v = json!({
                "r": r,
                "m": samples,
                "z0": [z0.re, z0.im],
                "arcs": arcs,
                "boundary": {"probability": est.probabilities[last], "ci95": est.ci95[last]},
                "mc_total": total,
                "mc_ci95": ci,
            });
            if let Some(b) = bound {
                v["bound"] = json!(b);
                v["within_bound"] = json!(total <= b + 3.0 * ci);
            }
            print(out, &v)?;
        }
        Command::Verify { suite, seed } => {
            let suite = match suite {
                SuiteArg::Fast => Suite::Fast,
                SuiteArg::Full => Suite::Full,
            };
            let reports = verify::run_suite(suite, seed, |r| {
                let _ = writeln!(out, "{r}");
                let _ = out.flush();
            });
            let passed = reports.iter().filter(|r| r.passed).count();
            writeln!(out, "{passed}/{} criteria passed", reports.len()).map_err(|e| CliError::usage(e.to_string()))?;
            if passed < reports.len() {
                return Ok(EXIT_VERIFY);
            }
        }
    }
    Ok(0)
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}
