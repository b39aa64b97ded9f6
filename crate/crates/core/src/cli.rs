//! Command-line front end: `lambda`, `rho0`, `figure1` and `verify`.
//!
//! Exit status: 0 success, 1 verification failure, 2 configuration error,
//! 3 precision exhaustion, 4 Hankel matrix not positive definite.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rug::Float;
use serde_json::{json, Value};

use crate::arith::{format_err, format_real, parse_real, Precision};
use crate::error::{Error, Result};
use crate::moments::{jacobi_from_file, moments_from_file, MomentSource};
use crate::qseries::QParam;
use crate::rho::{
    lower_bound, rho0_asc, rho0_asc_quadrature, rho0_freud, rho0_freud_quadrature, rho0_qhermite,
    rho0_qhermite_quadrature, rho0_sw_direct, rho0_sw_fast, ASCParam, FreudConstants, RhoValue,
};
use crate::spectra::EigenEnclosure;
use crate::sweep::{
    extrapolate, figure1_sweep, lambda_sequence, parse_q_grid, Extrapolation, SweepRow, DEFAULT_LAMBDA_TOL,
    DEFAULT_N_MAX, DEFAULT_RHO_TOL,
};
use crate::verify::{self, VerifyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub const PREC_ENV: &str = "HANKEL_INDET_PREC_BITS";
pub const DEFAULT_Q_GRID: &str = "0.05:0.05:0.90";

#[derive(Parser, Debug)]
#[command(name = "hankel-indet", version, about = "Smallest eigenvalues of Hankel matrices for indeterminate moment problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enclose lambda_N for N = 0..N_max and extrapolate the limit.
    Lambda(LambdaArgs),
    /// Evaluate rho_0 by every available route and the bound l = 1/rho_0.
    Rho0(Rho0Args),
    /// Percentage error 100 (s - l) / s over a grid of q (Stieltjes–Wigert).
    Figure1(Figure1Args),
    /// Run the invariant suites.
    Verify(VerifyArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Family {
    StieltjesWigert,
    AlSalamCarlitz,
    FreudQuartic,
    QInverseHermite,
    File,
    Jacobi,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Output {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct Common {
    /// Working precision in bits.
    #[arg(long = "prec-bits", env = PREC_ENV, default_value_t = Precision::DEFAULT.bits())]
    prec_bits: u32,
    /// Target tolerance (defaults depend on the command).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum, default_value_t = Output::Csv)]
    output: Output,
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include per-N enclosures in JSON output.
    #[arg(long)]
    verbose: bool,
}

#[derive(Args, Debug)]
struct QArgs {
    #[arg(long)]
    q: Option<String>,
    /// Log-normal weight parameter k, an alternative to --q with q = exp(-1/(2k^2)).
    #[arg(long = "k-weight", conflicts_with = "q")]
    k_weight: Option<String>,
}

#[derive(Args, Debug)]
struct LambdaArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[command(flatten)]
    q: QArgs,
    /// Moment file (family `file`) or recurrence file (family `jacobi`).
    #[arg(long)]
    path: Option<PathBuf>,
    #[arg(long = "N-max", default_value_t = DEFAULT_N_MAX)]
    n_max: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Rho0Args {
    #[arg(long, value_enum)]
    family: Family,
    #[command(flatten)]
    q: QArgs,
    /// Al-Salam–Carlitz parameter, q < a < 1/q.
    #[arg(long)]
    a: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Figure1Args {
    /// Grid as start:step:stop.
    #[arg(long = "q-grid", default_value = DEFAULT_Q_GRID)]
    q_grid: String,
    #[arg(long = "N-max", default_value_t = DEFAULT_N_MAX)]
    n_max: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    q: QArgs,
    #[arg(long = "N-max", default_value_t = 16)]
    n_max: usize,
    /// Run only these suites (repeatable).
    #[arg(long)]
    suite: Vec<String>,
    #[command(flatten)]
    common: Common,
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit status. Diagnostics go to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            // clap reports help/version as errors with status 0.
            let text = e.render().to_string();
            let _ = if code == 0 { write!(stdout, "{text}") } else { write!(stderr, "{text}") };
            return if code == 0 { EXIT_OK } else { EXIT_CONFIG };
        }
    };
    let result = match &cli.command {
        Command::Lambda(a) => cmd_lambda(a, stdout),
        Command::Rho0(a) => cmd_rho0(a, stdout),
        Command::Figure1(a) => cmd_figure1(a, stdout),
        Command::Verify(a) => cmd_verify(a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn precision(common: &Common) -> Result<Precision> {
    Precision::new(common.prec_bits)
}

fn q_param(args: &QArgs, prec: Precision, family: &str) -> Result<QParam> {
    match (&args.q, &args.k_weight) {
        (Some(q), _) => QParam::parse(prec, q),
        (None, Some(k)) => QParam::from_k_weight(prec, k),
        (None, None) => Err(Error::InvalidArgument(format!("family {family} needs --q or --k-weight"))),
    }
}

fn family_name(f: Family) -> &'static str {
    match f {
        Family::StieltjesWigert => "stieltjes-wigert",
        Family::AlSalamCarlitz => "al-salam-carlitz",
        Family::FreudQuartic => "freud-quartic",
        Family::QInverseHermite => "q-inverse-hermite",
        Family::File => "file",
        Family::Jacobi => "jacobi",
    }
}

/// Sink selected by `--out`.
fn with_sink(common: &Common, stdout: &mut dyn Write, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match &common.out {
        Some(path) => {
            let mut file = File::create(path)?;
            f(&mut file)?;
            file.flush()?;
            Ok(())
        }
        None => f(stdout),
    }
}

fn csv_writer(w: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::WriterBuilder::new().from_writer(w)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(io::Error::other(format!("{other:?}"))),
    }
}

fn write_json(w: &mut dyn Write, v: &Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, v).map_err(|e| Error::Io(e.into()))?;
    writeln!(w)?;
    Ok(())
}

fn num(x: &Float, prec: Precision) -> String {
    format_real(x, prec)
}

fn half_width(e: &EigenEnclosure) -> Float {
    let mut w = e.width();
    w /= 2;
    w
}

// --- lambda -----------------------------------------------------------------------

fn lambda_source(a: &LambdaArgs, prec: Precision) -> Result<MomentSource> {
    let need_path = || {
        a.path
            .clone()
            .ok_or_else(|| Error::InvalidArgument(format!("family {} needs --path", family_name(a.family))))
    };
    match a.family {
        Family::StieltjesWigert => Ok(MomentSource::stieltjes_wigert(q_param(&a.q, prec, "stieltjes-wigert")?)),
        Family::File => moments_from_file(need_path()?, prec),
        Family::Jacobi => jacobi_from_file(need_path()?, prec),
        other => Err(Error::InvalidArgument(format!(
            "lambda supports stieltjes-wigert, file and jacobi, not {}",
            family_name(other)
        ))),
    }
}

fn cmd_lambda(a: &LambdaArgs, stdout: &mut dyn Write) -> Result<i32> {
    let prec = precision(&a.common)?;
    let tol = a.common.tol.unwrap_or(DEFAULT_LAMBDA_TOL);
    let src = lambda_source(a, prec)?;
    let seq = lambda_sequence(&src, a.n_max, tol)?;
    let ex = if seq.entries.len() >= 4 { Some(extrapolate(&seq)?) } else { None };
    let shown = src.precision().at_least(prec.bits());
    with_sink(&a.common, stdout, |w| match a.common.output {
        Output::Csv => {
            let mut c = csv_writer(w);
            c.write_record(["kind", "N", "value", "err", "precision_bits"]).map_err(csv_err)?;
            for (n, e) in &seq.entries {
                let n = n.to_string();
                let bits = e.bits.to_string();
                let row = ["lambda", &n, &num(&e.mid(), shown), &format_err(&half_width(e)), &bits];
                c.write_record(row).map_err(csv_err)?;
            }
            if let Some(x) = &ex {
                let row = [
                    "extrapolated".to_string(),
                    a.n_max.to_string(),
                    num(&x.value, shown),
                    format!("{:e}", x.err),
                    x.value.prec().to_string(),
                ];
                c.write_record(&row).map_err(csv_err)?;
            }
            c.flush()?;
            Ok(())
        }
        Output::Json => {
            let entries: Vec<Value> = seq
                .entries
                .iter()
                .map(|(n, e)| {
                    json!({
                        "N": n,
                        "value": num(&e.mid(), shown),
                        "err": format_err(&half_width(e)),
                        "lo": num(&e.lo, shown),
                        "hi": num(&e.hi, shown),
                        "precision_bits": e.bits,
                    })
                })
                .collect();
            write_json(
                w,
                &json!({
                    "family": family_name(a.family),
                    "N_max": a.n_max,
                    "entries": entries,
                    "extrapolated": ex.as_ref().map(|x| extrapolation_json(x, shown)),
                }),
            )
        }
    })?;
    Ok(EXIT_OK)
}

fn extrapolation_json(x: &Extrapolation, prec: Precision) -> Value {
    json!({ "s": num(&x.value, prec), "err": format!("{:e}", x.err), "levels": x.levels })
}

// --- rho0 -------------------------------------------------------------------------

struct RhoReport {
    family: Family,
    routes: Vec<RhoValue>,
    extra: Vec<(&'static str, Float)>,
}

fn cmd_rho0(a: &Rho0Args, stdout: &mut dyn Write) -> Result<i32> {
    let prec = precision(&a.common)?;
    let tol = a.common.tol.unwrap_or(DEFAULT_RHO_TOL);
    // Quadrature routes converge geometrically but need far more work per
    // digit than the series; they stop at this tolerance.
    let quad_tol = tol.max(1e-20);
    let report = match a.family {
        Family::StieltjesWigert => {
            let q = q_param(&a.q, prec, "stieltjes-wigert")?;
            RhoReport {
                family: a.family,
                routes: vec![rho0_sw_fast(&q, tol)?, rho0_sw_direct(&q, tol)?],
                extra: vec![],
            }
        }
        Family::AlSalamCarlitz => {
            let q = q_param(&a.q, prec, "al-salam-carlitz")?;
            let av = a
                .a
                .as_deref()
                .ok_or_else(|| Error::InvalidArgument("family al-salam-carlitz needs --a".into()))?;
            let p = ASCParam::new(q, parse_real(prec, av)?)?;
            RhoReport {
                family: a.family,
                routes: vec![rho0_asc(&p, tol)?, rho0_asc_quadrature(&p, quad_tol)?],
                extra: vec![],
            }
        }
        Family::FreudQuartic => RhoReport {
            family: a.family,
            routes: vec![rho0_freud(prec, tol)?, rho0_freud_quadrature(prec, quad_tol)?],
            extra: vec![("K0", FreudConstants::new(prec).k0)],
        },
        Family::QInverseHermite => {
            let q = q_param(&a.q, prec, "q-inverse-hermite")?;
            RhoReport {
                family: a.family,
                routes: vec![rho0_qhermite(&q, tol)?, rho0_qhermite_quadrature(&q, quad_tol)?],
                extra: vec![],
            }
        }
        other => {
            return Err(Error::InvalidArgument(format!("rho0 is not defined for family {}", family_name(other))))
        }
    };
    let l = lower_bound(&report.routes[0])?;
    let agree = report.routes[0].agrees_with(&report.routes[1]);
    let gap = Float::with_val(prec.bits(), &report.routes[0].value - &report.routes[1].value).abs();
    let gap_allow = crate::arith::err_sum([&report.routes[0].err, &report.routes[1].err]);
    let family = family_name(report.family);
    with_sink(&a.common, stdout, |w| match a.common.output {
        Output::Csv => {
            let mut c = csv_writer(w);
            c.write_record(["family", "quantity", "value", "err"]).map_err(csv_err)?;
            for r in &report.routes {
                let q = format!("rho0:{}", r.route);
                c.write_record([family, &q, &num(&r.value, prec), &format_err(&r.err)]).map_err(csv_err)?;
            }
            c.write_record([family, "route-gap", &format_err(&gap), &format_err(&gap_allow)]).map_err(csv_err)?;
            c.write_record([family, "l", &num(&l, prec), ""]).map_err(csv_err)?;
            for (name, v) in &report.extra {
                c.write_record([family, name, &num(v, prec), ""]).map_err(csv_err)?;
            }
            c.flush()?;
            Ok(())
        }
        Output::Json => {
            let routes: Vec<Value> = report
                .routes
                .iter()
                .map(|r| json!({"route": r.route, "value": num(&r.value, prec), "err": format_err(&r.err)}))
                .collect();
            let mut obj = json!({
                "family": family,
                "routes": routes,
                "routes_agree": agree,
                "route_gap": format_err(&gap),
                "l": num(&l, prec),
            });
            for (name, v) in &report.extra {
                obj[*name] = json!(num(v, prec));
            }
            write_json(w, &obj)
        }
    })?;
    Ok(EXIT_OK)
}

// --- figure1 ----------------------------------------------------------------------

const FIGURE1_COLUMNS: [&str; 8] = ["q", "N_max", "lambda_last", "s", "s_err", "l", "pct_error", "error"];

fn cmd_figure1(a: &Figure1Args, stdout: &mut dyn Write) -> Result<i32> {
    let prec = precision(&a.common)?;
    let grid = parse_q_grid(&a.q_grid, prec)?;
    let lambda_tol = a.common.tol.unwrap_or(DEFAULT_LAMBDA_TOL);
    let rows = figure1_sweep(&grid, a.n_max, lambda_tol, DEFAULT_RHO_TOL.min(lambda_tol));
    let q_text: Vec<String> = rows.iter().map(|r| r.q.to_f64().to_string()).collect();
    with_sink(&a.common, stdout, |w| match a.common.output {
        Output::Csv => {
            let mut c = csv_writer(w);
            c.write_record(FIGURE1_COLUMNS).map_err(csv_err)?;
            for (row, qs) in rows.iter().zip(&q_text) {
                c.write_record(figure1_record(row, qs, prec)).map_err(csv_err)?;
            }
            c.flush()?;
            Ok(())
        }
        Output::Json => {
            let arr: Vec<Value> = rows
                .iter()
                .zip(&q_text)
                .map(|(row, qs)| {
                    let rec = figure1_record(row, qs, prec);
                    let mut obj = serde_json::Map::new();
                    for (k, v) in FIGURE1_COLUMNS.iter().zip(rec) {
                        obj.insert((*k).to_string(), json!(v));
                    }
                    if a.common.verbose {
                        if let Ok(p) = &row.outcome {
                            let seq: Vec<Value> = p
                                .sequence
                                .entries
                                .iter()
                                .map(|(n, e)| json!({"N": n, "lo": num(&e.lo, prec), "hi": num(&e.hi, prec)}))
                                .collect();
                            obj.insert("enclosures".into(), Value::Array(seq));
                        }
                    }
                    Value::Object(obj)
                })
                .collect();
            write_json(w, &Value::Array(arr))
        }
    })?;
    if rows.iter().any(|r| r.outcome.is_ok()) {
        Ok(EXIT_OK)
    } else {
        Err(rows.into_iter().next().and_then(|r| r.outcome.err()).unwrap_or_else(|| Error::invalid("empty q-grid")))
    }
}

fn figure1_record(row: &SweepRow, qs: &str, prec: Precision) -> [String; 8] {
    match &row.outcome {
        Ok(p) => [
            qs.to_string(),
            row.n_max.to_string(),
            num(&p.lambda_last.mid(), prec),
            num(&p.s.value, prec),
            format!("{:e}", p.s.err),
            num(&p.l, prec),
            num(&p.pct_error, prec),
            String::new(),
        ],
        Err(e) => [
            qs.to_string(),
            row.n_max.to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            e.to_string(),
        ],
    }
}

// --- verify -----------------------------------------------------------------------

fn cmd_verify(a: &VerifyArgs, stdout: &mut dyn Write) -> Result<i32> {
    let prec = precision(&a.common)?;
    let known = verify::suite_names();
    if let Some(bad) = a.suite.iter().find(|s| !known.contains(&s.as_str())) {
        return Err(Error::InvalidArgument(format!("unknown suite {bad:?}; known: {}", known.join(", "))));
    }
    let mut cfg: VerifyConfig = verify::default_config(prec)?;
    if a.q.q.is_some() || a.q.k_weight.is_some() {
        cfg.q = q_param(&a.q, prec, "verify")?;
    }
    cfg.n_max = a.n_max;
    if let Some(t) = a.common.tol {
        cfg.tol = t;
    }
    let checks = verify::run_suites(&cfg, &a.suite)?;
    let all = checks.iter().all(|c| c.pass);
    with_sink(&a.common, stdout, |w| match a.common.output {
        Output::Csv => {
            let mut c = csv_writer(w);
            c.write_record(["suite", "check", "status", "detail"]).map_err(csv_err)?;
            for ch in &checks {
                c.write_record([ch.suite, &ch.name, if ch.pass { "pass" } else { "FAIL" }, &ch.detail])
                    .map_err(csv_err)?;
            }
            c.flush()?;
            Ok(())
        }
        Output::Json => {
            let arr: Vec<Value> = checks
                .iter()
                .map(|ch| json!({"suite": ch.suite, "check": ch.name, "pass": ch.pass, "detail": ch.detail}))
                .collect();
            write_json(w, &json!({"all_pass": all, "checks": arr}))
        }
    })?;
    Ok(if all { EXIT_OK } else { EXIT_VERIFY_FAILED })
}
