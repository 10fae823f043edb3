//! Command-line front end: `coeffs`, `verify` and `compare`.

mod config;
mod verify;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rug::Float;

pub use config::{parse_config, RunConfig};
pub use verify::CHECKS;

use crate::error::Error;
use crate::fixedpoint::solve;
use crate::ortho_oracle::recurrence_coefficients;
use crate::painleve::{forward_run, forward_run_partial, CoefficientSequence, Method};
use crate::qcore::{log10_abs, to_decimal, ModelContext};

#[derive(Debug, Parser)]
#[command(name = "qfreud", version, about = "Recurrence coefficients of modified q-Freud orthogonal polynomials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Parameters shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Config file with `key = value` lines
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base q in (0, 1), decimal or ratio
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<String>,
    /// Exponent alpha > -1
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// Weight parameter c <= 0
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<String>,
    /// Working precision in decimal digits
    #[arg(long)]
    pub digits: Option<u32>,
    /// Largest index N
    #[arg(long)]
    pub n: Option<usize>,
    /// Solver and verification tolerance
    #[arg(long)]
    pub tol: Option<String>,
    /// Iteration cap for the fixed-point solver
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Write CSV here instead of standard output
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Allow c > 0
    #[arg(long)]
    pub exploratory: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute y_0..y_N by one method and write them as CSV
    Coeffs {
        #[command(flatten)]
        common: Common,
        /// oracle, forward or fixedpoint
        #[arg(long)]
        method: Option<String>,
    },
    /// Run one verification suite
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        opts: verify::VerifyOpts,
    },
    /// Compare methods side by side, e.g. `--methods forward@20,fixedpoint`
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
    },
}

/// Outcome of a successful run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

/// Parses `args` and runs the command. Returns the process exit code:
/// 0 on success, 1 when a check fails, 2 on bad input or a computation error.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 2;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    match dispatch(&cli.command, out, err) {
        Ok(Status::Pass) => 0,
        Ok(Status::Fail) => 1,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            if let Some(index) = e.downcast_ref::<Error>().and_then(Error::index) {
                let _ = writeln!(err, "failing index: {index}");
            }
            2
        }
    }
}

fn dispatch(command: &Command, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<Status> {
    match command {
        Command::Coeffs { common, method } => {
            let cfg = RunConfig::resolve(common)?;
            let method: Method = cfg.get(method.clone(), "method", "oracle".to_string())?.parse()?;
            cmd_coeffs(&cfg, method, out, err)
        }
        Command::Verify { common, opts } => {
            let cfg = RunConfig::resolve(common)?;
            verify::cmd_verify(&cfg, opts, out)
        }
        Command::Compare { common, methods } => {
            let cfg = RunConfig::resolve(common)?;
            let methods = if methods.is_empty() {
                cfg.get(None, "methods", String::new())?
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            } else {
                methods.clone()
            };
            cmd_compare(&cfg, &methods, out, err)
        }
    }
}

/// Sink for CSV: the configured file, or `out`.
fn with_sink<F>(cfg: &RunConfig, out: &mut dyn Write, body: F) -> anyhow::Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    match &cfg.output {
        Some(path) => {
            let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = std::io::BufWriter::new(file);
            body(&mut w)?;
            w.flush()?;
        }
        None => body(out)?,
    }
    Ok(())
}

fn log10_text(x: &Float) -> String {
    if x.is_zero() {
        "-inf".to_string()
    } else {
        to_decimal(&log10_abs(x), 20)
    }
}

/// Sequence by `method`. A non-converged fixed-point run still yields its
/// bracket midpoint, flagged by `Status::Fail`.
pub fn compute_sequence(ctx: &ModelContext, cfg: &RunConfig, method: Method, strict_forward: bool) -> anyhow::Result<(CoefficientSequence, Status)> {
    match method {
        Method::Oracle => {
            let a_sq = recurrence_coefficients(ctx, cfg.n)?;
            Ok((CoefficientSequence::from_a_sq(ctx, &a_sq, Method::Oracle), Status::Pass))
        }
        Method::Forward if strict_forward => Ok((forward_run(ctx, cfg.n)?, Status::Pass)),
        Method::Forward => Ok((forward_run_partial(ctx, cfg.n).0, Status::Pass)),
        Method::FixedPoint => match solve(ctx, cfg.n, cfg.max_iter, &cfg.tol_value(ctx.digits())?) {
            Ok(sol) => Ok((sol.sequence, Status::Pass)),
            Err(Error::NonConvergence { solution, .. }) => Ok((solution.sequence, Status::Fail)),
            Err(e) => Err(e.into()),
        },
        Method::ClosedForm => {
            if !ctx.c().is_zero() {
                bail!("closed form exists only for c = 0");
            }
            Ok((crate::painleve::closed_form_c0(ctx, cfg.n), Status::Pass))
        }
    }
}

fn cmd_coeffs(cfg: &RunConfig, method: Method, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<Status> {
    let ctx = cfg.context()?;
    let (seq, status) = compute_sequence(&ctx, cfg, method, true)?;
    if status == Status::Fail {
        writeln!(err, "warning: fixed-point bracket did not close within {} iterations", cfg.max_iter)?;
    }
    let a_sq = seq.a_sq(&ctx);
    let digits = ctx.digits();
    with_sink(cfg, out, |w| {
        writeln!(w, "n,y_n,a_n_sq,log10_abs_y_n,method")?;
        for (n, y) in seq.y.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                n,
                to_decimal(y, digits),
                to_decimal(&a_sq[n], digits),
                log10_text(y),
                seq.method.name()
            )?;
        }
        Ok(())
    })?;
    Ok(status)
}

/// `"forward@20"` -> (forward, Some(20)).
pub fn parse_method_spec(text: &str) -> anyhow::Result<(Method, Option<u32>)> {
    match text.split_once('@') {
        Some((m, d)) => {
            let digits: u32 = d.parse().with_context(|| format!("bad digits in `{text}`"))?;
            Ok((m.parse()?, Some(digits)))
        }
        None => Ok((text.parse()?, None)),
    }
}

/// Relative disagreement that counts as divergence in `compare`.
const DIVERGENCE_REL: f64 = 1e-10;

fn cmd_compare(cfg: &RunConfig, methods: &[String], out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<Status> {
    if methods.len() < 2 {
        bail!("compare needs at least two methods");
    }
    let mut labels = Vec::new();
    let mut seqs = Vec::new();
    let mut digits_used = Vec::new();
    for spec in methods {
        let (method, digits) = parse_method_spec(spec)?;
        let digits = digits.unwrap_or(cfg.digits);
        let ctx = cfg.context_at(digits)?;
        let (seq, status) = compute_sequence(&ctx, cfg, method, false)?;
        if status == Status::Fail {
            writeln!(err, "warning: {spec}: fixed-point bracket did not close")?;
        }
        labels.push(spec.clone());
        seqs.push(seq);
        digits_used.push(digits);
    }
    let prec = seqs.iter().map(|s| s.prec).max().unwrap_or(64);
    let pairs: Vec<(usize, usize)> = (0..seqs.len()).flat_map(|i| (i + 1..seqs.len()).map(move |j| (i, j))).collect();
    let diff = |i: usize, j: usize, n: usize| -> Option<Float> {
        let (a, b) = (seqs[i].y.get(n)?, seqs[j].y.get(n)?);
        Some(Float::with_val(prec, a - b).abs())
    };

    let rows = seqs.iter().map(|s| s.len()).max().unwrap_or(0);
    with_sink(cfg, out, |w| {
        let mut header = vec!["n".to_string()];
        header.extend(labels.iter().map(|l| format!("y_{l}")));
        header.extend(pairs.iter().map(|(i, j)| format!("log10_absdiff_{}_{}", labels[*i], labels[*j])));
        writeln!(w, "{}", header.join(","))?;
        for n in 0..rows {
            let mut cells = vec![n.to_string()];
            for (k, s) in seqs.iter().enumerate() {
                cells.push(s.y.get(n).map(|v| to_decimal(v, digits_used[k])).unwrap_or_default());
            }
            for (i, j) in &pairs {
                cells.push(diff(*i, *j, n).map(|d| log10_text(&d)).unwrap_or_default());
            }
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    })?;

    for (i, j) in &pairs {
        let mut max = Float::new(prec);
        let mut divergence = None;
        for n in 0..rows {
            if let Some(d) = diff(*i, *j, n) {
                let scale = Float::with_val(prec, seqs[*i].y[n].abs_ref()).max(&Float::with_val(prec, 1e-300));
                if divergence.is_none() && Float::with_val(prec, &d / &scale) > DIVERGENCE_REL {
                    divergence = Some(n);
                }
                if d > max {
                    max = d;
                }
            }
        }
        let div = divergence.map_or("none".to_string(), |n| n.to_string());
        writeln!(err, "{} vs {}: max |dy| = {}, divergence index = {}", labels[*i], labels[*j], to_decimal(&max, 6), div)?;
    }
    Ok(Status::Pass)
}
