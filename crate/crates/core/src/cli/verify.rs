use std::io::Write;

use anyhow::bail;
use clap::Args;
use rug::Float;

use super::{compute_sequence, with_sink, RunConfig, Status};
use crate::error::Error;
use crate::fixedpoint::solve;
use crate::ortho_oracle::{
    bn_residual, fourier_tail, gram_residual, intermediate_residuals, leading_coeff_check, recurrence_coefficients,
    stieltjes, structure_residuals,
};
use crate::painleve::{
    asymptote_gap, confinement_chain, confinement_probe, critical_y_before, dp1_family, dp1_limit_residual,
    painleve_residual, qpv_limit_gap, to_uv, uv_residual, CoefficientSequence, Method, Parity, UvVariant,
};
use crate::qcore::{parse_real, to_decimal, ModelContext};
use crate::report::ResidualReport;
use crate::weights::pearson_residual;

pub const CHECKS: &[&str] = &[
    "pearson",
    "gram",
    "bn",
    "lemma31",
    "structure",
    "intermediate",
    "painleve",
    "uv",
    "asymptotics",
    "bracket",
    "confinement",
    "dp1",
    "qpv",
];

#[derive(Debug, Clone, Default, Args)]
pub struct VerifyOpts {
    /// One of: pearson, gram, bn, lemma31, structure, intermediate, painleve,
    /// uv, asymptotics, bracket, confinement, dp1, qpv
    #[arg(long)]
    pub check: Option<String>,
    /// Sequence source for painleve and uv (oracle, forward, fixedpoint)
    #[arg(long)]
    pub method: Option<String>,
    /// Parity of the confinement index
    #[arg(long)]
    pub parity: Option<String>,
    /// Size of the near-singular value
    #[arg(long)]
    pub epsilon: Option<String>,
    /// Index n for confinement and qpv
    #[arg(long)]
    pub index: Option<usize>,
    /// Shift parameter a of the dP_I family
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,
    /// Smallest kappa of the qpv halving study
    #[arg(long)]
    pub kappa: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub u: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub v: Option<String>,
    /// Threshold for the asymptotic gaps
    #[arg(long)]
    pub gap: Option<String>,
}

struct Outcome {
    lines: Vec<String>,
    reports: Vec<ResidualReport>,
    pass: bool,
}

impl Outcome {
    fn bounded(reports: Vec<ResidualReport>, bound: &Float) -> Outcome {
        let pass = reports.iter().all(|r| r.below(bound));
        let lines = reports
            .iter()
            .map(|r| {
                let at = r.argmax.map_or("-".to_string(), |i| i.to_string());
                format!("{}: max |residual| = {} at {} (bound {})", r.name, to_decimal(&r.max_abs, 6), at, to_decimal(bound, 3))
            })
            .collect();
        Outcome { lines, reports, pass }
    }
}

pub(super) fn cmd_verify(cfg: &RunConfig, opts: &VerifyOpts, out: &mut dyn Write) -> anyhow::Result<Status> {
    let check = cfg.get(opts.check.clone(), "check", String::new())?;
    if !CHECKS.contains(&check.as_str()) {
        bail!("unknown check `{check}`; expected one of {}", CHECKS.join(", "));
    }
    let ctx = cfg.context()?;
    let tol = cfg.tol_value(ctx.digits())?;
    let outcome = match check.as_str() {
        "pearson" => pearson(&ctx, &tol)?,
        "gram" => Outcome::bounded(vec![gram_residual(&stieltjes(&ctx, cfg.n)?)], &tol),
        "bn" => Outcome::bounded(vec![bn_residual(&ctx, &stieltjes(&ctx, cfg.n)?)], &tol),
        "lemma31" => {
            let (a, b) = leading_coeff_check(&ctx, &stieltjes(&ctx, cfg.n)?)?;
            Outcome::bounded(vec![a, b], &tol)
        }
        "structure" => structure(&ctx, cfg.n, &tol)?,
        "intermediate" => {
            let t = stieltjes(&ctx, cfg.n)?;
            let parts = (2..cfg.n).map(|n| intermediate_residuals(&ctx, &t, n)).collect::<Result<Vec<_>, _>>()?;
            Outcome::bounded(vec![ResidualReport::merge("intermediate", &parts)], &tol)
        }
        "painleve" => {
            let seq = sequence(&ctx, cfg, opts)?;
            Outcome::bounded(vec![painleve_residual(&ctx, &seq)?], &tol)
        }
        "uv" => {
            let seq = sequence(&ctx, cfg, opts)?;
            let variant = if ctx.is_quartic() { UvVariant::Quartic } else { UvVariant::General };
            Outcome::bounded(vec![uv_residual(&ctx, &to_uv(&ctx, &seq, variant)?)?], &tol)
        }
        "asymptotics" => asymptotics(&ctx, cfg, opts)?,
        "bracket" => bracket(&ctx, cfg, &tol)?,
        "confinement" => confinement(&ctx, cfg, opts)?,
        "dp1" => dp1(cfg, opts)?,
        "qpv" => qpv(&ctx, cfg, opts)?,
        _ => unreachable!("checked against CHECKS"),
    };
    writeln!(out, "check {check}: {}", if outcome.pass { "PASS" } else { "FAIL" })?;
    for line in &outcome.lines {
        writeln!(out, "  {line}")?;
    }
    if cfg.output.is_some() {
        let digits = ctx.digits();
        with_sink(cfg, out, |w| {
            writeln!(w, "series,index,value")?;
            for r in &outcome.reports {
                for row in r.csv_rows(digits) {
                    writeln!(w, "{row}")?;
                }
            }
            Ok(())
        })?;
    }
    Ok(if outcome.pass { Status::Pass } else { Status::Fail })
}

fn sequence(ctx: &ModelContext, cfg: &RunConfig, opts: &VerifyOpts) -> anyhow::Result<CoefficientSequence> {
    let method: Method = cfg.get(opts.method.clone(), "method", "oracle".to_string())?.parse()?;
    let (seq, status) = compute_sequence(ctx, cfg, method, true)?;
    if status == Status::Fail {
        bail!("fixed-point bracket did not close within {} iterations", cfg.max_iter);
    }
    Ok(seq)
}

fn pearson(ctx: &ModelContext, tol: &Float) -> anyhow::Result<Outcome> {
    let mut rel = Vec::new();
    for k in 1..=10i64 {
        let x = ctx.q_powi(k);
        rel.push((2 * k as usize, pearson_residual(ctx, &x)?.relative));
        rel.push((2 * k as usize + 1, pearson_residual(ctx, &(-x))?.relative));
    }
    Ok(Outcome::bounded(vec![ResidualReport::new("pearson_relative", rel)], tol))
}

fn structure(ctx: &ModelContext, n_max: usize, tol: &Float) -> anyhow::Result<Outcome> {
    let t = stieltjes(ctx, n_max)?;
    let mut rel = Vec::new();
    let mut tails = Vec::new();
    for n in 3..n_max {
        rel.push(structure_residuals(ctx, &t, n)?);
        if n % 2 == 0 {
            tails.push(fourier_tail(ctx, &t, n)?);
        }
    }
    Ok(Outcome::bounded(
        vec![ResidualReport::merge("structure", &rel), ResidualReport::merge("fourier_tail_even", &tails)],
        tol,
    ))
}

fn asymptotics(ctx: &ModelContext, cfg: &RunConfig, opts: &VerifyOpts) -> anyhow::Result<Outcome> {
    let bound = parse_real(&cfg.get(opts.gap.clone(), "gap", "1e-6".to_string())?, ctx.prec())?;
    let mut opts = opts.clone();
    opts.method.get_or_insert_with(|| "fixedpoint".to_string());
    let seq = sequence(ctx, cfg, &opts)?;
    let rep = asymptote_gap(ctx, &seq);
    let n0 = rep.n0(&bound);
    let lines = vec![
        format!("max even gap {}, max odd gap {}", to_decimal(&rep.even.max_abs, 6), to_decimal(&rep.odd.max_abs, 6)),
        format!("monotone from y index {:?}", rep.monotone_from),
        format!("n0 (monotone and below {}): {:?}", to_decimal(&bound, 3), n0),
    ];
    Ok(Outcome {
        lines,
        pass: n0.is_some(),
        reports: vec![rep.even, rep.odd],
    })
}

fn bracket(ctx: &ModelContext, cfg: &RunConfig, tol: &Float) -> anyhow::Result<Outcome> {
    let solution = match solve(ctx, cfg.n, cfg.max_iter, tol) {
        Ok(s) => s,
        Err(Error::NonConvergence { solution, .. }) => *solution,
        Err(e) => return Err(e.into()),
    };
    let r = &solution.report;
    let mut lines = vec![
        format!("iterations {}, converged {}, final width {}", r.iterations, r.converged, to_decimal(&r.width(), 6)),
        format!("monotonicity violations {}, region excursions {}", r.violations.len(), r.region_excursions),
    ];
    for (k, (w, y1)) in r.width_trace.iter().zip(r.y1_trace.iter().skip(1)).enumerate() {
        lines.push(format!("T^{}: width {} y1 {}", k + 1, to_decimal(w, 6), to_decimal(y1, 20)));
    }
    let reports = vec![
        ResidualReport::new("width", r.width_trace.iter().cloned().enumerate().map(|(k, w)| (k + 1, w)).collect()),
        ResidualReport::new("y1", r.y1_trace.iter().cloned().enumerate().collect()),
    ];
    Ok(Outcome {
        lines,
        pass: r.violations.is_empty(),
        reports,
    })
}

fn confinement(ctx: &ModelContext, cfg: &RunConfig, opts: &VerifyOpts) -> anyhow::Result<Outcome> {
    let parity = match cfg.get(opts.parity.clone(), "parity", "even".to_string())?.as_str() {
        "even" => Parity::Even,
        "odd" => Parity::Odd,
        other => bail!("parity must be even or odd, got `{other}`"),
    };
    let eps = parse_real(&cfg.get(opts.epsilon.clone(), "epsilon", "1e-10".to_string())?, ctx.prec())?;
    let default_n = if parity == Parity::Even { 10 } else { 11 };
    let n = cfg.get(opts.index, "index", default_n)?;
    let a_sq = recurrence_coefficients(ctx, n)?;
    let y_before = CoefficientSequence::from_a_sq(ctx, &a_sq, Method::Oracle).y[n - 1].clone();
    let t = confinement_probe(ctx, n, parity, &y_before, &eps)?;
    let expected = [-1.0, -1.0, 1.0];
    let orders_ok = t.orders[1..4].iter().zip(expected).all(|(p, e)| (p - e).abs() < 0.1);
    let y4_bound = Float::with_val(ctx.prec(), &eps * 1000u32);
    let y4_err = t.y4_relative_error();
    let mut lines = vec![
        format!("n = {n}, y_(n-1) = {}", to_decimal(&y_before, 12)),
        format!("orders y_n..y_(n+4): {:?}", t.orders.iter().map(|p| (p * 1000.0).round() / 1000.0).collect::<Vec<_>>()),
        format!("y_(n+4) relative error {} (bound {})", to_decimal(&y4_err, 6), to_decimal(&y4_bound, 3)),
    ];
    let mut pass = orders_ok && y4_err < y4_bound;
    let mut reports = vec![ResidualReport::new("confinement_values", t.values.iter().cloned().enumerate().map(|(k, v)| (n + k, v)).collect())];
    if parity == Parity::Even && !ctx.is_quartic() {
        let crit = critical_y_before(ctx, n)?;
        let chain = confinement_chain(ctx, n, parity, &crit, &eps, 8)?;
        let clears = chain.orders[8].abs() < 0.1 && chain.values[8].is_finite();
        lines.push(format!("critical chain orders: {:?}; clears by y_(n+8): {clears}", chain.rounded_orders()));
        pass &= clears;
        reports.push(ResidualReport::new("critical_chain", chain.values.iter().cloned().enumerate().map(|(k, v)| (n + k, v)).collect()));
    }
    Ok(Outcome { lines, reports, pass })
}

fn dp1(cfg: &RunConfig, opts: &VerifyOpts) -> anyhow::Result<Outcome> {
    let a = cfg.get(opts.a.clone(), "a", "0".to_string())?;
    let family = dp1_family(&cfg.alpha, &a, &["0.9", "0.99", "0.999"], cfg.digits)?;
    let a_val = parse_real(&a, family[0].prec())?;
    let rep = dp1_limit_residual(&family, &a_val, cfg.n)?;
    let bad = rep.non_decreasing();
    let mut lines: Vec<String> = rep
        .residuals
        .iter()
        .map(|r| format!("{}: max |r_n| = {}", r.name, to_decimal(&r.max_abs, 6)))
        .collect();
    lines.push(format!("indices without monotone decrease: {bad:?}"));
    Ok(Outcome {
        lines,
        pass: bad.is_empty(),
        reports: rep.residuals,
    })
}

fn qpv(ctx: &ModelContext, cfg: &RunConfig, opts: &VerifyOpts) -> anyhow::Result<Outcome> {
    let prec = ctx.prec();
    let u = parse_real(&cfg.get(opts.u.clone(), "u", "0.4".to_string())?, prec)?;
    let v = parse_real(&cfg.get(opts.v.clone(), "v", "-0.3".to_string())?, prec)?;
    let n = cfg.get(opts.index, "index", 3usize)?;
    let smallest = parse_real(&cfg.get(opts.kappa.clone(), "kappa", "1e-6".to_string())?, prec)?;
    let mut kappa = Float::with_val(prec, 1e-2);
    let mut first = Vec::new();
    let mut second = Vec::new();
    let mut lines = Vec::new();
    let mut pass = true;
    let mut step = 0;
    while kappa >= smallest {
        let half = Float::with_val(prec, &kappa / 2u32);
        let (g1, g2) = qpv_limit_gap(ctx, n, &u, &v, &kappa)?;
        let (h1, h2) = qpv_limit_gap(ctx, n, &u, &v, &half)?;
        let (r1, r2) = (Float::with_val(prec, &g1 / &h1), Float::with_val(prec, &g2 / &h2));
        let ok = |r: &Float| *r >= 1.8 && *r <= 2.2;
        pass &= ok(&r1) && ok(&r2);
        lines.push(format!("kappa {}: ratios {} {}", to_decimal(&kappa, 3), to_decimal(&r1, 6), to_decimal(&r2, 6)));
        first.push((step, g1));
        second.push((step, g2));
        kappa /= 10u32;
        step += 1;
    }
    Ok(Outcome {
        lines,
        pass,
        reports: vec![ResidualReport::new("qpv_gap_u", first), ResidualReport::new("qpv_gap_v", second)],
    })
}
