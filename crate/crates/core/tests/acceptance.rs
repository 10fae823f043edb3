//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::time::Instant;

use qfreud::fixedpoint::solve;
use qfreud::ortho_oracle::{
    bn_residual, fourier_tail, gram_residual, intermediate_residuals, leading_coeff_check, recurrence_coefficients, stieltjes,
    structure_residuals,
};
use qfreud::painleve::{
    alternative_even_c0, asymptote_gap, closed_form_c0, confinement_chain, confinement_probe, critical_y_before, dp1_family,
    dp1_limit_residual, forward_run_partial, painleve_residual, qpv_limit_gap, y1_closed, CoefficientSequence, Method, Parity,
};
use qfreud::qcore::{to_decimal, ModelContext};
use qfreud::weights::pearson_residual;
use qfreud::{Error, ResidualReport};
use rand::{Rng, SeedableRng};
use rug::Float;

const SETS: [(&str, &str, &str); 4] = [("0.9", "5", "-1"), ("0.5", "2", "-1/3"), ("0.7", "0", "0"), ("0.5", "2", "-5/2")];

type Verdict = anyhow::Result<(bool, String)>;

fn ctx(q: &str, alpha: &str, c: &str, digits: u32) -> ModelContext {
    ModelContext::builder().q(q).alpha(alpha).c(c).digits(digits).build().unwrap()
}

fn sci(x: &Float) -> String {
    to_decimal(x, 3)
}

fn oracle_y(ctx: &ModelContext, n: usize) -> anyhow::Result<CoefficientSequence> {
    Ok(CoefficientSequence::from_a_sq(ctx, &recurrence_coefficients(ctx, n)?, Method::Oracle))
}

fn max_abs_diff(a: &[Float], b: &[Float]) -> Float {
    let prec = a[0].prec();
    a.iter().zip(b).map(|(x, y)| Float::with_val(prec, x - y).abs()).fold(Float::new(prec), |m, d| m.max(&d))
}

fn pearson() -> Verdict {
    let mut worst = Float::new(64);
    for (q, a, c) in SETS {
        let ctx = ctx(q, a, c, 50);
        for k in 1..=10 {
            let x = ctx.q_powi(k);
            for p in [x.clone(), -x] {
                worst = worst.max(&pearson_residual(&ctx, &p)?.relative);
            }
        }
    }
    Ok((worst < 1e-40, format!("max relative residual {}", sci(&worst))))
}

fn oracle_validity() -> Verdict {
    let ctx = ctx("0.9", "5", "-1", 100);
    let t = stieltjes(&ctx, 30)?;
    let (ratio, sub) = leading_coeff_check(&ctx, &t)?;
    let reports = [gram_residual(&t), bn_residual(&ctx, &t), ratio, sub];
    let bound = ctx.ten_pow_neg(60);
    let pass = reports.iter().all(|r| r.below(&bound));
    let detail = reports.iter().map(|r| format!("{} {}", r.name, sci(&r.max_abs))).collect::<Vec<_>>().join(", ");
    Ok((pass, detail))
}

fn painleve_cross_check() -> Verdict {
    let mut worst = Float::new(64);
    for (q, a, c) in SETS {
        let ctx = ctx(q, a, c, 100);
        worst = worst.max(&painleve_residual(&ctx, &oracle_y(&ctx, 30)?)?.max_abs);
    }
    Ok((worst < 1e-40, format!("max relative residual over four sets {}", sci(&worst))))
}

fn structure() -> Verdict {
    let mut parts = Vec::new();
    let mut tails = Vec::new();
    let mut inter = Vec::new();
    for (q, a, c) in SETS {
        let ctx = ctx(q, a, c, 100);
        let t = stieltjes(&ctx, 26)?;
        for n in 3..=25 {
            parts.push(structure_residuals(&ctx, &t, n)?);
            inter.push(intermediate_residuals(&ctx, &t, n)?);
            if n % 2 == 0 {
                tails.push(fourier_tail(&ctx, &t, n)?);
            }
        }
    }
    let reports = [
        ResidualReport::merge("structure", &parts),
        ResidualReport::merge("fourier_tail_even", &tails),
        ResidualReport::merge("intermediate", &inter),
    ];
    let pass = reports.iter().all(|r| r.max_abs < 1e-40);
    let detail = reports.iter().map(|r| format!("{} {}", r.name, sci(&r.max_abs))).collect::<Vec<_>>().join(", ");
    Ok((pass, detail))
}

fn c0_closed_forms() -> Verdict {
    let mut worst = Float::new(64);
    let mut alt_gap = Float::new(64);
    for (q, a) in [("0.7", "0"), ("0.5", "2"), ("0.9", "5")] {
        let ctx = ctx(q, a, "0", 60);
        // 60 digits carry the oracle to degree 15
        let oracle_n = (ctx.digits() as usize - 30) / 2;
        let exact = closed_form_c0(&ctx, 30);
        let oracle = oracle_y(&ctx, oracle_n)?;
        let fixed = solve(&ctx, 30, 500, &ctx.ten_pow_neg(50))?.sequence;
        worst = worst.max(&max_abs_diff(&exact.y, &oracle.y)).max(&max_abs_diff(&exact.y, &fixed.y));
        if a != "0" {
            alt_gap = alt_gap.max(&max_abs_diff(&alternative_even_c0(&ctx, oracle_n).y, &oracle.y));
        }
    }
    let detail = format!(
        "max deviation from y_2n = q^a(1-q^2n), y_2n+1 = 1-q^(2n+1+a): {}; q^a - q^(2n+2a) misses the oracle by {} at a != 0",
        sci(&worst),
        sci(&alt_gap)
    );
    Ok((worst < 1e-40 && alt_gap > 1e-10, detail))
}

fn initial_value() -> Verdict {
    let mut worst = Float::new(64);
    for (q, a, c) in SETS {
        let ctx = ctx(q, a, c, 60);
        let iv = y1_closed(&ctx)?;
        worst = worst.max(&iv.gap());
        if ctx.c().is_zero() {
            let direct = Float::with_val(ctx.prec(), 1 - ctx.q_pow(&Float::with_val(ctx.prec(), ctx.alpha() + 1u32)));
            worst = worst.max(&Float::with_val(ctx.prec(), &iv.value - &direct).abs());
        }
    }
    Ok((worst < 1e-40, format!("max |y1 - m2/m0| {}", sci(&worst))))
}

fn asymptotics() -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for c in ["-1", "-5/2", "-1/3"] {
        let ctx = ctx("0.9", "5", c, 100);
        // N counts rows: y_0..y_(2N+1)
        let sol = solve(&ctx, 201, 500, &ctx.ten_pow_neg(30))?;
        let rep = asymptote_gap(&ctx, &sol.sequence);
        let n0 = rep.n0(&ctx.ten_pow_neg(6));
        pass &= n0.is_some();
        detail.push(format!("c={c}: n0 = {}", n0.map_or("none".into(), |n| n.to_string())));
    }
    Ok((pass, detail.join(", ")))
}

fn instability() -> Verdict {
    let ctx = ctx("0.9", "5", "-1", 200);
    let fixed = solve(&ctx, 150, 500, &ctx.ten_pow_neg(60))?.sequence;
    let (fw, stop) = forward_run_partial(&ctx, 150);
    let prec = ctx.prec();
    let diff = |n: usize| Float::with_val(prec, &fw.y[n] - &fixed.y[n]).abs();
    let agree = fw.len() > 60 && (1..=60).all(|n| diff(n) < Float::with_val(prec, &fixed.y[n] * 1e-10));
    let breakdown = (60..fw.len().min(151)).find(|&n| diff(n) >= 1);
    let detail = format!(
        "10-digit agreement through n=60: {agree}; first |dy| >= 1 at n = {}; forward stopped: {}",
        breakdown.map_or("none".into(), |n| n.to_string()),
        stop.map_or("no".into(), |e| e.to_string())
    );
    Ok((agree && breakdown.is_some(), detail))
}

fn confinement() -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    let quartic = ctx("0.9", "5", "-1", 100);
    for (n, parity) in [(10, Parity::Even), (11, Parity::Odd)] {
        let y_before = oracle_y(&quartic, n)?.y[n - 1].clone();
        for e in [10, 20] {
            let eps = quartic.ten_pow_neg(e);
            let t = confinement_probe(&quartic, n, parity, &y_before, &eps)?;
            let orders = t.orders[1..4].iter().zip([-1.0, -1.0, 1.0]).all(|(p, want)| (p - want).abs() < 0.1);
            let y4 = t.y4_relative_error() < Float::with_val(quartic.prec(), &eps * 1000u32);
            pass &= orders && y4;
            detail.push(format!("n={n} eps=1e-{e}: orders {:?} y4 err {}", t.rounded_orders(), sci(&t.y4_relative_error())));
        }
    }
    let general = ctx("0.9", "5", "-1/2", 100);
    let crit = critical_y_before(&general, 10)?;
    let chain = confinement_chain(&general, 10, Parity::Even, &crit, &general.ten_pow_neg(10), 8)?;
    let clears = chain.orders[8].abs() < 0.1 && chain.values[8].is_finite();
    pass &= clears;
    detail.push(format!("worst-case chain at c=-1/2 orders {:?}", chain.rounded_orders()));
    Ok((pass, detail.join("; ")))
}

fn bracketing() -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for (q, a, c) in SETS {
        let ctx = ctx(q, a, c, 100);
        let tol = ctx.ten_pow_neg(30);
        let (report, converged) = match solve(&ctx, 60, 500, &tol) {
            Ok(s) => (s.report, true),
            Err(Error::NonConvergence { solution, .. }) => (solution.report, false),
            Err(e) => return Err(e.into()),
        };
        pass &= report.violations.is_empty();
        detail.push(format!(
            "({q},{a},{c}): {} iterations, width {}, violations {}{}",
            report.iterations,
            sci(&report.width()),
            report.violations.len(),
            if converged { "" } else { ", not converged" }
        ));
    }
    Ok((pass, detail.join("; ")))
}

fn dp1_limit() -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for a in ["0", "1"] {
        for alpha in ["0", "2"] {
            let family = dp1_family(alpha, a, &["0.9", "0.99", "0.999"], 40)?;
            let a_val = Float::with_val(family[0].prec(), a.parse::<u32>()?);
            let rep = dp1_limit_residual(&family, &a_val, 10)?;
            let bad = rep.non_decreasing();
            pass &= bad.is_empty();
            let maxes: Vec<String> = rep.residuals.iter().map(|r| sci(&r.max_abs)).collect();
            detail.push(format!("a={a} alpha={alpha}: max |r_n| {maxes:?}, not decreasing at n = {bad:?}"));
        }
    }
    Ok((pass, detail.join("; ")))
}

fn qpv_limit() -> Verdict {
    let ctx = ctx("0.9", "2", "-1/2", 60);
    let prec = ctx.prec();
    let mut rng = rand::rngs::StdRng::seed_from_u64(5);
    let (mut lo, mut hi) = (f64::INFINITY, 0f64);
    let mut pass = true;
    let mut points = 0;
    while points < 5 {
        let n = rng.gen_range(1..=5usize);
        let sign = |r: &mut rand::rngs::StdRng| if r.gen::<bool>() { 1.0 } else { -1.0 };
        let u = ctx.real(sign(&mut rng) * rng.gen_range(0.1..0.9));
        let v = ctx.real(sign(&mut rng) * rng.gen_range(0.1..0.9));
        let mut ratios = Vec::new();
        let mut kappa = Float::with_val(prec, 1e-2);
        let mut admissible = true;
        for _ in 0..5 {
            let half = Float::with_val(prec, &kappa / 2u32);
            match (qpv_limit_gap(&ctx, n, &u, &v, &kappa), qpv_limit_gap(&ctx, n, &u, &v, &half)) {
                (Ok((g1, g2)), Ok((h1, h2))) => {
                    ratios.push((g1 / h1).to_f64());
                    ratios.push((g2 / h2).to_f64());
                }
                _ => admissible = false,
            }
            kappa /= 10u32;
        }
        if !admissible {
            continue;
        }
        points += 1;
        for r in ratios {
            lo = lo.min(r);
            hi = hi.max(r);
            pass &= (1.8..=2.2).contains(&r);
        }
    }
    Ok((pass, format!("gap(k)/gap(k/2) in [{lo:.4}, {hi:.4}] over 5 points, k = 1e-2..1e-6")))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 12] = [
        ("Pearson residual suite", pearson),
        ("oracle validity", oracle_validity),
        ("Painleve cross-check", painleve_cross_check),
        ("structure relations", structure),
        ("c = 0 closed forms", c0_closed_forms),
        ("initial value", initial_value),
        ("asymptotics", asymptotics),
        ("instability reproduction", instability),
        ("confinement probes", confinement),
        ("bracketing", bracketing),
        ("dP_I limit", dp1_limit),
        ("q-P_V limit", qpv_limit),
    ];
    let mut failed = Vec::new();
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e:#}")));
        let secs = start.elapsed().as_secs_f64();
        println!("{} criterion {} ({name}, {secs:.1}s): {detail}", if pass { "PASS" } else { "FAIL" }, k + 1);
        if !pass {
            failed.push(k + 1);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
