use rug::Float;

use crate::error::{Error, Result};
use crate::ortho_oracle::recurrence_coefficients;
use crate::qcore::{parse_real, precision_bits, ModelContext, ParamValue};
use crate::report::ResidualReport;
use crate::weights::freud_shift_c;

/// Contexts along `q -> 1` with `c = -1 + a sqrt(1 - q^4)`.
pub fn dp1_family(alpha: &str, a: &str, qs: &[&str], digits: u32) -> Result<Vec<ModelContext>> {
    let prec = precision_bits(digits);
    let a = parse_real(a, prec)?;
    qs.iter()
        .map(|q| {
            let qv = parse_real(q, prec)?;
            let c = freud_shift_c(&qv, &a);
            ModelContext::builder()
                .q(*q)
                .alpha(alpha)
                .c(ParamValue::Real(c.clone()))
                .digits(digits)
                .exploratory(c > 0)
                .build()
        })
        .collect()
}

/// Residuals of the discrete Painleve I limit along a family.
#[derive(Debug, Clone)]
pub struct Dp1Report {
    pub qs: Vec<Float>,
    /// One report per family member, residual index `n`.
    pub residuals: Vec<ResidualReport>,
}

impl Dp1Report {
    /// Whether `|r_n|` strictly decreases along the family.
    pub fn decreasing_at(&self, n: usize) -> bool {
        let vals: Vec<&Float> = self
            .residuals
            .iter()
            .map(|r| &r.residuals.iter().find(|(i, _)| *i == n).expect("index in range").1)
            .collect();
        vals.windows(2).all(|w| Float::with_val(w[0].prec(), w[1].abs_ref()) < Float::with_val(w[0].prec(), w[0].abs_ref()))
    }

    /// Indices where the decrease fails.
    pub fn non_decreasing(&self) -> Vec<usize> {
        let Some(first) = self.residuals.first() else {
            return Vec::new();
        };
        first.residuals.iter().map(|(n, _)| *n).filter(|n| !self.decreasing_at(*n)).collect()
    }
}

/// `r_n = x_{n+1} + x_n + x_{n-1} - (2n + alpha - alpha (-1)^n) / (8 x_n) + a`
/// with `x_n = a_n^2 / sqrt(1 - q^4)`, for `1 <= n <= n_max` and every
/// context in `family`.
pub fn dp1_limit_residual(family: &[ModelContext], a: &Float, n_max: usize) -> Result<Dp1Report> {
    let mut qs = Vec::new();
    let mut residuals = Vec::new();
    for ctx in family {
        let prec = ctx.prec();
        let a_sq = recurrence_coefficients(ctx, n_max + 1)?;
        let s = Float::with_val(prec, 1u32 - ctx.q_powi(4)).sqrt();
        let x: Vec<Float> = a_sq.iter().map(|v| Float::with_val(prec, v / &s)).collect();
        let mut out = Vec::with_capacity(n_max);
        for n in 1..=n_max {
            let sign = if n % 2 == 0 { 1 } else { -1 };
            let num = Float::with_val(prec, ctx.alpha() * (1 - sign)) + (2 * n as u32);
            let mut r = Float::with_val(prec, &x[n + 1] + &x[n]) + &x[n - 1];
            r -= num / Float::with_val(prec, &x[n] * 8u32);
            r += a;
            out.push((n, r));
        }
        qs.push(ctx.q().clone());
        residuals.push(ResidualReport::new(format!("dp1_q={}", crate::qcore::to_decimal(ctx.q(), 6)), out));
    }
    Ok(Dp1Report { qs, residuals })
}

/// Differences between the two `kappa`-deformed right sides
///
/// ```text
/// (u-1)(u-1/c)(u-1/kappa)(u-c kappa) / ((u - c kappa q^(2n)) (u - q^(2n)/(c kappa)))
/// (v-1)(v-c)(v-kappa)(v-1/(c kappa)) / ((v - kappa w)(v - w/kappa)),   w = q^(2n+alpha+1)
/// ```
///
/// and their `kappa -> 0` limits `(1-u)(1-cu)/q^(2n)` and `(1-v)(1-v/c)/w`.
pub fn qpv_limit_gap(ctx: &ModelContext, n: usize, u: &Float, v: &Float, kappa: &Float) -> Result<(Float, Float)> {
    let prec = ctx.prec();
    let c = ctx.c();
    if !(*c < 0) {
        return Err(Error::InvalidParameter {
            name: "c",
            reason: "must be negative".into(),
        });
    }
    if !(*kappa > 0 && *kappa < 0.1) {
        return Err(Error::InvalidParameter {
            name: "kappa",
            reason: "must lie in (0, 0.1)".into(),
        });
    }
    let q2n = ctx.q_powi(2 * n as i64);
    let ck = Float::with_val(prec, c * kappa);
    let w = ctx.q_pow(&Float::with_val(prec, ctx.alpha() + (2 * n as u32 + 1)));

    let num1 = Float::with_val(prec, u - 1u32)
        * Float::with_val(prec, u - Float::with_val(prec, c.recip_ref()))
        * Float::with_val(prec, u - Float::with_val(prec, kappa.recip_ref()))
        * Float::with_val(prec, u - &ck);
    let den1 = Float::with_val(prec, u - Float::with_val(prec, &ck * &q2n))
        * Float::with_val(prec, u - Float::with_val(prec, &q2n / &ck));
    let num2 = Float::with_val(prec, v - 1u32)
        * Float::with_val(prec, v - c)
        * Float::with_val(prec, v - kappa)
        * Float::with_val(prec, v - Float::with_val(prec, ck.recip_ref()));
    let den2 = Float::with_val(prec, v - Float::with_val(prec, kappa * &w))
        * Float::with_val(prec, v - Float::with_val(prec, &w / kappa));
    if den1.is_zero() {
        return Err(Error::RationalPole("first kappa-deformed right side"));
    }
    if den2.is_zero() {
        return Err(Error::RationalPole("second kappa-deformed right side"));
    }
    let t1 = Float::with_val(prec, 1u32 - u) * (1u32 - Float::with_val(prec, c * u)) / &q2n;
    let t2 = Float::with_val(prec, 1u32 - v) * (1u32 - Float::with_val(prec, v / c)) / &w;
    Ok((num1 / den1 - t1, num2 / den2 - t2))
}
