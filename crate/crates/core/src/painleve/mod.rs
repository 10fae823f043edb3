//! The q-Painleve I recurrence for `y_n = a_n^2 q^(1-n)`:
//!
//! ```text
//! q^(n-alpha) (-c y_n y_{n+1} + q^alpha) (-c y_n y_{n-1} + q^alpha)
//!     = (q^alpha - y_n)(q^alpha - c y_n) q^-alpha     n even
//!     = (1 - y_n)(1 - c y_n)                          n odd
//! ```
//!
//! with `y_0 = 0`. At `c = -1` this is the factorized quartic form
//! `q^(n-alpha)(y_n y_{n+1} + q^alpha)(y_n y_{n-1} + q^alpha) = q^alpha - q^-alpha y_n^2`
//! (even) / `1 - y_n^2` (odd).

mod confinement;
mod limits;

pub use confinement::{confinement_chain, confinement_probe, critical_y_before, predicted_y4, SingularityTrace};
pub use limits::{dp1_family, dp1_limit_residual, qpv_limit_gap, Dp1Report};

use rug::Float;

use crate::error::{Error, Result, SingularFactor};
use crate::qcore::{qpochhammer_inf, ModelContext};
use crate::report::ResidualReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(n: usize) -> Parity {
        if n % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// How a coefficient sequence was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Oracle,
    Forward,
    FixedPoint,
    ClosedForm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::Forward => "forward",
            Method::FixedPoint => "fixedpoint",
            Method::ClosedForm => "closed_form",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        match s {
            "oracle" => Ok(Method::Oracle),
            "forward" => Ok(Method::Forward),
            "fixedpoint" | "fixed-point" => Ok(Method::FixedPoint),
            "closed_form" | "closed-form" => Ok(Method::ClosedForm),
            _ => Err(Error::InvalidParameter {
                name: "method",
                reason: format!("unknown method `{s}`"),
            }),
        }
    }
}

/// `y_0 .. y_N` together with where they came from.
#[derive(Debug, Clone)]
pub struct CoefficientSequence {
    pub y: Vec<Float>,
    pub method: Method,
    /// Working precision (bits) every entry was computed at.
    pub prec: u32,
    /// First `n >= 1` with `y_n <= 0`, if any.
    pub first_nonpositive: Option<usize>,
}

impl CoefficientSequence {
    pub fn new(y: Vec<Float>, method: Method, prec: u32) -> CoefficientSequence {
        let first_nonpositive = y.iter().enumerate().skip(1).find(|(_, v)| !(**v > 0)).map(|(i, _)| i);
        CoefficientSequence {
            y,
            method,
            prec,
            first_nonpositive,
        }
    }

    /// From `a_n^2` values (index 0 ignored): `y_n = a_n^2 q^(1-n)`.
    pub fn from_a_sq(ctx: &ModelContext, a_sq: &[Float], method: Method) -> CoefficientSequence {
        let mut y = Vec::with_capacity(a_sq.len());
        let mut scale = ctx.q().clone();
        for (n, a2) in a_sq.iter().enumerate() {
            if n == 0 {
                y.push(ctx.zero());
            } else {
                y.push(Float::with_val(ctx.prec(), a2 * &scale));
            }
            scale /= ctx.q();
        }
        CoefficientSequence::new(y, method, ctx.prec())
    }

    /// `a_n^2 = y_n q^(n-1)`.
    pub fn a_sq(&self, ctx: &ModelContext) -> Vec<Float> {
        let mut out = Vec::with_capacity(self.y.len());
        let mut scale = ctx.q().clone().recip();
        for y in &self.y {
            out.push(Float::with_val(ctx.prec(), y * &scale));
            scale *= ctx.q();
        }
        out
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Largest index `N`.
    pub fn n_max(&self) -> usize {
        self.y.len().saturating_sub(1)
    }
}

/// Initial value `y_1 = m_2 / m_0` from its closed form, with the direct
/// moment ratio alongside.
#[derive(Debug, Clone)]
pub struct InitialValue {
    pub value: Float,
    pub moment_ratio: Float,
}

impl InitialValue {
    pub fn gap(&self) -> Float {
        Float::with_val(self.value.prec(), &self.value - &self.moment_ratio).abs()
    }
}

/// `sum_k q^(k e) / ((q^2; q^2)_k (c q^2; q^2)_k)`.
fn y1_series(ctx: &ModelContext, exponent: &Float) -> Result<Float> {
    let prec = ctx.prec();
    let ratio0 = ctx.q_pow(exponent);
    let q2 = ctx.q_powi(2);
    let mut q2k = q2.clone(); // q^(2k+2) for the step k -> k+1
    let mut term = ctx.one();
    let mut sum = ctx.one();
    let max_terms = 10 * ctx.lattice_cutoff() + 1000;
    for _ in 0..max_terms {
        let a = Float::with_val(prec, 1u32 - &q2k);
        let b = 1u32 - Float::with_val(prec, ctx.c() * &q2k);
        if b.is_zero() {
            return Err(Error::Divergent {
                what: "y1 series (pole in (c q^2; q^2)_k)",
                terms: 0,
            });
        }
        term *= &ratio0;
        term /= Float::with_val(prec, &a * &b);
        sum += &term;
        // successive term ratios are bounded by q^e / (1 - q^(2k+2)) once
        // (1 - c q^(2k+2)) >= 1, so the tail is a geometric remainder
        let bound = Float::with_val(prec, &ratio0 / &a);
        if bound < 1 && (*ctx.c() <= 0 || b >= 1) {
            let tail = Float::with_val(prec, term.abs_ref()) * &bound / Float::with_val(prec, 1u32 - &bound);
            if tail < Float::with_val(prec, sum.abs_ref()) * ctx.series_tol() {
                return Ok(sum);
            }
        }
        q2k *= &q2;
    }
    Err(Error::Divergent {
        what: "y1 series",
        terms: max_terms,
    })
}

/// Closed form of `y_1`: `(q^(alpha+1); q^4)_inf / (q^(alpha+3); q^4)_inf`
/// at `c = -1`, otherwise the ratio of the two `c`-series.
pub fn y1_closed(ctx: &ModelContext) -> Result<InitialValue> {
    let prec = ctx.prec();
    let e1 = Float::with_val(prec, ctx.alpha() + 1u32);
    let e3 = Float::with_val(prec, ctx.alpha() + 3u32);
    let value = if ctx.is_quartic() {
        let q4 = ctx.q_powi(4);
        qpochhammer_inf(&ctx.q_pow(&e1), &q4, ctx)? / qpochhammer_inf(&ctx.q_pow(&e3), &q4, ctx)?
    } else {
        y1_series(ctx, &e3)? / y1_series(ctx, &e1)?
    };
    let w = crate::weights::lattice_weights(ctx, crate::weights::WeightKind::General)?;
    let moment_ratio = crate::weights::moment_from(ctx, &w, 2) / crate::weights::moment_from(ctx, &w, 0);
    Ok(InitialValue { value, moment_ratio })
}

/// Right side of the recurrence at index `n`.
pub fn painleve_rhs(ctx: &ModelContext, parity: Parity, y: &Float) -> Float {
    let prec = ctx.prec();
    let cy = Float::with_val(prec, ctx.c() * y);
    match parity {
        Parity::Even => {
            let qa = ctx.q_alpha();
            Float::with_val(prec, qa - y) * Float::with_val(prec, qa - &cy) / qa
        }
        Parity::Odd => Float::with_val(prec, 1u32 - y) * (1u32 - cy),
    }
}

/// `-c y_n y_m + q^alpha`.
fn coupling(ctx: &ModelContext, y_n: &Float, y_m: &Float) -> Float {
    let prod = Float::with_val(ctx.prec(), y_n * y_m) * ctx.c();
    Float::with_val(ctx.prec(), ctx.q_alpha() - prod)
}

/// `q^(alpha - n)`.
fn q_alpha_minus(ctx: &ModelContext, n: usize) -> Float {
    Float::with_val(ctx.prec(), ctx.q_alpha() / ctx.q_powi(n as i64))
}

/// Solves the recurrence at index `n` for `y_{n+1}`:
/// `y_{n+1} = (q^alpha - R_n q^(alpha-n) / (-c y_n y_{n-1} + q^alpha)) / (c y_n)`.
pub fn forward_step(ctx: &ModelContext, n: usize, y_prev: &Float, y_cur: &Float) -> Result<Float> {
    forward_step_as(ctx, n, Parity::of(n), y_prev, y_cur)
}

pub(crate) fn forward_step_as(ctx: &ModelContext, n: usize, parity: Parity, y_prev: &Float, y_cur: &Float) -> Result<Float> {
    let prec = ctx.prec();
    if ctx.c().is_zero() {
        return Err(Error::InvalidParameter {
            name: "c",
            reason: "c = 0 has no forward step; use the closed form".into(),
        });
    }
    let thr = ctx.singular_threshold();
    if Float::with_val(prec, y_cur.abs_ref()) < *thr {
        return Err(Error::Singularity {
            index: n,
            factor: SingularFactor::Current,
            value: crate::qcore::to_decimal(y_cur, 12),
        });
    }
    let d = coupling(ctx, y_cur, y_prev);
    if Float::with_val(prec, d.abs_ref()) < *thr {
        return Err(Error::Singularity {
            index: n,
            factor: SingularFactor::Coupling,
            value: crate::qcore::to_decimal(&d, 12),
        });
    }
    let r = painleve_rhs(ctx, parity, y_cur);
    let num = Float::with_val(prec, ctx.q_alpha() - r * q_alpha_minus(ctx, n) / d);
    Ok(num / Float::with_val(prec, ctx.c() * y_cur))
}

/// `y_n` for `c = 0`: `q^alpha (1 - q^n)` (even), `1 - q^(n+alpha)` (odd).
pub fn closed_form_c0(ctx: &ModelContext, n_max: usize) -> CoefficientSequence {
    let prec = ctx.prec();
    let y = (0..=n_max)
        .map(|n| {
            let qn = ctx.q_powi(n as i64);
            match Parity::of(n) {
                Parity::Even => Float::with_val(prec, 1u32 - qn) * ctx.q_alpha(),
                Parity::Odd => 1u32 - qn * ctx.q_alpha(),
            }
        })
        .collect();
    CoefficientSequence::new(y, Method::ClosedForm, prec)
}

/// The alternative `c = 0` even-index formula `q^alpha - q^(n + 2 alpha)`,
/// kept for comparison against the oracle; the odd entries equal
/// [`closed_form_c0`].
pub fn alternative_even_c0(ctx: &ModelContext, n_max: usize) -> CoefficientSequence {
    let prec = ctx.prec();
    let mut seq = closed_form_c0(ctx, n_max);
    for n in (0..=n_max).step_by(2) {
        let t = Float::with_val(prec, ctx.q_powi(n as i64) * ctx.q_alpha()) * ctx.q_alpha();
        seq.y[n] = Float::with_val(prec, ctx.q_alpha() - t);
    }
    seq.first_nonpositive = None;
    seq
}

/// Forward iteration from `y_0 = 0`, `y_1 = y1_closed`. Stops at the first
/// singular step and returns the prefix computed so far with the error.
pub fn forward_run_partial(ctx: &ModelContext, n_max: usize) -> (CoefficientSequence, Option<Error>) {
    if ctx.c().is_zero() {
        return (closed_form_c0(ctx, n_max), None);
    }
    let mut y = vec![ctx.zero()];
    if n_max == 0 {
        return (CoefficientSequence::new(y, Method::Forward, ctx.prec()), None);
    }
    match y1_closed(ctx) {
        Ok(v) => y.push(v.value),
        Err(e) => return (CoefficientSequence::new(y, Method::Forward, ctx.prec()), Some(e)),
    }
    for n in 1..n_max {
        match forward_step(ctx, n, &y[n - 1], &y[n]) {
            Ok(next) => y.push(next),
            Err(e) => return (CoefficientSequence::new(y, Method::Forward, ctx.prec()), Some(e)),
        }
    }
    (CoefficientSequence::new(y, Method::Forward, ctx.prec()), None)
}

/// Forward iteration; a singular step is an error.
pub fn forward_run(ctx: &ModelContext, n_max: usize) -> Result<CoefficientSequence> {
    match forward_run_partial(ctx, n_max) {
        (seq, None) => Ok(seq),
        (_, Some(e)) => Err(e),
    }
}

/// Which right side to use when evaluating residuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Parity of `n`.
    Auto,
    /// Force one parity at every `n`.
    Forced(Parity),
}

/// `(LHS - RHS) / max(1, |RHS|)` at every `1 <= n <= N-1`.
pub fn painleve_residual(ctx: &ModelContext, seq: &CoefficientSequence) -> Result<ResidualReport> {
    painleve_residual_with(ctx, seq, Branch::Auto)
}

pub fn painleve_residual_with(ctx: &ModelContext, seq: &CoefficientSequence, branch: Branch) -> Result<ResidualReport> {
    if seq.len() < 3 {
        return Err(Error::ShortSequence {
            needed: 3,
            got: seq.len(),
        });
    }
    let prec = ctx.prec();
    let y = &seq.y;
    let quartic = ctx.is_quartic();
    let mut out = Vec::with_capacity(y.len() - 2);
    for n in 1..y.len() - 1 {
        let parity = match branch {
            Branch::Auto => Parity::of(n),
            Branch::Forced(p) => p,
        };
        let scale = ctx.q_powi(n as i64) / ctx.q_alpha();
        let (lhs, rhs) = if quartic {
            let qa = ctx.q_alpha();
            let l = scale * Float::with_val(prec, &y[n] * &y[n + 1] + qa) * Float::with_val(prec, &y[n] * &y[n - 1] + qa);
            let y2 = Float::with_val(prec, y[n].square_ref());
            let r = match parity {
                Parity::Even => Float::with_val(prec, qa - y2 / qa),
                Parity::Odd => 1u32 - y2,
            };
            (l, r)
        } else {
            let l = scale * coupling(ctx, &y[n], &y[n + 1]) * coupling(ctx, &y[n], &y[n - 1]);
            (l, painleve_rhs(ctx, parity, &y[n]))
        };
        let denom = Float::with_val(prec, rhs.abs_ref()).max(&Float::with_val(prec, 1));
        out.push((n, (lhs - rhs) / denom));
    }
    Ok(ResidualReport::new(format!("painleve_{}", seq.method.name()), out))
}

/// Row variables for the asymmetric form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UvVariant {
    /// `u_n = q^-alpha y_{2n}`, `v_n = -y_{2n+1}`; requires `c = -1`.
    Quartic,
    /// `u_n = q^-alpha y_{2n}`, `v_n = c y_{2n+1}`; requires `c != 0`.
    General,
}

#[derive(Debug, Clone)]
pub struct UvRows {
    pub u: Vec<Float>,
    pub v: Vec<Float>,
    pub variant: UvVariant,
}

fn check_variant(ctx: &ModelContext, variant: UvVariant) -> Result<()> {
    match variant {
        UvVariant::Quartic if !ctx.is_quartic() => Err(Error::VariantMismatch {
            variant: "quartic",
            requirement: "c = -1",
        }),
        UvVariant::General if ctx.c().is_zero() => Err(Error::VariantMismatch {
            variant: "general",
            requirement: "c != 0",
        }),
        _ => Ok(()),
    }
}

pub fn to_uv(ctx: &ModelContext, seq: &CoefficientSequence, variant: UvVariant) -> Result<UvRows> {
    check_variant(ctx, variant)?;
    let prec = ctx.prec();
    let v_scale = match variant {
        UvVariant::Quartic => Float::with_val(prec, -1),
        UvVariant::General => ctx.c().clone(),
    };
    let u = seq.y.iter().step_by(2).map(|y| Float::with_val(prec, y / ctx.q_alpha())).collect();
    let v = seq.y.iter().skip(1).step_by(2).map(|y| Float::with_val(prec, y * &v_scale)).collect();
    Ok(UvRows { u, v, variant })
}

/// Inverse of [`to_uv`].
pub fn from_uv(ctx: &ModelContext, rows: &UvRows) -> Result<Vec<Float>> {
    check_variant(ctx, rows.variant)?;
    let prec = ctx.prec();
    let v_scale = match rows.variant {
        UvVariant::Quartic => Float::with_val(prec, -1),
        UvVariant::General => ctx.c().clone(),
    };
    let mut y = Vec::with_capacity(rows.u.len() + rows.v.len());
    for i in 0..rows.u.len() {
        y.push(Float::with_val(prec, &rows.u[i] * ctx.q_alpha()));
        if let Some(v) = rows.v.get(i) {
            y.push(Float::with_val(prec, v / &v_scale));
        }
    }
    Ok(y)
}

/// Residuals of the two row equations
///
/// ```text
/// q^(2m)         (1 - u_m v_m)(1 - u_m v_{m-1}) = (1 - u_m)(1 - c u_m)
/// q^(2m+1+alpha) (1 - u_m v_m)(1 - u_{m+1} v_m) = (1 - v_m)(1 - v_m / c)
/// ```
///
/// (at `c = -1` the right sides are `1 - u_m^2` and `1 - v_m^2`). Residual
/// indices are the `y` indices `2m` and `2m + 1`.
pub fn uv_residual(ctx: &ModelContext, rows: &UvRows) -> Result<ResidualReport> {
    check_variant(ctx, rows.variant)?;
    let prec = ctx.prec();
    let (u, v) = (&rows.u, &rows.v);
    let one_minus = |a: &Float, b: &Float| 1u32 - Float::with_val(prec, a * b);
    let mut out = Vec::new();
    for m in 1..u.len() {
        if m >= v.len() {
            break;
        }
        let lhs = ctx.q_powi(2 * m as i64) * one_minus(&u[m], &v[m]) * one_minus(&u[m], &v[m - 1]);
        let rhs = match rows.variant {
            UvVariant::Quartic => 1u32 - Float::with_val(prec, u[m].square_ref()),
            UvVariant::General => {
                Float::with_val(prec, 1u32 - &u[m]) * (1u32 - Float::with_val(prec, ctx.c() * &u[m]))
            }
        };
        out.push((2 * m, lhs - rhs));
    }
    for m in 0..v.len() {
        if m + 1 >= u.len() {
            break;
        }
        let e = Float::with_val(prec, ctx.alpha() + (2 * m as u32 + 1));
        let lhs = ctx.q_pow(&e) * one_minus(&u[m], &v[m]) * one_minus(&u[m + 1], &v[m]);
        let rhs = match rows.variant {
            UvVariant::Quartic => 1u32 - Float::with_val(prec, v[m].square_ref()),
            UvVariant::General => {
                Float::with_val(prec, 1u32 - &v[m]) * (1u32 - Float::with_val(prec, &v[m] / ctx.c()))
            }
        };
        out.push((2 * m + 1, lhs - rhs));
    }
    out.sort_by_key(|(i, _)| *i);
    Ok(ResidualReport::new("uv", out))
}

/// Distances of the even and odd subsequences from their limits `q^alpha`
/// and `1`.
#[derive(Debug, Clone)]
pub struct AsymptoteReport {
    /// `|y_{2n} - q^alpha|`, indexed by the `y` index `2n` (`n >= 1`).
    pub even: ResidualReport,
    /// `|y_{2n+1} - 1|`, indexed by `2n + 1`.
    pub odd: ResidualReport,
    /// Smallest `y` index from which both gap subsequences strictly decrease.
    pub monotone_from: Option<usize>,
}

impl AsymptoteReport {
    /// Smallest `y` index from which every gap is below `bound`.
    pub fn settled_below(&self, bound: &Float) -> Option<usize> {
        let mut all: Vec<&(usize, Float)> = self.even.residuals.iter().chain(&self.odd.residuals).collect();
        all.sort_by_key(|(i, _)| *i);
        let mut from = None;
        for (i, g) in all.iter().rev() {
            if g < bound {
                from = Some(*i);
            } else {
                break;
            }
        }
        from
    }

    /// `max(monotone_from, settled_below(bound))`, when both exist.
    pub fn n0(&self, bound: &Float) -> Option<usize> {
        Some(self.monotone_from?.max(self.settled_below(bound)?))
    }
}

fn monotone_start(gaps: &[(usize, Float)]) -> Option<usize> {
    if gaps.is_empty() {
        return None;
    }
    let mut start = gaps.len() - 1;
    while start > 0 && gaps[start - 1].1 > gaps[start].1 {
        start -= 1;
    }
    Some(gaps[start].0)
}

pub fn asymptote_gap(ctx: &ModelContext, seq: &CoefficientSequence) -> AsymptoteReport {
    let prec = ctx.prec();
    let mut even = Vec::new();
    let mut odd = Vec::new();
    for (n, y) in seq.y.iter().enumerate().skip(1) {
        match Parity::of(n) {
            Parity::Even => even.push((n, Float::with_val(prec, y - ctx.q_alpha()).abs())),
            Parity::Odd => odd.push((n, Float::with_val(prec, y - 1u32).abs())),
        }
    }
    let monotone_from = match (monotone_start(&even), monotone_start(&odd)) {
        (Some(a), Some(b)) => Some(a.min(b).max(a.max(b) - 1)),
        _ => None,
    };
    AsymptoteReport {
        even: ResidualReport::new("gap_even", even),
        odd: ResidualReport::new("gap_odd", odd),
        monotone_from,
    }
}

/// Smallest `|-c y_n y_{n-1} + q^alpha|` over `1 <= n <= N`.
pub fn min_coupling(ctx: &ModelContext, seq: &CoefficientSequence) -> Float {
    let mut min: Option<Float> = None;
    for n in 1..seq.len() {
        let d = coupling(ctx, &seq.y[n], &seq.y[n - 1]).abs();
        if min.as_ref().map_or(true, |m| d < *m) {
            min = Some(d);
        }
    }
    min.unwrap_or_else(|| ctx.zero())
}
