//! Configurable-precision q-calculus kernel.
//!
//! Everything here works on [`rug::Float`] values carrying the context's
//! working precision: `digits` decimal digits plus [`GUARD_DIGITS`] guard
//! digits. There is no `f64` anywhere on the numerical path; `f64` is only
//! used to size loops (lattice cutoffs, iteration caps).

use std::sync::OnceLock;

use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};

/// Arbitrary-precision real used throughout the crate.
pub type PrecisionReal = Float;

/// Extra decimal digits carried beyond the requested working precision.
pub const GUARD_DIGITS: u32 = 10;

/// Smallest working precision accepted without `allow_low_precision`.
pub const MIN_DIGITS: u32 = 30;

const LOG2_10: f64 = std::f64::consts::LOG2_10;

/// A model parameter as supplied by the caller, resolved to a [`Float`]
/// only once the working precision is known.
///
/// Decimal strings (`"0.9"`) and ratios (`"-1/3"`) are parsed at full
/// precision; `f64` inputs are taken at their exact binary value.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Text(String),
    Float(f64),
    Real(Float),
}

impl From<&str> for ParamValue {
    fn from(s: &str) -> Self {
        ParamValue::Text(s.to_string())
    }
}

impl From<String> for ParamValue {
    fn from(s: String) -> Self {
        ParamValue::Text(s)
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}

impl From<i32> for ParamValue {
    fn from(v: i32) -> Self {
        ParamValue::Float(v as f64)
    }
}

impl From<Float> for ParamValue {
    fn from(v: Float) -> Self {
        ParamValue::Real(v)
    }
}

impl ParamValue {
    pub fn resolve(&self, prec: u32) -> Result<Float> {
        match self {
            ParamValue::Real(v) => Ok(Float::with_val(prec, v)),
            ParamValue::Float(v) if v.is_finite() => Ok(Float::with_val(prec, *v)),
            ParamValue::Float(v) => Err(Error::Parse(v.to_string())),
            ParamValue::Text(s) => parse_real(s, prec),
        }
    }
}

impl std::fmt::Display for ParamValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamValue::Text(s) => write!(f, "{s}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{}", to_decimal(v, 30)),
        }
    }
}

/// Parses a decimal (`"0.9"`, `"1e-20"`) or a ratio of decimals (`"-1/3"`).
pub fn parse_real(text: &str, prec: u32) -> Result<Float> {
    let text = text.trim();
    let parse_one = |s: &str| -> Result<Float> {
        Float::parse(s.trim())
            .map(|p| Float::with_val(prec, p))
            .map_err(|_| Error::Parse(text.to_string()))
    };
    let value = match text.split_once('/') {
        Some((num, den)) => {
            let den = parse_one(den)?;
            if den.is_zero() {
                return Err(Error::Parse(text.to_string()));
            }
            parse_one(num)? / den
        }
        None => parse_one(text)?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Parse(text.to_string()))
    }
}

/// Builder for [`ModelContext`].
#[derive(Debug, Clone)]
pub struct ContextBuilder {
    q: ParamValue,
    alpha: ParamValue,
    c: ParamValue,
    digits: u32,
    series_tol: Option<ParamValue>,
    lattice_cutoff: Option<usize>,
    exploratory: bool,
    allow_low_precision: bool,
}

impl Default for ContextBuilder {
    fn default() -> Self {
        ContextBuilder {
            q: ParamValue::Text("0.9".into()),
            alpha: ParamValue::Text("5".into()),
            c: ParamValue::Text("-1".into()),
            digits: 100,
            series_tol: None,
            lattice_cutoff: None,
            exploratory: false,
            allow_low_precision: false,
        }
    }
}

impl ContextBuilder {
    pub fn q(mut self, q: impl Into<ParamValue>) -> Self {
        self.q = q.into();
        self
    }

    pub fn alpha(mut self, alpha: impl Into<ParamValue>) -> Self {
        self.alpha = alpha.into();
        self
    }

    pub fn c(mut self, c: impl Into<ParamValue>) -> Self {
        self.c = c.into();
        self
    }

    pub fn digits(mut self, digits: u32) -> Self {
        self.digits = digits;
        self
    }

    /// Truncation threshold for infinite sums and products. Must not exceed
    /// `10^-digits`.
    pub fn series_tol(mut self, tol: impl Into<ParamValue>) -> Self {
        self.series_tol = Some(tol.into());
        self
    }

    /// Overrides the automatic cutoff `K = ceil(log(series_tol) / log(q))`.
    pub fn lattice_cutoff(mut self, k: usize) -> Self {
        self.lattice_cutoff = Some(k);
        self
    }

    /// Permits `c > 0`. Such runs are recorded but positivity of the weight is
    /// not certified.
    pub fn exploratory(mut self, on: bool) -> Self {
        self.exploratory = on;
        self
    }

    /// Permits `digits < 30`, used to reproduce low-precision forward runs.
    pub fn allow_low_precision(mut self, on: bool) -> Self {
        self.allow_low_precision = on;
        self
    }

    pub fn build(self) -> Result<ModelContext> {
        if self.digits == 0 {
            return Err(Error::InvalidParameter {
                name: "digits",
                reason: "must be positive".into(),
            });
        }
        if self.digits < MIN_DIGITS && !self.allow_low_precision {
            return Err(Error::InvalidParameter {
                name: "digits",
                reason: format!("{} < {MIN_DIGITS} (enable low-precision mode)", self.digits),
            });
        }
        let prec = precision_bits(self.digits);
        let q = self.q.resolve(prec)?;
        if !(q > 0 && q < 1) {
            return Err(Error::InvalidParameter {
                name: "q",
                reason: format!("{} is not in (0, 1)", self.q),
            });
        }
        let alpha = self.alpha.resolve(prec)?;
        if !(alpha > -1) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("{} is not > -1", self.alpha),
            });
        }
        let c = self.c.resolve(prec)?;
        if c > 0 && !self.exploratory {
            return Err(Error::InvalidParameter {
                name: "c",
                reason: format!("{} > 0 needs exploratory mode", self.c),
            });
        }
        let max_tol = Float::with_val(prec, 10).pow(-(self.digits as i32));
        let series_tol = match &self.series_tol {
            Some(t) => {
                let t = t.resolve(prec)?;
                if !(t > 0) || t > max_tol {
                    return Err(Error::InvalidParameter {
                        name: "series_tol",
                        reason: format!("must lie in (0, 1e-{}]", self.digits),
                    });
                }
                t
            }
            None => max_tol,
        };
        let lattice_cutoff = match self.lattice_cutoff {
            Some(0) => {
                return Err(Error::InvalidParameter {
                    name: "lattice_cutoff",
                    reason: "must be positive".into(),
                })
            }
            Some(k) => k,
            None => {
                let ratio = Float::with_val(prec, series_tol.ln_ref()) / Float::with_val(prec, q.ln_ref());
                ratio.ceil().to_f64().max(1.0) as usize
            }
        };
        let q_alpha = Float::with_val(prec, (&q).pow(&alpha));
        let singular_threshold = Float::with_val(prec, 10).pow(-((self.digits / 2) as i32));
        Ok(ModelContext {
            q,
            alpha,
            c,
            q_alpha,
            digits: self.digits,
            prec,
            series_tol,
            singular_threshold,
            lattice_cutoff,
            exploratory: self.exploratory,
            spec: self,
            lattice: OnceLock::new(),
        })
    }
}

/// Working precision in bits for `digits` decimal digits plus guard digits.
pub fn precision_bits(digits: u32) -> u32 {
    ((digits + GUARD_DIGITS) as f64 * LOG2_10).ceil() as u32
}

/// Model parameters `(q, alpha, c)`, working precision and truncation
/// tolerances. Immutable after construction.
#[derive(Debug, Clone)]
pub struct ModelContext {
    q: Float,
    alpha: Float,
    c: Float,
    q_alpha: Float,
    digits: u32,
    prec: u32,
    series_tol: Float,
    singular_threshold: Float,
    lattice_cutoff: usize,
    exploratory: bool,
    spec: ContextBuilder,
    lattice: OnceLock<Lattice>,
}

impl ModelContext {
    pub fn builder() -> ContextBuilder {
        ContextBuilder::default()
    }

    /// The builder this context came from, for re-deriving variants.
    pub fn to_builder(&self) -> ContextBuilder {
        self.spec.clone()
    }

    /// Same parameters at a different working precision.
    pub fn with_digits(&self, digits: u32) -> Result<ModelContext> {
        let mut b = self.spec.clone();
        b.digits = digits;
        b.series_tol = None;
        b.lattice_cutoff = None;
        b.build()
    }

    pub fn q(&self) -> &Float {
        &self.q
    }

    pub fn alpha(&self) -> &Float {
        &self.alpha
    }

    pub fn c(&self) -> &Float {
        &self.c
    }

    /// `q^alpha`.
    pub fn q_alpha(&self) -> &Float {
        &self.q_alpha
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    /// Working precision in bits (including guard digits).
    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn series_tol(&self) -> &Float {
        &self.series_tol
    }

    /// `10^(-digits/2)`: divisors below this are treated as singular.
    pub fn singular_threshold(&self) -> &Float {
        &self.singular_threshold
    }

    pub fn lattice_cutoff(&self) -> usize {
        self.lattice_cutoff
    }

    pub fn is_exploratory(&self) -> bool {
        self.exploratory
    }

    pub fn param_text(&self) -> (String, String, String) {
        (
            self.spec.q.to_string(),
            self.spec.alpha.to_string(),
            self.spec.c.to_string(),
        )
    }

    /// True when `c` is exactly `-1` (the quartic weight).
    pub fn is_quartic(&self) -> bool {
        self.c == -1
    }

    pub fn real<T>(&self, v: T) -> Float
    where
        Float: rug::Assign<T>,
    {
        Float::with_val(self.prec, v)
    }

    pub fn zero(&self) -> Float {
        Float::new(self.prec)
    }

    pub fn one(&self) -> Float {
        Float::with_val(self.prec, 1)
    }

    /// `q^e` for a real exponent.
    pub fn q_pow(&self, e: &Float) -> Float {
        Float::with_val(self.prec, (&self.q).pow(e))
    }

    /// `q^n` for an integer exponent.
    pub fn q_powi(&self, n: i64) -> Float {
        let e = Float::with_val(self.prec, n);
        self.q_pow(&e)
    }

    /// `10^(-k)` at working precision.
    pub fn ten_pow_neg(&self, k: i32) -> Float {
        Float::with_val(self.prec, 10).pow(-k)
    }

    /// The truncated lattice, built on first use.
    pub fn lattice(&self) -> &Lattice {
        self.lattice.get_or_init(|| Lattice::new(self))
    }
}

/// Positive half of the truncated lattice `{q^k : k = 0..=K}` together with
/// the Jackson masses `(1 - q) q^k`.
///
/// `nodes` carries one extra node `q^(K+1)` so that `D_q` can be evaluated
/// at every quadrature node.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub nodes: Vec<Float>,
    pub masses: Vec<Float>,
}

impl Lattice {
    fn new(ctx: &ModelContext) -> Lattice {
        let k_max = ctx.lattice_cutoff();
        let mut nodes = Vec::with_capacity(k_max + 2);
        let mut x = ctx.one();
        for _ in 0..k_max + 2 {
            nodes.push(x.clone());
            x *= ctx.q();
        }
        let one_minus_q = Float::with_val(ctx.prec(), 1 - ctx.q());
        let masses = nodes[..=k_max]
            .iter()
            .map(|x| Float::with_val(ctx.prec(), x * &one_minus_q))
            .collect();
        Lattice { nodes, masses }
    }

    /// Number of quadrature nodes on the positive half (`K + 1`).
    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }
}

/// Finite q-Pochhammer symbol `(a; q)_n`.
pub fn qpochhammer(a: &Float, q: &Float, n: usize) -> Float {
    let prec = a.prec().max(q.prec());
    let mut acc = Float::with_val(prec, 1);
    let mut term = Float::with_val(prec, a);
    for _ in 0..n {
        acc *= Float::with_val(prec, 1 - &term);
        term *= q;
    }
    acc
}

/// Infinite q-Pochhammer symbol `(a; q)_inf`.
///
/// The product is stopped at the first `j` with `|a| q^j / (1 - |q|) <
/// series_tol`. The neglected factors then satisfy `sum_j |a q^j| <
/// series_tol`, so the relative error of the result is at most
/// `2 * series_tol` (for `series_tol <= 1/2`).
pub fn qpochhammer_inf(a: &Float, q: &Float, ctx: &ModelContext) -> Result<Float> {
    let prec = ctx.prec();
    let abs_q = Float::with_val(prec, q.abs_ref());
    if abs_q >= 1 {
        return Err(Error::InvalidParameter {
            name: "q",
            reason: "infinite product needs |q| < 1".into(),
        });
    }
    let mut acc = Float::with_val(prec, 1);
    if a.is_zero() {
        return Ok(acc);
    }
    let stop = Float::with_val(prec, ctx.series_tol() * Float::with_val(prec, 1 - &abs_q));
    let mut term = Float::with_val(prec, a);
    loop {
        if Float::with_val(prec, term.abs_ref()) < stop {
            return Ok(acc);
        }
        acc *= Float::with_val(prec, 1 - &term);
        term *= q;
    }
}

/// Result of a Jackson q-integral over `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct QIntegral {
    pub value: Float,
    /// `2 max|f| q^(K+1)` over the sampled nodes: the size of the neglected
    /// tail if `f` stays bounded by its sampled maximum.
    pub tail_bound: Float,
}

/// Jackson integral `(1-q) sum_{k=0}^{K} [f(q^k) + f(-q^k)] q^k`.
pub fn qintegral<F>(ctx: &ModelContext, f: F) -> Result<QIntegral>
where
    F: Fn(&Float) -> Float,
{
    let lat = ctx.lattice();
    let mut value = ctx.zero();
    let mut sup = ctx.zero();
    for (k, (x, m)) in lat.nodes.iter().zip(&lat.masses).enumerate() {
        let fp = f(x);
        let fm = f(&Float::with_val(ctx.prec(), -x));
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::Overflow { index: k });
        }
        for v in [&fp, &fm] {
            let a = Float::with_val(ctx.prec(), v.abs_ref());
            if a > sup {
                sup = a;
            }
        }
        value += Float::with_val(ctx.prec(), &fp + &fm) * m;
    }
    let tail_bound = sup * Float::with_val(ctx.prec(), 2) * &lat.nodes[lat.len()];
    Ok(QIntegral { value, tail_bound })
}

/// q-difference operator `D_q f(x) = (f(qx) - f(x)) / (x (q - 1))`.
///
/// At `x = 0` the value is `f'(0)`, which must be supplied by the caller
/// (for a polynomial, its linear coefficient).
pub fn qdiff<F>(ctx: &ModelContext, f: F, x: &Float, derivative_at_zero: Option<&Float>) -> Result<Float>
where
    F: Fn(&Float) -> Float,
{
    if x.is_zero() {
        return derivative_at_zero
            .map(|d| ctx.real(d))
            .ok_or(Error::DerivativeAtZero);
    }
    let qx = Float::with_val(ctx.prec(), x * ctx.q());
    let num = f(&qx) - f(x);
    let den = Float::with_val(ctx.prec(), ctx.q() - 1u32) * x;
    Ok(num / den)
}

/// q-number `[k]_q = (1 - q^k) / (1 - q)`.
pub fn qnumber(ctx: &ModelContext, k: i64) -> Float {
    let num = 1 - ctx.q_powi(k);
    num / Float::with_val(ctx.prec(), 1 - ctx.q())
}

/// Renders a value with `digits` significant decimal digits.
pub fn to_decimal(x: &Float, digits: u32) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    x.to_string_radix(10, Some(digits as usize))
}

/// `log10 |x|` at working precision; `-inf` for zero.
pub fn log10_abs(x: &Float) -> Float {
    let a = Float::with_val(x.prec(), x.abs_ref());
    a.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(q: &str, digits: u32) -> ModelContext {
        ModelContext::builder().q(q).alpha(0).c(-1).digits(digits).build().unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ModelContext::builder().q("1").build().is_err());
        assert!(ModelContext::builder().q("0").build().is_err());
        assert!(ModelContext::builder().alpha("-1").build().is_err());
        assert!(ModelContext::builder().c("0.5").build().is_err());
        assert!(ModelContext::builder().c("0.5").exploratory(true).build().is_ok());
        assert!(ModelContext::builder().digits(20).build().is_err());
        assert!(ModelContext::builder().digits(20).allow_low_precision(true).build().is_ok());
        assert!(ModelContext::builder().series_tol("1e-10").digits(40).build().is_err());
        assert!(ModelContext::builder().q("abc").build().is_err());
    }

    #[test]
    fn ratio_parameters_parse_at_full_precision() {
        let c = ModelContext::builder().c("-1/3").digits(60).build().unwrap();
        let third = Float::with_val(c.prec(), -1) / 3;
        assert_eq!(c.c(), &third);
    }

    #[test]
    fn lattice_cutoff_meets_tolerance() {
        let c = ctx("0.9", 50);
        let k = c.lattice_cutoff();
        assert!(c.q_powi(k as i64) < *c.series_tol());
        assert!(c.q_powi(k as i64 - 1) >= *c.series_tol());
        assert_eq!(c.lattice().nodes.len(), k + 2);
    }

    #[test]
    fn finite_pochhammer_values() {
        let c = ctx("0.5", 40);
        let half = c.real(0.5);
        assert_eq!(qpochhammer(&half, c.q(), 0), 1);
        assert_eq!(qpochhammer(&c.zero(), c.q(), 7), 1);
        assert_eq!(qpochhammer(&half, &half, 2), 0.375);
    }

    #[test]
    fn infinite_pochhammer_matches_long_product() {
        let c = ctx("0.5", 60);
        let a = c.real(0.75);
        let inf = qpochhammer_inf(&a, c.q(), &c).unwrap();
        let brute = qpochhammer(&a, c.q(), 2000);
        let rel = Float::with_val(c.prec(), &inf - &brute).abs() / &brute;
        assert!(rel < c.ten_pow_neg(55), "rel = {rel}");
        assert_eq!(qpochhammer_inf(&c.zero(), c.q(), &c).unwrap(), 1);
        assert!(qpochhammer_inf(&a, &c.one(), &c).is_err());
    }

    #[test]
    fn infinite_pochhammer_in_unit_interval() {
        let c = ctx("0.9", 40);
        let q4 = c.q_powi(4);
        let v = qpochhammer_inf(&q4, &q4, &c).unwrap();
        assert!(v > 0 && v < 1);
    }

    #[test]
    fn qintegral_closed_forms() {
        let c = ctx("0.5", 40);
        let tol = c.ten_pow_neg(38);
        let one = qintegral(&c, |_| c.one()).unwrap().value;
        assert!(Float::with_val(c.prec(), &one - 2u32).abs() < tol);
        let odd = qintegral(&c, |x| c.real(x)).unwrap().value;
        assert!(odd.is_zero());
        let sq = qintegral(&c, |x| Float::with_val(c.prec(), x * x)).unwrap();
        let expect = c.real(8) / 7u32;
        assert!(Float::with_val(c.prec(), &sq.value - &expect).abs() < tol);
        assert!(sq.tail_bound < *c.series_tol());
    }

    #[test]
    fn qintegral_reports_overflow() {
        let c = ctx("0.5", 40);
        let err = qintegral(&c, |x| if *x < 0.01 && *x > 0 { Float::with_val(64, rug::float::Special::Infinity) } else { c.one() });
        assert!(matches!(err, Err(Error::Overflow { .. })));
    }

    #[test]
    fn qdiff_monomials() {
        let c = ctx("0.7", 40);
        let x = c.real(1);
        let d = qdiff(&c, |_| c.real(3), &x, None).unwrap();
        assert!(d.is_zero());
        let d = qdiff(&c, |t| Float::with_val(c.prec(), t * t), &x, None).unwrap();
        let expect = Float::with_val(c.prec(), c.q() + 1u32);
        assert!(Float::with_val(c.prec(), d - expect).abs() < c.ten_pow_neg(38));
        let x = c.real(0.3);
        for k in 1..6i32 {
            let d = qdiff(&c, |t| Float::with_val(c.prec(), t.pow(k)), &x, None).unwrap();
            let expect = qnumber(&c, k as i64) * Float::with_val(c.prec(), (&x).pow(k - 1));
            assert!(Float::with_val(c.prec(), d - expect).abs() < c.ten_pow_neg(36));
        }
        assert!(matches!(qdiff(&c, |t| c.real(t), &c.zero(), None), Err(Error::DerivativeAtZero)));
        assert_eq!(qdiff(&c, |t| c.real(t), &c.zero(), Some(&c.one())).unwrap(), 1);
    }
}
