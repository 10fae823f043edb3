//! The two q-Freud weight families on the exponential lattice.
//!
//! ```text
//! quartic:  w(x) = |x|^a (q^4 x^4; q^4)_inf / (1 - q^4)^(a/4)
//! general:  w(x) = |x|^a (q^2 x^2; q^2)_inf (c q^2 x^2; q^2)_inf / (1 - q^4)^(a/4)
//! ```
//!
//! The quartic family is the `c = -1` member of the general one via
//! `(z; q)_inf (-z; q)_inf = (z^2; q^2)_inf`.

use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};
use crate::qcore::{qpochhammer_inf, ModelContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    /// `(q^4 x^4; q^4)_inf` form; ignores the context's `c`.
    Quartic,
    /// `(q^2 x^2; q^2)_inf (c q^2 x^2; q^2)_inf` form.
    General,
}

/// `(1 - q^4)^(alpha/4)`.
fn normalizer(ctx: &ModelContext) -> Float {
    let base = 1u32 - ctx.q_powi(4);
    let e = Float::with_val(ctx.prec(), ctx.alpha() / 4u32);
    base.pow(&e)
}

/// `|x|^alpha`, with the conventions at `x = 0`.
fn abs_power(ctx: &ModelContext, x: &Float) -> Result<Float> {
    if x.is_zero() {
        return if *ctx.alpha() > 0 {
            Ok(ctx.zero())
        } else if ctx.alpha().is_zero() {
            Ok(ctx.one())
        } else {
            Err(Error::Pole)
        };
    }
    let ax = Float::with_val(ctx.prec(), x.abs_ref());
    Ok(ax.pow(ctx.alpha()))
}

/// Weight of the general family at `x` (`|x| <= 1`).
pub fn weight(ctx: &ModelContext, x: &Float) -> Result<Float> {
    weight_of(WeightKind::General, ctx, x)
}

pub fn weight_of(kind: WeightKind, ctx: &ModelContext, x: &Float) -> Result<Float> {
    if Float::with_val(ctx.prec(), x.abs_ref()) > 1 {
        return Err(Error::InvalidParameter {
            name: "x",
            reason: "weight is only defined on [-1, 1]".into(),
        });
    }
    let power = abs_power(ctx, x)?;
    let x2 = Float::with_val(ctx.prec(), x * x);
    let product = match kind {
        WeightKind::Quartic => {
            let q4 = ctx.q_powi(4);
            let arg = Float::with_val(ctx.prec(), &x2 * &x2) * &q4;
            qpochhammer_inf(&arg, &q4, ctx)?
        }
        WeightKind::General => {
            let q2 = ctx.q_powi(2);
            let arg = x2 * &q2;
            let carg = Float::with_val(ctx.prec(), &arg * ctx.c());
            qpochhammer_inf(&arg, &q2, ctx)? * qpochhammer_inf(&carg, &q2, ctx)?
        }
    };
    Ok(power * product / normalizer(ctx))
}

/// Pearson residual at a lattice point.
#[derive(Debug, Clone)]
pub struct PearsonResidual {
    /// `w(x/q) - (1 - x^2)(1 - c x^2) q^(-alpha) w(x)`.
    pub residual: Float,
    /// `|residual| / w(x)`.
    pub relative: Float,
}

/// Lattice index `k` with `|x| = q^k`, or an error if `x` is off the lattice.
pub fn lattice_index(ctx: &ModelContext, x: &Float) -> Result<usize> {
    let not_on = |reason| Error::NotOnLattice {
        x: crate::qcore::to_decimal(x, 20),
        reason,
    };
    let ax = Float::with_val(ctx.prec(), x.abs_ref());
    if ax.is_zero() || ax > 1 {
        return Err(not_on("|x| must lie in (0, 1]"));
    }
    let k = Float::with_val(ctx.prec(), ax.ln_ref()) / Float::with_val(ctx.prec(), ctx.q().ln_ref());
    let k = k.round().to_f64();
    if !(0.0..=1e9).contains(&k) {
        return Err(not_on("exponent out of range"));
    }
    let k = k as usize;
    let node = ctx.q_powi(k as i64);
    let dev = Float::with_val(ctx.prec(), &ax - &node).abs() / &node;
    if dev > ctx.ten_pow_neg(ctx.digits() as i32 - 5) {
        return Err(not_on("not a power of q"));
    }
    Ok(k)
}

/// Evaluates both sides of the Pearson equation
/// `w(x/q) = (1 - x^2)(1 - c x^2) q^(-alpha) w(x)` at `x = +-q^k`, `k >= 1`.
pub fn pearson_residual(ctx: &ModelContext, x: &Float) -> Result<PearsonResidual> {
    let k = lattice_index(ctx, x)?;
    if k == 0 {
        return Err(Error::NotOnLattice {
            x: crate::qcore::to_decimal(x, 20),
            reason: "x/q leaves [-1, 1] at k = 0",
        });
    }
    let wx = weight(ctx, x)?;
    let shifted = Float::with_val(ctx.prec(), x / ctx.q());
    let lhs = weight(ctx, &shifted)?;
    let x2 = Float::with_val(ctx.prec(), x * x);
    let factor = Float::with_val(ctx.prec(), 1 - &x2)
        * Float::with_val(ctx.prec(), 1 - Float::with_val(ctx.prec(), ctx.c() * &x2))
        / ctx.q_alpha();
    let residual = lhs - factor * &wx;
    let relative = Float::with_val(ctx.prec(), residual.abs_ref()) / &wx;
    Ok(PearsonResidual { residual, relative })
}

/// Weight values at the positive lattice nodes `q^0 .. q^(K+1)`.
///
/// The q-Pochhammer factors at consecutive nodes are tails of one product,
/// so only the last node is evaluated as an infinite product and the others
/// are filled in by prepending one factor per node.
pub fn lattice_weights(ctx: &ModelContext, kind: WeightKind) -> Result<Vec<Float>> {
    let nodes = &ctx.lattice().nodes;
    let last = nodes.len() - 1;
    let q2 = ctx.q_powi(2);
    let q4 = ctx.q_powi(4);
    let norm = normalizer(ctx);

    // tails[k] = product part of w(q^k)
    let mut tails = vec![ctx.zero(); nodes.len()];
    let x2_last = Float::with_val(ctx.prec(), &nodes[last] * &nodes[last]);
    tails[last] = match kind {
        WeightKind::Quartic => {
            let arg = Float::with_val(ctx.prec(), &x2_last * &x2_last) * &q4;
            qpochhammer_inf(&arg, &q4, ctx)?
        }
        WeightKind::General => {
            let arg = x2_last * &q2;
            let carg = Float::with_val(ctx.prec(), &arg * ctx.c());
            qpochhammer_inf(&arg, &q2, ctx)? * qpochhammer_inf(&carg, &q2, ctx)?
        }
    };
    for k in (0..last).rev() {
        // q^(2k+2) = (q^(k+1))^2
        let t = Float::with_val(ctx.prec(), &nodes[k + 1] * &nodes[k + 1]);
        let factor = match kind {
            WeightKind::Quartic => 1 - Float::with_val(ctx.prec(), &t * &t),
            WeightKind::General => {
                let ct = Float::with_val(ctx.prec(), &t * ctx.c());
                (1 - t) * (1 - ct)
            }
        };
        tails[k] = factor * &tails[k + 1];
    }

    let mut power = ctx.one();
    let mut out = Vec::with_capacity(nodes.len());
    for (k, tail) in tails.into_iter().enumerate() {
        if k > 0 {
            power *= ctx.q_alpha();
        }
        out.push(tail * &power / &norm);
    }
    Ok(out)
}

/// Moment `m_k = int x^k w(x) d_q x` by direct lattice summation.
///
/// Each node contributes `x^k w(x) + (-x)^k w(-x)`; for odd `k` the two
/// terms cancel exactly and the result is exactly zero.
pub fn moment(ctx: &ModelContext, k: u32) -> Result<Float> {
    let w = lattice_weights(ctx, WeightKind::General)?;
    Ok(moment_from(ctx, &w, k))
}

pub(crate) fn moment_from(ctx: &ModelContext, w: &[Float], k: u32) -> Float {
    let lat = ctx.lattice();
    let mut sum = ctx.zero();
    for j in 0..lat.len() {
        let x = &lat.nodes[j];
        let plus = Float::with_val(ctx.prec(), x.pow(k)) * &w[j] * &lat.masses[j];
        let minus = if k % 2 == 0 {
            plus.clone()
        } else {
            Float::with_val(ctx.prec(), -&plus)
        };
        sum += plus + minus;
    }
    sum
}

/// `c = -1 + a sqrt(1 - q^4)`: the choice under which the scaled weight
/// tends to `|x|^alpha exp(-x^4 - 2 a x^2)` as `q -> 1`.
pub fn freud_shift_c(q: &Float, a: &Float) -> Float {
    let prec = q.prec();
    let q4 = Float::with_val(prec, q.pow(4u32));
    let s = Float::with_val(prec, 1 - q4).sqrt();
    s * a - 1u32
}

/// Scaled weight `w((1 - q^4)^(1/4) x)` and its Freud limit
/// `|x|^alpha exp(-x^4 - 2 a x^2)`, with `c` taken from [`freud_shift_c`].
pub fn freud_scaled_pair(ctx: &ModelContext, a: &Float, x: &Float) -> Result<(Float, Float)> {
    let scale = Float::with_val(ctx.prec(), 1 - ctx.q_powi(4)).root(4);
    let scaled_x = scale * x;
    let w = weight(ctx, &scaled_x)?;
    let x2 = Float::with_val(ctx.prec(), x * x);
    let expo = -Float::with_val(ctx.prec(), &x2 * &x2) - Float::with_val(ctx.prec(), &x2 * a) * 2u32;
    let limit = abs_power(ctx, x)? * expo.exp();
    Ok((w, limit))
}
