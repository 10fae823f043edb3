use rug::Float;

use super::{forward_step, Parity};
use crate::error::{Error, Result};
use crate::qcore::ModelContext;

/// Forward iterates started from `y_{n-1} = y_before`, `y_n = epsilon`,
/// together with the same run at `epsilon / 2`.
#[derive(Debug, Clone)]
pub struct SingularityTrace {
    pub n: usize,
    pub parity: Parity,
    pub epsilon: Float,
    pub y_before: Float,
    /// `y_n, y_{n+1}, ..., y_{n+steps}` at `epsilon`.
    pub values: Vec<Float>,
    /// The same at `epsilon / 2`.
    pub half_values: Vec<Float>,
    /// Fitted exponent `p` in `y_{n+k} ~ epsilon^p`, `k = 0..=steps`.
    pub orders: Vec<f64>,
    /// Leading-order prediction for `y_{n+4}`.
    pub predicted_y4: Float,
}

impl SingularityTrace {
    /// `|y_{n+4} / predicted - 1|`.
    pub fn y4_relative_error(&self) -> Float {
        let prec = self.epsilon.prec();
        let r = Float::with_val(prec, &self.values[4] / &self.predicted_y4);
        (r - 1u32).abs()
    }

    /// Rounded orders, e.g. `[1, -1, -1, 1, 0]` for a confined singularity.
    pub fn rounded_orders(&self) -> Vec<i32> {
        self.orders.iter().map(|p| p.round() as i32).collect()
    }
}

/// `y_{n-1}` for which the leading term of `y_{n+4}` vanishes.
pub fn critical_y_before(ctx: &ModelContext, n: usize) -> Result<Float> {
    let prec = ctx.prec();
    if ctx.c().is_zero() {
        return Err(Error::InvalidParameter {
            name: "c",
            reason: "must be nonzero".into(),
        });
    }
    let k = Float::with_val(prec, ctx.c() + 1u32) * Float::with_val(prec, 1u32 - ctx.q_powi(-2));
    let denom = match Parity::of(n) {
        Parity::Even => Float::with_val(prec, 1u32 - ctx.q_powi(n as i64)) * ctx.c(),
        Parity::Odd => {
            let t = Float::with_val(prec, ctx.q_powi(n as i64) * ctx.q_alpha());
            Float::with_val(prec, 1u32 - t) * ctx.c() / ctx.q_alpha()
        }
    };
    Ok(k / denom)
}

/// Leading-order `y_{n+4}` after `y_n -> 0`:
///
/// ```text
/// n even: q^(2+alpha) / (c (1 - q^(n+alpha+3))) [c y_{n-1} (1 - q^n)         - (1+c)(1 - q^-2)]
/// n odd:  q^(2-alpha) / (c (1 - q^(n+3)))       [c y_{n-1} (1 - q^(n+alpha)) - (1+c)(1 - q^-2) q^alpha]
/// ```
pub fn predicted_y4(ctx: &ModelContext, n: usize, y_before: &Float) -> Float {
    let prec = ctx.prec();
    let qa = ctx.q_alpha();
    let qn = ctx.q_powi(n as i64);
    let k = Float::with_val(prec, ctx.c() + 1u32) * Float::with_val(prec, 1u32 - ctx.q_powi(-2));
    let cy = Float::with_val(prec, ctx.c() * y_before);
    match Parity::of(n) {
        Parity::Even => {
            let pre = ctx.q_powi(2) * qa;
            let d = Float::with_val(prec, 1u32 - Float::with_val(prec, &qn * ctx.q_powi(3)) * qa) * ctx.c();
            let bracket = cy * Float::with_val(prec, 1u32 - &qn) - k;
            pre * bracket / d
        }
        Parity::Odd => {
            let pre = ctx.q_powi(2) / qa;
            let d = Float::with_val(prec, 1u32 - qn.clone() * ctx.q_powi(3)) * ctx.c();
            let bracket = cy * Float::with_val(prec, 1u32 - qn * qa) - k * qa;
            pre * bracket / d
        }
    }
}

fn run(ctx: &ModelContext, n: usize, y_before: &Float, eps: &Float, steps: usize) -> Result<Vec<Float>> {
    let mut prev = y_before.clone();
    let mut cur = eps.clone();
    let mut out = vec![cur.clone()];
    for k in 0..steps {
        let next = forward_step(ctx, n + k, &prev, &cur)?;
        prev = std::mem::replace(&mut cur, next);
        out.push(cur.clone());
    }
    Ok(out)
}

/// Follows a near-singularity `y_n = epsilon` for `steps` forward steps.
pub fn confinement_chain(
    ctx: &ModelContext,
    n: usize,
    parity: Parity,
    y_before: &Float,
    epsilon: &Float,
    steps: usize,
) -> Result<SingularityTrace> {
    let prec = ctx.prec();
    if !(*epsilon > 0 && *epsilon < 1e-5) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: "must lie in (0, 1e-5)".into(),
        });
    }
    if n < 2 || Parity::of(n) != parity {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("need n >= 2 with parity {parity:?}, got {n}"),
        });
    }
    if steps < 4 {
        return Err(Error::InvalidParameter {
            name: "steps",
            reason: "need at least 4 steps".into(),
        });
    }
    let half = Float::with_val(prec, epsilon / 2u32);
    let values = run(ctx, n, y_before, epsilon, steps)?;
    let half_values = run(ctx, n, y_before, &half, steps)?;
    let orders = values
        .iter()
        .zip(&half_values)
        .map(|(a, b)| {
            let r = Float::with_val(prec, a / b).abs();
            r.log2().to_f64()
        })
        .collect();
    Ok(SingularityTrace {
        n,
        parity: Parity::of(n),
        epsilon: epsilon.clone(),
        y_before: y_before.clone(),
        values,
        half_values,
        orders,
        predicted_y4: predicted_y4(ctx, n, y_before),
    })
}

/// Four forward steps past `y_n = epsilon`.
pub fn confinement_probe(ctx: &ModelContext, n: usize, parity: Parity, y_before: &Float, epsilon: &Float) -> Result<SingularityTrace> {
    confinement_chain(ctx, n, parity, y_before, epsilon, 4)
}
