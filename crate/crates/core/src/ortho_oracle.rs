//! Ground-truth recurrence coefficients by discretized Stieltjes
//! orthogonalization on the q-lattice.
//!
//! Polynomials are held as values at the positive nodes `q^0 .. q^(K+1)`;
//! values at `-q^k` follow from the parity `p_n(-x) = (-1)^n p_n(x)`, which
//! is therefore exact. Leading and subleading coefficients are recovered
//! from node values only where they are checked (`leading_coeff_check`).

use rug::Float;

use crate::error::{Error, Result};
use crate::qcore::ModelContext;
use crate::report::ResidualReport;
use crate::weights::{lattice_weights, WeightKind};

/// Orthonormal polynomials `p_0 .. p_N` on the truncated lattice.
#[derive(Debug, Clone)]
pub struct LatticeTable {
    pub n_max: usize,
    /// `values[n][k] = p_n(q^k)` for `k = 0 ..= K+1`.
    pub values: Vec<Vec<Float>>,
    /// `(1 - q) q^k w(q^k)` for `k = 0 ..= K`.
    pub masses: Vec<Float>,
    /// `a_sq[n] = a_n^2`, with `a_sq[0] = 0`.
    pub a_sq: Vec<Float>,
    /// Leading coefficients from the construction rule `gamma_n = gamma_{n-1} / a_n`.
    pub gamma: Vec<Float>,
    /// Coefficients of `x^(n-2)` propagated through the recurrence.
    pub delta: Vec<Float>,
    /// Whether `digits >= 30 + 2N` held when the table was built.
    pub within_budget: bool,
}

impl LatticeTable {
    /// `p_n` at `+q^k` or `-q^k`.
    pub fn value(&self, n: usize, k: usize, negative: bool) -> Float {
        let v = self.values[n][k].clone();
        if negative && n % 2 == 1 {
            -v
        } else {
            v
        }
    }

    pub fn a(&self, n: usize) -> Float {
        self.a_sq[n].clone().sqrt()
    }

    /// `sum_{j=1}^{m} a_j^2` (zero for `m <= 0`).
    pub fn partial_sum(&self, m: isize) -> Float {
        let prec = self.a_sq[0].prec();
        let mut s = Float::new(prec);
        for j in 1..=m.max(0) as usize {
            s += &self.a_sq[j];
        }
        s
    }

    /// q-integral of `f g w` where `f`, `g` are given at the positive nodes
    /// with parities `pf`, `pg` (0 even, 1 odd).
    fn inner(&self, f: &[Float], pf: usize, g: &[Float], pg: usize) -> Float {
        let prec = self.a_sq[0].prec();
        let mut sum = Float::new(prec);
        let flip = (pf + pg) % 2 == 1;
        for (k, m) in self.masses.iter().enumerate() {
            let plus = Float::with_val(prec, &f[k] * &g[k]) * m;
            let minus = if flip {
                Float::with_val(prec, -&plus)
            } else {
                plus.clone()
            };
            sum += plus + minus;
        }
        sum
    }
}

/// Minimum working precision suggested for a table of degree `n`.
pub fn digits_budget(n: usize) -> u32 {
    30 + 2 * n as u32
}

struct Stieltjes<'a> {
    ctx: &'a ModelContext,
    masses: Vec<Float>,
    prev: Vec<Float>,
    cur: Vec<Float>,
    a_cur: Float,
    n: usize,
}

impl<'a> Stieltjes<'a> {
    fn new(ctx: &'a ModelContext) -> Result<(Stieltjes<'a>, Float)> {
        let w = lattice_weights(ctx, WeightKind::General)?;
        let lat = ctx.lattice();
        let masses: Vec<Float> = lat
            .masses
            .iter()
            .zip(&w)
            .map(|(m, w)| Float::with_val(ctx.prec(), m * w))
            .collect();
        let mut m0 = ctx.zero();
        for m in &masses {
            m0 += m;
        }
        m0 *= 2u32;
        if !(m0 > 0) {
            return Err(Error::PrecisionExhausted {
                index: 0,
                value: crate::qcore::to_decimal(&m0, 10),
            });
        }
        let p0 = m0.sqrt().recip();
        let cur = vec![p0.clone(); lat.nodes.len()];
        let prev = vec![ctx.zero(); lat.nodes.len()];
        Ok((
            Stieltjes {
                ctx,
                masses,
                prev,
                cur,
                a_cur: ctx.zero(),
                n: 0,
            },
            p0,
        ))
    }

    /// Advances from `p_n` to `p_{n+1}` and returns `a_{n+1}^2`.
    fn step(&mut self) -> Result<Float> {
        let prec = self.ctx.prec();
        let nodes = &self.ctx.lattice().nodes;
        let r: Vec<Float> = nodes
            .iter()
            .zip(self.cur.iter().zip(&self.prev))
            .map(|(x, (c, p))| Float::with_val(prec, x * c) - Float::with_val(prec, &self.a_cur * p))
            .collect();
        let mut norm = Float::new(prec);
        for (m, v) in self.masses.iter().zip(&r) {
            norm += Float::with_val(prec, v.square_ref()) * m;
        }
        norm *= 2u32;
        let index = self.n + 1;
        if !(norm > 0) {
            return Err(Error::PrecisionExhausted {
                index,
                value: crate::qcore::to_decimal(&norm, 10),
            });
        }
        let a = Float::with_val(prec, norm.sqrt_ref());
        let next: Vec<Float> = r.into_iter().map(|v| v / &a).collect();
        self.prev = std::mem::replace(&mut self.cur, next);
        self.a_cur = a;
        self.n = index;
        Ok(norm)
    }
}

/// Builds `p_0 .. p_N` with `b_n = 0`:
/// `p_0 = 1/sqrt(m_0)`, `r = x p_n - a_n p_{n-1}`, `a_{n+1} = ||r||`,
/// `p_{n+1} = r / a_{n+1}`.
pub fn stieltjes(ctx: &ModelContext, n_max: usize) -> Result<LatticeTable> {
    let (mut run, p0) = Stieltjes::new(ctx)?;
    let mut values = vec![run.cur.clone()];
    let mut a_sq = vec![ctx.zero()];
    let mut gamma = vec![p0];
    let mut delta = vec![ctx.zero()];
    for n in 0..n_max {
        let a2 = run.step()?;
        let a_next = run.a_cur.clone();
        let g = Float::with_val(ctx.prec(), &gamma[n] / &a_next);
        // x^(n-1) coefficient of x p_n = a_{n+1} p_{n+1} + a_n p_{n-1}
        let d = if n == 0 {
            ctx.zero()
        } else {
            let a_n = Float::with_val(ctx.prec(), a_sq[n].sqrt_ref());
            (Float::with_val(ctx.prec(), &delta[n] - &a_n * &gamma[n - 1])) / &a_next
        };
        values.push(run.cur.clone());
        a_sq.push(a2);
        gamma.push(g);
        delta.push(d);
    }
    Ok(LatticeTable {
        n_max,
        values,
        masses: run.masses,
        a_sq,
        gamma,
        delta,
        within_budget: ctx.digits() >= digits_budget(n_max),
    })
}

/// `a_1^2 .. a_N^2` (index 0 holds 0) without keeping the polynomial
/// values. Memory stays at two lattice rows regardless of `N`.
pub fn recurrence_coefficients(ctx: &ModelContext, n_max: usize) -> Result<Vec<Float>> {
    let (mut run, _) = Stieltjes::new(ctx)?;
    let mut a_sq = Vec::with_capacity(n_max + 1);
    a_sq.push(ctx.zero());
    for _ in 0..n_max {
        a_sq.push(run.step()?);
    }
    Ok(a_sq)
}

/// `|int p_i p_j w - delta_ij|` for `0 <= i <= j <= N`; the residual index
/// is `i * (N + 1) + j`.
pub fn gram_residual(table: &LatticeTable) -> ResidualReport {
    let n = table.n_max;
    let mut out = Vec::new();
    for i in 0..=n {
        for j in i..=n {
            let mut g = table.inner(&table.values[i], i % 2, &table.values[j], j % 2);
            if i == j {
                g -= 1u32;
            }
            out.push((i * (n + 1) + j, g));
        }
    }
    ResidualReport::new("gram", out)
}

/// `b_n = int x p_n^2 w` for `n = 0..=N`.
pub fn bn_residual(ctx: &ModelContext, table: &LatticeTable) -> ResidualReport {
    bn_with_modifier(ctx, table, |_| ctx.one())
}

/// `b_n` computed against the modified weight `w(x) m(x)`. With a non-even
/// `m` this no longer vanishes, which makes it a negative control.
pub fn bn_with_modifier<F>(ctx: &ModelContext, table: &LatticeTable, modifier: F) -> ResidualReport
where
    F: Fn(&Float) -> Float,
{
    let nodes = &ctx.lattice().nodes;
    let prec = ctx.prec();
    let mut out = Vec::new();
    for n in 0..=table.n_max {
        let mut b = Float::new(prec);
        for (k, m) in table.masses.iter().enumerate() {
            for negative in [false, true] {
                let x = if negative {
                    Float::with_val(prec, -&nodes[k])
                } else {
                    nodes[k].clone()
                };
                let p = table.value(n, k, negative);
                let term = Float::with_val(prec, p.square_ref()) * &x * modifier(&x) * m;
                b += term;
            }
        }
        out.push((n, b));
    }
    ResidualReport::new("b_n", out)
}

/// Leading coefficients recovered from node values alone.
#[derive(Debug, Clone)]
pub struct RecoveredCoefficients {
    pub gamma: Vec<Float>,
    pub delta: Vec<Float>,
}

/// Recovers `gamma_n` and `delta_n` by Newton interpolation of `p_n` (or
/// `p_n / x` for odd `n`) as a polynomial in `t = x^2` on the largest
/// lattice nodes.
pub fn recover_coefficients(ctx: &ModelContext, table: &LatticeTable) -> Result<RecoveredCoefficients> {
    let nodes = &ctx.lattice().nodes;
    let available = table.masses.len();
    if table.n_max + 1 > available {
        return Err(Error::Interpolation {
            needed: table.n_max + 1,
            available,
        });
    }
    let prec = ctx.prec();
    let mut gamma = Vec::with_capacity(table.n_max + 1);
    let mut delta = Vec::with_capacity(table.n_max + 1);
    for n in 0..=table.n_max {
        let m = n / 2;
        let t: Vec<Float> = nodes[..=m].iter().map(|x| Float::with_val(prec, x.square_ref())).collect();
        let mut c: Vec<Float> = (0..=m)
            .map(|k| {
                let v = table.values[n][k].clone();
                if n % 2 == 1 {
                    v / &nodes[k]
                } else {
                    v
                }
            })
            .collect();
        for level in 1..=m {
            for i in (level..=m).rev() {
                let num = Float::with_val(prec, &c[i] - &c[i - 1]);
                let den = Float::with_val(prec, &t[i] - &t[i - level]);
                c[i] = num / den;
            }
        }
        gamma.push(c[m].clone());
        if m == 0 {
            delta.push(Float::new(prec));
        } else {
            let mut s = Float::new(prec);
            for tj in &t[..m] {
                s += tj;
            }
            delta.push(Float::with_val(prec, &c[m - 1] - &c[m] * &s));
        }
    }
    Ok(RecoveredCoefficients { gamma, delta })
}

/// Checks `gamma_{n-1} / gamma_n = a_n` and `delta_n / gamma_n =
/// -sum_{j<n} a_j^2` with coefficients recovered independently of the
/// recurrence. Returns the two residual families.
pub fn leading_coeff_check(ctx: &ModelContext, table: &LatticeTable) -> Result<(ResidualReport, ResidualReport)> {
    let rec = recover_coefficients(ctx, table)?;
    let prec = ctx.prec();
    let mut ratio = Vec::new();
    let mut sub = Vec::new();
    for n in 1..=table.n_max {
        let r = Float::with_val(prec, &rec.gamma[n - 1] / &rec.gamma[n]) - table.a(n);
        ratio.push((n, r));
        let s = Float::with_val(prec, &rec.delta[n] / &rec.gamma[n]) + table.partial_sum(n as isize - 1);
        sub.push((n, s));
    }
    Ok((
        ResidualReport::new("lemma31_ratio", ratio),
        ResidualReport::new("lemma31_subleading", sub),
    ))
}

fn check_degree(table: &LatticeTable, n: usize, lo: usize, hi: usize) -> Result<()> {
    if n < lo || n > hi {
        return Err(Error::IndexRange { index: n, lo, hi });
    }
    if hi > table.n_max {
        return Err(Error::IndexRange {
            index: n,
            lo,
            hi: table.n_max,
        });
    }
    Ok(())
}

/// Fourier coefficients `a_{j,n} = int D_q p_n p_j w`, `j = 0..n-1`.
pub fn fourier_dq_coeffs(ctx: &ModelContext, table: &LatticeTable, n: usize) -> Result<Vec<Float>> {
    check_degree(table, n, 0, table.n_max)?;
    let prec = ctx.prec();
    let lat = ctx.lattice();
    let q_minus_1 = Float::with_val(prec, ctx.q() - 1u32);
    // D_q p_n at the positive nodes; D_q p_n has parity n+1
    let dq: Vec<Float> = (0..table.masses.len())
        .map(|k| {
            let diff = Float::with_val(prec, &table.values[n][k + 1] - &table.values[n][k]);
            diff / Float::with_val(prec, &lat.nodes[k] * &q_minus_1)
        })
        .collect();
    Ok((0..n)
        .map(|j| table.inner(&dq, (n + 1) % 2, &table.values[j], j % 2))
        .collect())
}

/// `a_{j,n}` for `j < n - 3`; these vanish for even `n`.
pub fn fourier_tail(ctx: &ModelContext, table: &LatticeTable, n: usize) -> Result<ResidualReport> {
    let coeffs = fourier_dq_coeffs(ctx, table, n)?;
    let tail = coeffs.into_iter().enumerate().take(n.saturating_sub(3)).collect();
    Ok(ResidualReport::new(format!("fourier_tail_n{n}"), tail))
}

/// Structure-relation coefficients `(A_n, B_n)` for general `c`:
///
/// ```text
/// A_n = -c a_n a_{n-1} a_{n-2} / q^(alpha+n-3)                   [- (1-q^-alpha) a_{n-1} / (a_n a_{n-2}), n odd]
/// B_n =  a_n / q^(alpha+n-1) (c + 1 - c S_{n+1} + c q^2 S_{n-2})  [+ (1-q^-alpha) / a_n,                  n odd]
/// ```
///
/// with `S_m = sum_{j<=m} a_j^2`.
pub fn structure_coeffs(ctx: &ModelContext, table: &LatticeTable, n: usize) -> Result<(Float, Float)> {
    check_degree(table, n, 3, table.n_max.saturating_sub(1))?;
    let prec = ctx.prec();
    let c = ctx.c();
    let alpha = ctx.alpha();
    let (a_n, a_n1, a_n2) = (table.a(n), table.a(n - 1), table.a(n - 2));
    let q_a3 = ctx.q_pow(&Float::with_val(prec, alpha + (n as i64 - 3)));
    let q_a1 = ctx.q_pow(&Float::with_val(prec, alpha + (n as i64 - 1)));
    let q2 = ctx.q_powi(2);
    let mut big_a = -Float::with_val(prec, c * &a_n) * &a_n1 * &a_n2 / &q_a3;
    let bracket = Float::with_val(prec, c + 1u32) - Float::with_val(prec, c * table.partial_sum(n as isize + 1))
        + Float::with_val(prec, c * &q2) * table.partial_sum(n as isize - 2);
    let mut big_b = Float::with_val(prec, &a_n / &q_a1) * bracket;
    if n % 2 == 1 {
        let shift = 1u32 - Float::with_val(prec, ctx.q_alpha().recip_ref());
        big_a -= Float::with_val(prec, &shift * &a_n1) / (Float::with_val(prec, &a_n * &a_n2));
        big_b += shift / &a_n;
    }
    Ok((big_a, big_b))
}

/// The `c = -1` structure coefficients written as in the quartic case:
/// `A_n = a_n a_{n-1} a_{n-2} / q^(alpha+n-3)`,
/// `B_n = a_n / q^(alpha+n-1) (S_{n+1} - q^2 S_{n-2})`, plus the odd-`n`
/// corrections.
pub fn structure_coeffs_quartic(ctx: &ModelContext, table: &LatticeTable, n: usize) -> Result<(Float, Float)> {
    check_degree(table, n, 3, table.n_max.saturating_sub(1))?;
    let prec = ctx.prec();
    let alpha = ctx.alpha();
    let (a_n, a_n1, a_n2) = (table.a(n), table.a(n - 1), table.a(n - 2));
    let q_a3 = ctx.q_pow(&Float::with_val(prec, alpha + (n as i64 - 3)));
    let q_a1 = ctx.q_pow(&Float::with_val(prec, alpha + (n as i64 - 1)));
    let q2 = ctx.q_powi(2);
    let mut big_a = Float::with_val(prec, &a_n * &a_n1) * &a_n2 / &q_a3;
    let sums = table.partial_sum(n as isize + 1) - q2 * table.partial_sum(n as isize - 2);
    let mut big_b = Float::with_val(prec, &a_n / &q_a1) * sums;
    if n % 2 == 1 {
        let shift = 1u32 - Float::with_val(prec, ctx.q_alpha().recip_ref());
        big_a -= Float::with_val(prec, &shift * &a_n1) / (Float::with_val(prec, &a_n * &a_n2));
        big_b += shift / &a_n;
    }
    Ok((big_a, big_b))
}

/// Compares `a_{n-1,n}` with `B_n/(1-q)` and `a_{n-3,n}` with `A_n/(1-q)`.
/// Residual indices are the Fourier index `j`.
pub fn structure_residuals(ctx: &ModelContext, table: &LatticeTable, n: usize) -> Result<ResidualReport> {
    let (big_a, big_b) = structure_coeffs(ctx, table, n)?;
    let coeffs = fourier_dq_coeffs(ctx, table, n)?;
    let one_minus_q = Float::with_val(ctx.prec(), 1u32 - ctx.q());
    let rb = Float::with_val(ctx.prec(), &coeffs[n - 1] - big_b / &one_minus_q);
    let ra = Float::with_val(ctx.prec(), &coeffs[n - 3] - big_a / &one_minus_q);
    Ok(ResidualReport::new(format!("structure_n{n}"), vec![(n - 1, rb), (n - 3, ra)]))
}

/// Both sides of the coefficient comparisons of `x^(n-1)` and `x^(n-3)` in
/// the structure relation (general `c`; at `c = -1` these are exactly the
/// quartic-case identities):
///
/// ```text
/// x^(n-1):  a_n^2 (c+1 - c(a_{n+1}^2 + a_n^2 + a_{n-1}^2 + (1-q^2) S_{n-2})) = (1-q^n) q^(alpha+n-1)          n even
///                                                                          = (q^-alpha - q^n) q^(alpha+n-1)   n odd
/// x^(n-3):  -c a_n^2 a_{n-1}^2 a_{n-2}^2 = q^(alpha+n-3) (q^(n-2)(1-q^2) S_{n-2} - (1-q^(n-2)) a_{n-1}^2)      n even
///           -c q^(3-alpha-n) a_n^2 a_{n-1}^2 a_{n-2}^2 = q^(n-2)(1-q^2) S_{n-2} - (q^-alpha - q^(n-2)) a_{n-1}^2  n odd
/// ```
///
/// Residual index is the compared power (`n-1` or `n-3`); the `x^(n-3)`
/// identity is skipped for `n = 2`.
pub fn intermediate_residuals(ctx: &ModelContext, table: &LatticeTable, n: usize) -> Result<ResidualReport> {
    check_degree(table, n, 2, table.n_max.saturating_sub(1))?;
    let prec = ctx.prec();
    let c = ctx.c();
    let alpha = ctx.alpha();
    let a2 = &table.a_sq;
    let s_n2 = table.partial_sum(n as isize - 2);
    let one_minus_q2 = 1u32 - ctx.q_powi(2);
    let q_inv_alpha = Float::with_val(prec, ctx.q_alpha().recip_ref());
    let even = n % 2 == 0;

    let mut out = Vec::new();
    let inner = Float::with_val(prec, &a2[n + 1] + &a2[n]) + &a2[n - 1] + Float::with_val(prec, &one_minus_q2 * &s_n2);
    let lhs = Float::with_val(prec, &a2[n]) * (Float::with_val(prec, c + 1u32) - Float::with_val(prec, c * &inner));
    let q_a1 = ctx.q_pow(&Float::with_val(prec, alpha + (n as i64 - 1)));
    let rhs = if even {
        (1u32 - ctx.q_powi(n as i64)) * &q_a1
    } else {
        (Float::with_val(prec, &q_inv_alpha - ctx.q_powi(n as i64))) * &q_a1
    };
    out.push((n - 1, lhs - rhs));

    if n >= 3 {
        let prod = Float::with_val(prec, &a2[n] * &a2[n - 1]) * &a2[n - 2];
        let q_n2 = ctx.q_powi(n as i64 - 2);
        let sum_term = Float::with_val(prec, &q_n2 * &one_minus_q2) * &s_n2;
        let (lhs, rhs) = if even {
            let q_a3 = ctx.q_pow(&Float::with_val(prec, alpha + (n as i64 - 3)));
            let lhs = -Float::with_val(prec, c * &prod);
            let rhs = (sum_term - (1u32 - q_n2) * &a2[n - 1]) * q_a3;
            (lhs, rhs)
        } else {
            let scale = ctx.q_pow(&(Float::with_val(prec, 3 - n as i64) - alpha));
            let lhs = -Float::with_val(prec, c * &prod) * scale;
            let rhs = sum_term - (q_inv_alpha - q_n2) * &a2[n - 1];
            (lhs, rhs)
        };
        out.push((n - 3, lhs - rhs));
    }
    Ok(ResidualReport::new(format!("intermediate_n{n}"), out))
}
