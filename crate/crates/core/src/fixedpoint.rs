//! Positive-root iteration for the even/odd rows `xi_n = y_{2n}`,
//! `eta_n = y_{2n+1}`.
//!
//! Written as quadratics, the recurrence at even and odd indices reads
//!
//! ```text
//! q^-alpha y xi_n^2 + x xi_n - q^alpha (1 - q^(2n)) = 0,  x, y from eta_n, eta_{n-1}
//!          y eta_n^2 + x eta_n - (1 - q^(2n+1+alpha)) = 0, x, y from xi_n, xi_{n+1}
//! ```
//!
//! and `T` replaces every entry by the positive root. Starting from the zero
//! rows, even iterates increase and odd iterates decrease, so consecutive
//! iterates bracket any fixed point.

use rug::Float;

use crate::error::{Error, Result};
use crate::painleve::{CoefficientSequence, Method};
use crate::qcore::{to_decimal, ModelContext};

/// Positive root of `p t^2 + x t - a = 0` given as `(-x + sqrt(x^2 + 4 a p)) / (2 p)`.
fn positive_root(ctx: &ModelContext, which: &'static str, n: usize, a: &Float, x: &Float, p: &Float) -> Result<Float> {
    let prec = ctx.prec();
    let thr = ctx.singular_threshold();
    if Float::with_val(prec, p.abs_ref()) < *thr {
        if Float::with_val(prec, x.abs_ref()) < *thr {
            return Err(Error::DegenerateArgument { which, n });
        }
        if *x < 0 {
            return Err(Error::DegenerateArgument { which, n });
        }
        return Ok(Float::with_val(prec, a / x));
    }
    let disc = Float::with_val(prec, x.square_ref()) + Float::with_val(prec, a * p) * 4u32;
    if disc < 0 {
        return Err(Error::NegativeDiscriminant {
            which,
            n,
            x: to_decimal(x, 20),
            y: to_decimal(p, 20),
        });
    }
    let s = disc.sqrt();
    if *x > 0 {
        Ok(Float::with_val(prec, a * 2u32) / (s + x))
    } else {
        Ok((s - x) / Float::with_val(prec, p * 2u32))
    }
}

/// `(-x + sqrt(x^2 + 4 (1 - q^(2n)) y)) / (2 q^-alpha y)`, or its `y -> 0`
/// limit `q^alpha (1 - q^(2n)) / x`.
pub fn f_n(ctx: &ModelContext, n: usize, x: &Float, y: &Float) -> Result<Float> {
    let a = 1u32 - ctx.q_powi(2 * n as i64);
    f_with(ctx, n, &a, x, y)
}

fn f_with(ctx: &ModelContext, n: usize, a: &Float, x: &Float, y: &Float) -> Result<Float> {
    let p = Float::with_val(ctx.prec(), y / ctx.q_alpha());
    let a = Float::with_val(ctx.prec(), a * ctx.q_alpha());
    positive_root(ctx, "f", n, &a, x, &p)
}

/// `(-x + sqrt(x^2 + 4 (1 - q^(2n+1+alpha)) y)) / (2 y)`, or its `y -> 0`
/// limit `(1 - q^(2n+1+alpha)) / x`.
pub fn g_n(ctx: &ModelContext, n: usize, x: &Float, y: &Float) -> Result<Float> {
    let e = Float::with_val(ctx.prec(), ctx.alpha() + (2 * n as u32 + 1));
    let a = 1u32 - ctx.q_pow(&e);
    positive_root(ctx, "g", n, &a, x, y)
}

/// Truncated double row. `xi` and `eta` always have length `window`.
#[derive(Debug, Clone)]
pub struct RowPair {
    pub xi: Vec<Float>,
    pub eta: Vec<Float>,
    pub iteration_count: usize,
}

impl RowPair {
    pub fn zeros(ctx: &ModelContext, window: usize) -> RowPair {
        RowPair {
            xi: vec![ctx.zero(); window],
            eta: vec![ctx.zero(); window],
            iteration_count: 0,
        }
    }

    /// Splits `y_0, y_1, ...` into even and odd rows, truncated to equal length.
    pub fn from_y(y: &[Float]) -> RowPair {
        let window = y.len() / 2;
        RowPair {
            xi: y.iter().step_by(2).take(window).cloned().collect(),
            eta: y.iter().skip(1).step_by(2).take(window).cloned().collect(),
            iteration_count: 0,
        }
    }

    pub fn window(&self) -> usize {
        self.xi.len()
    }

    /// `y_0 .. y_n_max`, interleaved.
    pub fn to_y(&self, n_max: usize) -> Vec<Float> {
        (0..=n_max)
            .map(|i| if i % 2 == 0 { self.xi[i / 2].clone() } else { self.eta[i / 2].clone() })
            .collect()
    }

    fn truncate(&mut self, window: usize) {
        self.xi.truncate(window);
        self.eta.truncate(window);
    }
}

/// How `T` closes the truncated rows at the far end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryPolicy {
    /// Drop the last index after every application; entries are exact.
    Shrinking,
    /// Keep the window and pad `xi` with `q^alpha`, `eta` with `1`.
    TailClamp,
}

/// `T` with its per-index constants precomputed for a given window.
pub struct Operator<'a> {
    ctx: &'a ModelContext,
    a_f: Vec<Float>,
    a_g: Vec<Float>,
    q2n: Vec<Float>,
    q2n1: Vec<Float>,
    q2n1_alpha: Vec<Float>,
    c_sq: Float,
    c_plus_one: Float,
}

impl<'a> Operator<'a> {
    pub fn new(ctx: &'a ModelContext, window: usize) -> Operator<'a> {
        let prec = ctx.prec();
        let q = ctx.q();
        let q2 = ctx.q_powi(2);
        let mut q2n = Vec::with_capacity(window);
        let mut p = ctx.one();
        for _ in 0..window {
            q2n.push(p.clone());
            p *= &q2;
        }
        let q2n1: Vec<Float> = q2n.iter().map(|v| Float::with_val(prec, v * q)).collect();
        let q2n1_alpha: Vec<Float> = q2n1.iter().map(|v| Float::with_val(prec, v / ctx.q_alpha())).collect();
        Operator {
            ctx,
            a_f: q2n.iter().map(|v| 1u32 - v.clone()).collect(),
            a_g: q2n1.iter().map(|v| 1u32 - Float::with_val(prec, v * ctx.q_alpha())).collect(),
            q2n,
            q2n1,
            q2n1_alpha,
            c_sq: Float::with_val(prec, ctx.c().square_ref()),
            c_plus_one: Float::with_val(prec, ctx.c() + 1u32),
        }
    }

    fn xi_entry(&self, n: usize, eta_n: &Float, eta_m: &Float) -> Result<Float> {
        let prec = self.ctx.prec();
        let c = self.ctx.c();
        let x = Float::with_val(prec, &self.c_plus_one - Float::with_val(prec, eta_n + eta_m) * &self.q2n[n] * c);
        let y = Float::with_val(prec, eta_n * eta_m) * &self.q2n[n] * &self.c_sq - c;
        f_with(self.ctx, n, &self.a_f[n], &x, &y)
    }

    fn eta_entry(&self, n: usize, xi_n: &Float, xi_p: &Float) -> Result<Float> {
        let prec = self.ctx.prec();
        let c = self.ctx.c();
        let x = Float::with_val(prec, &self.c_plus_one - Float::with_val(prec, xi_n + xi_p) * &self.q2n1[n] * c);
        let y = Float::with_val(prec, xi_n * xi_p) * &self.q2n1_alpha[n] * &self.c_sq - c;
        positive_root(self.ctx, "g", n, &self.a_g[n], &x, &y)
    }

    pub fn apply(&self, rows: &RowPair, policy: BoundaryPolicy) -> Result<RowPair> {
        let w = rows.window();
        if w < 2 {
            return Err(Error::ShortSequence { needed: 2, got: w });
        }
        if w > self.q2n.len() {
            return Err(Error::IndexRange {
                index: w,
                lo: 2,
                hi: self.q2n.len(),
            });
        }
        let mut xi = Vec::with_capacity(w);
        xi.push(self.ctx.zero());
        for n in 1..w {
            xi.push(self.xi_entry(n, &rows.eta[n], &rows.eta[n - 1])?);
        }
        let mut eta = Vec::with_capacity(w);
        for n in 0..w - 1 {
            eta.push(self.eta_entry(n, &rows.xi[n], &rows.xi[n + 1])?);
        }
        let mut out = RowPair {
            xi,
            eta,
            iteration_count: rows.iteration_count + 1,
        };
        match policy {
            BoundaryPolicy::Shrinking => out.truncate(w - 1),
            BoundaryPolicy::TailClamp => {
                let pad = self.ctx.q_alpha().clone();
                out.eta.push(self.eta_entry(w - 1, &rows.xi[w - 1], &pad)?);
            }
        }
        Ok(out)
    }
}

/// One application of `T` with the shrinking-window policy.
pub fn apply_t(ctx: &ModelContext, rows: &RowPair) -> Result<RowPair> {
    Operator::new(ctx, rows.window()).apply(rows, BoundaryPolicy::Shrinking)
}

pub fn apply_t_with(ctx: &ModelContext, rows: &RowPair, policy: BoundaryPolicy) -> Result<RowPair> {
    Operator::new(ctx, rows.window()).apply(rows, policy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Row {
    Xi,
    Eta,
}

/// Box `[0, upper]` on which `T` is checked to reverse order.
#[derive(Debug, Clone)]
pub struct RegionGuard {
    pub upper: Float,
}

impl RegionGuard {
    /// `upper = max(1, q^alpha, 1/|c|, q^alpha/|c|) (1 + margin)`, the `c`
    /// terms only for `c < 0`.
    pub fn new(ctx: &ModelContext, margin: f64) -> RegionGuard {
        let prec = ctx.prec();
        let mut upper = ctx.one().max(ctx.q_alpha());
        if *ctx.c() < 0 {
            let abs_c = Float::with_val(prec, ctx.c().abs_ref());
            upper = upper
                .max(&Float::with_val(prec, abs_c.recip_ref()))
                .max(&Float::with_val(prec, ctx.q_alpha() / &abs_c));
        }
        RegionGuard {
            upper: upper * (1.0 + margin),
        }
    }

    /// Entries outside `[0, upper]`.
    pub fn excursions(&self, rows: &RowPair) -> Vec<(Row, usize)> {
        let out_of = |v: &Float| *v < 0 || *v > self.upper;
        let mut out: Vec<(Row, usize)> = rows.xi.iter().enumerate().filter(|(_, v)| out_of(v)).map(|(i, _)| (Row::Xi, i)).collect();
        out.extend(rows.eta.iter().enumerate().filter(|(_, v)| out_of(v)).map(|(i, _)| (Row::Eta, i)));
        out
    }

    /// Clamps into the box and reports what was moved.
    pub fn clamp(&self, rows: &RowPair) -> (RowPair, Vec<(Row, usize)>) {
        let excursions = self.excursions(rows);
        let zero = Float::new(self.upper.prec());
        let fix = |v: &Float| v.clone().clamp(&zero, &self.upper);
        let clamped = RowPair {
            xi: rows.xi.iter().map(fix).collect(),
            eta: rows.eta.iter().map(fix).collect(),
            iteration_count: rows.iteration_count,
        };
        (clamped, excursions)
    }
}

/// A monotonicity or ordering failure between iterates.
#[derive(Debug, Clone)]
pub struct Violation {
    pub iteration: usize,
    pub row: Row,
    pub index: usize,
    /// Size of the failure (always positive).
    pub amount: Float,
}

#[derive(Debug, Clone)]
pub struct BracketReport {
    /// Latest even iterate `T^(2k)(0,0)` on the retained window.
    pub lower: RowPair,
    /// Latest odd iterate `T^(2k+1)(0,0)` on the retained window.
    pub upper: RowPair,
    /// Termwise `max(upper - lower)` after each application.
    pub width_trace: Vec<Float>,
    /// `eta_0 = y_1` of every iterate, starting with the zero rows.
    pub y1_trace: Vec<Float>,
    pub violations: Vec<Violation>,
    /// Iterates leaving the region guard box.
    pub region_excursions: usize,
    pub converged: bool,
    pub iterations: usize,
}

impl BracketReport {
    pub fn width(&self) -> Float {
        self.width_trace.last().cloned().unwrap_or_else(|| Float::with_val(64, f64::INFINITY))
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointSolution {
    /// Midpoint of the final bracket, `y_0 .. y_N`.
    pub sequence: CoefficientSequence,
    pub report: BracketReport,
}

fn retained(rows: &RowPair, window: usize) -> RowPair {
    let mut r = rows.clone();
    r.truncate(window);
    r
}

/// Records entries where `lo > hi + slack (1 + |hi|)`.
fn check_order(lo: &RowPair, hi: &RowPair, slack: &Float, iteration: usize, out: &mut Vec<Violation>) {
    for (row, a, b) in [(Row::Xi, &lo.xi, &hi.xi), (Row::Eta, &lo.eta, &hi.eta)] {
        for (i, (l, h)) in a.iter().zip(b.iter()).enumerate() {
            let diff = Float::with_val(l.prec(), l - h);
            let allowed = Float::with_val(l.prec(), h.abs_ref()) + 1u32;
            if diff > allowed * slack {
                out.push(Violation {
                    iteration,
                    row,
                    index: i,
                    amount: diff,
                });
            }
        }
    }
}

fn max_gap(lo: &RowPair, hi: &RowPair) -> Float {
    let prec = lo.xi.first().map(|v| v.prec()).unwrap_or(64);
    let mut w = Float::new(prec);
    for (a, b) in lo.xi.iter().zip(&hi.xi).chain(lo.eta.iter().zip(&hi.eta)) {
        let d = Float::with_val(prec, b - a).abs();
        if d > w {
            w = d;
        }
    }
    w
}

/// Iterates `T` from the zero rows until the termwise bracket width drops
/// below `tol` or `max_iter` applications are spent. The returned sequence
/// covers `y_0 .. y_N`.
pub fn solve(ctx: &ModelContext, n_max: usize, max_iter: usize, tol: &Float) -> Result<FixedPointSolution> {
    let keep = n_max / 2 + 1;
    let buffer = keep + max_iter + 1;
    let op = Operator::new(ctx, buffer);
    let guard = RegionGuard::new(ctx, 1e-6);
    let slack = ctx.ten_pow_neg(ctx.digits() as i32);

    let mut cur = RowPair::zeros(ctx, buffer);
    let mut lower = retained(&cur, keep);
    let mut upper: Option<RowPair> = None;
    let mut width_trace = Vec::new();
    let mut y1_trace = vec![cur.eta[0].clone()];
    let mut violations = Vec::new();
    let mut region_excursions = 0;
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=max_iter {
        cur = op.apply(&cur, BoundaryPolicy::Shrinking)?;
        iterations = k;
        let now = retained(&cur, keep);
        region_excursions += guard.excursions(&now).len();
        y1_trace.push(cur.eta[0].clone());
        if k % 2 == 1 {
            if let Some(prev) = &upper {
                check_order(&now, prev, &slack, k, &mut violations);
            }
            upper = Some(now);
        } else {
            check_order(&lower, &now, &slack, k, &mut violations);
            lower = now;
        }
        let hi = upper.as_ref().expect("odd iterate exists after the first step");
        check_order(&lower, hi, &slack, k, &mut violations);
        let width = max_gap(&lower, hi);
        let done = width < *tol;
        width_trace.push(width);
        if done {
            converged = true;
            break;
        }
    }

    let upper = upper.unwrap_or_else(|| lower.clone());
    let prec = ctx.prec();
    let mid = RowPair {
        xi: lower.xi.iter().zip(&upper.xi).map(|(a, b)| Float::with_val(prec, a + b) / 2u32).collect(),
        eta: lower.eta.iter().zip(&upper.eta).map(|(a, b)| Float::with_val(prec, a + b) / 2u32).collect(),
        iteration_count: iterations,
    };
    let sequence = CoefficientSequence::new(mid.to_y(n_max), Method::FixedPoint, prec);
    let report = BracketReport {
        lower,
        upper,
        width_trace,
        y1_trace,
        violations,
        region_excursions,
        converged,
        iterations,
    };
    let solution = FixedPointSolution { sequence, report };
    if converged {
        Ok(solution)
    } else {
        Err(Error::NonConvergence {
            iterations,
            width: to_decimal(&solution.report.width(), 6),
            solution: Box::new(solution),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ortho_oracle::recurrence_coefficients;
    use crate::painleve::{closed_form_c0, painleve_residual};

    fn ctx(q: &str, alpha: &str, c: &str, digits: u32) -> ModelContext {
        ModelContext::builder().q(q).alpha(alpha).c(c).digits(digits).build().unwrap()
    }

    fn close(a: &Float, b: &Float, tol: &Float) -> bool {
        Float::with_val(a.prec(), a - b).abs() < *tol
    }

    #[test]
    fn f_small_y_limit() {
        let c = ctx("0.7", "2", "-1", 100);
        let x = c.real(1.7);
        for n in [1usize, 4] {
            let a = 1u32 - c.q_powi(2 * n as i64);
            let expect = Float::with_val(c.prec(), &a * c.q_alpha()) / &x;
            let near = f_n(&c, n, &x, &c.ten_pow_neg(40)).unwrap();
            assert!(close(&near, &expect, &c.ten_pow_neg(35)));
            let at = f_n(&c, n, &x, &c.ten_pow_neg(55)).unwrap();
            assert!(close(&at, &expect, &c.ten_pow_neg(95)));
        }
    }

    #[test]
    fn f_zero_vanishes() {
        let c = ctx("0.7", "2", "-1", 60);
        for (x, y) in [(0.5, 2.0), (3.0, 0.1), (1e-3, 1e3)] {
            assert!(f_n(&c, 0, &c.real(x), &c.real(y)).unwrap().is_zero());
        }
    }

    #[test]
    fn roots_solve_their_quadratics() {
        let c = ctx("0.6", "1.5", "-0.5", 60);
        for (x, y) in [(0.7, 1.3), (-0.4, 2.0), (2.5, 0.01)] {
            let (x, y) = (c.real(x), c.real(y));
            let t = f_n(&c, 3, &x, &y).unwrap();
            let a = Float::with_val(c.prec(), 1u32 - c.q_powi(6)) * c.q_alpha();
            let res = Float::with_val(c.prec(), t.square_ref()) * &y / c.q_alpha() + Float::with_val(c.prec(), &x * &t) - a;
            assert!(res.abs() < c.ten_pow_neg(55));
            assert!(t > 0);
            let s = g_n(&c, 3, &x, &y).unwrap();
            let a = 1u32 - c.q_pow(&c.real(8.5));
            let res = Float::with_val(c.prec(), s.square_ref()) * &y + Float::with_val(c.prec(), &x * &s) - a;
            assert!(res.abs() < c.ten_pow_neg(55));
        }
    }

    #[test]
    fn root_errors() {
        let c = ctx("0.6", "1", "-1", 40);
        assert!(matches!(f_n(&c, 2, &c.zero(), &c.zero()), Err(Error::DegenerateArgument { n: 2, .. })));
        assert!(matches!(g_n(&c, 1, &c.real(0.1), &c.real(-5)), Err(Error::NegativeDiscriminant { n: 1, .. })));
    }

    #[test]
    fn first_application_at_c0_is_exact() {
        let c = ctx("0.7", "2", "0", 60);
        let t = apply_t(&c, &RowPair::zeros(&c, 12)).unwrap();
        assert_eq!(t.window(), 11);
        let exact = closed_form_c0(&c, 21);
        for (i, v) in t.to_y(21).iter().enumerate() {
            assert!(close(v, &exact.y[i], &c.ten_pow_neg(55)), "i = {i}");
        }
    }

    #[test]
    fn first_application_matches_root_formulas() {
        let c = ctx("0.9", "5", "-1", 50);
        let t = apply_t(&c, &RowPair::zeros(&c, 6)).unwrap();
        let x = Float::with_val(c.prec(), c.c() + 1u32);
        let y = Float::with_val(c.prec(), -c.c());
        assert!(t.xi[0].is_zero());
        for n in 1..5 {
            assert!(close(&t.xi[n], &f_n(&c, n, &x, &y).unwrap(), &c.ten_pow_neg(45)));
            assert!(close(&t.eta[n], &g_n(&c, n, &x, &y).unwrap(), &c.ten_pow_neg(45)));
        }
    }

    #[test]
    fn oracle_is_a_fixed_point() {
        for cc in ["-1", "-0.5", "-2.5"] {
            let c = ctx("0.8", "2", cc, 80);
            let a_sq = recurrence_coefficients(&c, 21).unwrap();
            let y = CoefficientSequence::from_a_sq(&c, &a_sq, Method::Oracle).y;
            let rows = RowPair::from_y(&y);
            let t = apply_t(&c, &rows).unwrap();
            for (a, b) in t.xi.iter().zip(&rows.xi).chain(t.eta.iter().zip(&rows.eta)) {
                assert!(close(a, b, &c.ten_pow_neg(40)), "c = {cc}");
            }
        }
    }

    #[test]
    fn tail_clamp_keeps_window() {
        let c = ctx("0.8", "2", "-1", 40);
        let t = apply_t_with(&c, &RowPair::zeros(&c, 8), BoundaryPolicy::TailClamp).unwrap();
        assert_eq!((t.xi.len(), t.eta.len()), (8, 8));
        let s = apply_t(&c, &RowPair::zeros(&c, 8)).unwrap();
        assert!(close(&t.eta[3], &s.eta[3], &c.ten_pow_neg(38)));
    }

    #[test]
    fn c0_converges_in_two_steps() {
        let c = ctx("0.7", "2", "0", 60);
        let sol = solve(&c, 30, 10, &c.ten_pow_neg(40)).unwrap();
        assert!(sol.report.iterations <= 2);
        assert!(sol.report.violations.is_empty());
        let exact = closed_form_c0(&c, 30);
        for (a, b) in sol.sequence.y.iter().zip(&exact.y) {
            assert!(close(a, b, &c.ten_pow_neg(50)));
        }
    }

    #[test]
    fn bracket_closes_and_solves_recurrence() {
        let c = ctx("0.5", "2", "-1/3", 60);
        let tol = c.ten_pow_neg(40);
        let sol = solve(&c, 20, 400, &tol).unwrap();
        let r = &sol.report;
        assert!(r.converged && r.violations.is_empty());
        assert!(r.width_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(painleve_residual(&c, &sol.sequence).unwrap().below(&c.ten_pow_neg(35)));
        assert_eq!(sol.sequence.first_nonpositive, None);
    }

    #[test]
    fn nonconvergence_keeps_report() {
        let c = ctx("0.9", "5", "-1", 40);
        match solve(&c, 10, 3, &c.ten_pow_neg(30)) {
            Err(Error::NonConvergence { iterations, solution, .. }) => {
                assert_eq!(iterations, 3);
                assert_eq!(solution.report.width_trace.len(), 3);
                assert_eq!(solution.sequence.len(), 11);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn region_guard_bounds() {
        let c = ctx("0.5", "1", "-0.25", 40);
        let g = RegionGuard::new(&c, 0.0);
        assert!(close(&g.upper, &c.real(4), &c.ten_pow_neg(35)));
        let mut rows = RowPair::zeros(&c, 3);
        rows.eta[1] = c.real(5);
        rows.xi[2] = c.real(-1);
        let (clamped, moved) = g.clamp(&rows);
        assert_eq!(moved.len(), 2);
        assert!(g.excursions(&clamped).is_empty());
    }
}
