use proptest::prelude::*;
use qfreud::fixedpoint::{apply_t, solve, RegionGuard, RowPair};
use qfreud::ortho_oracle::recurrence_coefficients;
use qfreud::painleve::{forward_run, from_uv, painleve_residual, to_uv, CoefficientSequence, Method, UvVariant};
use qfreud::qcore::{qdiff, qintegral, qpochhammer, qpochhammer_inf};
use qfreud::weights::{pearson_residual, weight};
use qfreud::ModelContext;
use rand::{Rng, SeedableRng};
use rug::ops::Pow;
use rug::Float;

fn ctx(q: f64, alpha: f64, c: f64, digits: u32) -> ModelContext {
    ModelContext::builder().q(q).alpha(alpha).c(c).digits(digits).build().unwrap()
}

fn rel_close(a: &Float, b: &Float, tol: &Float) -> bool {
    let scale = Float::with_val(a.prec(), b.abs_ref()).max(&Float::with_val(a.prec(), 1e-300));
    Float::with_val(a.prec(), a - b).abs() / scale < *tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pochhammer_recurrence(q in 0.05f64..0.95, a in -2.0f64..2.0, n in 0usize..40) {
        let c = ctx(q, 1.0, -1.0, 40);
        let a = c.real(a);
        let lhs = qpochhammer(&a, c.q(), n + 1);
        let rhs = qpochhammer(&a, c.q(), n) * (1u32 - Float::with_val(c.prec(), &a * c.q_powi(n as i64)));
        prop_assert!(Float::with_val(c.prec(), &lhs - &rhs).abs() < c.ten_pow_neg(35));
    }

    #[test]
    fn pochhammer_splits(q in 0.05f64..0.95, a in -1.0f64..1.0, m in 0usize..20, n in 0usize..20) {
        let c = ctx(q, 1.0, -1.0, 40);
        let a = c.real(a);
        let shifted = Float::with_val(c.prec(), &a * c.q_powi(m as i64));
        let lhs = qpochhammer(&a, c.q(), m + n);
        let rhs = qpochhammer(&a, c.q(), m) * qpochhammer(&shifted, c.q(), n);
        prop_assert!(Float::with_val(c.prec(), &lhs - &rhs).abs() < c.ten_pow_neg(35));
        // the finite product converges to the infinite one
        let inf = qpochhammer_inf(&a, c.q(), &c).unwrap();
        let shifted_inf = qpochhammer_inf(&shifted, c.q(), &c).unwrap();
        let split = qpochhammer(&a, c.q(), m) * shifted_inf;
        prop_assert!(Float::with_val(c.prec(), &inf - &split).abs() < c.ten_pow_neg(35));
    }

    #[test]
    fn qintegral_is_linear(q in 0.3f64..0.9, s in -3.0f64..3.0, t in -3.0f64..3.0) {
        let c = ctx(q, 0.0, -1.0, 40);
        let f = |x: &Float| Float::with_val(c.prec(), x * x) + 1u32;
        let g = |x: &Float| Float::with_val(c.prec(), x.pow(4u32)) - x;
        let (s, t) = (c.real(s), c.real(t));
        let combo = qintegral(&c, |x| f(x) * &s + g(x) * &t).unwrap().value;
        let parts = qintegral(&c, f).unwrap().value * &s + qintegral(&c, g).unwrap().value * &t;
        prop_assert!(Float::with_val(c.prec(), &combo - &parts).abs() < c.ten_pow_neg(35));
    }

    #[test]
    fn qintegral_telescopes(q in 0.3f64..0.9, c0 in -2.0f64..2.0, c1 in -2.0f64..2.0, c3 in -2.0f64..2.0) {
        let c = ctx(q, 0.0, -1.0, 40);
        let (c0, c1, c3) = (c.real(c0), c.real(c1), c.real(c3));
        let f = |x: &Float| Float::with_val(c.prec(), x.pow(3u32)) * &c3 + Float::with_val(c.prec(), x * &c1) + &c0;
        let integral = qintegral(&c, |x| qdiff(&c, f, x, Some(&c1)).unwrap()).unwrap().value;
        let lat = c.lattice();
        let last = &lat.nodes[lat.len()];
        let expect = f(&c.one()) - f(&-c.one()) - f(last) + f(&Float::with_val(c.prec(), -last));
        prop_assert!(Float::with_val(c.prec(), &integral - &expect).abs() < c.ten_pow_neg(35));
    }

    #[test]
    fn weight_is_even_and_pearson_holds(q in 0.3f64..0.95, alpha in -0.5f64..6.0, cc in -4.0f64..0.0, k in 1i64..30) {
        let c = ctx(q, alpha, cc, 50);
        let x = c.q_powi(k);
        let w = weight(&c, &x).unwrap();
        prop_assert!(w > 0);
        prop_assert_eq!(w.clone(), weight(&c, &Float::with_val(c.prec(), -&x)).unwrap());
        prop_assert!(pearson_residual(&c, &x).unwrap().relative < c.ten_pow_neg(40));
    }

    #[test]
    fn uv_round_trip(len in 3usize..20, seed in any::<u64>(), cc in -3.0f64..-0.1) {
        let c = ctx(0.7, 2.0, cc, 40);
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let y: Vec<Float> = (0..len).map(|i| if i == 0 { c.zero() } else { c.real(rng.gen_range(0.01..2.0)) }).collect();
        let seq = CoefficientSequence::new(y.clone(), Method::Oracle, c.prec());
        let rows = to_uv(&c, &seq, UvVariant::General).unwrap();
        prop_assert!(rows.v.len() == rows.u.len() || rows.v.len() + 1 == rows.u.len());
        let back = from_uv(&c, &rows).unwrap();
        prop_assert_eq!(back.len(), y.len());
        for (a, b) in back.iter().zip(&y) {
            prop_assert!(rel_close(a, b, &c.ten_pow_neg(38)));
        }
    }
}

/// Random rows in the guard box, and a termwise larger copy.
fn ordered_rows(ctx: &ModelContext, rng: &mut rand::rngs::StdRng, window: usize) -> (RowPair, RowPair) {
    let guard = RegionGuard::new(ctx, 0.0);
    let upper = guard.upper.to_f64();
    let mut lo = RowPair::zeros(ctx, window);
    let mut hi = RowPair::zeros(ctx, window);
    for row in 0..2 {
        for i in 0..window {
            let a = rng.gen_range(0.0..upper);
            let b = rng.gen_range(a..=upper);
            let (l, h) = if row == 0 { (&mut lo.xi[i], &mut hi.xi[i]) } else { (&mut lo.eta[i], &mut hi.eta[i]) };
            *l = ctx.real(a);
            *h = ctx.real(b);
        }
    }
    (lo, hi)
}

#[test]
fn operator_reverses_order() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(61);
    for cc in [-0.5, -1.0, -2.5] {
        let c = ctx(0.8, 2.0, cc, 40);
        for _ in 0..100 {
            let (lo, hi) = ordered_rows(&c, &mut rng, 8);
            let t_lo = apply_t(&c, &lo).unwrap();
            let t_hi = apply_t(&c, &hi).unwrap();
            for (a, b) in t_lo.xi.iter().zip(&t_hi.xi).chain(t_lo.eta.iter().zip(&t_hi.eta)) {
                assert!(*a >= *b, "c = {cc}: {a} < {b}");
                assert!(*b >= 0);
            }
        }
    }
}

#[test]
fn solution_is_a_fixed_point_and_ignores_the_buffer() {
    let c = ctx(0.9, 5.0, -1.0, 60);
    let tol = c.ten_pow_neg(30);
    let a = solve(&c, 40, 150, &tol).unwrap();
    let b = solve(&c, 40, 300, &tol).unwrap();
    for (x, y) in a.sequence.y.iter().zip(&b.sequence.y) {
        assert!(Float::with_val(c.prec(), x - y).abs() < tol);
    }
    let mut y = a.sequence.y.clone();
    y.push(c.zero());
    let rows = RowPair::from_y(&y);
    let t = apply_t(&c, &rows).unwrap();
    for (x, z) in t.xi.iter().zip(&rows.xi).chain(t.eta.iter().zip(&rows.eta)) {
        assert!(Float::with_val(c.prec(), x - z).abs() < Float::with_val(c.prec(), &tol * 10u32));
    }
}

#[test]
fn residuals_shrink_with_precision() {
    let mut last: Option<Float> = None;
    for digits in [60, 100, 140] {
        let c = ctx(0.8, 2.0, -0.5, digits);
        let a_sq = recurrence_coefficients(&c, 12).unwrap();
        let seq = CoefficientSequence::from_a_sq(&c, &a_sq, Method::Oracle);
        let r = painleve_residual(&c, &seq).unwrap().max_abs;
        if let Some(prev) = &last {
            assert!(r <= *prev, "digits {digits}");
        }
        last = Some(r);
    }
}

#[test]
fn forward_agreement_grows_with_precision() {
    let reference = {
        let c = ctx(0.9, 5.0, -1.0, 100);
        solve(&c, 80, 500, &c.ten_pow_neg(60)).unwrap().sequence
    };
    let mut prev = 0;
    for digits in [30, 60, 100] {
        let c = ctx(0.9, 5.0, -1.0, digits);
        let fw = forward_run(&c, 80).unwrap();
        let agree = (1..fw.len())
            .take_while(|&n| {
                let d = Float::with_val(c.prec(), &fw.y[n] - &reference.y[n]).abs();
                d < Float::with_val(c.prec(), &reference.y[n] * 1e-10)
            })
            .count();
        assert!(agree > prev, "digits {digits}: {agree} <= {prev}");
        prev = agree;
    }
}
