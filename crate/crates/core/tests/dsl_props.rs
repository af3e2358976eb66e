//! Property tests for the expression language.

use gridopt::dsl::{diff_theta, parse_expr, Expr, Func};
use proptest::prelude::*;

const K: usize = 3;
const M: usize = 3;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0.0f64..1e4).prop_map(Expr::Num),
        (0u32..1000).prop_map(|v| Expr::Num(v as f64)),
        (1e-9f64..1e-3).prop_map(Expr::Num),
        (0..K).prop_map(Expr::X),
        (0..M).prop_map(Expr::Theta),
    ]
}

/// Arbitrary trees of depth at most 6 with non-negative literals.
fn tree() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 64, 2, |inner| {
        let b = |e: Expr| Box::new(e);
        prop_oneof![
            inner.clone().prop_map(move |a| Expr::Neg(b(a))),
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| Expr::Add(b(a), b(c))),
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| Expr::Sub(b(a), b(c))),
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| Expr::Mul(b(a), b(c))),
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| Expr::Div(b(a), b(c))),
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| Expr::Pow(b(a), b(c))),
            (prop::sample::select(Func::ALL.to_vec()), inner).prop_map(move |(f, a)| Expr::Call(f, b(a))),
        ]
    })
}

/// Smooth trees: no division, powers, logs or square roots, so no domain boundaries.
fn smooth_tree() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-2.0f64..2.0).prop_map(|v| Expr::Num(v.abs())),
        (0..K).prop_map(Expr::X),
        (0..M).prop_map(Expr::Theta),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        let b = |e: Expr| Box::new(e);
        prop_oneof![
            inner.clone().prop_map(move |a| Expr::Neg(b(a))),
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| Expr::Add(b(a), b(c))),
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| Expr::Sub(b(a), b(c))),
            (inner.clone(), inner.clone()).prop_map(move |(a, c)| Expr::Mul(b(a), b(c))),
            inner.clone().prop_map(move |a| Expr::Pow(b(a), b(Expr::Num(2.0)))),
            inner.clone().prop_map(move |a| Expr::Call(Func::Exp, b(Expr::Mul(b(Expr::Num(0.3)), b(a))))),
            inner.clone().prop_map(move |a| Expr::Call(Func::NormCdf, b(a))),
            inner.prop_map(move |a| Expr::Call(Func::NormPdf, b(a))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn print_parse_fixpoint(e in tree()) {
        prop_assume!(e.depth() <= 6);
        let printed = e.to_string();
        let back = parse_expr(&printed, K, M).unwrap();
        prop_assert_eq!(&back, &e);
        prop_assert_eq!(back.to_string(), printed);
    }

    #[test]
    fn derivative_matches_central_differences(
        e in smooth_tree(),
        x in prop::array::uniform3(-1.0f64..1.0),
        theta in prop::array::uniform3(-1.0f64..1.0),
    ) {
        let Ok(value) = e.eval(&x, &theta) else { return Ok(()) };
        prop_assume!(value.abs() < 1e6);
        let g = diff_theta(&e, &x, &theta).unwrap();
        for j in 0..M {
            let h = 1e-6 * theta[j].abs().max(1.0);
            let (mut tp, mut tm) = (theta, theta);
            tp[j] += h;
            tm[j] -= h;
            let fd = (e.eval(&x, &tp).unwrap() - e.eval(&x, &tm).unwrap()) / (2.0 * h);
            // Central differences carry O(h²) truncation and O(ε|η|/h) cancellation.
            let scale = g[j].abs().max(1e-2 * value.abs().max(1.0));
            prop_assert!((g[j] - fd).abs() <= 1e-5 * scale, "j={} dual={} fd={} e={}", j, g[j], fd, e);
        }
    }
}
