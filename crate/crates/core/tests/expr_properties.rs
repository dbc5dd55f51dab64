//! Property tests for the expression DSL: printing round-trips structurally
//! and evaluation survives the round trip.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use psvf::dsl::{eval_expr, parse_expression, BinOp, Expr, Func, Var};
use psvf::Point3d;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0u32..2048).prop_map(|n| Expr::Num(n as f64 / 8.0)),
        prop_oneof![Just(Var::X), Just(Var::Y), Just(Var::Z)].prop_map(Expr::Var),
        "[a-w][a-v0-9_]{0,4}".prop_map(Expr::Param),
    ]
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 48, 3, |inner| {
        let bin = prop_oneof![
            Just(BinOp::Add),
            Just(BinOp::Sub),
            Just(BinOp::Mul),
            Just(BinOp::Div),
        ];
        let func = prop_oneof![
            Just(Func::Sin),
            Just(Func::Cos),
            Just(Func::Exp),
            Just(Func::Sqrt),
        ];
        prop_oneof![
            (bin, inner.clone(), inner.clone())
                .prop_map(|(op, l, r)| Expr::Bin(op, Box::new(l), Box::new(r))),
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (func, inner.clone()).prop_map(|(f, a)| Expr::Call(f, Box::new(a))),
            (inner, -4i32..10).prop_map(|(base, k)| {
                let exp = if k < 0 {
                    Expr::Neg(Box::new(Expr::Num(-k as f64)))
                } else {
                    Expr::Num(k as f64)
                };
                Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp))
            }),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn print_parse_round_trip(e in arb_expr()) {
        let printed = e.to_string();
        let reparsed = parse_expression(&printed)
            .unwrap_or_else(|err| panic!("`{printed}` failed to re-parse: {err}"));
        prop_assert_eq!(&reparsed, &e, "printed as `{}`", printed);
    }

    #[test]
    fn round_trip_preserves_evaluation(e in arb_expr()) {
        let mut names = BTreeSet::new();
        e.collect_params(&mut names);
        let params: BTreeMap<String, f64> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.to_string(), 0.5 + i as f64 * 0.25))
            .collect();
        let p = Point3d::new(0.7, 1.3, 0.4);
        let a = eval_expr::<f64>(&e, p, &params);
        let reparsed = parse_expression(&e.to_string()).unwrap();
        let b = eval_expr::<f64>(&reparsed, p, &params);
        match (a, b) {
            (Ok(x), Ok(y)) => prop_assert!(
                (x - y).abs() <= 1e-12 * (1.0 + x.abs()),
                "{x} vs {y} for `{e}`"
            ),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "divergent results {a:?} vs {b:?} for `{e}`"),
        }
    }
}
