use std::sync::Arc;

use proptest::prelude::*;
use qbs::ppl::{parse, Ast, DistKind, PrimOp, Query};
use qbs::{BaseMeasure, Measure, Method};

fn table() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::btree_map(-20i32..20, 0.01f64..1.0, 1..=8)
        .prop_map(|m| m.into_iter().map(|(k, w)| (k as f64, w)).collect())
}

fn weighted(t: &[(f64, f64)]) -> Measure<f64> {
    Measure::weighted(t.to_vec()).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #[test]
    fn normal_quantile_inverts_cdf(mean in -50.0f64..50.0, sd in 0.01f64..20.0, u in 1e-6f64..(1.0 - 1e-6)) {
        let d = BaseMeasure::normal(mean, sd).unwrap();
        let x = d.quantile(u).unwrap();
        prop_assert!((d.cdf(x) - u).abs() < 1e-9);
    }

    #[test]
    fn beta_quantile_inverts_cdf(a in 0.3f64..8.0, b in 0.3f64..8.0, u in 1e-4f64..(1.0 - 1e-4)) {
        let d = BaseMeasure::beta(a, b).unwrap();
        let x = d.quantile(u).unwrap();
        prop_assert!((0.0..=1.0).contains(&x));
        prop_assert!((d.cdf(x) - u).abs() < 1e-8);
    }

    #[test]
    fn atomic_quantile_lands_on_atoms(t in table(), u in 1e-9f64..(1.0 - 1e-9)) {
        let total: f64 = t.iter().map(|a| a.1).sum();
        let d = BaseMeasure::atoms(t.iter().map(|&(l, w)| (l, w / total))).unwrap();
        let x = d.quantile(u).unwrap();
        prop_assert!(t.iter().any(|a| a.0 == x));
        prop_assert!(d.cdf(x) >= u - 1e-12);
    }

    #[test]
    fn weighted_measures_have_unit_mass(t in table()) {
        let m = weighted(&t);
        prop_assert!(close(m.integrate(|_| 1.0, Method::Exact).unwrap(), 1.0));
        let atoms = m.enumerate().unwrap();
        prop_assert!(atoms.iter().all(|a| a.1 > 0.0));
    }

    #[test]
    fn integration_is_linear(t in table(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let m = weighted(&t);
        let f = |x: &f64| x.sin();
        let g = |x: &f64| x * x;
        let lhs = m.integrate(|x| a * f(x) + b * g(x), Method::Exact).unwrap();
        let rhs = a * m.integrate(f, Method::Exact).unwrap() + b * m.integrate(g, Method::Exact).unwrap();
        prop_assert!(close(lhs, rhs));
    }

    #[test]
    fn bind_laws(t in table(), rows in prop::collection::vec(table(), 3), x in -20i32..20) {
        let rows = Arc::new(rows);
        let k = {
            let rows = rows.clone();
            move |x: &f64| weighted(&rows[(*x as i64).rem_euclid(3) as usize]).map(move |y| y - 1.0)
        };
        let m = weighted(&t);
        let f = |y: &f64| (0.37 * y).cos() + y;
        let int = |m: &Measure<f64>| m.integrate(f, Method::Exact).unwrap();
        let x = x as f64;
        prop_assert!(close(int(&Measure::unit(x).bind(k.clone())), int(&k(&x))));
        prop_assert!(close(int(&m.bind(|x| Measure::unit(*x))), int(&m)));
        let k2 = k.clone();
        let lhs = m.bind(k.clone()).bind(k.clone());
        let rhs = m.bind(move |x| k2(x).bind(k.clone()));
        prop_assert!(close(int(&lhs), int(&rhs)));
    }

    #[test]
    fn pretty_printing_round_trips(body in expr()) {
        let q = Query {
            name: "generated".into(),
            body: Ast::Let { bindings: vec![("a".into(), Ast::Number(1.0)), ("b".into(), Ast::Number(-2.5))], body: vec![body] },
        };
        let printed = q.to_string();
        let again = parse(&printed).map_err(|e| TestCaseError::fail(format!("{e}\n{printed}")))?;
        prop_assert_eq!(&again, &q);
        prop_assert_eq!(again.to_string(), printed);
    }
}

/// Scoped expressions over the variables `a` and `b`.
fn expr() -> impl Strategy<Value = Ast> {
    let number = prop_oneof![(-1000i32..1000).prop_map(|n| n as f64), -1e6f64..1e6, Just(1e-300), Just(0.1)];
    let leaf = prop_oneof![number.prop_map(Ast::Number), prop_oneof![Just("a"), Just("b")].prop_map(|v| Ast::Var(v.into()))];
    leaf.prop_recursive(4, 48, 3, |inner| {
        let op = prop_oneof![Just(PrimOp::Add), Just(PrimOp::Sub), Just(PrimOp::Mul), Just(PrimOp::Div)];
        let normal = (inner.clone(), inner.clone()).prop_map(|(m, s)| Ast::Dist { kind: DistKind::Normal, args: vec![m, s] });
        prop_oneof![
            (op, inner.clone(), inner.clone()).prop_map(|(op, x, y)| Ast::Prim { op, args: vec![x, y] }),
            normal.clone().prop_map(|d| Ast::Sample(Box::new(d))),
            (normal, inner.clone()).prop_map(|(d, v)| Ast::Observe { dist: Box::new(d), value: Box::new(v) }),
            inner.clone().prop_map(|p| Ast::Dist { kind: DistKind::Bernoulli, args: vec![p] }),
            ("[a-z]{1,6}", inner.clone()).prop_map(|(label, v)| Ast::Predict { label, value: Box::new(v) }),
            (inner.clone(), inner.clone()).prop_map(|(v, body)| Ast::Let { bindings: vec![("a".into(), v)], body: vec![body.clone(), body] }),
            (inner.clone(), inner.clone()).prop_map(|(body, arg)| Ast::App {
                func: Box::new(Ast::Fn { params: vec!["b".into()], body: Arc::new(body) }),
                args: vec![arg],
            }),
        ]
    })
}
