use jetmech::symexpr::{self, parse, Expr, Point, Sym};
use proptest::prelude::*;

const DIM: usize = 2;

fn syms() -> Vec<Sym> {
    vec![Sym::T, Sym::Q(0), Sym::Q(1), Sym::Qt(0), Sym::Qt(1), Sym::P(0)]
}

fn source() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("t".to_string()),
        Just("q1".to_string()),
        Just("q2".to_string()),
        Just("qt1".to_string()),
        Just("qt2".to_string()),
        Just("p1".to_string()),
        (-4i32..=4).prop_map(|n| format!("({n})")),
        Just("(1/2)".to_string()),
        Just("(0.3)".to_string()),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("exp({a}/8)")),
            (inner, 2i32..=3).prop_map(|(a, n)| format!("({a})^{n}")),
        ]
    })
}

fn expr() -> impl Strategy<Value = Expr> {
    source().prop_map(|s| parse(&s, DIM).expect("generated source parses"))
}

fn point() -> impl Strategy<Value = Point> {
    proptest::collection::vec(-1.0f64..1.0, 6).prop_map(|v| syms().into_iter().zip(v).collect())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn central(e: &Expr, pt: &Point, s: Sym, h: f64) -> f64 {
    let x = pt.get(s).unwrap();
    let mut lo = pt.clone();
    let mut hi = pt.clone();
    lo.set(s, x - h);
    hi.set(s, x + h);
    (e.evaluate(&hi).unwrap() - e.evaluate(&lo).unwrap()) / (2.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn derivative_matches_finite_difference(e in expr(), pt in point()) {
        for s in syms() {
            let exact = e.diff(s).evaluate(&pt).unwrap();
            let fd = central(&e, &pt, s, 1e-5);
            prop_assert!(close(exact, fd, 1e-5), "{e} d/{s}: {exact} vs {fd}");
        }
    }

    #[test]
    fn simplify_preserves_value(e in expr(), pts in proptest::collection::vec(point(), 20)) {
        let s = e.simplify();
        for pt in &pts {
            let (a, b) = (e.evaluate(pt).unwrap(), s.evaluate(pt).unwrap());
            prop_assert!(close(a, b, 1e-9), "{e} -> {s}: {a} vs {b}");
        }
    }

    #[test]
    fn derivative_is_linear(f in expr(), g in expr(), a in -3i64..=3, b in -3i64..=3, pt in point()) {
        let lhs = (Expr::int(a) * &f + Expr::int(b) * &g).diff(Sym::Q(0));
        let rhs = Expr::int(a) * f.diff(Sym::Q(0)) + Expr::int(b) * g.diff(Sym::Q(0));
        let (x, y) = (lhs.evaluate(&pt).unwrap(), rhs.evaluate(&pt).unwrap());
        prop_assert!(close(x, y, 1e-10));
    }

    #[test]
    fn product_rule(f in expr(), g in expr(), pt in point()) {
        let lhs = (&f * &g).diff(Sym::Qt(1));
        let rhs = f.diff(Sym::Qt(1)) * &g + &f * g.diff(Sym::Qt(1));
        let (x, y) = (lhs.evaluate(&pt).unwrap(), rhs.evaluate(&pt).unwrap());
        prop_assert!(close(x, y, 1e-10));
    }

    #[test]
    fn print_parse_roundtrip(e in expr()) {
        let back = parse(&e.to_string(), DIM).unwrap();
        prop_assert_eq!(&back, &e, "printed as {}", e);
    }

    #[test]
    fn total_derivative_follows_paths(
        e in expr(),
        c in proptest::collection::vec(-1.0f64..1.0, 6),
        t in -1.0f64..1.0,
    ) {
        let e = e.substitute_one(Sym::P(0), &Expr::frac(1, 3));
        let d = symexpr::total_derivative(&e).unwrap();
        // qⁱ(t) = c₀ + c₁t + c₂t²
        let at = |t: f64| {
            let mut pt = Point::new().with(Sym::T, t);
            for i in 0..DIM {
                let (a, b, k) = (c[3 * i], c[3 * i + 1], c[3 * i + 2]);
                pt.set(Sym::Q(i), a + b * t + k * t * t);
                pt.set(Sym::Qt(i), b + 2.0 * k * t);
                pt.set(Sym::Qtt(i), 2.0 * k);
            }
            pt
        };
        let h = 1e-5;
        let fd = (e.evaluate(&at(t + h)).unwrap() - e.evaluate(&at(t - h)).unwrap()) / (2.0 * h);
        let exact = d.evaluate(&at(t)).unwrap();
        prop_assert!(close(exact, fd, 1e-5), "{e}: {exact} vs {fd}");
    }
}

#[test]
fn spec_examples() {
    let e = parse("sin(t*q1)", 1).unwrap();
    assert_eq!(e.diff(Sym::Q(0)), parse("t*cos(t*q1)", 1).unwrap());
    let pt = Point::new().with(Sym::T, 0.7).with(Sym::Q(0), 0.3);
    let fd = central(&e, &pt, Sym::Q(0), 1e-6);
    assert!((e.diff(Sym::Q(0)).evaluate(&pt).unwrap() - fd).abs() < 1e-8);

    let d = symexpr::total_derivative(&parse("t*q1^2", 1).unwrap()).unwrap();
    assert_eq!(d, parse("q1^2 + 2*t*q1*qt1", 1).unwrap());
}
