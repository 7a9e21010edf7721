use okernel::dsl::{self, Arg, Func, KernelExpr, MemoryLoader, Value};
use okernel::{suites, Error};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = KernelExpr> {
    prop_oneof![
        (0.01..10.0f64).prop_map(|s| call("gauss", vec![named("sigma", Value::Number(s))])),
        (0.01..10.0f64, 1u32..4).prop_map(|(s, d)| call(
            "gauss",
            vec![named("sigma", Value::Number(s)), named("d", Value::Number(d as f64))]
        )),
        Just(call("sinc", vec![])),
        Just(call("laplace", vec![])),
        "[a-z][a-z0-9_]{0,6}\\.json".prop_map(|p| call("const", vec![Arg { name: None, value: Value::FileRef(p) }])),
    ]
}

fn call(name: &str, args: Vec<Arg>) -> KernelExpr {
    KernelExpr::Func(Func { name: name.into(), args })
}

fn named(n: &str, value: Value) -> Arg {
    Arg { name: Some(n.into()), value }
}

fn expr() -> impl Strategy<Value = KernelExpr> {
    leaf().prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(KernelExpr::Sum),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| KernelExpr::Product(Box::new(a), Box::new(b))),
            inner.prop_map(|e| call(
                "kb",
                vec![named("scalar", Value::Expr(e)), named("b", Value::FileRef("B2.json".into()))]
            )),
        ]
    })
}

proptest! {
    #[test]
    fn print_parse_is_idempotent(e in expr()) {
        let printed = e.to_string();
        let once = dsl::parse(&printed).unwrap();
        prop_assert_eq!(dsl::parse(&once.to_string()).unwrap(), once.clone());
        prop_assert_eq!(once.to_string(), printed);
    }

    #[test]
    fn typecheck_is_deterministic(e in expr()) {
        let (loader, _) = suites::corpus();
        prop_assert_eq!(dsl::typecheck(&e, &loader), dsl::typecheck(&e, &loader));
    }

    #[test]
    fn arbitrary_text_never_panics(s in "[a-z0-9_@=+*(),. \n-]{0,40}") {
        let _ = dsl::parse(&s);
    }
}

#[test]
fn corpus_round_trips_and_builds() {
    let (loader, exprs) = suites::corpus();
    for s in exprs {
        let e = dsl::parse(s).unwrap();
        assert_eq!(dsl::parse(&e.to_string()).unwrap(), e);
        dsl::compile(s, &loader).unwrap();
    }
}

#[test]
fn type_errors() {
    let loader = MemoryLoader::new()
        .with("B2.json", r#"{"m":2,"shape":[2,2],"data":[2,0,0,1]}"#)
        .with("B3.json", r#"{"m":3,"shape":[3,3],"data":[1,0,0,0,1,0,0,0,1]}"#);
    let e = |s: &str| dsl::compile(s, &loader).unwrap_err();
    assert!(matches!(e("foo()"), Error::UnknownFunction(_)));
    assert!(matches!(e("gauss()"), Error::BadArgument(_)));
    assert!(matches!(e("gauss(sigma=1) + delta(n=4)"), Error::MixedDomains { .. }));
    assert!(matches!(e("const(@B2.json) + const(@B3.json)"), Error::DimensionMismatch { .. }));
    assert!(matches!(e("const(@B2.json) * const(@B2.json)"), Error::OperatorTimesOperator { .. }));
    assert!(matches!(e("const(@missing.json)"), Error::File { .. }));
}
