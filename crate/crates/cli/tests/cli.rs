use std::path::Path;
use std::process::{Command, Output};

fn okernel(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_okernel"))
        .args(args)
        .current_dir(dir)
        .env("OKERNEL_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn fixture() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("f.json"), r#"{"type":"affine","matrix":[[1.0]],"offset":[1.0]}"#).unwrap();
    std::fs::write(p.join("B2.json"), r#"{"m":2,"shape":[2,2],"data":[2,1,1,2]}"#).unwrap();
    std::fs::write(p.join("pts.csv"), "x\n-1\n0.5\n2\n").unwrap();
    std::fs::write(p.join("mu.csv"), "-1,0.25\n0,0.25\n1,0.5\n").unwrap();
    std::fs::write(p.join("data.csv"), "0,1,0\n0.5,0.2,1\n1.2,-1,0.3\n").unwrap();
    dir
}

#[test]
fn eval_prints_four_over_pi() {
    let d = fixture();
    let o = okernel(d.path(), &["eval", "-k", "sinc()", "--x", "0", "--t", "0.25"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "1.27323954474+0i");
    let o = okernel(d.path(), &["eval", "-k", "kb(scalar=gauss(sigma=1), b=@B2.json)", "--x", "0", "--t", "0"]);
    assert_eq!(stdout(&o), "2+0i 1+0i\n1+0i 2+0i\n");
    let o = okernel(d.path(), &["eval", "-k", "sinc()", "--x", "-0.5", "--t", "0", "--format", "csv"]);
    let cols: Vec<f64> = stdout(&o).trim().split(',').map(|t| t.parse().unwrap()).collect();
    assert_eq!(cols.len(), 2);
    assert!(cols[0].abs() < 1e-15 && cols[1] == 0.0);
}

#[test]
fn exit_codes() {
    let d = fixture();
    let code = |args: &[&str]| okernel(d.path(), args).status.code().unwrap();
    assert_eq!(code(&["diag", "spd", "-k", "rank1(@f.json)", "--points", "pts.csv"]), 1);
    assert_eq!(code(&["diag", "spd", "-k", "gauss(sigma=1)", "--points", "pts.csv"]), 0);
    assert_eq!(code(&["eval", "-k", "sinc()"]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["verify", "--suite", "nope"]), 2);
    assert_eq!(code(&["eval", "-k", "gauss(sigma=)", "--x", "0", "--t", "0"]), 3);
    assert_eq!(code(&["gram", "-k", "gauss(sigma=1)", "--points", "missing.csv"]), 3);
    assert_eq!(code(&["eval", "-k", "gauss(sigma=1, d=2)", "--x", "0", "--t", "0"]), 3);
    assert_eq!(code(&["density", "-k", "gauss(sigma=3)", "--grid-nodes", "2"]), 4);
}

#[test]
fn verify_matches_library() {
    let d = fixture();
    for suite in ["gaussian", "sinc", "counterexample", "zn-dichotomy", "spd"] {
        let o = okernel(d.path(), &["verify", "--suite", suite, "--seed", "7"]);
        let lib = okernel::suites::run(suite, 7).unwrap();
        assert_eq!(o.status.success(), lib.passed(), "{suite}");
        assert!(stdout(&o).starts_with(&lib.summary()));
    }
}

#[test]
fn outputs_are_reproducible() {
    let d = fixture();
    let runs = [
        vec!["verify", "--suite", "decoupling", "--seed", "3", "--format", "json"],
        vec!["gram", "-k", "gauss(sigma=1) * kb(scalar=sinc(), b=@B2.json)", "--points", "pts.csv"],
        vec!["mercer", "-k", "laplace()", "--measure", "mu.csv", "--format", "csv"],
        vec!["diag", "spectrum", "-k", "gauss(sigma=1)", "--measure", "mu.csv"],
    ];
    for args in runs {
        let a = okernel(d.path(), &args);
        let b = okernel(d.path(), &args);
        assert!(a.status.success(), "{args:?}: {}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn fit_predict_round_trip() {
    let d = fixture();
    let p = d.path();
    let o = okernel(
        p,
        &["fit", "-k", "kb(scalar=gauss(sigma=1), b=@B2.json)", "--data", "data.csv", "--lambda", "0.1", "--solver", "decoupled", "--out", "model.json"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // the model resolves its file references from the recorded base directory
    let other = tempfile::tempdir().unwrap();
    std::fs::copy(p.join("model.json"), other.path().join("model.json")).unwrap();
    std::fs::write(other.path().join("x.csv"), "0\n0.5\n").unwrap();
    let o = okernel(other.path(), &["predict", "--model", "model.json", "--points", "x.csv", "--format", "csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let block = okernel(
        p,
        &["fit", "-k", "kb(scalar=gauss(sigma=1), b=@B2.json)", "--data", "data.csv", "--lambda", "0.1", "--out", "block.json"],
    );
    assert!(block.status.success());
    std::fs::write(p.join("x.csv"), "0\n0.5\n").unwrap();
    let b = okernel(p, &["predict", "--model", "block.json", "--points", "x.csv", "--format", "csv"]);
    let parse = |s: &str| -> Vec<f64> { s.split([',', '\n']).filter(|t| !t.is_empty()).map(|t| t.parse().unwrap()).collect() };
    let (x, y) = (parse(&stdout(&o)), parse(&stdout(&b)));
    assert_eq!(x.len(), y.len());
    for (a, b) in x.iter().zip(&y) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn density_synth_support() {
    let d = fixture();
    let p = d.path();
    let o = okernel(p, &["density", "-k", "delta(n=4)", "--out", "dens.json"]);
    assert!(o.status.success());
    std::fs::write(p.join("z.csv"), "0\n1\n2\n3\n").unwrap();
    let o = okernel(p, &["synth", "--density", "dens.json", "--points", "z.csv", "--format", "csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), "0,1,0\n1,0,0\n2,0,0\n3,0,0\n");
    let o = okernel(p, &["diag", "support", "--density", "dens.json"]);
    assert!(o.status.success());
    let o = okernel(p, &["density", "-k", "delta(n=4)", "--characters", "0,2", "--out", "gap.json"]);
    assert!(o.status.success());
    assert_eq!(okernel(p, &["diag", "support", "--density", "gap.json"]).status.code(), Some(1));
}
