use std::path::Path;
use std::process::{Command, Output};

fn stochot(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochot"))
        .args(args)
        .current_dir(dir)
        .env("STOCHOT_THREADS", "2")
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn help_and_version_succeed() {
    let dir = tempfile::tempdir().unwrap();
    assert!(ok(&stochot(&["--version"], dir.path())).starts_with("stochot "));
    assert!(ok(&stochot(&["--help"], dir.path())).contains("eval"));
}

#[test]
fn generate_fit_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&stochot(&["gen", "--setting", "a", "--d", "3", "--N", "100", "--seed", "7", "--out-dir", "g"], d));
    for f in ["g/mu.csv", "g/nu.csv", "g/t_star.json"] {
        assert!(d.join(f).exists(), "{f}");
    }
    // the reference map is optimal, so its error vanishes
    let report = json(&ok(&stochot(
        &["eval", "--mu", "g/mu.csv", "--nu", "g/nu.csv", "--kernel", "g/t_star.json", "--p", "1"],
        d,
    )));
    assert!(report["ep"].as_f64().unwrap() < 1e-9);

    ok(&stochot(
        &["fit", "--estimator", "rounding-cubic", "--xs", "g/mu.csv", "--ys", "g/nu.csv", "--param", "side=0.3", "--output", "k.json"],
        d,
    ));
    let fitted = json(&std::fs::read_to_string(d.join("k.json")).unwrap());
    assert_eq!(fitted["params"]["side"].as_f64(), Some(0.3));
    let report = json(&ok(&stochot(&["eval", "--mu", "g/mu.csv", "--nu", "g/nu.csv", "--kernel", "k.json"], d)));
    let (ep, gap, feas) = (
        report["ep"].as_f64().unwrap(),
        report["optimality_gap"].as_f64().unwrap(),
        report["feasibility_gap"].as_f64().unwrap(),
    );
    assert!(ep >= 0.0 && (ep - gap - feas).abs() < 1e-12);
}

#[test]
fn solve_and_corrupt() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("a.csv"), "x1\n0\n1\n").unwrap();
    std::fs::write(d.join("b.csv"), "x1,weight\n2,0.5\n3,0.5\n").unwrap();
    let plan = json(&ok(&stochot(&["solve", "--mu", "a.csv", "--nu", "b.csv", "--p", "2"], d)));
    // sorted pairing 0→2, 1→3 costs (4 + 4)/2
    assert!((plan["cost_value"].as_f64().unwrap() - 4.0).abs() < 1e-12);
    let entropic = json(&ok(&stochot(&["solve", "--mu", "a.csv", "--nu", "b.csv", "--tau", "0.5"], d)));
    assert_eq!(entropic["rows"], 2);

    ok(&stochot(&["gen", "--setting", "checkerboard", "--N", "50", "--out-dir", "."], d));
    ok(&stochot(
        &["corrupt", "--input", "mu.csv", "--output", "bad.csv", "--eps", "0.2", "--rho", "0.01", "--adversary", "relocate"],
        d,
    ));
    let text = std::fs::read_to_string(d.join("bad.csv")).unwrap();
    assert_eq!(text.lines().count(), 51);
}

#[test]
fn run_and_plot_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("exp.toml"),
        "setting = \"b\"\nd = 2\nN = 150\nn_grid = [10, 30]\nK = 3\nestimators = [\"nn\", \"rounding-cubic\"]\nmaster_seed = 5\n",
    )
    .unwrap();
    let mut files = Vec::new();
    for run in ["one", "two"] {
        let csv = format!("{run}.csv");
        let svg = format!("{run}.svg");
        ok(&stochot(&["run", "--config", "exp.toml", "--out", &csv], d));
        ok(&stochot(&["plot", "--input", &csv, "--output", &svg], d));
        files.push((
            std::fs::read(d.join(&csv)).unwrap(),
            std::fs::read(d.join(&svg)).unwrap(),
            std::fs::read(d.join(format!("{run}_summary.csv"))).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
    let csv = String::from_utf8(files[0].0.clone()).unwrap();
    assert!(csv.contains("# master_seed=5"));
    assert!(csv.contains("setting,d,n,seed,estimator,metric,value"));
    assert!(String::from_utf8_lossy(&files[0].1).starts_with("<svg"));
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(stochot(&["run", "--nope"], d).status.code(), Some(2));
    std::fs::write(d.join("bad.toml"), "K = 0\n").unwrap();
    let out = stochot(&["run", "--config", "bad.toml"], d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("K must be at least 1"));
    assert_eq!(stochot(&["eval", "--mu", "missing.csv", "--nu", "x", "--kernel", "y"], d).status.code(), Some(2));

    // more atoms than the exact solver accepts is a numerical failure
    let mut big = String::from("x1\n");
    for i in 0..5001 {
        big.push_str(&format!("{i}\n"));
    }
    std::fs::write(d.join("big.csv"), big).unwrap();
    assert_eq!(stochot(&["solve", "--mu", "big.csv", "--nu", "big.csv"], d).status.code(), Some(3));

    let threads = Command::new(env!("CARGO_BIN_EXE_stochot"))
        .args(["solve", "--mu", "big.csv", "--nu", "big.csv"])
        .current_dir(d)
        .env("STOCHOT_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
}
