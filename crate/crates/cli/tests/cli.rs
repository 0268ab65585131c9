use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ndarray::Array2;
use serde_json::Value;
use sparse_apca::simulation::{generate, DgpConfig, NoiseKind};

fn sapca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sapca")).args(args).output().expect("binary runs")
}

fn write_panel(path: &Path, x: &Array2<f64>) {
    let mut w = csv::Writer::from_path(path).unwrap();
    let header: Vec<String> = (0..x.ncols()).map(|i| format!("u{i}")).collect();
    w.write_record(&header).unwrap();
    for row in x.rows() {
        w.write_record(row.iter().map(|v| format!("{v:e}"))).unwrap();
    }
    w.flush().unwrap();
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Noise-free one-factor panel whose factor has zero time mean, so centring
/// leaves the planted support intact.
fn noise_free_panel(dir: &Path) -> (PathBuf, Vec<usize>) {
    let t = 60;
    let support = vec![3, 9, 17, 22, 30, 41, 47, 58];
    let vals = [2.0, -1.5, 3.0, -2.5, 1.0, -3.5, 2.5, -1.0];
    let mut f = vec![0.0; t];
    for (&i, &v) in support.iter().zip(&vals) {
        f[i] = v;
    }
    let lambda: Vec<f64> = (0..12).map(|i| 0.5 + (i as f64 * 0.37).sin()).collect();
    let x = Array2::from_shape_fn((t, 12), |(a, b)| f[a] * lambda[b]);
    let path = dir.join("noise_free.csv");
    write_panel(&path, &x);
    (path, support)
}

#[test]
fn noise_free_support_is_recovered() {
    let dir = tempfile::tempdir().unwrap();
    let (input, support) = noise_free_panel(dir.path());
    let out = dir.path().join("fit");
    let res = sapca(&["estimate", "--input", s(&input), "--r", "1", "--s", "8", "--out", s(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let sup = read_json(out.join("supports.json"));
    let got: Vec<usize> = serde_json::from_value(sup["supports"][0].clone()).unwrap();
    assert_eq!(got, support);
    assert_eq!(sup["index_base"], 0);
    for name in ["factors.csv", "loadings.csv", "fit.json", "manifest.json"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let loadings = fs::read_to_string(out.join("loadings.csv")).unwrap();
    assert_eq!(loadings.lines().next().unwrap(), "series,lambda1,se1");
    assert_eq!(loadings.lines().count(), 13);

    let out1 = dir.path().join("fit1");
    let res = sapca(&["estimate", "--input", s(&input), "--r", "1", "--s", "8", "--one-based", "--out", s(&out1)]);
    assert!(res.status.success());
    let sup = read_json(out1.join("supports.json"));
    let got: Vec<usize> = serde_json::from_value(sup["supports"][0].clone()).unwrap();
    assert_eq!(got, support.iter().map(|i| i + 1).collect::<Vec<_>>());
}

#[test]
fn missing_input_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let res = sapca(&["estimate", "--input", "/nonexistent/panel.csv", "--r", "1", "--s", "3", "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
    assert!(!res.stderr.is_empty());
}

#[test]
fn malformed_csv_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "a,b\n1,2\n3,4,5\n6,7\n").unwrap();
    let res = sapca(&["inspect", "--input", s(&input)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 3"));
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("constant.csv");
    fs::write(&input, "a,b\n1,2\n1,2\n1,2\n1,2\n").unwrap();
    let out = dir.path().join("o");
    let res = sapca(&["estimate", "--input", s(&input), "--r", "1", "--s", "2", "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(!out.exists());
}

#[test]
fn estimate_is_deterministic_and_digest_order_free() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(&DgpConfig::one_factor(24, 64, NoiseKind::IidGaussian, 5)).unwrap();
    let input = dir.path().join("p.csv");
    write_panel(&input, &g.panel.values().to_owned());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let ra = sapca(&[
        "estimate",
        "--input",
        s(&input),
        "--select-s",
        "--grid",
        "4:12",
        "--j",
        "3",
        "--seed",
        "9",
        "--out",
        s(&a),
    ]);
    let rb = sapca(&[
        "estimate",
        "--seed",
        "9",
        "--j",
        "3",
        "--grid",
        "4:12",
        "--select-s",
        "--out",
        s(&b),
        "--input",
        s(&input),
    ]);
    assert!(ra.status.success() && rb.status.success(), "{}", String::from_utf8_lossy(&ra.stderr));
    for name in ["factors.csv", "loadings.csv", "supports.json", "fit.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
    let ma = read_json(a.join("manifest.json"));
    let mb = read_json(b.join("manifest.json"));
    assert_eq!(ma["config_digest"], mb["config_digest"]);
    assert_eq!(ma["seed"], 9);
    assert_eq!(ma["command"], "estimate");

    let c = dir.path().join("c");
    let rc = sapca(&[
        "--threads",
        "1",
        "estimate",
        "--input",
        s(&input),
        "--select-s",
        "--grid",
        "4:12",
        "--j",
        "3",
        "--seed",
        "9",
        "--out",
        s(&c),
    ]);
    assert!(rc.status.success());
    assert_eq!(fs::read(a.join("fit.json")).unwrap(), fs::read(c.join("fit.json")).unwrap());
}

#[test]
fn select_r_on_three_factor_panel() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(&DgpConfig::three_factor(100, 200, NoiseKind::IidGaussian, 3)).unwrap();
    let input = dir.path().join("p.csv");
    write_panel(&input, &g.panel.values().to_owned());
    for method in ["ratio", "ic"] {
        let out = dir.path().join(method);
        let res = sapca(&["select", "--input", s(&input), "--what", "r", "--method", method, "--out", s(&out)]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
        assert_eq!(read_json(out.join("selection.json"))["selected"], 3, "{method}");
        assert!(out.join("selection.csv").exists());
    }
}

#[test]
fn select_s_reports_boundary_and_penalty_free_errors() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate(&DgpConfig::one_factor(40, 100, NoiseKind::IidGaussian, 8)).unwrap();
    let input = dir.path().join("p.csv");
    write_panel(&input, &g.panel.values().to_owned());

    // True s is 10; this grid stops well short of it.
    let out = dir.path().join("low");
    let res = sapca(&[
        "select",
        "--input",
        s(&input),
        "--what",
        "s",
        "--r",
        "1",
        "--grid",
        "2:5",
        "--j",
        "2",
        "--out",
        s(&out),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let rep = read_json(out.join("selection.json"));
    assert_eq!(rep["report"]["boundary_hit"], true);
    assert_eq!(rep["selected"], 5);

    let mut raw = Vec::new();
    for penalty in ["pc_linear", "ic_log_scaled"] {
        let out = dir.path().join(penalty);
        let res = sapca(&[
            "select",
            "--input",
            s(&input),
            "--what",
            "s",
            "--r",
            "1",
            "--grid",
            "5:20",
            "--j",
            "2",
            "--penalty",
            penalty,
            "--out",
            s(&out),
        ]);
        assert!(res.status.success());
        let rep = read_json(out.join("selection.json"));
        assert_eq!(rep["report"]["penalty_kind"], penalty);
        raw.push(rep["report"]["raw_errors"].clone());
    }
    assert_eq!(raw[0], raw[1]);
}

#[test]
fn simulate_single_replication_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("one");
    let res = sapca(&["simulate", "--n", "30", "--t", "100", "--reps", "1", "--seed", "4", "--out", s(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let sum = read_json(out.join("summary.json"));
    let rec = &sum["records"][0];
    assert!(rec["factor_angle_error"].as_f64().unwrap() < 0.5);
    assert!(rec["recovery_rate"].as_f64().unwrap() > 0.5);

    let a = dir.path().join("ta");
    let b = dir.path().join("tb");
    let args = |o: &Path| {
        vec!["simulate", "--table", "1", "--cells", "N=30:T=100", "--reps", "5", "--seed", "2", "--out"]
            .into_iter()
            .map(String::from)
            .chain([s(o).to_string()])
            .collect::<Vec<_>>()
    };
    let run = |o: &Path| {
        let v = args(o);
        sapca(&v.iter().map(String::as_str).collect::<Vec<_>>())
    };
    assert!(run(&a).status.success());
    assert!(run(&b).status.success());
    for name in ["table.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
    let table = fs::read_to_string(a.join("table.csv")).unwrap();
    assert_eq!(table.lines().next().unwrap(), "noise,N,T=100");
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn simulate_rejects_bad_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    assert_eq!(sapca(&["simulate", "--table", "9", "--out", s(&out)]).status.code(), Some(2));
    assert_eq!(sapca(&["simulate", "--reps", "3", "--out", s(&out)]).status.code(), Some(2));
    assert_eq!(sapca(&["simulate", "--n", "20", "--t", "50", "--reps", "0", "--out", s(&out)]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn inspect_and_metric() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p.csv");
    fs::write(&input, "a,b,c\n1,2,3\n4,5,6\n").unwrap();
    let res = sapca(&["inspect", "--input", s(&input)]);
    assert!(res.status.success());
    let v: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!((v["T"].as_u64(), v["N"].as_u64(), v["centered"].as_bool()), (Some(2), Some(3), Some(false)));

    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    fs::write(&a, "f1\n1\n0\n2\n0\n").unwrap();
    fs::write(&b, "g1\n-2\n0\n-4\n0\n").unwrap();
    let res = sapca(&["metric", "--kind", "angle", "--a", s(&a), "--b", s(&b)]);
    let v: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert!(v["d"].as_f64().unwrap() < 1e-7);
    let res = sapca(&["metric", "--kind", "recovery", "--a", s(&a), "--b", s(&b)]);
    let v: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(v["recovery_rate"], 1.0);
    let res = sapca(&["metric", "--kind", "subspace", "--a", s(&a), "--b", s(&b)]);
    let v: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert!(v["rho"].as_f64().unwrap() < 1e-7);
}
