use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn unseen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unseen"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const ZIPF_A: [&str; 8] = [
    "--n", "977", "--j", "300", "--alpha", "0.54", "--theta", "26.67",
];

#[test]
fn fit_json_schema() {
    let path = fixture("est_standin_tomato.tsv");
    let o = unseen(&[
        "fit",
        "--input",
        path.to_str().unwrap(),
        "--mode",
        "label-count",
        "--format",
        "json",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort();
    assert_eq!(keys, ["alpha", "flags", "loglik", "theta"]);
    assert!((v["alpha"].as_f64().unwrap() - 0.612).abs() < 0.1);
    assert!(v["flags"].as_array().unwrap().is_empty());
}

#[test]
fn fit_csv_and_uniform_fixture() {
    let path = fixture("synthetic_D.tsv");
    let o = unseen(&["fit", "--input", path.to_str().unwrap(), "--format", "csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("alpha,theta,loglik,flags"));
    let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(fields[0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(fields[3], "alpha_zero");
}

#[test]
fn fit_error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let single = dir.path().join("single.txt");
    std::fs::write(&single, "s1\n").unwrap();
    let o = unseen(&[
        "fit",
        "--input",
        single.to_str().unwrap(),
        "--mode",
        "labels",
    ]);
    assert_eq!(o.status.code(), Some(3));

    let singletons = dir.path().join("singletons.txt");
    std::fs::write(&singletons, "a\nb\nc\nd\n").unwrap();
    let o = unseen(&[
        "fit",
        "--input",
        singletons.to_str().unwrap(),
        "--mode",
        "labels",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("theta_capped"));

    let bad = dir.path().join("bad.tsv");
    std::fs::write(&bad, "a\t3\nb\tx\n").unwrap();
    let o = unseen(&["fit", "--input", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"));

    let o = unseen(&[
        "fit",
        "--input",
        dir.path().join("missing").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn estimate_zipf_a_row() {
    let mut args = vec!["estimate"];
    args.extend(ZIPF_A);
    args.extend(["--m", "977", "--seed", "3"]);
    let o = unseen(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 1);
    let f = |i: usize| rows[0][i].parse::<f64>().unwrap().round();
    assert!((f(6) - 156.0).abs() <= 2.0);
    assert!((f(7) - 130.0).abs() <= 3.0 && (f(8) - 184.0).abs() <= 3.0);
    assert!((f(9) - 141.0).abs() <= 3.0 && (f(10) - 173.0).abs() <= 3.0);
    assert!((f(11) - 129.0).abs() <= 2.0 && (f(12) - 183.0).abs() <= 2.0);
}

#[test]
fn estimate_gaussian_only_is_draw_free() {
    let mut args = vec!["estimate"];
    args.extend(ZIPF_A);
    args.extend(["--m", "n,2n,3n", "--methods", "gaussian"]);
    let o = unseen(&args);
    assert!(o.status.success());
    assert!(stderr(&o).contains("rng draws: 0"));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[7].is_empty() && !r[11].is_empty()));
}

#[test]
fn estimate_zero_m_and_dirichlet() {
    let mut args = vec!["estimate"];
    args.extend(ZIPF_A);
    args.extend(["--m", "0", "--samples", "200"]);
    let rows = csv_rows(&stdout(&unseen(&args)));
    let vals: Vec<f64> = rows[0][6..13].iter().map(|s| s.parse().unwrap()).collect();
    assert!(vals.iter().all(|&v| v == 0.0));

    let o = unseen(&[
        "estimate",
        "--n",
        "2000",
        "--j",
        "447",
        "--alpha",
        "0",
        "--theta",
        "178.48",
        "--m",
        "n",
        "--samples",
        "200",
    ]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("alpha > 0"));
    let rows = csv_rows(&stdout(&o));
    assert!(rows[0][9].is_empty() && rows[0][13].is_empty() && !rows[0][14].is_empty());
}

#[test]
fn estimate_rejects_inadmissible_parameters() {
    for (alpha, theta) in [("1.2", "1"), ("0.5", "-0.7"), ("-0.1", "1")] {
        let o = unseen(&[
            "estimate", "--n", "10", "--j", "3", "--alpha", alpha, "--theta", theta, "--m", "5",
        ]);
        assert_eq!(o.status.code(), Some(2), "{alpha} {theta}");
    }
    let o = unseen(&[
        "estimate",
        "--n",
        "10",
        "--j",
        "3",
        "--alpha",
        "0.5",
        "--theta",
        "1",
        "--m",
        "5",
        "--methods",
        "magic",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn estimate_is_seed_reproducible() {
    let run = |seed: &str| {
        let mut args = vec!["estimate"];
        args.extend(ZIPF_A);
        args.extend([
            "--m",
            "n,5n",
            "--samples",
            "500",
            "--seed",
            seed,
            "--format",
            "json",
        ]);
        stdout(&unseen(&args))
    };
    assert_eq!(run("4"), run("4"));
    assert_ne!(run("4"), run("5"));
    let v: serde_json::Value = serde_json::from_str(&run("4")).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
}

#[test]
fn pmf_methods_agree() {
    let args = [
        "--n", "2", "--j", "1", "--alpha", "0.5", "--theta", "0.5", "--m", "2",
    ];
    let read = |method: &str| -> Vec<f64> {
        let mut a = vec!["pmf"];
        a.extend(args);
        a.extend(["--method", method]);
        let o = unseen(&a);
        assert!(o.status.success());
        csv_rows(&stdout(&o))
            .iter()
            .map(|r| r[1].parse().unwrap())
            .collect()
    };
    let (dp, closed) = (read("dp"), read("closed"));
    assert_eq!(dp.len(), 3);
    for (a, b) in dp.iter().zip(&closed) {
        assert!((a - b).abs() < 1e-8);
    }
    assert!((dp.iter().sum::<f64>() - 1.0).abs() < 1e-10);
}

#[test]
fn pmf_closed_cap_exits_2() {
    let o = unseen(&[
        "pmf", "--n", "20", "--j", "5", "--alpha", "0.5", "--theta", "1", "--m", "500", "--method",
        "closed",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cap"));
    let o = unseen(&[
        "pmf", "--n", "20", "--j", "5", "--alpha", "0.5", "--theta", "1", "--m", "500",
    ]);
    assert!(o.status.success());
}

#[test]
fn benchmark_synthetic_suite_shape_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_unseen"))
            .args([
                "benchmark",
                "--suite",
                "synthetic",
                "--params",
                "reference",
                "--samples",
                "2000",
                "--seed",
                "7",
            ])
            .args(["--out", out.to_str().unwrap()])
            .env("UNSEEN_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "2");
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with(
        "dataset,n,j,alpha,theta,m,k_hat,exact_lo,exact_hi,ml_lo,ml_hi,gauss_lo,gauss_hi,ml_cov,gauss_cov\n"
    ));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 200);
    let late: Vec<&Vec<String>> = rows
        .iter()
        .filter(|r| r[5].parse::<u64>().unwrap() >= r[1].parse::<u64>().unwrap())
        .collect();
    let good = late
        .iter()
        .filter(|r| r[14].parse::<f64>().unwrap() >= 93.0)
        .count();
    assert!(
        good as f64 >= 0.9 * late.len() as f64,
        "{good}/{}",
        late.len()
    );
}

#[test]
fn benchmark_est_suite_needs_inputs() {
    let o = unseen(&["benchmark", "--suite", "est"]);
    assert_eq!(o.status.code(), Some(2));
    let tomato = fixture("est_standin_tomato.tsv");
    let o = unseen(&[
        "benchmark",
        "--suite",
        "est",
        "--input",
        tomato.to_str().unwrap(),
        "--m-grid",
        "n,2n",
        "--samples",
        "200",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "est_standin_tomato");
    let o = unseen(&["benchmark", "--suite", "synthetic", "--m-grid", "0..5n/0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn generate_round_trips_through_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.tsv");
    let o = unseen(&[
        "generate",
        "--dataset",
        "C",
        "--seed",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("n = 2000"));
    let o = unseen(&["fit", "--input", out.to_str().unwrap()]);
    assert!(o.status.success());
    let o = unseen(&["generate", "--dataset", "E", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
