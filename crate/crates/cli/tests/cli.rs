use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_eb-fission");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(
        &path,
        "n = 120\nmc_reps = 3\n\n[figure]\ngrid_points = 201\n\n\
         [[estimators]]\nkind = \"mle\"\n\n\
         [[estimators]]\nkind = \"npmle\"\ngrid_size = 60\nmax_iter = 100\n\n\
         [[estimators]]\nkind = \"aurora\"\ng_split = 0.04\nfission_reps = 4\n\n\
         [[estimators]]\nkind = \"aurora\"\ng_split = 0.14\nfission_reps = 4\n\n\
         [[estimators]]\nkind = \"oracle_bayes\"\n",
    )
    .unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn missing_config_is_a_usage_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let o = run(&[
        "simulate",
        "--config",
        missing.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.toml"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "n = 10\nreplicates = 4\n").unwrap();
    let o = run(&[
        "simulate",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("replicates"), "{}", stderr(&o));
}

#[test]
fn simulate_writes_table_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let o = run(&[
        "simulate",
        "--config",
        &cfg,
        "--mc-reps",
        "2",
        "--seed",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let table = std::fs::read_to_string(out.join("table.csv")).unwrap();
    let mut lines = table.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("estimator,likelihood,"), "{header}");
    // five estimators for each of the two default likelihoods
    assert_eq!(lines.count(), 10);

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let reports = report.as_array().unwrap();
    assert_eq!(reports.len(), 2);
    for r in reports {
        assert_eq!(r["config"]["mc_reps"], 2);
        assert_eq!(r["config"]["base_seed"], 3);
        assert_eq!(r["reps"].as_array().unwrap().len(), 2);
    }
}

#[test]
fn simulate_is_reproducible_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let mut tables = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = run(&[
            "simulate",
            "--config",
            &cfg,
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        tables.push(std::fs::read(out.join("table.csv")).unwrap());
    }
    assert_eq!(tables[0], tables[1]);
}

#[test]
fn figure_data_row_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    for scheme in ["gaussian", "poisson"] {
        let out = dir.path().join(scheme);
        let o = run(&[
            "figure-data",
            "--config",
            &cfg,
            "--g-split",
            "0.14",
            "--scheme",
            scheme,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let read = |name: &str| std::fs::read_to_string(out.join(name)).unwrap();
        assert_eq!(read("scatter.csv").lines().count() - 1, 120);
        assert!(read("fit.csv").lines().count() > 1);
        let curve = read("curve.csv");
        assert_eq!(curve.lines().next().unwrap(), "t,true_mean,fitted_mean");
        let ts: Vec<f64> = curve
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap().parse().unwrap())
            .collect();
        if scheme == "gaussian" {
            assert_eq!(ts.len(), 201);
        } else {
            // attainable values z / (1 - tau) for z = 0, 1, ..
            let step = ts[1] - ts[0];
            assert_eq!(ts[0], 0.0);
            assert!(ts.windows(2).all(|w| (w[1] - w[0] - step).abs() < 1e-9));
        }
    }
}

#[test]
fn figure_data_rejects_bad_split() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "figure-data",
        "--g-split",
        "1.5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("fraction outside (0,1)"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn fission_poisson_rejects_non_integer_row() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.csv");
    std::fs::write(&input, "x\n3\n2.5\n").unwrap();
    let o = run(&[
        "fission",
        "--scheme",
        "poisson",
        "--tau",
        "0.3",
        "--input-csv",
        input.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("row 2"), "{}", stderr(&o));
}

#[test]
fn fission_poisson_zeros_stay_zero() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.csv");
    std::fs::write(&input, "x\n0\n0\n0\n").unwrap();
    let o = run(&[
        "fission",
        "--scheme",
        "poisson",
        "--g-split",
        "0.2",
        "--input-csv",
        input.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut rows = text.lines();
    assert_eq!(rows.next(), Some("x,f,g"));
    for row in rows {
        assert!(
            row.split(',').all(|v| v.parse::<f64>().unwrap() == 0.0),
            "{row}"
        );
    }
}

#[test]
fn fission_gaussian_reconstructs_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.csv");
    std::fs::write(&input, "id,x\na,1.5\nb,-3.25\nc,0\nd,120.75\n").unwrap();
    let out = dir.path().join("o");
    let tau = 0.35;
    let o = run(&[
        "fission",
        "--scheme",
        "gaussian",
        "--tau",
        "0.35",
        "--sigma2",
        "2",
        "--seed",
        "9",
        "--input-csv",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("fission.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    for r in rows {
        let x = (r[1] + tau * tau * r[2]) / (1.0 + tau * tau);
        assert!((x - r[0]).abs() <= 1e-10 * r[0].abs().max(1.0), "{r:?}");
    }
}

#[test]
fn fission_requires_tau_or_split() {
    let o = run(&["fission", "--scheme", "gaussian", "--input-csv", "x.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
}
