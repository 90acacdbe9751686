use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn optrack() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_optrack"));
    cmd.env_remove("OPTRACK_THREADS");
    cmd
}

fn run(args: &[&str], out: &Path) -> Output {
    optrack().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv(path: PathBuf) -> Vec<Vec<String>> {
    fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let idx = rows[0].iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name}"));
    rows[1..].iter().map(|r| r[idx].parse().unwrap()).collect()
}

#[test]
fn track_motor_writes_one_row_per_step() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        &["track", "--builtin", "dc-motor", "--dt", "0.01", "--rho", "50", "--M", "30", "--steps", "600"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv(tmp.path().join("trace.csv"));
    assert_eq!(rows[0].join(","), "k,t_seconds,x1,x2,u,ref,feasibility,kkt_residual,solve_ms");
    assert_eq!(rows.len(), 601);
    let u = column(&rows, "u");
    assert!(u.iter().all(|u| (1.27..=1.4).contains(u)));
    assert!(column(&rows, "solve_ms").iter().all(|t| *t == 0.0));
    let m = manifest(tmp.path());
    assert_eq!(m["config"]["rho"], 50.0);
    assert_eq!(m["config"]["horizon"], 26);
    assert_eq!(m["program"]["sha256"].as_str().unwrap().len(), 64);
    assert!(m["outputs"]["trace.csv"].is_string());
}

#[test]
fn missing_rho_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["track", "--builtin", "dc-motor", "--M", "30"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--rho"));
    assert!(!tmp.path().join("manifest.json").exists());
}

#[test]
fn help_and_version_succeed() {
    for flag in ["--help", "--version"] {
        let o = optrack().arg(flag).output().unwrap();
        assert_eq!(code(&o), 0);
        assert!(!o.stdout.is_empty());
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "track", "--builtin", "toy", "--rho", "10", "--M", "5", "--steps", "30", "--ds", "0.01", "--perturb", "0.2",
        "--seed", "42", "--sweeps",
    ];
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&run(&args, &a)), 0);
    assert_eq!(code(&run(&args, &b)), 0);
    for f in ["trace.csv", "sweeps.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(csv(a.join("trace.csv")).len(), 31);
    assert_eq!(csv(a.join("sweeps.csv")).len(), 1 + 30 * 6);

    let mut other = args.to_vec();
    *other.iter_mut().find(|a| **a == "42").unwrap() = "43";
    let c = tmp.path().join("c");
    assert_eq!(code(&run(&other, &c)), 0);
    assert_ne!(fs::read(a.join("trace.csv")).unwrap(), fs::read(c.join("trace.csv")).unwrap());

    let motor = ["track", "--builtin", "dc-motor", "--dt", "0.026", "--rho", "50", "--M", "10", "--steps", "50"];
    let (d, e) = (tmp.path().join("d"), tmp.path().join("e"));
    assert_eq!(code(&run(&motor, &d)), 0);
    assert_eq!(code(&run(&motor, &e)), 0);
    assert_eq!(fs::read(d.join("trace.csv")).unwrap(), fs::read(e.join("trace.csv")).unwrap());
}

#[test]
fn manifest_reruns_the_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let o = run(&["experiment", "contraction", "--rho", "10,50", "--M", "5,20", "--steps", "40"], &first);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = manifest(&first);
    let argv: Vec<String> = m["argv"].as_array().unwrap().iter().map(|a| a.as_str().unwrap().to_string()).collect();
    let pos = argv.iter().position(|a| a == "--out").unwrap();
    let mut rerun = argv.clone();
    let second = tmp.path().join("second");
    rerun[pos + 1] = second.display().to_string();
    let o = optrack().args(&rerun).output().unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(manifest(&second)["outputs"], m["outputs"]);
    let rows = csv(first.join("contraction.csv"));
    assert_eq!(rows[0].join(","), "rho,M,beta_w,beta_s,residual");
    assert_eq!(rows.len(), 5);
}

#[test]
fn oracle_meets_tolerance() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let args = ["oracle", "--builtin", "dc-motor", "--dt", "0.026", "--steps", "40"];
    assert_eq!(code(&run(&args, &a)), 0);
    let rows = csv(a.join("trace.csv"));
    assert_eq!(rows.len(), 41);
    assert!(column(&rows, "feasibility").iter().all(|f| *f < 1e-8));
    assert!(column(&rows, "kkt_residual").iter().all(|r| *r < 1e-8));

    let mut tight = args.to_vec();
    tight.extend(["--tol", "1e-10"]);
    assert_eq!(code(&run(&tight, &b)), 0);
    assert!(column(&csv(b.join("trace.csv")), "kkt_residual").iter().all(|r| *r < 1e-10));
    assert_eq!(manifest(&b)["tolerances"]["tol"], 1e-10);
}

#[test]
fn oracle_failure_names_the_step() {
    let tmp = tempfile::tempdir().unwrap();
    let params = tmp.path().join("params.csv");
    // the second parameter has no feasible point in the box
    fs::write(&params, "s\n1\n5\n").unwrap();
    let out = tmp.path().join("out");
    let o = run(
        &["oracle", "--builtin", "toy", "--params", params.to_str().unwrap(), "--max-outer", "20"],
        &out,
    );
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("at step 1"), "{}", stderr(&o));
    assert_eq!(csv(out.join("trace.csv")).len(), 2);
}

#[test]
fn program_files_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("toy.json");
    fs::write(&path, optrack::format::to_json(&optrack::fixtures::toy_program()).unwrap()).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let common = ["--rho", "10", "--M", "5", "--steps", "10", "--s0", "1", "--ds", "0.01"];
    let mut file = vec!["track", "--program", path.to_str().unwrap()];
    file.extend(common);
    let mut builtin = vec!["track", "--builtin", "toy"];
    builtin.extend(common);
    assert_eq!(code(&run(&file, &a)), 0);
    assert_eq!(code(&run(&builtin, &b)), 0);
    assert_eq!(fs::read(a.join("trace.csv")).unwrap(), fs::read(b.join("trace.csv")).unwrap());
    assert_eq!(manifest(&a)["program"]["sha256"], manifest(&b)["program"]["sha256"]);
    assert_eq!(csv(a.join("trace.csv"))[0].join(","), "k,feasibility,kkt_residual,s1,z1,z2,mu1");
}

#[test]
fn io_and_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = run(&["track", "--program", "/nonexistent/p.json", "--rho", "1"], &out);
    assert_eq!(code(&o), 4);

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{\"layout\": [1]}").unwrap();
    assert_eq!(code(&run(&["track", "--program", bad.to_str().unwrap(), "--rho", "1"], &out)), 2);

    assert_eq!(code(&run(&["experiment", "dt-sweep", "--dt", "0.03:0.01:0.001"], &out)), 2);
    assert_eq!(code(&run(&["experiment", "rate", "--M", "5"], &out)), 2);
    assert_eq!(code(&run(&["experiment", "contraction", "--builtin", "dc-motor"], &out)), 2);
    assert_eq!(code(&run(&["track", "--builtin", "toy", "--rho", "1", "--s0", "1,2"], &out)), 2);

    let o = optrack()
        .env("OPTRACK_THREADS", "zero")
        .args(["experiment", "rate", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);

    let file = tmp.path().join("file");
    fs::write(&file, "").unwrap();
    assert_eq!(code(&run(&["experiment", "rate"], &file.join("sub"))), 4);
}

#[test]
fn dt_sweep_writes_one_row_per_period() {
    let tmp = tempfile::tempdir().unwrap();
    let o = optrack()
        .env("OPTRACK_THREADS", "1")
        .args(["experiment", "dt-sweep", "--budget", "5000", "--dt", "0.005:0.03:0.001", "--duration", "0.2"])
        .arg("--out")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv(tmp.path().join("dt_sweep.csv"));
    assert_eq!(rows[0].join(","), "dt,M_per_step,nl2_error");
    assert_eq!(rows.len(), 27);
    assert_eq!(rows[6][0], "0.01");
    assert_eq!(rows[6][1], "25");
    assert!(manifest(tmp.path())["results"]["min_error"].is_number());
}

#[test]
fn rate_reports_six_rows_and_exponent() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["experiment", "rate", "--M", "1,2,5,10,20,50"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv(tmp.path().join("rate.csv"));
    assert_eq!(rows.len(), 7);
    let errors = column(&rows, "error");
    assert!(errors.windows(2).all(|w| w[1] <= w[0] + 1e-10));
    assert!(manifest(tmp.path())["results"]["psi_hat"].as_f64().unwrap() > 0.0);
}

#[test]
fn compare_error_grows_with_sampling_period() {
    let tmp = tempfile::tempdir().unwrap();
    let mut nl2 = Vec::new();
    for dt in ["0.01", "0.026"] {
        let dir = tmp.path().join(dt);
        let o = run(&["experiment", "compare", "--dt", dt], &dir);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        nl2.push(manifest(&dir)["results"]["nl2_error"].as_f64().unwrap());
        let rows = csv(dir.join("compare.csv"));
        assert_eq!(rows[0].join(","), "k,t_seconds,output_tracked,output_oracle,state_error,point_error");
        assert_eq!(csv(dir.join("tracked_trace.csv")).len(), rows.len());
        assert_eq!(csv(dir.join("oracle_trace.csv")).len(), rows.len());
    }
    assert!(nl2[0] < nl2[1], "{nl2:?}");
}
