mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gameid::identification::{project, FamilyKind, InequalityFamily, Sense, SolverSettings};
use gameid::io::read_results;

fn examples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples")
}

fn gameid(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gameid")).args(args).current_dir(dir).output().unwrap()
}

fn spec_arg() -> String {
    examples().join("entry2.spec").display().to_string()
}

fn ccp_arg(name: &str) -> String {
    examples().join(name).display().to_string()
}

#[test]
fn project_all_coordinates_on_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let (spec, ccp) = (spec_arg(), ccp_arg("table1.ccp.csv"));
    let out = gameid(&["project", "--spec", &spec, "--ccp", &ccp, "--family", "sharp", "--all-coords", "--out", "r.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_results(std::fs::File::open(dir.path().join("r.csv")).unwrap()).unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r.coordinate.as_str()).collect();
    assert_eq!(names, ["beta1", "beta2", "delta1", "delta2"]);
    assert!(rows.iter().all(|r| r.status == "optimal" && r.quantity == "projection"));
    // the command reports what the library computes
    let (g, c) = common::exact_table();
    let fam = InequalityFamily::resolve(&g, FamilyKind::Sharp(4), None).unwrap();
    let settings = SolverSettings { verify_bisection: false, ..SolverSettings::default() };
    for (k, r) in rows.iter().enumerate() {
        let mut p = vec![0.0; 4];
        p[k] = 1.0;
        let (lo, _) = project(&g, &c, &fam, &p, Sense::Min, &settings).unwrap();
        let (hi, _) = project(&g, &c, &fam, &p, Sense::Max, &settings).unwrap();
        assert!((r.lower - lo).abs() < 1e-6 && (r.upper - hi).abs() < 1e-6, "{r:?} vs [{lo}, {hi}]");
    }
    assert!(dir.path().join("r.csv.manifest.json").exists());
}

#[test]
fn origin_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let spec = spec_arg();
    let rounded = ccp_arg("table1_rounded.ccp.csv");
    let out = gameid(&["member", "--spec", &spec, "--ccp", &rounded, "--theta", "0,0,0,0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("Q = 0.195"), "{stderr}");
    let rows = read_results(out.stdout.as_slice()).unwrap();
    // at θ = 0 only the (0,1) and (1,0) bounds bind: Q = log(0.304 / 0.25)
    assert!((rows[0].lower - (0.304f64 / 0.25).ln()).abs() < 1e-12);
    assert!((rows[0].lower - 0.196).abs() < 1e-3);

    let exact = ccp_arg("table1.ccp.csv");
    let out = gameid(&["member", "--spec", &spec, "--ccp", &exact, "--theta", "0,0,0,0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let q = read_results(out.stdout.as_slice()).unwrap()[0].lower;
    assert!((q - (common::EXACT_CCP[1] / 0.25).ln()).abs() < 1e-12);

    let out = gameid(&["member", "--spec", &spec, "--ccp", &exact, "--theta", "0,0,-0.5,-0.5"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn empty_simulation_writes_header() {
    let dir = tempfile::tempdir().unwrap();
    let spec = spec_arg();
    let out = gameid(&["simulate", "--spec", &spec, "--theta", "0,0,-0.5,-0.5", "--n", "0"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "market_id,x_bin,y_1,y_2\n");
}

#[test]
fn usage_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    let out = gameid(&["project", "--no-such-flag"], dir.path());
    assert_eq!(out.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(gameid(&["frobnicate"], dir.path()).status.code(), Some(64));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let ccp = ccp_arg("table1.ccp.csv");
    let out = gameid(&["member", "--spec", "missing.spec", "--ccp", &ccp, "--theta", "0,0,0,0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let spec = spec_arg();
    let out = gameid(&["member", "--spec", &spec, "--ccp", &ccp, "--theta", "0,0,0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pipeline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = spec_arg();
    let run = || {
        let steps: [&[&str]; 3] = [
            &["simulate", "--spec", &spec, "--theta", "0,0,-0.5,-0.5", "--n", "3000", "--seed", "8", "--out", "data.csv"],
            &["ccp", "--spec", &spec, "--data", "data.csv", "--band-out", "band.csv", "--out", "ccp.csv"],
            &["confproject", "--spec", &spec, "--data", "data.csv", "--family", "abj", "--coord", "delta1", "--bound", "delta1=-5,0", "--out", "ci.csv"],
        ];
        for args in steps {
            let out = gameid(args, dir.path());
            assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        }
        ["data.csv", "ccp.csv", "band.csv", "ci.csv", "ci.csv.manifest.json", "data.csv.manifest.json"]
            .map(|f| std::fs::read(dir.path().join(f)).unwrap())
    };
    let first = run();
    let second = run();
    assert_eq!(first, second);
    let ci = read_results(first[3].as_slice()).unwrap();
    assert_eq!(ci.len(), 1);
    assert!(ci[0].lower < -0.95 && ci[0].upper <= 0.0, "{ci:?}");
    let manifest: serde_json::Value = serde_json::from_slice(&first[4]).unwrap();
    assert_eq!(manifest["command"], "confproject");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}
