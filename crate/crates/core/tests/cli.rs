use std::path::Path;
use std::process::{Command, Output};

use subspace_perturb::golden;
use subspace_perturb::io::{save_matrix, save_projection_dir};
use subspace_perturb::linalg::DenseMatrix;
use subspace_perturb::sampling::SamplingPattern;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_subspace-perturb"));
    c.env("SUBSPACE_PERTURB_THREADS", "2");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn binary")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_pattern(dir: &Path, p: &SamplingPattern) -> String {
    let path = dir.join("pattern.json");
    std::fs::write(&path, p.to_json()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn gen_pattern_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    let out = run(&[
        "gen-pattern",
        "--type",
        "2",
        "--m",
        "10",
        "--r",
        "3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let p = SamplingPattern::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!((p.m(), p.r(), p.len()), (10, 3, 7));

    let out = run(&["validate", "--pattern", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["all_ok"], true);
    assert_eq!(v["c3_method"], "brute_force");
}

#[test]
fn validate_example_pattern() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_pattern(dir.path(), &golden::example_pattern());
    let out = run(&["validate", "--pattern", &path]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    for key in ["c1_ok", "c2_ok", "c3_ok", "all_ok"] {
        assert_eq!(v[key], true, "{key}");
    }
}

#[test]
fn failing_validation_still_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let p = SamplingPattern::new(5, 2, vec![vec![0, 1, 2]; 3]).unwrap();
    let path = write_pattern(dir.path(), &p);
    let out = run(&["validate", "--pattern", &path]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["c3_ok"], false);
    assert_eq!(v["violating_subset"], serde_json::json!([0, 1]));
}

#[test]
fn estimate_writes_basis() {
    let dir = tempfile::tempdir().unwrap();
    let pattern = write_pattern(dir.path(), &golden::example_pattern());
    let proj = dir.path().join("proj");
    save_projection_dir(&proj, "V", &golden::example_truth_bases()).unwrap();
    let out_path = dir.path().join("basis.csv");
    let out = run(&[
        "estimate",
        "--pattern",
        &pattern,
        "--projections",
        proj.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let basis = subspace_perturb::io::load_matrix(&out_path).unwrap();
    assert_eq!((basis.rows(), basis.cols()), (5, 2));
}

#[test]
fn estimate_rank_deficient_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = SamplingPattern::new(5, 2, vec![vec![0, 1, 2]; 3]).unwrap();
    let pattern = write_pattern(dir.path(), &p);
    let v = DenseMatrix::from_rows(&[[1.0, 1.0], [1.0, 2.0], [1.0, 3.0]]).unwrap();
    let proj = dir.path().join("proj");
    save_projection_dir(&proj, "V", &[v.clone(), v.clone(), v]).unwrap();
    let out = run(&[
        "estimate",
        "--pattern",
        &pattern,
        "--projections",
        proj.to_str().unwrap(),
        "--out",
        dir.path().join("b.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("IdentifiabilityFailure"));
}

#[test]
fn bound_json_with_and_without_truth() {
    let dir = tempfile::tempdir().unwrap();
    let pattern = write_pattern(dir.path(), &golden::example_pattern());
    let proj = dir.path().join("proj");
    save_projection_dir(&proj, "V", &golden::example_noisy_bases()).unwrap();
    let truth = dir.path().join("U.csv");
    save_matrix(&golden::example_basis(), &truth).unwrap();

    let out = run(&[
        "bound",
        "--pattern",
        &pattern,
        "--projections",
        proj.to_str().unwrap(),
        "--json",
    ]);
    assert!(out.status.success(), "{out:?}");
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["d_G"].is_null());
    assert!(v["epsilon"].is_null());
    assert!(v["bound"].is_null());
    assert!(v["sigma_B"].as_f64().unwrap() > 0.0);

    let out = run(&[
        "bound",
        "--pattern",
        &pattern,
        "--projections",
        proj.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
        "--epsilon",
        "0.1",
        "--json",
    ]);
    assert!(out.status.success(), "{out:?}");
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["epsilon"], 0.1);
    assert!((v["d_G"].as_f64().unwrap() - 0.29).abs() < 0.01);
    for key in ["epsilon", "delta", "sigma_B", "bound", "sqrt_r", "d_G"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn bound_reads_noise_directory() {
    let dir = tempfile::tempdir().unwrap();
    let ps = golden::example2_projections();
    let pattern = write_pattern(dir.path(), ps.pattern());
    let proj = dir.path().join("proj");
    save_projection_dir(&proj, "V", ps.v_list()).unwrap();
    let noise = dir.path().join("noise");
    save_projection_dir(&noise, "Z", ps.z_list().unwrap()).unwrap();
    let out = run(&[
        "bound",
        "--pattern",
        &pattern,
        "--projections",
        proj.to_str().unwrap(),
        "--noise",
        noise.to_str().unwrap(),
        "--json",
    ]);
    assert!(out.status.success(), "{out:?}");
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let eps = subspace_perturb::bounds::epsilon_of(ps.z_list().unwrap()).unwrap();
    assert!((v["epsilon"].as_f64().unwrap() - eps).abs() < 1e-12);
}

#[test]
fn sweep_noise_row_count_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = run(&[
            "sweep",
            "noise",
            "--m",
            "10",
            "--r",
            "7",
            "--trials",
            "1000",
            "--seed",
            "7",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{out:?}");
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 2001);
    assert_eq!(
        text.lines().next().unwrap(),
        "experiment,pattern,m,r,noise_std,trial,seed,epsilon,delta,sigma_B,error_dG,bound,sqrt_r,status"
    );
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(dir.path().join("a_agg.csv").exists());
}

#[test]
fn sweep_ambient_with_custom_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("amb.csv");
    let out = run(&[
        "sweep",
        "ambient",
        "--grid",
        "10:30:3",
        "--trials",
        "4",
        "--patterns",
        "omega1",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 * 4);
    let agg = std::fs::read_to_string(dir.path().join("amb_agg.csv")).unwrap();
    assert_eq!(agg.lines().count(), 1 + 3);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(
        run(&["sweep", "sideways", "--out", "x.csv"]).status.code(),
        Some(1)
    );
    assert_eq!(
        run(&["gen-pattern", "--type", "3", "--m", "5", "--r", "2"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run(&["validate", "--pattern", "/nonexistent.json"])
            .status
            .code(),
        Some(1)
    );
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "sweep",
        "subspace",
        "--grid",
        "3:60:5",
        "--out",
        dir.path().join("s.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid"));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn golden_subcommand_reports_both_examples() {
    let out = run(&["golden"]);
    assert!(out.status.success(), "{out:?}");
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["checks"]["example1_exact"], true);
    assert_eq!(v["checks"]["example2_d_G"], true);
    assert_eq!(v["checks"]["example2_bound_holds"], true);
    assert_eq!(v["published_bound"], 0.59);
}
