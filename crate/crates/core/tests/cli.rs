//! Black-box tests of the `hse` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hse_core::analysis::costs;
use hse_core::analysis::oracle::brute_force_front;
use hse_core::exemplars::fev_space;
use hse_core::runner::load_store;

fn hse(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hse"))
        .current_dir(dir)
        .env_remove("HSE_SEED")
        .args(args)
        .output()
        .expect("hse starts")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = hse(dir, args);
    assert!(out.status.success(), "hse {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

fn fev_results(dir: &Path, jobs: &str, out: &str) {
    ok(dir, &["space", "builtin", "fev", "--out", "space.json"]);
    ok(dir, &["plan", "--space", "space.json", "--n", "64", "--seed", "5", "--out", "plan.csv"]);
    ok(
        dir,
        &["run", "--space", "space.json", "--plan", "plan.csv", "--sim", "builtin:fev", "--jobs", jobs, "--out", out],
    );
}

#[test]
fn space_validate_exit_codes() {
    let t = tempfile::tempdir().unwrap();
    ok(t.path(), &["space", "builtin", "yaw", "--out", "yaw.json"]);
    assert!(ok(t.path(), &["space", "validate", "yaw.json"]).starts_with("ok:"));

    let broken = read(t.path(), "yaw.json").replace("\"4WD\"", "\"2WD\"");
    fs::write(t.path().join("broken.json"), broken).unwrap();
    let out = hse(t.path(), &["space", "validate", "broken.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("duplicate label") && err.contains("error[validation]"), "{err}");

    fs::write(t.path().join("garbage.json"), "{ not json").unwrap();
    assert_eq!(hse(t.path(), &["space", "validate", "garbage.json"]).status.code(), Some(2));
    assert_eq!(hse(t.path(), &["space", "validate", "missing.json"]).status.code(), Some(1));
    assert_eq!(hse(t.path(), &["plan"]).status.code(), Some(2));
    assert_eq!(hse(t.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn plan_is_byte_identical_and_seed_precedence_holds() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    ok(d, &["space", "builtin", "fev", "--out", "space.json"]);
    ok(d, &["plan", "--space", "space.json", "--n", "20", "--seed", "3", "--out", "a.csv"]);
    ok(d, &["plan", "--space", "space.json", "--n", "20", "--seed", "3", "--out", "b.csv"]);
    assert_eq!(read(d, "a.csv"), read(d, "b.csv"));
    assert_eq!(read(d, "a.csv.meta.json"), read(d, "b.csv.meta.json"));

    let with_env = |seed_flag: Option<&str>, out: &str| {
        let mut args = vec!["plan", "--space", "space.json", "--n", "20", "--out", out];
        if let Some(s) = seed_flag {
            args.extend(["--seed", s]);
        }
        let o =
            Command::new(env!("CARGO_BIN_EXE_hse")).current_dir(d).env("HSE_SEED", "3").args(&args).output().unwrap();
        assert!(o.status.success());
    };
    with_env(None, "env.csv");
    assert_eq!(read(d, "env.csv"), read(d, "a.csv"));
    with_env(Some("4"), "flag.csv");
    assert_ne!(read(d, "flag.csv"), read(d, "a.csv"));
    ok(d, &["plan", "--space", "space.json", "--n", "20", "--seed", "4", "--out", "four.csv"]);
    assert_eq!(read(d, "flag.csv"), read(d, "four.csv"));

    let bad = Command::new(env!("CARGO_BIN_EXE_hse"))
        .current_dir(d)
        .env("HSE_SEED", "x")
        .args(["plan", "--space", "space.json", "--n", "5", "--out", "x.csv"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(!d.join("x.csv").exists());
}

#[test]
fn run_fit_pareto_are_deterministic_across_job_counts() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    fev_results(d, "1", "r1.csv");
    ok(
        d,
        &[
            "run",
            "--space",
            "space.json",
            "--plan",
            "plan.csv",
            "--sim",
            "builtin:fev",
            "--jobs",
            "8",
            "--out",
            "r8.csv",
        ],
    );
    let space = fev_space();
    let s1 = load_store(&d.join("r1.csv"), &space).unwrap();
    let s8 = load_store(&d.join("r8.csv"), &space).unwrap();
    assert_eq!(s1.canonical_csv(), s8.canonical_csv());

    for (results, model) in [("r1.csv", "m1.json"), ("r8.csv", "m8.json")] {
        ok(
            d,
            &[
                "fit",
                "--space",
                "space.json",
                "--results",
                results,
                "--family",
                "poly",
                "--degree",
                "2",
                "--out",
                model,
            ],
        );
    }
    assert_eq!(read(d, "m1.json"), read(d, "m8.json"));
    for (model, front) in [("m1.json", "f1.csv"), ("m8.json", "f8.csv")] {
        ok(d, &["pareto", "--space", "space.json", "--model", model, "--levels", "6", "--out", front]);
    }
    assert_eq!(read(d, "f1.csv"), read(d, "f8.csv"));
}

#[test]
fn observed_front_rows_pass_the_oracle_filter() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    fev_results(d, "4", "results.csv");
    ok(
        d,
        &[
            "pareto",
            "--space",
            "space.json",
            "--results",
            "results.csv",
            "--out",
            "front.csv",
            "--plot",
            "front.svg",
            "--tradeoff",
            "trade.csv",
        ],
    );
    let space = fev_space();
    let store = load_store(&d.join("results.csv"), &space).unwrap();
    let recs: Vec<_> = store.ok_records().collect();
    let cost: Vec<Vec<f64>> =
        recs.iter().map(|r| costs(&r.targets.as_ref().unwrap().0, &space.orientations())).collect();
    let keys: Vec<usize> = recs.iter().map(|r| r.run_id).collect();
    let expected: Vec<usize> = brute_force_front(&cost, &keys).into_iter().map(|i| keys[i]).collect();
    let got: Vec<usize> =
        read(d, "front.csv").lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(got, expected);
    assert!(read(d, "front.svg").starts_with("<svg"));
    assert!(read(d, "trade.csv").starts_with("rank,id,t_a50,E_c,d(E_c)/d(t_a50)"));
    assert!(read(d, "front.csv.meta.json").contains("\"results\""));
}

#[test]
fn resume_completes_a_truncated_store() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    fev_results(d, "2", "full.csv");
    let full = read(d, "full.csv");
    let lines: Vec<&str> = full.lines().collect();
    // Header plus ten rows and a torn eleventh.
    let partial = format!("{}\n{}", lines[..11].join("\n"), &lines[11][..10]);
    fs::write(d.join("part.csv"), partial).unwrap();
    fs::copy(d.join("full.csv.meta.json"), d.join("part.csv.meta.json")).unwrap();
    let out =
        ok(d, &["run", "--space", "space.json", "--plan", "plan.csv", "--sim", "fev", "--out", "part.csv", "--resume"]);
    assert!(out.contains("resumed 10 evaluated 54"), "{out}");
    let space = fev_space();
    assert_eq!(
        load_store(&d.join("part.csv"), &space).unwrap().canonical_csv(),
        load_store(&d.join("full.csv"), &space).unwrap().canonical_csv()
    );
}

#[test]
fn usage_and_runtime_errors_are_categorized() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    fev_results(d, "1", "results.csv");
    let out = hse(d, &["run", "--space", "space.json", "--plan", "plan.csv", "--sim", "nope", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[usage]"));
    assert!(!d.join("x.csv").exists());

    let out = hse(
        d,
        &[
            "fit",
            "--space",
            "space.json",
            "--results",
            "results.csv",
            "--family",
            "poly",
            "--degree",
            "4",
            "--out",
            "m.json",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error[fit]") && err.contains("sample size"), "{err}");
    assert!(!d.join("m.json").exists());

    let out = hse(
        d,
        &["pareto", "--space", "space.json", "--results", "results.csv", "--targets", "speed", "--out", "f.csv"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.join("f.csv").exists());

    // Every run fails: the guard aborts with a simulation error.
    ok(d, &["space", "builtin", "yaw", "--out", "yaw.json"]);
    ok(d, &["plan", "--space", "yaw.json", "--n", "8", "--seed", "1", "--out", "yplan.csv"]);
    let out = hse(d, &["run", "--space", "yaw.json", "--plan", "yplan.csv", "--sim", "builtin:echo", "--out", "y.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[simulation]"));
}

fn write_project(dir: &Path, exemplar: &str, extra: &str) -> PathBuf {
    ok(dir, &["space", "builtin", exemplar, "--out", "space.json"]);
    let cfg = format!(
        r#"{{
  "space": "space.json",
  "plan": "plan.csv",
  "results": "results.csv",
  "model": "model.json",
  "simulator": "builtin:{exemplar}",
  "seed": 7,
  "n": 64{extra}
}}"#
    );
    let p = dir.join("project.json");
    fs::write(&p, cfg).unwrap();
    p
}

#[test]
fn report_bundles_csvs_svgs_and_summary() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    write_project(
        d,
        "yaw",
        r#",
  "report": {"compare_by": "drive", "use_case": "r=100,a_x=1",
             "potential": {"sweep": "K", "grid": "0:300000:7", "target": "gain_stab", "group_by": "drive", "samples": 32}}"#,
    );
    let summary = ok(d, &["report", "--project", "project.json", "--out", "report"]);
    for f in [
        "summary.txt",
        "front_observed.csv",
        "front_drive_2WD.csv",
        "front_drive_4WD.csv",
        "front_surrogate.csv",
        "fronts.svg",
        "meta.csv",
        "envelope.csv",
        "envelope.svg",
        "model_validation.csv",
    ] {
        assert!(d.join("report").join(f).exists(), "{f} missing\n{summary}");
        assert!(d.join("report").join(format!("{f}.meta.json")).exists());
    }
    assert_eq!(read(&d.join("report"), "summary.txt"), summary);
    let first = fs::read(d.join("report/envelope.csv")).unwrap();
    ok(d, &["report", "--project", "project.json", "--out", "again"]);
    assert_eq!(fs::read(d.join("again/envelope.csv")).unwrap(), first);
    assert_eq!(read(d, "report/summary.txt"), read(d, "again/summary.txt"));
}

#[test]
fn refine_writes_trace_and_final_artifacts() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    write_project(
        d,
        "fev",
        r#",
  "model_spec": {"family": "polynomial", "degree": 2},
  "policy": {"accuracy_threshold": 0.01, "max_iterations": 2}"#,
    );
    let out = ok(d, &["refine", "--config", "project.json"]);
    let trace = read(d, "refine/trace.csv");
    assert!(trace.starts_with("iteration,action,n_samples,loocv_rmse:t_a50,loocv_rmse:E_c,accuracy,space_hash\n"));
    assert_eq!(trace.lines().count(), 4, "{out}");
    assert!(trace.contains(",resample,") && trace.contains(",respace,"));
    for f in ["space.json", "plan.csv", "results.csv", "model.json"] {
        assert!(d.join("refine").join(f).exists());
    }
    ok(d, &["refine", "--config", "project.json", "--out", "again"]);
    assert_eq!(trace, read(d, "again/trace.csv"));
    assert_eq!(read(d, "refine/model.json"), read(d, "again/model.json"));
}

#[test]
fn meta_opt_lists_every_candidate() {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    fev_results(d, "2", "results.csv");
    let out = ok(
        d,
        &["meta-opt", "--space", "space.json", "--results", "results.csv", "--out", "meta.csv", "--plot", "meta.svg"],
    );
    assert_eq!(out.lines().count(), 8);
    assert!(out.contains("poly-p1,polynomial,") && out.contains("kriging-nugget1e-6,kriging,"));
    assert!(out.lines().skip(1).any(|l| l.contains(",true,")));
}
