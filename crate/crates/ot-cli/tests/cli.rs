use std::path::Path;
use std::process::Command;

fn ot() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ot"))
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_solve_certify_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let report = dir.path().join("report.json");
    let plan = dir.path().join("plan.json");

    let out = ot()
        .args(["gen", "--problem", "uniform-normal", "--n", "25", "--seed", "4"])
        .arg("--out")
        .arg(&inst)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = ot()
        .args(["solve", "--method", "gs-bcdns"])
        .arg("--input")
        .arg(&inst)
        .arg("--report")
        .arg(&report)
        .arg("--plan")
        .arg(&plan)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let r = read_json(&report);
    assert_eq!(r["schema_version"], 1);
    assert!(r["config"].is_object());
    assert!(r["result"]["certificate"]["min_reduced_cost"].as_i64().unwrap() >= 0);

    let out = ot()
        .arg("certify")
        .arg("--input")
        .arg(&inst)
        .arg("--plan")
        .arg(&plan)
        .arg("--report")
        .arg(dir.path().join("cert.json"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cert = read_json(&dir.path().join("cert.json"));
    assert_eq!(cert["feasible"], true);
    assert_eq!(cert["optimal"], true);
}

#[test]
fn solve_methods_agree_on_generated_instance() {
    let dir = tempfile::tempdir().unwrap();
    let mut objectives = Vec::new();
    for method in ["ns", "rs-bcdns", "gs-bcdns"] {
        let report = dir.path().join(format!("{method}.json"));
        let out = ot()
            .args(["solve", "--method", method, "--problem", "uniform-normal"])
            .args(["--n", "30", "--seed", "1"])
            .arg("--report")
            .arg(&report)
            .output()
            .unwrap();
        assert!(out.status.success(), "{method}: {}", String::from_utf8_lossy(&out.stderr));
        let r = read_json(&report);
        objectives.push(r["result"]["objective_scaled"].clone());
    }
    assert_eq!(objectives[0], objectives[1]);
    assert_eq!(objectives[0], objectives[2]);
}

#[test]
fn gs_with_s_but_no_t_is_a_usage_error() {
    let out = ot()
        .args(["solve", "--method", "gs-bcdns", "--n", "20", "--s", "0.1"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--t"), "stderr: {err}");
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let out = ot().args(["solve", "--n", "20"]).output().unwrap();
    assert!(!out.status.success());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_bench_experiment_is_a_usage_error() {
    let out = ot().args(["bench", "warp", "--n", "10"]).output().unwrap();
    assert!(!out.status.success());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unbalanced_raw_instance_names_the_marginals() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("bad.json");
    std::fs::write(
        &inst,
        r#"{"n":2,"m":2,"cost":[[0.0,1.0],[1.0,0.0]],"p":[0.7,0.5],"q":[0.5,0.5],"scale":100}"#,
    )
    .unwrap();
    let out = ot()
        .args(["solve", "--method", "ns"])
        .arg("--input")
        .arg(&inst)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unbalanced"), "stderr: {err}");
}

#[test]
fn bench_grid_emits_only_valid_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = ot()
        .args(["bench", "grid", "--n", "20", "--seed", "1"])
        .args(["--s-list", "0.1,0.8", "--t-list", "0.5,0.9"])
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("grid_results_20.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "problem,n,seed,s,t,outer_iterations,pivots,evals,objective_scaled,time_s"
    );
    // (0.1,0.5), (0.1,0.9), (0.8,0.9); (0.8,0.5) skipped.
    assert_eq!(lines.count(), 3);
}

#[test]
fn bench_gap_writes_one_trace_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let out = ot()
        .args(["bench", "gap", "--n", "16", "--seed", "2", "--eps", "1e-1,1e-2"])
        .args(["--budget-s", "10"])
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("gap_trace_gs-bcdns_exact.csv").exists());
    assert!(dir.path().join("gap_trace_sinkhorn_1e-1.csv").exists());
    assert!(dir.path().join("gap_trace_sinkhorn_1e-2.csv").exists());
}

#[test]
fn sinkhorn_solve_reports_feasible_rounding() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("sk.json");
    let out = ot()
        .args(["solve", "--method", "sinkhorn", "--n", "12", "--seed", "3"])
        .args(["--eps", "0.5", "--budget-s", "30"])
        .arg("--report")
        .arg(&report)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&report);
    assert_eq!(r["result"]["rounded_exactly_feasible"], true);
    assert_eq!(r["result"]["converged"], true);
}

#[test]
fn identical_config_and_seed_reproduce_csv_except_time() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let sub = dir.path().join(format!("run{run}"));
        std::fs::create_dir(&sub).unwrap();
        let out = ot()
            .args(["bench", "compare", "--n-list", "20,30", "--seed", "9"])
            .arg("--out-dir")
            .arg(&sub)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let csv =
            std::fs::read_to_string(sub.join("comparison_uniform-normal.csv")).unwrap();
        // Strip the time-dependent columns (time_s, speedup_vs_ns).
        let stable: Vec<String> = csv
            .lines()
            .map(|l| l.split(',').take(8).collect::<Vec<_>>().join(","))
            .collect();
        outputs.push(stable);
    }
    assert_eq!(outputs[0], outputs[1]);
}
