use std::fs;
use std::path::Path;

use chainlb_bench::cli::{execute, Cli, EXIT_FAILURE, EXIT_REJECTED};
use chainlb_bench::format::{PointRecord, RunDoc};
use clap::Parser;

fn run(args: &[&str]) -> (i32, String) {
    let cli = Cli::try_parse_from(std::iter::once("chainlb").chain(args.iter().copied())).unwrap();
    let mut out = Vec::new();
    let code = execute(cli, &mut out).unwrap();
    (code, String::from_utf8(out).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn make_instance_emits_versioned_json() {
    let (code, out) = run(&["make-instance", "--family", "CVX", "--n", "16", "--sigma", "1", "--eps", "0.0009765625"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["schema"], "chainlb.instance/v1");
    assert_eq!(v["instance"]["family"], "CVX");
    assert_eq!(v["instance"]["meta"]["horizon"], 2);
}

#[test]
fn precondition_rejection_exits_nonzero() {
    let (code, out) = run(&["make-instance", "--family", "AVG-NC", "--n", "16", "--sigma", "0.1", "--eps", "0.1"]);
    assert_eq!(code, EXIT_REJECTED);
    assert!(out.contains("hypothesis"), "{out}");
}

#[test]
fn gd_on_omega_needs_half_n_calls() {
    // n = 64, target Δ/8: GD gathers a full gradient (64 calls) before moving
    let (code, out) = run(&["run", "--family", "OMEGA-N", "--n", "64", "--eps", "0.125", "--solver", "gd"]);
    assert_eq!(code, 0, "{out}");
    let k: u64 = out.split("ifo_to_target ").nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!(k >= 32, "{out}");
}

#[test]
fn run_audit_and_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = run(&[
        "run", "--family", "IND-NC", "--n", "8", "--sigma", "0.1", "--eps", "5e-4", "--solver", "svrg", "--audit",
        "--budget-multiplier", "2", "--out", p(dir.path()),
    ]);
    assert_eq!(code, 0, "{out}");
    for f in ["instance.json", "run.json", "trace.jsonl", "points.jsonl"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let (code, out) = run(&["audit", p(dir.path())]);
    assert_eq!(code, 0, "{out}");
    assert!(out.ends_with("PASS\n"));

    // move the iterate of one record off the span: the audit must flag exactly that step
    let trace: Vec<serde_json::Value> =
        fs::read_to_string(dir.path().join("trace.jsonl")).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let run_doc = RunDoc::from_json(&fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert!(run_doc.audit.unwrap().passed());
    let target = trace.iter().filter(|r| !r["iterate_id"].is_null()).nth(5).unwrap();
    let t = target["t"].as_u64().unwrap();
    let points_text = fs::read_to_string(dir.path().join("points.jsonl")).unwrap();
    let mut points: Vec<PointRecord> = points_text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let fresh = points.iter().map(|p| p.id).max().unwrap() + 1;
    let d = points[0].point.len();
    points.push(PointRecord { id: fresh, point: (0..d).map(|k| ((k * 7 + 3) % 11) as f64 - 5.0).collect() });
    let mut trace = trace;
    for r in trace.iter_mut() {
        if r["t"].as_u64() == Some(t) {
            r["iterate_id"] = serde_json::json!(fresh);
        }
    }
    let tampered = dir.path().join("tampered");
    fs::create_dir_all(&tampered).unwrap();
    for f in ["instance.json", "run.json"] {
        fs::copy(dir.path().join(f), tampered.join(f)).unwrap();
    }
    fs::write(tampered.join("trace.jsonl"), trace.iter().map(|r| r.to_string() + "\n").collect::<String>()).unwrap();
    fs::write(
        tampered.join("points.jsonl"),
        points.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect::<String>(),
    )
    .unwrap();
    let (code, out) = run(&["audit", p(&tampered)]);
    assert_eq!(code, EXIT_FAILURE, "{out}");
    let flagged: Vec<&str> = out.lines().filter(|l| l.starts_with("span violation")).collect();
    assert_eq!(flagged.len(), 1, "{out}");
    assert!(flagged[0].starts_with(&format!("span violation at step {t}:")), "{out}");
}

#[test]
fn audit_without_points_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    run(&["run", "--family", "CVX", "--n", "4", "--eps", "1e-4", "--solver", "gd", "--out", p(dir.path())]);
    assert!(!dir.path().join("points.jsonl").exists());
    let cli = Cli::try_parse_from(["chainlb", "audit", p(dir.path())]).unwrap();
    assert!(execute(cli, &mut Vec::new()).is_err());
}

#[test]
fn sweep_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    fs::write(
        &cfg,
        r#"{"sweeps": [
            {"family": "AVG-NC", "n": [4, 8], "L": [1.0], "sigma": [0.04], "eps": [6e-4],
             "solvers": [{"name": "svrg"}, {"name": "spider", "hyper": {"batch": 2}}], "seeds": [1, 2]},
            {"family": "CVX", "n": [4], "L": [1.0], "B": [1.0], "eps": [1e-4, 1.0],
             "solvers": [{"name": "agd"}], "seeds": [5]}
        ]}"#,
    )
    .unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let (c1, out1) = run(&["sweep", "--config", p(&cfg), "--out", p(&a), "--jobs", "2"]);
    let (c2, _) = run(&["sweep", "--config", p(&cfg), "--out", p(&b), "--jobs", "1"]);
    assert_eq!((c1, c2), (0, 0), "{out1}");
    let ra = fs::read(a.join("results.csv")).unwrap();
    assert_eq!(ra, fs::read(b.join("results.csv")).unwrap());
    let text = String::from_utf8(ra).unwrap();
    assert!(text.starts_with("family,n,L,sigma,delta,eps,solver,seed,ifo_to_target,lower_bound,ratio,status\n"));
    assert_eq!(text.lines().count(), 1 + 8 + 1);
    // ε = 1 violates the convex precondition and is skipped with a reason
    assert!(out1.contains("skipped CVX n=4") && out1.contains("1 skipped"), "{out1}");
    let plot: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("plot.json")).unwrap()).unwrap();
    assert_eq!(plot["schema"], "chainlb.plot/v1");
    assert_eq!(plot["plots"].as_array().unwrap().len(), 2);
}

#[test]
fn unknown_hyperparameter_is_an_error() {
    let cli = Cli::try_parse_from(["chainlb", "sweep", "--family", "CVX", "--n", "4", "--eps", "1e-4", "--solver", "gd"]).unwrap();
    assert_eq!(execute(cli, &mut Vec::new()).unwrap(), 0);
    let cli = Cli::try_parse_from(["chainlb", "run", "--family", "CVX", "--n", "4", "--eps", "1e-4", "--hyper", "tau=1"]).unwrap();
    assert!(execute(cli, &mut Vec::new()).is_err());
}

#[test]
fn fit_analytic_and_from_csv() {
    let (code, out) = run(&["fit", "--family", "CVX", "--n", "16,64,256,1024", "--eps", "1e-10"]);
    assert_eq!(code, 0);
    assert!(out.contains("slope 0.74") || out.contains("slope 0.75"), "{out}");
    let (code, out) = run(&["fit", "--family", "IND-NC", "--n", "16", "--sigma", "0.1", "--eps", "1e-4,5e-5,2e-5,1e-5"]);
    assert_eq!(code, 0);
    assert!(out.contains("vs Eps: slope -2.00"), "{out}");
    let cli = Cli::try_parse_from(["chainlb", "fit", "--family", "CVX", "--n", "16,64,256", "--eps", "1e-10"]).unwrap();
    let err = execute(cli, &mut Vec::new()).unwrap_err();
    assert!(err.to_string().contains("at least 4 distinct"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run(&[
        "sweep", "--family", "OMEGA-N", "--n", "8,16,32,64", "--eps", "0.1", "--solver", "gd,svrg", "--out", p(dir.path()),
    ]);
    assert_eq!(code, 0);
    let (code, out) = run(&["fit", "--input", p(&dir.path().join("results.csv")), "--out", p(dir.path())]);
    assert_eq!(code, 0);
    // Ω(n) bound ⌈n/2⌉: slope exactly 1
    assert!(out.contains("OMEGA-N L=1 sigma=1 delta=1 eps=0.1 solver=gd | lower_bound vs N: slope 1.0000"), "{out}");
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("fit.json")).unwrap()).unwrap();
    assert_eq!(doc["schema"], "chainlb.fit/v1");
}

#[test]
fn verify_quick_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out) = run(&["verify", "--quick", "--out", p(dir.path())]);
    assert_eq!(code, 0, "{out}");
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 17);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(v["schema"], "chainlb.verify/v1");
    assert!(v["cases"][0]["elapsed_ms"].is_number());
    assert_eq!(v["cases"][0]["status"], "Pass");
}
