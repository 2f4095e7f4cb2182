use std::path::{Path, PathBuf};

use shadowfolk::folk::default_folk_theory;
use shadowfolk::graph::{posterior, Assignment, Network};
use shadowfolk::io::cli::{run, CliOutput, EXIT_IO, EXIT_MODEL, EXIT_OK, EXIT_USAGE};
use shadowfolk::io::parse_model;
use shadowfolk::sim::RunRecord;

fn models() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("models")
}

fn folk_path() -> String {
    models().join("default-folk.ftm").display().to_string()
}

fn cli(args: &[&str]) -> CliOutput {
    let mut full = vec!["shadowfolk"];
    full.extend_from_slice(args);
    run(full)
}

fn json(out: &CliOutput) -> serde_json::Value {
    assert_eq!(out.code, EXIT_OK, "stderr: {}", out.stderr);
    serde_json::from_str(&out.stdout).unwrap()
}

#[test]
fn validate_reports_size() {
    let out = cli(&["validate", &folk_path()]);
    assert_eq!(out.code, EXIT_OK);
    assert_eq!(out.stdout, "OK, 7 nodes, 7 active edges\n");
    let v = json(&cli(&["--format", "machine", "validate", &folk_path()]));
    assert_eq!(v["nodes"], 7);
    assert_eq!(v["active_edges"], 7);
}

#[test]
fn model_errors_exit_two_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.ftm");
    std::fs::write(&p, "model m\nnode A t,f latent fixed \"\"\ncpt A : 0.5 nope\n").unwrap();
    let out = cli(&["--format", "machine", "validate", p.to_str().unwrap()]);
    assert_eq!(out.code, EXIT_MODEL);
    let v: serde_json::Value = serde_json::from_str(&out.stderr).unwrap();
    assert_eq!(v["error"], "model");
    assert_eq!(v["diagnostics"][0]["line"], 3);
    assert_eq!(v["diagnostics"][0]["kind"], "bad_probability");

    // parses, but a row does not sum to one
    std::fs::write(&p, "model m\nnode A t,f latent fixed \"\"\ncpt A : 0.5 0.4\n").unwrap();
    let out = cli(&["validate", p.to_str().unwrap()]);
    assert_eq!(out.code, EXIT_MODEL);
    assert!(out.stderr.contains("0.9"), "{}", out.stderr);
}

#[test]
fn missing_files_exit_three() {
    let out = cli(&["validate", "/definitely/not/here.ftm"]);
    assert_eq!(out.code, EXIT_IO);
    assert!(out.stdout.is_empty());
}

#[test]
fn usage_errors_exit_four() {
    assert_eq!(cli(&["frobnicate"]).code, EXIT_USAGE);
    assert_eq!(cli(&["infer", &folk_path()]).code, EXIT_USAGE);
    assert_eq!(cli(&["infer", &folk_path(), "-q", "N4", "-e", "N6"]).code, EXIT_USAGE);
    assert_eq!(cli(&["simulate", "--n", "ten"]).code, EXIT_USAGE);
    assert_eq!(cli(&["intervene", "--applies-to", "nobody", "--do", "N1=false"]).code, EXIT_USAGE);
    assert_eq!(cli(&["intervene"]).code, EXIT_USAGE);
    assert_eq!(cli(&["--help"]).code, EXIT_OK);
}

#[test]
fn infer_matches_the_library() {
    let v = json(&cli(&["--format", "machine", "infer", &folk_path(), "-q", "N4", "-e", "N6=true,N2=false"]));
    let ev = Assignment::new().with("N6", "true").with("N2", "false");
    let want = posterior(default_folk_theory().network(), &ev, "N4").unwrap();
    assert_eq!(v["probs"][0].as_f64().unwrap(), want.probs[0]);
    assert_eq!(v["probs"][1].as_f64().unwrap(), want.probs[1]);

    let text = cli(&["infer", &folk_path(), "-q", "N4"]);
    assert!(text.stdout.starts_with("P(N4)\n"));
    assert!(text.stdout.contains("0.154323"));
}

#[test]
fn infer_reports_unknown_names() {
    let out = cli(&["infer", &folk_path(), "-q", "N99"]);
    assert_eq!(out.code, EXIT_MODEL);
    let out = cli(&["infer", &folk_path(), "-q", "N4", "-e", "N6=maybe"]);
    assert_eq!(out.code, EXIT_MODEL);
}

#[test]
fn infer_applies_edits_first() {
    let v =
        json(&cli(&["--format", "machine", "infer", &folk_path(), "-q", "N4", "--prior", "N1=0,1", "-e", "N6=true"]));
    assert_eq!(v["probs"][0].as_f64().unwrap(), 0.0);
    let v = json(&cli(&["--format", "machine", "infer", &folk_path(), "-q", "N5", "--do", "N6=true"]));
    let prior = posterior(default_folk_theory().network(), &Assignment::new(), "N5").unwrap();
    assert!((v["probs"][0].as_f64().unwrap() - prior.probs[0]).abs() < 1e-12);
}

#[test]
fn intervene_edits_a_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("edited.ftm");
    let cpt = dir.path().join("n7.cpt");
    std::fs::write(
        &cpt,
        "cpt N7 | N4 N5 : true,true= 0.9 0.1\ncpt N7 | N4 N5 : true,false= 0.8 0.2\n\
         cpt N7 | N4 N5 : false,true= 0.7 0.3\ncpt N7 | N4 N5 : false,false= 0.01 0.99\n",
    )
    .unwrap();
    let out = cli(&[
        "intervene",
        &folk_path(),
        "--do",
        "N5=false",
        "--cpt-file",
        cpt.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    let net = Network::build(parse_model(&std::fs::read_to_string(&out_path).unwrap()).unwrap()).unwrap();
    let n5 = net.node_index("N5").unwrap();
    assert!(net.is_root(n5));
    assert_eq!(net.table(n5), &[0.0, 1.0]);
    assert_eq!(net.spec().cpt("N7").unwrap().rows[3], vec![0.01, 0.99]);

    // to stdout, and parseable
    let out = cli(&["intervene", &folk_path(), "--prior", "N1=0.5,0.5"]);
    assert_eq!(out.code, EXIT_OK);
    assert!(parse_model(&out.stdout).is_ok());
    assert!(out.stdout.contains("cpt N1 : 0.5 0.5"));
}

#[test]
fn intervene_evaluates_against_the_baseline() {
    let v =
        json(&cli(&["--format", "machine", "intervene", "--prior", "N1=0,1", "--applies-to", "folk", "--n", "20000"]));
    assert_eq!(v["post"]["suspicious"], 0);
    assert!(v["deltas"]["false_suspicion_rate"].as_f64().unwrap() < 0.0);
    assert_eq!(v["intervention"]["kind"], "set-prior");
    // non-intervenable targets are refused in evaluation mode
    let out = cli(&["intervene", "--do", "N4=false", "--n", "100"]);
    assert_eq!(out.code, EXIT_MODEL);
    assert!(out.stderr.contains("intervenable"));
}

#[test]
fn simulate_writes_a_run_record() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("run.json");
    let out = cli(&["simulate", "--n", "5000", "--seed", "4", "--workers", "2", "--out", p.to_str().unwrap()]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    assert!(out.stdout.contains("n=5000"));
    let rec: RunRecord = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(rec.settings.n, 5000);
    assert_eq!(rec.stats.seed, 4);
    let v = json(&cli(&["--format", "machine", "simulate", "--n", "5000", "--seed", "4", "--workers", "1"]));
    assert_eq!(v["stats"], serde_json::to_value(&rec.stats).unwrap());
}

#[test]
fn sweep_ranks_the_shipped_catalog() {
    let v = json(&cli(&["--format", "machine", "sweep", "--n", "20000"]));
    let reports = v.as_array().unwrap();
    assert_eq!(reports.len(), 5);
    let rates: Vec<f64> = reports.iter().map(|r| r["post"]["false_suspicion_rate"].as_f64().unwrap()).collect();
    assert!(rates.windows(2).all(|w| w[0] <= w[1]));
    let text = cli(&["sweep", "--n", "2000"]);
    assert!(text.stdout.contains("1. attest-absence"));
}

#[test]
fn calibrate_writes_fitted_models() {
    let dir = tempfile::tempdir().unwrap();
    let settings = dir.path().join("settings.json");
    std::fs::write(
        &settings,
        r#"{"params": ["world:N5:prior", "folk:N3:prior"], "iterations": 1, "grid_points": 3, "n": 2000, "seed": 1}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("fit");
    let out = cli(&[
        "--format",
        "machine",
        "calibrate",
        "--settings",
        settings.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    let v = json(&out);
    let trace: Vec<f64> = v["loss_trace"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(trace.windows(2).all(|w| w[1] < w[0]));
    for f in ["folk.ftm", "world.ftm", "fit-report.json"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    assert!(parse_model(&std::fs::read_to_string(out_dir.join("world.ftm")).unwrap()).is_ok());

    std::fs::write(&settings, r#"{"params": [], "n": 10, "seed": 1}"#).unwrap();
    assert_eq!(cli(&["calibrate", "--settings", settings.to_str().unwrap()]).code, EXIT_MODEL);
}
