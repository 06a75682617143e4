use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bicluster")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn simulate(dir: &Path, study: &str, seed: &str) {
    let out = bin(&["simulate", "--study", study, "--replicates", "1", "--seed", seed, "--output", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

fn small_fit(input: &Path, output: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
        "--models",
        "CCCC,UUCU,UUUU",
        "--k-max",
        "3",
        "--q-max",
        "3",
    ];
    args.extend_from_slice(extra);
    bin(&args)
}

#[test]
fn fit_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "1", "3");
    let out_dir = dir.path().join("out");
    let out = small_fit(&dir.path().join("rep1_data.csv"), &out_dir, &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    let best = &report["best"];
    assert_eq!((best["model"].as_str().unwrap(), best["k"].as_u64().unwrap()), ("CCCC", 3));
    assert_eq!(report["ranked"][0], *best);
    for name in ["row_labels.csv", "loglik_trace.csv", "col_labels_k3.csv", "heatmap_sigma_k3.csv"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    assert!(!out_dir.join("col_labels_k4.csv").exists());

    let rows = std::fs::read_to_string(out_dir.join("row_labels.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1001);
    assert!(rows.starts_with("id,label\n1,"));
    let heat = std::fs::read_to_string(out_dir.join("heatmap_sigma_k1.csv")).unwrap();
    assert_eq!(heat.lines().next().unwrap(), "variable,V1,V2,V3,V4,V5,V6,V7,V8");
    assert_eq!(heat.lines().count(), 9);

    let truth = dir.path().join("rep1_truth.csv");
    let ev = bin(&["evaluate", out_dir.join("row_labels.csv").to_str().unwrap(), truth.to_str().unwrap()]);
    assert_eq!(code(&ev), 0);
    let ari: f64 = String::from_utf8(ev.stdout).unwrap().trim().parse().unwrap();
    assert!(ari > 0.95);
}

#[test]
fn report_matches_schema() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "2", "1");
    let out_dir = dir.path().join("out");
    let out = small_fit(&dir.path().join("rep1_data.csv"), &out_dir, &["--cap", "12"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let schema: serde_json::Value =
        serde_json::from_str(include_str!("../schema/report.schema.json")).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).unwrap();
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    if let Err(errors) = compiled.validate(&report) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("schema violations: {msgs:?}");
    }
    assert_eq!(report["grid"]["candidates"], 12);
    let mut broken = report.clone();
    broken["best"]["model"] = "XYZ1".into();
    assert!(!compiled.is_valid(&broken));
}

#[test]
fn reruns_and_worker_counts_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "2", "6");
    let input = dir.path().join("rep1_data.csv");
    let mut reports = Vec::new();
    for (i, workers) in ["1", "1", "3"].iter().enumerate() {
        let out_dir = dir.path().join(format!("out{i}"));
        let out = small_fit(&input, &out_dir, &["--workers", workers, "--seed", "17"]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        reports.push(std::fs::read(out_dir.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[0], reports[2]);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "1", "2");
    let cfg = dir.path().join("run.toml");
    let out_dir = dir.path().join("out");
    write(
        &cfg,
        &format!(
            "input = {:?}\noutput = {:?}\nmodels = [\"CCCC\"]\nk_min = 2\nk_max = 2\nq_max = 2\nseed = 5\n",
            dir.path().join("rep1_data.csv"),
            out_dir
        ),
    );
    let out = bin(&["fit", "--config", cfg.to_str().unwrap(), "--k-max", "3", "--k-min", "3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["grid"]["k_min"], 3);
    assert_eq!(report["grid"]["q_max"], 2);
    assert_eq!(report["grid"]["seed"], 5);

    write(&cfg, "inptu = \"typo.csv\"\n");
    assert_eq!(code(&bin(&["fit", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn legacy_grid_uses_fixed_t() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), "1", "8");
    let out_dir = dir.path().join("out");
    let input = dir.path().join("rep1_data.csv");
    let out = bin(&[
        "fit", "--legacy", "--input", input.to_str().unwrap(), "--output", out_dir.to_str().unwrap(),
        "--k-max", "3", "--q-max", "3",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["grid"]["models"].as_array().unwrap().len(), 8);
    for entry in report["ranked"].as_array().unwrap() {
        assert_eq!(entry["fixed_t"], true);
        assert_eq!(entry["model"].as_str().unwrap().len(), 3);
    }
    let t = &report["best_params"]["components"][0]["t"];
    assert!(t.as_array().unwrap().iter().all(|x| x.as_f64() == Some(1.0)));
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let ragged = dir.path().join("ragged.csv");
    write(&ragged, "a,b\n1,2\n3\n");
    let out = small_fit(&ragged, &dir.path().join("o"), &[]);
    assert_eq!(code(&out), 2);

    let constant = dir.path().join("constant.csv");
    write(&constant, "id,a,flat\n1,1,5\n2,2,5\n3,4,5\n");
    let out = small_fit(&constant, &dir.path().join("o"), &["--standardize"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("\"flat\""), "{}", stderr(&out));

    let out = small_fit(&dir.path().join("missing.csv"), &dir.path().join("o"), &[]);
    assert_eq!(code(&out), 2);
    assert!(!dir.path().join("o").exists());
}

#[test]
fn all_candidates_failing_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = dir.path().join("tiny.csv");
    write(&tiny, "a,b,c\n1,2,3\n2,1,0\n0,5,1\n");
    let out = bin(&[
        "fit", "--input", tiny.to_str().unwrap(), "--output", dir.path().join("o").to_str().unwrap(),
        "--models", "UUUU", "--k-min", "3", "--k-max", "3", "--q-max", "2",
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(!dir.path().join("o").join("report.json").exists());
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(code(&bin(&["simulate", "--study", "3"])), 64);
    assert_eq!(code(&bin(&["simulate", "--study", "1", "--replicates", "0"])), 64);
    assert_eq!(code(&bin(&["fit"])), 64);
    assert_eq!(code(&bin(&["fit", "--input", "x.csv", "--models", "ABCD"])), 64);
    assert_eq!(code(&bin(&["fit", "--input", "x.csv", "--k-min", "0"])), 64);
    assert_eq!(code(&bin(&["frobnicate"])), 64);
    assert_eq!(code(&bin(&["--help"])), 0);
    assert_eq!(code(&bin(&["--version"])), 0);
}

#[test]
fn simulate_files_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = bin(&["simulate", "--study", "1", "--replicates", "2", "--seed", "9", "--output", dir.path().to_str().unwrap()]);
        assert_eq!(code(&out), 0);
    }
    let mut names: Vec<String> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["rep1_data.csv", "rep1_truth.csv", "rep2_data.csv", "rep2_truth.csv"]);
    for name in &names {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
    }
    let truth = std::fs::read_to_string(a.path().join("rep1_truth.csv")).unwrap();
    let counts = [1, 2, 3].map(|l| truth.lines().skip(1).filter(|r| r.ends_with(&format!(",{l}"))).count());
    assert_eq!(counts, [500, 300, 200]);
    assert_ne!(
        std::fs::read(a.path().join("rep1_data.csv")).unwrap(),
        std::fs::read(a.path().join("rep2_data.csv")).unwrap()
    );
}

#[test]
fn unwritable_output_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    write(&blocker, "x");
    let target = blocker.join("sub");
    let out = bin(&["simulate", "--study", "1", "--output", target.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn evaluate_prints_four_decimals() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    write(&a, "id,label\n1,1\n2,1\n3,2\n4,2\n");
    write(&b, "id,label\n1,1\n2,2\n3,1\n4,2\n");
    let out = bin(&["evaluate", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "-0.5000\n");
    let out = bin(&["evaluate", a.to_str().unwrap(), a.to_str().unwrap()]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "1.0000\n");

    let short = dir.path().join("short.csv");
    write(&short, "label\n1\n2\n");
    assert_eq!(code(&bin(&["evaluate", a.to_str().unwrap(), short.to_str().unwrap()])), 2);

    let bad = dir.path().join("bad.csv");
    write(&bad, "id,label\n1,1\n2,x\n3,2\n4,2\n");
    let out = bin(&["evaluate", a.to_str().unwrap(), bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}
