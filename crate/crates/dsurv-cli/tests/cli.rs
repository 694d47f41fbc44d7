//! End-to-end checks of the `dsurv` binary: reproducibility, output
//! formats, and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dsurv"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn dsurv")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn simulate(dir: &Path, name: &str, seed: &str) -> PathBuf {
    let path = dir.join(name);
    let out = run(&[
        "simulate",
        "--out",
        path.to_str().unwrap(),
        "--subjects",
        "600",
        "--group",
        "0.5:exponential:200",
        "--group",
        "0.5:exponential:400",
        "--censor-halflife",
        "400",
        "--seed",
        seed,
    ]);
    assert_ok(&out);
    path
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), "a.csv", "11");
    let b = simulate(dir.path(), "b.csv", "11");
    let c = simulate(dir.path(), "c.csv", "12");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn train_evaluate_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "data.csv", "7");
    let model = dir.path().join("model.json");
    let trace = dir.path().join("trace.csv");

    let train_args: Vec<String> = vec![
        "train",
        "--data",
        data.to_str().unwrap(),
        "--grid-scheme",
        "uniform",
        "--width",
        "90",
        "--horizon",
        "1170",
        "--head",
        "flexible",
        "--epochs",
        "120",
        "--seed",
        "5",
        "--model-out",
        model.to_str().unwrap(),
        "--trace-out",
        trace.to_str().unwrap(),
    ]
    .into_iter()
    .map(String::from)
    .collect();
    let args: Vec<&str> = train_args.iter().map(String::as_str).collect();
    assert_ok(&run(&args));
    let model_bytes = std::fs::read(&model).unwrap();
    let trace_bytes = std::fs::read(&trace).unwrap();

    // Identical seed: byte-identical model and trace.
    assert_ok(&run(&args));
    assert_eq!(model_bytes, std::fs::read(&model).unwrap());
    assert_eq!(trace_bytes, std::fs::read(&trace).unwrap());

    let eval = run(&[
        "evaluate",
        "--data",
        data.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--calibration-out",
        dir.path().join("calib.csv").to_str().unwrap(),
    ]);
    assert_ok(&eval);
    let text = String::from_utf8_lossy(&eval.stdout).to_string();
    assert!(text.contains("C-index"));
    assert!(text.contains("Brier score at 6 months"));
    assert!(text.contains("Brier score at 1 year"));
    assert!(text.contains("Brier score at 3 years"));

    let curves = dir.path().join("curves.csv");
    assert_ok(&run(&[
        "predict",
        "--data",
        data.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--out",
        curves.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&curves).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert_eq!(header.split(',').count(), 1 + 13); // subject + 13 boundaries
    let mut rows = 0;
    for line in lines {
        let values: Vec<f64> = line
            .split(',')
            .skip(1)
            .map(|v| v.parse().unwrap())
            .collect();
        for pair in values.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "row not nonincreasing: {line}");
        }
        rows += 1;
    }
    assert_eq!(rows, 600);
}

#[test]
fn halflife_grid_to_six_years_has_19_boundaries() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "data.csv", "9");
    let model = dir.path().join("model.json");
    assert_ok(&run(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--grid-scheme",
        "halflife",
        "--intervals",
        "19",
        "--horizon",
        "2190",
        "--epochs",
        "5",
        "--model-out",
        model.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&model).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let grid: Vec<f64> = value["grid"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(grid.len(), 19);
    assert!(*grid.last().unwrap() >= 2190.0);
}

#[test]
fn prophaz_head_round_trips_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "data.csv", "17");
    let model = dir.path().join("model.json");
    assert_ok(&run(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--grid-scheme",
        "halflife",
        "--intervals",
        "12",
        "--horizon",
        "1500",
        "--head",
        "prophaz",
        "--hidden",
        "4",
        "--epochs",
        "40",
        "--seed",
        "2",
        "--model-out",
        model.to_str().unwrap(),
    ]));
    let value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(value["baseline_logits"].as_array().unwrap().len(), 12);

    let curves = dir.path().join("curves.csv");
    assert_ok(&run(&[
        "predict",
        "--data",
        data.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--out",
        curves.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&curves).unwrap();
    assert_eq!(text.lines().count(), 1 + 600);
}

#[test]
fn benchmark_with_max_1000_reports_one_size() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "data.csv", "3");
    let out = run(&[
        "benchmark",
        "--data",
        data.to_str().unwrap(),
        "--max-size",
        "1000",
        "--reps",
        "3",
        "--epochs",
        "3",
        "--grid-scheme",
        "uniform",
        "--width",
        "120",
        "--horizon",
        "1080",
    ]);
    assert_ok(&out);
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    let size_rows: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("1000,"))
        .collect();
    assert_eq!(size_rows.len(), 1, "stdout: {text}");
}

#[test]
fn calibrate_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), "data.csv", "21");
    let model = dir.path().join("model.json");
    assert_ok(&run(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--grid-scheme",
        "uniform",
        "--width",
        "120",
        "--horizon",
        "1080",
        "--epochs",
        "30",
        "--model-out",
        model.to_str().unwrap(),
    ]));
    let table = dir.path().join("calib.csv");
    assert_ok(&run(&[
        "calibrate",
        "--data",
        data.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--time",
        "365",
        "--groups",
        "5",
        "--out",
        table.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&table).unwrap();
    assert_eq!(text.lines().count(), 6); // header + 5 bins
    assert!(text.starts_with("bin,count,mean_predicted,actual"));
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();

    // Unknown flag: usage error.
    let out = run(&["simulate", "--nonsense"]);
    assert_eq!(out.status.code(), Some(2));

    // Unreadable data path: data error.
    let out = run(&[
        "train",
        "--data",
        dir.path().join("missing.csv").to_str().unwrap(),
        "--grid-scheme",
        "uniform",
        "--width",
        "10",
        "--horizon",
        "100",
        "--model-out",
        dir.path().join("m.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));

    // Bad group spec: usage error.
    let out = run(&[
        "simulate",
        "--out",
        dir.path().join("x.csv").to_str().unwrap(),
        "--subjects",
        "10",
        "--group",
        "0.5:lognormal:3",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Undefined metric (every subject censored): numerical failure.
    let data = dir.path().join("censored.csv");
    let mut text = String::from("time,event,group\n");
    for i in 0..40 {
        text.push_str(&format!("{}.0,0,{}\n", 10 + i, i % 2));
    }
    std::fs::write(&data, text).unwrap();
    let model = dir.path().join("model.json");
    assert_ok(&run(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "--grid-scheme",
        "uniform",
        "--width",
        "20",
        "--horizon",
        "60",
        "--epochs",
        "3",
        "--model-out",
        model.to_str().unwrap(),
    ]));
    let out = run(&[
        "evaluate",
        "--data",
        data.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--times",
        "30",
        "--rank-horizon",
        "30",
    ]);
    assert_eq!(out.status.code(), Some(4), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // Corrupt model file: data error.
    std::fs::write(dir.path().join("broken.json"), "{\"schema\": \"dsurv-model/1\"").unwrap();
    let out = run(&[
        "predict",
        "--data",
        data.to_str().unwrap(),
        "--model",
        dir.path().join("broken.json").to_str().unwrap(),
        "--out",
        dir.path().join("o.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}
