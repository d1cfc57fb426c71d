use std::path::Path;
use std::process::{Command, Output};

use tscausal::eval::{read_summary_csv, RowTable};
use tscausal::series::MultiSeries;
use tscausal::synthgen::CausalGraph;

const BIN: &str = env!("CARGO_BIN_EXE_tscausal");
const MOCK: &str = env!("CARGO_BIN_EXE_tscausal-mock-bridge");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).arg("--output-dir").arg(dir).args(args).output().expect("binary runs")
}

fn ok_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("one JSON line")
}

#[test]
fn gen_writes_panel_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let summary = ok_json(&run(dir.path(), &["--seed", "3", "gen", "mou", "--density", "0.4", "--t-points", "80"]));
    assert_eq!((summary["rows"].as_u64(), summary["series"].as_u64()), (Some(80), Some(10)));
    let panel = MultiSeries::read_csv_path(&dir.path().join("mou_panel.csv")).unwrap();
    let truth_text = std::fs::read_to_string(dir.path().join("mou_truth.csv")).unwrap();
    assert!(truth_text.starts_with("source,target,sign"));
    let truth = CausalGraph::read_csv(panel.names(), truth_text.as_bytes()).unwrap();
    assert!(truth.n_edges() > 0);

    // Same seed, same bytes.
    let again = tempfile::tempdir().unwrap();
    ok_json(&run(again.path(), &["--seed", "3", "gen", "mou", "--density", "0.4", "--t-points", "80"]));
    assert_eq!(
        std::fs::read(dir.path().join("mou_panel.csv")).unwrap(),
        std::fs::read(again.path().join("mou_panel.csv")).unwrap()
    );
}

#[test]
fn causality_writes_edge_list() {
    let dir = tempfile::tempdir().unwrap();
    ok_json(&run(dir.path(), &["gen", "logistic", "--alpha", "0.6"]));
    let panel = dir.path().join("logistic_panel.csv");
    let summary = ok_json(&run(
        dir.path(),
        &["causality", "--panel", panel.to_str().unwrap(), "--method", "residual", "--forecaster", "ar:3", "--bh", "panel"],
    ));
    assert_eq!(summary["tests"], 6);
    let edges = std::fs::read_to_string(dir.path().join("edges.csv")).unwrap();
    let mut lines = edges.lines();
    assert_eq!(lines.next().unwrap(), "source,target,lag,stat,raw_p,adj_p,r2,sign,significant");
    assert_eq!(lines.count(), 6);
}

#[test]
fn causality_through_bridge_command() {
    let dir = tempfile::tempdir().unwrap();
    ok_json(&run(dir.path(), &["gen", "logistic"]));
    let panel = dir.path().join("logistic_panel.csv");
    let p = panel.to_str().unwrap();
    ok_json(&run(dir.path(), &["causality", "--panel", p, "--method", "residual", "--forecaster", "naive_last"]));
    let native = std::fs::read_to_string(dir.path().join("edges.csv")).unwrap();
    let cmd = format!("{MOCK} --batch");
    ok_json(&run(
        dir.path(),
        &["--bridge-cmd", &cmd, "causality", "--panel", p, "--method", "residual", "--forecaster", "external"],
    ));
    assert_eq!(std::fs::read_to_string(dir.path().join("edges.csv")).unwrap(), native);
}

#[test]
fn forecast_benchmark_and_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    ok_json(&run(dir.path(), &["gen", "ar", "--series", "4", "--length", "300"]));
    let panel = dir.path().join("ar_panel.csv");
    let summary = ok_json(&run(
        dir.path(),
        &["--bridge-cmd", MOCK, "forecast", "--panel", panel.to_str().unwrap()],
    ));
    // Five native forecasters plus the bridge, four series each.
    assert_eq!((summary["rows"].as_u64(), summary["failed"].as_u64()), (Some(24), Some(0)));
    let rows_path = dir.path().join("forecast_rows.csv");
    let written = read_summary_csv(std::fs::File::open(dir.path().join("forecast_summary.csv")).unwrap()).unwrap();

    let re = tempfile::tempdir().unwrap();
    ok_json(&run(re.path(), &["report", "--rows", rows_path.to_str().unwrap()]));
    let recomputed = read_summary_csv(std::fs::File::open(re.path().join("forecast_summary.csv")).unwrap()).unwrap();
    assert_eq!(recomputed, written);
    let table = RowTable::read_path(&rows_path).unwrap();
    assert!(matches!(table, RowTable::Forecasts(ref r) if r.iter().any(|x| x.forecaster == "external")));
}

#[test]
fn experiment_with_config_file_writes_reports_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "[mou]\ndensities = [0.2, 0.8]\nseeds_per_value = 2\n\n[[mou.methods]]\nmethod = \"granger\"\n\n[[mou.methods]]\nmethod = \"residual\"\nforecaster = { kind = \"naive_mean\" }\n",
    )
    .unwrap();
    let summary = ok_json(&run(
        dir.path(),
        &["--jobs", "2", "--config", cfg.to_str().unwrap(), "experiment", "mou"],
    ));
    assert_eq!(summary["rows"], 8);
    let svg = std::fs::read_to_string(dir.path().join("mou_plot.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 8);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("mou.json")).unwrap()).unwrap();
    assert_eq!(json["experiment"], "mou");
    assert_eq!(json["config"]["methods"][0]["bh_family"], "per_pair");

    let rows = dir.path().join("mou_rows.csv");
    let re = tempfile::tempdir().unwrap();
    ok_json(&run(re.path(), &["report", "--rows", rows.to_str().unwrap(), "--plot"]));
    assert_eq!(
        std::fs::read_to_string(re.path().join("mou_summary.csv")).unwrap(),
        std::fs::read_to_string(dir.path().join("mou_summary.csv")).unwrap()
    );
    assert!(re.path().join("mou_plot.svg").exists());
}

#[test]
fn failures_print_machine_readable_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let out = run(dir.path(), &["causality", "--panel", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).expect("JSON error line");
    assert_eq!(err["status"], "error");
    assert!(err["message"].as_str().unwrap().contains("nope.csv"));

    let out = run(dir.path(), &["forecast", "--panel", missing.to_str().unwrap(), "--forecasters", "external"]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["message"].as_str().unwrap().contains("--bridge-cmd"));
}
