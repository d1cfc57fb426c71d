//! `tscausal` command line: synthetic data, forecasting benchmark, causal
//! discovery on a panel, experiment sweeps and report re-aggregation.
//!
//! Every successful command prints one JSON line describing what it wrote;
//! failures print `{"status":"error",...}` on stderr and exit with code 1.

use std::error::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use tscausal::causality::{infer_graph, write_edge_csv, BhScope, CausalityConfig, Method};
use tscausal::eval::{
    render_metric_panels, run_forecast_benchmark_csv, run_logistic_experiment, run_mou_experiment, synthetic_ar_panel,
    write_summary_csv, ForecastBenchmarkConfig, LogisticExperimentConfig, MouExperimentConfig, RowTable,
};
use tscausal::forecast::external::ExternalSpec;
use tscausal::forecast::ets::{EtsMode, Trend};
use tscausal::forecast::ForecasterSpec;
use tscausal::series::{MultiSeries, Seed};
use tscausal::synthgen::{gen_logistic, gen_mou, LogisticSpec, MouSpec};

type CliResult = Result<serde_json::Value, Box<dyn Error>>;

#[derive(Debug, Parser)]
#[command(name = "tscausal", version, about = "Forecasting baselines and time-series causal discovery")]
struct Cli {
    /// Master seed for data generation and trial seeds.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Directory receiving every output file.
    #[arg(long, global = true, default_value = "out")]
    output_dir: PathBuf,
    /// TOML file with optional [logistic], [mou], [forecast] and [causality] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Launch command of an external forecaster speaking the line protocol.
    #[arg(long, global = true)]
    bridge_cmd: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic panel (and its truth graph when one exists).
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Forecasting benchmark over every column of a panel CSV.
    Forecast {
        /// Panel CSV: one header row of series names, one column per series.
        #[arg(long)]
        panel: PathBuf,
        /// Forecasters, repeated or `;`-separated, e.g. `naive_mean;arima:5,0,5;ets:auto`.
        #[arg(long, value_delimiter = ';')]
        forecasters: Option<Vec<String>>,
        /// Share of each series used for fitting; the rest is the forecast horizon.
        #[arg(long)]
        train_fraction: Option<f64>,
    },
    /// Infer the causal graph of one panel.
    Causality(CausalityArgs),
    /// Run a synthetic sweep.
    Experiment {
        #[arg(value_enum)]
        kind: ExperimentKind,
        /// Trials per parameter value.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Recompute summaries (and optionally the plot) from a rows CSV.
    Report {
        /// Rows CSV written by `experiment` or `forecast`.
        #[arg(long)]
        rows: PathBuf,
        /// Also render the metric panels as SVG (experiment rows only).
        #[arg(long)]
        plot: bool,
    },
}

#[derive(Debug, Subcommand)]
enum GenKind {
    /// Three unidirectionally coupled logistic maps.
    Logistic {
        /// Coupling strength.
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Series length.
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Growth rate of each map.
        #[arg(long, default_value_t = 3.8)]
        r: f64,
    },
    /// Multivariate Ornstein–Uhlenbeck panel on a random graph.
    Mou {
        /// Probability of each directed edge.
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        #[arg(long, default_value_t = 10)]
        nodes: usize,
        /// Samples kept after burn-in.
        #[arg(long, default_value_t = 100)]
        t_points: usize,
    },
    /// Panel of independent AR(1) series for the forecasting benchmark.
    Ar {
        #[arg(long, default_value_t = 20)]
        series: usize,
        #[arg(long, default_value_t = 600)]
        length: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExperimentKind {
    Logistic,
    Mou,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Granger,
    Residual,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BhArg {
    Pair,
    Panel,
}

#[derive(Debug, Args)]
struct CausalityArgs {
    /// Panel CSV: one header row of series names, one column per series.
    #[arg(long)]
    panel: PathBuf,
    /// Test to run (default granger).
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Forecaster for the residual method, e.g. `ar:5`, `arima:5,0,5`, `external`.
    #[arg(long)]
    forecaster: Option<String>,
    /// Significance level after BH adjustment (default 0.05).
    #[arg(long)]
    alpha: Option<f64>,
    /// Largest lag (or Granger order) tested (default 5).
    #[arg(long)]
    max_lag: Option<usize>,
    /// Context window of the rolling forecasts (default 30).
    #[arg(long)]
    context: Option<usize>,
    /// BH family: the lags of one pair, or every test in the panel.
    #[arg(long, value_enum)]
    bh: Option<BhArg>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    logistic: LogisticExperimentConfig,
    mou: MouExperimentConfig,
    forecast: ForecastBenchmarkConfig,
    causality: CausalityConfig,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig, Box<dyn Error>> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            Ok(toml::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?)
        }
    }
}

/// `naive_mean`, `naive_last`, `linreg[:w]`, `ar[:p]`, `arima[:p,d,q]`,
/// `ets[:auto|none|additive|damped]`, `external`.
fn parse_forecaster(text: &str, bridge: Option<&ExternalSpec>) -> Result<ForecasterSpec, Box<dyn Error>> {
    let (name, arg) = match text.split_once(':') {
        Some((n, a)) => (n.trim(), Some(a.trim())),
        None => (text.trim(), None),
    };
    let num = |s: &str| s.trim().parse::<usize>().map_err(|e| format!("forecaster `{text}`: {e}"));
    let spec = match (name, arg) {
        ("naive_mean", None) => ForecasterSpec::NaiveMean,
        ("naive_last", None) => ForecasterSpec::NaiveLast,
        ("linreg", None) => ForecasterSpec::linreg(),
        ("linreg", Some(w)) => ForecasterSpec::Linreg { window: num(w)? },
        ("ar", None) => ForecasterSpec::ar(5),
        ("ar", Some(p)) => ForecasterSpec::ar(num(p)?),
        ("arima", None) => ForecasterSpec::arima(),
        ("arima", Some(order)) => {
            let parts: Vec<&str> = order.split(',').collect();
            if parts.len() != 3 {
                return Err(format!("forecaster `{text}`: expected arima:p,d,q").into());
            }
            ForecasterSpec::Arima { p: num(parts[0])?, d: num(parts[1])?, q: num(parts[2])? }
        }
        ("ets", None) => ForecasterSpec::ets(),
        ("ets", Some(mode)) => {
            let mode = match mode {
                "auto" => EtsMode::Auto,
                "none" => EtsMode::Fixed(Trend::None),
                "additive" => EtsMode::Fixed(Trend::Additive),
                "damped" => EtsMode::Fixed(Trend::Damped),
                other => return Err(format!("unknown ets mode `{other}`").into()),
            };
            ForecasterSpec::Ets { mode }
        }
        ("external", None) => match bridge {
            Some(b) => ForecasterSpec::External(b.clone()),
            None => return Err("forecaster `external` needs --bridge-cmd".into()),
        },
        _ => return Err(format!("unknown forecaster `{text}`").into()),
    };
    spec.validate()?;
    Ok(spec)
}

fn paths_json(paths: &[&Path]) -> serde_json::Value {
    json!(paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>())
}

fn gen(cli: &Cli, kind: &GenKind) -> CliResult {
    let dir = &cli.output_dir;
    std::fs::create_dir_all(dir)?;
    let seed = Seed(cli.seed);
    let (stem, panel, truth) = match *kind {
        GenKind::Logistic { alpha, n, r } => {
            let (panel, truth) = gen_logistic(&LogisticSpec { r, ..LogisticSpec::new(alpha, n, seed) })?;
            ("logistic", panel, Some(truth))
        }
        GenKind::Mou { density, nodes, t_points } => {
            let (panel, truth, _) = gen_mou(&MouSpec { t_points, ..MouSpec::new(nodes, density, seed) })?;
            ("mou", panel, Some(truth))
        }
        GenKind::Ar { series, length } => ("ar", synthetic_ar_panel(series, length, seed)?, None),
    };
    let panel_path = dir.join(format!("{stem}_panel.csv"));
    panel.write_csv(std::fs::File::create(&panel_path)?)?;
    let mut written = vec![panel_path.clone()];
    if let Some(truth) = truth {
        let truth_path = dir.join(format!("{stem}_truth.csv"));
        truth.write_csv(panel.names(), std::fs::File::create(&truth_path)?)?;
        written.push(truth_path);
    }
    let refs: Vec<&Path> = written.iter().map(PathBuf::as_path).collect();
    Ok(json!({"status": "ok", "command": "gen", "rows": panel.n_rows(), "series": panel.n_series(), "files": paths_json(&refs)}))
}

fn forecast(cli: &Cli, cfg: FileConfig, panel: &Path, list: Option<&[String]>, train_fraction: Option<f64>) -> CliResult {
    let bridge = cli.bridge_cmd.as_deref().map(ExternalSpec::from_command_line);
    let mut bench = cfg.forecast;
    if let Some(list) = list {
        bench.forecasters = list.iter().map(|s| parse_forecaster(s, bridge.as_ref())).collect::<Result<_, _>>()?;
    } else if let Some(b) = &bridge {
        bench.forecasters.push(ForecasterSpec::External(b.clone()));
    }
    if let Some(f) = train_fraction {
        bench.train_fraction = f;
    }
    let report = run_forecast_benchmark_csv(panel, &bench).map_err(|e| in_file(panel, e))?;
    let paths = report.write_all(&cli.output_dir, "forecast")?;
    let failed = report.rows.iter().filter(|r| !r.error.is_empty()).count();
    Ok(json!({
        "status": "ok",
        "command": "forecast",
        "rows": report.rows.len(),
        "failed": failed,
        "files": paths_json(&[&paths.rows, &paths.summary, &paths.json]),
    }))
}

fn causality(cli: &Cli, file_cfg: FileConfig, args: &CausalityArgs) -> CliResult {
    let bridge = cli.bridge_cmd.as_deref().map(ExternalSpec::from_command_line);
    let mut cfg = file_cfg.causality;
    if let Some(m) = args.method {
        cfg.method = match m {
            MethodArg::Granger => Method::Granger,
            MethodArg::Residual => Method::Residual,
        };
    }
    if let Some(f) = &args.forecaster {
        cfg.forecaster = parse_forecaster(f, bridge.as_ref())?;
    }
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    if let Some(l) = args.max_lag {
        cfg.max_lag = l;
    }
    if let Some(w) = args.context {
        cfg.context_w = w;
    }
    if let Some(b) = args.bh {
        cfg.bh_family = match b {
            BhArg::Pair => BhScope::PerPair,
            BhArg::Panel => BhScope::PerPanel,
        };
    }
    let panel = MultiSeries::read_csv_path(&args.panel).map_err(|e| in_file(&args.panel, e))?;
    let (graph, tests) = infer_graph(&panel, &cfg, None)?;
    std::fs::create_dir_all(&cli.output_dir)?;
    let out = cli.output_dir.join("edges.csv");
    write_edge_csv(panel.names(), &tests, std::fs::File::create(&out)?)?;
    Ok(json!({
        "status": "ok",
        "command": "causality",
        "method": cfg.method.as_str(),
        "tests": tests.len(),
        "edges": graph.n_edges(),
        "files": paths_json(&[&out]),
    }))
}

fn external_method(bridge: Option<&str>) -> Option<CausalityConfig> {
    bridge.map(|cmd| CausalityConfig::residual(ForecasterSpec::External(ExternalSpec::from_command_line(cmd))))
}

fn experiment(cli: &Cli, cfg: FileConfig, kind: ExperimentKind, seeds: Option<usize>) -> CliResult {
    let master = Seed(cli.seed);
    let dir = &cli.output_dir;
    let extra = external_method(cli.bridge_cmd.as_deref());
    let (name, paths, rows, aggs, param_label) = match kind {
        ExperimentKind::Logistic => {
            let mut c = cfg.logistic;
            if let Some(s) = seeds {
                c.seeds_per_value = s;
            }
            c.methods.extend(extra);
            let rep = run_logistic_experiment(&c, master)?;
            ("logistic", rep.write_all(dir, "logistic")?, rep.rows.len(), rep.aggregates, "alpha")
        }
        ExperimentKind::Mou => {
            let mut c = cfg.mou;
            if let Some(s) = seeds {
                c.seeds_per_value = s;
            }
            c.methods.extend(extra);
            let rep = run_mou_experiment(&c, master)?;
            ("mou", rep.write_all(dir, "mou")?, rep.rows.len(), rep.aggregates, "density")
        }
    };
    let plot = dir.join(format!("{name}_plot.svg"));
    std::fs::write(&plot, render_metric_panels(&aggs, param_label))?;
    Ok(json!({
        "status": "ok",
        "command": "experiment",
        "experiment": name,
        "rows": rows,
        "files": paths_json(&[&paths.rows, &paths.summary, &paths.json, &plot]),
    }))
}

fn report(cli: &Cli, rows: &Path, plot: bool) -> CliResult {
    let table = RowTable::read_path(rows).map_err(|e| in_file(rows, e))?;
    let aggs = table.aggregate();
    let stem = rows
        .file_stem()
        .and_then(|s| s.to_str())
        .map(|s| s.strip_suffix("_rows").unwrap_or(s).to_string())
        .unwrap_or_else(|| "report".into());
    std::fs::create_dir_all(&cli.output_dir)?;
    let summary = cli.output_dir.join(format!("{stem}_summary.csv"));
    write_summary_csv(&aggs, std::fs::File::create(&summary)?)?;
    let mut files = vec![summary];
    if plot {
        let svg = cli.output_dir.join(format!("{stem}_plot.svg"));
        std::fs::write(&svg, render_metric_panels(&aggs, "parameter"))?;
        files.push(svg);
    }
    let refs: Vec<&Path> = files.iter().map(PathBuf::as_path).collect();
    Ok(json!({"status": "ok", "command": "report", "aggregates": aggs.len(), "files": paths_json(&refs)}))
}

fn run(cli: &Cli) -> CliResult {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global()?;
    }
    let cfg = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Gen { kind } => gen(cli, kind),
        Command::Forecast { panel, forecasters, train_fraction } => {
            forecast(cli, cfg, panel, forecasters.as_deref(), *train_fraction)
        }
        Command::Causality(args) => causality(cli, cfg, args),
        Command::Experiment { kind, seeds } => experiment(cli, cfg, *kind, *seeds),
        Command::Report { rows, plot } => report(cli, rows, *plot),
    }
}

fn error_chain(e: &dyn Error) -> String {
    let mut msg = e.to_string();
    let mut source = e.source();
    while let Some(s) = source {
        let text = s.to_string();
        if !msg.contains(&text) {
            msg.push_str(": ");
            msg.push_str(&text);
        }
        source = s.source();
    }
    msg
}

/// Prefixes an input error with the file it came from.
fn in_file(path: &std::path::Path, e: impl std::fmt::Display) -> String {
    format!("{}: {e}", path.display())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", json!({"status": "error", "message": error_chain(e.as_ref())}));
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forecaster_strings() {
        assert_eq!(parse_forecaster("ar:3", None).unwrap(), ForecasterSpec::ar(3));
        assert_eq!(parse_forecaster("arima:2,1,1", None).unwrap(), ForecasterSpec::Arima { p: 2, d: 1, q: 1 });
        assert_eq!(parse_forecaster("linreg:10", None).unwrap(), ForecasterSpec::Linreg { window: 10 });
        assert_eq!(parse_forecaster("ets:damped", None).unwrap(), ForecasterSpec::Ets { mode: EtsMode::Fixed(Trend::Damped) });
        assert!(parse_forecaster("external", None).is_err());
        assert!(parse_forecaster("arima:2,2,1", None).is_err());
        assert!(parse_forecaster("prophet", None).is_err());
    }
}
