//! Command-line front end: single runs, parameter sweeps, and a self-check
//! that cross-validates the fast numerical paths against slow oracles.

use clap::{Args, Parser, Subcommand};
use fanet_va::config::{ConfigError, RunConfig};
use fanet_va::harness::{run_sweep, CellResult, GridSpec};
use fanet_va::{matcher, oracles, similarity};
use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use serde::Serialize;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fanet-sim", version, about = "FANET Sybil-detection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured scenario once (one grid cell).
    Run(RunArgs),
    /// Run a parameter sweep over a grid of scenario values.
    Sweep(SweepArgs),
    /// Cross-check the analytic fast paths against numerical oracles.
    Verify,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file; defaults apply when omitted.
    config: Option<PathBuf>,
    /// Root seed; overrides the config and the FANET_SEED variable.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path prefix; writes <out>.csv and/or <out>.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Which formats to emit: csv, json, or both.
    #[arg(long, default_value = "both")]
    format: OutputFormat,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Grid axes, e.g. "n_nodes=20,50;v_max=10,20;p_m=0.1,0.2".
    #[arg(long)]
    grid: String,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
    Both,
}

/// One output row: a (cell, detector) pair.
#[derive(Serialize)]
struct Row {
    cell_id: usize,
    n_nodes: usize,
    v_max: f64,
    sinr_db: f64,
    p_m: f64,
    detector: &'static str,
    precision: f64,
    precision_ci90: f64,
    recall: f64,
    recall_ci90: f64,
    matching_accuracy: f64,
    matching_ci90: f64,
    epochs: usize,
    replicates: usize,
}

const CSV_HEADER: &str = "cell_id,n_nodes,v_max,sinr_db,p_m,detector,precision,precision_ci90,\
recall,recall_ci90,matching_accuracy,matching_ci90,epochs,replicates";

fn rows_from_results(results: &[CellResult]) -> Vec<Row> {
    let mut rows = Vec::new();
    for cell in results {
        for s in &cell.summaries {
            rows.push(Row {
                cell_id: cell.cell.cell_id,
                n_nodes: cell.cell.n_nodes,
                v_max: cell.cell.v_max,
                sinr_db: cell.cell.sinr_db,
                p_m: cell.cell.p_m,
                detector: s.detector.name(),
                precision: s.precision.mean,
                precision_ci90: s.precision.ci90_half,
                recall: s.recall.mean,
                recall_ci90: s.recall.ci90_half,
                matching_accuracy: s.matching_accuracy.mean,
                matching_ci90: s.matching_accuracy.ci90_half,
                epochs: cell.cell.scenario.epochs,
                replicates: s.replicates,
            });
        }
    }
    rows
}

fn rows_to_csv(rows: &[Row]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.cell_id,
            r.n_nodes,
            r.v_max,
            r.sinr_db,
            r.p_m,
            r.detector,
            r.precision,
            r.precision_ci90,
            r.recall,
            r.recall_ci90,
            r.matching_accuracy,
            r.matching_ci90,
            r.epochs,
            r.replicates
        ));
    }
    out
}

enum CliError {
    /// Configuration or usage problems (exit 2).
    Usage(String),
    /// Runtime failures (exit 1).
    Runtime(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn parse_grid(text: &str) -> Result<GridSpec, CliError> {
    let mut grid = GridSpec::default();
    for part in text.split(';').filter(|p| !p.trim().is_empty()) {
        let (key, values) = part
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("grid axis '{part}' is not key=v1,v2")))?;
        let parse_f64 = |v: &str| -> Result<f64, CliError> {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("grid value '{v}' is not a number")))
        };
        match key.trim() {
            "n_nodes" => {
                grid.n_nodes = values
                    .split(',')
                    .map(|v| {
                        v.trim()
                            .parse::<usize>()
                            .map_err(|_| CliError::Usage(format!("grid value '{v}' is not an integer")))
                    })
                    .collect::<Result<_, _>>()?
            }
            "v_max" => grid.v_max = values.split(',').map(parse_f64).collect::<Result<_, _>>()?,
            "sinr_db" => {
                grid.sinr_db = values.split(',').map(parse_f64).collect::<Result<_, _>>()?
            }
            "p_m" => grid.p_m = values.split(',').map(parse_f64).collect::<Result<_, _>>()?,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown grid axis '{other}' (known: n_nodes, v_max, sinr_db, p_m)"
                )))
            }
        }
    }
    Ok(grid)
}

fn resolve_seed(flag: Option<u64>, config_seed: u64) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("FANET_SEED") {
        Ok(v) => v
            .parse::<u64>()
            .map_err(|_| CliError::Usage(format!("FANET_SEED '{v}' is not a u64"))),
        Err(_) => Ok(config_seed),
    }
}

fn emit(results: &[CellResult], common: &CommonArgs) -> Result<(), CliError> {
    let rows = rows_from_results(results);
    let csv = rows_to_csv(&rows);
    let json = serde_json::to_string_pretty(&rows)
        .map_err(|e| CliError::Runtime(format!("json serialization failed: {e}")))?;
    match &common.out {
        Some(prefix) => {
            let write = |ext: &str, body: &str| -> Result<(), CliError> {
                let path = prefix.with_extension(ext);
                let mut body = body.to_string();
                if !body.ends_with('\n') {
                    body.push('\n');
                }
                std::fs::write(&path, body)
                    .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
                eprintln!("wrote {}", path.display());
                Ok(())
            };
            if common.format != OutputFormat::Json {
                write("csv", &csv)?;
            }
            if common.format != OutputFormat::Csv {
                write("json", &json)?;
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            let body = if common.format == OutputFormat::Json {
                &json
            } else {
                &csv
            };
            writeln!(stdout, "{}", body.trim_end())
                .map_err(|e| CliError::Runtime(format!("cannot write stdout: {e}")))?;
        }
    }
    Ok(())
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => Ok(RunConfig::from_path(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn cmd_run(args: &RunArgs, grid: GridSpec) -> Result<(), CliError> {
    let cfg = load_config(&args.common.config)?;
    let scenario = cfg.scenario()?;
    let seed = resolve_seed(args.common.seed, cfg.sim.seed)?;
    let results = run_sweep(&scenario, &grid, seed, cfg.sim.replicates)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    emit(&results, &args.common)
}

/// Reduced-scale cross-checks of the analytic paths against the oracles.
/// Prints one line per check; any failure fails the command.
fn cmd_verify() -> Result<(), CliError> {
    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("{} {name}{}", if ok { "PASS" } else { "FAIL" }, detail);
        if !ok {
            failures += 1;
        }
    };

    // Closed-form Gaussian KL against adaptive quadrature.
    let mut rng = ChaCha8Rng::seed_from_u64(0xFA57);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let a = fanet_va::sensing::GaussianObservation::new(
            rng.gen_range(-50.0..50.0),
            rng.gen_range(0.01..25.0),
        );
        let b = fanet_va::sensing::GaussianObservation::new(
            rng.gen_range(-50.0..50.0),
            rng.gen_range(0.01..25.0),
        );
        let closed = similarity::kl_gaussian(&a, &b).expect("positive variances");
        let quad = oracles::kl_gaussian_quadrature(a.mean, a.variance, b.mean, b.variance);
        worst = worst.max((closed - quad).abs());
    }
    check(
        "kl-closed-form-vs-quadrature",
        worst <= 1e-6,
        format!(" (max |diff| {worst:.2e}, 200 pairs, tol 1e-6)"),
    );

    // The moment-matched divergence upper-bounds the exact-mixture one.
    let mut bound_ok = true;
    let mut bound_worst: f64 = f64::NEG_INFINITY;
    for _ in 0..100 {
        let a = fanet_va::sensing::GaussianObservation::new(
            rng.gen_range(-20.0..20.0),
            rng.gen_range(0.05..9.0),
        );
        let b = fanet_va::sensing::GaussianObservation::new(
            rng.gen_range(-20.0..20.0),
            rng.gen_range(0.05..9.0),
        );
        let matched = similarity::jsd_nats(&a, &b, similarity::MixtureMode::MomentMatched)
            .expect("positive variances");
        let exact = oracles::jsd_exact_mixture_quadrature(a.mean, a.variance, b.mean, b.variance);
        let slack = exact - matched;
        bound_worst = bound_worst.max(slack);
        if slack > 1e-8 || !(0.0..=std::f64::consts::LN_2 + 1e-9).contains(&exact) {
            bound_ok = false;
        }
    }
    check(
        "jsd-moment-match-upper-bounds-exact",
        bound_ok,
        format!(" (max violation {bound_worst:.2e}, 100 pairs)"),
    );

    // Assignment solvers against exhaustive enumeration.
    let mut hungarian_ok = true;
    let mut balanced_opt = 0usize;
    let total_instances = 50usize;
    for _ in 0..total_instances {
        let n = rng.gen_range(3..=7usize);
        let k_v = rng.gen_range(1..=n);
        let mut data = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                data[r * n + c] = if r < k_v {
                    rng.gen_range(0.5..100.0)
                } else {
                    similarity::SENTINEL
                };
            }
        }
        let costs = similarity::CostMatrix::from_rows(k_v, n, data);
        let mode = matcher::BalanceMode::MeanDeviation;
        let exact = matcher::solve_exact(&costs, mode).expect("small instance");
        let exact_total = matcher::evaluate(&costs, &exact, mode).total();
        let hung = matcher::solve_hungarian(&costs);
        // Hungarian must reach the minimum f1 over all assignments.
        let enum_f1 = {
            let obj = |a: &[usize]| -> f64 {
                (0..k_v).map(|r| costs.get(r, a[r])).sum()
            };
            let best = oracles::enumerate_best_assignment(n, k_v, &obj);
            (0..k_v).map(|r| costs.get(r, best[r])).sum::<f64>()
        };
        if (matcher::evaluate(&costs, &hung, mode).f1 - enum_f1).abs() > 1e-9 {
            hungarian_ok = false;
        }
        let bal = matcher::solve_balanced(&costs, 200, mode);
        let bal_total = matcher::evaluate(&costs, &bal, mode).total();
        if bal_total <= exact_total + 1e-9 {
            balanced_opt += 1;
        }
    }
    check(
        "hungarian-attains-enumerated-min-cost",
        hungarian_ok,
        format!(" ({total_instances} random instances, n <= 7)"),
    );
    let frac = balanced_opt as f64 / total_instances as f64;
    check(
        "balanced-local-search-near-optimal",
        frac >= 0.9,
        format!(" ({balanced_opt}/{total_instances} instances optimal)"),
    );

    // Sensor noise moments match the configured model.
    let model = fanet_va::sensing::ErrorModel::default();
    let rx = fanet_va::UavState::legitimate(
        fanet_va::NodeId(0),
        fanet_va::Vec3::new(0.0, 0.0, 0.0),
        fanet_va::Vec3::new(0.0, 0.0, 0.0),
    );
    let tx = fanet_va::Vec3::new(30.0, 0.0, 0.0);
    let n = 20_000usize;
    let samples: Vec<f64> = (0..n)
        .map(|_| fanet_va::sensing::measure_rssi_range(&rx, tx, &model, &mut rng) - 30.0)
        .collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let se_mean = model.rssi_ranging.std_dev / (n as f64).sqrt();
    let se_var = model.rssi_ranging.variance() * (2.0 / n as f64).sqrt();
    let moments_ok = (mean - model.rssi_ranging.bias).abs() < 4.0 * se_mean
        && (var - model.rssi_ranging.variance()).abs() < 4.0 * se_var;
    check(
        "ranging-noise-moments",
        moments_ok,
        format!(" (mean {mean:.4} vs {}, var {var:.4} vs {})", model.rssi_ranging.bias, model.rssi_ranging.variance()),
    );

    if failures > 0 {
        Err(CliError::Runtime(format!("{failures} check(s) failed")))
    } else {
        Ok(())
    }
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => cmd_run(args, GridSpec::default()),
        Command::Sweep(args) => {
            let grid = parse_grid(&args.grid)?;
            let run_args = RunArgs {
                common: CommonArgs {
                    config: args.common.config.clone(),
                    seed: args.common.seed,
                    out: args.common.out.clone(),
                    format: args.common.format,
                },
            };
            cmd_run(&run_args, grid)
        }
        Command::Verify => cmd_verify(),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
