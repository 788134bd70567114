//! `wavesel`: range estimation from multi-wavelength wrapped phases and
//! wavelength-set selection.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 infeasible or
//! time-limited (incomplete) search, with the best solution so far printed.

mod selftest;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use wavesel::analysis::{prob_correct_lower, prob_correct_upper};
use wavesel::estimator::{estimate_range, PhaseVector};
use wavesel::exact::parse_rational;
use wavesel::select::{optimize_with_threads, SearchConfig, SearchError};
use wavesel::sim::{run_sweep, SimConfig, SweepRow};
use wavesel::{LatticeContext64, WavelengthSet};

#[derive(Parser)]
#[command(
    name = "wavesel",
    version,
    about = "Multi-wavelength phase ranging: estimation, simulation and wavelength selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select wavelengths minimizing the range-error criterion.
    Optimize(OptimizeArgs),
    /// Estimate range from wrapped phase measurements (cycles).
    Estimate(EstimateArgs),
    /// Monte-Carlo sweep of sample MSE and correct-unwrap rate over noise
    /// variances; emits CSV.
    Simulate(SimulateArgs),
    /// Closed-form accuracy predictions for a wavelength set.
    Bounds(BoundsArgs),
    /// Run the built-in oracle checks.
    Selftest,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Number of wavelengths (N >= 2).
    #[arg(long)]
    n: usize,
    /// Smallest admissible wavelength, exact rational ("2", "30/13", "2.5").
    #[arg(long)]
    lambda_min: String,
    /// Largest admissible wavelength, exact rational.
    #[arg(long)]
    lambda_max: String,
    /// Required identifiable range, exact rational.
    #[arg(long)]
    rmax: String,
    /// Objective weight; default N^2 rmax^2 / (lambda_max^2 lambda_min^2).
    #[arg(long)]
    gamma: Option<f64>,
    /// Resolution cap on the numerators p_n.
    #[arg(long)]
    kappa: Option<u64>,
    /// Wall-clock limit in seconds; expiry returns best-so-far, exit 2.
    #[arg(long)]
    time_limit_s: Option<f64>,
    /// Distribute the top-level search across worker threads.
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct EstimateArgs {
    /// Comma-separated exact rational wavelengths, e.g. "2,3,5".
    #[arg(long)]
    wavelengths: String,
    /// Comma-separated wrapped phases in cycles.
    #[arg(long)]
    phases: String,
    /// Output format: text or json.
    #[arg(long, default_value = "text")]
    format: String,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    wavelengths: String,
    /// True range in meters (reduced modulo the identifiable period).
    #[arg(long)]
    r0: f64,
    /// Noise variance grid: "lo:hi:log,count", a comma list, or one value.
    #[arg(long)]
    sigma2: String,
    /// Monte-Carlo trials per grid point.
    #[arg(long)]
    trials: u64,
    /// RNG seed; identical seeds give byte-identical output.
    #[arg(long)]
    seed: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run trials on worker threads (output is identical either way).
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    wavelengths: String,
    /// Noise variance grid: "lo:hi:log,count", a comma list, or one value.
    #[arg(long)]
    sigma2: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    let code = match cli.command {
        Command::Optimize(args) => cmd_optimize(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Selftest => selftest::run(),
    };
    match code {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Worker count: WAVESEL_THREADS overrides; otherwise all cores with
/// `--parallel`, one without.
fn worker_count(parallel: bool) -> Result<usize, String> {
    if let Ok(raw) = std::env::var("WAVESEL_THREADS") {
        let n: usize = raw
            .parse()
            .map_err(|_| format!("WAVESEL_THREADS must be a positive integer, got {raw:?}"))?;
        if n == 0 {
            return Err("WAVESEL_THREADS must be positive".into());
        }
        return Ok(n);
    }
    if parallel {
        Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
    } else {
        Ok(1)
    }
}

/// Parses a comma-separated list of exact rationals into a wavelength set.
fn parse_wavelengths(s: &str) -> Result<WavelengthSet, String> {
    let lambdas = s
        .split(',')
        .map(|tok| parse_rational(tok).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    WavelengthSet::new(lambdas).map_err(|e| e.to_string())
}

/// Variance grids: "lo:hi:log,count" (log-spaced, endpoints included), a
/// comma-separated list, or a single value.
fn parse_sigma_grid(s: &str) -> Result<Vec<f64>, String> {
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("malformed grid {s:?}: expected lo:hi:log,count"));
        }
        let lo: f64 = parts[0]
            .parse()
            .map_err(|_| format!("bad grid bound {:?}", parts[0]))?;
        let hi: f64 = parts[1]
            .parse()
            .map_err(|_| format!("bad grid bound {:?}", parts[1]))?;
        let (kind, count) = parts[2]
            .split_once(',')
            .ok_or_else(|| format!("malformed grid spec {:?}", parts[2]))?;
        if kind != "log" {
            return Err(format!("unsupported grid kind {kind:?} (only \"log\")"));
        }
        let count: usize = count
            .parse()
            .map_err(|_| format!("bad grid count {count:?}"))?;
        if !(lo > 0.0 && hi >= lo) || count == 0 {
            return Err(format!("grid requires 0 < lo <= hi and count >= 1, got {s:?}"));
        }
        if count == 1 {
            return Ok(vec![lo]);
        }
        let ratio = hi / lo;
        Ok((0..count)
            .map(|i| lo * ratio.powf(i as f64 / (count - 1) as f64))
            .collect())
    } else {
        s.split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad variance {tok:?}"))
            })
            .collect()
    }
}

/// 17 significant digits: round-trips f64 exactly.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn cmd_optimize(args: OptimizeArgs) -> Result<u8, String> {
    let cfg = SearchConfig {
        n: args.n,
        r_max: parse_rational(&args.rmax).map_err(|e| e.to_string())?,
        lambda_min: parse_rational(&args.lambda_min).map_err(|e| e.to_string())?,
        lambda_max: parse_rational(&args.lambda_max).map_err(|e| e.to_string())?,
        gamma: args.gamma,
        kappa: args.kappa,
        time_limit: args
            .time_limit_s
            .map(|s| {
                if s > 0.0 && s.is_finite() {
                    Ok(Duration::from_secs_f64(s))
                } else {
                    Err("time limit must be positive".to_string())
                }
            })
            .transpose()?,
    };
    let threads = worker_count(args.parallel)?;
    match optimize_with_threads(&cfg, threads) {
        Ok(result) => {
            let json = serde_json::json!({
                "wavelengths": result
                    .wavelengths
                    .lambdas()
                    .iter()
                    .map(|l| l.to_string())
                    .collect::<Vec<_>>(),
                "p": result.p,
                "q": result.q,
                "objective": result.objective,
                "gamma": result.gamma,
                "complete": result.complete,
                "nodes_visited": result.nodes_visited,
            });
            println!("{json}");
            Ok(if result.complete { 0 } else { 2 })
        }
        Err(SearchError::Infeasible) => {
            eprintln!("error: {}", SearchError::Infeasible);
            Ok(2)
        }
        Err(e) => Err(e.to_string()),
    }
}

fn cmd_estimate(args: EstimateArgs) -> Result<u8, String> {
    let ws = parse_wavelengths(&args.wavelengths)?;
    let raw: Vec<f64> = args
        .phases
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad phase {tok:?}"))
        })
        .collect::<Result<_, _>>()?;
    if raw.len() != ws.len() {
        return Err(format!(
            "got {} phases for {} wavelengths",
            raw.len(),
            ws.len()
        ));
    }
    let ctx = LatticeContext64::new(ws);
    let y = PhaseVector::wrapped(&raw);
    let est = estimate_range(&y, &ctx);
    match args.format.as_str() {
        "json" => {
            let json = serde_json::json!({
                "r_hat": est.r_hat,
                "residual": est.residual,
                "zeta_hat": est.zeta_hat.iter().map(|z| z.to_string()).collect::<Vec<_>>(),
                "period": ctx.source().period().to_string(),
            });
            println!("{json}");
        }
        "text" => {
            println!("r_hat = {}", est.r_hat);
            println!("residual = {:e}", est.residual);
            let zetas: Vec<String> = est.zeta_hat.iter().map(|z| z.to_string()).collect();
            println!("zeta_hat = [{}]", zetas.join(", "));
            println!("period = {}", ctx.source().period());
        }
        other => return Err(format!("unknown format {other:?} (text or json)")),
    }
    Ok(0)
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("sigma_sq,sample_mse,predicted_mse,correct_rate,p_upper,trials\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_f64(row.sigma_sq),
            fmt_f64(row.sample_mse),
            fmt_f64(row.predicted_mse),
            fmt_f64(row.correct_rate),
            fmt_f64(row.p_upper),
            row.trials
        ));
    }
    out
}

fn cmd_simulate(args: SimulateArgs) -> Result<u8, String> {
    let ws = parse_wavelengths(&args.wavelengths)?;
    let grid = parse_sigma_grid(&args.sigma2)?;
    let cfg =
        SimConfig::new(ws.clone(), args.r0, grid, args.trials, args.seed).map_err(|e| e.to_string())?;
    let ctx = LatticeContext64::new(ws);
    let threads = worker_count(args.parallel)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| e.to_string())?;
    let rows = pool.install(|| run_sweep(&cfg, &ctx));
    let csv = sweep_csv(&rows);
    match &args.out {
        Some(path) => {
            let mut file = std::fs::File::create(path)
                .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
            file.write_all(csv.as_bytes())
                .map_err(|e| format!("write failed: {e}"))?;
        }
        None => print!("{csv}"),
    }
    Ok(0)
}

fn cmd_bounds(args: BoundsArgs) -> Result<u8, String> {
    let ws = parse_wavelengths(&args.wavelengths)?;
    let grid = parse_sigma_grid(&args.sigma2)?;
    if grid.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err("noise variances must be positive".into());
    }
    let ctx = LatticeContext64::new(ws);
    let mut out = String::from("sigma_sq,predicted_mse,p_upper,p_lower\n");
    for &sigma_sq in &grid {
        let mse = wavesel::analysis::predicted_mse(ctx.source(), sigma_sq);
        let (upper, lower) = if ctx.n() == 1 {
            (1.0, 1.0)
        } else {
            (
                prob_correct_upper(&ctx, sigma_sq).map_err(|e| e.to_string())?,
                prob_correct_lower(&ctx, sigma_sq).map_err(|e| e.to_string())?,
            )
        };
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(sigma_sq),
            fmt_f64(mse),
            fmt_f64(upper),
            fmt_f64(lower)
        ));
    }
    print!("{out}");
    Ok(0)
}
