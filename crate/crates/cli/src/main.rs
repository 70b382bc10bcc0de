//! `deltahedge` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use deltahedge_core::compare::{compare, write_p_values, write_table, ComparisonRow, ReportSeries};
use deltahedge_core::config::RunConfig;
use deltahedge_core::coordinator::{load_market, run_backtest, TrainedAgents};
use deltahedge_core::market_data::{
    synth_generate, write_bars, write_option_chain, write_sentiment, write_vix, RegimeShock, SynthParams,
};
use deltahedge_core::metrics::compute_metrics;
use deltahedge_core::plot::{line_chart, Series};
use deltahedge_core::rl::write_training_logs;
use deltahedge_core::Error;

#[derive(Parser)]
#[command(
    name = "deltahedge",
    version,
    about = "Backtest a coordinated trading and put-hedging agent pair"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic four-feed dataset.
    Synth(SynthArgs),
    /// Train the trading agent and every hedging candidate; write checkpoints.
    Train,
    /// Run the configured strategy and write a report directory.
    Backtest,
    /// Compare report directories (or configs, which are backtested first).
    Compare(CompareArgs),
    /// Re-render the plot and metric table of a report directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 1500)]
    days: usize,
    #[arg(long, default_value_t = 100.0)]
    s0: f64,
    #[arg(long, default_value_t = 0.08)]
    mu: f64,
    #[arg(long, default_value_t = 0.2)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    rate: f64,
    #[arg(long, default_value = "2016-01-04")]
    start: NaiveDate,
    /// Embedded regime `START_DAY:DAYS:MU:SIGMA`; repeatable.
    #[arg(long, value_parser = parse_shock)]
    shock: Vec<RegimeShock>,
}

#[derive(Args)]
struct CompareArgs {
    /// Report directories or config files.
    #[arg(required = true, num_args = 2..)]
    inputs: Vec<PathBuf>,
    /// Strategy the others are tested against.
    #[arg(long)]
    reference: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Report directory written by `backtest`.
    dir: PathBuf,
}

fn parse_shock(s: &str) -> Result<RegimeShock, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 4 {
        return Err("expected START_DAY:DAYS:MU:SIGMA".into());
    }
    let num = |p: &str| p.parse::<f64>().map_err(|e| format!("`{p}`: {e}"));
    let int = |p: &str| p.parse::<usize>().map_err(|e| format!("`{p}`: {e}"));
    Ok(RegimeShock {
        start_day: int(parts[0])?,
        days: int(parts[1])?,
        mu: num(parts[2])?,
        sigma: num(parts[3])?,
    })
}

/// A failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let mut message = e.to_string();
        let mut source = std::error::Error::source(&e);
        while let Some(s) = source {
            let text = s.to_string();
            if !message.contains(&text) {
                message.push_str(": ");
                message.push_str(&text);
            }
            source = s.source();
        }
        Failure {
            code: e.exit_code() as u8,
            message,
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 3,
        message: format!("cannot write {}: {e}", path.display()),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_failure(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_failure(path, e))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("in-memory write");
    buf
}

fn load_config(global: &Global, path: Option<&Path>) -> Result<RunConfig, Failure> {
    let mut cfg = match path.or(global.config.as_deref()) {
        Some(p) => RunConfig::load(p).map_err(Error::from)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.run.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(global: &Global, default: &str) -> PathBuf {
    global.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn cmd_synth(global: &Global, args: &SynthArgs) -> Result<(), Failure> {
    let params = SynthParams {
        seed: global.seed.unwrap_or(SynthParams::default().seed),
        n_days: args.days,
        s0: args.s0,
        mu: args.mu,
        sigma: args.sigma,
        rate: args.rate,
        start: args.start,
        shocks: args.shock.clone(),
        ..SynthParams::default()
    };
    let data = synth_generate(&params).map_err(Error::from)?;
    let out = out_dir(global, "data");
    write_file(&out.join("bars.csv"), &csv_bytes(|b| write_bars(b, &data.bars)))?;
    write_file(
        &out.join("options.csv"),
        &csv_bytes(|b| write_option_chain(b, &data.options)),
    )?;
    write_file(
        &out.join("sentiment.csv"),
        &csv_bytes(|b| write_sentiment(b, &data.sentiment)),
    )?;
    write_file(&out.join("vix.csv"), &csv_bytes(|b| write_vix(b, &data.vix)))?;
    println!("wrote {} days to {}", data.bars.len(), out.display());
    Ok(())
}

fn cmd_train(global: &Global) -> Result<(), Failure> {
    let cfg = load_config(global, None)?;
    let market = load_market(&cfg)?;
    let (agents, logs) = TrainedAgents::train(&cfg, &market)?;
    let out = out_dir(global, "checkpoints");
    agents.save(&out)?;
    write_file(
        &out.join("training_log.csv"),
        &csv_bytes(|b| write_training_logs(b, &logs)),
    )?;
    println!("wrote {} checkpoints to {}", 1 + agents.hedgers.len(), out.display());
    Ok(())
}

fn cmd_backtest(global: &Global) -> Result<(), Failure> {
    let cfg = load_config(global, None)?;
    let market = load_market(&cfg)?;
    let report = run_backtest(&cfg, &market)?;
    let out = out_dir(global, "report");
    report.write_dir(&out)?;
    for event in &report.events {
        eprintln!("{event}");
    }
    match &report.metrics {
        Some(m) => println!(
            "{}: TR {:.2}% SR {:.3} MDD {:.2}% over {} days -> {}",
            report.strategy,
            100.0 * m.total_return,
            m.sharpe,
            100.0 * m.max_drawdown,
            report.rows.len(),
            out.display()
        ),
        None => println!("{}: {} day(s) -> {}", report.strategy, report.rows.len(), out.display()),
    }
    Ok(())
}

fn cmd_compare(global: &Global, args: &CompareArgs) -> Result<(), Failure> {
    let cfg = load_config(global, None)?;
    let mut series = Vec::with_capacity(args.inputs.len());
    for input in &args.inputs {
        if input.is_dir() {
            series.push(ReportSeries::load_dir(input)?);
        } else {
            let member = load_config(global, Some(input))?;
            let market = load_market(&member)?;
            let report = run_backtest(&member, &market)?;
            series.push(ReportSeries::from_report(&report, member.rl.rf_daily()));
        }
    }
    let reference = args.reference.as_deref().or(Some(cfg.run.reference.as_str()));
    let windows = cfg.regime_windows().map_err(Error::from)?;
    let result = compare(&series, reference, &windows, cfg.run.bootstrap_resamples, cfg.run.seed)?;
    let out = out_dir(global, "comparison");
    write_file(&out.join("table.csv"), &csv_bytes(|b| write_table(b, &result.rows)))?;
    write_file(
        &out.join("p_values.csv"),
        &csv_bytes(|b| write_p_values(b, &result.p_values)),
    )?;
    for regime in &result.regimes {
        write_file(
            &out.join(format!("table_{}.csv", regime.label)),
            &csv_bytes(|b| write_table(b, &regime.rows)),
        )?;
    }
    let mut json = serde_json::to_string_pretty(&result).expect("comparison serializes");
    json.push('\n');
    write_file(&out.join("comparison.json"), json.as_bytes())?;
    let curves: Vec<Series<'_>> = series
        .iter()
        .map(|s| Series {
            label: &s.strategy,
            values: &s.equity,
        })
        .collect();
    write_file(&out.join("equity.svg"), line_chart("Equity curves", &curves).as_bytes())?;
    print!(
        "{}",
        String::from_utf8_lossy(&csv_bytes(|b| write_table(b, &result.rows)))
    );
    Ok(())
}

fn cmd_report(global: &Global, args: &ReportArgs) -> Result<(), Failure> {
    let series = ReportSeries::load_dir(&args.dir)?;
    let metrics = compute_metrics(&series.equity, series.rf_daily).map_err(Error::from)?;
    let out = global.out.clone().unwrap_or_else(|| args.dir.clone());
    let row = ComparisonRow {
        strategy: series.strategy.clone(),
        metrics,
    };
    let table = csv_bytes(|b| write_table(b, std::slice::from_ref(&row)));
    write_file(&out.join("metrics.csv"), &table)?;
    let svg = line_chart(
        &format!("Equity: {}", series.strategy),
        &[Series {
            label: &series.strategy,
            values: &series.equity,
        }],
    );
    write_file(&out.join("equity.svg"), svg.as_bytes())?;
    print!("{}", String::from_utf8_lossy(&table));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(&cli.global, a),
        Command::Train => cmd_train(&cli.global),
        Command::Backtest => cmd_backtest(&cli.global),
        Command::Compare(a) => cmd_compare(&cli.global, a),
        Command::Report(a) => cmd_report(&cli.global, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
