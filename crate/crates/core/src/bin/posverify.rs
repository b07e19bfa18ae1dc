use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use posverify::harness::{
    self, preset, resolve_theta, run_experiment_with, ExperimentConfig, NoiseMode, ReportFormat,
    SignalSpec, ThetaPlan,
};
use posverify::theta::{self, CalibrationMeta};
use posverify::{FakingSearchConfig, Region};

#[derive(Parser)]
#[command(
    name = "posverify",
    version,
    about = "Position verification experiments for sensor networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate a θ table and cache it.
    Theta(ThetaArgs),
    /// Run one experiment.
    Run(RunArgs),
    /// Vary the number of genuine nodes and report success rates.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct ThetaArgs {
    #[arg(long)]
    n: usize,
    /// `SIDE` for a square or `X_MIN,X_MAX,Y_MIN,Y_MAX`.
    #[arg(long, default_value = "100")]
    region: String,
    /// `negligible`, `significant`, or σ in watts.
    #[arg(long, default_value = "negligible")]
    noise_mode: String,
    /// Sample counts as `NUM_X0xNUM_LAYOUTS`.
    #[arg(long, default_value = "25x20")]
    samples: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file; defaults to the cache directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    transmit_power: f64,
    #[arg(long, default_value_t = 0.125)]
    wavelength: f64,
    #[arg(long, default_value_t = 2.0)]
    path_loss_exponent: f64,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment configuration.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    format: String,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: ExperimentArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: ExperimentArgs,
    /// Inclusive range of genuine counts, `FROM:TO`.
    #[arg(long)]
    n0: String,
}

fn parse_region(s: &str) -> Result<Region> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad region {s:?}"))?;
    Ok(match parts[..] {
        [side] => Region::square(side)?,
        [a, b, c, d] => Region::new(a, b, c, d)?,
        _ => bail!("region must be SIDE or X_MIN,X_MAX,Y_MIN,Y_MAX"),
    })
}

fn parse_noise(s: &str) -> Result<NoiseMode> {
    Ok(match s {
        "negligible" => NoiseMode::Negligible,
        "significant" => NoiseMode::Significant,
        other => NoiseMode::Explicit(
            other
                .parse()
                .with_context(|| format!("bad noise mode {other:?}"))?,
        ),
    })
}

fn parse_pair(s: &str, sep: char) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once(sep)
        .with_context(|| format!("expected A{sep}B, got {s:?}"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn theta_cmd(args: ThetaArgs) -> Result<()> {
    let region = parse_region(&args.region)?;
    let signal = SignalSpec {
        transmit_power: args.transmit_power,
        wavelength: args.wavelength,
        path_loss_exponent: args.path_loss_exponent,
    };
    let ss = harness::compute_noise_scale(&signal, &region)?;
    let sigma = match parse_noise(&args.noise_mode)? {
        NoiseMode::Negligible => 1e-6 * ss,
        NoiseMode::Significant => ss,
        NoiseMode::Explicit(s) => s,
    };
    let (num_x0, num_x_per_x0) = parse_pair(&args.samples, 'x')?;
    let meta = CalibrationMeta {
        signal: signal.with_sigma(sigma)?,
        region,
        faking: FakingSearchConfig::for_region(&region),
        genuine_count: args.n.div_ceil(2),
        num_x0,
        num_x_per_x0,
        seed: args.seed,
    };
    let (table, path) = match args.out {
        Some(path) => {
            let table = theta::calibrate(args.n, &meta)?;
            table.save(&path)?;
            (table, path)
        }
        None => {
            let dir = theta::cache_dir();
            let table = theta::load_or_calibrate(&dir, args.n, &meta)?;
            let path = dir.join(table.file_name());
            (table, path)
        }
    };
    println!(
        "{}",
        serde_json::json!({
            "path": path,
            "n": table.n,
            "theta_star": table.theta_star,
            "quantiles": table.quantiles,
        })
    );
    Ok(())
}

fn load_config(args: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        (None, Some(name)) => preset(name)?,
        (None, None) => bail!("either --config or --preset is required"),
    };
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_out(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn theta_plan(cfg: &ExperimentConfig) -> Result<ThetaPlan> {
    Ok(resolve_theta(cfg, Some(&theta::cache_dir()))?)
}

fn run_cmd(args: RunArgs) -> Result<()> {
    let format: ReportFormat = args.common.format.parse()?;
    let cfg = load_config(&args.common)?;
    let report = run_experiment_with(&cfg, &theta_plan(&cfg)?)?;
    write_out(args.common.report.as_ref(), &report.render(format))
}

fn sweep_cmd(args: SweepArgs) -> Result<()> {
    let format: ReportFormat = args.common.format.parse()?;
    let base = load_config(&args.common)?;
    let (from, to) = parse_pair(&args.n0, ':')?;
    if from > to {
        bail!("empty n0 range {from}:{to}");
    }
    let plan = theta_plan(&base)?;
    let mut rows = Vec::new();
    for n0 in from..=to {
        let cfg = ExperimentConfig { n0, ..base.clone() };
        let report = run_experiment_with(&cfg, &plan)?;
        rows.push(serde_json::json!({
            "n0": n0,
            "trials": report.aggregate.trials,
            "success_rate": report.aggregate.success_rate,
            "mean_genuine_retained": report.aggregate.mean_genuine_retained,
            "mean_malicious_removed": report.aggregate.mean_malicious_removed,
        }));
    }
    let text = match format {
        ReportFormat::Json => serde_json::to_string_pretty(&rows)? + "\n",
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "n0",
                "trials",
                "success_rate",
                "mean_genuine_retained",
                "mean_malicious_removed",
            ])?;
            for r in &rows {
                w.write_record([
                    r["n0"].to_string(),
                    r["trials"].to_string(),
                    r["success_rate"].to_string(),
                    r["mean_genuine_retained"].to_string(),
                    r["mean_malicious_removed"].to_string(),
                ])?;
            }
            String::from_utf8(w.into_inner()?)?
        }
    };
    write_out(args.common.report.as_ref(), &text)
}

fn main() {
    let outcome = match Cli::parse().command {
        Command::Theta(a) => theta_cmd(a),
        Command::Run(a) => run_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
