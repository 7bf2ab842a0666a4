//! `petallab`: oracles, estimates, flow-time sweeps and theorem checks.

mod config;
mod error;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use petallab_core::experiments::{self, Quantity, Status, SweepReport};
use petallab_core::oracles::{self, ClosedForm, Side};
use petallab_core::report::{self, Format};
use petallab_core::Point64;

use config::RunConfig;
use error::{CliError, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(
    name = "petallab",
    version,
    about = "Potential theory along backward orbits of semigroups"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a closed-form oracle.
    Oracle(OracleArgs),
    /// Estimate one quantity at a single time.
    Estimate(EstimateArgs),
    /// Run a flow-time sweep and write its report.
    Sweep(SweepArgs),
    /// Run one theorem check.
    Check(CheckArgs),
    /// Re-render a saved report.json.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OracleKind {
    DiskMetrics,
    HalfplaneMetrics,
    StripMetrics,
    StripHarmonic,
    HalfplaneSegment,
    DiskConcentric,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SideArg {
    Upper,
    Lower,
}

#[derive(Debug, Args)]
struct OracleArgs {
    kind: OracleKind,
    /// Point as `re,im`.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    z: Point64,
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    w: Option<Point64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    y0: f64,
    #[arg(long, default_value_t = std::f64::consts::PI, allow_hyphen_values = true)]
    y1: f64,
    #[arg(long, value_enum, default_value_t = SideArg::Upper)]
    side: SideArg,
    /// Segment `[a, b]` on the real axis.
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    /// Radius of the concentric disk.
    #[arg(long)]
    r: Option<f64>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Walks per Monte Carlo estimate, overriding the config.
    #[arg(long)]
    walks: Option<usize>,
    /// Print a row counter on stderr.
    #[arg(long)]
    progress: bool,
}

#[derive(Debug, Args)]
struct OutArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of csv,json,svg.
    #[arg(long, value_delimiter = ',', value_enum)]
    format: Vec<FormatArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Svg,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
            FormatArg::Svg => Format::Svg,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum QuantityArg {
    Harmonic,
    Density,
    Distance,
    Green,
    Area,
    NDiameter,
    Capacity,
    Minda,
}

impl From<QuantityArg> for Quantity {
    fn from(q: QuantityArg) -> Self {
        match q {
            QuantityArg::Harmonic => Quantity::Harmonic,
            QuantityArg::Density => Quantity::Density,
            QuantityArg::Distance => Quantity::Distance,
            QuantityArg::Green => Quantity::Green,
            QuantityArg::Area => Quantity::Area,
            QuantityArg::NDiameter => Quantity::NDiameter,
            QuantityArg::Capacity => Quantity::Capacity,
            QuantityArg::Minda => Quantity::Minda,
        }
    }
}

#[derive(Debug, Args)]
struct EstimateArgs {
    quantity: QuantityArg,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    t: f64,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    emit_config: bool,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(long)]
    name: String,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// A report.json written by `sweep` or `check`.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    out: OutArgs,
}

fn parse_point(s: &str) -> Result<Point64, String> {
    let (re, im) = s
        .split_once(',')
        .ok_or_else(|| format!("expected re,im, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    Ok(Point64::new(parse(re)?, parse(im)?))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("petallab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::Oracle(a) => oracle(&a).map(|_| 0),
        Command::Estimate(a) => estimate(&a).map(|_| 0),
        Command::Sweep(a) => sweep(&a),
        Command::Check(a) => check(&a),
        Command::Report(a) => rerender(&a).map(|_| 0),
    }
}

fn oracle(a: &OracleArgs) -> Result<(), CliError> {
    let need_w = || a.w.ok_or_else(|| CliError::Usage("this oracle needs --w".into()));
    let need =
        |v: Option<f64>, name: &str| v.ok_or_else(|| CliError::Usage(format!("this oracle needs --{name}")));
    let metrics = |form: ClosedForm<f64>| -> Result<(), CliError> {
        let m = form.metrics(a.z, need_w()?)?;
        println!("lambda = {}", m.density);
        println!("d = {}", m.distance);
        println!("g = {}", m.green);
        Ok(())
    };
    match a.kind {
        OracleKind::DiskMetrics => metrics(ClosedForm::Disk)?,
        OracleKind::HalfplaneMetrics => metrics(ClosedForm::HalfPlane { y0: 0.0 })?,
        OracleKind::StripMetrics => metrics(ClosedForm::Strip { y0: a.y0, y1: a.y1 })?,
        OracleKind::StripHarmonic => {
            let side = match a.side {
                SideArg::Upper => Side::Upper,
                SideArg::Lower => Side::Lower,
            };
            println!(
                "omega = {}",
                oracles::strip_harmonic_measure(a.z, a.y0, a.y1, side)?
            );
        }
        OracleKind::HalfplaneSegment => {
            let w = oracles::halfplane_segment_measure(a.z, need(a.a, "a")?, need(a.b, "b")?)?;
            println!("omega = {w}");
        }
        OracleKind::DiskConcentric => {
            let (omega, cap) = oracles::disk_concentric(a.z.norm(), need(a.r, "r")?)?;
            println!("omega = {omega}");
            println!("cap = {cap}");
        }
    }
    Ok(())
}

/// Loads the config (or the default fixture), then applies the seed and walk
/// overrides.
fn load(run: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &run.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.resolve_seed(run.seed)?;
    if let Some(n) = run.walks {
        cfg.sweep.wos.n_walks = n;
    }
    cfg.sweep
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn counter(enabled: bool) -> impl FnMut(usize, usize) {
    move |done, total| {
        if enabled {
            eprint!("\r{done}/{total}");
            if done == total {
                eprintln!();
            }
            let _ = std::io::stderr().flush();
        }
    }
}

fn estimate(a: &EstimateArgs) -> Result<(), CliError> {
    let cfg = load(&a.run)?;
    let rows = experiments::rows_at(&cfg.sweep, a.quantity.into(), a.t)?;
    println!("{}", report::CSV_HEADER);
    for r in rows {
        let flags: Vec<&str> = r.flags.iter().map(|f| f.as_str()).collect();
        println!(
            "{:?},{},{:?},{:?},{}",
            r.t,
            r.quantity,
            r.value,
            r.std_err,
            flags.join(";")
        );
    }
    Ok(())
}

fn formats(out: &OutArgs, cfg: &RunConfig) -> Vec<Format> {
    if out.format.is_empty() {
        cfg.output.formats.clone()
    } else {
        out.format.iter().map(|f| (*f).into()).collect()
    }
}

fn write(report: &SweepReport, formats: &[Format], dir: &Path) -> Result<(), CliError> {
    report::render_report(report, formats, dir)?;
    Ok(())
}

fn summary(label: &str, report: &SweepReport, dir: &Path) -> i32 {
    let status = report.status();
    let parts: Vec<String> = report
        .verdicts
        .iter()
        .map(|v| format!("{} {} (margin {:.3e})", v.name, v.status.as_str(), v.margin))
        .collect();
    println!(
        "{label}: {} [{}] rows={} out={}",
        status.as_str(),
        parts.join(", "),
        report.rows.len(),
        dir.display()
    );
    match status {
        Status::Pass => 0,
        Status::Fail => EXIT_FAIL,
        Status::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn sweep(a: &SweepArgs) -> Result<i32, CliError> {
    let mut cfg = load(&a.run)?;
    if let Some(dir) = &a.out.out {
        cfg.output.dir = dir.clone();
    }
    if !a.out.format.is_empty() {
        cfg.output.formats = formats(&a.out, &cfg);
    }
    if a.emit_config {
        print!("{}", cfg.to_toml()?);
        return Ok(0);
    }
    let report = experiments::t_sweep_with(&cfg.sweep, &mut counter(a.run.progress))?;
    write(&report, &cfg.output.formats, &cfg.output.dir)?;
    if report.verdicts.is_empty() {
        println!(
            "sweep: {} rows, no verdicts, out={}",
            report.rows.len(),
            cfg.output.dir.display()
        );
        return Ok(0);
    }
    Ok(summary("sweep", &report, &cfg.output.dir))
}

fn check(a: &CheckArgs) -> Result<i32, CliError> {
    if !experiments::CHECKS.contains(&a.name.as_str()) {
        return Err(CliError::Usage(format!(
            "unknown check {:?}; expected one of {}",
            a.name,
            experiments::CHECKS.join(", ")
        )));
    }
    let cfg = load(&a.run)?;
    let dir = a.out.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let report = experiments::check_with(&a.name, &cfg.sweep, &mut counter(a.run.progress))?;
    write(&report, &formats(&a.out, &cfg), &dir)?;
    Ok(summary(&a.name, &report, &dir))
}

fn rerender(a: &ReportArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.input)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", a.input.display())))?;
    let report = report::from_json(&text)?;
    let dir = a.out.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let formats = if a.out.format.is_empty() {
        Format::ALL.to_vec()
    } else {
        a.out.format.iter().map(|f| (*f).into()).collect()
    };
    write(&report, &formats, &dir)?;
    println!("report: {} rows -> {}", report.rows.len(), dir.display());
    Ok(())
}
