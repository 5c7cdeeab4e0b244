//! Command-line front end for the `ccp` binary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::experiments::{
    self, BoundParams, NonGaussianParams, TheoremSuiteParams, THEOREM_CHECKS,
};
use crate::monte_carlo::predict_theorem1;
use crate::noise::NoiseModel;
use crate::report::{write_file, ExperimentReport, OutputFormat, Series};
use crate::signal::{ingest_csv, partition, WindowPlan};
use crate::spectral::{bartlett, ccp, dft_windows, welch_hann, PhaseSchedule, Reduction};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

fn parse_seed(s: &str) -> std::result::Result<u64, String> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("invalid seed `{s}`: {e}"))
}

#[derive(Debug, Parser)]
#[command(
    name = "ccp",
    version,
    about = "Cross-correlation periodogram PSD estimation and simulation studies"
)]
pub struct Cli {
    /// Root seed; decimal or 0x-prefixed hex.
    #[arg(long, global = true, default_value = "0x5EED", value_parser = parse_seed)]
    pub seed: u64,
    /// Directory for report files.
    #[arg(
        short = 'o',
        long = "output-dir",
        global = true,
        default_value = "ccp-out"
    )]
    pub output_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Both)]
    pub format: FormatArg,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
    Both,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => OutputFormat::Json,
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Both => OutputFormat::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Bartlett,
    Welch,
    Ccp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReductionArg {
    Real,
    Abs,
    Modulus,
    /// Realign by the angle given with `--phase`.
    Phase,
    /// Realign by a quarter period.
    Quadrature,
    /// Realign by the phase advance of a `--gap`-sample gap at each bin.
    Gap,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a PSD from a CSV sample file.
    Estimate(EstimateArgs),
    /// CCP against Bartlett and Welch on one noisy tone.
    Compare,
    /// Monte Carlo table of the CCP noise floor against its bound.
    Bounds(TrialArgs),
    /// CCP response to inter-window gaps.
    PhaseGap,
    /// Quarter-period misalignment and its realignment.
    Annihilate,
    /// Noise-floor decay under non-Gaussian noise.
    Nongaussian(TrialArgs),
    /// Monte Carlo suite of the noise-moment laws; prints a pass/fail matrix.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct TrialArgs {
    /// Monte Carlo trials per configuration.
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// CSV sample file (one value per line, optional `# sample_rate=` header).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MethodArg::Ccp)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value_t = ReductionArg::Abs)]
    pub reduction: ReductionArg,
    /// Realignment angle in radians for `--reduction phase`.
    #[arg(long, allow_hyphen_values = true)]
    pub phase: Option<f64>,
    /// Number of windows; defaults to as many as fit.
    #[arg(short = 'M', long = "windows")]
    pub windows: Option<usize>,
    /// Window length in samples.
    #[arg(short = 'L', long = "window-len", default_value_t = 100)]
    pub window_len: usize,
    /// Samples skipped between windows.
    #[arg(long, default_value_t = 0)]
    pub gap: usize,
    /// Noise model assumed by `--validate-theorems`.
    #[arg(long, default_value = "gaussian:sigma=1")]
    pub noise: String,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Also run the noise-moment suite at this L and M.
    #[arg(long)]
    pub validate_theorems: bool,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value = "gaussian:sigma=1")]
    pub noise: String,
    #[arg(short = 'L', long = "window-len", default_value_t = 100)]
    pub window_len: usize,
    /// Window counts to test; repeatable.
    #[arg(short = 'M', long = "windows", num_args = 1..)]
    pub windows: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub bin: usize,
    #[arg(long)]
    pub trials: Option<usize>,
}

/// Top-level failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } => EXIT_IO,
            _ => EXIT_USAGE,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn parse_noise(flag: &str, text: &str) -> std::result::Result<NoiseModel, CliError> {
    text.parse()
        .map_err(|e: Error| usage(format!("--{flag} `{text}`: {e}")))
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(passed) => {
            if passed {
                EXIT_OK
            } else {
                EXIT_ASSERTION
            }
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

/// Runs a parsed command; `Ok(false)` means values were written but a hard
/// assertion failed.
pub fn run(cli: &Cli) -> std::result::Result<bool, CliError> {
    let mut reports = Vec::new();
    match &cli.command {
        Command::Estimate(args) => reports.extend(estimate(args, cli.seed)?),
        Command::Compare => reports.push(experiments::run_comparison(cli.seed)?),
        Command::Bounds(t) => {
            let mut p = BoundParams::default();
            if let Some(n) = t.trials {
                p.trials = n;
            }
            reports.push(experiments::run_bound_validation_with(&p, cli.seed)?);
        }
        Command::PhaseGap => reports.push(experiments::run_phase_gap(cli.seed)?),
        Command::Annihilate => reports.push(experiments::run_annihilation(cli.seed)?),
        Command::Nongaussian(t) => {
            let mut p = NonGaussianParams::default();
            if let Some(n) = t.trials {
                p.trials = n;
            }
            reports.push(experiments::run_nongaussian_with(&p, cli.seed)?);
        }
        Command::Validate(args) => {
            let mut p = TheoremSuiteParams {
                noise: parse_noise("noise", &args.noise)?,
                window_len: args.window_len,
                bin: args.bin,
                ..TheoremSuiteParams::default()
            };
            if !args.windows.is_empty() {
                p.windows = args.windows.clone();
            }
            if let Some(n) = args.trials {
                p.trials = n;
            }
            let rep = experiments::run_theorem_suite_with(&p, cli.seed)?;
            print!("{}", pass_matrix(&rep, &p.windows));
            reports.push(rep);
        }
    }

    let mut written = Vec::new();
    for rep in &reports {
        written.extend(rep.write(&cli.output_dir, cli.format.into())?);
    }
    write_metadata(cli, &written)?;
    let mut passed = true;
    for rep in &reports {
        for flag in rep.pass_flags().iter().filter(|f| f.hard && !f.pass) {
            eprintln!("assertion failed: {}/{}", rep.name, flag.name);
        }
        passed &= rep.passed();
    }
    Ok(passed)
}

fn estimate(
    args: &EstimateArgs,
    seed: u64,
) -> std::result::Result<Vec<ExperimentReport>, CliError> {
    if args.validate_theorems {
        if let Some(m) = args.windows.filter(|&m| m < 3) {
            return Err(usage(format!(
                "--validate-theorems needs -M >= 3 windows (the noise-moment laws hold only for M >= 3), got -M {m}"
            )));
        }
    }
    let noise = parse_noise("noise", &args.noise)?;
    let reduction = match (args.reduction, args.phase) {
        (ReductionArg::Phase, Some(theta)) => {
            Reduction::PhaseCorrected(PhaseSchedule::Constant(theta))
        }
        (ReductionArg::Phase, None) => {
            return Err(usage("--reduction phase needs --phase <radians>"))
        }
        (_, Some(_)) => return Err(usage("--phase only applies with --reduction phase")),
        (ReductionArg::Real, None) => Reduction::Real,
        (ReductionArg::Abs, None) => Reduction::Abs,
        (ReductionArg::Modulus, None) => Reduction::ModulusOfMean,
        (ReductionArg::Quadrature, None) => Reduction::quadrature(),
        (ReductionArg::Gap, None) => Reduction::PhaseCorrected(PhaseSchedule::Gap(args.gap)),
    };

    let mut reports = Vec::new();
    match &args.input {
        Some(path) => reports.push(estimate_file(path, args, reduction)?),
        None if !args.validate_theorems => return Err(usage("estimate needs --input <file>")),
        None => {}
    }
    if args.validate_theorems {
        let m = match args.windows {
            Some(m) => m,
            None => reports
                .first()
                .and_then(|r| r.parameters.get("num_windows"))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| usage("--validate-theorems without --input needs -M"))?,
        };
        if m < 3 {
            return Err(usage(format!(
                "--validate-theorems needs -M >= 3 windows (the noise-moment laws hold only for M >= 3), got {m}"
            )));
        }
        let mut p = TheoremSuiteParams {
            noise,
            window_len: args.window_len,
            bin: (args.window_len / 10).max(1),
            windows: vec![m],
            ..TheoremSuiteParams::default()
        };
        if let Some(n) = args.trials {
            p.trials = n;
        }
        if args.window_len < 4 {
            return Err(usage("--validate-theorems needs -L >= 4"));
        }
        let rep = experiments::run_theorem_suite_with(&p, seed)?;
        print!("{}", pass_matrix(&rep, &p.windows));
        reports.push(rep);
    }
    Ok(reports)
}

fn estimate_file(
    path: &Path,
    args: &EstimateArgs,
    reduction: Reduction,
) -> std::result::Result<ExperimentReport, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError {
        code: EXIT_IO,
        message: format!("--input {}: {e}", path.display()),
    })?;
    let record =
        ingest_csv(&text).map_err(|e| usage(format!("--input {}: {e}", path.display())))?;
    let l = args.window_len;
    let m = match args.windows {
        Some(m) => m,
        None => (record.len() + args.gap) / (l + args.gap),
    };
    if m == 0 {
        return Err(usage(format!(
            "--input {}: {} samples do not fill one window of -L {l}",
            path.display(),
            record.len()
        )));
    }
    let plan = WindowPlan::with_gap(l, m, args.gap)?;
    let windows = partition(&record, &plan)?;
    let est = match args.method {
        MethodArg::Bartlett => bartlett(&dft_windows(&windows)?)?,
        MethodArg::Welch => welch_hann(&windows)?,
        MethodArg::Ccp => ccp(&dft_windows(&windows)?, &reduction)?,
    };
    let bin_hz = record.sample_rate().unwrap_or(1.0) / l as f64;

    let mut rep = ExperimentReport::new("estimate");
    rep.param("input", path.display());
    rep.param("method", format!("{:?}", args.method).to_lowercase());
    if args.method == MethodArg::Ccp {
        rep.param("reduction", format!("{reduction:?}"));
    }
    rep.param("window_len", l);
    rep.param("num_windows", m);
    rep.param("gap", args.gap);
    rep.param(
        "freq_unit",
        if record.sample_rate().is_some() {
            "hz"
        } else {
            "cycles_per_sample"
        },
    );
    rep.param("dropped_samples", record.len() - plan.required_samples());
    if args.method == MethodArg::Ccp && m >= 3 {
        if let Ok(noise) = parse_noise("noise", &args.noise) {
            rep.scalar(
                "noise_floor_bound",
                predict_theorem1(noise.sigma, m)?.abs_bound,
            );
        }
    }
    rep.series.push(Series::psd("psd", &est.power, bin_hz));
    Ok(rep)
}

/// Rows are checks, columns are window counts.
pub fn pass_matrix(rep: &ExperimentReport, windows: &[usize]) -> String {
    let flags: BTreeMap<String, bool> = rep
        .pass_flags()
        .into_iter()
        .map(|f| (f.name, f.pass))
        .collect();
    let mut out = String::new();
    let _ = write!(out, "{:<22}", "check");
    for m in windows {
        let _ = write!(out, "{:>8}", format!("M={m}"));
    }
    out.push('\n');
    for check in THEOREM_CHECKS {
        let _ = write!(out, "{check:<22}");
        for m in windows {
            let cell = match flags.get(&format!("{check}_m{m}")) {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "-",
            };
            let _ = write!(out, "{cell:>8}");
        }
        out.push('\n');
    }
    out
}

fn write_metadata(cli: &Cli, written: &[PathBuf]) -> Result<()> {
    let unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let files: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
    let meta = serde_json::json!({
        "argv": std::env::args().collect::<Vec<_>>(),
        "seed": cli.seed,
        "unix_time": unix,
        "version": env!("CARGO_PKG_VERSION"),
        "files": files,
    });
    let body =
        serde_json::to_string_pretty(&meta).map_err(|e| Error::Unsupported(e.to_string()))?;
    write_file(&cli.output_dir.join("run_metadata.json"), &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_accept_hex() {
        assert_eq!(parse_seed("0x5EED"), Ok(0x5EED));
        assert_eq!(parse_seed("7"), Ok(7));
        assert!(parse_seed("seven").is_err());
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(main_with_args(["ccp", "compare", "--bogus"]), EXIT_USAGE);
        assert_eq!(main_with_args(["ccp"]), EXIT_USAGE);
    }

    #[test]
    fn theorem_validation_needs_three_windows() {
        let cli = Cli::try_parse_from([
            "ccp",
            "estimate",
            "--method",
            "ccp",
            "-M",
            "2",
            "--validate-theorems",
        ])
        .unwrap();
        let err = run(&cli).unwrap_err();
        assert_eq!(err.code, EXIT_USAGE);
        assert!(err.message.contains("M >= 3"), "{}", err.message);
    }
}
