//! Command-line driver: reproducible experiments over the `deconv`
//! library, emitting CSV or JSON for plotting.
//!
//! All randomness flows from the `--seed` of the invoking subcommand;
//! parallel work inside the library derives one counter-indexed substream
//! per task, so output is byte-identical across repeated runs and across
//! worker counts (`DECONV_THREADS`).
//!
//! Exit codes: 0 success, 2 usage error, 3 invalid input, 4 enumeration
//! cap exceeded, 5 numeric failure, 6 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use deconv::inference::{DifferingPositions, InferenceError, ReactivityMixture};
use deconv::nj_model::{
    crossover_window, full_ensemble, tvd_sweep, NjError, NjParams, ShapeProfile,
    DEFAULT_ENUMERATION_CAP,
};
use deconv::pn_bound::{pn_lower_bound, PnError, PnQuery};
use deconv::shape_sim::{mix_profiles, simulate_profile_seeded, SimError};
use deconv::structures::{PairingMask, StructureError};

// ---------------------------------------------------------------------
// argument surface

#[derive(Parser)]
#[command(
    name = "deconv",
    version,
    about = "Recoverability analysis for two-state RNA structure mixtures",
    after_help = "Structure masks are strings of 'x' (paired) and '.' (unpaired), \
                  given inline or as @FILE. Profile data is CSV with header \
                  `index,reactivity`. The DECONV_THREADS environment variable \
                  caps the worker count; results do not depend on it."
)]
struct Cli {
    /// Write output to this file instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format (default: csv for tabular commands, json for
    /// estimate and crossover)
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a reactivity profile for one structure mask
    Simulate {
        /// Structure mask (inline or @FILE)
        #[arg(long)]
        mask: String,
        /// Master seed for the reactivity draws (default 0)
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Blend two reactivity profiles with weight p on the first
    Mix {
        /// Profile CSV for the first structure
        #[arg(long)]
        s: String,
        /// Profile CSV for the second structure
        #[arg(long)]
        t: String,
        /// Mixture weight of the first profile, in [0, 1]
        #[arg(long)]
        p: f64,
    },
    /// Maximum-likelihood mixing ratio from a profile and two masks
    Estimate {
        /// Profile CSV holding the observed reactivities
        #[arg(long)]
        data: String,
        /// First structure mask (inline or @FILE)
        #[arg(long)]
        mask_a: String,
        /// Second structure mask (inline or @FILE)
        #[arg(long)]
        mask_b: String,
    },
    /// Fisher information of the blended reactivity law
    #[command(group(clap::ArgGroup::new("ratio").required(true).args(["p", "p_grid"])))]
    Fisher {
        /// Single mixing ratio in (0, 1)
        #[arg(long)]
        p: Option<f64>,
        /// Ratio grid start:stop:step, all in (0, 1)
        #[arg(long)]
        p_grid: Option<String>,
    },
    /// Crossover point and window for a structure pair
    Crossover {
        /// First structure mask (inline or @FILE)
        #[arg(long)]
        mask_a: String,
        /// Second structure mask (inline or @FILE)
        #[arg(long)]
        mask_b: String,
        /// Data-agreement weight, > 0
        #[arg(long)]
        c: f64,
    },
    /// Lower bound on the probability that a random structure pair hides
    /// the mixing ratio, per length
    PnBound {
        /// Length n, or a range start:stop or start:stop:step
        #[arg(long)]
        n: String,
        /// Per-position pairing probability in (0, 1)
        #[arg(long)]
        q: f64,
    },
    /// Reconstructed ratio and its error across a ratio grid, from the
    /// full Boltzmann ensemble of a structure pair's blended data
    TvdSweep {
        /// First structure mask (inline or @FILE)
        #[arg(long)]
        mask_a: String,
        /// Second structure mask (inline or @FILE)
        #[arg(long)]
        mask_b: String,
        /// Data-agreement weight, > 0
        #[arg(long)]
        c: f64,
        /// Ratio grid start:stop:step within [0, 1]
        #[arg(long)]
        p_grid: String,
        /// Longest mask the exhaustive enumeration accepts
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
        cap: usize,
    },
    /// Boltzmann ensemble over every mask of the profile's length
    Ensemble {
        /// Profile CSV the ensemble is conditioned on
        #[arg(long)]
        data: String,
        /// Data-agreement weight, >= 0
        #[arg(long)]
        c: f64,
        /// Longest profile the exhaustive enumeration accepts
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
        cap: usize,
    },
    /// Mean and max recovery error of the ratio estimator across a grid
    MleExperiment {
        /// First structure mask (inline or @FILE)
        #[arg(long)]
        mask_a: String,
        /// Second structure mask (inline or @FILE)
        #[arg(long)]
        mask_b: String,
        /// Ratio grid start:stop:step within [0, 1]
        #[arg(long)]
        p_grid: String,
        /// Simulated profiles per grid point
        #[arg(long, default_value_t = 1)]
        trials: u64,
        /// Master seed; trial t at grid point i uses substream i*trials + t
        /// (default 0)
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

// ---------------------------------------------------------------------
// error mapping

enum CliError {
    Invalid(String),
    CapExceeded(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 3,
            CliError::CapExceeded(_) => 4,
            CliError::Numeric(_) => 5,
            CliError::Io(_) => 6,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Invalid(m)
            | CliError::CapExceeded(m)
            | CliError::Numeric(m)
            | CliError::Io(m) => m,
        }
    }
}

impl From<NjError> for CliError {
    fn from(e: NjError) -> Self {
        match e {
            NjError::CapExceeded { .. } => CliError::CapExceeded(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::QuadratureNotConverged { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<StructureError> for CliError {
    fn from(e: StructureError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<PnError> for CliError {
    fn from(e: PnError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

// ---------------------------------------------------------------------
// input parsing

/// Mask argument: inline `x.x.` text or `@FILE`.
fn read_mask(arg: &str) -> Result<PairingMask, CliError> {
    let text = match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path)?,
        None => arg.to_string(),
    };
    Ok(text.trim().parse::<PairingMask>()?)
}

/// Profile argument: CSV with header `index,reactivity`, rows indexed
/// 0..n in order. A leading `@` on the path is accepted and ignored.
fn read_profile(arg: &str) -> Result<ShapeProfile, CliError> {
    let path = arg.strip_prefix('@').unwrap_or(arg);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(csv_error)?;
    let headers = reader.headers().map_err(csv_error)?;
    if headers.len() != 2 || &headers[0] != "index" || &headers[1] != "reactivity" {
        return Err(CliError::Invalid(format!(
            "profile {path}: expected header `index,reactivity`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        if record.len() != 2 {
            return Err(CliError::Invalid(format!(
                "profile {path} row {row}: expected 2 fields, found {}",
                record.len()
            )));
        }
        let index: usize = record[0]
            .parse()
            .map_err(|_| CliError::Invalid(format!("profile {path} row {row}: bad index")))?;
        if index != row {
            return Err(CliError::Invalid(format!(
                "profile {path} row {row}: index {index} out of order"
            )));
        }
        let value: f64 = record[1].parse().map_err(|_| {
            CliError::Invalid(format!("profile {path} row {row}: bad reactivity"))
        })?;
        values.push(value);
    }
    Ok(ShapeProfile::new(values)?)
}

fn csv_error(e: csv::Error) -> CliError {
    if e.is_io_error() {
        CliError::Io(e.to_string())
    } else {
        CliError::Invalid(e.to_string())
    }
}

/// Grid spec `start:stop:step`; `step` may be 0 only when start == stop.
fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: &str| CliError::Invalid(format!("grid `{spec}`: {why}"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad("expected start:stop:step"));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|s| s.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad("parts must be numbers"))?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step < 0.0 {
        return Err(bad("parts must be finite and step nonnegative"));
    }
    if step == 0.0 {
        if start == stop {
            return Ok(vec![start]);
        }
        return Err(bad("step 0 requires start == stop"));
    }
    let count = ((stop - start) / step).round();
    if count < 0.0 || (start + count * step - stop).abs() > 1e-9 {
        return Err(bad("step does not evenly divide the range"));
    }
    Ok((0..=count as usize).map(|i| start + i as f64 * step).collect())
}

/// Length spec: a single integer `n`, or `start:stop`, or
/// `start:stop:step` with positive integers.
fn parse_lengths(spec: &str) -> Result<Vec<usize>, CliError> {
    let bad = |why: &str| CliError::Invalid(format!("length spec `{spec}`: {why}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let nums: Vec<usize> = parts
        .iter()
        .map(|s| s.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad("parts must be nonnegative integers"))?;
    match nums.as_slice() {
        [n] => Ok(vec![*n]),
        [start, stop] => {
            if start > stop {
                return Err(bad("start exceeds stop"));
            }
            Ok((*start..=*stop).collect())
        }
        [start, stop, step] => {
            if start > stop || *step == 0 {
                return Err(bad("need start <= stop and step >= 1"));
            }
            Ok((*start..=*stop).step_by(*step).collect())
        }
        _ => Err(bad("expected n, start:stop, or start:stop:step")),
    }
}

// ---------------------------------------------------------------------
// output shaping

/// 12 significant digits, fixed exponent notation: CSV cells for every
/// table except reactivity profiles.
fn f12(x: f64) -> String {
    format!("{x:.11e}")
}

/// 9 significant digits: reactivity profile cells.
fn f9(x: f64) -> String {
    format!("{x:.8e}")
}

#[derive(Serialize)]
struct ProfileRow {
    index: usize,
    reactivity: f64,
}

#[derive(Serialize)]
struct FisherRow {
    p: f64,
    #[serde(rename = "I")]
    information: f64,
}

#[derive(Serialize)]
struct TvdRow {
    p: f64,
    p_hat: f64,
    tvd: f64,
}

#[derive(Serialize)]
struct PnRow {
    n: usize,
    best_cutoff: f64,
    case1: f64,
    case2: f64,
    lower_bound: f64,
}

#[derive(Serialize)]
struct MleRow {
    p: f64,
    mean_abs_error: f64,
    max_abs_error: f64,
}

#[derive(Serialize)]
struct EnsembleRow {
    mask: String,
    energy: f64,
    probability: f64,
}

#[derive(Serialize)]
struct EstimateOut {
    p_hat: f64,
    log_likelihood: f64,
    cr_variance_bound: f64,
    k: usize,
    l: usize,
}

#[derive(Serialize)]
struct CrossoverOut {
    p_star: f64,
    within_unit_interval: bool,
    window_bound: f64,
    window: Option<(f64, f64)>,
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numeric(format!("serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

fn csv_table(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut text = String::new();
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    text
}

fn profile_output(values: &[f64], format: Format) -> Result<String, CliError> {
    match format {
        Format::Csv => Ok(csv_table(
            "index,reactivity",
            values.iter().enumerate().map(|(i, &x)| format!("{i},{}", f9(x))),
        )),
        Format::Json => {
            let rows: Vec<ProfileRow> = values
                .iter()
                .enumerate()
                .map(|(index, &reactivity)| ProfileRow { index, reactivity })
                .collect();
            to_json(&rows)
        }
    }
}

// ---------------------------------------------------------------------
// dispatch

fn run(cli: &Cli) -> Result<String, CliError> {
    let format = |default: Format| cli.format.unwrap_or(default);
    match &cli.command {
        Command::Simulate { mask, seed } => {
            let mask = read_mask(mask)?;
            let profile = simulate_profile_seeded(&mask, *seed);
            profile_output(profile.values(), format(Format::Csv))
        }
        Command::Mix { s, t, p } => {
            let s = read_profile(s)?;
            let t = read_profile(t)?;
            let mixed = mix_profiles(&s, &t, *p)?.into_values();
            profile_output(mixed.values(), format(Format::Csv))
        }
        Command::Estimate { data, mask_a, mask_b } => {
            let profile = read_profile(data)?;
            let a = read_mask(mask_a)?;
            let b = read_mask(mask_b)?;
            let positions = DifferingPositions::from_masks(&a, &b)?;
            let mixture = ReactivityMixture::default();
            let estimate = mixture.mle_estimate(&profile, &positions)?;
            let out = EstimateOut {
                p_hat: estimate.p_hat,
                log_likelihood: estimate.log_likelihood,
                cr_variance_bound: estimate.cr_variance_bound,
                k: estimate.k,
                l: estimate.l,
            };
            match format(Format::Json) {
                Format::Json => to_json(&out),
                Format::Csv => Ok(csv_table(
                    "p_hat,log_likelihood,cr_variance_bound,k,l",
                    [format!(
                        "{},{},{},{},{}",
                        f12(out.p_hat),
                        f12(out.log_likelihood),
                        f12(out.cr_variance_bound),
                        out.k,
                        out.l
                    )],
                )),
            }
        }
        Command::Fisher { p, p_grid } => {
            let grid = match (p, p_grid) {
                (Some(p), None) => vec![*p],
                (None, Some(spec)) => parse_grid(spec)?,
                _ => unreachable!("clap enforces exactly one of --p/--p-grid"),
            };
            let mixture = ReactivityMixture::default();
            let result = mixture.fisher_grid(&grid)?;
            match format(Format::Csv) {
                Format::Csv => Ok(csv_table(
                    "p,I",
                    result.grid.iter().map(|&(p, i)| format!("{},{}", f12(p), f12(i))),
                )),
                Format::Json => {
                    let rows: Vec<FisherRow> = result
                        .grid
                        .iter()
                        .map(|&(p, information)| FisherRow { p, information })
                        .collect();
                    to_json(&rows)
                }
            }
        }
        Command::Crossover { mask_a, mask_b, c } => {
            let a = read_mask(mask_a)?;
            let b = read_mask(mask_b)?;
            let params = NjParams::new(*c)?;
            let result = crossover_window(&a, &b, &params)?;
            let out = CrossoverOut {
                p_star: result.p_star,
                within_unit_interval: result.within_unit_interval,
                window_bound: result.window_bound,
                window: result.window,
            };
            match format(Format::Json) {
                Format::Json => to_json(&out),
                Format::Csv => {
                    let (lo, hi) = match out.window {
                        Some((lo, hi)) => (f12(lo), f12(hi)),
                        None => (String::new(), String::new()),
                    };
                    Ok(csv_table(
                        "p_star,within_unit_interval,window_bound,window_lo,window_hi",
                        [format!(
                            "{},{},{},{lo},{hi}",
                            f12(out.p_star),
                            out.within_unit_interval,
                            f12(out.window_bound)
                        )],
                    ))
                }
            }
        }
        Command::PnBound { n, q } => {
            let lengths = parse_lengths(n)?;
            let rows: Result<Vec<PnRow>, CliError> = lengths
                .into_iter()
                .map(|n| {
                    let result = pn_lower_bound(&PnQuery::new(n, *q)?);
                    Ok(PnRow {
                        n: result.n,
                        best_cutoff: result.best_cutoff,
                        case1: result.case1,
                        case2: result.case2,
                        lower_bound: result.lower_bound,
                    })
                })
                .collect();
            let rows = rows?;
            match format(Format::Csv) {
                Format::Csv => Ok(csv_table(
                    "n,best_cutoff,case1,case2,lower_bound",
                    rows.iter().map(|r| {
                        format!(
                            "{},{},{},{},{}",
                            r.n,
                            f12(r.best_cutoff),
                            f12(r.case1),
                            f12(r.case2),
                            f12(r.lower_bound)
                        )
                    }),
                )),
                Format::Json => to_json(&rows),
            }
        }
        Command::TvdSweep { mask_a, mask_b, c, p_grid, cap } => {
            let a = read_mask(mask_a)?;
            let b = read_mask(mask_b)?;
            let params = NjParams::new(*c)?;
            let grid = parse_grid(p_grid)?;
            let points = tvd_sweep(&a, &b, &params, &grid, *cap)?;
            let rows: Vec<TvdRow> = points
                .iter()
                .map(|pt| TvdRow { p: pt.p, p_hat: pt.p_hat, tvd: pt.tvd })
                .collect();
            match format(Format::Csv) {
                Format::Csv => Ok(csv_table(
                    "p,p_hat,tvd",
                    rows.iter()
                        .map(|r| format!("{},{},{}", f12(r.p), f12(r.p_hat), f12(r.tvd))),
                )),
                Format::Json => to_json(&rows),
            }
        }
        Command::Ensemble { data, c, cap } => {
            let profile = read_profile(data)?;
            let params = NjParams::new(*c)?;
            let ensemble = full_ensemble(&profile, &params, *cap)?;
            let rows: Vec<EnsembleRow> = (0..ensemble.len())
                .map(|idx| EnsembleRow {
                    mask: ensemble.mask(idx).to_string(),
                    energy: ensemble.energies()[idx],
                    probability: ensemble.probs()[idx],
                })
                .collect();
            match format(Format::Csv) {
                Format::Csv => Ok(csv_table(
                    "mask,energy,probability",
                    rows.iter()
                        .map(|r| format!("{},{},{}", r.mask, f12(r.energy), f12(r.probability))),
                )),
                Format::Json => to_json(&rows),
            }
        }
        Command::MleExperiment { mask_a, mask_b, p_grid, trials, seed } => {
            let a = read_mask(mask_a)?;
            let b = read_mask(mask_b)?;
            let grid = parse_grid(p_grid)?;
            if *trials == 0 {
                return Err(CliError::Invalid("--trials must be at least 1".into()));
            }
            let mixture = ReactivityMixture::default();
            let rows = mixture.mle_experiment(&a, &b, &grid, *trials, *seed)?;
            let rows: Vec<MleRow> = rows
                .iter()
                .map(|r| MleRow {
                    p: r.p,
                    mean_abs_error: r.mean_abs_error,
                    max_abs_error: r.max_abs_error,
                })
                .collect();
            match format(Format::Csv) {
                Format::Csv => Ok(csv_table(
                    "p,mean_abs_error,max_abs_error",
                    rows.iter().map(|r| {
                        format!(
                            "{},{},{}",
                            f12(r.p),
                            f12(r.mean_abs_error),
                            f12(r.max_abs_error)
                        )
                    }),
                )),
                Format::Json => to_json(&rows),
            }
        }
    }
}

fn apply_thread_env() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("DECONV_THREADS") else {
        return Ok(());
    };
    let workers: usize = raw
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| {
            CliError::Invalid(format!("DECONV_THREADS must be a positive integer, got `{raw}`"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| CliError::Invalid(format!("thread pool setup failed: {e}")))
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(content.as_bytes())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = apply_thread_env().and_then(|()| run(&cli)).and_then(|o| emit(&cli.out, &o));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
