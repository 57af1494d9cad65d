//! Command-line surface: `generate`, `evaluate`, `rates` and `hard-instance`.
//!
//! Settings can come from a flat JSON file (`--config`); flags given on the
//! command line take precedence over file values.

pub mod io;
pub mod rates;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::basis::MomentIndexSet;
use crate::error::{Error, Result};
use crate::solver::SolverOptions;
use crate::synth::{run, Caps, MechanismConfig, DEFAULT_DEGREE_CONSTANT};
use crate::utility::{dk_bound, dk_lower_estimate, gamma, BumpFamily, DkBound, HardInstance, QueryFamily};

use io::Normalize;
use rates::{run_rates, write_plot_csv, ExperimentSpec};

/// Exit status for input validation failures (bad flags, data, budget).
pub const EXIT_VALIDATION: i32 = 2;
/// Exit status when a resource cap would be exceeded.
pub const EXIT_CAP: i32 = 3;
/// Exit status when the solver fails.
pub const EXIT_SOLVER: i32 = 4;
/// Exit status for I/O and other failures.
pub const EXIT_OTHER: i32 = 1;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Domain { .. } | Error::InvalidBudget(_) | Error::Invalid(_) | Error::Infeasible(_) | Error::Csv(_) => {
            EXIT_VALIDATION
        }
        Error::CapExceeded { .. } => EXIT_CAP,
        Error::Solver(_) => EXIT_SOLVER,
        Error::Io(_) | Error::Json(_) => EXIT_OTHER,
    }
}

#[derive(Debug, Parser)]
#[command(name = "chebsynth", version, about = "Private synthetic data for smooth queries")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Produce a synthetic dataset and a run report.
    Generate(GenerateArgs),
    /// Compare a synthetic dataset against the original.
    Evaluate(EvaluateArgs),
    /// Sweep dataset sizes and fit the utility rate.
    Rates(RatesArgs),
    /// Write one member of the sign-indexed hard family.
    HardInstance(HardInstanceArgs),
}

/// Mechanism settings shared by flags and the config file.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MechanismFlags {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Degree cap override.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub normalize: Option<Normalize>,
    /// Maximum number of grid cells.
    #[arg(long)]
    #[serde(alias = "cap-grid")]
    pub cap_grid: Option<u128>,
    /// Maximum number of moments.
    #[arg(long)]
    #[serde(alias = "cap-moments")]
    pub cap_moments: Option<u128>,
    #[arg(long)]
    #[serde(alias = "max-iters")]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    #[serde(alias = "degree-constant")]
    pub degree_constant: Option<f64>,
    /// Disable noise; the report is watermarked and the output is not private.
    #[arg(long)]
    #[serde(alias = "unsafe-no-privacy")]
    pub unsafe_no_privacy: bool,
}

impl MechanismFlags {
    /// Fills unset fields from `file`.
    pub fn merged_over(self, file: MechanismFlags) -> MechanismFlags {
        MechanismFlags {
            d: self.d.or(file.d),
            k: self.k.or(file.k),
            epsilon: self.epsilon.or(file.epsilon),
            delta: self.delta.or(file.delta),
            m: self.m.or(file.m),
            seed: self.seed.or(file.seed),
            normalize: self.normalize.or(file.normalize),
            cap_grid: self.cap_grid.or(file.cap_grid),
            cap_moments: self.cap_moments.or(file.cap_moments),
            max_iters: self.max_iters.or(file.max_iters),
            tol: self.tol.or(file.tol),
            degree_constant: self.degree_constant.or(file.degree_constant),
            unsafe_no_privacy: self.unsafe_no_privacy || file.unsafe_no_privacy,
        }
    }

    fn required<T: Copy>(value: Option<T>, name: &str) -> Result<T> {
        value.ok_or_else(|| Error::invalid(format!("missing required setting --{name}")))
    }

    pub fn to_config(&self) -> Result<MechanismConfig> {
        let defaults = SolverOptions::default();
        let caps = Caps::default();
        Ok(MechanismConfig {
            d: Self::required(self.d, "d")?,
            k: Self::required(self.k, "k")?,
            epsilon: Self::required(self.epsilon, "epsilon")?,
            delta: Self::required(self.delta, "delta")?,
            m: self.m,
            seed: self.seed.unwrap_or(0),
            caps: Caps {
                grid_cells: self.cap_grid.unwrap_or(caps.grid_cells),
                moments: self.cap_moments.unwrap_or(caps.moments),
            },
            degree_constant: self.degree_constant.unwrap_or(DEFAULT_DEGREE_CONSTANT),
            solver: SolverOptions {
                max_iters: self.max_iters.unwrap_or(defaults.max_iters),
                tol: self.tol.unwrap_or(defaults.tol),
                ..defaults
            },
            unsafe_no_privacy: self.unsafe_no_privacy,
        })
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Input CSV with `d` numeric columns.
    #[arg(long)]
    pub data: PathBuf,
    /// Output path of the synthetic CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Output path of the JSON report; defaults to `<out>.report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Flat JSON file with mechanism settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write one row per synthetic point instead of a count column.
    #[arg(long)]
    pub expand: bool,
    #[command(flatten)]
    pub mechanism: MechanismFlags,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Original dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Synthetic CSV (optionally with a count column).
    #[arg(long)]
    pub synthetic: PathBuf,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    /// Largest moment degree used for the distance and the bound.
    #[arg(long, default_value_t = 16)]
    pub m: usize,
    /// Comma-separated query families.
    #[arg(long, value_delimiter = ',', default_value = "linear,monomial,quadratic,gaussian,logistic,bump")]
    pub families: Vec<QueryFamily>,
    /// Cells per axis for the bump family.
    #[arg(long, default_value_t = 4)]
    pub bump_cells: usize,
    #[arg(long)]
    pub cap_moments: Option<u128>,
    /// Report path; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub delta: f64,
    /// Smallest size as a power of two.
    #[arg(long, default_value_t = 9)]
    pub min_log2: u32,
    /// Largest size as a power of two.
    #[arg(long, default_value_t = 12)]
    pub max_log2: u32,
    #[arg(long, default_value_t = 5)]
    pub repetitions: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub cap_grid: Option<u128>,
    #[arg(long)]
    pub cap_moments: Option<u128>,
    /// Output directory for `rates.json` and `rates.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HardInstanceArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    /// Cells per axis.
    #[arg(long, default_value_t = 4)]
    pub cells: usize,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    /// Constant in `β = 2 c₁ / (n ε)`.
    #[arg(long, default_value_t = 1.0)]
    pub c1: f64,
    /// Seed for the sign vector.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output dataset CSV; a JSON summary is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` and runs the command, returning the process exit status.
pub fn main_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { EXIT_VALIDATION } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Generate(args) => cmd_generate(&args),
        Command::Evaluate(args) => cmd_evaluate(&args).map(|_| ()),
        Command::Rates(args) => cmd_rates(&args).map(|_| ()),
        Command::HardInstance(args) => cmd_hard_instance(&args),
    }
}

fn load_flags(path: Option<&Path>) -> Result<MechanismFlags> {
    match path {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            Ok(serde_json::from_str(&text)?)
        }
        None => Ok(MechanismFlags::default()),
    }
}

/// Hash of the run configuration (paths excluded) and the input bytes.
pub fn manifest(cfg: &MechanismConfig, normalize: Normalize, data_sha256: &str) -> Result<String> {
    let canonical = serde_json::to_string(&(cfg, normalize, data_sha256))?;
    Ok(format!(
        "config_sha256={} data_sha256={} seed={}",
        io::hex_digest(canonical.as_bytes()),
        data_sha256,
        cfg.seed
    ))
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let flags = args.mechanism.clone().merged_over(load_flags(args.config.as_deref())?);
    let cfg = flags.to_config()?;
    let normalize = flags.normalize.unwrap_or_default();
    let (data, _, data_sha) = io::ingest(&args.data, Some(cfg.d), normalize)?;
    let (synthetic, mut report) = run(&data, &cfg)?;
    let manifest = manifest(&cfg, normalize, &data_sha)?;
    report.manifest = Some(manifest.clone());

    let mut comments = vec![format!("chebsynth {manifest}")];
    if let Some(mark) = &report.watermark {
        comments.push(mark.clone());
    }
    io::write_synthetic(&args.out, &synthetic, args.expand, &comments)?;
    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| with_suffix(&args.out, "report.json"));
    io::write_json(&report_path, &report)?;
    log::info!(
        "wrote {} synthetic points to {} (solver {:?}, gap {:.2e})",
        synthetic.len(),
        args.out.display(),
        report.solver_status,
        report.kkt_gap
    );
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(OsString::from).unwrap_or_default();
    name.push(".");
    name.push(suffix);
    path.with_file_name(name)
}

/// Lower estimate from one query family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyEstimate {
    pub family: String,
    pub value: f64,
    pub best_query: Option<String>,
    pub queries: usize,
}

/// Output of `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub d: usize,
    pub k: u32,
    pub n_original: usize,
    pub n_synthetic_support: usize,
    /// `Γ` at the largest degree.
    pub gamma: f64,
    pub max_degree: usize,
    /// Smallest certified upper bound on `d_k` over degrees `k..=max_degree`.
    pub dk_upper: DkBound,
    pub dk_upper_degree: usize,
    /// Largest lower estimate over all requested families.
    pub dk_lower: f64,
    pub families: Vec<FamilyEstimate>,
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<EvaluationReport> {
    let d = match args.d {
        Some(d) => d,
        None => io::read_table(&args.data)?.rows[0].len(),
    };
    let original = io::read_measure(&args.data, d)?;
    let synthetic = io::read_measure(&args.synthetic, d)?;
    if args.m == 0 || args.k == 0 {
        return Err(Error::invalid("--m and --k must be at least 1"));
    }
    let cap = args.cap_moments.unwrap_or(crate::basis::DEFAULT_MOMENT_CAP);

    let mut best: Option<(DkBound, usize)> = None;
    let mut top_gamma = 0.0;
    for degree in 1..=args.m {
        let set = MomentIndexSet::with_cap(d, degree, cap)?;
        let disc = gamma(&original, &synthetic, &set, args.k)?;
        let bound = dk_bound(&disc, d);
        if best.as_ref().is_none_or(|(b, _)| bound.value < b.value) {
            best = Some((bound, degree));
        }
        top_gamma = disc.gamma;
    }
    let (dk_upper, dk_upper_degree) = best.expect("at least one degree");

    let mut families = Vec::new();
    for &family in &args.families {
        let estimate = if family == QueryFamily::Bump {
            let bumps = BumpFamily::new(args.bump_cells, d, args.k)?;
            FamilyEstimate {
                family: family.name().into(),
                value: bumps.signed_sum_estimate(&original, &synthetic),
                best_query: Some(format!("signed sum of {} bumps", bumps.len())),
                queries: bumps.len(),
            }
        } else {
            let queries = family.queries(d, args.k);
            let est = dk_lower_estimate(&original, &synthetic, &queries)?;
            FamilyEstimate {
                family: family.name().into(),
                value: est.value,
                best_query: est.best_query,
                queries: queries.len(),
            }
        };
        families.push(estimate);
    }
    let report = EvaluationReport {
        d,
        k: args.k,
        n_original: original.len(),
        n_synthetic_support: synthetic.len(),
        gamma: top_gamma,
        max_degree: args.m,
        dk_upper,
        dk_upper_degree,
        dk_lower: families.iter().map(|f| f.value).fold(0.0, f64::max),
        families,
    };
    match &args.out {
        Some(path) => io::write_json(path, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(report)
}

pub fn cmd_rates(args: &RatesArgs) -> Result<rates::RatesReport> {
    if args.min_log2 >= args.max_log2 || args.max_log2 >= 40 {
        return Err(Error::invalid("need min-log2 < max-log2 < 40"));
    }
    let caps = Caps::default();
    let spec = ExperimentSpec {
        d: args.d,
        k: args.k,
        epsilon: args.epsilon,
        delta: args.delta,
        sizes: ExperimentSpec::powers_of_two(args.min_log2, args.max_log2),
        repetitions: args.repetitions,
        seed: args.seed,
        caps: Caps {
            grid_cells: args.cap_grid.unwrap_or(caps.grid_cells),
            moments: args.cap_moments.unwrap_or(caps.moments),
        },
        solver: SolverOptions::default(),
    };
    let report = run_rates(&spec)?;
    std::fs::create_dir_all(&args.out)?;
    io::write_json(&args.out.join("rates.json"), &report)?;
    write_plot_csv(&args.out.join("rates.csv"), &report)?;
    if let Some(fit) = &report.metric_fit {
        log::info!("fitted slope {:.3} (standard error {:?})", fit.slope, fit.standard_error);
    }
    Ok(report)
}

/// JSON summary written next to a hard-instance dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardInstanceSummary {
    pub n: usize,
    pub d: usize,
    pub k: u32,
    pub cells_per_axis: usize,
    pub beta: f64,
    pub moved_rows: usize,
    pub theta: Vec<i8>,
    pub cell_sizes: Vec<usize>,
    pub bump_constant: f64,
    pub peak_value: f64,
    pub tau: Vec<f64>,
}

pub fn cmd_hard_instance(args: &HardInstanceArgs) -> Result<()> {
    let inst = HardInstance::from_seed(args.n, args.d, args.k, args.cells, args.epsilon, args.c1, args.seed)?;
    let fam = inst.family();
    let summary = HardInstanceSummary {
        n: args.n,
        d: args.d,
        k: args.k,
        cells_per_axis: args.cells,
        beta: inst.beta(),
        moved_rows: inst.moved_rows(),
        theta: inst.theta().to_vec(),
        cell_sizes: inst.cell_sizes().to_vec(),
        bump_constant: fam.c0(),
        peak_value: fam.peak_value(),
        tau: (0..fam.len()).map(|t| inst.tau(t)).collect(),
    };
    let comments = vec![format!(
        "chebsynth hard instance n={} d={} k={} cells={} seed={}",
        args.n, args.d, args.k, args.cells, args.seed
    )];
    io::write_dataset(&args.out, inst.dataset(), &comments)?;
    io::write_json(&with_suffix(&args.out, "summary.json"), &summary)?;
    Ok(())
}
