use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gmmd::kernels::KernelFamily;
use gmmd::variance::FormulaVariant;
use gmmd_cli::commands::{
    cmd_estimate, cmd_simulate, cmd_test, cmd_validate_weights, BandwidthChoice, RunConfig,
};
use gmmd_cli::csv::parse_grouped_csv;
use gmmd_cli::scenario::parse_scenario;
use gmmd_cli::{atomic_write, CliError, CliResult};

/// Generalized maximum mean discrepancy (GMMD) toolkit: estimate the
/// discrepancy between labeled groups, test them for homogeneity, and run
/// seeded Monte Carlo calibration studies.
///
/// Exit codes: 0 = completed (a rejected null is still 0 — the decision is
/// data, not status), 2 = invalid input or degenerate data, 1 = internal
/// failure.
#[derive(Parser)]
#[command(name = "gmmd", version)]
struct Cli {
    /// Worker threads for kernel sums and replications (defaults to all
    /// cores). Outputs are byte-identical regardless of this setting.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
enum KernelArg {
    /// exp(−‖x−y‖₂² / (2 h²)) — note the 2 h² convention
    #[default]
    Gaussian,
    /// exp(−‖x−y‖₁ / h)
    Laplacian,
}

impl From<KernelArg> for KernelFamily {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Gaussian => KernelFamily::Gaussian,
            KernelArg::Laplacian => KernelFamily::Laplacian,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
enum VariantArg {
    /// 4 (k²(γ)−1) ν̂² Σ π_j⁻¹ (1−π_j)², consistent with the general
    /// asymptotic variance (default)
    #[default]
    Theorem,
    /// The literal printed estimator with the extra inner factor 4
    Printed,
}

impl From<VariantArg> for FormulaVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Theorem => FormulaVariant::TheoremConsistent,
            VariantArg::Printed => FormulaVariant::Printed,
        }
    }
}

fn parse_bandwidth(raw: &str) -> Result<BandwidthChoice, String> {
    if raw == "median" {
        return Ok(BandwidthChoice::Median);
    }
    raw.parse::<f64>()
        .map(BandwidthChoice::Fixed)
        .map_err(|_| format!("expected a positive number or `median`, got `{raw}`"))
}

#[derive(Args)]
struct CommonArgs {
    /// Input CSV with header `group,x1,...,xd`; labels must be 1..s
    #[arg(long)]
    input: PathBuf,

    /// Kernel family
    #[arg(long, value_enum, default_value_t)]
    kernel: KernelArg,

    /// Bandwidth h > 0, or `median` for the median pairwise distance of the
    /// pooled sample (fallback 1.0 on degenerate data)
    #[arg(long, default_value = "median", value_parser = parse_bandwidth)]
    bandwidth: BandwidthChoice,

    /// Weight parameter γ in (0, 1] for the modified estimator
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,

    /// Seed for the optional pre-shuffle
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Re-order the points within each group with the seeded shuffle before
    /// estimating (the weighted estimator is order-dependent)
    #[arg(long)]
    shuffle: bool,

    /// Write the JSON report here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate GMMD² of the groups in a CSV (naive and weight-modified)
    Estimate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Test the groups for homogeneity (one-sided asymptotic z-test)
    Test {
        #[command(flatten)]
        common: CommonArgs,

        /// Significance level in (0, 1)
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,

        /// Null-variance formula
        #[arg(long, value_enum, default_value_t)]
        variance_variant: VariantArg,
    },
    /// Run a scenario file (null calibration or alternative study)
    Simulate {
        /// Scenario file; see the repository README for the format
        #[arg(long)]
        scenario: PathBuf,

        /// Write the report JSON here (atomically); prints an aggregate
        /// one-liner to standard output
        #[arg(long)]
        out: Option<PathBuf>,

        /// Also write the per-replication records as CSV
        #[arg(long)]
        records_csv: Option<PathBuf>,
    },
    /// Empirically validate the weight-scheme assumptions for a gamma
    ValidateWeights {
        /// Weight parameter γ in (0, 1]
        #[arg(long)]
        gamma: f64,

        /// Scan horizon (all r up to this value)
        #[arg(long, default_value_t = 100_000)]
        r_max: usize,

        /// Write the JSON report here instead of standard output
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_input(path: &PathBuf) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn emit(out: Option<&PathBuf>, json: &str) -> CliResult<()> {
    match out {
        Some(path) => atomic_write(path, json),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Estimate { common } => {
            let table = parse_grouped_csv(&read_input(&common.input)?)?;
            let cfg = RunConfig {
                family: common.kernel.into(),
                bandwidth: common.bandwidth,
                gamma: common.gamma,
                alpha: 0.05,
                seed: common.seed,
                shuffle: common.shuffle,
                variant: FormulaVariant::TheoremConsistent,
            };
            let json = cmd_estimate(&cfg, &table)?;
            emit(common.out.as_ref(), &json)
        }
        Command::Test {
            common,
            alpha,
            variance_variant,
        } => {
            let table = parse_grouped_csv(&read_input(&common.input)?)?;
            let cfg = RunConfig {
                family: common.kernel.into(),
                bandwidth: common.bandwidth,
                gamma: common.gamma,
                alpha,
                seed: common.seed,
                shuffle: common.shuffle,
                variant: variance_variant.into(),
            };
            let json = cmd_test(&cfg, &table)?;
            emit(common.out.as_ref(), &json)
        }
        Command::Simulate {
            scenario,
            out,
            records_csv,
        } => {
            let file = parse_scenario(&read_input(&scenario)?)?;
            let (report, summary) = cmd_simulate(&file)?;
            if let Some(path) = &records_csv {
                atomic_write(path, &report.records_csv())?;
            }
            match &out {
                Some(path) => {
                    atomic_write(path, &report.to_json())?;
                    println!("{summary}");
                }
                None => println!("{}", report.to_json()),
            }
            Ok(())
        }
        Command::ValidateWeights { gamma, r_max, out } => {
            let json = cmd_validate_weights(gamma, r_max)?;
            emit(out.as_ref(), &json)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }
    if let Err(e) = run(cli) {
        eprintln!("{}", e.to_json());
        std::process::exit(e.exit_code());
    }
}
