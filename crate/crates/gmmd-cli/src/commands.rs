//! Subcommand implementations, independent of argument parsing.

use serde::Serialize;

use gmmd::estimators::{naive_gmmd, weighted_gmmd};
use gmmd::inference::homogeneity_test_with_variant;
use gmmd::kernels::{median_heuristic_bandwidth, KernelFamily, KernelSpec, Point};
use gmmd::sim::{
    population_gmmd, run_alternative_study, run_null_calibration, SimulationReport,
};
use gmmd::variance::{theoretical_sigma_sq, FormulaVariant, GaussianEnsemble};
use gmmd::weights::WeightScheme;
use gmmd::GroupedSample;

use crate::csv::InputTable;
use crate::scenario::{ScenarioFile, ScenarioMode};
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthChoice {
    Median,
    Fixed(f64),
}

/// Options shared by the data-driven commands.
#[derive(Debug, Clone, Copy)]
pub struct RunConfig {
    pub family: KernelFamily,
    pub bandwidth: BandwidthChoice,
    pub gamma: f64,
    pub alpha: f64,
    pub seed: u64,
    pub shuffle: bool,
    pub variant: FormulaVariant,
}

fn family_name(family: KernelFamily) -> &'static str {
    match family {
        KernelFamily::Gaussian => "gaussian",
        KernelFamily::Laplacian => "laplacian",
    }
}

fn variant_name(variant: FormulaVariant) -> &'static str {
    match variant {
        FormulaVariant::TheoremConsistent => "theorem",
        FormulaVariant::Printed => "printed",
    }
}

/// Resolve the bandwidth: an explicit value, or the median heuristic over the
/// pooled rows.
fn resolve_bandwidth(choice: BandwidthChoice, table: &InputTable) -> CliResult<f64> {
    match choice {
        BandwidthChoice::Fixed(h) => Ok(h),
        BandwidthChoice::Median => {
            let points: Vec<Point> = table
                .rows
                .iter()
                .map(|(_, coords)| Point::new(coords.clone()))
                .collect::<Result<_, _>>()?;
            Ok(median_heuristic_bandwidth(&points)?)
        }
    }
}

fn prepared_sample(cfg: &RunConfig, table: &InputTable) -> CliResult<(GroupedSample, KernelSpec)> {
    let sample = table.to_grouped_sample()?;
    let sample = if cfg.shuffle {
        sample.shuffled(cfg.seed)
    } else {
        sample
    };
    let bandwidth = resolve_bandwidth(cfg.bandwidth, table)?;
    let spec = KernelSpec::new(cfg.family, bandwidth)?;
    Ok((sample, spec))
}

#[derive(Serialize)]
struct EstimateReport<'a> {
    schema_version: u32,
    command: &'a str,
    kernel_family: &'a str,
    bandwidth_used: f64,
    gamma: f64,
    seed: u64,
    shuffled: bool,
    n: usize,
    sizes: Vec<usize>,
    naive: f64,
    weighted: f64,
}

pub fn cmd_estimate(cfg: &RunConfig, table: &InputTable) -> CliResult<String> {
    let (sample, spec) = prepared_sample(cfg, table)?;
    let scheme = WeightScheme::alternating(cfg.gamma)?;
    let naive = naive_gmmd(&sample, &spec);
    let weighted = weighted_gmmd(&sample, &spec, &scheme);
    let report = EstimateReport {
        schema_version: 1,
        command: "estimate",
        kernel_family: family_name(cfg.family),
        bandwidth_used: spec.bandwidth(),
        gamma: cfg.gamma,
        seed: cfg.seed,
        shuffled: cfg.shuffle,
        n: sample.total_n(),
        sizes: sample.sizes(),
        naive: naive.statistic,
        weighted: weighted.statistic,
    };
    Ok(serde_json::to_string_pretty(&report).expect("report serialization"))
}

#[derive(Serialize)]
struct TestReport<'a> {
    schema_version: u32,
    command: &'a str,
    statistic: f64,
    sigma_hat: f64,
    z_score: f64,
    p_value: f64,
    reject: bool,
    alpha: f64,
    n: usize,
    gamma: f64,
    kernel_family: &'a str,
    bandwidth_used: f64,
    variance_variant: &'a str,
    seed: u64,
    shuffled: bool,
    sizes: Vec<usize>,
}

pub fn cmd_test(cfg: &RunConfig, table: &InputTable) -> CliResult<String> {
    let (sample, spec) = prepared_sample(cfg, table)?;
    let scheme = WeightScheme::alternating(cfg.gamma)?;
    let result = homogeneity_test_with_variant(&sample, &spec, &scheme, cfg.alpha, cfg.variant)?;
    let report = TestReport {
        schema_version: 1,
        command: "test",
        statistic: result.statistic,
        sigma_hat: result.sigma_hat,
        z_score: result.z_score,
        p_value: result.p_value,
        reject: result.reject,
        alpha: result.alpha,
        n: result.n,
        gamma: result.gamma,
        kernel_family: family_name(cfg.family),
        bandwidth_used: spec.bandwidth(),
        variance_variant: variant_name(cfg.variant),
        seed: cfg.seed,
        shuffled: cfg.shuffle,
        sizes: sample.sizes(),
    };
    Ok(serde_json::to_string_pretty(&report).expect("report serialization"))
}

/// Run the scenario and return the report plus the one-line aggregate summary
/// for standard output.
pub fn cmd_simulate(file: &ScenarioFile) -> CliResult<(SimulationReport, String)> {
    let report = match file.mode {
        ScenarioMode::Null => run_null_calibration(&file.spec)?,
        ScenarioMode::Alternative => {
            let spec = &file.spec;
            let population_t =
                population_gmmd(&spec.generators, &spec.rho, spec.kernel.bandwidth())?;
            let ens = GaussianEnsemble::from_generators(&spec.generators, &spec.rho, &spec.kernel)?;
            let scheme = WeightScheme::alternating(spec.gamma)?;
            let sigma_theory =
                theoretical_sigma_sq(&spec.generators, &ens, &scheme, file.mc_draws, spec.seed)?
                    .sigma_sq
                    .sqrt();
            if sigma_theory <= 0.0 {
                return Err(CliError::Input(
                    "theoretical sigma is zero for this scenario".into(),
                ));
            }
            run_alternative_study(spec, population_t, sigma_theory)?
        }
    };
    let a = &report.aggregates;
    let summary = match file.mode {
        ScenarioMode::Null => format!(
            "null calibration: R={} n={} mean_z={:.4} var_z={:.4} ks_z={:.4} level={:.4} wall_ms={}",
            report.scenario.replications,
            report.scenario.n,
            a.mean_z,
            a.var_z,
            a.ks_z,
            a.rejection_rate,
            report.wall_ms,
        ),
        ScenarioMode::Alternative => format!(
            "alternative study: R={} n={} pop_T={:.6} sigma={:.6} ks_theory={:.4} power={:.4} wall_ms={}",
            report.scenario.replications,
            report.scenario.n,
            report.population_t.unwrap_or(f64::NAN),
            report.sigma_theory.unwrap_or(f64::NAN),
            a.ks_theory.unwrap_or(f64::NAN),
            a.rejection_rate,
            report.wall_ms,
        ),
    };
    Ok((report, summary))
}

#[derive(Serialize)]
struct ValidateReport<'a> {
    schema_version: u32,
    command: &'a str,
    report: gmmd::AssumptionReport,
}

pub fn cmd_validate_weights(gamma: f64, r_max: usize) -> CliResult<String> {
    let scheme = WeightScheme::alternating(gamma)?;
    let report = scheme.validate_assumptions(r_max)?;
    let out = ValidateReport {
        schema_version: 1,
        command: "validate-weights",
        report,
    };
    Ok(serde_json::to_string_pretty(&out).expect("report serialization"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csv::parse_grouped_csv;

    fn config() -> RunConfig {
        RunConfig {
            family: KernelFamily::Gaussian,
            bandwidth: BandwidthChoice::Fixed(1.0),
            gamma: 0.5,
            alpha: 0.05,
            seed: 0,
            shuffle: false,
            variant: FormulaVariant::TheoremConsistent,
        }
    }

    #[test]
    fn estimate_reproduces_the_singleton_hand_values() {
        let table = parse_grouped_csv("group,x1\n1,0.0\n2,2.0\n").unwrap();
        let json = cmd_estimate(&config(), &table).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!((v["naive"].as_f64().unwrap() - 1.7293294335267746).abs() < 1e-9);
        assert!((v["weighted"].as_f64().unwrap() - 1.8646647167633873).abs() < 1e-9);
        assert_eq!(v["sizes"], serde_json::json!([1, 1]));
    }

    #[test]
    fn estimate_zero_for_identical_groups() {
        let table = parse_grouped_csv("group,x1\n1,3.0\n1,3.0\n2,3.0\n").unwrap();
        let json = cmd_estimate(&config(), &table).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["naive"].as_f64().unwrap(), 0.0);
    }

    #[test]
    fn estimate_median_bandwidth_resolution() {
        let mut cfg = config();
        cfg.bandwidth = BandwidthChoice::Median;
        let table = parse_grouped_csv("group,x1\n1,0.0\n1,1.0\n2,3.0\n").unwrap();
        let json = cmd_estimate(&cfg, &table).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["bandwidth_used"].as_f64().unwrap(), 2.0);
    }

    #[test]
    fn test_command_degenerate_variance_is_input_error() {
        let table = parse_grouped_csv("group,x1\n1,1.0\n1,1.0\n2,1.0\n2,1.0\n").unwrap();
        let err = cmd_test(&config(), &table).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("degenerate"), "{err}");
    }

    #[test]
    fn test_command_requires_two_points_per_group() {
        let table = parse_grouped_csv("group,x1\n1,1.0\n1,2.0\n2,0.5\n").unwrap();
        let err = cmd_test(&config(), &table).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn validate_weights_report_shape() {
        let json = cmd_validate_weights(0.5, 10_000).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["report"]["k_sq_limit"].as_f64().unwrap(), 1.25);
        assert_eq!(v["report"]["pass_a3"], serde_json::json!(true));
        assert!(cmd_validate_weights(0.0, 100).is_err());
    }
}
