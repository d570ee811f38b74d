//! Seeded data generation, closed-form population oracles, and the Monte
//! Carlo harnesses that check the normal approximation and calibrate the
//! test.
//!
//! Reproducibility contract: every draw is addressed by
//! `(seed, replication, group, draw, coordinate)` through the counter-based
//! streams of [`crate::rng`] — replication `r` uses
//! `Stream::new(seed).derive(r)`, group `j` within it derives by `j`, and
//! point `i`'s coordinate `c` consumes counter `i * d + c`. Replications
//! therefore parallelize freely and reports are byte-identical for any
//! thread count.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    allocate_sizes, weighted_from_rows, GroupRowSums, GroupedSample, Proportions,
};
use crate::inference::normal_cdf;
use crate::kernels::KernelSpec;
use crate::rng::Stream;
use crate::variance::{sigma_hat_from_rows, FormulaVariant};
use crate::weights::WeightScheme;

/// Per-group sampling distribution with independent coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "lowercase")]
pub enum GeneratorSpec {
    Normal { mean: Vec<f64>, sdev: Vec<f64> },
    Uniform { lo: Vec<f64>, hi: Vec<f64> },
}

impl GeneratorSpec {
    pub fn normal(mean: Vec<f64>, sdev: Vec<f64>) -> Result<Self> {
        let g = GeneratorSpec::Normal { mean, sdev };
        g.validate()?;
        Ok(g)
    }

    pub fn uniform(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let g = GeneratorSpec::Uniform { lo, hi };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GeneratorSpec::Normal { mean, sdev } => {
                if mean.is_empty() || mean.len() != sdev.len() {
                    return Err(Error::InvalidScenario(format!(
                        "normal generator needs matching nonempty mean/sdev, got {}/{}",
                        mean.len(),
                        sdev.len()
                    )));
                }
                if mean.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidScenario("non-finite mean".into()));
                }
                if sdev.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                    return Err(Error::InvalidScenario("sdev must be finite and > 0".into()));
                }
            }
            GeneratorSpec::Uniform { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(Error::InvalidScenario(format!(
                        "uniform generator needs matching nonempty lo/hi, got {}/{}",
                        lo.len(),
                        hi.len()
                    )));
                }
                for (a, b) in lo.iter().zip(hi) {
                    if !a.is_finite() || !b.is_finite() || a >= b {
                        return Err(Error::InvalidScenario(format!(
                            "uniform bounds must be finite with lo < hi, got [{a}, {b}]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            GeneratorSpec::Normal { mean, .. } => mean.len(),
            GeneratorSpec::Uniform { lo, .. } => lo.len(),
        }
    }

    /// Fill `out` with draw number `draw` from `stream` (coordinate `c` uses
    /// counter `draw * d + c`).
    pub fn sample_into(&self, stream: &Stream, draw: u64, out: &mut [f64]) {
        let d = self.dim() as u64;
        debug_assert_eq!(out.len() as u64, d);
        match self {
            GeneratorSpec::Normal { mean, sdev } => {
                for (c, slot) in out.iter_mut().enumerate() {
                    *slot = mean[c] + sdev[c] * stream.normal_at(draw * d + c as u64);
                }
            }
            GeneratorSpec::Uniform { lo, hi } => {
                for (c, slot) in out.iter_mut().enumerate() {
                    *slot = lo[c] + (hi[c] - lo[c]) * stream.uniform_at(draw * d + c as u64);
                }
            }
        }
    }
}

/// A complete simulation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub generators: Vec<GeneratorSpec>,
    /// Limit proportions; group sizes follow `n_j = ⌊n ρ_j⌋` with the
    /// remainder on the last group.
    pub rho: Vec<f64>,
    pub n: usize,
    pub gamma: f64,
    pub kernel: KernelSpec,
    pub replications: usize,
    pub seed: u64,
    pub alpha: f64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.generators.len() < 2 {
            return Err(Error::NotEnoughGroups(self.generators.len()));
        }
        if self.generators.len() != self.rho.len() {
            return Err(Error::InvalidScenario(format!(
                "{} generators for {} proportions",
                self.generators.len(),
                self.rho.len()
            )));
        }
        let dim = self.generators[0].dim();
        for g in &self.generators {
            g.validate()?;
            if g.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: g.dim(),
                });
            }
        }
        Proportions::new(self.rho.clone())?;
        allocate_sizes(self.n, &self.rho)?;
        WeightScheme::alternating(self.gamma)?;
        if self.replications == 0 {
            return Err(Error::InvalidScenario("replications must be >= 1".into()));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 || self.alpha >= 1.0 {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        Ok(())
    }

    fn scheme(&self) -> WeightScheme {
        WeightScheme::alternating(self.gamma).expect("validated gamma")
    }

    fn is_null(&self) -> bool {
        self.generators.iter().all(|g| *g == self.generators[0])
    }
}

/// Draw the grouped sample of replication `rep_index`: group sizes follow the
/// allocation rule, and group `j` reads the substream
/// `Stream::new(seed).derive(rep_index).derive(j)`.
pub fn generate_grouped_sample(scn: &ScenarioSpec, rep_index: u64) -> Result<GroupedSample> {
    scn.validate()?;
    let sizes = allocate_sizes(scn.n, &scn.rho)?;
    let rep_stream = Stream::new(scn.seed).derive(rep_index);
    let dim = scn.generators[0].dim();
    let groups = scn
        .generators
        .iter()
        .enumerate()
        .map(|(j, g)| {
            let stream = rep_stream.derive(j as u64);
            let mut flat = vec![0.0; sizes[j] * dim];
            for i in 0..sizes[j] {
                g.sample_into(&stream, i as u64, &mut flat[i * dim..(i + 1) * dim]);
            }
            flat
        })
        .collect();
    GroupedSample::from_rows(dim, groups)
}

/// `E K(X, Y)` for independent `X ~ N(mu1, s1²)`, `Y ~ N(mu2, s2²)` under the
/// Gaussian kernel with bandwidth `h`:
///
/// ```text
/// h / √(h² + s1² + s2²) · exp(−(mu1 − mu2)² / (2 (h² + s1² + s2²)))
/// ```
///
/// Standard deviations may be 0 (point masses); at `s1 = s2 = 0` this reduces
/// to the kernel value itself. Coordinates of product distributions multiply.
pub fn gaussian_kernel_cross_expectation(mu1: f64, s1: f64, mu2: f64, s2: f64, h: f64) -> f64 {
    debug_assert!(h > 0.0 && s1 >= 0.0 && s2 >= 0.0);
    let v = h * h + s1 * s1 + s2 * s2;
    let delta = mu1 - mu2;
    h / v.sqrt() * (-delta * delta / (2.0 * v)).exp()
}

/// Population GMMD² of Gaussian product distributions under the Gaussian
/// kernel with weights `η = rho`:
/// `Σ_j Σ_{ℓ≠j} ρ_ℓ MMD²(P_j, P_ℓ)` with
/// `MMD² = E K^{(jj)} + E K^{(ℓℓ)} − 2 E K^{(jℓ)}` in closed form.
pub fn population_gmmd(dists: &[GeneratorSpec], rho: &[f64], h: f64) -> Result<f64> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidBandwidth(h));
    }
    if dists.len() != rho.len() {
        return Err(Error::InvalidScenario(format!(
            "{} distributions for {} proportions",
            dists.len(),
            rho.len()
        )));
    }
    Proportions::new(rho.to_vec())?;
    let mut params = Vec::with_capacity(dists.len());
    for d in dists {
        match d {
            GeneratorSpec::Normal { mean, sdev } => params.push((mean, sdev)),
            GeneratorSpec::Uniform { .. } => {
                return Err(Error::UnsupportedOracle(
                    "population GMMD is available in closed form for normal generators only"
                        .into(),
                ))
            }
        }
    }
    let dim = params[0].0.len();
    for (m, _) in &params {
        if m.len() != dim {
            return Err(Error::DimensionMismatch {
                left: dim,
                right: m.len(),
            });
        }
    }

    let cross = |j: usize, l: usize| -> f64 {
        let (mj, sj) = params[j];
        let (ml, sl) = params[l];
        (0..dim)
            .map(|c| gaussian_kernel_cross_expectation(mj[c], sj[c], ml[c], sl[c], h))
            .product()
    };

    let s = dists.len();
    let mut total = 0.0;
    for j in 0..s {
        for (l, &rho_l) in rho.iter().enumerate() {
            if l == j {
                continue;
            }
            let mmd_sq = cross(j, j) + cross(l, l) - 2.0 * cross(j, l);
            total += rho_l * mmd_sq;
        }
    }
    Ok(total.max(0.0))
}

/// Kolmogorov-Smirnov sup-distance between the empirical CDF of `values` and
/// the standard normal CDF, evaluated with both one-sided deviations at each
/// sorted sample point.
pub fn ks_distance(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteCoordinate { index });
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let f = normal_cdf(*x);
        d = d.max(f - i as f64 / n).max((i as f64 + 1.0) / n - f);
    }
    Ok(d)
}

/// One simulation replication's test outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    /// `T̂_{n,γ}`.
    pub statistic: f64,
    /// Theorem-consistent `σ̂_γ`.
    pub sigma_hat: f64,
    pub z: f64,
    pub p_value: f64,
    pub reject: bool,
}

/// Aggregate diagnostics, all recomputable from the records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub mean_z: f64,
    /// Population variance (divides by R) so a single replication reports 0.
    pub var_z: f64,
    /// KS distance of the z-scores to N(0, 1).
    pub ks_z: f64,
    pub rejection_rate: f64,
    pub mean_sqrt_n_statistic: f64,
    /// Empirical variance of `√n T̂_{n,γ}`, the arbitration target for the
    /// two null-variance formulas.
    pub var_sqrt_n_statistic: f64,
    pub mean_sigma_sq_theorem: f64,
    /// Exactly 4x the theorem-consistent mean.
    pub mean_sigma_sq_printed: f64,
    /// KS distance of `√n (T̂ − 𝒯) / σ_γ` to N(0, 1); present when the
    /// population values were supplied (alternative studies).
    pub ks_theory: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportMode {
    Null,
    Alternative,
}

/// Full output of a simulation run. Serializes deterministically (fixed field
/// order, shortest-round-trip floats); wall time is kept out of the payload
/// so reruns with one seed are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub schema_version: u32,
    pub mode: ReportMode,
    pub scenario: ScenarioSpec,
    pub population_t: Option<f64>,
    pub sigma_theory: Option<f64>,
    pub records: Vec<RepRecord>,
    pub aggregates: Aggregates,
    #[serde(skip)]
    pub wall_ms: u64,
}

impl SimulationReport {
    /// Recompute all aggregates from the records and scenario echo.
    pub fn recompute_aggregates(&self) -> Result<Aggregates> {
        aggregates_from(
            &self.records,
            self.scenario.n,
            self.population_t,
            self.sigma_theory,
        )
    }

    /// Check that the stored aggregates match the records (tolerance 1e-12);
    /// intended for use after loading a report from disk.
    pub fn verify_integrity(&self) -> Result<()> {
        let fresh = self.recompute_aggregates()?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        let opt_close = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (None, None) => true,
            (Some(a), Some(b)) => close(a, b),
            _ => false,
        };
        let ok = close(fresh.mean_z, self.aggregates.mean_z)
            && close(fresh.var_z, self.aggregates.var_z)
            && close(fresh.ks_z, self.aggregates.ks_z)
            && close(fresh.rejection_rate, self.aggregates.rejection_rate)
            && close(fresh.mean_sqrt_n_statistic, self.aggregates.mean_sqrt_n_statistic)
            && close(fresh.var_sqrt_n_statistic, self.aggregates.var_sqrt_n_statistic)
            && close(fresh.mean_sigma_sq_theorem, self.aggregates.mean_sigma_sq_theorem)
            && close(fresh.mean_sigma_sq_printed, self.aggregates.mean_sigma_sq_printed)
            && opt_close(fresh.ks_theory, self.aggregates.ks_theory);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScenario(
                "stored aggregates do not match the records".into(),
            ))
        }
    }

    /// Deterministic pretty JSON encoding of the report.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// Per-replication records as CSV.
    pub fn records_csv(&self) -> String {
        let mut out = String::from("rep,statistic,sigma_hat,z,p_value,reject\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.rep, r.statistic, r.sigma_hat, r.z, r.p_value, r.reject
            ));
        }
        out
    }
}

fn mean_and_pop_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

fn aggregates_from(
    records: &[RepRecord],
    n: usize,
    population_t: Option<f64>,
    sigma_theory: Option<f64>,
) -> Result<Aggregates> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sqrt_n = (n as f64).sqrt();
    let zs: Vec<f64> = records.iter().map(|r| r.z).collect();
    let (mean_z, var_z) = mean_and_pop_var(&zs);
    let ks_z = ks_distance(&zs)?;
    let rejection_rate =
        records.iter().filter(|r| r.reject).count() as f64 / records.len() as f64;
    let scaled: Vec<f64> = records.iter().map(|r| sqrt_n * r.statistic).collect();
    let (mean_s, var_s) = mean_and_pop_var(&scaled);
    let mean_sigma_sq_theorem = records
        .iter()
        .map(|r| r.sigma_hat * r.sigma_hat)
        .sum::<f64>()
        / records.len() as f64;
    let ks_theory = match (population_t, sigma_theory) {
        (Some(t), Some(sig)) => {
            let standardized: Vec<f64> = records
                .iter()
                .map(|r| sqrt_n * (r.statistic - t) / sig)
                .collect();
            Some(ks_distance(&standardized)?)
        }
        _ => None,
    };
    Ok(Aggregates {
        mean_z,
        var_z,
        ks_z,
        rejection_rate,
        mean_sqrt_n_statistic: mean_s,
        var_sqrt_n_statistic: var_s,
        mean_sigma_sq_theorem,
        mean_sigma_sq_printed: 4.0 * mean_sigma_sq_theorem,
        ks_theory,
    })
}

/// Run every replication of a scenario and collect the per-rep test records.
/// Replications execute in parallel; records come back in replication order.
fn run_records(scn: &ScenarioSpec) -> Result<Vec<RepRecord>> {
    scn.validate()?;
    let scheme = scn.scheme();
    (0..scn.replications)
        .into_par_iter()
        .map(|rep| -> Result<RepRecord> {
            let sample = generate_grouped_sample(scn, rep as u64)?;
            let rows = GroupRowSums::compute(&sample, &scn.kernel);
            let estimate = weighted_from_rows(&sample, &rows, &scheme);
            let var = sigma_hat_from_rows(
                &sample,
                &rows,
                &scheme,
                FormulaVariant::TheoremConsistent,
            );
            let sigma_hat = var.sigma_sq.sqrt();
            if sigma_hat == 0.0 {
                return Err(Error::DegenerateVariance);
            }
            let z = (sample.total_n() as f64).sqrt() * estimate.statistic / sigma_hat;
            let p_value = 1.0 - normal_cdf(z);
            Ok(RepRecord {
                rep,
                statistic: estimate.statistic,
                sigma_hat,
                z,
                p_value,
                reject: p_value <= scn.alpha,
            })
        })
        .collect()
}

/// Null calibration: requires all generators identical, runs the test on
/// every replication, and reports the normality diagnostics of the z-scores
/// together with the empirical variance of `√n T̂` for variance-formula
/// arbitration.
pub fn run_null_calibration(scn: &ScenarioSpec) -> Result<SimulationReport> {
    scn.validate()?;
    if !scn.is_null() {
        return Err(Error::NotANullScenario);
    }
    let start = Instant::now();
    let records = run_records(scn)?;
    let aggregates = aggregates_from(&records, scn.n, None, None)?;
    Ok(SimulationReport {
        schema_version: 1,
        mode: ReportMode::Null,
        scenario: scn.clone(),
        population_t: None,
        sigma_theory: None,
        records,
        aggregates,
        wall_ms: start.elapsed().as_millis() as u64,
    })
}

/// Alternative study: standardizes `√n (T̂ − 𝒯) / σ_γ` with the supplied
/// population discrepancy and theoretical standard deviation, and reports the
/// KS distance of those values alongside the test's rejection rate (power).
pub fn run_alternative_study(
    scn: &ScenarioSpec,
    population_t: f64,
    sigma_theory: f64,
) -> Result<SimulationReport> {
    scn.validate()?;
    if !(sigma_theory.is_finite() && sigma_theory > 0.0) {
        return Err(Error::NonPositiveSigma(sigma_theory));
    }
    if !population_t.is_finite() {
        return Err(Error::InvalidScenario("population_t must be finite".into()));
    }
    let start = Instant::now();
    let records = run_records(scn)?;
    let aggregates = aggregates_from(&records, scn.n, Some(population_t), Some(sigma_theory))?;
    Ok(SimulationReport {
        schema_version: 1,
        mode: ReportMode::Alternative,
        scenario: scn.clone(),
        population_t: Some(population_t),
        sigma_theory: Some(sigma_theory),
        records,
        aggregates,
        wall_ms: start.elapsed().as_millis() as u64,
    })
}

/// Power curve over mean shifts of group 2.
///
/// `base` must be a null scenario; for each grid value the first coordinate
/// of group 2's location is shifted by that amount (normal: mean, uniform:
/// both bounds), so shift 0 reproduces the null rejection rate.
pub fn run_power_curve(base: &ScenarioSpec, shift_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if shift_grid.is_empty() {
        return Err(Error::EmptyInput);
    }
    base.validate()?;
    if !base.is_null() {
        return Err(Error::NotANullScenario);
    }
    shift_grid
        .iter()
        .map(|&shift| {
            if !shift.is_finite() {
                return Err(Error::InvalidScenario("shift must be finite".into()));
            }
            let mut scn = base.clone();
            match &mut scn.generators[1] {
                GeneratorSpec::Normal { mean, .. } => mean[0] += shift,
                GeneratorSpec::Uniform { lo, hi } => {
                    lo[0] += shift;
                    hi[0] += shift;
                }
            }
            let records = run_records(&scn)?;
            let power =
                records.iter().filter(|r| r.reject).count() as f64 / records.len() as f64;
            Ok((shift, power))
        })
        .collect()
}
