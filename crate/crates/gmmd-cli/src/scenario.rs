//! Scenario files: a flat key-value format with section headers.
//!
//! ```text
//! # comment
//! [scenario]
//! mode = null            # null | alternative
//! n = 1500
//! replications = 1000
//! seed = 42
//! gamma = 0.5
//! alpha = 0.05
//! kernel = gaussian      # gaussian | laplacian
//! bandwidth = 1.0
//! mc_draws = 100000      # alternative mode: draws for the theoretical sigma
//!
//! [group]
//! rho = 0.3
//! dist = normal          # normal | uniform
//! mean = 0.0             # comma-separated for d > 1
//! sdev = 1.0
//! # uniform groups use `lo = ...` and `hi = ...` instead
//! ```
//!
//! Every `[group]` section contributes one generator, in order.

use std::collections::BTreeMap;

use gmmd::kernels::{KernelFamily, KernelSpec};
use gmmd::sim::{GeneratorSpec, ScenarioSpec};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioMode {
    Null,
    Alternative,
}

/// A parsed scenario file: the simulation spec plus CLI-level options.
#[derive(Debug, Clone)]
pub struct ScenarioFile {
    pub spec: ScenarioSpec,
    pub mode: ScenarioMode,
    /// Monte Carlo draws for the theoretical variance (alternative mode).
    pub mc_draws: usize,
}

struct Section {
    name: String,
    line: usize,
    entries: BTreeMap<String, (usize, String)>,
}

fn split_sections(text: &str) -> CliResult<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| {
                CliError::Input(format!("line {line_no}: unterminated section header"))
            })?;
            sections.push(Section {
                name: name.trim().to_string(),
                line: line_no,
                entries: BTreeMap::new(),
            });
        } else {
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Input(format!("line {line_no}: expected `key = value`, got `{line}`"))
            })?;
            let section = sections.last_mut().ok_or_else(|| {
                CliError::Input(format!(
                    "line {line_no}: `{key}` appears before any section header"
                ))
            })?;
            let key = key.trim().to_string();
            if section
                .entries
                .insert(key.clone(), (line_no, value.trim().to_string()))
                .is_some()
            {
                return Err(CliError::Input(format!(
                    "line {line_no}: duplicate key `{key}` in [{}]",
                    section.name
                )));
            }
        }
    }
    Ok(sections)
}

fn take<'a>(section: &'a Section, key: &str) -> CliResult<&'a str> {
    section
        .entries
        .get(key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| {
            CliError::Input(format!(
                "[{}] (line {}): missing required key `{key}`",
                section.name, section.line
            ))
        })
}

fn parse_field<T: std::str::FromStr>(section: &Section, key: &str) -> CliResult<T> {
    let raw = take(section, key)?;
    let line = section.entries[key].0;
    raw.parse().map_err(|_| {
        CliError::Input(format!("line {line}: `{key} = {raw}` is not a valid value"))
    })
}

fn parse_vector(section: &Section, key: &str) -> CliResult<Vec<f64>> {
    let raw = take(section, key)?;
    let line = section.entries[key].0;
    raw.split(',')
        .map(|f| {
            f.trim().parse::<f64>().map_err(|_| {
                CliError::Input(format!("line {line}: `{key}` entry `{f}` is not a number"))
            })
        })
        .collect()
}

pub fn parse_scenario(text: &str) -> CliResult<ScenarioFile> {
    let sections = split_sections(text)?;
    let scenario = sections
        .iter()
        .find(|s| s.name == "scenario")
        .ok_or_else(|| CliError::Input("missing [scenario] section".into()))?;
    for s in &sections {
        if s.name != "scenario" && s.name != "group" {
            return Err(CliError::Input(format!(
                "line {}: unknown section [{}]",
                s.line, s.name
            )));
        }
    }

    let mode = match take(scenario, "mode")? {
        "null" => ScenarioMode::Null,
        "alternative" => ScenarioMode::Alternative,
        other => {
            return Err(CliError::Input(format!(
                "mode must be `null` or `alternative`, got `{other}`"
            )))
        }
    };
    let family = match take(scenario, "kernel")? {
        "gaussian" => KernelFamily::Gaussian,
        "laplacian" => KernelFamily::Laplacian,
        other => {
            return Err(CliError::Input(format!(
                "kernel must be `gaussian` or `laplacian`, got `{other}`"
            )))
        }
    };
    let bandwidth: f64 = parse_field(scenario, "bandwidth")?;
    let kernel = KernelSpec::new(family, bandwidth)?;
    let mc_draws = match scenario.entries.get("mc_draws") {
        Some(_) => parse_field(scenario, "mc_draws")?,
        None => 100_000,
    };

    let mut generators = Vec::new();
    let mut rho = Vec::new();
    for section in sections.iter().filter(|s| s.name == "group") {
        rho.push(parse_field::<f64>(section, "rho")?);
        let gen = match take(section, "dist")? {
            "normal" => GeneratorSpec::normal(
                parse_vector(section, "mean")?,
                parse_vector(section, "sdev")?,
            )?,
            "uniform" => GeneratorSpec::uniform(
                parse_vector(section, "lo")?,
                parse_vector(section, "hi")?,
            )?,
            other => {
                return Err(CliError::Input(format!(
                    "line {}: dist must be `normal` or `uniform`, got `{other}`",
                    section.line
                )))
            }
        };
        generators.push(gen);
    }

    let spec = ScenarioSpec {
        generators,
        rho,
        n: parse_field(scenario, "n")?,
        gamma: parse_field(scenario, "gamma")?,
        kernel,
        replications: parse_field(scenario, "replications")?,
        seed: parse_field(scenario, "seed")?,
        alpha: parse_field(scenario, "alpha")?,
    };
    spec.validate()?;

    Ok(ScenarioFile {
        spec,
        mode,
        mc_draws,
    })
}
