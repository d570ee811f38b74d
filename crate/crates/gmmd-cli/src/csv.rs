//! Grouped-sample CSV: header `group,x1,...,xd`, one row per point, group
//! labels forming a contiguous set 1..s. Row order is preserved exactly —
//! the weighted estimator depends on it.

use gmmd::GroupedSample;

use crate::{CliError, CliResult};

/// Parsed CSV contents with row order intact.
#[derive(Debug, Clone, PartialEq)]
pub struct InputTable {
    pub dim: usize,
    /// (1-based group label, coordinates), in file order.
    pub rows: Vec<(usize, Vec<f64>)>,
}

impl InputTable {
    pub fn group_count(&self) -> usize {
        self.rows.iter().map(|(g, _)| *g).max().unwrap_or(0)
    }

    /// Assemble the grouped sample, keeping each group's rows in file order.
    pub fn to_grouped_sample(&self) -> CliResult<GroupedSample> {
        let s = self.group_count();
        let mut groups = vec![Vec::new(); s];
        for (label, coords) in &self.rows {
            groups[label - 1].extend_from_slice(coords);
        }
        Ok(GroupedSample::from_rows(self.dim, groups)?)
    }
}

pub fn parse_grouped_csv(text: &str) -> CliResult<InputTable> {
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((idx, line)) if line.trim().is_empty() => {
            return Err(CliError::Input(format!(
                "line {}: blank line where the header `group,x1,...,xd` was expected",
                idx + 1
            )))
        }
        Some((_, line)) => line,
        None => return Err(CliError::Input("line 1: missing header row".into())),
    };

    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"group") || cols.len() < 2 {
        return Err(CliError::Input(format!(
            "line 1: header must be `group,x1,...,xd`, got `{header}`"
        )));
    }
    for (i, col) in cols[1..].iter().enumerate() {
        let expected = format!("x{}", i + 1);
        if *col != expected {
            return Err(CliError::Input(format!(
                "line 1: coordinate column {} must be named `{expected}`, got `{col}`",
                i + 2
            )));
        }
    }
    let dim = cols.len() - 1;

    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != dim + 1 {
            return Err(CliError::Input(format!(
                "line {line_no}: expected {} fields, got {}",
                dim + 1,
                fields.len()
            )));
        }
        let label: usize = fields[0].parse().map_err(|_| {
            CliError::Input(format!(
                "line {line_no}: group label `{}` is not a positive integer",
                fields[0]
            ))
        })?;
        if label == 0 {
            return Err(CliError::Input(format!(
                "line {line_no}: group labels start at 1"
            )));
        }
        let mut coords = Vec::with_capacity(dim);
        for f in &fields[1..] {
            let v: f64 = f.parse().map_err(|_| {
                CliError::Input(format!("line {line_no}: `{f}` is not a number"))
            })?;
            if !v.is_finite() {
                return Err(CliError::Input(format!(
                    "line {line_no}: coordinate `{f}` is not finite"
                )));
            }
            coords.push(v);
        }
        rows.push((label, coords));
    }

    if rows.is_empty() {
        return Err(CliError::Input("no data rows after the header".into()));
    }

    let mut labels: Vec<usize> = rows.iter().map(|(g, _)| *g).collect();
    labels.sort_unstable();
    labels.dedup();
    let s = *labels.last().unwrap();
    if labels.len() != s || labels[0] != 1 {
        return Err(CliError::Input(format!(
            "group labels must be contiguous 1..s; found {labels:?}"
        )));
    }
    if s < 2 {
        return Err(CliError::Input(
            "need at least 2 groups; found only group 1".into(),
        ));
    }

    Ok(InputTable { dim, rows })
}

/// Serialize a table back to CSV. Floats use the shortest representation
/// that parses back to the identical value, so serialization is a fixed
/// point: parse -> serialize -> parse is lossless.
pub fn serialize_csv(table: &InputTable) -> String {
    let mut buffer = ryu::Buffer::new();
    let mut out = String::from("group");
    for i in 1..=table.dim {
        out.push_str(&format!(",x{i}"));
    }
    out.push('\n');
    for (label, coords) in &table.rows {
        out.push_str(&label.to_string());
        for c in coords {
            out.push(',');
            out.push_str(buffer.format(*c));
        }
        out.push('\n');
    }
    out
}
