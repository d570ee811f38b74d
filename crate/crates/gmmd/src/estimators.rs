//! Grouped samples and the two GMMD² estimators.
//!
//! Both estimators plug the empirical embeddings `m̂_j = n_j⁻¹ Σ K(X_i,·)`
//! and the observed proportions `π_j = n_j/n` into the population form.
//! Double sums follow the V-statistic convention (diagonal terms included).
//!
//! - [`naive_gmmd`]: `Σ_j Σ_{ℓ≠j} π_ℓ ‖m̂_j − m̂_ℓ‖²`, always ≥ 0. Its null
//!   distribution is degenerate, so it estimates but cannot test.
//! - [`weighted_gmmd`]: the same expansion with weights `k_{i,n_j}(γ)` on the
//!   cross-product terms. The weights break the squared-norm structure, so
//!   the value may be negative, and the result depends on the stored order of
//!   points within each group (use [`GroupedSample::shuffled`] for a seeded
//!   re-ordering).
//!
//! Kernel sums are accumulated per group-pair block in fixed row chunks and
//! merged in chunk order, so results are identical for any thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{eval_slices, KernelSpec, Point};
use crate::rng::Stream;
use crate::weights::WeightScheme;

/// `s >= 2` labeled groups of d-dimensional points.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedSample {
    dim: usize,
    /// Row-major coordinates per group; group `j` holds `n_j * dim` values.
    groups: Vec<Vec<f64>>,
}

impl GroupedSample {
    /// Build from per-group point lists. Requires at least two nonempty
    /// groups of a common dimension.
    pub fn from_points(groups: Vec<Vec<Point>>) -> Result<Self> {
        let flat = groups
            .iter()
            .map(|g| {
                g.iter()
                    .flat_map(|p| p.coords().iter().copied())
                    .collect::<Vec<f64>>()
            })
            .collect();
        let dim = groups
            .iter()
            .flat_map(|g| g.iter())
            .map(Point::dim)
            .next()
            .unwrap_or(0);
        let sample = GroupedSample { dim, groups: flat };
        sample.validate()?;
        // from_points must also catch mixed dimensions, which flattening hides
        for g in &groups {
            for p in g {
                if p.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        left: dim,
                        right: p.dim(),
                    });
                }
            }
        }
        Ok(sample)
    }

    /// Build from flat row-major coordinate arrays (group `j` has length
    /// `n_j * dim`).
    pub fn from_rows(dim: usize, groups: Vec<Vec<f64>>) -> Result<Self> {
        let sample = GroupedSample { dim, groups };
        sample.validate()?;
        Ok(sample)
    }

    fn validate(&self) -> Result<()> {
        if self.groups.len() < 2 {
            return Err(Error::NotEnoughGroups(self.groups.len()));
        }
        if self.dim == 0 {
            return Err(Error::EmptyPoint);
        }
        for (j, g) in self.groups.iter().enumerate() {
            if g.is_empty() || g.len() % self.dim != 0 {
                return Err(Error::GroupTooSmall {
                    group: j + 1,
                    needed: 1,
                    got: g.len() / self.dim,
                });
            }
            if let Some(index) = g.iter().position(|c| !c.is_finite()) {
                return Err(Error::NonFiniteCoordinate { index });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn group_size(&self, j: usize) -> usize {
        self.groups[j].len() / self.dim
    }

    pub fn sizes(&self) -> Vec<usize> {
        (0..self.group_count()).map(|j| self.group_size(j)).collect()
    }

    pub fn total_n(&self) -> usize {
        self.sizes().iter().sum()
    }

    /// Point `i` of group `j` as a coordinate slice.
    pub fn point(&self, j: usize, i: usize) -> &[f64] {
        &self.groups[j][i * self.dim..(i + 1) * self.dim]
    }

    /// Iterator over the rows of group `j`.
    pub fn rows(&self, j: usize) -> impl ExactSizeIterator<Item = &[f64]> {
        self.groups[j].chunks_exact(self.dim)
    }

    /// Seeded re-ordering of the points within each group (group sizes and
    /// contents unchanged). Group `j` is shuffled by the substream
    /// `Stream::new(seed).derive(j)`.
    #[must_use]
    pub fn shuffled(&self, seed: u64) -> GroupedSample {
        let root = Stream::new(seed);
        let groups = self
            .groups
            .iter()
            .enumerate()
            .map(|(j, g)| {
                let n = g.len() / self.dim;
                let mut order: Vec<usize> = (0..n).collect();
                root.derive(j as u64).shuffle(&mut order);
                let mut out = Vec::with_capacity(g.len());
                for &i in &order {
                    out.extend_from_slice(&g[i * self.dim..(i + 1) * self.dim]);
                }
                out
            })
            .collect();
        GroupedSample {
            dim: self.dim,
            groups,
        }
    }
}

/// Group proportions `π_j` (or limit proportions `ρ_j`): each in (0, 1),
/// summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Proportions(Vec<f64>);

impl Proportions {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidProportions(format!(
                "need at least 2 entries, got {}",
                values.len()
            )));
        }
        for (j, &v) in values.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 || v >= 1.0 {
                return Err(Error::InvalidProportions(format!(
                    "entry {} is {v}, must lie in (0, 1)",
                    j + 1
                )));
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidProportions(format!(
                "entries sum to {sum}, expected 1"
            )));
        }
        Ok(Proportions(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Observed proportions `π_j = n_j / n`.
pub fn proportions(sample: &GroupedSample) -> Proportions {
    let n = sample.total_n() as f64;
    Proportions(
        (0..sample.group_count())
            .map(|j| sample.group_size(j) as f64 / n)
            .collect(),
    )
}

/// Split a total size `n` into group sizes following `n_j = ⌊n ρ_j⌋` for
/// `j < s` and `n_s = n − Σ_{j<s} n_j`. Errors if any group would be empty.
pub fn allocate_sizes(n: usize, rho: &[f64]) -> Result<Vec<usize>> {
    let rho = Proportions::new(rho.to_vec())?;
    let s = rho.values().len();
    let mut sizes = Vec::with_capacity(s);
    let mut used = 0usize;
    for (j, &r) in rho.values()[..s - 1].iter().enumerate() {
        let nj = (n as f64 * r).floor() as usize;
        if nj == 0 {
            return Err(Error::EmptyAllocation { group: j + 1, n });
        }
        sizes.push(nj);
        used += nj;
    }
    if used >= n {
        return Err(Error::EmptyAllocation { group: s, n });
    }
    sizes.push(n - used);
    Ok(sizes)
}

/// A point estimate of GMMD². `gamma` is `None` for the naive estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateResult {
    pub statistic: f64,
    pub n: usize,
    pub gamma: Option<f64>,
}

// Fixed row-chunk length for block accumulation. Chunk boundaries (not the
// thread count) define the reduction order.
const ROW_CHUNK: usize = 256;

/// Per-pair kernel row sums: `rows[j][l][i] = Σ_p K(x_i^{(j)}, x_p^{(l)})`.
///
/// One pass over the pooled Gram (upper group triangle only) feeds every
/// estimator and the variance machinery.
pub(crate) struct GroupRowSums {
    rows: Vec<Vec<Vec<f64>>>,
}

impl GroupRowSums {
    #[allow(clippy::needless_range_loop)] // paired mutation of rows[j][l] and rows[l][j]
    pub(crate) fn compute(sample: &GroupedSample, spec: &KernelSpec) -> GroupRowSums {
        let s = sample.group_count();
        let mut rows: Vec<Vec<Vec<f64>>> = (0..s)
            .map(|j| (0..s).map(|_| vec![0.0; sample.group_size(j)]).collect())
            .collect();

        for j in 0..s {
            for l in j..s {
                if j == l {
                    let (own, cross) = within_group_sums(sample, spec, j);
                    rows[j][j] = add_in_order(own, cross);
                } else {
                    let (rj, rl) = cross_group_sums(sample, spec, j, l);
                    rows[j][l] = rj;
                    rows[l][j] = rl;
                }
            }
        }
        GroupRowSums { rows }
    }

    /// `Σ_i Σ_p K(x_i^{(j)}, x_p^{(l)})`, summed in row order.
    pub(crate) fn block_total(&self, j: usize, l: usize) -> f64 {
        self.rows[j][l].iter().sum()
    }

    /// `Σ_i w(i) · Σ_p K(x_i^{(j)}, x_p^{(l)})` with 1-based weight index.
    pub(crate) fn weighted_block_total<F: Fn(usize) -> f64>(
        &self,
        j: usize,
        l: usize,
        weight: F,
    ) -> f64 {
        self.rows[j][l]
            .iter()
            .enumerate()
            .map(|(i, r)| weight(i + 1) * r)
            .sum()
    }

    /// `⟨K(x_i^{(j)}, ·), m̂⟩` for every point: `Σ_l π_l rows[j][l][i] / n_l`.
    pub(crate) fn pooled_inner_values(&self, sample: &GroupedSample) -> Vec<Vec<f64>> {
        let pi = proportions(sample);
        let s = sample.group_count();
        (0..s)
            .map(|j| {
                let nj = sample.group_size(j);
                (0..nj)
                    .map(|i| {
                        (0..s)
                            .map(|l| {
                                pi.values()[l] * self.rows[j][l][i]
                                    / sample.group_size(l) as f64
                            })
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }
}

fn add_in_order(mut own: Vec<f64>, partials: Vec<Vec<f64>>) -> Vec<f64> {
    for part in partials {
        for (o, p) in own.iter_mut().zip(&part) {
            *o += p;
        }
    }
    own
}

/// Row sums of the symmetric within-group block. Each chunk of rows owns the
/// contributions of its pairs `(i, p > i)` plus the unit diagonal; column-side
/// contributions are returned per chunk and merged in chunk order.
fn within_group_sums(
    sample: &GroupedSample,
    spec: &KernelSpec,
    j: usize,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = sample.group_size(j);
    let chunks: Vec<(usize, usize)> = (0..n)
        .step_by(ROW_CHUNK)
        .map(|lo| (lo, (lo + ROW_CHUNK).min(n)))
        .collect();

    let results: Vec<(Vec<f64>, Vec<f64>)> = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut own = vec![0.0; hi - lo];
            let mut col = vec![0.0; n];
            for i in lo..hi {
                let xi = sample.point(j, i);
                let mut row_acc = eval_slices(spec, xi, xi);
                for (p, slot) in col.iter_mut().enumerate().skip(i + 1) {
                    let v = eval_slices(spec, xi, sample.point(j, p));
                    row_acc += v;
                    *slot += v;
                }
                own[i - lo] = row_acc;
            }
            (own, col)
        })
        .collect();

    let mut own = vec![0.0; n];
    let mut cols = Vec::with_capacity(results.len());
    for ((lo, _hi), (part_own, part_col)) in chunks.iter().zip(results) {
        own[*lo..*lo + part_own.len()].copy_from_slice(&part_own);
        cols.push(part_col);
    }
    (own, cols)
}

/// Row sums of the rectangular block between groups `j` and `l`, computed
/// once; returns the `j`-side and `l`-side row sums.
fn cross_group_sums(
    sample: &GroupedSample,
    spec: &KernelSpec,
    j: usize,
    l: usize,
) -> (Vec<f64>, Vec<f64>) {
    let nj = sample.group_size(j);
    let nl = sample.group_size(l);
    let chunks: Vec<(usize, usize)> = (0..nj)
        .step_by(ROW_CHUNK)
        .map(|lo| (lo, (lo + ROW_CHUNK).min(nj)))
        .collect();

    let results: Vec<(Vec<f64>, Vec<f64>)> = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut rows_j = vec![0.0; hi - lo];
            let mut cols_l = vec![0.0; nl];
            for i in lo..hi {
                let xi = sample.point(j, i);
                let mut acc = 0.0;
                for (p, col) in cols_l.iter_mut().enumerate() {
                    let v = eval_slices(spec, xi, sample.point(l, p));
                    acc += v;
                    *col += v;
                }
                rows_j[i - lo] = acc;
            }
            (rows_j, cols_l)
        })
        .collect();

    let mut rj = vec![0.0; nj];
    let mut rl = vec![0.0; nl];
    for ((lo, _hi), (part_rows, part_cols)) in chunks.iter().zip(results) {
        rj[*lo..*lo + part_rows.len()].copy_from_slice(&part_rows);
        for (acc, p) in rl.iter_mut().zip(&part_cols) {
            *acc += p;
        }
    }
    (rj, rl)
}

fn assemble<F: Fn(usize, usize) -> f64>(
    sample: &GroupedSample,
    rows: &GroupRowSums,
    cross: F,
) -> f64 {
    let s = sample.group_count();
    let pi = proportions(sample);
    let norm_sq: Vec<f64> = (0..s)
        .map(|j| {
            let nj = sample.group_size(j) as f64;
            rows.block_total(j, j) / (nj * nj)
        })
        .collect();

    let mut stat = 0.0;
    for j in 0..s {
        let nj = sample.group_size(j) as f64;
        for l in 0..s {
            if l == j {
                continue;
            }
            let nl = sample.group_size(l) as f64;
            stat += pi.values()[l] * (norm_sq[j] + norm_sq[l] - 2.0 * cross(j, l) / (nj * nl));
        }
    }
    stat
}

/// The plug-in estimator `Σ_j Σ_{ℓ≠j} π_ℓ ‖m̂_j − m̂_ℓ‖²`, clamped at 0 to
/// absorb negative floating-point dust.
pub fn naive_gmmd(sample: &GroupedSample, spec: &KernelSpec) -> EstimateResult {
    let rows = GroupRowSums::compute(sample, spec);
    naive_from_rows(sample, &rows)
}

pub(crate) fn naive_from_rows(sample: &GroupedSample, rows: &GroupRowSums) -> EstimateResult {
    let stat = assemble(sample, rows, |j, l| rows.block_total(j, l));
    EstimateResult {
        statistic: stat.max(0.0),
        n: sample.total_n(),
        gamma: None,
    }
}

/// The weight-modified estimator: cross-product terms between groups `j` and
/// `ℓ` carry `k_{i,n_j}(γ)` on the `j`-side point index `i` (in stored
/// order). May be negative.
pub fn weighted_gmmd(
    sample: &GroupedSample,
    spec: &KernelSpec,
    scheme: &WeightScheme,
) -> EstimateResult {
    let rows = GroupRowSums::compute(sample, spec);
    weighted_from_rows(sample, &rows, scheme)
}

pub(crate) fn weighted_from_rows(
    sample: &GroupedSample,
    rows: &GroupRowSums,
    scheme: &WeightScheme,
) -> EstimateResult {
    let stat = assemble(sample, rows, |j, l| {
        rows.weighted_block_total(j, l, |i| scheme.weight_unchecked(i))
    });
    EstimateResult {
        statistic: stat,
        n: sample.total_n(),
        gamma: Some(scheme.gamma()),
    }
}

/// Weighted estimator with an arbitrary weight function `w(i, r)` (1-based
/// `i`, row length `r = n_j`). With `|_, _| 1.0` this reproduces
/// [`naive_gmmd`] before clamping; it exists so alternative weight sequences
/// can be evaluated against the shipped scheme.
pub fn weighted_gmmd_with<F: Fn(usize, usize) -> f64>(
    sample: &GroupedSample,
    spec: &KernelSpec,
    weight: F,
) -> f64 {
    let rows = GroupRowSums::compute(sample, spec);
    assemble(sample, &rows, |j, l| {
        let nj = sample.group_size(j);
        rows.weighted_block_total(j, l, |i| weight(i, nj))
    })
}
