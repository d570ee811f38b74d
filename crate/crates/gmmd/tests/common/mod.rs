//! Brute-force oracles shared by the integration suites.
//!
//! Everything here is written against the mathematical definitions with
//! plain nested loops and its own kernel arithmetic, independent of the
//! library's Gram/row-sum machinery, so agreement is evidence rather than
//! tautology.

#![allow(dead_code)] // each test binary uses its own subset

use gmmd::rng::Stream;

#[derive(Clone, Copy)]
pub enum OracleKernel {
    Gaussian(f64),
    Laplacian(f64),
}

impl OracleKernel {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            OracleKernel::Gaussian(h) => {
                let mut sq = 0.0;
                for (a, b) in x.iter().zip(y) {
                    sq += (a - b) * (a - b);
                }
                (-sq / (2.0 * h * h)).exp()
            }
            OracleKernel::Laplacian(h) => {
                let mut l1 = 0.0;
                for (a, b) in x.iter().zip(y) {
                    l1 += (a - b).abs();
                }
                (-l1 / h).exp()
            }
        }
    }
}

/// Alternating weight, 1-based index.
pub fn oracle_weight(i: usize, gamma: f64) -> f64 {
    if i % 2 == 1 {
        1.0 - gamma
    } else {
        1.0 + gamma
    }
}

fn within_mean(g: &[Vec<f64>], k: &OracleKernel) -> f64 {
    let n = g.len() as f64;
    let mut sum = 0.0;
    for a in g {
        for b in g {
            sum += k.eval(a, b);
        }
    }
    sum / (n * n)
}

fn cross_mean(a: &[Vec<f64>], b: &[Vec<f64>], k: &OracleKernel) -> f64 {
    let mut sum = 0.0;
    for x in a {
        for y in b {
            sum += k.eval(x, y);
        }
    }
    sum / (a.len() as f64 * b.len() as f64)
}

/// Direct quadruple-loop evaluation of the plug-in estimator
/// `Σ_j Σ_{ℓ≠j} π_ℓ { ‖m̂_j‖² + ‖m̂_ℓ‖² − 2 ⟨m̂_j, m̂_ℓ⟩ }`.
pub fn brute_naive(groups: &[Vec<Vec<f64>>], k: &OracleKernel) -> f64 {
    let n: usize = groups.iter().map(Vec::len).sum();
    let mut total = 0.0;
    for (j, gj) in groups.iter().enumerate() {
        for (l, gl) in groups.iter().enumerate() {
            if l == j {
                continue;
            }
            let pi_l = gl.len() as f64 / n as f64;
            total += pi_l * (within_mean(gj, k) + within_mean(gl, k) - 2.0 * cross_mean(gj, gl, k));
        }
    }
    total
}

/// Direct evaluation of the weight-modified estimator: the cross product of
/// the ordered pair (j, ℓ) carries `k_{i,n_j}(γ)` on the j-side index.
pub fn brute_weighted(groups: &[Vec<Vec<f64>>], k: &OracleKernel, gamma: f64) -> f64 {
    let n: usize = groups.iter().map(Vec::len).sum();
    let mut total = 0.0;
    for (j, gj) in groups.iter().enumerate() {
        for (l, gl) in groups.iter().enumerate() {
            if l == j {
                continue;
            }
            let pi_l = gl.len() as f64 / n as f64;
            let mut cross = 0.0;
            for (ii, x) in gj.iter().enumerate() {
                let w = oracle_weight(ii + 1, gamma);
                for y in gl {
                    cross += w * k.eval(x, y);
                }
            }
            cross /= gj.len() as f64 * gl.len() as f64;
            total += pi_l * (within_mean(gj, k) + within_mean(gl, k) - 2.0 * cross);
        }
    }
    total
}

/// Random grouped instance: `s` groups of up to `max_n` standard-normal
/// points in `dim` dimensions, as raw nested vectors.
pub fn random_instance(seed: u64, s: usize, max_n: usize, dim: usize) -> Vec<Vec<Vec<f64>>> {
    let stream = Stream::new(seed);
    (0..s)
        .map(|j| {
            let g = stream.derive(j as u64);
            let n = 1 + (g.u64_at(u64::MAX) % max_n as u64) as usize;
            (0..n)
                .map(|i| {
                    (0..dim)
                        .map(|c| g.normal_at((i * dim + c) as u64))
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Flatten a nested instance into the library's grouped-sample form.
pub fn to_sample(groups: &[Vec<Vec<f64>>]) -> gmmd::GroupedSample {
    let dim = groups[0][0].len();
    gmmd::GroupedSample::from_rows(
        dim,
        groups
            .iter()
            .map(|g| g.iter().flatten().copied().collect())
            .collect(),
    )
    .unwrap()
}
