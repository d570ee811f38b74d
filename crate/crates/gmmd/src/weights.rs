//! Weight sequences applied to the estimator's cross-product terms.
//!
//! The shipped family is the alternating scheme `k_{i,r}(γ) = 1 + (−1)^i γ`
//! for `γ ∈ (0, 1]`. Its defining properties, checked empirically by
//! [`WeightScheme::validate_assumptions`], are
//!
//! - bounded mean deviation: `r · |mean_{i≤r} k_{i,r} − 1| ≤ γ` for all `r`,
//! - uniform bound: `max_i k_{i,r} = 1 + γ ≤ 2`,
//! - second-moment limit: `(1/r) Σ k²_{i,r} → k²(γ) = 1 + γ² > 1`.
//!
//! `k²(γ) − 1 > 0` is what gives the weight-modified estimator a
//! non-degenerate normal null distribution. At `γ = 1` the odd-indexed
//! weights are exactly 0; zero weights are accepted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weight families. Only the alternating scheme is currently shipped; the
/// validator is written against the generic contract so further families can
/// be added behind the same checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightFamily {
    Alternating,
}

/// A weight family with its parameter `γ ∈ (0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightSchemeRaw")]
pub struct WeightScheme {
    family: WeightFamily,
    gamma: f64,
}

#[derive(Deserialize)]
struct WeightSchemeRaw {
    family: WeightFamily,
    gamma: f64,
}

impl TryFrom<WeightSchemeRaw> for WeightScheme {
    type Error = Error;

    fn try_from(raw: WeightSchemeRaw) -> Result<Self> {
        WeightScheme::new(raw.family, raw.gamma)
    }
}

/// Empirical check of the weight-scheme assumptions up to a horizon `r_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub gamma: f64,
    pub r_max: usize,
    /// max over `r <= r_max` of `r · |mean_{i<=r}(k) − 1|`.
    pub tau_observed: f64,
    /// max over `i <= r_max` of `k_{i,r}`.
    pub c_k_observed: f64,
    /// `(1/r_max) Σ k²_{i,r_max}`.
    pub k_sq_sequence_tail: f64,
    /// The limit `k²(γ)`.
    pub k_sq_limit: f64,
    pub pass_a3: bool,
    pub pass_a4: bool,
    pub pass_a5: bool,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.pass_a3 && self.pass_a4 && self.pass_a5
    }
}

const TOL: f64 = 1e-12;

impl WeightScheme {
    pub fn new(family: WeightFamily, gamma: f64) -> Result<Self> {
        if !gamma.is_finite() || gamma <= 0.0 || gamma > 1.0 {
            return Err(Error::InvalidGamma(gamma));
        }
        Ok(WeightScheme { family, gamma })
    }

    pub fn alternating(gamma: f64) -> Result<Self> {
        Self::new(WeightFamily::Alternating, gamma)
    }

    pub fn family(&self) -> WeightFamily {
        self.family
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `k_{i,r}(γ)` for a 1-based index `i <= r`.
    pub fn weight(&self, i: usize, r: usize) -> Result<f64> {
        if i == 0 || i > r {
            return Err(Error::WeightIndexOutOfRange { index: i, r });
        }
        Ok(self.weight_unchecked(i))
    }

    /// Weight lookup without the range check. For the alternating family the
    /// value depends on `i` only, not on the row length `r`.
    #[inline(always)]
    pub(crate) fn weight_unchecked(&self, i: usize) -> f64 {
        match self.family {
            WeightFamily::Alternating => {
                if i % 2 == 1 {
                    1.0 - self.gamma
                } else {
                    1.0 + self.gamma
                }
            }
        }
    }

    /// The limit `k²(γ)` of `(1/r) Σ k²_{i,r}(γ)`; equals `1 + γ²` for the
    /// alternating family and is strictly greater than 1.
    pub fn k_squared_limit(&self) -> f64 {
        match self.family {
            WeightFamily::Alternating => 1.0 + self.gamma * self.gamma,
        }
    }

    /// Mean-deviation bound implied by the family (the `τ` of the weight
    /// assumptions): `γ` for the alternating scheme.
    fn tau_bound(&self) -> f64 {
        match self.family {
            WeightFamily::Alternating => self.gamma,
        }
    }

    /// Scan all `r <= r_max` and report the observed assumption constants.
    ///
    /// The scan exploits that shipped families' weights do not depend on `r`,
    /// so the per-`r` sums are prefix sums of a single sequence. Deviations
    /// are accumulated with Kahan compensation to keep the reported constants
    /// accurate near their analytic boundaries.
    pub fn validate_assumptions(&self, r_max: usize) -> Result<AssumptionReport> {
        if r_max < 2 {
            return Err(Error::NotEnoughPoints {
                needed: 2,
                got: r_max,
            });
        }

        let limit = self.k_squared_limit();
        let mut tau_observed: f64 = 0.0;
        let mut c_k_observed = f64::NEG_INFINITY;
        // Kahan-compensated running sums of (k_i - 1) and (k_i^2 - limit).
        let (mut dev, mut dev_c) = (0.0f64, 0.0f64);
        let (mut sq_dev, mut sq_dev_c) = (0.0f64, 0.0f64);
        let (mut sq, mut sq_c) = (0.0f64, 0.0f64);

        for i in 1..=r_max {
            let w = self.weight_unchecked(i);
            c_k_observed = c_k_observed.max(w);

            let y = (w - 1.0) - dev_c;
            let t = dev + y;
            dev_c = (t - dev) - y;
            dev = t;
            tau_observed = tau_observed.max(dev.abs());

            let y = (w * w - limit) - sq_dev_c;
            let t = sq_dev + y;
            sq_dev_c = (t - sq_dev) - y;
            sq_dev = t;

            let y = w * w - sq_c;
            let t = sq + y;
            sq_c = (t - sq) - y;
            sq = t;
        }

        let r = r_max as f64;
        let k_sq_sequence_tail = sq / r;
        let gamma = self.gamma;

        // The abstract bound on the mean deviation is exactly tau_bound, but
        // each f64 weight differs from the abstract one by up to
        // eps * (1 + gamma), and those representation residuals accumulate
        // linearly in r even under exact summation. The slack scales with
        // the horizon accordingly.
        let a3_slack = TOL + r * f64::EPSILON * (1.0 + gamma);

        Ok(AssumptionReport {
            gamma,
            r_max,
            tau_observed,
            c_k_observed,
            k_sq_sequence_tail,
            k_sq_limit: limit,
            pass_a3: tau_observed <= self.tau_bound() + a3_slack,
            pass_a4: c_k_observed < 2.0 + TOL,
            pass_a5: sq_dev.abs() / r <= 2.0 * gamma * gamma / r + TOL,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_domain_is_half_open() {
        assert!(WeightScheme::alternating(0.0).is_err());
        assert!(WeightScheme::alternating(-0.1).is_err());
        assert!(WeightScheme::alternating(1.0 + 1e-9).is_err());
        assert!(WeightScheme::alternating(f64::NAN).is_err());
        assert!(WeightScheme::alternating(1.0).is_ok());
        assert!(WeightScheme::alternating(1e-9).is_ok());
    }

    #[test]
    fn weight_values_from_the_formula() {
        let s = WeightScheme::alternating(0.5).unwrap();
        assert_eq!(s.weight(1, 10).unwrap(), 0.5);
        assert_eq!(s.weight(2, 10).unwrap(), 1.5);
        let s1 = WeightScheme::alternating(1.0).unwrap();
        assert_eq!(s1.weight(3, 3).unwrap(), 0.0);
    }

    #[test]
    fn weight_index_range_checked() {
        let s = WeightScheme::alternating(0.5).unwrap();
        assert!(matches!(
            s.weight(0, 5),
            Err(Error::WeightIndexOutOfRange { index: 0, r: 5 })
        ));
        assert!(matches!(
            s.weight(6, 5),
            Err(Error::WeightIndexOutOfRange { index: 6, r: 5 })
        ));
    }

    #[test]
    fn weight_depends_only_on_index_parity() {
        let s = WeightScheme::alternating(0.7).unwrap();
        for i in 1..=20 {
            assert_eq!(s.weight(i, 25).unwrap(), s.weight(i, 1000).unwrap());
        }
    }

    #[test]
    fn k_squared_limit_values() {
        // (1/r) Σ (1 ± γ)² averages (1-γ)² and (1+γ)² => 1 + γ².
        assert_eq!(
            WeightScheme::alternating(1.0).unwrap().k_squared_limit(),
            2.0
        );
        assert_eq!(
            WeightScheme::alternating(0.5).unwrap().k_squared_limit(),
            1.25
        );
        // continuity toward the excluded boundary γ = 0
        let tiny = WeightScheme::alternating(1e-6).unwrap().k_squared_limit();
        assert!(tiny - 1.0 < 1e-11);
        assert!(tiny > 1.0);
    }

    #[test]
    fn validate_alternating_gamma_one() {
        // Σ k_i = r for even r and r − 1 for odd r, so the max deviation is 1.
        let s = WeightScheme::alternating(1.0).unwrap();
        let rep = s.validate_assumptions(100).unwrap();
        assert!((rep.tau_observed - 1.0).abs() < 1e-12);
        assert_eq!(rep.c_k_observed, 2.0);
        assert!(rep.all_pass(), "{rep:?}");
    }

    #[test]
    fn validate_small_horizon() {
        let s = WeightScheme::alternating(0.5).unwrap();
        let rep = s.validate_assumptions(10).unwrap();
        assert_eq!(rep.c_k_observed, 1.5);
        assert!(rep.all_pass(), "{rep:?}");
    }

    #[test]
    fn validate_large_horizon_tail() {
        let s = WeightScheme::alternating(0.5).unwrap();
        let rep = s.validate_assumptions(1_000_000).unwrap();
        assert!((rep.k_sq_sequence_tail - 1.25).abs() < 1e-6);
        assert!(rep.all_pass(), "{rep:?}");
    }

    #[test]
    fn validate_rejects_tiny_horizon() {
        let s = WeightScheme::alternating(0.5).unwrap();
        assert!(s.validate_assumptions(1).is_err());
    }

    #[test]
    fn mean_deviation_bound_holds_for_every_r() {
        // Exact partial sums: the deviation is γ at odd r and 0 at even r.
        // Accumulate (k_i − 1) so the running value stays O(γ).
        for gamma in [0.1, 0.3, 0.5, 0.9, 1.0] {
            let s = WeightScheme::alternating(gamma).unwrap();
            let mut dev_sum = 0.0;
            for r in 1..=500usize {
                dev_sum += s.weight(r, r).unwrap() - 1.0;
                let dev = dev_sum.abs();
                assert!(dev <= gamma + 1e-12, "gamma {gamma}, r {r}: dev {dev}");
            }
        }
    }

    #[test]
    fn second_moment_rate_holds_for_every_r() {
        // |(1/r) Σ k² − (1+γ²)| equals 2γ/r at odd r and 0 at even r.
        for gamma in [0.1, 0.5, 1.0] {
            let s = WeightScheme::alternating(gamma).unwrap();
            let limit = s.k_squared_limit();
            let mut dev_sum = 0.0;
            for r in 1..=500usize {
                let w = s.weight(r, r).unwrap();
                dev_sum += w * w - limit;
                let dev = dev_sum.abs() / r as f64;
                assert!(
                    dev <= 2.0 * gamma / r as f64 + 1e-12,
                    "gamma {gamma}, r {r}: dev {dev}"
                );
            }
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn weights_are_nonnegative_and_bounded(
                gamma in 1e-6f64..=1.0,
                i in 1usize..1000,
            ) {
                let s = WeightScheme::alternating(gamma).unwrap();
                let w = s.weight(i, 1000).unwrap();
                prop_assert!(w >= 0.0);
                prop_assert!(w <= 2.0);
            }

            #[test]
            fn limit_exceeds_one(gamma in 1e-6f64..=1.0) {
                let s = WeightScheme::alternating(gamma).unwrap();
                prop_assert!(s.k_squared_limit() > 1.0);
            }

            #[test]
            fn validator_passes_across_gamma(gamma in 0.01f64..=1.0, r_max in 2usize..400) {
                let s = WeightScheme::alternating(gamma).unwrap();
                let rep = s.validate_assumptions(r_max).unwrap();
                prop_assert!(rep.pass_a3 && rep.pass_a4, "{rep:?}");
            }
        }
    }
}
