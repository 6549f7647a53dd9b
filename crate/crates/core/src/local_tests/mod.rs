// SPDX-License-Identifier: MIT OR Apache-2.0

//! Local two-sample statistics `T_t(Y)` and their critical values.
//!
//! The parametric statistics are square roots of twice the log generalized
//! likelihood ratio for "one level on `(s, e]`" against "a change at `m`",
//! each computable in O(1) from [`PrefixSums`].

pub mod quantile;
pub mod rank_sum;

use std::fmt;

use serde::Serialize;

use crate::error::{LbdError, Result};
use crate::grid::Triplet;

pub use quantile::{normal_upper_quantile, student_t_upper_quantile};
pub use rank_sum::{RankScratch, RankSumNull};

/// Default ceiling on `(m - s)(e - m)(e - s)` for exact rank-sum quantiles.
pub const DEFAULT_EXACT_WILCOXON_WORK: u64 = 2_000_000;

/// Negative radicands down to this size are rounding residue and read as 0.
const RADICAND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum WilcoxonMode {
    /// Exact permutation quantiles while `(m-s)(e-m)(e-s) <= max_work`,
    /// otherwise the sub-Gaussian bound.
    Exact {
        max_work: u64,
    },
    Bound,
}

impl WilcoxonMode {
    pub fn exact() -> Self {
        WilcoxonMode::Exact {
            max_work: DEFAULT_EXACT_WILCOXON_WORK,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestModel {
    GaussianKnown { sigma: f64 },
    GaussianUnknown,
    Poisson,
    Exponential,
    Wilcoxon(WilcoxonMode),
}

impl TestModel {
    pub fn name(&self) -> &'static str {
        match self {
            TestModel::GaussianKnown { .. } => "gaussian-known",
            TestModel::GaussianUnknown => "gaussian-unknown",
            TestModel::Poisson => "poisson",
            TestModel::Exponential => "exponential",
            TestModel::Wilcoxon(_) => "wilcoxon",
        }
    }

    pub fn check(&self) -> Result<()> {
        if let TestModel::GaussianKnown { sigma } = self {
            if !(*sigma > 0.0 && sigma.is_finite()) {
                return Err(LbdError::invalid_argument(format!(
                    "sigma must be positive and finite, got {sigma}"
                )));
            }
        }
        Ok(())
    }

    /// Rejects data outside the model's support; reports the first offending
    /// index.
    pub fn validate_data(&self, y: &[f64]) -> Result<()> {
        for (i, &v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(LbdError::invalid_data(i, format!("value {v} is not finite")));
            }
            match self {
                TestModel::Poisson if v < 0.0 || (v - v.round()).abs() > 1e-9 => {
                    return Err(LbdError::invalid_data(
                        i,
                        format!("poisson model needs nonnegative integers, got {v}"),
                    ));
                }
                TestModel::Exponential if v <= 0.0 => {
                    return Err(LbdError::invalid_data(
                        i,
                        format!("exponential model needs positive values, got {v}"),
                    ));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

impl fmt::Display for TestModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestModel::GaussianKnown { sigma } => write!(f, "gaussian-known(sigma={sigma})"),
            TestModel::Wilcoxon(WilcoxonMode::Bound) => write!(f, "wilcoxon(bound)"),
            TestModel::Wilcoxon(WilcoxonMode::Exact { .. }) => write!(f, "wilcoxon(exact)"),
            other => f.write_str(other.name()),
        }
    }
}

/// Cumulative sums of `Y` and `Y²`; `cum[j]` is the sum of the first `j`
/// observations.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixSums {
    cum: Vec<f64>,
    cum_sq: Vec<f64>,
}

impl PrefixSums {
    pub fn new(y: &[f64]) -> Self {
        let mut cum = Vec::with_capacity(y.len() + 1);
        let mut cum_sq = Vec::with_capacity(y.len() + 1);
        let (mut a, mut b) = (0.0f64, 0.0f64);
        cum.push(0.0);
        cum_sq.push(0.0);
        for &v in y {
            a += v;
            b += v * v;
            cum.push(a);
            cum_sq.push(b);
        }
        PrefixSums { cum, cum_sq }
    }

    /// Number of observations.
    pub fn len(&self) -> usize {
        self.cum.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cum(&self) -> &[f64] {
        &self.cum
    }

    /// Sum of `Y_i` over `(a, b]`.
    #[inline]
    pub fn sum(&self, a: usize, b: usize) -> f64 {
        self.cum[b] - self.cum[a]
    }

    #[inline]
    pub fn sum_sq(&self, a: usize, b: usize) -> f64 {
        self.cum_sq[b] - self.cum_sq[a]
    }
}

/// A statistic next to its critical value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StatValue {
    pub value: f64,
    pub threshold: f64,
    pub significant: bool,
}

impl StatValue {
    pub fn new(value: f64, threshold: f64) -> Self {
        StatValue {
            value,
            threshold,
            significant: value > threshold,
        }
    }
}

fn clamp_radicand(r: f64, t: &Triplet) -> Result<f64> {
    if r >= 0.0 {
        Ok(r)
    } else if r > -RADICAND_SLACK {
        Ok(0.0)
    } else {
        Err(LbdError::Numerical(format!(
            "negative log-likelihood ratio {r} on triplet ({}, {}, {})",
            t.s, t.m, t.e
        )))
    }
}

/// Two-sample z-statistic with known noise level.
pub fn gaussian_z(prefix: &PrefixSums, t: &Triplet, sigma: f64) -> f64 {
    let k = t.left_len() as f64;
    let n2 = t.right_len() as f64;
    let diff = prefix.sum(t.s, t.m) / k - prefix.sum(t.m, t.e) / n2;
    diff.abs() / sigma * (k * n2 / t.span() as f64).sqrt()
}

/// Two-sample t-statistic with pooled variance on `e - s - 2` degrees of
/// freedom. A vanishing pooled variance gives 0 when the segment means agree
/// and `+∞` otherwise.
pub fn gaussian_t(prefix: &PrefixSums, t: &Triplet) -> Result<f64> {
    if t.span() < 4 {
        return Err(LbdError::InvalidTriplet {
            s: t.s,
            m: t.m,
            e: t.e,
            reason: "pooled variance needs e - s >= 4".into(),
        });
    }
    let k = t.left_len() as f64;
    let n2 = t.right_len() as f64;
    let s1 = prefix.sum(t.s, t.m);
    let s2 = prefix.sum(t.m, t.e);
    let q1 = prefix.sum_sq(t.s, t.m);
    let q2 = prefix.sum_sq(t.m, t.e);
    let ss = (q1 - s1 * s1 / k).max(0.0) + (q2 - s2 * s2 / n2).max(0.0);
    let mean1 = s1 / k;
    let mean2 = s2 / n2;
    let diff = (mean1 - mean2).abs();
    // sums of squares below this are cancellation noise from the prefix sums
    let noise = 1e-12 * (q1 + q2);
    if ss <= noise {
        let scale = mean1.abs().max(mean2.abs());
        return Ok(if diff <= 1e-12 * scale { 0.0 } else { f64::INFINITY });
    }
    let pooled = ss / (t.span() as f64 - 2.0);
    Ok(diff / pooled.sqrt() * (k * n2 / t.span() as f64).sqrt())
}

/// `k ȳ_seg ln(ȳ_seg / ȳ)` written in sums, with `0 · ln 0 = 0`.
fn poisson_term(seg_sum: f64, seg_len: f64, total_mean: f64) -> f64 {
    if seg_sum <= 0.0 {
        0.0
    } else {
        seg_sum * (seg_sum / (seg_len * total_mean)).ln()
    }
}

/// Root log-likelihood ratio for Poisson counts.
pub fn poisson_stat(prefix: &PrefixSums, t: &Triplet) -> Result<f64> {
    let s1 = prefix.sum(t.s, t.m);
    let s2 = prefix.sum(t.m, t.e);
    if s1 < -RADICAND_SLACK || s2 < -RADICAND_SLACK {
        return Err(LbdError::invalid_data(
            t.s,
            "negative counts in window under the poisson model",
        ));
    }
    let total = s1 + s2;
    if total <= 0.0 {
        return Ok(0.0);
    }
    let mean = total / t.span() as f64;
    let r = 2.0 * (poisson_term(s1, t.left_len() as f64, mean) + poisson_term(s2, t.right_len() as f64, mean));
    Ok(clamp_radicand(r, t)?.sqrt())
}

/// Root log-likelihood ratio for exponential waiting times.
pub fn exponential_stat(prefix: &PrefixSums, t: &Triplet) -> Result<f64> {
    let k = t.left_len() as f64;
    let n2 = t.right_len() as f64;
    let s1 = prefix.sum(t.s, t.m);
    let s2 = prefix.sum(t.m, t.e);
    if s1 <= 0.0 || s2 <= 0.0 {
        return Err(LbdError::invalid_data(
            t.s,
            "exponential model needs positive values in window",
        ));
    }
    let mean = (s1 + s2) / t.span() as f64;
    let r = 2.0 * k * (mean / (s1 / k)).ln() + 2.0 * n2 * (mean / (s2 / n2)).ln();
    Ok(clamp_radicand(r, t)?.sqrt())
}

/// Standardized Wilcoxon rank-sum statistic of `(s, m]` within `(s, e]`, with
/// midranks for ties.
pub fn wilcoxon_stat(y: &[f64], t: &Triplet) -> f64 {
    let (d, _) = rank_sum::rank_sum_deviation(y, t.s, t.m, t.e, &mut RankScratch::default());
    rank_sum::standardize(t.left_len(), t.span(), d as f64)
}

/// `√(2 ln((4 + 2e) / α))`, the exponential-family tail bound. The
/// underlying tail estimate is only claimed for moderate x; it is applied
/// at every level regardless.
pub fn exp_family_critical(alpha_t: f64) -> f64 {
    (2.0 * ((4.0 + 2.0 * std::f64::consts::E) / alpha_t).ln()).sqrt()
}

/// `√(2 ln(2 / α))`, the rank-sum tail bound.
pub fn rank_sum_bound_critical(alpha_t: f64) -> f64 {
    (2.0 * (2.0 / alpha_t).ln()).sqrt()
}

/// Whether an exact rank-sum quantile is affordable for this triplet.
pub fn exact_rank_sum_affordable(t: &Triplet, max_work: u64) -> bool {
    let work = (t.left_len() as u128) * (t.right_len() as u128) * (t.span() as u128);
    work <= max_work as u128
}

/// Critical value `c_{t,n}(α_t)`: a level-`α_t` test rejects when the local
/// statistic strictly exceeds it.
pub fn critical_value(model: &TestModel, alpha_t: f64, t: &Triplet) -> Result<f64> {
    if !(alpha_t > 0.0 && alpha_t < 1.0) {
        return Err(LbdError::invalid_argument(format!(
            "per-triplet level must lie in (0, 1), got {alpha_t}"
        )));
    }
    Ok(match model {
        TestModel::GaussianKnown { .. } => normal_upper_quantile(alpha_t / 2.0),
        TestModel::GaussianUnknown => {
            if t.span() < 4 {
                return Err(LbdError::InvalidTriplet {
                    s: t.s,
                    m: t.m,
                    e: t.e,
                    reason: "t quantile needs e - s >= 4".into(),
                });
            }
            student_t_upper_quantile(alpha_t / 2.0, (t.span() - 2) as f64)
        }
        TestModel::Poisson | TestModel::Exponential => exp_family_critical(alpha_t),
        TestModel::Wilcoxon(WilcoxonMode::Exact { max_work }) if exact_rank_sum_affordable(t, *max_work) => {
            let null = RankSumNull::new(t.left_len(), t.right_len());
            let d = null.critical_deviation(alpha_t);
            rank_sum::standardize(t.left_len(), t.span(), d as f64)
        }
        TestModel::Wilcoxon(_) => rank_sum_bound_critical(alpha_t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trip(s: usize, m: usize, e: usize) -> Triplet {
        Triplet {
            level: 0,
            s,
            m,
            e,
            block: 1,
        }
    }

    #[test]
    fn z_examples() {
        let p = PrefixSums::new(&[0.0, 0.0, 2.0, 2.0]);
        assert!((gaussian_z(&p, &trip(0, 2, 4), 1.0) - 2.0).abs() < 1e-15);
        let flat = PrefixSums::new(&[3.5; 10]);
        assert_eq!(gaussian_z(&flat, &trip(1, 4, 9), 0.7), 0.0);
    }

    #[test]
    fn t_examples() {
        let p = PrefixSums::new(&[0.0, 1.0, 2.0, 3.0]);
        let v = gaussian_t(&p, &trip(0, 2, 4)).unwrap();
        assert!((v - 2.0 / 0.5f64.sqrt()).abs() < 1e-12);
        assert!((v - 2.828_427_124_746_19).abs() < 1e-12);
        let flat = PrefixSums::new(&[7.0; 8]);
        assert_eq!(gaussian_t(&flat, &trip(0, 3, 8)).unwrap(), 0.0);
        let step = PrefixSums::new(&[1.0, 1.0, 1.0, 4.0, 4.0, 4.0]);
        assert_eq!(gaussian_t(&step, &trip(0, 3, 6)).unwrap(), f64::INFINITY);
        assert!(matches!(
            gaussian_t(&p, &trip(0, 1, 3)),
            Err(LbdError::InvalidTriplet { .. })
        ));
    }

    #[test]
    fn poisson_examples() {
        // segment means 1 and 3
        let p = PrefixSums::new(&[1.0, 1.0, 3.0, 3.0]);
        let v = poisson_stat(&p, &trip(0, 2, 4)).unwrap();
        let expect = (-4.0 * 2f64.ln() + 12.0 * 1.5f64.ln()).sqrt();
        assert!((v - expect).abs() < 1e-12);
        assert!((v - 1.446_717_862_977_502_4).abs() < 1e-12);
        let zeros = PrefixSums::new(&[0.0; 6]);
        assert_eq!(poisson_stat(&zeros, &trip(0, 2, 6)).unwrap(), 0.0);
        let half = PrefixSums::new(&[0.0, 0.0, 5.0, 1.0]);
        assert!(poisson_stat(&half, &trip(0, 2, 4)).unwrap() > 0.0);
        let even = PrefixSums::new(&[2.0, 4.0, 3.0, 3.0]);
        assert!(poisson_stat(&even, &trip(0, 2, 4)).unwrap() < 1e-7);
    }

    #[test]
    fn exponential_examples() {
        let p = PrefixSums::new(&[1.0, 1.0, 2.0, 2.0]);
        let v = exponential_stat(&p, &trip(0, 2, 4)).unwrap();
        assert!((v - 0.686_390_663_270_949_4).abs() < 1e-12);
        let even = PrefixSums::new(&[0.5, 1.5, 1.0, 1.0]);
        assert!(exponential_stat(&even, &trip(0, 2, 4)).unwrap() < 1e-7);
    }

    #[test]
    fn wilcoxon_examples() {
        let v = wilcoxon_stat(&[1.0, 2.0, 3.0, 4.0], &trip(0, 2, 4));
        assert!((v - 0.979_795_897_113_271_2).abs() < 1e-12);
        // first-segment ranks {1, 4} are centred
        assert_eq!(wilcoxon_stat(&[1.0, 2.0, 3.0, 0.5], &trip(0, 2, 4)), 0.0);
    }

    #[test]
    fn critical_value_examples() {
        let t = trip(0, 2, 4);
        let c = critical_value(&TestModel::Poisson, 0.05, &t).unwrap();
        assert!((c - 3.237_382_945_542_892).abs() < 1e-12);
        assert_eq!(c, critical_value(&TestModel::Exponential, 0.05, &t).unwrap());
        let c = critical_value(&TestModel::Wilcoxon(WilcoxonMode::Bound), 0.05, &t).unwrap();
        assert!((c - 2.716_203_031_481_239).abs() < 1e-12);
        let c = critical_value(&TestModel::GaussianKnown { sigma: 1.0 }, 0.3173, &t).unwrap();
        assert!((c - 1.000_021_713_322_999_2).abs() < 1e-10);
        for bad in [0.0, 1.0, -1.0, f64::NAN] {
            assert!(critical_value(&TestModel::Poisson, bad, &t).is_err());
        }
    }

    #[test]
    fn student_critical_uses_window_df() {
        let t = trip(0, 5, 12);
        let c = critical_value(&TestModel::GaussianUnknown, 2e-6, &t).unwrap();
        assert!((c - 9.751_995_490_943_26).abs() < 1e-8);
    }

    #[test]
    fn exact_wilcoxon_falls_back_when_expensive() {
        let small = trip(0, 5, 12);
        let bound = TestModel::Wilcoxon(WilcoxonMode::Bound);
        let exact = TestModel::Wilcoxon(WilcoxonMode::Exact { max_work: 1_000 });
        let c_exact = critical_value(&exact, 0.01, &small).unwrap();
        let c_bound = critical_value(&bound, 0.01, &small).unwrap();
        assert!(c_exact < c_bound);
        let big = trip(0, 50, 120);
        assert_eq!(
            critical_value(&exact, 0.01, &big).unwrap(),
            critical_value(&bound, 0.01, &big).unwrap()
        );
    }

    #[test]
    fn data_validation() {
        assert!(TestModel::Poisson.validate_data(&[0.0, 3.0, 2.0]).is_ok());
        assert_eq!(
            TestModel::Poisson.validate_data(&[0.0, 3.0, -1.0]),
            Err(LbdError::invalid_data(
                2,
                "poisson model needs nonnegative integers, got -1"
            ))
        );
        assert!(matches!(
            TestModel::Poisson.validate_data(&[0.5]),
            Err(LbdError::InvalidData { index: 0, .. })
        ));
        assert!(matches!(
            TestModel::Exponential.validate_data(&[1.0, 0.0]),
            Err(LbdError::InvalidData { index: 1, .. })
        ));
        assert!(matches!(
            TestModel::GaussianUnknown.validate_data(&[1.0, f64::NAN]),
            Err(LbdError::InvalidData { index: 1, .. })
        ));
        assert!(TestModel::GaussianKnown { sigma: 0.0 }.check().is_err());
    }

    fn series(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-50.0f64..50.0, len)
    }

    fn split() -> impl Strategy<Value = (usize, usize, usize)> {
        (0usize..5, 2usize..9, 2usize..9).prop_map(|(s, a, b)| (s, s + a, s + a + b))
    }

    proptest! {
        #[test]
        fn z_is_homogeneous(y in series(24), (s, m, e) in split(), c in 0.1f64..20.0) {
            let t = trip(s, m, e);
            let base = gaussian_z(&PrefixSums::new(&y), &t, 1.3);
            let scaled: Vec<f64> = y.iter().map(|v| v * c).collect();
            let other = gaussian_z(&PrefixSums::new(&scaled), &t, 1.3 * c);
            prop_assert!((base - other).abs() <= 1e-9 * (1.0 + base));
            prop_assert!(base >= 0.0 && base.is_finite());
        }

        #[test]
        fn t_is_location_invariant(y in series(24), (s, m, e) in split(), shift in -100.0f64..100.0) {
            let t = trip(s, m, e);
            let base = gaussian_t(&PrefixSums::new(&y), &t).unwrap();
            let moved: Vec<f64> = y.iter().map(|v| v + shift).collect();
            let other = gaussian_t(&PrefixSums::new(&moved), &t).unwrap();
            prop_assert!((base - other).abs() <= 1e-6 * (1.0 + base));
        }

        #[test]
        fn exponential_is_scale_invariant(y in prop::collection::vec(0.01f64..10.0, 24), (s, m, e) in split(), c in 0.01f64..100.0) {
            let t = trip(s, m, e);
            let base = exponential_stat(&PrefixSums::new(&y), &t).unwrap();
            let scaled: Vec<f64> = y.iter().map(|v| v * c).collect();
            let other = exponential_stat(&PrefixSums::new(&scaled), &t).unwrap();
            prop_assert!((base - other).abs() <= 1e-6 * (1.0 + base));
        }

        #[test]
        fn poisson_is_nonnegative(y in prop::collection::vec(0u32..30, 24), (s, m, e) in split()) {
            let y: Vec<f64> = y.into_iter().map(f64::from).collect();
            let v = poisson_stat(&PrefixSums::new(&y), &trip(s, m, e)).unwrap();
            prop_assert!(v >= 0.0 && v.is_finite());
        }

        #[test]
        fn wilcoxon_is_rank_invariant(y in series(24), (s, m, e) in split()) {
            let t = trip(s, m, e);
            let base = wilcoxon_stat(&y, &t);
            let warped: Vec<f64> = y.iter().map(|v| v.powi(3) + 2.0 * v).collect();
            prop_assert_eq!(base, wilcoxon_stat(&warped, &t));
        }
    }
}
