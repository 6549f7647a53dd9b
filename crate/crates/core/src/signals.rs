// SPDX-License-Identifier: MIT OR Apache-2.0

//! Test signals, seeded noise and the Monte Carlo coverage experiment.
//!
//! # Changepoint convention
//!
//! [`SignalSpec::changepoints`] lists, as in the usual benchmark tables, the
//! 1-based index at which each new segment *starts*. The detector's
//! changepoint `τ` is the last index of the old segment, so `τ = c - 1`;
//! [`SignalSpec::taus`] returns those.
//!
//! # Random numbers
//!
//! Replicate `r` of an experiment with seed `s` draws its noise from
//! `ChaCha8Rng::seed_from_u64(s)` switched to stream `r`
//! (`set_stream(r)`), through `rand_distr::StandardNormal`. Replicate `0`
//! is what [`simulate`] returns for seed `s`. Replicates are therefore
//! independent of how they are scheduled or split across runs.

use std::collections::BTreeMap;
use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{DetectionResult, Detector, DetectorConfig};
use crate::error::{LbdError, Result};
use crate::local_tests::TestModel;

/// Name of the noise generator, echoed in reports.
pub const GENERATOR: &str = "ChaCha8Rng::seed_from_u64(seed), set_stream(replicate), StandardNormal";

pub const BUILTIN_NAMES: [&str; 9] = [
    "null1000", "null2000", "null3000", "blocks", "fms", "mix", "mix-wbs", "teeth10", "stairs10",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub name: String,
    pub length: usize,
    /// 1-based start of each segment after the first.
    pub changepoints: Vec<usize>,
    /// Segment means, one more than there are changepoints.
    pub values: Vec<f64>,
    pub sigma: f64,
}

impl SignalSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(LbdError::invalid_argument("signal length must be positive"));
        }
        if self.values.len() != self.changepoints.len() + 1 {
            return Err(LbdError::invalid_argument(format!(
                "{} changepoints need {} values, got {}",
                self.changepoints.len(),
                self.changepoints.len() + 1,
                self.values.len()
            )));
        }
        if self.changepoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LbdError::invalid_argument("changepoints must be strictly increasing"));
        }
        if let (Some(&first), Some(&last)) = (self.changepoints.first(), self.changepoints.last()) {
            if first < 2 || last > self.length {
                return Err(LbdError::invalid_argument(format!(
                    "changepoints must lie in [2, {}]",
                    self.length
                )));
            }
        }
        if self.values.windows(2).any(|w| w[0] == w[1]) {
            return Err(LbdError::invalid_argument("adjacent segment values must differ"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(LbdError::invalid_argument("segment values must be finite"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(LbdError::invalid_argument("sigma must be finite and >= 0"));
        }
        Ok(())
    }

    /// Number of changepoints `K`.
    pub fn k(&self) -> usize {
        self.changepoints.len()
    }

    /// Last index of each old segment.
    pub fn taus(&self) -> Vec<usize> {
        self.changepoints.iter().map(|c| c - 1).collect()
    }

    pub fn mean_vector(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.length);
        let mut start = 1;
        for (seg, &v) in self.values.iter().enumerate() {
            let end = self.changepoints.get(seg).copied().unwrap_or(self.length + 1);
            out.extend(std::iter::repeat_n(v, end - start));
            start = end;
        }
        out
    }
}

fn spec(name: &str, length: usize, changepoints: &[usize], values: &[f64], sigma: f64) -> SignalSpec {
    SignalSpec {
        name: name.to_string(),
        length,
        changepoints: changepoints.to_vec(),
        values: values.to_vec(),
        sigma,
    }
}

const FMS_CPS: [usize; 6] = [139, 226, 243, 300, 309, 333];
const FMS_VALUES: [f64; 7] = [-0.18, 0.08, 1.07, -0.53, 0.16, -0.69, -0.16];

/// A named benchmark signal.
///
/// `mix` is listed in the reference table with exactly the parameters of
/// `fms`, and is reproduced that way. `mix-wbs` is the mix signal of the
/// wild binary segmentation benchmarks (length 560, 13 changepoints).
pub fn builtin_signal(name: &str) -> Result<SignalSpec> {
    let s = match name {
        "null1000" => spec(name, 1000, &[], &[0.0], 1.0),
        "null2000" => spec(name, 2000, &[], &[0.0], 1.0),
        "null3000" => spec(name, 3000, &[], &[0.0], 1.0),
        "blocks" => spec(
            name,
            2048,
            &[205, 267, 308, 472, 512, 820, 902, 1332, 1557, 1598, 1659],
            &[
                0.0, 14.64, -3.66, 7.32, -7.32, 10.98, -4.39, 3.29, 19.03, 7.68, 15.37, 0.0,
            ],
            10.0,
        ),
        "fms" | "mix" => spec(name, 497, &FMS_CPS, &FMS_VALUES, 0.3),
        "mix-wbs" => spec(
            name,
            560,
            &[11, 21, 41, 61, 91, 121, 161, 201, 251, 301, 361, 421, 491],
            &[
                7.0, -7.0, 6.0, -6.0, 5.0, -5.0, 4.0, -4.0, 3.0, -3.0, 2.0, -2.0, 1.0, -1.0,
            ],
            4.0,
        ),
        "teeth10" => {
            let cps: Vec<usize> = (1..=13).map(|i| 10 * i + 1).collect();
            let values: Vec<f64> = (0..14).map(|i| (i % 2) as f64).collect();
            spec(name, 140, &cps, &values, 0.4)
        }
        "stairs10" => {
            let cps: Vec<usize> = (1..=14).map(|i| 10 * i + 1).collect();
            let values: Vec<f64> = (1..=15).map(f64::from).collect();
            spec(name, 150, &cps, &values, 0.3)
        }
        _ => {
            return Err(LbdError::invalid_argument(format!(
                "unknown signal {name:?}; expected one of {}",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    Ok(s)
}

/// Alternating tents of half-height `h = (4 - ε)/(2√δ) · √ln(n/δ)` with
/// `δ = ⌊n/(4m)⌋`: the mean is `-h` on `((2i-2)δ, (2i-1)δ]` and `+h` on
/// `((2i-1)δ, 2iδ]` for `i = 1..m`, zero afterwards, `σ = 1`. The targets
/// `t_i = (2i-1)δ` sit at distance `δ` from both neighbours.
pub fn hard_instance(n: usize, m: usize, epsilon: f64) -> Result<SignalSpec> {
    if m == 0 || 4 * m > n {
        return Err(LbdError::invalid_argument(format!(
            "need 1 <= m <= n/4, got m = {m}, n = {n}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 4.0) {
        return Err(LbdError::invalid_argument(format!(
            "epsilon must lie in (0, 4), got {epsilon}"
        )));
    }
    let delta = n / (4 * m);
    let h = 0.5 * (4.0 - epsilon) / (delta as f64).sqrt() * (n as f64 / delta as f64).ln().sqrt();
    let changepoints: Vec<usize> = (1..=2 * m).map(|j| j * delta + 1).collect();
    let mut values: Vec<f64> = (0..2 * m).map(|j| if j % 2 == 0 { -h } else { h }).collect();
    values.push(0.0);
    Ok(SignalSpec {
        name: format!("hard-n{n}-m{m}"),
        length: n,
        changepoints,
        values,
        sigma: 1.0,
    })
}

/// Targets `t_i = (2i-1)δ` of [`hard_instance`], as changepoints `τ`.
pub fn hard_instance_targets(n: usize, m: usize) -> Vec<usize> {
    let delta = n / (4 * m.max(1));
    (1..=m).map(|i| (2 * i - 1) * delta).collect()
}

fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

fn noisy(mean: &[f64], sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    mean.iter()
        .map(|&mu| {
            let z: f64 = StandardNormal.sample(rng);
            mu + sigma * z
        })
        .collect()
}

/// `Y_i = μ_i + σ Z_i`, replicate 0 of `seed`.
pub fn simulate(spec: &SignalSpec, seed: u64) -> Result<Vec<f64>> {
    simulate_replicate(spec, seed, 0)
}

pub fn simulate_replicate(spec: &SignalSpec, seed: u64, replicate: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    Ok(noisy(
        &spec.mean_vector(),
        spec.sigma,
        &mut replicate_rng(seed, replicate),
    ))
}

/// Whether every reported interval contains a changepoint `τ`.
pub fn all_intervals_covered(result: &DetectionResult, taus: &[usize]) -> bool {
    // every detection contains a minimal one, so checking those suffices
    result.minimal.iter().all(|iv| {
        let lo = iv.lo.max(0) as usize;
        let i = taus.partition_point(|&t| t < lo);
        i < taus.len() && taus[i] as i64 <= iv.hi
    })
}

/// Mergeable tallies over a set of replicates.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CoverageTally {
    pub replicates: u64,
    pub covered: u64,
    pub count_ok: u64,
    pub sum_n: u64,
    /// Replicates per value of `N - K`.
    pub n_minus_k: BTreeMap<i64, u64>,
}

impl CoverageTally {
    pub fn record(&mut self, covered: bool, n_hat: usize, k: usize) {
        self.replicates += 1;
        self.covered += u64::from(covered);
        self.count_ok += u64::from(n_hat <= k);
        self.sum_n += n_hat as u64;
        *self.n_minus_k.entry(n_hat as i64 - k as i64).or_insert(0) += 1;
    }

    pub fn merge(&mut self, other: &CoverageTally) {
        self.replicates += other.replicates;
        self.covered += other.covered;
        self.count_ok += other.count_ok;
        self.sum_n += other.sum_n;
        for (&d, &c) in &other.n_minus_k {
            *self.n_minus_k.entry(d).or_insert(0) += c;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub signal: String,
    pub model: TestModel,
    pub alpha: f64,
    pub k: usize,
    pub n_sim: u64,
    pub seed: u64,
    pub generator: &'static str,
    /// Share of replicates where every interval contains a changepoint.
    pub p1_hat: f64,
    /// Share of replicates with `N <= K`.
    pub p2_hat: f64,
    pub mean_n: f64,
    pub hist_n_minus_k: BTreeMap<i64, f64>,
    pub tally: CoverageTally,
}

impl CoverageReport {
    pub fn from_tally(spec: &SignalSpec, model: TestModel, alpha: f64, seed: u64, tally: CoverageTally) -> Self {
        let n = tally.replicates.max(1) as f64;
        CoverageReport {
            signal: spec.name.clone(),
            model,
            alpha,
            k: spec.k(),
            n_sim: tally.replicates,
            seed,
            generator: GENERATOR,
            p1_hat: tally.covered as f64 / n,
            p2_hat: tally.count_ok as f64 / n,
            mean_n: tally.sum_n as f64 / n,
            hist_n_minus_k: tally.n_minus_k.iter().map(|(&d, &c)| (d, c as f64 / n)).collect(),
            tally,
        }
    }

    /// Most frequent `N - K`; ties go to the smaller difference.
    pub fn mode_n_minus_k(&self) -> Option<i64> {
        let mut best: Option<(i64, u64)> = None;
        for (&d, &c) in &self.tally.n_minus_k {
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((d, c));
            }
        }
        best.map(|(d, _)| d)
    }
}

/// Runs replicates `range` of the experiment and returns their tallies.
/// Tallies of adjacent ranges merge into the tally of their union.
pub fn coverage_replicates(
    spec: &SignalSpec,
    config: &DetectorConfig,
    seed: u64,
    range: Range<u64>,
) -> Result<CoverageTally> {
    spec.validate()?;
    let detector = Detector::new(config.clone().with_parallel(false), spec.length)?;
    let mean = spec.mean_vector();
    let taus = spec.taus();
    let k = spec.k();
    let one = |r: u64| -> Result<(bool, usize)> {
        let y = noisy(&mean, spec.sigma, &mut replicate_rng(seed, r));
        let out = detector.run(&y)?;
        Ok((all_intervals_covered(&out, &taus), out.lower_bound))
    };
    let results: Vec<(bool, usize)> = if config.parallel {
        range.into_par_iter().map(one).collect::<Result<_>>()?
    } else {
        range.map(one).collect::<Result<_>>()?
    };
    let mut tally = CoverageTally::default();
    for (covered, n_hat) in results {
        tally.record(covered, n_hat, k);
    }
    Ok(tally)
}

/// Estimates `p̂₁`, `p̂₂`, mean `N` and the `N - K` histogram over `n_sim`
/// replicates. Replicates run on the rayon pool when `config.parallel`.
pub fn coverage_experiment(
    spec: &SignalSpec,
    config: &DetectorConfig,
    n_sim: u64,
    seed: u64,
) -> Result<CoverageReport> {
    if n_sim == 0 {
        return Err(LbdError::invalid_argument("n_sim must be at least 1"));
    }
    let tally = coverage_replicates(spec, config, seed, 0..n_sim)?;
    Ok(CoverageReport::from_tally(
        spec,
        config.model,
        config.alpha,
        seed,
        tally,
    ))
}
