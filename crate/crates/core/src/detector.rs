// SPDX-License-Identifier: MIT OR Apache-2.0

//! The full scan: calibrate every block, evaluate each triplet's local test
//! and collect the significant intervals `[s + 1, e - 1]`.
//!
//! A [`Detector`] is bound to one series length, so grids, block sizes and
//! critical values are built once and reused across series of that length
//! (Monte Carlo replicates in particular).

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::Serialize;

use crate::calibration::{calibrate, CalibrationTable};
use crate::error::{LbdError, Result};
use crate::grid::{Triplet, TripletFilter, TripletGrid};
use crate::intervals::{minimal_and_disjoint_sorted, ClosedInterval};
use crate::local_tests::rank_sum::{self, RankScratch, RankSumNull};
use crate::local_tests::{
    critical_value, exact_rank_sum_affordable, exponential_stat, gaussian_t, gaussian_z, poisson_stat,
    rank_sum_bound_critical, PrefixSums, TestModel, WilcoxonMode,
};

/// Lattice points per parallel work unit.
const CHUNK_LEFT_POINTS: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorConfig {
    pub model: TestModel,
    pub alpha: f64,
    /// Evaluate only triplets with `e - s <= n^p`.
    pub max_len_exp: Option<f64>,
    /// Spread the scan over the current rayon pool.
    #[serde(skip)]
    pub parallel: bool,
}

impl DetectorConfig {
    pub fn new(model: TestModel, alpha: f64) -> Self {
        DetectorConfig {
            model,
            alpha,
            max_len_exp: None,
            parallel: false,
        }
    }

    pub fn with_max_len_exp(mut self, p: f64) -> Self {
        self.max_len_exp = Some(p);
        self
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }
}

/// One significant triplet, reported as the closed interval `[s+1, e-1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Detection {
    pub lo: usize,
    pub hi: usize,
    #[serde(flatten)]
    pub triplet: Triplet,
    #[serde(serialize_with = "serialize_stat")]
    pub stat: f64,
    pub threshold: f64,
    pub alpha_t: f64,
}

fn serialize_stat<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("inf")
    }
}

impl Detection {
    pub fn interval(&self) -> ClosedInterval {
        ClosedInterval {
            lo: self.lo as i64,
            hi: self.hi as i64,
        }
    }
}

/// Echo of the configuration and grid that produced a result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub model: TestModel,
    pub alpha: f64,
    pub n: usize,
    pub max_span: Option<usize>,
    pub triplets_evaluated: u64,
    pub first_block_levels: u32,
    pub block_sizes: Vec<u64>,
    pub per_block_alpha: Vec<f64>,
    pub harmonic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionResult {
    pub config: RunSummary,
    /// Every significant triplet, ordered by `(hi ascending, lo descending)`.
    pub detections: Vec<Detection>,
    pub minimal: Vec<ClosedInterval>,
    pub disjoint: Vec<ClosedInterval>,
    /// Lower confidence bound on the number of changepoints.
    #[serde(rename = "n_lower_bound")]
    pub lower_bound: usize,
}

impl DetectionResult {
    pub fn intervals(&self) -> Vec<ClosedInterval> {
        self.detections.iter().map(Detection::interval).collect()
    }
}

/// Largest admissible `e - s` under the cap `n^p`.
pub fn max_span_for(n: usize, p: f64) -> Result<usize> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(LbdError::invalid_argument(format!(
            "length cap exponent must lie in (0, 1], got {p}"
        )));
    }
    if p == 1.0 {
        return Ok(n);
    }
    Ok(((n as f64).powf(p) + 1e-9).floor() as usize)
}

/// Keeps the triplets with `e - s <= n^p`.
pub fn max_interval_cap(triplets: &[Triplet], n: usize, p: f64) -> Result<Vec<Triplet>> {
    let cap = max_span_for(n, p)?;
    Ok(triplets.iter().filter(|t| t.span() <= cap).copied().collect())
}

/// Runs the scan with default options.
pub fn detect(y: &[f64], model: TestModel, alpha: f64) -> Result<DetectionResult> {
    Detector::new(DetectorConfig::new(model, alpha), y.len())?.run(y)
}

/// Critical values that depend on more than the block.
#[derive(Debug)]
enum Thresholds {
    /// One value per block.
    PerBlock(Vec<f64>),
    /// Student t: keyed by `(block, e - s)`.
    BySpan(HashMap<(u32, usize), f64>),
    /// Exact rank-sum deviations, filled lazily; keyed by `(block, m - s, e - m)`.
    RankSum {
        bound: Vec<f64>,
        max_work: u64,
        nulls: Mutex<HashMap<(usize, usize), Arc<RankSumNull>>>,
        critical: Mutex<HashMap<(u32, usize, usize), usize>>,
    },
}

#[derive(Debug)]
pub struct Detector {
    config: DetectorConfig,
    grid: TripletGrid,
    filter: TripletFilter,
    calibration: Option<CalibrationTable>,
    thresholds: Thresholds,
    evaluated: u64,
}

impl Detector {
    /// Builds the grid, calibration and critical values for length-`n` series.
    pub fn new(config: DetectorConfig, n: usize) -> Result<Self> {
        config.model.check()?;
        if !(config.alpha > 0.0 && config.alpha < 1.0) {
            return Err(LbdError::invalid_argument(format!(
                "alpha must lie in (0, 1), got {}",
                config.alpha
            )));
        }
        let grid = TripletGrid::new(n)?;
        let mut filter = TripletFilter::default();
        if let TestModel::GaussianUnknown = config.model {
            // pooled variance needs two observations on each side
            filter.min_interval_len = 2;
        }
        if let Some(p) = config.max_len_exp {
            filter.max_span = max_span_for(n, p)?;
        }
        let mut sizes = grid.block_sizes(&filter);
        while sizes.last() == Some(&0) {
            sizes.pop();
        }
        let evaluated = sizes.iter().sum();
        let calibration = if sizes.is_empty() {
            None
        } else {
            Some(calibrate(config.alpha, &sizes)?)
        };
        let thresholds = match &calibration {
            None => Thresholds::PerBlock(Vec::new()),
            Some(table) => build_thresholds(&config.model, &grid, &filter, table)?,
        };
        Ok(Detector {
            config,
            grid,
            filter,
            calibration,
            thresholds,
            evaluated,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn grid(&self) -> &TripletGrid {
        &self.grid
    }

    pub fn filter(&self) -> &TripletFilter {
        &self.filter
    }

    pub fn calibration(&self) -> Option<&CalibrationTable> {
        self.calibration.as_ref()
    }

    pub fn triplets_evaluated(&self) -> u64 {
        self.evaluated
    }

    fn summary(&self) -> RunSummary {
        let (block_sizes, per_block_alpha, harmonic) = match &self.calibration {
            Some(t) => (t.block_sizes.clone(), t.per_block_alpha.clone(), t.harmonic),
            None => (Vec::new(), Vec::new(), 0.0),
        };
        RunSummary {
            model: self.config.model,
            alpha: self.config.alpha,
            n: self.grid.n(),
            max_span: self.config.max_len_exp.map(|_| self.filter.max_span),
            triplets_evaluated: self.evaluated,
            first_block_levels: self.grid.first_block_levels(),
            block_sizes,
            per_block_alpha,
            harmonic,
        }
    }

    /// Runs the scan on `y`, which must have the length the detector was
    /// built for.
    pub fn run(&self, y: &[f64]) -> Result<DetectionResult> {
        if y.len() != self.grid.n() {
            return Err(LbdError::invalid_argument(format!(
                "detector built for n = {}, got a series of length {}",
                self.grid.n(),
                y.len()
            )));
        }
        self.config.model.validate_data(y)?;

        let mut detections = match &self.calibration {
            None => Vec::new(),
            Some(table) => self.scan(y, table)?,
        };
        detections.sort_by(|a, b| a.hi.cmp(&b.hi).then(b.lo.cmp(&a.lo)).then(a.triplet.cmp(&b.triplet)));
        let intervals: Vec<ClosedInterval> = detections.iter().map(Detection::interval).collect();
        let summary = minimal_and_disjoint_sorted(&intervals);
        Ok(DetectionResult {
            config: self.summary(),
            detections,
            minimal: summary.minimal,
            disjoint: summary.disjoint,
            lower_bound: summary.count,
        })
    }

    fn scan(&self, y: &[f64], table: &CalibrationTable) -> Result<Vec<Detection>> {
        let units = self.work_units();
        let model = self.config.model;
        let prefix = match model {
            TestModel::GaussianKnown { .. } | TestModel::GaussianUnknown => {
                // both statistics are location invariant; centring keeps the
                // prefix sums small
                let mean = y.iter().sum::<f64>() / y.len() as f64;
                let centred: Vec<f64> = y.iter().map(|v| v - mean).collect();
                PrefixSums::new(&centred)
            }
            _ => PrefixSums::new(y),
        };
        let run_unit = |unit: &WorkUnit| -> Result<Vec<Detection>> {
            match model {
                TestModel::GaussianKnown { sigma } => Ok(self.scan_gaussian_known(unit, &prefix, sigma, table)),
                TestModel::GaussianUnknown => self.scan_with(unit, table, |t| {
                    let stat = gaussian_t(&prefix, t)?;
                    Ok((stat, self.span_threshold(t)))
                }),
                TestModel::Poisson => self.scan_with(unit, table, |t| {
                    Ok((poisson_stat(&prefix, t)?, self.block_threshold(t)))
                }),
                TestModel::Exponential => self.scan_with(unit, table, |t| {
                    Ok((exponential_stat(&prefix, t)?, self.block_threshold(t)))
                }),
                TestModel::Wilcoxon(_) => {
                    let mut scratch = RankScratch::default();
                    self.scan_with(unit, table, |t| Ok(self.wilcoxon_eval(y, t, table, &mut scratch)))
                }
            }
        };
        let parts: Vec<Vec<Detection>> = if self.config.parallel {
            units.par_iter().map(run_unit).collect::<Result<_>>()?
        } else {
            units.iter().map(run_unit).collect::<Result<_>>()?
        };
        Ok(parts.into_iter().flatten().collect())
    }

    fn work_units(&self) -> Vec<WorkUnit> {
        let n = self.grid.n();
        let mut units = Vec::new();
        for lvl in self.grid.levels() {
            let stride = CHUNK_LEFT_POINTS * lvl.spacing;
            let mut start = 0;
            while start < n {
                units.push(WorkUnit {
                    level: lvl.level,
                    left_start: start,
                    left_end: (start + stride).min(n),
                });
                start += stride;
            }
        }
        units
    }

    fn for_each_in_unit(&self, unit: &WorkUnit, mut f: impl FnMut(Triplet)) {
        let lvl = self.grid.levels()[unit.level as usize];
        let lens: Vec<usize> = lvl.lengths().filter(|&l| l >= self.filter.min_interval_len).collect();
        let n = self.grid.n();
        let mut left = unit.left_start;
        while left < unit.left_end {
            for &len in &lens {
                let right = left + len;
                if right > n {
                    break;
                }
                self.grid
                    .for_each_extension(unit.level, left, right, &self.filter, &mut f);
            }
            left += lvl.spacing;
        }
    }

    fn scan_with(
        &self,
        unit: &WorkUnit,
        table: &CalibrationTable,
        mut eval: impl FnMut(&Triplet) -> Result<(f64, f64)>,
    ) -> Result<Vec<Detection>> {
        let mut out = Vec::new();
        let mut failure = None;
        self.for_each_in_unit(unit, |t| {
            if failure.is_some() {
                return;
            }
            match eval(&t) {
                Ok((stat, threshold)) if stat > threshold => out.push(detection(t, stat, threshold, table)),
                Ok(_) => {}
                Err(e) => failure = Some(e),
            }
        });
        match failure {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    /// Squared comparison `(a·n2 - b·k)² > c²σ²·k·n2·(k+n2)` avoids a root
    /// and two divisions per triplet; hits are confirmed with [`gaussian_z`].
    /// Visits the same triplets as [`TripletGrid::for_each_extension`].
    fn scan_gaussian_known(
        &self,
        unit: &WorkUnit,
        prefix: &PrefixSums,
        sigma: f64,
        table: &CalibrationTable,
    ) -> Vec<Detection> {
        let Thresholds::PerBlock(per_block) = &self.thresholds else {
            unreachable!("known-sigma thresholds are per block")
        };
        let n = self.grid.n();
        let lvl = self.grid.levels()[unit.level as usize];
        let block = self.grid.block_of_level(unit.level);
        let Some(&threshold) = per_block.get(block as usize - 1) else {
            return Vec::new();
        };
        let c2 = (threshold * sigma) * (threshold * sigma);
        let exts = self.grid.lengths().as_slice();
        let exts_f: Vec<f64> = exts.iter().map(|&x| x as f64).collect();
        let cum = prefix.cum();
        let mut out = Vec::new();
        let hit = |s: usize, m: usize, e: usize, out: &mut Vec<Detection>| {
            let t = Triplet {
                level: unit.level,
                s,
                m,
                e,
                block,
            };
            let stat = gaussian_z(prefix, &t, sigma);
            if stat > threshold {
                out.push(detection(t, stat, threshold, table));
            }
        };
        for len in lvl.lengths().filter(|&l| l >= self.filter.min_interval_len) {
            let k = len as f64;
            let budget = self.filter.max_span.saturating_sub(len);
            let r_start = exts.partition_point(|&l| l < len);
            let l_start = exts.partition_point(|&l| l <= len);
            // c²σ²·k·L·(k+L) for every admissible extension L
            let bound: Vec<f64> = exts_f.iter().map(|&x| c2 * k * x * (k + x)).collect();
            let mut left = unit.left_start;
            while left < unit.left_end && left + len <= n {
                let right = left + len;
                let a = cum[right] - cum[left];
                let r_end = r_start + exts[r_start..].partition_point(|&x| x <= (n - right).min(budget));
                let base = cum[right];
                for i in r_start..r_end {
                    let b = cum[right + exts[i]] - base;
                    let num = a * exts_f[i] - b * k;
                    if num * num > bound[i] {
                        hit(left, right, right + exts[i], &mut out);
                    }
                }
                let l_end = l_start + exts[l_start..].partition_point(|&x| x <= left.min(budget));
                let top = cum[left];
                for i in l_start..l_end {
                    let b = top - cum[left - exts[i]];
                    let num = b * k - a * exts_f[i];
                    if num * num > bound[i] {
                        hit(left - exts[i], left, right, &mut out);
                    }
                }
                left += lvl.spacing;
            }
        }
        out
    }

    fn block_threshold(&self, t: &Triplet) -> f64 {
        match &self.thresholds {
            Thresholds::PerBlock(v) => v[t.block as usize - 1],
            _ => unreachable!("model has per-block thresholds"),
        }
    }

    fn span_threshold(&self, t: &Triplet) -> f64 {
        match &self.thresholds {
            Thresholds::BySpan(map) => map[&(t.block, t.span())],
            _ => unreachable!("model has per-span thresholds"),
        }
    }

    fn wilcoxon_eval(&self, y: &[f64], t: &Triplet, table: &CalibrationTable, scratch: &mut RankScratch) -> (f64, f64) {
        let (d, ties) = rank_sum::rank_sum_deviation(y, t.s, t.m, t.e, scratch);
        let stat = rank_sum::standardize(t.left_len(), t.span(), d as f64);
        match &self.thresholds {
            Thresholds::PerBlock(v) => (stat, v[t.block as usize - 1]),
            Thresholds::RankSum {
                bound,
                max_work,
                nulls,
                critical,
            } => {
                if ties || !exact_rank_sum_affordable(t, *max_work) {
                    return (stat, bound[t.block as usize - 1]);
                }
                let key = (t.block, t.left_len(), t.right_len());
                let cached = critical.lock().expect("cache poisoned").get(&key).copied();
                let d_crit = match cached {
                    Some(d) => d,
                    None => {
                        let null = {
                            let mut nulls = nulls.lock().expect("cache poisoned");
                            nulls
                                .entry((t.left_len(), t.right_len()))
                                .or_insert_with(|| Arc::new(RankSumNull::new(t.left_len(), t.right_len())))
                                .clone()
                        };
                        let d = null.critical_deviation(table.level(t.block));
                        critical.lock().expect("cache poisoned").insert(key, d);
                        d
                    }
                };
                let threshold = rank_sum::standardize(t.left_len(), t.span(), d_crit as f64);
                // decide on the integer deviation so equal values never reject
                if d as usize > d_crit {
                    (stat.max(threshold.next_up()), threshold)
                } else {
                    (stat.min(threshold), threshold)
                }
            }
            Thresholds::BySpan(_) => unreachable!("rank-sum thresholds"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct WorkUnit {
    level: u32,
    left_start: usize,
    left_end: usize,
}

fn detection(t: Triplet, stat: f64, threshold: f64, table: &CalibrationTable) -> Detection {
    Detection {
        lo: t.s + 1,
        hi: t.e - 1,
        triplet: t,
        stat,
        threshold,
        alpha_t: table.level(t.block),
    }
}

fn build_thresholds(
    model: &TestModel,
    grid: &TripletGrid,
    filter: &TripletFilter,
    table: &CalibrationTable,
) -> Result<Thresholds> {
    // any triplet serves where the critical value ignores the window
    let probe = Triplet {
        level: 0,
        s: 0,
        m: 2,
        e: 4,
        block: 1,
    };
    let per_block = |model: &TestModel| -> Result<Vec<f64>> {
        table
            .per_block_alpha
            .iter()
            .map(|&a| critical_value(model, a, &probe))
            .collect()
    };
    Ok(match model {
        TestModel::GaussianKnown { .. } | TestModel::Poisson | TestModel::Exponential => {
            Thresholds::PerBlock(per_block(model)?)
        }
        TestModel::Wilcoxon(WilcoxonMode::Bound) => Thresholds::PerBlock(per_block(model)?),
        TestModel::Wilcoxon(WilcoxonMode::Exact { max_work }) => Thresholds::RankSum {
            bound: table
                .per_block_alpha
                .iter()
                .map(|&a| rank_sum_bound_critical(a))
                .collect(),
            max_work: *max_work,
            nulls: Mutex::new(HashMap::new()),
            critical: Mutex::new(HashMap::new()),
        },
        TestModel::GaussianUnknown => {
            let mut keys = Vec::new();
            let lengths = grid.lengths().as_slice();
            for lvl in grid.levels() {
                let block = grid.block_of_level(lvl.level);
                if block as usize > table.block_count() {
                    continue;
                }
                for len in lvl.lengths().filter(|&l| l >= filter.min_interval_len) {
                    for &ext in lengths.iter().filter(|&&ext| ext >= len) {
                        let span = len + ext;
                        if span <= filter.max_span && span <= grid.n() {
                            keys.push((block, span));
                        }
                    }
                }
            }
            keys.sort_unstable();
            keys.dedup();
            let values: Vec<f64> = keys
                .par_iter()
                .map(|&(block, span)| {
                    let t = Triplet {
                        level: 0,
                        s: 0,
                        m: 2,
                        e: span,
                        block,
                    };
                    critical_value(model, table.level(block), &t)
                })
                .collect::<Result<_>>()?;
            Thresholds::BySpan(keys.into_iter().zip(values).collect())
        }
    })
}
