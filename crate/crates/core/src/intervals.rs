// SPDX-License-Identifier: MIT OR Apache-2.0

//! Minimal intervals and a maximum disjoint subfamily of a collection of
//! closed integer intervals, in one sorted pass.

use serde::{Deserialize, Serialize};

use crate::error::{LbdError, Result};

/// Closed integer interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClosedInterval {
    pub lo: i64,
    pub hi: i64,
}

impl ClosedInterval {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(LbdError::invalid_argument(format!("interval [{lo}, {hi}] has lo > hi")));
        }
        Ok(ClosedInterval { lo, hi })
    }

    pub fn contains_point(&self, x: i64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// `self ⊆ other`.
    pub fn is_subset_of(&self, other: &ClosedInterval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// Integer intervals sharing an endpoint overlap.
    pub fn is_disjoint_from(&self, other: &ClosedInterval) -> bool {
        self.hi < other.lo || other.hi < self.lo
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntervalSummary {
    /// Inclusion-minimal distinct intervals, sorted by right endpoint.
    pub minimal: Vec<ClosedInterval>,
    /// A largest pairwise-disjoint family of minimal intervals.
    pub disjoint: Vec<ClosedInterval>,
    /// `disjoint.len()`.
    pub count: usize,
}

/// Sort key: right endpoint ascending, ties by left endpoint descending.
pub fn scan_order(a: &ClosedInterval, b: &ClosedInterval) -> std::cmp::Ordering {
    a.hi.cmp(&b.hi).then(b.lo.cmp(&a.lo))
}

/// Computes minimal intervals `M`, a maximum disjoint family `D` and
/// `N = |D|`. Duplicates in the input are allowed and collapse in the output.
pub fn minimal_and_disjoint(intervals: &[ClosedInterval]) -> Result<IntervalSummary> {
    if let Some(bad) = intervals.iter().find(|iv| iv.lo > iv.hi) {
        return Err(LbdError::invalid_argument(format!(
            "interval [{}, {}] has lo > hi",
            bad.lo, bad.hi
        )));
    }
    let mut sorted = intervals.to_vec();
    sorted.sort_by(scan_order);
    Ok(minimal_and_disjoint_sorted(&sorted))
}

/// As [`minimal_and_disjoint`] for input already in [`scan_order`].
pub fn minimal_and_disjoint_sorted(sorted: &[ClosedInterval]) -> IntervalSummary {
    debug_assert!(sorted
        .windows(2)
        .all(|w| scan_order(&w[0], &w[1]) != std::cmp::Ordering::Greater));
    let mut minimal = Vec::new();
    let mut disjoint = Vec::new();
    // f: right end of the last disjoint pick; (g, h): last minimal interval
    let mut f: Option<i64> = None;
    let mut g: Option<i64> = None;
    let mut h: Option<i64> = None;
    for iv in sorted {
        if f.is_none_or(|f| iv.lo > f) {
            disjoint.push(*iv);
            f = Some(iv.hi);
        }
        if g.is_none_or(|g| iv.lo > g) && h.is_none_or(|h| iv.hi > h) {
            minimal.push(*iv);
            g = Some(iv.lo);
            h = Some(iv.hi);
        }
    }
    let count = disjoint.len();
    IntervalSummary {
        minimal,
        disjoint,
        count,
    }
}

/// Pairwise-inclusion reference for the minimal intervals, sorted and
/// deduplicated.
pub fn oracle_minimal(intervals: &[ClosedInterval]) -> Vec<ClosedInterval> {
    let mut out: Vec<ClosedInterval> = intervals
        .iter()
        .filter(|a| !intervals.iter().any(|b| b != *a && b.is_subset_of(a)))
        .copied()
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Earliest-deadline greedy reference for the largest disjoint family size.
pub fn oracle_max_disjoint(intervals: &[ClosedInterval]) -> usize {
    let mut sorted = intervals.to_vec();
    sorted.sort_by_key(|iv| iv.hi);
    let mut count = 0;
    let mut last_end: Option<i64> = None;
    for iv in sorted {
        if last_end.is_none_or(|end| iv.lo > end) {
            count += 1;
            last_end = Some(iv.hi);
        }
    }
    count
}
