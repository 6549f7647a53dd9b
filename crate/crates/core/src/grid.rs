// SPDX-License-Identifier: MIT OR Apache-2.0

//! Deterministic sparse collections of Bonferroni intervals and triplets.
//!
//! Level `ℓ` approximates intervals with lengths in `[2^ℓ, 2^{ℓ+1})` by the
//! intervals whose endpoints lie on a lattice of spacing `d_ℓ`. A triplet
//! `(s, m, e)` joins one such interval with an abutting extension on either
//! side whose length is itself the length of some Bonferroni interval.
//!
//! Triplet collections grow like `n (ln n)^{5/2}`, which is far too many to
//! materialize for long series, so the scan in [`crate::detector`] walks the
//! grid through [`TripletGrid::for_each_triplet`] instead of calling
//! [`build_triplets`].

use serde::Serialize;

use crate::error::{LbdError, Result};

/// Smallest series length with at least one grid level.
pub const MIN_SERIES_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridLevel {
    pub level: u32,
    pub spacing: usize,
}

impl GridLevel {
    /// Inclusive lower bound on interval lengths at this level.
    pub fn min_len(&self) -> usize {
        1usize << self.level
    }

    /// Exclusive upper bound on interval lengths at this level.
    pub fn max_len_exclusive(&self) -> usize {
        1usize << (self.level + 1)
    }

    /// Interval lengths available at this level: multiples of the spacing in
    /// `[2^ℓ, 2^{ℓ+1})`.
    pub fn lengths(&self) -> impl Iterator<Item = usize> + '_ {
        let d = self.spacing;
        let first = self.min_len().div_ceil(d) * d;
        (first..self.max_len_exclusive()).step_by(d)
    }
}

/// Half-open interval `(left, right]` on the level's lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct BonferroniInterval {
    pub left: usize,
    pub right: usize,
    pub level: u32,
}

impl BonferroniInterval {
    pub fn len(&self) -> usize {
        self.right - self.left
    }

    pub fn is_empty(&self) -> bool {
        self.right == self.left
    }
}

/// Which side of the Bonferroni interval carries the extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Extension {
    /// `(s, m]` is the Bonferroni interval, `(m, e]` the extension.
    Right,
    /// `(m, e]` is the Bonferroni interval, `(s, m]` the extension.
    Left,
}

/// A Bonferroni triplet `(s, m, e)`: test for a changepoint at `m` using the
/// observations on `(s, e]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Triplet {
    pub level: u32,
    pub s: usize,
    pub m: usize,
    pub e: usize,
    pub block: u32,
}

impl Triplet {
    pub fn left_len(&self) -> usize {
        self.m - self.s
    }

    pub fn right_len(&self) -> usize {
        self.e - self.m
    }

    pub fn span(&self) -> usize {
        self.e - self.s
    }

    /// A right extension is at least as long as the interval it extends; a
    /// left extension is strictly longer.
    pub fn extension(&self) -> Extension {
        if self.right_len() >= self.left_len() {
            Extension::Right
        } else {
            Extension::Left
        }
    }

    /// The Bonferroni interval the triplet was built from.
    pub fn bonferroni_interval(&self) -> BonferroniInterval {
        match self.extension() {
            Extension::Right => BonferroniInterval {
                left: self.s,
                right: self.m,
                level: self.level,
            },
            Extension::Left => BonferroniInterval {
                left: self.m,
                right: self.e,
                level: self.level,
            },
        }
    }

    /// Checks the ordering `s < m < e <= n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.s < self.m && self.m < self.e && self.e <= n {
            Ok(())
        } else {
            Err(LbdError::InvalidTriplet {
                s: self.s,
                m: self.m,
                e: self.e,
                reason: format!("requires s < m < e <= n = {n}"),
            })
        }
    }
}

/// Sorted distinct lengths of all Bonferroni intervals for one `n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LengthMenu {
    lengths: Vec<usize>,
}

impl LengthMenu {
    pub fn as_slice(&self) -> &[usize] {
        &self.lengths
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn contains(&self, len: usize) -> bool {
        self.lengths.binary_search(&len).is_ok()
    }

    /// Number of lengths `L` with `lo <= L <= hi`.
    fn count_between(&self, lo: usize, hi: usize) -> usize {
        if hi < lo {
            return 0;
        }
        let a = self.lengths.partition_point(|&l| l < lo);
        let b = self.lengths.partition_point(|&l| l <= hi);
        b.saturating_sub(a)
    }
}

/// Restrictions on which triplets a scan visits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TripletFilter {
    /// Skip Bonferroni intervals shorter than this.
    pub min_interval_len: usize,
    /// Skip triplets with `e - s` above this.
    pub max_span: usize,
}

impl Default for TripletFilter {
    fn default() -> Self {
        TripletFilter {
            min_interval_len: 1,
            max_span: usize::MAX,
        }
    }
}

impl TripletFilter {
    pub fn admits(&self, t: &Triplet) -> bool {
        t.bonferroni_interval().len() >= self.min_interval_len && t.span() <= self.max_span
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < MIN_SERIES_LEN {
        Err(LbdError::invalid_argument(format!(
            "series length must be at least {MIN_SERIES_LEN}, got {n}"
        )))
    } else {
        Ok(())
    }
}

/// `ℓ_max = ⌊log₂(n/4)⌋ − 1`.
pub fn max_level(n: usize) -> Result<u32> {
    check_n(n)?;
    Ok(n.ilog2() - 3)
}

fn check_level(level: u32, n: usize) -> Result<()> {
    let max = max_level(n)?;
    if level > max {
        return Err(LbdError::invalid_argument(format!(
            "level {level} out of range 0..={max} for n = {n}"
        )));
    }
    Ok(())
}

/// `d_ℓ = ⌈2^ℓ / √(2 ln(e n / 2^ℓ))⌉`.
pub fn grid_spacing(level: u32, n: usize) -> Result<usize> {
    check_level(level, n)?;
    Ok(spacing_unchecked(level, n))
}

fn spacing_unchecked(level: u32, n: usize) -> usize {
    let len = (1u64 << level) as f64;
    let log_term = 1.0 + (n as f64).ln() - len.ln();
    let d = (len / (2.0 * log_term).sqrt()).ceil() as usize;
    d.max(1)
}

/// `s_n = ⌈log₂ ln n⌉`: levels below `s_n` form the first block.
pub fn first_block_levels(n: usize) -> Result<u32> {
    check_n(n)?;
    Ok((n as f64).ln().log2().ceil() as u32)
}

/// Number of blocks, `⌊log₂(n/4)⌋ − s_n + 1`, floored at one for the small
/// `n` where every level falls into the first block.
pub fn block_count(n: usize) -> Result<u32> {
    let s_n = first_block_levels(n)?;
    let top = n.ilog2() - 2;
    Ok((top + 1).saturating_sub(s_n).max(1))
}

/// Block of the triplets whose Bonferroni interval sits at `level`. Level 0
/// belongs to the first block.
pub fn block_index(level: u32, n: usize) -> Result<u32> {
    check_level(level, n)?;
    let s_n = first_block_levels(n)?;
    Ok(block_of(level, s_n))
}

fn block_of(level: u32, s_n: u32) -> u32 {
    if level < s_n {
        1
    } else {
        level + 2 - s_n
    }
}

pub fn build_intervals(n: usize) -> Result<Vec<BonferroniInterval>> {
    let grid = TripletGrid::new(n)?;
    let mut out = Vec::new();
    for lvl in grid.levels() {
        grid.for_each_interval(lvl.level, 1, |left, right| {
            out.push(BonferroniInterval {
                left,
                right,
                level: lvl.level,
            })
        });
    }
    Ok(out)
}

pub fn interval_lengths(n: usize) -> Result<LengthMenu> {
    Ok(TripletGrid::new(n)?.lengths().clone())
}

/// All triplets, sorted by `(level, s, m, e)`.
pub fn build_triplets(n: usize) -> Result<Vec<Triplet>> {
    let grid = TripletGrid::new(n)?;
    let mut out = Vec::with_capacity(grid.triplet_count(&TripletFilter::default()) as usize);
    grid.for_each_triplet(&TripletFilter::default(), |t| out.push(t));
    out.sort_unstable();
    Ok(out)
}

/// Entry `B - 1` is the number of triplets in block `B`.
pub fn block_sizes(n: usize) -> Result<Vec<u64>> {
    Ok(TripletGrid::new(n)?.block_sizes(&TripletFilter::default()))
}

/// The complete grid for a series of length `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletGrid {
    n: usize,
    levels: Vec<GridLevel>,
    lengths: LengthMenu,
    first_block_levels: u32,
    block_count: u32,
}

impl TripletGrid {
    pub fn new(n: usize) -> Result<Self> {
        let max = max_level(n)?;
        let levels: Vec<GridLevel> = (0..=max)
            .map(|level| GridLevel {
                level,
                spacing: spacing_unchecked(level, n),
            })
            .collect();
        let mut lengths: Vec<usize> = levels
            .iter()
            .flat_map(|l| l.lengths().collect::<Vec<_>>())
            .filter(|&len| len <= n)
            .collect();
        lengths.sort_unstable();
        lengths.dedup();
        Ok(TripletGrid {
            n,
            levels,
            lengths: LengthMenu { lengths },
            first_block_levels: first_block_levels(n)?,
            block_count: block_count(n)?,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn levels(&self) -> &[GridLevel] {
        &self.levels
    }

    pub fn lengths(&self) -> &LengthMenu {
        &self.lengths
    }

    pub fn first_block_levels(&self) -> u32 {
        self.first_block_levels
    }

    pub fn block_count(&self) -> u32 {
        self.block_count
    }

    pub fn block_of_level(&self, level: u32) -> u32 {
        block_of(level, self.first_block_levels)
    }

    /// Calls `f(left, right)` for every Bonferroni interval at `level` with
    /// length at least `min_len`, ordered by `(left, right)`.
    pub fn for_each_interval(&self, level: u32, min_len: usize, mut f: impl FnMut(usize, usize)) {
        let lvl = self.levels[level as usize];
        let lens: Vec<usize> = lvl.lengths().filter(|&l| l >= min_len).collect();
        let Some(&shortest) = lens.first() else {
            return;
        };
        let mut left = 0;
        while left + shortest <= self.n {
            for &len in &lens {
                let right = left + len;
                if right > self.n {
                    break;
                }
                f(left, right);
            }
            left += lvl.spacing;
        }
    }

    /// Calls `f` for every triplet whose Bonferroni interval is `(left, right]`
    /// at `level` and which passes `filter`. Right extensions come first,
    /// each side in increasing extension length.
    #[inline]
    pub fn for_each_extension(
        &self,
        level: u32,
        left: usize,
        right: usize,
        filter: &TripletFilter,
        mut f: impl FnMut(Triplet),
    ) {
        let len = right - left;
        let block = self.block_of_level(level);
        let budget = filter.max_span.saturating_sub(len);
        let lengths = self.lengths.as_slice();
        let start = lengths.partition_point(|&l| l < len);
        let right_limit = (self.n - right).min(budget);
        for &ext in &lengths[start..] {
            if ext > right_limit {
                break;
            }
            f(Triplet {
                level,
                s: left,
                m: right,
                e: right + ext,
                block,
            });
        }
        let start = lengths.partition_point(|&l| l <= len);
        let left_limit = left.min(budget);
        for &ext in &lengths[start..] {
            if ext > left_limit {
                break;
            }
            f(Triplet {
                level,
                s: left - ext,
                m: left,
                e: right,
                block,
            });
        }
    }

    /// Visits every triplet passing `filter`, level by level.
    pub fn for_each_triplet(&self, filter: &TripletFilter, mut f: impl FnMut(Triplet)) {
        for lvl in &self.levels {
            self.for_each_interval(lvl.level, filter.min_interval_len, |left, right| {
                self.for_each_extension(lvl.level, left, right, filter, &mut f)
            });
        }
    }

    fn extension_count(&self, left: usize, right: usize, filter: &TripletFilter) -> u64 {
        let len = right - left;
        let budget = filter.max_span.saturating_sub(len);
        let r = self.lengths.count_between(len, (self.n - right).min(budget));
        let l = self.lengths.count_between(len + 1, left.min(budget));
        (r + l) as u64
    }

    /// Triplet counts per level, without enumerating the triplets.
    pub fn level_counts(&self, filter: &TripletFilter) -> Vec<u64> {
        self.levels
            .iter()
            .map(|lvl| {
                let mut count = 0u64;
                self.for_each_interval(lvl.level, filter.min_interval_len, |left, right| {
                    count += self.extension_count(left, right, filter)
                });
                count
            })
            .collect()
    }

    pub fn block_sizes(&self, filter: &TripletFilter) -> Vec<u64> {
        let mut sizes = vec![0u64; self.block_count as usize];
        for (lvl, count) in self.levels.iter().zip(self.level_counts(filter)) {
            sizes[self.block_of_level(lvl.level) as usize - 1] += count;
        }
        sizes
    }

    pub fn triplet_count(&self, filter: &TripletFilter) -> u64 {
        self.level_counts(filter).iter().sum()
    }

    /// Number of Bonferroni intervals at each level.
    pub fn interval_counts(&self) -> Vec<u64> {
        self.levels
            .iter()
            .map(|lvl| {
                let mut count = 0u64;
                self.for_each_interval(lvl.level, 1, |_, _| count += 1);
                count
            })
            .collect()
    }
}

/// `24 n (ln(e n))^{5/2}`, the closed-form ceiling on the triplet count.
pub fn triplet_count_bound(n: usize) -> f64 {
    let n = n as f64;
    24.0 * n * (1.0 + n.ln()).powf(2.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn spacing_examples() {
        for n in [8, 9, 100, 2048, 1 << 20] {
            assert_eq!(grid_spacing(0, n).unwrap(), 1);
            let top = max_level(n).unwrap();
            assert!(grid_spacing(top, n).unwrap() >= 1);
        }
        assert_eq!(grid_spacing(5, 2048).unwrap(), 10);
        assert!(grid_spacing(1, 8).is_err());
        assert!(grid_spacing(0, 7).is_err());
    }

    #[test]
    fn smallest_grid_is_unit_intervals() {
        let intervals = build_intervals(8).unwrap();
        assert_eq!(intervals.len(), 8);
        for (i, iv) in intervals.iter().enumerate() {
            assert_eq!((iv.left, iv.right, iv.level), (i, i + 1, 0));
        }
        assert_eq!(interval_lengths(8).unwrap().as_slice(), &[1]);
    }

    #[test]
    fn rejects_short_series() {
        for n in 0..8 {
            assert!(matches!(build_triplets(n), Err(LbdError::InvalidArgument(_))));
        }
    }

    #[test]
    fn intervals_sit_on_their_lattice() {
        let n = 1024;
        let grid = TripletGrid::new(n).unwrap();
        let intervals = build_intervals(n).unwrap();
        let mut seen = HashSet::new();
        for iv in &intervals {
            let d = grid.levels()[iv.level as usize].spacing;
            assert_eq!(iv.left % d, 0);
            assert_eq!(iv.right % d, 0);
            assert!(iv.right <= n);
            assert!(iv.len() >= 1 << iv.level && iv.len() < 2 << iv.level);
            assert!(seen.insert((iv.left, iv.right)));
        }
    }

    #[test]
    fn per_level_interval_counts_respect_bound() {
        for n in [64, 2048, 10_000] {
            let grid = TripletGrid::new(n).unwrap();
            let counts = grid.interval_counts();
            let nf = n as f64;
            let mut total = 0.0;
            for (lvl, &c) in grid.levels().iter().zip(&counts) {
                let bound = 2.0 * nf / (1u64 << lvl.level) as f64 * (std::f64::consts::E * nf).ln();
                assert!((c as f64) <= bound, "n={n} level={} count={c}", lvl.level);
                total += c as f64;
            }
            assert!(total <= 4.0 * nf * (std::f64::consts::E * nf).ln());
        }
    }

    #[test]
    fn length_menu_bound() {
        for n in [8, 1000, 65536] {
            let menu = interval_lengths(n).unwrap();
            assert!(menu.contains(1));
            let bound = 3.0 * (n as f64).ln().powf(1.5);
            assert!((menu.len() as f64) <= bound, "n={n}: {} > {bound}", menu.len());
        }
    }

    #[test]
    fn block_index_examples() {
        let n = 2048;
        assert_eq!(first_block_levels(n).unwrap(), 3);
        assert_eq!(block_count(n).unwrap(), 7);
        assert_eq!(block_index(0, n).unwrap(), 1);
        assert_eq!(block_index(2, n).unwrap(), 1);
        assert_eq!(block_index(3, n).unwrap(), 2);
        assert_eq!(block_index(max_level(n).unwrap(), n).unwrap(), 7);
        assert!(block_index(9, n).is_err());
        // every level of a tiny grid lands in the first block
        assert_eq!(block_count(8).unwrap(), 1);
        assert_eq!(block_index(0, 8).unwrap(), 1);
    }

    #[test]
    fn block_sizes_partition_triplets() {
        for n in [8, 64, 300, 2048] {
            let triplets = build_triplets(n).unwrap();
            let sizes = block_sizes(n).unwrap();
            assert_eq!(sizes.len() as u32, block_count(n).unwrap());
            assert_eq!(sizes.iter().sum::<u64>(), triplets.len() as u64);
            let mut recount = vec![0u64; sizes.len()];
            for t in &triplets {
                recount[t.block as usize - 1] += 1;
            }
            assert_eq!(recount, sizes);
        }
        assert!(block_sizes(64).unwrap().iter().all(|&s| s >= 1));
    }

    #[test]
    fn triplets_satisfy_definition() {
        let n = 500;
        let grid = TripletGrid::new(n).unwrap();
        let intervals: HashSet<(usize, usize, u32)> = build_intervals(n)
            .unwrap()
            .into_iter()
            .map(|iv| (iv.left, iv.right, iv.level))
            .collect();
        let triplets = build_triplets(n).unwrap();
        let mut seen = HashSet::new();
        for t in &triplets {
            t.validate(n).unwrap();
            assert!(seen.insert((t.s, t.m, t.e)), "duplicate {t:?}");
            match t.extension() {
                Extension::Right => {
                    assert!(intervals.contains(&(t.s, t.m, t.level)));
                    assert!(grid.lengths().contains(t.right_len()));
                    assert!(t.right_len() >= t.left_len());
                }
                Extension::Left => {
                    assert!(intervals.contains(&(t.m, t.e, t.level)));
                    assert!(grid.lengths().contains(t.left_len()));
                    assert!(t.left_len() > t.right_len());
                }
            }
            assert_eq!(t.block, block_index(t.level, n).unwrap());
        }
        assert!(triplets.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn triplets_match_brute_force_enumeration() {
        // enumerate the definition directly over all (s, m, e)
        let n = 96;
        let intervals: HashSet<(usize, usize)> = build_intervals(n)
            .unwrap()
            .into_iter()
            .map(|iv| (iv.left, iv.right))
            .collect();
        let lengths = interval_lengths(n).unwrap();
        let mut expected = HashSet::new();
        for s in 0..n {
            for m in s + 1..n {
                for e in m + 1..=n {
                    let right = intervals.contains(&(s, m)) && lengths.contains(e - m) && e - m >= m - s;
                    let left = intervals.contains(&(m, e)) && lengths.contains(m - s) && m - s > e - m;
                    if right || left {
                        expected.insert((s, m, e));
                    }
                }
            }
        }
        let got: HashSet<(usize, usize, usize)> = build_triplets(n)
            .unwrap()
            .into_iter()
            .map(|t| (t.s, t.m, t.e))
            .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn counts_match_enumeration_under_filters() {
        let n = 777;
        let grid = TripletGrid::new(n).unwrap();
        for filter in [
            TripletFilter::default(),
            TripletFilter {
                min_interval_len: 2,
                max_span: usize::MAX,
            },
            TripletFilter {
                min_interval_len: 1,
                max_span: 40,
            },
        ] {
            let mut per_block = vec![0u64; grid.block_count() as usize];
            grid.for_each_triplet(&filter, |t| {
                assert!(filter.admits(&t));
                per_block[t.block as usize - 1] += 1;
            });
            assert_eq!(per_block, grid.block_sizes(&filter));
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(build_triplets(333).unwrap(), build_triplets(333).unwrap());
    }
}
