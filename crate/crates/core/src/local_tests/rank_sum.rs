// SPDX-License-Identifier: MIT OR Apache-2.0

//! Rank-sum statistic on a window and its exact permutation null.
//!
//! With `k` observations before the split and `n2` after, the Mann-Whitney
//! count `U` of the first segment is distributed as the coefficients of the
//! Gaussian binomial `[k + n2 choose k]_q`. The statistic is tracked through
//! the integer deviation `D = |2 R - k (N + 1)| = |2 U - k n2|` where `R` is
//! the rank sum and `N = k + n2`.

/// Exact null distribution of `D` for one pair of segment sizes.
#[derive(Debug, Clone)]
pub struct RankSumNull {
    k: usize,
    n2: usize,
    /// `by_deviation[d]` is the number of splits with `D = d`.
    by_deviation: Vec<f64>,
    total: f64,
}

/// Coefficients of `[k + n2 choose k]_q`, i.e. the number of size-`k` subsets
/// of `{1..N}` for every value of `U`. Costs `O(min(k, n2)² · max(k, n2))`.
pub fn mann_whitney_counts(k: usize, n2: usize) -> Vec<f64> {
    let (small, large) = if k <= n2 { (k, n2) } else { (n2, k) };
    let top = small * large;
    let mut c = vec![0.0f64; top + 1];
    c[0] = 1.0;
    for i in 1..=small {
        // multiply by 1 / (1 - q^i)
        for u in i..=top {
            c[u] += c[u - i];
        }
        // multiply by (1 - q^{large + i})
        let a = large + i;
        for u in (a..=top).rev() {
            c[u] -= c[u - a];
        }
    }
    for v in &mut c {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    c
}

impl RankSumNull {
    pub fn new(k: usize, n2: usize) -> Self {
        assert!(k >= 1 && n2 >= 1, "both segments must be nonempty");
        let counts = mann_whitney_counts(k, n2);
        let kn2 = (k * n2) as i64;
        let mut by_deviation = vec![0.0f64; k * n2 + 1];
        for (u, &c) in counts.iter().enumerate() {
            let d = (2 * u as i64 - kn2).unsigned_abs() as usize;
            by_deviation[d] += c;
        }
        let total = counts.iter().sum();
        RankSumNull {
            k,
            n2,
            by_deviation,
            total,
        }
    }

    pub fn sizes(&self) -> (usize, usize) {
        (self.k, self.n2)
    }

    /// `P(D > d)`.
    pub fn tail_above(&self, d: usize) -> f64 {
        let above: f64 = self.by_deviation.iter().skip(d + 1).sum();
        above / self.total
    }

    /// Smallest `d` with `P(D > d) <= alpha`; rejecting when `D > d` is an
    /// exact level-`alpha` test.
    pub fn critical_deviation(&self, alpha: f64) -> usize {
        let budget = alpha * self.total;
        let mut above = 0.0f64;
        let mut best = self.by_deviation.len() - 1;
        for d in (0..self.by_deviation.len()).rev() {
            if above > budget {
                break;
            }
            best = d;
            above += self.by_deviation[d];
        }
        best
    }
}

/// Maps a deviation `D` to the standardized statistic
/// `√(12 k) / (N + 1) · D / (2 k)`.
pub fn standardize(k: usize, n: usize, deviation: f64) -> f64 {
    let k = k as f64;
    (12.0 * k).sqrt() / (n as f64 + 1.0) * deviation / (2.0 * k)
}

/// Scratch space for ranking windows without reallocating.
#[derive(Debug, Default)]
pub struct RankScratch {
    order: Vec<(f64, usize)>,
}

/// Deviation `D = |2 R - k (N + 1)|` of the local midrank sum of `y[s..m]`
/// within `y[s..e]`, and whether the window holds ties.
pub fn rank_sum_deviation(y: &[f64], s: usize, m: usize, e: usize, scratch: &mut RankScratch) -> (u64, bool) {
    let order = &mut scratch.order;
    order.clear();
    order.extend(y[s..e].iter().enumerate().map(|(i, &v)| (v, i)));
    order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let split = m - s;
    let n = e - s;
    let mut twice_rank_sum = 0u64;
    let mut ties = false;
    let mut p = 0;
    while p < n {
        let mut q = p;
        while q + 1 < n && order[q + 1].0 == order[p].0 {
            q += 1;
        }
        if q > p {
            ties = true;
        }
        // twice the midrank of positions p..=q (ranks are 1-based)
        let twice_mid = (p + q + 2) as u64;
        for &(_, idx) in &order[p..=q] {
            if idx < split {
                twice_rank_sum += twice_mid;
            }
        }
        p = q + 1;
    }
    let centre = (split * (n + 1)) as i64;
    ((twice_rank_sum as i64 - centre).unsigned_abs(), ties)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    /// Enumerates every size-`k` subset of `{1..n}` and tallies `D`.
    fn enumerate_deviations(k: usize, n: usize) -> Vec<u64> {
        let mut out = Vec::new();
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let rank_sum: i64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i as i64 + 1).sum();
            out.push((2 * rank_sum - (k * (n + 1)) as i64).unsigned_abs());
        }
        out
    }

    #[test]
    fn counts_sum_to_binomial() {
        for (k, n2) in [(1, 1), (3, 5), (7, 2), (10, 10), (40, 60)] {
            let c = mann_whitney_counts(k, n2);
            let total: f64 = c.iter().sum();
            let expect = binomial(k + n2, k);
            assert!((total - expect).abs() <= 1e-9 * expect, "{k},{n2}");
            // symmetric around k n2 / 2
            for u in 0..c.len() {
                assert!((c[u] - c[c.len() - 1 - u]).abs() <= 1e-9 * expect);
            }
        }
    }

    #[test]
    fn counts_match_enumeration() {
        for n in 2..=12 {
            for k in 1..n {
                let null = RankSumNull::new(k, n - k);
                let mut tally = vec![0.0; k * (n - k) + 1];
                for d in enumerate_deviations(k, n) {
                    tally[d as usize] += 1.0;
                }
                assert_eq!(tally, null.by_deviation, "k={k} n={n}");
            }
        }
    }

    #[test]
    fn deviation_from_ranks() {
        let y = [0.1, 0.2, 0.3, 0.4];
        let (d, ties) = rank_sum_deviation(&y, 0, 2, 4, &mut RankScratch::default());
        assert!(!ties);
        // ranks 1,2 → R = 3, k(N+1) = 10, D = |6 - 10|
        assert_eq!(d, 4);
        assert!((standardize(2, 4, d as f64) - (12.0f64 * 2.0 / 25.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn midranks_for_ties() {
        let y = [1.0, 1.0, 1.0, 1.0];
        let (d, ties) = rank_sum_deviation(&y, 0, 1, 4, &mut RankScratch::default());
        assert!(ties);
        assert_eq!(d, 0);
        let y = [5.0, 2.0, 2.0, 9.0];
        // ranks: 3, 1.5, 1.5, 4; first two → 4.5; D = |9 - 10| = 1
        let (d, _) = rank_sum_deviation(&y, 0, 2, 4, &mut RankScratch::default());
        assert_eq!(d, 1);
    }

    #[test]
    fn critical_deviation_is_exact_level() {
        let null = RankSumNull::new(4, 5);
        for alpha in [0.5, 0.1, 0.05, 0.01, 1e-4] {
            let d = null.critical_deviation(alpha);
            assert!(null.tail_above(d) <= alpha);
            if d > 0 {
                assert!(null.tail_above(d - 1) > alpha || null.by_deviation[d] == 0.0);
            }
        }
        // unreachable level: never reject
        let d = null.critical_deviation(1e-9);
        assert_eq!(null.tail_above(d), 0.0);
    }
}
