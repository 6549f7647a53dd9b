// SPDX-License-Identifier: MIT OR Apache-2.0
#![no_main]

use lbd_core::intervals::{oracle_max_disjoint, oracle_minimal};
use lbd_core::{minimal_and_disjoint, ClosedInterval};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let list: Vec<ClosedInterval> = data
        .chunks_exact(2)
        .take(64)
        .map(|c| {
            let lo = i64::from(c[0] % 64);
            ClosedInterval {
                lo,
                hi: lo + i64::from(c[1] % 32),
            }
        })
        .collect();
    let summary = minimal_and_disjoint(&list).unwrap();
    let mut expected = oracle_minimal(&list);
    expected.sort_by_key(|iv| (iv.hi, iv.lo));
    let mut got = summary.minimal.clone();
    got.sort_by_key(|iv| (iv.hi, iv.lo));
    assert_eq!(got, expected);
    assert_eq!(summary.count, oracle_max_disjoint(&list));
    assert!(summary.disjoint.windows(2).all(|w| w[0].hi < w[1].lo));
});
