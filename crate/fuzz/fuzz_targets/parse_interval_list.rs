// SPDX-License-Identifier: MIT OR Apache-2.0
#![no_main]

use lbd_core::io::parse_interval_list;
use lbd_core::minimal_and_disjoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(list) = parse_interval_list(text) {
        assert!(list.iter().all(|iv| iv.lo <= iv.hi));
        let _ = minimal_and_disjoint(&list);
    }
});
