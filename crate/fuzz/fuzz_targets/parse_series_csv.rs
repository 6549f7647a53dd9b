// SPDX-License-Identifier: MIT OR Apache-2.0
#![no_main]

use lbd_core::io::{parse_series_csv, Column};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // first line may pick a column
    let (column, body) = match text.split_once('\n') {
        Some((head, rest)) if head.starts_with("@col ") => (Some(Column::parse(&head[5..])), rest),
        _ => (None, text),
    };
    if let Ok(series) = parse_series_csv(body, column.as_ref()) {
        assert_eq!(series.values.len(), series.lines.len());
        assert!(series.values.iter().all(|v| v.is_finite()));
        assert!(series.lines.windows(2).all(|w| w[0] < w[1]));
    }
});
