// SPDX-License-Identifier: MIT OR Apache-2.0
#![no_main]

use lbd_core::{Detector, DetectorConfig, TestModel, WilcoxonMode};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&selector, rest)) = data.split_first() else {
        return;
    };
    let y: Vec<f64> = rest.iter().take(256).map(|&b| f64::from(b % 16)).collect();
    let model = match selector % 6 {
        0 => TestModel::GaussianKnown { sigma: 1.0 },
        1 => TestModel::GaussianUnknown,
        2 => TestModel::Poisson,
        3 => TestModel::Exponential,
        4 => TestModel::Wilcoxon(WilcoxonMode::Bound),
        _ => TestModel::Wilcoxon(WilcoxonMode::exact()),
    };
    let Ok(detector) = Detector::new(DetectorConfig::new(model, 0.1), y.len()) else {
        return;
    };
    if let Ok(result) = detector.run(&y) {
        let n = y.len();
        assert!(result.detections.iter().all(|d| 1 <= d.lo && d.lo <= d.hi && d.hi <= n));
        assert!(result.lower_bound == result.disjoint.len());
    }
});
