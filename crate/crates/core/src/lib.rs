// SPDX-License-Identifier: MIT OR Apache-2.0

//! Lean Bonferroni changepoint detection.
//!
//! A sparse grid of triplets `(s, m, e)` is scanned with a local two-sample
//! test on each window. Every significant triplet yields an interval that
//! contains a changepoint, simultaneously for all intervals with probability
//! at least `1 - alpha`. The minimal intervals and a largest disjoint family
//! of them give localisation and a lower bound on the number of changepoints.
//!
//! ```
//! use lbd_core::{detect, TestModel};
//!
//! let mut y = vec![0.0; 200];
//! for (i, v) in y.iter_mut().enumerate().skip(100) {
//!     *v = 3.0 + 0.01 * (i % 3) as f64;
//! }
//! let out = detect(&y, TestModel::GaussianKnown { sigma: 0.5 }, 0.1).unwrap();
//! assert_eq!(out.lower_bound, 1);
//! assert!(out.minimal.iter().all(|iv| iv.contains_point(100)));
//! ```

pub mod calibration;
pub mod detector;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod intervals;
pub mod io;
pub mod local_tests;
pub mod signals;

pub use calibration::{calibrate, CalibrationTable};
pub use detector::{
    detect, max_interval_cap, max_span_for, Detection, DetectionResult, Detector, DetectorConfig, RunSummary,
};
pub use diagnostics::{count_threshold, detection_threshold, energy, precision_bound, ChangepointGeometry};
pub use error::{LbdError, Result};
pub use grid::{
    build_intervals, build_triplets, interval_lengths, BonferroniInterval, Triplet, TripletFilter, TripletGrid,
};
pub use intervals::{minimal_and_disjoint, ClosedInterval, IntervalSummary};
pub use local_tests::{critical_value, TestModel, WilcoxonMode};
pub use signals::{builtin_signal, coverage_experiment, hard_instance, simulate, CoverageReport, SignalSpec};
