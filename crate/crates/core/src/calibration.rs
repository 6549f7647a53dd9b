// SPDX-License-Identifier: MIT OR Apache-2.0

//! Weighted Bonferroni levels: every triplet in block `B` gets
//! `α / (B · H · |block B|)` where `H = Σ_{b ≤ B_max} 1/b`.

use serde::Serialize;

use crate::error::{LbdError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationTable {
    pub alpha: f64,
    pub harmonic: f64,
    pub block_sizes: Vec<u64>,
    /// Per-triplet level, indexed by `B - 1`.
    pub per_block_alpha: Vec<f64>,
}

impl CalibrationTable {
    /// Per-triplet level for block `block` (1-based).
    pub fn level(&self, block: u32) -> f64 {
        self.per_block_alpha[block as usize - 1]
    }

    pub fn block_count(&self) -> usize {
        self.per_block_alpha.len()
    }

    /// `Σ_B |block B| · α_B`, which equals `alpha` up to rounding.
    pub fn spent(&self) -> f64 {
        // Neumaier summation
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for (&size, &level) in self.block_sizes.iter().zip(&self.per_block_alpha) {
            let term = size as f64 * level;
            let t = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - t) + term;
            } else {
                comp += (term - t) + sum;
            }
            sum = t;
        }
        sum + comp
    }
}

pub fn calibrate(alpha: f64, block_sizes: &[u64]) -> Result<CalibrationTable> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(LbdError::invalid_argument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if block_sizes.is_empty() {
        return Err(LbdError::invalid_argument("no blocks to calibrate"));
    }
    if let Some(b) = block_sizes.iter().position(|&s| s == 0) {
        return Err(LbdError::invalid_argument(format!("block {} is empty", b + 1)));
    }
    let harmonic: f64 = (1..=block_sizes.len()).map(|b| 1.0 / b as f64).sum();
    let per_block_alpha: Vec<f64> = block_sizes
        .iter()
        .enumerate()
        .map(|(i, &size)| alpha / ((i + 1) as f64 * harmonic * size as f64))
        .collect();
    if let Some(b) = per_block_alpha.iter().position(|&a| a <= 0.0 || !a.is_finite()) {
        return Err(LbdError::Numerical(format!(
            "per-triplet level of block {} underflows",
            b + 1
        )));
    }
    Ok(CalibrationTable {
        alpha,
        harmonic,
        block_sizes: block_sizes.to_vec(),
        per_block_alpha,
    })
}
