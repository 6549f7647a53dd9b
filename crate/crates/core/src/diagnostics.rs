// SPDX-License-Identifier: MIT OR Apache-2.0

//! Detectability and localisation formulas for planning: how strong a jump
//! must be, given its distances to the neighbouring changepoints, for the
//! scan to find it, and how tightly it is then localised.

use serde::Serialize;

use crate::error::{LbdError, Result};

pub const DEFAULT_SLACK: f64 = 3.0;

/// A changepoint and its surroundings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChangepointGeometry {
    /// Mean after minus mean before.
    pub jump: f64,
    /// Distance to the previous changepoint (or the start).
    pub d_left: usize,
    /// Distance to the next changepoint (or the end).
    pub d_right: usize,
    pub n: usize,
    /// Number of changepoints to be detected simultaneously.
    pub m: usize,
    /// Slack added to the threshold, `b >= 0`.
    pub b: f64,
}

impl ChangepointGeometry {
    pub fn new(jump: f64, d_left: usize, d_right: usize, n: usize) -> Self {
        ChangepointGeometry {
            jump,
            d_left,
            d_right,
            n,
            m: 1,
            b: DEFAULT_SLACK,
        }
    }

    pub fn with_m(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_b(mut self, b: f64) -> Self {
        self.b = b;
        self
    }

    pub fn d_min(&self) -> usize {
        self.d_left.min(self.d_right)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.jump.is_finite() {
            return Err(LbdError::invalid_argument("jump must be finite"));
        }
        if self.d_left == 0 || self.d_right == 0 {
            return Err(LbdError::invalid_argument("distances must be at least 1"));
        }
        if self.m == 0 {
            return Err(LbdError::invalid_argument("m must be at least 1"));
        }
        if !(self.b >= 0.0 && self.b.is_finite()) {
            return Err(LbdError::invalid_argument("slack b must be finite and >= 0"));
        }
        if self.d_min() > self.n {
            return Err(LbdError::invalid_argument(format!(
                "min distance {} exceeds n = {}",
                self.d_min(),
                self.n
            )));
        }
        Ok(())
    }
}

/// `|jump| · √(d_left · d_right / (d_left + d_right))`.
pub fn energy(geo: &ChangepointGeometry) -> Result<f64> {
    geo.validate()?;
    let (l, r) = (geo.d_left as f64, geo.d_right as f64);
    Ok(geo.jump.abs() * (l * r / (l + r)).sqrt())
}

fn threshold_at(n: usize, x: f64, m: usize, b: f64, factor: f64) -> f64 {
    // ln(n/x) < 0 only when x > n, where the term contributes nothing
    (factor * (n as f64 / x).ln()).max(0.0).sqrt() + (factor * (m as f64).ln()).sqrt() + b
}

/// `√(2 ln(n/d_min)) + √(2 ln m) + b`.
pub fn detection_threshold(geo: &ChangepointGeometry) -> Result<f64> {
    geo.validate()?;
    Ok(threshold_at(geo.n, geo.d_min() as f64, geo.m, geo.b, 2.0))
}

/// `√(4 ln(n/d_min)) + √(4 ln m) + b`: above it the intervals around the
/// targeted changepoints come out disjoint.
pub fn count_threshold(geo: &ChangepointGeometry) -> Result<f64> {
    geo.validate()?;
    Ok(threshold_at(geo.n, geo.d_min() as f64, geo.m, geo.b, 4.0))
}

pub fn is_detectable(geo: &ChangepointGeometry) -> Result<bool> {
    Ok(energy(geo)? >= detection_threshold(geo)?)
}

/// Which branch of the precision bound applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrecisionCase {
    /// Strong jump: bound `2 g(jump⁻²)`.
    Strong,
    /// Bound `g(d_min) / (1 - g(d_min)/d_min)`.
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrecisionBound {
    pub case: PrecisionCase,
    /// Half-width `δ` with `τ ∈ C ⊆ [τ - δ, τ + δ]`.
    pub delta: f64,
}

/// Bound on the localisation error of a detectable changepoint.
pub fn precision_bound(geo: &ChangepointGeometry) -> Result<PrecisionBound> {
    let e = energy(geo)?;
    let thr = detection_threshold(geo)?;
    if e < thr {
        return Err(LbdError::NotDetectable {
            energy: e,
            threshold: thr,
        });
    }
    let jump = geo.jump.abs();
    let g = |x: f64| (threshold_at(geo.n, x, geo.m, geo.b, 2.0) / jump).powi(2);
    let dm = geo.d_min() as f64;
    // the detection condition with both distances set to d_min
    if jump * (dm / 2.0).sqrt() >= thr {
        return Ok(PrecisionBound {
            case: PrecisionCase::Strong,
            delta: 2.0 * g(jump.powi(-2)),
        });
    }
    let gm = g(dm);
    if gm >= dm {
        return Err(LbdError::UnboundedPrecision { g: gm, m: geo.d_min() });
    }
    Ok(PrecisionBound {
        case: PrecisionCase::Weak,
        delta: gm / (1.0 - gm / dm),
    })
}
