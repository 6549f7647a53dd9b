// SPDX-License-Identifier: MIT OR Apache-2.0

//! Upper-tail quantiles of the standard normal and Student t distributions.

use statrs::function::beta::beta_reg;
use statrs::function::erf::{erfc, erfc_inv};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Upper tail `P(Z > z)` of the standard normal.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// `z(p)`, the `(1 - p)`-quantile of `N(0, 1)`.
pub fn normal_upper_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let mut z = std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    // two Newton steps against the tail function
    for _ in 0..2 {
        let density = INV_SQRT_2PI * (-0.5 * z * z).exp();
        if density <= 0.0 || !density.is_finite() {
            break;
        }
        let step = (normal_sf(z) - p) / density;
        if !step.is_finite() {
            break;
        }
        z += step;
    }
    z
}

/// Upper tail `P(T > t)` of Student's t with `df` degrees of freedom, for
/// `t >= 0`.
pub fn student_t_sf(t: f64, df: f64) -> f64 {
    if t <= 0.0 {
        return 0.5;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    0.5 * beta_reg(0.5 * df, 0.5, x)
}

/// The `(1 - p)`-quantile of Student's t, for `p` in `(0, 1/2]`.
pub fn student_t_upper_quantile(p: f64, df: f64) -> f64 {
    debug_assert!(p > 0.0 && p <= 0.5 && df > 0.0);
    let mut lo = 0.0f64;
    let mut hi = normal_upper_quantile(p).max(1.0);
    while student_t_sf(hi, df) > p {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::INFINITY;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if student_t_sf(mid, df) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    // reference values from an independent statistics library
    #[test]
    fn normal_quantiles() {
        let cases = [
            (0.025, 1.959_963_984_540_054_5),
            (1e-5, 4.264_890_793_922_825),
            (1e-12, 7.034_483_825_301_131),
            (0.15865, 1.000_021_713_322_999_2),
            (1e-100, 21.273_453_560_965_322),
        ];
        for (p, z) in cases {
            let got = normal_upper_quantile(p);
            assert!((got - z).abs() < 1e-10, "p={p}: {got} vs {z}");
        }
        assert!(normal_upper_quantile(0.5).abs() < 1e-12);
    }

    #[test]
    fn student_quantiles() {
        let cases = [
            (0.025, 5.0, 2.570_581_835_636_314_6),
            (1e-6, 10.0, 9.751_995_490_943_26),
            (0.05, 100.0, 1.660_234_326_065_750_6),
            (1e-10, 1000.0, 6.427_876_283_066_734),
        ];
        for (p, df, t) in cases {
            let got = student_t_upper_quantile(p, df);
            assert!((got - t).abs() < 1e-8 * t.max(1.0), "p={p} df={df}: {got} vs {t}");
        }
        let heavy = student_t_upper_quantile(1e-8, 2.0);
        assert!((heavy - 7_071.067_705_799_457).abs() / 7071.0 < 1e-10);
    }

    #[test]
    fn student_approaches_normal() {
        let z = normal_upper_quantile(1e-4);
        let t = student_t_upper_quantile(1e-4, 1e7);
        assert!((z - t).abs() < 1e-5);
    }
}
