//! Standard-normal quantile and the chance-constraint bound transformations
//! used throughout the solver.
//!
//! A quantity `X ~ N(mu, var)` is exceeded with probability `p` at
//! `mu - z_p * sigma` and stays below `mu + z_p * sigma` with probability `p`,
//! where `z_p` is the standard-normal quantile. Accumulators keep variances,
//! never standard deviations.

use std::ops::Add;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Mean and variance of a normally distributed quantity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NormalSummary {
    pub mu: f64,
    pub var: f64,
}

impl NormalSummary {
    pub const ZERO: NormalSummary = NormalSummary { mu: 0.0, var: 0.0 };

    pub fn new(mu: f64, var: f64) -> Self {
        debug_assert!(var >= 0.0, "variance must be nonnegative, got {var}");
        Self { mu, var }
    }

    /// Builds a summary from a mean and a standard deviation.
    pub fn from_sigma(mu: f64, sigma: f64) -> Self {
        Self::new(mu, sigma * sigma)
    }

    pub fn sigma(&self) -> f64 {
        self.var.sqrt()
    }

    /// Sum of two independent normals.
    pub fn sum(self, other: NormalSummary) -> NormalSummary {
        NormalSummary {
            mu: self.mu + other.mu,
            var: self.var + other.var,
        }
    }
}

impl Add for NormalSummary {
    type Output = NormalSummary;

    fn add(self, rhs: NormalSummary) -> NormalSummary {
        self.sum(rhs)
    }
}

impl std::iter::Sum for NormalSummary {
    fn sum<I: Iterator<Item = NormalSummary>>(iter: I) -> Self {
        iter.fold(NormalSummary::ZERO, |acc, x| acc + x)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

// Acklam's rational approximation coefficients (relative error ~1.15e-9).
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.024_25;

/// Lower-tail initial guess, valid for `0 < p <= 0.5`.
fn acklam_lower(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Inverse of the standard normal CDF.
///
/// Rational initial guess followed by one Newton step on the CDF. The lower
/// tail is computed directly and the upper tail by symmetry, so
/// `quantile(p) == -quantile(1 - p)`.
pub fn quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "quantile probability must lie in (0, 1), got {p}"
        )));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let (tail, sign) = if p < 0.5 { (p, 1.0) } else { (1.0 - p, -1.0) };
    let mut z = acklam_lower(tail);
    z -= (normal_cdf(z) - tail) / normal_pdf(z);
    Ok(sign * z)
}

/// Value exceeded with probability `p`: `mu - quantile(p) * sigma`.
pub fn robust_lower(x: NormalSummary, p: f64) -> Result<f64> {
    Ok(x.mu - quantile(p)? * x.sigma())
}

/// Value not exceeded with probability `p`: `mu + quantile(p) * sigma`.
pub fn robust_upper(x: NormalSummary, p: f64) -> Result<f64> {
    Ok(x.mu + quantile(p)? * x.sigma())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn median_is_zero() {
        assert_eq!(quantile(0.5).unwrap(), 0.0);
    }

    #[test]
    fn reference_quantiles() {
        // Frozen from a bisection against a Maclaurin-series erf (see tests/stochmath_oracle.rs).
        assert!((quantile(0.9).unwrap() - 1.281_551_565_544_600_5).abs() < 1e-9);
        assert!((quantile(0.999).unwrap() - 3.090_232_306_167_813_6).abs() < 1e-9);
    }

    #[test]
    fn out_of_domain() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(quantile(p), Err(Error::Domain(_))), "p = {p}");
        }
    }

    #[test]
    fn robust_bounds_examples() {
        let det = NormalSummary::new(10.0, 0.0);
        assert_eq!(robust_lower(det, 0.999).unwrap(), 10.0);
        assert_eq!(
            robust_upper(NormalSummary::new(5.0, 0.0), 0.9).unwrap(),
            5.0
        );

        let unit = NormalSummary::new(0.0, 1.0);
        assert!((robust_lower(unit, 0.999).unwrap() + 3.090_232_3).abs() < 1e-7);

        let four = NormalSummary::new(0.0, 4.0);
        assert!((robust_upper(four, 0.9).unwrap() - 2.563_103_2).abs() < 1e-7);
        assert_eq!(
            robust_upper(NormalSummary::new(7.5, 9.0), 0.5).unwrap(),
            7.5
        );
    }

    #[test]
    fn robust_lower_decreases_with_p() {
        let x = NormalSummary::new(3.0, 2.0);
        let mut prev = f64::INFINITY;
        for k in 1..100 {
            let p = 0.5 + 0.005 * k as f64;
            let v = robust_lower(x, p).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn sum_examples() {
        let s = NormalSummary::new(1.0, 1.0) + NormalSummary::new(2.0, 3.0);
        assert_eq!(s, NormalSummary::new(3.0, 4.0));
        let a = NormalSummary::new(-4.25, 0.5);
        assert_eq!(a + NormalSummary::ZERO, a);
    }

    #[test]
    fn antisymmetry_on_grid() {
        for k in 1..1000 {
            let p = k as f64 / 1000.0;
            let s = quantile(p).unwrap() + quantile(1.0 - p).unwrap();
            assert!(s.abs() < 1e-9, "p = {p}: {s}");
        }
    }

    proptest! {
        #[test]
        fn sum_is_associative(
            a in (-1e3f64..1e3, 0.0f64..1e3),
            b in (-1e3f64..1e3, 0.0f64..1e3),
            c in (-1e3f64..1e3, 0.0f64..1e3),
        ) {
            let (a, b, c) = (
                NormalSummary::new(a.0, a.1),
                NormalSummary::new(b.0, b.1),
                NormalSummary::new(c.0, c.1),
            );
            let l = (a + b) + c;
            let r = a + (b + c);
            prop_assert!((l.mu - r.mu).abs() <= 1e-12 * (1.0 + l.mu.abs()));
            prop_assert!((l.var - r.var).abs() <= 1e-12 * (1.0 + l.var));
        }

        #[test]
        fn lower_and_upper_are_mirrored(mu in -1e3f64..1e3, var in 0.0f64..1e4, p in 0.5f64..0.9999) {
            let x = NormalSummary::new(mu, var);
            let lo = robust_lower(x, p).unwrap();
            let hi = robust_upper(x, p).unwrap();
            prop_assert!((lo - (2.0 * mu - hi)).abs() <= 1e-9 * (1.0 + mu.abs() + hi.abs()));
        }
    }
}
