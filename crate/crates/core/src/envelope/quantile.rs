//! Standard-normal CDF and inverse CDF.
//!
//! The inverse uses Acklam's rational approximation (relative error about
//! 1.2e-9) followed by one Halley step against an `erfc`-based CDF, which
//! brings it to near machine precision. Upper-tail entry points avoid the
//! cancellation of forming `1 - q` when `q` is close to one.

use std::f64::consts::{PI, SQRT_2};

use crate::{Error, Result};

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
const P_LOW: f64 = 0.02425;

/// Standard-normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

fn check_open_unit(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("quantile level {q} outside (0, 1)")))
    }
}

/// Inverse CDF restricted to the lower half, `q` in `(0, 0.5]`.
fn lower_quantile(q: f64) -> f64 {
    let x = if q < P_LOW {
        let t = (-2.0 * q.ln()).sqrt();
        (((((C[0] * t + C[1]) * t + C[2]) * t + C[3]) * t + C[4]) * t + C[5])
            / ((((D[0] * t + D[1]) * t + D[2]) * t + D[3]) * t + 1.0)
    } else {
        let r = q - 0.5;
        let s = r * r;
        (((((A[0] * s + A[1]) * s + A[2]) * s + A[3]) * s + A[4]) * s + A[5]) * r
            / (((((B[0] * s + B[1]) * s + B[2]) * s + B[3]) * s + B[4]) * s + 1.0)
    };
    // Halley refinement
    let e = normal_cdf(x) - q;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    let refined = x - u / (1.0 + 0.5 * x * u);
    if refined.is_finite() {
        refined
    } else {
        x
    }
}

/// Standard-normal inverse CDF, `q` in `(0, 1)`.
pub fn normal_quantile(q: f64) -> Result<f64> {
    check_open_unit(q)?;
    Ok(if q > 0.5 {
        // exact for q in [0.5, 1]
        -lower_quantile(1.0 - q)
    } else {
        lower_quantile(q)
    })
}

/// `z` with `P(Z > z) = tail`.
pub fn normal_quantile_upper(tail: f64) -> Result<f64> {
    check_open_unit(tail)?;
    Ok(if tail <= 0.5 {
        -lower_quantile(tail)
    } else {
        lower_quantile(1.0 - tail)
    })
}

/// Gaussian quantile adjusted for `m` repetitions: `Phi^-1(p^(1/m))`.
///
/// The upper tail `1 - p^(1/m)` is formed as `-expm1(ln(p) / m)` so large
/// `m` keeps full precision.
pub fn repetition_quantile(p: f64, m: u64) -> Result<f64> {
    check_open_unit(p)?;
    if m == 0 {
        return Err(Error::Domain("repetition count must be at least 1".into()));
    }
    let tail = -(p.ln() / m as f64).exp_m1();
    normal_quantile_upper(tail)
}
