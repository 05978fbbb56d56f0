//! Scalar special functions: log-gamma, regularized incomplete gamma,
//! normal CDF/quantile and the chi-squared CDF.
//!
//! Everything here targets absolute accuracy well below 1e-10, which is far
//! tighter than the sampling noise in any downstream use.

use crate::error::{Error, Result};

const MAX_ITER: usize = 1000;

/// Lanczos coefficients (g = 7, n = 9).
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "ln_gamma requires x > 0, got {x}");
    if x < 0.5 {
        // Reflection keeps the Lanczos argument comfortably positive.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma P(a, x) together with Q = 1 − P.
///
/// Series expansion for x < a + 1, Lentz continued fraction otherwise; the
/// pair is computed on whichever side avoids cancellation.
pub fn gamma_p_q(a: f64, x: f64) -> (f64, f64) {
    debug_assert!(a > 0.0 && x.is_finite() && x >= 0.0);
    if x == 0.0 {
        return (0.0, 1.0);
    }
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // P(a,x) = prefactor · Σ x^n / (a (a+1) … (a+n))
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * f64::EPSILON {
                break;
            }
        }
        let p = (log_prefactor.exp() * sum).clamp(0.0, 1.0);
        (p, 1.0 - p)
    } else {
        // Q(a,x) via the modified Lentz continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut f = d;
        for i in 1..=MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            f *= delta;
            if (delta - 1.0).abs() < f64::EPSILON {
                break;
            }
        }
        let q = (log_prefactor.exp() * f).clamp(0.0, 1.0);
        (1.0 - q, q)
    }
}

/// Standard normal CDF Φ(z).
///
/// Evaluated through the incomplete gamma identity erf(t) = P(1/2, t²), which
/// keeps the extreme tails accurate in relative terms.
pub fn normal_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    let t = z * z / 2.0;
    if z >= 0.0 {
        let (p, _) = gamma_p_q(0.5, t);
        0.5 * (1.0 + p)
    } else {
        let (_, q) = gamma_p_q(0.5, t);
        0.5 * q
    }
}

/// Standard normal density φ(z).
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile Φ⁻¹(u) for 0 < u < 1.
///
/// Acklam's rational initializer polished by one Halley step against
/// [`normal_cdf`]; round-trips with the CDF to ~1e-14 over |z| ≤ 6.
pub fn normal_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::domain(format!(
            "normal_quantile requires 0 < u < 1, got {u}"
        )));
    }
    let z0 = acklam(u);
    // Halley refinement: z' = z + r/(1 − z·r/2), r = (u − Φ(z))/φ(z).
    let mut z = z0;
    for _ in 0..2 {
        let err = normal_cdf(z) - u;
        let pdf = normal_pdf(z);
        if pdf == 0.0 {
            break;
        }
        let r = err / pdf;
        z -= r / (1.0 + z * r / 2.0);
    }
    Ok(z)
}

/// Acklam's rational approximation to Φ⁻¹ (relative error ≲ 1.2e-9).
fn acklam(u: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_690e2,
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
    const U_LOW: f64 = 0.02425;

    if u < U_LOW {
        let q = (-2.0 * u.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if u <= 1.0 - U_LOW {
        let q = u - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -acklam(1.0 - u)
    }
}

/// Chi-squared CDF with `df` degrees of freedom: P(df/2, x/2).
///
/// Total on x (values below zero map to 0).
pub fn chisq_cdf(x: f64, df: u32) -> f64 {
    debug_assert!(df >= 1);
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 0.0;
    }
    let (p, _) = gamma_p_q(df as f64 / 2.0, x / 2.0);
    p
}
