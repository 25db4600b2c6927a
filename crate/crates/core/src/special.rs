//! Special functions: standard normal, regularized incomplete gamma and the
//! exponential integral `E1`.
//!
//! Everything here is evaluated with tail-aware formulas so that survival
//! functions and their logarithms stay accurate far past the point where
//! `1 - F` would round to zero.

use core::f64::consts::FRAC_1_SQRT_2;
// unused only when a dependency links std and its inherent f64 methods
#[allow(unused_imports)]
use num_traits::Float;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

pub fn normal_ln_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

/// Mills ratio `(1 - Φ(z)) / φ(z)` for `z ≥ 5`, by backward evaluation of
/// the Laplace continued fraction `1/(z + 1/(z + 2/(z + 3/(z + ...))))`.
fn mills_ratio_tail(z: f64) -> f64 {
    let mut t = z;
    for k in (1..=80).rev() {
        t = z + k as f64 / t;
    }
    1.0 / t
}

/// `ln(1 - Φ(z))`, finite for every finite `z`.
pub fn normal_ln_sf(z: f64) -> f64 {
    if z == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if z < 5.0 {
        normal_sf(z).ln()
    } else {
        normal_ln_pdf(z) + mills_ratio_tail(z).ln()
    }
}

/// `ln Φ(z)`.
pub fn normal_ln_cdf(z: f64) -> f64 {
    normal_ln_sf(-z)
}

/// Standard normal quantile (Wichura's AS241, relative accuracy ~1e-16).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2509.080_928_730_122_7 * r + 33430.575_583_588_128) * r
            + 67265.770_927_008_7)
            * r
            + 45921.953_931_549_87)
            * r
            + 13731.693_765_509_461)
            * r
            + 1971.590_950_306_551_4)
            * r
            + 133.141_667_891_784_38)
            * r
            + 3.387_132_872_796_366_6;
        let den = ((((((5226.495_278_852_545_9 * r + 28729.085_735_721_943) * r
            + 39307.895_800_092_71)
            * r
            + 21213.794_301_586_596)
            * r
            + 5394.196_021_424_751)
            * r
            + 687.187_007_492_057_9)
            * r
            + 42.313_330_701_600_91)
            * r
            + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_6)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_6;
        let den = ((((((1.050_750_071_644_416_8e-9 * r + 5.475_938_084_995_345e-4) * r
            + 0.015_198_666_563_616_457)
            * r
            + 0.148_103_976_427_480_07)
            * r
            + 0.689_767_334_985_1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_758_8)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103_8;
        let den = ((((((2.044_263_103_389_939_8e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 0.014_875_361_290_850_615)
            * r
            + 0.136_929_880_922_735_8)
            * r
            + 0.599_832_206_555_887_9)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// Regularized incomplete gamma `P(a, x)` and `Q(a, x)` together with their
/// logarithms.
#[derive(Debug, Clone, Copy)]
pub struct IncompleteGamma {
    pub p: f64,
    pub q: f64,
    pub ln_p: f64,
    pub ln_q: f64,
}

pub fn incomplete_gamma(a: f64, x: f64) -> IncompleteGamma {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return IncompleteGamma {
            p: 0.0,
            q: 1.0,
            ln_p: f64::NEG_INFINITY,
            ln_q: 0.0,
        };
    }
    if x == f64::INFINITY {
        return IncompleteGamma {
            p: 1.0,
            q: 0.0,
            ln_p: 0.0,
            ln_q: f64::NEG_INFINITY,
        };
    }
    let ln_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        // series
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..10_000 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        let ln_p = ln_prefactor + sum.ln();
        let p = ln_p.exp();
        IncompleteGamma {
            p,
            q: 1.0 - p,
            ln_p,
            ln_q: (-p).ln_1p(),
        }
    } else {
        // modified Lentz continued fraction
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        let ln_q = ln_prefactor + h.ln();
        let q = ln_q.exp();
        IncompleteGamma {
            p: 1.0 - q,
            q,
            ln_p: (-q).ln_1p(),
            ln_q,
        }
    }
}

/// Exponential integral `E1(x) = ∫_x^∞ e^{-t}/t dt` for `x > 0`.
///
/// `ln_x` must equal `ln(x)`; callers that already hold the logarithm pass
/// it in to avoid a lossy round trip through `exp`.
pub fn exp_integral_e1(x: f64, ln_x: f64) -> f64 {
    if x <= 0.0 {
        return f64::INFINITY;
    }
    if x > 745.0 {
        return 0.0;
    }
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            let kf = k as f64;
            term *= -x / kf;
            let add = -term / kf;
            sum += add;
            if add.abs() < EPS * sum.abs().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - ln_x + sum
    } else {
        let mut b = x + 1.0;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        h * (-x).exp()
    }
}
