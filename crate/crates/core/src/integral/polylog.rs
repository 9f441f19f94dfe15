//! Real dilogarithm and trilogarithm on `x ≤ 0`, and `ζ(3)`.

use std::f64::consts::{LN_2, PI};
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// `ζ(3) = (5/2) Σ_{k≥1} (−1)^{k+1} / (k³ C(2k, k))`.
pub fn zeta3() -> f64 {
    static VALUE: OnceLock<f64> = OnceLock::new();
    *VALUE.get_or_init(|| {
        let mut sum = 0.0;
        let mut binom = 1.0;
        for k in 1..=40u32 {
            let kf = k as f64;
            binom *= 2.0 * (2.0 * kf - 1.0) / kf;
            let term = 1.0 / (kf * kf * kf * binom);
            sum += if k % 2 == 1 { term } else { -term };
        }
        2.5 * sum
    })
}

const SERIES_LIMIT: usize = 200;

fn direct_series(x: f64, s: i32) -> f64 {
    let mut sum = 0.0;
    let mut power = 1.0;
    for k in 1..SERIES_LIMIT {
        power *= x;
        let term = power / (k as f64).powi(s);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

const LOGISTIC_TERMS: usize = 48;

/// Taylor coefficients of `1/(1 + e^{−t})` at `t = 0`.
fn logistic_coefficients() -> &'static [f64; LOGISTIC_TERMS] {
    static COEFFS: OnceLock<[f64; LOGISTIC_TERMS]> = OnceLock::new();
    COEFFS.get_or_init(|| {
        // 1 + e^{−t} = Σ d_k t^k
        let mut d = [0.0; LOGISTIC_TERMS];
        let mut fact = 1.0;
        for (k, dk) in d.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *dk = if k % 2 == 0 { 1.0 } else { -1.0 } / fact;
        }
        d[0] += 1.0;
        let mut c = [0.0; LOGISTIC_TERMS];
        c[0] = 1.0 / d[0];
        for k in 1..LOGISTIC_TERMS {
            let acc: f64 = (1..=k).map(|j| d[j] * c[k - j]).sum();
            c[k] = -acc / d[0];
        }
        c
    })
}

/// `Li_s(−e^t)` for `|t| ≤ ln 2`, by integrating `Li_0(−e^t) = −1/(1 + e^{−t})`
/// `s` times from `t = 0`.
fn around_minus_one(t: f64, s: usize) -> f64 {
    let eta = [0.5, LN_2, PI * PI / 12.0, 0.75 * zeta3()];
    let mut sum = 0.0;
    let mut tk = 1.0;
    for k in 0..s {
        sum += eta[s - k] * tk;
        tk *= t / (k + 1) as f64;
    }
    let c = logistic_coefficients();
    let mut tail = 0.0;
    let mut pow = t.powi(s as i32);
    // even coefficients past the first vanish, so no early exit
    for (j, cj) in c.iter().enumerate() {
        let mut ratio = 1.0;
        for i in 1..=s {
            ratio /= (j + i) as f64;
        }
        tail += cj * pow * ratio;
        pow *= t;
    }
    -(sum + tail)
}

fn check_domain(x: f64) -> Result<()> {
    if x.is_nan() || x > 0.0 {
        return Err(Error::Domain(format!("polylogarithm argument must be <= 0, got {x}")));
    }
    Ok(())
}

pub fn li2(x: f64) -> Result<f64> {
    check_domain(x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::NEG_INFINITY);
    }
    let y = -x;
    Ok(if y <= 0.5 {
        direct_series(x, 2)
    } else if y <= 2.0 {
        around_minus_one(y.ln(), 2)
    } else {
        let ly = y.ln();
        -PI * PI / 6.0 - 0.5 * ly * ly - direct_series(-1.0 / y, 2)
    })
}

pub fn li3(x: f64) -> Result<f64> {
    check_domain(x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::NEG_INFINITY);
    }
    let y = -x;
    Ok(if y <= 0.5 {
        direct_series(x, 3)
    } else if y <= 2.0 {
        around_minus_one(y.ln(), 3)
    } else {
        let ly = y.ln();
        direct_series(-1.0 / y, 3) - ly * ly * ly / 6.0 - PI * PI * ly / 6.0
    })
}

/// `Li_2(−e^t)`, with the inversion applied on `t` directly so large `t` does not overflow.
pub fn li2_neg_exp(t: f64) -> f64 {
    if t > 0.693 {
        -PI * PI / 6.0 - 0.5 * t * t - direct_series(-(-t).exp(), 2)
    } else if t >= -0.693 {
        around_minus_one(t, 2)
    } else {
        direct_series(-t.exp(), 2)
    }
}

/// `Li_3(−e^t)`, overflow-free counterpart of [`li3`].
pub fn li3_neg_exp(t: f64) -> f64 {
    if t > 0.693 {
        direct_series(-(-t).exp(), 3) - t * t * t / 6.0 - PI * PI * t / 6.0
    } else if t >= -0.693 {
        around_minus_one(t, 3)
    } else {
        direct_series(-t.exp(), 3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn zeta3_value() {
        assert!((zeta3() - 1.2020569031595942854).abs() < 1e-15);
    }

    #[test]
    fn special_points() {
        assert_eq!(li2(0.0).unwrap(), 0.0);
        assert_eq!(li3(0.0).unwrap(), 0.0);
        assert!(rel(li2(-1.0).unwrap(), -PI * PI / 12.0) < 1e-14);
        assert!(rel(li3(-1.0).unwrap(), -0.75 * zeta3()) < 1e-14);
        assert!(matches!(li2(0.5), Err(Error::Domain(_))));
        assert!(matches!(li3(1e-300), Err(Error::Domain(_))));
    }

    #[test]
    fn logistic_coefficients_start() {
        let c = logistic_coefficients();
        assert!((c[0] - 0.5).abs() < 1e-16);
        assert!((c[1] - 0.25).abs() < 1e-16);
        assert!(c[2].abs() < 1e-16);
        assert!((c[3] + 1.0 / 48.0).abs() < 1e-16);
    }

    #[test]
    fn branches_meet() {
        for x in [-0.5, -2.0] {
            let below = x * (1.0 - 1e-15);
            let above = x * (1.0 + 1e-15);
            assert!(rel(li2(below).unwrap(), li2(above).unwrap()) < 1e-13);
            assert!(rel(li3(below).unwrap(), li3(above).unwrap()) < 1e-13);
        }
    }
}
