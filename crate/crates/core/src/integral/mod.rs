//! Integral characteristics: entropy integrals over boxes, the closed form of
//! the super-ideal `n = 2` integral, and the volume identity for linear models.

pub mod cone;
pub mod polylog;
pub mod quadrature;

use std::f64::consts::PI;

pub use cone::{linear_entropy_volume_check, ConeRegion, VolumeCheck};
pub use polylog::{li2, li3, zeta3};
pub use quadrature::{entropy_integral, integrate_box, QuadratureOptions, QuadratureResult};

use crate::error::{Error, Result};

/// `∫_{[−c,c]²} S dx dy` for `f = (x, y)`:
/// `4c Li₂(−e^{2c}) − 6 Li₃(−e^{2c}) − 2π²c/3 − 9ζ(3)/2`.
pub fn closed_s2(c: f64) -> Result<f64> {
    if c.is_nan() || c < 0.0 {
        return Err(Error::Domain(format!("closed_s2 needs c >= 0, got {c}")));
    }
    if c == 0.0 {
        return Ok(0.0);
    }
    let t = 2.0 * c;
    Ok(4.0 * c * polylog::li2_neg_exp(t) - 6.0 * polylog::li3_neg_exp(t) - 2.0 * PI * PI * c / 3.0
        - 4.5 * zeta3())
}

/// Large-`c` behaviour of [`closed_s2`]: `2π²c/3 − 9ζ(3)/2`.
pub fn asymptote_s2(c: f64) -> f64 {
    2.0 * PI * PI * c / 3.0 - 4.5 * zeta3()
}

/// Root of [`asymptote_s2`], `27ζ(3)/(4π²)`.
pub fn asymptote_root() -> f64 {
    27.0 * zeta3() / (4.0 * PI * PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_reference_values() {
        assert!((closed_s2(1.0).unwrap() - 2.493326518346328377).abs() < 1e-13);
        assert!((closed_s2(0.5).unwrap() - 0.673297338072029502).abs() < 1e-13);
        assert!(closed_s2(1e-8).unwrap().abs() < 1e-12);
        assert!(matches!(closed_s2(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn asymptote_is_linear() {
        assert!((asymptote_s2(2.0) - asymptote_s2(1.0) - 2.0 * PI * PI / 3.0).abs() < 1e-14);
        assert!(asymptote_s2(asymptote_root()).abs() < 1e-14);
    }
}
