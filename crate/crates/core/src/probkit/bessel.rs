//! Modified Bessel function of the second kind, order one.

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_MAX: f64 = 2.0;

/// Power series about zero, split as `K1(x) = 1/x + ln(x/2) I1(x) - (x/4) S(x)`.
/// Returns `(ln(x/2) I1(x), (x/4) S(x))`.
fn series_parts(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let mut term = 1.0; // q^k / (k! (k+1)!)
    let mut psi_k1 = -EULER_GAMMA; // psi(k+1)
    let mut i1 = 0.0;
    let mut s = 0.0;
    for k in 0..60 {
        let kf = k as f64;
        let psi_k2 = psi_k1 + 1.0 / (kf + 1.0);
        i1 += term;
        s += (psi_k1 + psi_k2) * term;
        if term < 1e-18 * i1 {
            break;
        }
        term *= q / ((kf + 1.0) * (kf + 2.0));
        psi_k1 = psi_k2;
    }
    ((0.5 * x).ln() * 0.5 * x * i1, 0.25 * x * s)
}

/// `e^x K1(x)` by the trapezoid rule on `int_0^inf e^{-x (cosh t - 1)} cosh t dt`.
fn scaled_integral(x: f64) -> f64 {
    const H: f64 = 0.02;
    let mut sum = 0.5;
    let mut k = 1;
    loop {
        let t = k as f64 * H;
        let c = t.cosh();
        let e = x * (c - 1.0);
        if e > 60.0 {
            break;
        }
        sum += (-e).exp() * c;
        k += 1;
    }
    sum * H
}

/// `K1(x)` for `x > 0`.
pub fn bessel_k1(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::Domain(format!("K1 needs x > 0, got {x}")));
    }
    if x <= SERIES_MAX {
        let (a, b) = series_parts(x);
        Ok(1.0 / x + a - b)
    } else {
        Ok(scaled_integral(x) * (-x).exp())
    }
}

/// `1 - x K1(x)`, accurate near zero where it vanishes like `-x^2 ln(x)/2`.
pub(crate) fn one_minus_x_k1(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x == 0.0 {
        0.0
    } else if x <= SERIES_MAX {
        let (a, b) = series_parts(x);
        x * (b - a)
    } else {
        1.0 - x * scaled_integral(x) * (-x).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // Abramowitz & Stegun table 9.8
        assert!((bessel_k1(1.0).unwrap() - 0.601_907_230_197_234_6).abs() < 1e-14);
        assert!((bessel_k1(2.0).unwrap() - 0.139_865_881_816_522_4).abs() < 1e-14);
        assert!((bessel_k1(0.1).unwrap() - 9.853_844_780_870_606).abs() < 1e-12);
        let k5 = bessel_k1(5.0).unwrap();
        assert!((k5 / 4.044_613_445_452_164e-3 - 1.0).abs() < 1e-12, "{k5}");
    }

    #[test]
    fn branches_meet() {
        let lo = bessel_k1(SERIES_MAX).unwrap();
        let hi = scaled_integral(SERIES_MAX) * (-SERIES_MAX).exp();
        assert!((lo / hi - 1.0).abs() < 1e-13);
    }

    #[test]
    fn small_argument_limit() {
        let x = 1e-4;
        assert!((x * bessel_k1(x).unwrap() - 1.0).abs() < 1e-4);
        let d = one_minus_x_k1(x);
        let lead = -0.5 * x * x * (0.5 * x).ln();
        assert!(d > 0.0 && (d / lead - 1.0).abs() < 0.2);
    }

    #[test]
    fn domain() {
        assert!(bessel_k1(0.0).is_err());
        assert!(bessel_k1(-1.0).is_err());
        assert!(bessel_k1(f64::NAN).is_err());
    }
}
