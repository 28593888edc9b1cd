//! Sine and cosine integrals and the thermal factors of a harmonic mode.

use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;

use crate::consts::{HBAR, K_B};
use crate::{Error, Result};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Below this argument Si and Ci use their power series, above it the
/// continued fraction for `E1(ix)`.
const SERIES_LIMIT: f64 = 8.0;

/// Bath temperature. Zero temperature is its own variant so that the
/// ground-state limit (`coth -> 1`) is exact rather than a float underflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature {
    Zero,
    Kelvin(f64),
}

/// Temperature together with the fixed constants `hbar` and `k_B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalContext {
    temperature: Temperature,
}

impl ThermalContext {
    pub fn zero() -> Self {
        Self {
            temperature: Temperature::Zero,
        }
    }

    /// Strictly positive, finite temperature in kelvin.
    pub fn kelvin(t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::domain("ThermalContext::kelvin", format!("temperature must be positive and finite, got {t}")));
        }
        Ok(Self {
            temperature: Temperature::Kelvin(t),
        })
    }

    /// Like [`ThermalContext::kelvin`] but maps exactly `0.0` to [`Temperature::Zero`].
    pub fn from_kelvin(t: f64) -> Result<Self> {
        if t == 0.0 {
            Ok(Self::zero())
        } else {
            Self::kelvin(t)
        }
    }

    /// The temperature at which `hbar * omega / (2 k_B T) == reduced`.
    pub fn at_reduced_frequency(omega: f64, reduced: f64) -> Result<Self> {
        if !(omega > 0.0 && reduced > 0.0) {
            return Err(Error::domain("ThermalContext::at_reduced_frequency", "omega and reduced frequency must be positive"));
        }
        Self::kelvin(HBAR * omega / (2.0 * K_B * reduced))
    }

    pub fn temperature(&self) -> Temperature {
        self.temperature
    }

    /// Temperature in kelvin, 0 for the zero-temperature variant.
    pub fn kelvin_value(&self) -> f64 {
        match self.temperature {
            Temperature::Zero => 0.0,
            Temperature::Kelvin(t) => t,
        }
    }

    /// `k_B T` in joules.
    pub fn kt(&self) -> f64 {
        K_B * self.kelvin_value()
    }

    /// `hbar omega / (2 k_B T)`; `None` at zero temperature (infinite).
    pub fn reduced_frequency(&self, omega: f64) -> Option<f64> {
        match self.temperature {
            Temperature::Zero => None,
            Temperature::Kelvin(t) => Some(HBAR * omega / (2.0 * K_B * t)),
        }
    }
}

/// Sine integral `Si(x) = int_0^x sin(t)/t dt`.
pub fn sine_integral(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain("sine_integral", format!("argument must be finite, got {x}")));
    }
    let ax = x.abs();
    let si = if ax < SERIES_LIMIT {
        si_series(ax)
    } else {
        FRAC_PI_2 + e1_imaginary(ax).im
    };
    Ok(si.copysign(x))
}

/// Cosine integral `Ci(x) = -int_x^inf cos(t)/t dt`, defined for `x > 0`.
pub fn cosine_integral(x: f64) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::domain("cosine_integral", format!("argument must be positive and finite, got {x}")));
    }
    Ok(if x < SERIES_LIMIT {
        EULER_GAMMA + x.ln() + cin_series_negated(x)
    } else {
        -e1_imaginary(x).re
    })
}

fn si_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x; // (-1)^k x^(2k+1) / (2k+1)!
    let mut sum = x;
    let mut k = 0.0;
    loop {
        term *= -x2 / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
        k += 1.0;
        let contrib = term / (2.0 * k + 1.0);
        sum += contrib;
        if contrib.abs() <= 1e-18 * sum.abs() {
            return sum;
        }
    }
}

// sum_{k>=1} (-1)^k x^(2k) / (2k (2k)!)
fn cin_series_negated(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = 1.0; // (-1)^k x^(2k) / (2k)!
    let mut sum = 0.0;
    let mut k = 0.0;
    loop {
        term *= -x2 / ((2.0 * k + 1.0) * (2.0 * k + 2.0));
        k += 1.0;
        let contrib = term / (2.0 * k);
        sum += contrib;
        if contrib.abs() <= 1e-18 * sum.abs().max(1e-300) {
            return sum;
        }
    }
}

/// `E1(ix) * exp(ix)` folded as in the modified Lentz evaluation, returning
/// `h` such that `Ci = -Re h` and `Si = pi/2 + Im h` (x >= SERIES_LIMIT).
fn e1_imaginary(x: f64) -> Complex64 {
    const TINY: f64 = 1e-300;
    let mut b = Complex64::new(1.0, x);
    let mut c = Complex64::new(1.0 / TINY, 0.0);
    let mut d = b.inv();
    let mut h = d;
    for i in 2..100_000 {
        let a = -((i - 1) as f64).powi(2);
        b += 2.0;
        d = (d * a + b).inv();
        c = b + c.inv() * a;
        let del = c * d;
        h *= del;
        if (del.re - 1.0).abs() + del.im.abs() < 1e-16 {
            break;
        }
    }
    let (s, co) = x.sin_cos();
    Complex64::new(co, -s) * h
}

/// `coth(hbar omega / 2 k_B T)`; exactly 1 at zero temperature.
pub fn thermal_factor(omega: f64, ctx: &ThermalContext) -> Result<f64> {
    Ok(2.0 * bose_occupation(omega, ctx)? + 1.0)
}

/// Bose-Einstein occupation `1 / (exp(hbar omega / k_B T) - 1)`, i.e.
/// `(coth - 1) / 2`.
pub fn bose_occupation(omega: f64, ctx: &ThermalContext) -> Result<f64> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::domain("thermal_factor", format!("frequency must be positive, got {omega:e}")));
    }
    Ok(match ctx.reduced_frequency(omega) {
        None => 0.0,
        // expm1 keeps full precision when 2x is small; overflow to inf gives 0.
        Some(x) => 1.0 / (2.0 * x).exp_m1(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Composite Simpson oracle for int_0^x sin(t)/t dt, independent of the series.
    fn si_simpson(x: f64, n: usize) -> f64 {
        let h = x / n as f64;
        let f = |t: f64| if t == 0.0 { 1.0 } else { t.sin() / t };
        let mut s = f(0.0) + f(x);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn si_at_zero_and_one() {
        assert_eq!(sine_integral(0.0).unwrap(), 0.0);
        let oracle = si_simpson(1.0, 2000);
        assert!((oracle - 0.946_083_070_367).abs() < 1e-12);
        assert!((sine_integral(1.0).unwrap() - 0.946_083_070_367_183).abs() < 1e-13);
    }

    #[test]
    fn si_large_argument_tends_to_half_pi() {
        assert!((sine_integral(1e6).unwrap() - FRAC_PI_2).abs() < 1e-5);
        assert!((sine_integral(-1e6).unwrap() + FRAC_PI_2).abs() < 1e-5);
    }

    #[test]
    fn si_and_ci_branches_agree_at_the_seam() {
        let below = SERIES_LIMIT * (1.0 - 1e-15);
        let si_lo = si_series(below);
        let si_hi = FRAC_PI_2 + e1_imaginary(SERIES_LIMIT).im;
        assert!((si_lo - si_hi).abs() < 1e-13, "{si_lo} vs {si_hi}");
        let ci_lo = EULER_GAMMA + below.ln() + cin_series_negated(below);
        let ci_hi = -e1_imaginary(SERIES_LIMIT).re;
        assert!((ci_lo - ci_hi).abs() < 1e-13, "{ci_lo} vs {ci_hi}");
    }

    #[test]
    fn si_matches_simpson_oracle_across_the_seam() {
        for &x in &[0.3, 2.0, 5.0, 7.9, 8.1, 12.0, 30.0] {
            let oracle = si_simpson(x, 20_000);
            assert!((sine_integral(x).unwrap() - oracle).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn ci_reference_values() {
        assert!((cosine_integral(1.0).unwrap() - 0.337_403_922_900_968_1).abs() < 1e-13);
        assert!(cosine_integral(1e6).unwrap().abs() < 1e-5);
        let x = 1e-6;
        assert!((cosine_integral(x).unwrap() - x.ln() - EULER_GAMMA).abs() < 1e-6);
    }

    #[test]
    fn ci_derivative_is_cos_over_x() {
        for &x in &[0.5, 3.0, 8.0, 20.0, 1e3] {
            let h = 1e-5 * x;
            let d = (cosine_integral(x + h).unwrap() - cosine_integral(x - h).unwrap()) / (2.0 * h);
            assert!((d - x.cos() / x).abs() < 1e-7 / x.min(1.0), "x = {x}");
        }
    }

    #[test]
    fn domain_errors() {
        assert!(sine_integral(f64::NAN).is_err());
        assert!(cosine_integral(0.0).is_err());
        assert!(cosine_integral(-1.0).is_err());
        assert!(thermal_factor(0.0, &ThermalContext::zero()).is_err());
        assert!(ThermalContext::kelvin(-1.0).is_err());
    }

    #[test]
    fn thermal_factor_reference_points() {
        let omega = 1e13;
        assert_eq!(thermal_factor(omega, &ThermalContext::zero()).unwrap(), 1.0);
        assert_eq!(bose_occupation(omega, &ThermalContext::zero()).unwrap(), 0.0);

        let ctx = ThermalContext::at_reduced_frequency(omega, 1.0).unwrap();
        assert!((thermal_factor(omega, &ctx).unwrap() - 1.313_035_285).abs() < 1e-9);
        assert!((bose_occupation(omega, &ctx).unwrap() - 0.156_517_642).abs() < 1e-9);

        let ctx = ThermalContext::at_reduced_frequency(omega, 0.01).unwrap();
        let x = ctx.reduced_frequency(omega).unwrap();
        let rel = (thermal_factor(omega, &ctx).unwrap() - 1.0 / x) * x;
        assert!(rel.abs() < 1e-4);

        let ctx = ThermalContext::at_reduced_frequency(omega, 1e-4).unwrap();
        let ratio = bose_occupation(omega, &ctx).unwrap() * HBAR * omega / ctx.kt();
        assert!((ratio - 1.0).abs() < 1e-3);
    }

    #[test]
    fn huge_reduced_frequency_saturates() {
        let ctx = ThermalContext::kelvin(1e-3).unwrap();
        assert_eq!(thermal_factor(1e16, &ctx).unwrap(), 1.0);
    }
}
