//! LR-circuit picture of the driven bath and the generalized Nyquist noise.
//!
//! Carriers of charge `q`, density `n` and mass `m` in a wire of cross-section
//! `A` give a line charge `lambda = q n A` and an inductance `L = m / lambda^2`.
//! The bath force becomes a noise voltage `V_I = eta / lambda`, whose
//! correlation is the driven fluctuation-dissipation relation divided by
//! `lambda^2`.
//!
//! The noise spectrum averages that correlation over a window of length
//! `2 pi / df`:
//!
//! ```text
//! S(tau) = sum m_a hbar omega_a r_a f(omega_a) cos(omega_a tau)
//!        + df / (4 pi lambda^2) int_0^{2 pi/df} D(t + tau) D(t) dt
//! ```
//!
//! with `r_a = nu_a^4 / (omega_a^2 lambda^2)` and `f = coth(hbar omega / 2 k_B T)`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::io::{Read, Write};

use num_complex::Complex64;

use crate::bath::{BathSpec, DebyeSpec};
use crate::consts::{ATOMIC_MASS_UNIT, ELECTRON_MASS, ELEMENTARY_CHARGE, HBAR};
use crate::gle::FieldProtocol;
use crate::noise::{analytic_eta_correlation, drive_shift, mode_drive_response};
use crate::quad::{integrate_with_breaks, QuadOptions};
use crate::specfun::{cosine_integral, sine_integral, thermal_factor, ThermalContext};
use crate::{Error, Result};

macro_rules! unit {
    ($(#[$doc:meta])* $name:ident, $symbol:literal) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
        pub struct $name(pub f64);

        impl $name {
            pub fn value(self) -> f64 {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{:e} {}", self.0, $symbol)
            }
        }

        impl std::ops::Add for $name {
            type Output = Self;
            fn add(self, rhs: Self) -> Self {
                Self(self.0 + rhs.0)
            }
        }

        impl std::ops::Mul<f64> for $name {
            type Output = Self;
            fn mul(self, rhs: f64) -> Self {
                Self(self.0 * rhs)
            }
        }
    };
}

unit!(Ohms, "Ohm");
unit!(Volts, "V");
unit!(VoltsSquared, "V^2");
unit!(VoltsSquaredPerHertz, "V^2/Hz");
unit!(CoulombsPerMeter, "C/m");
unit!(Henries, "H");

/// Complex current phasor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComplexAmperes(pub Complex64);

impl fmt::Display for ComplexAmperes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:e} {:+e}i) A", self.0.re, self.0.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitParams {
    /// C
    pub carrier_charge: f64,
    /// 1/m^3
    pub carrier_density: f64,
    /// m^2
    pub cross_section: f64,
    /// kg
    pub carrier_mass: f64,
}

impl CircuitParams {
    pub fn new(carrier_charge: f64, carrier_density: f64, cross_section: f64, carrier_mass: f64) -> Result<Self> {
        let lambda = carrier_charge * carrier_density * cross_section;
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Construction(format!(
                "line charge q n A must be positive, got {lambda:e} C/m"
            )));
        }
        if !(carrier_mass.is_finite() && carrier_mass > 0.0) {
            return Err(Error::Construction(format!("carrier mass must be positive, got {carrier_mass:e}")));
        }
        Ok(Self {
            carrier_charge,
            carrier_density,
            cross_section,
            carrier_mass,
        })
    }

    /// Conduction electrons of copper in a 1 mm^2 wire.
    pub fn copper_wire() -> Self {
        Self {
            carrier_charge: ELEMENTARY_CHARGE,
            carrier_density: 8.49e28,
            cross_section: 1e-6,
            carrier_mass: ELECTRON_MASS,
        }
    }

    pub fn line_charge(&self) -> CoulombsPerMeter {
        CoulombsPerMeter(self.carrier_charge * self.carrier_density * self.cross_section)
    }

    pub fn inductance(&self) -> Henries {
        let lambda = self.line_charge().0;
        Henries(self.carrier_mass / (lambda * lambda))
    }
}

pub const MATERIAL_CSV_HEADER: [&str; 4] = ["name", "A_D_s3", "nu_per_s", "qbar_C"];

/// Copper ion mass, kg.
pub const COPPER_ION_MASS: f64 = 63.546 * ATOMIC_MASS_UNIT;

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialPreset {
    pub name: String,
    /// `A_D`, s^3.
    pub prefactor: f64,
    /// Electron damping rate, 1/s.
    pub nu: f64,
    /// Mean ion charge, C.
    pub mean_charge: f64,
}

impl MaterialPreset {
    pub fn new(name: impl Into<String>, prefactor: f64, nu: f64, mean_charge: f64) -> Result<Self> {
        if !(prefactor.is_finite() && prefactor > 0.0) {
            return Err(Error::Construction(format!("Debye prefactor must be positive, got {prefactor:e}")));
        }
        if !(nu.is_finite() && nu >= 0.0) {
            return Err(Error::Construction(format!("damping rate must be non-negative, got {nu:e}")));
        }
        if !mean_charge.is_finite() {
            return Err(Error::Construction("mean ion charge must be finite".into()));
        }
        Ok(Self {
            name: name.into(),
            prefactor,
            nu,
            mean_charge,
        })
    }

    pub fn copper() -> Self {
        Self {
            name: "copper".into(),
            prefactor: 6.72e-41,
            nu: 4e13,
            mean_charge: ELEMENTARY_CHARGE,
        }
    }

    /// `(9 / A_D)^(1/3)`.
    pub fn debye_frequency(&self) -> f64 {
        (9.0 / self.prefactor).cbrt()
    }

    pub fn debye_spec(&self, mean_mass: f64) -> Result<DebyeSpec> {
        DebyeSpec::from_prefactor(self.prefactor, self.nu, self.mean_charge, mean_mass)
    }

    /// `q_bar^2 E0^2 / lambda^2` for a field amplitude `E0`.
    pub fn drive_group(&self, circuit: &CircuitParams, amplitude: f64) -> VoltsSquared {
        let lambda = circuit.line_charge().0;
        VoltsSquared((self.mean_charge * amplitude / lambda).powi(2))
    }

    /// Field amplitude that makes [`MaterialPreset::drive_group`] equal `group`.
    pub fn amplitude_for_group(&self, circuit: &CircuitParams, group: VoltsSquared) -> f64 {
        group.0.sqrt() * circuit.line_charge().0 / self.mean_charge.abs()
    }

    /// Reads presets from CSV with header `name,A_D_s3,nu_per_s,qbar_C`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Vec<Self>> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = r.headers()?.clone();
        if header.iter().ne(MATERIAL_CSV_HEADER) {
            return Err(Error::Construction(format!(
                "material table header must be `{}`, got `{}`",
                MATERIAL_CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut presets = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record?;
            let number = |i: usize| -> Result<f64> {
                record[i].parse().map_err(|_| {
                    Error::Construction(format!(
                        "material row {}: `{}` is not a number in column {}",
                        line + 1,
                        &record[i],
                        MATERIAL_CSV_HEADER[i]
                    ))
                })
            };
            presets.push(Self::new(&record[0], number(1)?, number(2)?, number(3)?)?);
        }
        Ok(presets)
    }

    pub fn write_csv<W: Write>(presets: &[Self], writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(MATERIAL_CSV_HEADER)?;
        for p in presets {
            w.write_record([
                p.name.clone(),
                format!("{:e}", p.prefactor),
                format!("{:e}", p.nu),
                format!("{:e}", p.mean_charge),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `R(omega) = m K(omega) / lambda^2` with `K(omega)` the continuum transform
/// and `m` the carrier mass. `omega = 0` is outside the domain.
pub fn resistance(spec: &DebyeSpec, circuit: &CircuitParams, omega: f64) -> Result<Ohms> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::domain("resistance", format!("frequency must be positive, got {omega:e}")));
    }
    let lambda = circuit.line_charge().0;
    Ok(Ohms(circuit.carrier_mass * spec.memory_kernel_transform(omega)? / (lambda * lambda)))
}

/// `I(omega) = (V + V_I) / (R + i omega L)`.
pub fn circuit_response(
    circuit: &CircuitParams,
    resistance: Ohms,
    voltage: Volts,
    noise_voltage: Volts,
    omega: f64,
) -> Result<ComplexAmperes> {
    if !(resistance.0.is_finite() && resistance.0 >= 0.0) {
        return Err(Error::domain("circuit_response", format!("resistance must be non-negative, got {}", resistance)));
    }
    if resistance.0 == 0.0 && omega == 0.0 {
        return Err(Error::SingularResponse("a lossless circuit has no DC response".into()));
    }
    let impedance = Complex64::new(resistance.0, omega * circuit.inductance().0);
    Ok(ComplexAmperes(Complex64::from(voltage.0 + noise_voltage.0) / impedance))
}

/// Per-mode weight `r_a = nu^4 / (omega^2 lambda^2)` of the equilibrium term.
pub fn mode_noise_weight(omega: f64, nu: f64, circuit: &CircuitParams) -> f64 {
    let lambda = circuit.line_charge().0;
    let r = nu * nu / (omega * lambda);
    r * r
}

/// Flat resistance `R = (1/2) sum m_a r_a` of a discrete bath, in V^2/J.
///
/// In the classical limit the equilibrium spectrum at zero lag is `4 R k_B T`.
pub fn flat_resistance(bath: &BathSpec, circuit: &CircuitParams) -> f64 {
    0.5 * bath
        .modes()
        .iter()
        .map(|m| m.mass * mode_noise_weight(m.omega, m.nu, circuit))
        .sum::<f64>()
}

/// Voltage-noise correlation `<V_I(t) V_I(t')>`: the equilibrium mode sum
/// plus `D(t) D(t') / lambda^2`.
pub fn voltage_noise_correlation(
    bath: &BathSpec,
    ctx: &ThermalContext,
    circuit: &CircuitParams,
    field: &FieldProtocol,
    t: f64,
    t_prime: f64,
) -> Result<VoltsSquared> {
    let lambda = circuit.line_charge().0;
    let equilibrium = equilibrium_discrete(bath, ctx, circuit, t - t_prime)?;
    let driven = drive_shift(bath, field, t) * drive_shift(bath, field, t_prime) / (lambda * lambda);
    Ok(VoltsSquared(equilibrium + driven))
}

/// `analytic_eta_correlation / lambda^2`, the same quantity by unit mapping.
pub fn voltage_noise_from_force(
    bath: &BathSpec,
    ctx: &ThermalContext,
    circuit: &CircuitParams,
    field: &FieldProtocol,
    t: f64,
    t_prime: f64,
) -> Result<VoltsSquared> {
    let lambda = circuit.line_charge().0;
    Ok(VoltsSquared(analytic_eta_correlation(bath, ctx, field, t, t_prime)? / (lambda * lambda)))
}

fn equilibrium_discrete(bath: &BathSpec, ctx: &ThermalContext, circuit: &CircuitParams, lag: f64) -> Result<f64> {
    bath.modes().iter().try_fold(0.0, |acc, m| {
        let f = thermal_factor(m.omega, ctx)?;
        let r = mode_noise_weight(m.omega, m.nu, circuit);
        Ok(acc + m.mass * HBAR * m.omega * r * f * (m.omega * lag).cos())
    })
}

/// Continuum form of the equilibrium term,
/// `hbar m_bar nu^4 A_D / lambda^2 int_0^omega_D omega f(omega) cos(omega tau) d omega`.
fn equilibrium_debye(spec: &DebyeSpec, ctx: &ThermalContext, circuit: &CircuitParams, lag: f64) -> Result<f64> {
    let lambda = circuit.line_charge().0;
    let wd = spec.debye_frequency;
    let pieces = oscillation_pieces(wd * lag.abs());
    let points: Vec<f64> = (0..=pieces).map(|k| wd * k as f64 / pieces as f64).collect();
    let integrand = |w: f64| match thermal_factor(w, ctx) {
        Ok(f) => w * f * (w * lag).cos(),
        Err(_) => f64::NAN,
    };
    let opts = QuadOptions::relative(1e-10).with_abs_tol(1e-14 * wd * wd);
    let integral = integrate_with_breaks(integrand, &points, opts)?.value;
    if !integral.is_finite() {
        return Err(Error::domain("noise_spectrum", "thermal factor undefined on the Debye band"));
    }
    Ok(HBAR * spec.mean_mass * spec.nu.powi(4) * spec.prefactor * integral / (lambda * lambda))
}

/// Number of break intervals for an integrand with `phase / pi` half waves.
fn oscillation_pieces(phase: f64) -> usize {
    ((phase / PI).ceil() as usize).clamp(8, 20_000)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseMethod {
    /// Adaptive quadrature over the band.
    Quadrature,
    /// `(pi/2) cos(Omega t)`, valid for `omega_D t >> 1` and `Omega << omega_D`.
    Asymptotic,
    /// Exact sine/cosine-integral expression.
    ClosedForm,
}

/// `int_0^omega_D (omega sin(omega t) - Omega sin(Omega t)) / (omega^2 - Omega^2) d omega`.
///
/// The integrand is continuous at `omega = Omega`, where it takes the value
/// `(sin(Omega t) + Omega t cos(Omega t)) / (2 Omega)`.
pub fn debye_response_integral(spec: &DebyeSpec, drive: f64, t: f64, method: ResponseMethod) -> Result<f64> {
    let wd = spec.debye_frequency;
    if !(drive > 0.0 && drive < wd) {
        return Err(Error::domain(
            "debye_response_integral",
            format!("drive frequency {drive:e} must lie inside (0, {wd:e})"),
        ));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::domain("debye_response_integral", format!("time must be non-negative, got {t:e}")));
    }
    match method {
        ResponseMethod::Asymptotic => Ok(FRAC_PI_2 * (drive * t).cos()),
        ResponseMethod::ClosedForm => response_closed_form(wd, drive, t),
        ResponseMethod::Quadrature => {
            if t == 0.0 {
                return Ok(0.0);
            }
            let pieces = oscillation_pieces(wd * t);
            let mut points: Vec<f64> = (0..=pieces).map(|k| wd * k as f64 / pieces as f64).collect();
            let at = points.partition_point(|&p| p < drive);
            if points[at] != drive {
                points.insert(at, drive);
            }
            let opts = QuadOptions::relative(1e-10).with_abs_tol(1e-13);
            Ok(integrate_with_breaks(|w| mode_drive_response(w, drive, t), &points, opts)?.value)
        }
    }
}

fn response_closed_form(wd: f64, drive: f64, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    let (lo, hi) = ((wd - drive) * t, (wd + drive) * t);
    let (s, c) = (drive * t).sin_cos();
    let si = sine_integral(lo)? + sine_integral(hi)?;
    let log = ((wd + drive) / (wd - drive)).ln();
    let ci = cosine_integral(lo)? - cosine_integral(hi)?;
    Ok(0.5 * c * si + 0.5 * s * (log + ci))
}

/// Bath description used by [`noise_spectrum`].
#[derive(Debug, Clone, Copy)]
pub enum SpectrumBath<'a> {
    Discrete(&'a BathSpec),
    Debye(&'a DebyeSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumMethod {
    /// Nested quadrature of the window average.
    Quadrature,
    /// Continuum closed form for the driven term (Debye baths only).
    ClosedForm,
}

impl SpectrumMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SpectrumMethod::Quadrature => "quadrature",
            SpectrumMethod::ClosedForm => "closed-form",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub taus: Vec<f64>,
    pub equilibrium: Vec<VoltsSquared>,
    pub driven: Vec<VoltsSquared>,
    /// Hz
    pub bandwidth: f64,
    pub method: SpectrumMethod,
}

impl SpectrumResult {
    pub fn total(&self) -> Vec<VoltsSquared> {
        self.equilibrium.iter().zip(&self.driven).map(|(&e, &d)| e + d).collect()
    }

    /// CSV with header `tau_s,equilibrium_V2,driven_V2,total_V2`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["tau_s", "equilibrium_V2", "driven_V2", "total_V2"])?;
        for (i, tau) in self.taus.iter().enumerate() {
            let (e, d) = (self.equilibrium[i].0, self.driven[i].0);
            w.write_record([format!("{tau:e}"), format!("{e:e}"), format!("{d:e}"), format!("{:e}", e + d)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Relative tolerance of the outer window quadrature.
pub const SPECTRUM_REL_TOL: f64 = 1e-8;

/// Generalized Nyquist spectrum at the lags `taus` for a bandwidth `df` (Hz).
pub fn noise_spectrum(
    source: SpectrumBath<'_>,
    ctx: &ThermalContext,
    circuit: &CircuitParams,
    field: &FieldProtocol,
    bandwidth: f64,
    taus: &[f64],
    method: SpectrumMethod,
) -> Result<SpectrumResult> {
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::Configuration(format!("bandwidth must be positive, got {bandwidth:e} Hz")));
    }
    let lambda = circuit.line_charge().0;
    let equilibrium = taus
        .iter()
        .map(|&tau| {
            Ok(VoltsSquared(match source {
                SpectrumBath::Discrete(bath) => equilibrium_discrete(bath, ctx, circuit, tau)?,
                SpectrumBath::Debye(spec) => equilibrium_debye(spec, ctx, circuit, tau)?,
            }))
        })
        .collect::<Result<Vec<_>>>()?;

    let driven = match (method, source) {
        (SpectrumMethod::ClosedForm, SpectrumBath::Debye(spec)) => {
            let material = MaterialPreset::new("", spec.prefactor, spec.nu, spec.mean_charge)?;
            taus.iter()
                .map(|&tau| driven_bath_spectrum_closed(&material, circuit, bandwidth, field.frequency, tau, field.amplitude))
                .collect()
        }
        (SpectrumMethod::ClosedForm, SpectrumBath::Discrete(_)) => {
            return Err(Error::Unsupported("the closed-form driven term needs a Debye continuum".into()));
        }
        (SpectrumMethod::Quadrature, _) => {
            if field.amplitude == 0.0 {
                vec![VoltsSquared(0.0); taus.len()]
            } else {
                let shift = |t: f64| -> f64 {
                    match source {
                        SpectrumBath::Discrete(bath) => drive_shift(bath, field, t),
                        SpectrumBath::Debye(spec) => debye_drive_shift(spec, field, t),
                    }
                };
                let top = match source {
                    SpectrumBath::Discrete(bath) => bath.max_frequency(),
                    SpectrumBath::Debye(spec) => spec.debye_frequency,
                };
                window_average(&shift, bandwidth, top.max(field.frequency), taus)?
                    .into_iter()
                    .map(|v| VoltsSquared(v / (lambda * lambda)))
                    .collect()
            }
        }
    };
    Ok(SpectrumResult {
        taus: taus.to_vec(),
        equilibrium,
        driven,
        bandwidth,
        method,
    })
}

/// Drive shift of the continuum bath,
/// `D(t) = E0 Omega q_bar nu^2 A_D I(t)` with `I` the response integral.
/// A drive at or above the cutoff falls back to band quadrature.
pub fn debye_drive_shift(spec: &DebyeSpec, field: &FieldProtocol, t: f64) -> f64 {
    if t <= 0.0 || field.amplitude == 0.0 {
        return 0.0;
    }
    let integral = if field.frequency < spec.debye_frequency {
        response_closed_form(spec.debye_frequency, field.frequency, t).unwrap_or(f64::NAN)
    } else {
        let pieces = oscillation_pieces(spec.debye_frequency * t);
        let points: Vec<f64> = (0..=pieces).map(|k| spec.debye_frequency * k as f64 / pieces as f64).collect();
        integrate_with_breaks(|w| mode_drive_response(w, field.frequency, t), &points, QuadOptions::relative(1e-10))
            .map(|r| r.value)
            .unwrap_or(f64::NAN)
    };
    field.amplitude * field.frequency * spec.mean_charge * spec.nu * spec.nu * spec.prefactor * integral
}

/// `df / (4 pi) int_0^{2 pi/df} D(t + tau) D(t) dt` for each lag.
fn window_average(shift: &dyn Fn(f64) -> f64, bandwidth: f64, top_frequency: f64, taus: &[f64]) -> Result<Vec<f64>> {
    let window = 2.0 * PI / bandwidth;
    let pieces = oscillation_pieces(top_frequency * window);
    let points: Vec<f64> = (0..=pieces).map(|k| window * k as f64 / pieces as f64).collect();
    let opts = QuadOptions::relative(SPECTRUM_REL_TOL);
    let norm = integrate_with_breaks(|t| shift(t).powi(2), &points, opts)?.value;
    if !norm.is_finite() {
        return Err(Error::domain("noise_spectrum", "drive shift is not finite on the window"));
    }
    taus.iter()
        .map(|&tau| {
            if !(tau.is_finite() && tau >= 0.0) {
                return Err(Error::domain("noise_spectrum", format!("lag must be non-negative, got {tau:e}")));
            }
            let value = if tau == 0.0 {
                norm
            } else {
                let opts = opts.with_abs_tol(SPECTRUM_REL_TOL * norm);
                integrate_with_breaks(|t| shift(t + tau) * shift(t), &points, opts)?.value
            };
            Ok(bandwidth / (4.0 * PI) * value)
        })
        .collect()
}

/// Closed-form driven-bath term
/// `S_DB = (pi^3 / 8) A_D^2 nu^4 df Omega cos(Omega tau) q_bar^2 E0^2 / lambda^2`,
/// evaluated literally.
pub fn driven_bath_spectrum_closed(
    material: &MaterialPreset,
    circuit: &CircuitParams,
    bandwidth: f64,
    drive: f64,
    tau: f64,
    amplitude: f64,
) -> VoltsSquared {
    let group = material.drive_group(circuit, amplitude).0;
    VoltsSquared(closed_prefactor(material) * bandwidth * drive * (drive * tau).cos() * group)
}

fn closed_prefactor(material: &MaterialPreset) -> f64 {
    PI.powi(3) / 8.0 * material.prefactor.powi(2) * material.nu.powi(4)
}

/// Driven term from the asymptotic drive shift
/// `D(t) ~ E0 Omega q_bar nu^2 A_D (pi/2) cos(Omega t)` averaged over whole
/// drive periods: `(pi^2 / 16) A_D^2 nu^4 Omega^2 cos(Omega tau) q_bar^2 E0^2 / lambda^2`.
pub fn driven_bath_spectrum_rederived(
    material: &MaterialPreset,
    circuit: &CircuitParams,
    drive: f64,
    tau: f64,
    amplitude: f64,
) -> VoltsSquared {
    let group = material.drive_group(circuit, amplitude).0;
    let prefactor = PI * PI / 16.0 * material.prefactor.powi(2) * material.nu.powi(4);
    VoltsSquared(prefactor * drive * drive * (drive * tau).cos() * group)
}

/// Window-averaged driven term
/// `(pi^3 / 8) A_D^2 nu^4 df (sin(Omega T) / T) q_bar^2 E0^2 / lambda^2`.
pub fn averaged_driven_noise(
    material: &MaterialPreset,
    circuit: &CircuitParams,
    bandwidth: f64,
    drive: f64,
    window: f64,
    amplitude: f64,
) -> Result<VoltsSquared> {
    if !(window.is_finite() && window > 0.0) {
        return Err(Error::domain("averaged_driven_noise", format!("window must be positive, got {window:e} s")));
    }
    let group = material.drive_group(circuit, amplitude).0;
    Ok(VoltsSquared(closed_prefactor(material) * bandwidth * (drive * window).sin() / window * group))
}

/// Classical Johnson-Nyquist level `4 R k_B T`.
pub fn classical_nyquist_level(resistance: Ohms, ctx: &ThermalContext) -> Result<VoltsSquaredPerHertz> {
    if !(resistance.0.is_finite() && resistance.0 >= 0.0) {
        return Err(Error::domain("classical_nyquist_level", format!("resistance must be non-negative, got {resistance}")));
    }
    if ctx.kt() <= 0.0 {
        return Err(Error::domain("classical_nyquist_level", "temperature must be positive"));
    }
    Ok(VoltsSquaredPerHertz(4.0 * resistance.0 * ctx.kt()))
}

/// Comparison baseline for the driven-bath level, V^2.
pub const BASELINE_S_DB: f64 = 1e-11;
/// Comparison baseline for the rms noise voltage, V.
pub const BASELINE_RMS: f64 = 3e-6;

/// Inputs of the copper driven-bath estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct CopperInputs {
    pub material: MaterialPreset,
    pub circuit: CircuitParams,
    /// Hz
    pub bandwidth: f64,
    /// rad/s
    pub drive: f64,
    /// `q_bar^2 E0^2 / lambda^2`.
    pub drive_group: VoltsSquared,
    /// Target of `sin(Omega T) / T`, 1/s.
    pub window_rate: f64,
}

impl Default for CopperInputs {
    fn default() -> Self {
        Self {
            material: MaterialPreset::copper(),
            circuit: CircuitParams::copper_wire(),
            bandwidth: 1e12,
            drive: 1e12,
            drive_group: VoltsSquared(1.0),
            window_rate: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CopperReport {
    pub inputs: CopperInputs,
    pub debye_frequency: f64,
    pub amplitude: f64,
    /// Closed form at `tau = 0`.
    pub closed_form: VoltsSquared,
    /// Nested quadrature of the window average at `tau = 0`.
    pub quadrature: VoltsSquared,
    pub closed_over_quadrature: f64,
    /// [`driven_bath_spectrum_rederived`] at `tau = 0`.
    pub rederived: VoltsSquared,
    pub rederived_over_quadrature: f64,
    pub rms: Volts,
    /// Averaging window `T` with `sin(Omega T) / T` closest to the target rate.
    pub window: f64,
    pub averaged: VoltsSquared,
    pub averaged_rms: Volts,
}

impl CopperReport {
    pub fn closed_vs_baseline(&self) -> f64 {
        self.closed_form.0 / BASELINE_S_DB
    }

    pub fn averaged_vs_baseline(&self) -> f64 {
        self.averaged.0 / BASELINE_S_DB
    }

    pub fn averaged_rms_vs_baseline(&self) -> f64 {
        self.averaged_rms.0 / BASELINE_RMS
    }

    /// The averaged level read with the drive group in volts instead of V^2.
    pub fn averaged_volts_reading(&self) -> Volts {
        Volts(self.averaged.0)
    }
}

/// Window `T` near `1 / rate` with `sin(Omega T) = 1`, so that
/// `sin(Omega T) / T` is within `pi / Omega` of `rate`.
pub fn window_for_rate(drive: f64, rate: f64) -> Result<f64> {
    if !(drive > 0.0 && rate > 0.0 && rate < drive) {
        return Err(Error::domain("window_for_rate", format!("need 0 < rate {rate:e} < drive {drive:e}")));
    }
    let k = ((drive / rate - FRAC_PI_2) / (2.0 * PI)).round().max(0.0);
    Ok((FRAC_PI_2 + 2.0 * PI * k) / drive)
}

/// Runs the copper driven-bath estimate.
pub fn copper_estimate(inputs: &CopperInputs) -> Result<CopperReport> {
    let CopperInputs {
        material,
        circuit,
        bandwidth,
        drive,
        drive_group,
        window_rate,
    } = inputs;
    let amplitude = material.amplitude_for_group(circuit, *drive_group);
    let closed_form = driven_bath_spectrum_closed(material, circuit, *bandwidth, *drive, 0.0, amplitude);
    let spec = material.debye_spec(COPPER_ION_MASS)?;
    let field = FieldProtocol::new(amplitude, *drive)?;
    let quadrature = noise_spectrum(
        SpectrumBath::Debye(&spec),
        &ThermalContext::kelvin(300.0)?,
        circuit,
        &field,
        *bandwidth,
        &[0.0],
        SpectrumMethod::Quadrature,
    )?
    .driven[0];
    let rederived = driven_bath_spectrum_rederived(material, circuit, *drive, 0.0, amplitude);
    let window = window_for_rate(*drive, *window_rate)?;
    let averaged = averaged_driven_noise(material, circuit, *bandwidth, *drive, window, amplitude)?;
    Ok(CopperReport {
        inputs: inputs.clone(),
        debye_frequency: material.debye_frequency(),
        amplitude,
        closed_form,
        quadrature,
        closed_over_quadrature: closed_form.0 / quadrature.0,
        rederived,
        rederived_over_quadrature: rederived.0 / quadrature.0,
        rms: Volts(closed_form.0.sqrt()),
        window,
        averaged,
        averaged_rms: Volts(averaged.0.max(0.0).sqrt()),
    })
}
