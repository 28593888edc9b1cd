//! Charged harmonic-oscillator baths and their kernels.
//!
//! A bath mode `alpha` has mass `m`, frequency `omega`, coupling `nu` (in
//! units of frequency) and charge `q`. The particle feels the force
//! `sum m nu^2 x_alpha`, which after eliminating the bath gives
//!
//! * memory kernel `K(t) = sum m nu^4 / omega^2 cos(omega t)` (kg/s^2),
//! * force-delay kernel `M(t) = sum q nu^2 / omega^2 cos(omega t)` (C).
//!
//! Both kernels carry the step `theta(t)`: they vanish for `t < 0`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::{Read, Write};
use std::path::Path;

use crate::{Error, Result};

pub const BATH_CSV_HEADER: [&str; 4] = ["mass_kg", "omega_rad_s", "nu_rad_s", "charge_C"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorMode {
    /// kg
    pub mass: f64,
    /// rad/s
    pub omega: f64,
    /// rad/s
    pub nu: f64,
    /// C
    pub charge: f64,
}

impl OscillatorMode {
    pub fn new(mass: f64, omega: f64, nu: f64, charge: f64) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::Construction(format!("mode mass must be positive, got {mass:e}")));
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::Construction(format!("mode frequency must be positive, got {omega:e}")));
        }
        if !(nu.is_finite() && nu >= 0.0) {
            return Err(Error::Construction(format!("mode coupling must be non-negative, got {nu:e}")));
        }
        if !charge.is_finite() {
            return Err(Error::Construction("mode charge must be finite".into()));
        }
        Ok(Self { mass, omega, nu, charge })
    }

    /// Weight of this mode in `K`: `m nu^4 / omega^2`.
    #[inline]
    pub fn memory_weight(&self) -> f64 {
        let r = self.nu * self.nu / self.omega;
        self.mass * r * r
    }

    /// Weight of this mode in `M`: `q nu^2 / omega^2`.
    #[inline]
    pub fn delay_weight(&self) -> f64 {
        let r = self.nu / self.omega;
        self.charge * r * r
    }
}

/// Debye-continuum description of a bath: density of states
/// `rho(omega) = A_D omega^2` on `[0, omega_D]`, constant coupling `nu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DebyeSpec {
    pub debye_frequency: f64,
    /// `A_D`, s^3.
    pub prefactor: f64,
    pub nu: f64,
    pub mean_charge: f64,
    pub mean_mass: f64,
}

impl DebyeSpec {
    /// Debye bath with the normalised prefactor `A_D = 9 / omega_D^3`.
    pub fn new(debye_frequency: f64, nu: f64, mean_charge: f64, mean_mass: f64) -> Result<Self> {
        if !(debye_frequency.is_finite() && debye_frequency > 0.0) {
            return Err(Error::Construction(format!(
                "Debye frequency must be positive, got {debye_frequency:e}"
            )));
        }
        Self::with_prefactor(debye_frequency, 9.0 / debye_frequency.powi(3), nu, mean_charge, mean_mass)
    }

    /// Debye bath given only `A_D`; the cutoff is derived as `(9 / A_D)^(1/3)`.
    pub fn from_prefactor(prefactor: f64, nu: f64, mean_charge: f64, mean_mass: f64) -> Result<Self> {
        if !(prefactor.is_finite() && prefactor > 0.0) {
            return Err(Error::Construction(format!("Debye prefactor must be positive, got {prefactor:e}")));
        }
        Self::with_prefactor((9.0 / prefactor).cbrt(), prefactor, nu, mean_charge, mean_mass)
    }

    /// Explicit cutoff and prefactor (material presets may break `A_D omega_D^3 = 9`).
    pub fn with_prefactor(
        debye_frequency: f64,
        prefactor: f64,
        nu: f64,
        mean_charge: f64,
        mean_mass: f64,
    ) -> Result<Self> {
        if !(debye_frequency.is_finite() && debye_frequency > 0.0) {
            return Err(Error::Construction(format!(
                "Debye frequency must be positive, got {debye_frequency:e}"
            )));
        }
        if !(prefactor.is_finite() && prefactor > 0.0) {
            return Err(Error::Construction(format!("Debye prefactor must be positive, got {prefactor:e}")));
        }
        if !(nu.is_finite() && nu >= 0.0) {
            return Err(Error::Construction(format!("coupling must be non-negative, got {nu:e}")));
        }
        if !(mean_mass.is_finite() && mean_mass > 0.0) {
            return Err(Error::Construction(format!("mean ion mass must be positive, got {mean_mass:e}")));
        }
        if !mean_charge.is_finite() {
            return Err(Error::Construction("mean ion charge must be finite".into()));
        }
        Ok(Self {
            debye_frequency,
            prefactor,
            nu,
            mean_charge,
            mean_mass,
        })
    }

    /// Continuum `K(0) = m nu^4 A_D omega_D`.
    pub fn memory_kernel_at_zero(&self) -> f64 {
        self.mean_mass * self.nu.powi(4) * self.prefactor * self.debye_frequency
    }

    /// Continuum `M(0) = q nu^2 A_D omega_D`.
    pub fn delay_kernel_at_zero(&self) -> f64 {
        self.mean_charge * self.nu * self.nu * self.prefactor * self.debye_frequency
    }

    /// Continuum kernel `m nu^4 A_D int_0^omega_D cos(omega t) d omega`.
    pub fn continuum_memory_kernel(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        self.memory_kernel_at_zero() * sinc(self.debye_frequency * t)
    }

    /// Continuum kernel `q nu^2 A_D int_0^omega_D cos(omega t) d omega`.
    pub fn continuum_delay_kernel(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        self.delay_kernel_at_zero() * sinc(self.debye_frequency * t)
    }

    /// One-sided cosine transform of the continuum memory kernel,
    /// `Re int_0^inf K(t) e^{i omega t} dt`.
    ///
    /// The continuum kernel is a flat band, so the transform is
    /// `m nu^4 A_D pi/2` inside `[0, omega_D)`, half of that at the band edge
    /// and zero above it.
    pub fn memory_kernel_transform(&self, omega: f64) -> Result<f64> {
        if !(omega.is_finite() && omega >= 0.0) {
            return Err(Error::domain(
                "memory_kernel_transform",
                format!("frequency must be non-negative, got {omega:e}"),
            ));
        }
        let flat = self.mean_mass * self.nu.powi(4) * self.prefactor * FRAC_PI_2;
        Ok(if omega < self.debye_frequency {
            flat
        } else if omega == self.debye_frequency {
            0.5 * flat
        } else {
            0.0
        })
    }

    /// Discretise into `n` modes.
    ///
    /// The band is cut into `n` cells of equal width `d = omega_D / n` with the
    /// mode at each cell midpoint `omega_k`. The cell's share of the density of
    /// states is folded into the mode:
    ///
    /// * `m_k = m_bar * A_D * omega_k^2 * d`
    /// * `q_k = q_bar * A_D * omega_k^2 * d`
    /// * `nu_k = nu`
    ///
    /// so that `K` and `M` become the midpoint rule for
    /// `A_D int cos(omega t) d omega`. In particular `K(0)` and `M(0)` equal the
    /// continuum values for every `n`.
    pub fn discretize(&self, n: usize) -> Result<BathSpec> {
        if n == 0 {
            return Err(Error::Construction("a discretised bath needs at least one mode".into()));
        }
        let width = self.debye_frequency / n as f64;
        let modes = (0..n)
            .map(|k| {
                let omega = (k as f64 + 0.5) * width;
                let dos = self.prefactor * omega * omega * width;
                OscillatorMode::new(self.mean_mass * dos, omega, self.nu, self.mean_charge * dos)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut bath = BathSpec::new(modes)?;
        bath.provenance = Some(*self);
        Ok(bath)
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// A finite bath, modes sorted by strictly increasing frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct BathSpec {
    modes: Vec<OscillatorMode>,
    provenance: Option<DebyeSpec>,
}

impl BathSpec {
    pub fn new(modes: Vec<OscillatorMode>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::Construction("bath must contain at least one mode".into()));
        }
        if let Some(w) = modes.windows(2).find(|w| w[1].omega <= w[0].omega) {
            return Err(Error::Construction(format!(
                "bath frequencies must be strictly increasing ({:e} followed by {:e})",
                w[0].omega, w[1].omega
            )));
        }
        Ok(Self { modes, provenance: None })
    }

    pub fn single(mode: OscillatorMode) -> Self {
        Self {
            modes: vec![mode],
            provenance: None,
        }
    }

    pub fn modes(&self) -> &[OscillatorMode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// The Debye description this bath was discretised from, if any.
    pub fn provenance(&self) -> Option<&DebyeSpec> {
        self.provenance.as_ref()
    }

    pub fn max_frequency(&self) -> f64 {
        self.modes[self.modes.len() - 1].omega
    }

    pub fn min_frequency(&self) -> f64 {
        self.modes[0].omega
    }

    /// Largest step that resolves the fastest mode, `pi / (10 omega_max)`.
    pub fn max_time_step(&self) -> f64 {
        PI / (10.0 * self.max_frequency())
    }

    pub fn check_time_step(&self, dt: f64) -> Result<()> {
        let limit = self.max_time_step();
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::Configuration(format!(
                "time step {dt:e} s under-resolves the fastest bath mode; need dt <= {limit:e} s"
            )));
        }
        Ok(())
    }

    /// `K(t)`, zero for `t < 0`. Non-finite `t` propagates as NaN.
    pub fn memory_kernel(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        self.memory_kernel_even(t)
    }

    /// `M(t)`, zero for `t < 0`. Temperature does not enter.
    pub fn delay_kernel(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        self.modes.iter().map(|m| m.delay_weight() * (m.omega * t).cos()).sum()
    }

    /// The cosine sum of `K` without the step, i.e. its even extension.
    pub(crate) fn memory_kernel_even(&self, t: f64) -> f64 {
        self.modes.iter().map(|m| m.memory_weight() * (m.omega * t).cos()).sum()
    }

    /// `K` and `M` sampled on `[0, t_max]` with step `dt`.
    pub fn kernel_table(&self, t_max: f64, dt: f64) -> Result<KernelTable> {
        let grid = crate::TimeGrid::spanning(t_max, dt)?;
        self.check_time_step(dt)?;
        let memory = grid.times().map(|t| self.memory_kernel(t)).collect();
        let delay = grid.times().map(|t| self.delay_kernel(t)).collect();
        Ok(KernelTable { grid, memory, delay })
    }

    /// Transform of `K` via the continuum this bath was built from.
    ///
    /// A finite mode sum has a line spectrum; without a continuum description
    /// any smooth value would depend on an arbitrary broadening, so this is
    /// refused.
    pub fn memory_kernel_transform(&self, omega: f64) -> Result<f64> {
        match &self.provenance {
            Some(spec) => spec.memory_kernel_transform(omega),
            None => Err(Error::Unsupported(
                "kernel transform of a discrete bath without continuum provenance".into(),
            )),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(BATH_CSV_HEADER)?;
        for m in &self.modes {
            w.write_record([
                format!("{:e}", m.mass),
                format!("{:e}", m.omega),
                format!("{:e}", m.nu),
                format!("{:e}", m.charge),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = r.headers()?.clone();
        if header.iter().ne(BATH_CSV_HEADER) {
            return Err(Error::Construction(format!(
                "bath CSV header must be `{}`, found `{}`",
                BATH_CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut modes = Vec::new();
        for (row, record) in r.records().enumerate() {
            let record = record?;
            let field = |i: usize| -> Result<f64> {
                record[i].parse::<f64>().map_err(|e| {
                    Error::Construction(format!("row {}: column {}: {e}", row + 1, BATH_CSV_HEADER[i]))
                })
            };
            modes.push(OscillatorMode::new(field(0)?, field(1)?, field(2)?, field(3)?)?);
        }
        Self::new(modes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// `K` and `M` tabulated on a uniform grid starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    pub grid: crate::TimeGrid,
    pub memory: Vec<f64>,
    pub delay: Vec<f64>,
}

impl KernelTable {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t_s", "memory_kernel_kg_s2", "delay_kernel_C"])?;
        for (i, (k, m)) in self.memory.iter().zip(&self.delay).enumerate() {
            w.write_record([
                format!("{:e}", self.grid.time(i)),
                format!("{k:e}"),
                format!("{m:e}"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mode(m: f64, w: f64, nu: f64, q: f64) -> OscillatorMode {
        OscillatorMode::new(m, w, nu, q).unwrap()
    }

    #[test]
    fn single_mode_kernels() {
        let bath = BathSpec::single(mode(1.0, 4.0, 2.0, 0.0));
        assert_eq!(bath.memory_kernel(0.0), 1.0);
        let period = 2.0 * PI / 4.0;
        assert!((bath.memory_kernel(period) - 1.0).abs() < 1e-15);
        assert_eq!(bath.memory_kernel(-0.1), 0.0);

        let bath = BathSpec::single(mode(1.0, 3.0, 3.0, 1.0));
        assert_eq!(bath.delay_kernel(0.0), 1.0);
    }

    #[test]
    fn rejects_bad_modes_and_orderings() {
        assert!(OscillatorMode::new(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(OscillatorMode::new(1.0, -1.0, 1.0, 0.0).is_err());
        assert!(OscillatorMode::new(1.0, 1.0, -1.0, 0.0).is_err());
        assert!(BathSpec::new(vec![]).is_err());
        assert!(BathSpec::new(vec![mode(1.0, 2.0, 1.0, 0.0), mode(1.0, 2.0, 1.0, 0.0)]).is_err());
        assert!(DebyeSpec::new(1.0, 1.0, 1.0, 1.0).unwrap().discretize(0).is_err());
        assert!(DebyeSpec::new(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn one_mode_debye_bath_is_exact_at_zero() {
        let spec = DebyeSpec::new(3.0e13, 2.0e13, 1.6e-19, 1.0e-25).unwrap();
        let bath = spec.discretize(1).unwrap();
        let k0 = spec.mean_mass * spec.nu.powi(4) * spec.prefactor * spec.debye_frequency;
        assert!((bath.memory_kernel(0.0) - k0).abs() <= 1e-14 * k0);
        assert!((spec.prefactor * spec.debye_frequency.powi(3) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn discretisation_is_deterministic_and_sorted() {
        let spec = DebyeSpec::new(5e13, 1e13, 1e-19, 1e-25).unwrap();
        let a = spec.discretize(97).unwrap();
        let b = spec.discretize(97).unwrap();
        assert_eq!(a, b);
        assert!(a.modes().windows(2).all(|w| w[0].omega < w[1].omega));
        assert_eq!(a.provenance(), Some(&spec));
    }

    #[test]
    fn kernel_table_matches_pointwise_calls() {
        let bath = DebyeSpec::new(1e13, 1e13, 1e-19, 1e-25).unwrap().discretize(16).unwrap();
        let dt = bath.max_time_step();
        let table = bath.kernel_table(50.0 * dt, dt).unwrap();
        assert_eq!(table.memory.len(), 51);
        for (i, t) in table.grid.times().enumerate() {
            assert_eq!(table.memory[i], bath.memory_kernel(t));
            assert_eq!(table.delay[i], bath.delay_kernel(t));
        }
        let single = bath.kernel_table(0.0, dt).unwrap();
        assert_eq!(single.memory, vec![bath.memory_kernel(0.0)]);
        assert_eq!(single.delay, vec![bath.delay_kernel(0.0)]);
    }

    #[test]
    fn under_resolved_table_names_required_step() {
        let bath = BathSpec::single(mode(1.0, 10.0, 1.0, 0.0));
        let err = bath.kernel_table(1.0, 0.1).unwrap_err().to_string();
        assert!(err.contains(&format!("{:e}", PI / 100.0)), "{err}");
    }

    #[test]
    fn transform_is_flat_inside_band() {
        let spec = DebyeSpec::new(2e13, 1e13, 1e-19, 1e-25).unwrap();
        let flat = spec.mean_mass * spec.nu.powi(4) * spec.prefactor * FRAC_PI_2;
        assert_eq!(spec.memory_kernel_transform(1e13).unwrap(), flat);
        assert_eq!(spec.memory_kernel_transform(3e13).unwrap(), 0.0);
        assert!(spec.memory_kernel_transform(-1.0).is_err());

        let doubled = DebyeSpec { nu: 2.0 * spec.nu, ..spec };
        let ratio = doubled.memory_kernel_transform(1e13).unwrap() / flat;
        assert!((ratio - 16.0).abs() < 1e-12);

        let discrete = BathSpec::new(spec.discretize(8).unwrap().modes().to_vec()).unwrap();
        assert!(matches!(discrete.memory_kernel_transform(1e13), Err(Error::Unsupported(_))));
        assert_eq!(spec.discretize(8).unwrap().memory_kernel_transform(1e13).unwrap(), flat);
    }

    #[test]
    fn csv_header_is_checked() {
        let err = BathSpec::read_csv("mass,omega,nu,q\n1,1,1,1\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("mass_kg,omega_rad_s,nu_rad_s,charge_C"));
    }
}
