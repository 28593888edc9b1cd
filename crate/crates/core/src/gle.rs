//! Driven generalized Langevin equation and its microscopic oracle.
//!
//! The GLE integrated here is
//!
//! ```text
//! m x'' = F(x) + q_eff E(t) + eta(t) - int_0^t K(t - s) x'(s) ds
//! ```
//!
//! with `E(t) = E0 sin(Omega t)` for `t >= 0`. The microscopic integrator
//! evolves the particle together with every bath mode and is exact up to the
//! Runge-Kutta truncation error. With `x(0) = 0`, the counterterm on and
//! `q_eff = q + delta_q(bath)` the two describe the same motion.

use std::io::Write;

use crate::bath::BathSpec;
use crate::noise::{BathInitialState, NoisePath, Regime};
use crate::{Error, Result, TimeGrid};

/// `E(t) = E0 sin(Omega t)` switched on at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldProtocol {
    /// V/m
    pub amplitude: f64,
    /// rad/s
    pub frequency: f64,
}

impl FieldProtocol {
    pub fn new(amplitude: f64, frequency: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::Configuration(format!("field amplitude must be non-negative, got {amplitude:e}")));
        }
        if !(frequency.is_finite() && frequency > 0.0) {
            return Err(Error::Configuration(format!("field frequency must be positive, got {frequency:e}")));
        }
        Ok(Self { amplitude, frequency })
    }

    /// No field. The frequency is irrelevant and set to 1 rad/s.
    pub fn off() -> Self {
        Self {
            amplitude: 0.0,
            frequency: 1.0,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        field_value(self, t)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.amplitude * factor, self.frequency)
    }
}

pub fn field_value(protocol: &FieldProtocol, t: f64) -> f64 {
    if t < 0.0 {
        0.0
    } else {
        protocol.amplitude * (protocol.frequency * t).sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleParams {
    /// kg
    pub mass: f64,
    /// C
    pub charge: f64,
    /// Coefficient of `E(t)` in the GLE, C.
    pub effective_charge: f64,
}

impl ParticleParams {
    /// `q_eff` defaults to `q`.
    pub fn new(mass: f64, charge: f64) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::Construction(format!("particle mass must be positive, got {mass:e}")));
        }
        if !charge.is_finite() {
            return Err(Error::Construction("particle charge must be finite".into()));
        }
        Ok(Self {
            mass,
            charge,
            effective_charge: charge,
        })
    }

    pub fn with_effective_charge(self, effective_charge: f64) -> Self {
        Self {
            effective_charge,
            ..self
        }
    }

    /// `q_eff = q + delta_q(bath)`, the coefficient the microscopic model implies.
    pub fn renormalized(self, bath: &BathSpec) -> Self {
        self.with_effective_charge(self.charge + delta_q(bath))
    }
}

/// Charge renormalization `M(0) = sum q nu^2 / omega^2`.
pub fn delta_q(bath: &BathSpec) -> f64 {
    bath.modes().iter().map(|m| m.delay_weight()).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Free,
    /// `V = m omega0^2 x^2 / 2`.
    Harmonic { omega0: f64 },
    /// Force `-dV/dx` tabulated on strictly increasing positions and
    /// interpolated linearly; held constant beyond the table.
    TabulatedForce { positions: Vec<f64>, forces: Vec<f64> },
}

impl Potential {
    pub fn harmonic(omega0: f64) -> Result<Self> {
        if !(omega0.is_finite() && omega0 >= 0.0) {
            return Err(Error::Construction(format!("harmonic frequency must be non-negative, got {omega0:e}")));
        }
        Ok(Potential::Harmonic { omega0 })
    }

    pub fn tabulated(positions: Vec<f64>, forces: Vec<f64>) -> Result<Self> {
        if positions.len() < 2 || positions.len() != forces.len() {
            return Err(Error::Construction(format!(
                "tabulated force needs at least 2 matching points, got {} positions and {} forces",
                positions.len(),
                forces.len()
            )));
        }
        if positions.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) || positions.iter().chain(&forces).any(|v| !v.is_finite()) {
            return Err(Error::Construction("tabulated force positions must be finite and strictly increasing".into()));
        }
        Ok(Potential::TabulatedForce { positions, forces })
    }

    pub fn is_quadratic(&self) -> bool {
        !matches!(self, Potential::TabulatedForce { .. })
    }

    /// `-dV/dx` at `x` for a particle of mass `mass`.
    pub fn force(&self, mass: f64, x: f64) -> f64 {
        match self {
            Potential::Free => 0.0,
            Potential::Harmonic { omega0 } => -mass * omega0 * omega0 * x,
            Potential::TabulatedForce { positions, forces } => {
                let n = positions.len();
                if x <= positions[0] {
                    return forces[0];
                }
                if x >= positions[n - 1] {
                    return forces[n - 1];
                }
                let i = positions.partition_point(|&p| p <= x) - 1;
                let s = (x - positions[i]) / (positions[i + 1] - positions[i]);
                forces[i] + s * (forces[i + 1] - forces[i])
            }
        }
    }

    /// `V(x)` with `V(positions[0]) = 0` for tabulated forces.
    pub fn energy(&self, mass: f64, x: f64) -> f64 {
        match self {
            Potential::Free => 0.0,
            Potential::Harmonic { omega0 } => 0.5 * mass * omega0 * omega0 * x * x,
            Potential::TabulatedForce { positions, .. } => {
                let x0 = positions[0];
                let mut work = 0.0;
                let mut a = x0.min(x);
                let b = x0.max(x);
                let inner: Vec<f64> = positions.iter().copied().filter(|&p| p > a && p < b).collect();
                for p in inner {
                    work += 0.5 * (self.force(mass, a) + self.force(mass, p)) * (p - a);
                    a = p;
                }
                work += 0.5 * (self.force(mass, a) + self.force(mass, b)) * (b - a);
                if x >= x0 {
                    -work
                } else {
                    work
                }
            }
        }
    }
}

/// Bath coordinates recorded by the microscopic integrator, indexed
/// `[step][mode]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BathTrajectory {
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    /// m
    pub x: Vec<f64>,
    /// m/s
    pub v: Vec<f64>,
    pub bath: Option<BathTrajectory>,
}

impl Trajectory {
    /// CSV with header `t_s,x_m,v_m_s`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t_s", "x_m", "v_m_s"])?;
        for (i, t) in self.grid.times().enumerate() {
            w.write_record([format!("{t:e}"), format!("{:e}", self.x[i]), format!("{:e}", self.v[i])])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn max_abs_x(&self) -> f64 {
        self.x.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |x - other.x| / max |x|`.
    pub fn max_relative_deviation(&self, other: &Trajectory) -> Result<f64> {
        if self.x.len() != other.x.len() {
            return Err(Error::Shape(format!(
                "trajectories have {} and {} points",
                self.x.len(),
                other.x.len()
            )));
        }
        let dev = self.x.iter().zip(&other.x).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let scale = self.max_abs_x();
        Ok(if scale == 0.0 { dev } else { dev / scale })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GleScheme {
    /// Implicit trapezoidal rule with a trapezoidal friction convolution.
    /// Second order, and energy-conserving for a harmonic oscillator.
    Trapezoidal,
    /// Fourth-order Adams predictor-corrector with a Gregory-corrected
    /// friction convolution.
    Adams4,
    /// Sixth-order variant of [`GleScheme::Adams4`].
    #[default]
    Adams6,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GleOptions {
    pub scheme: GleScheme,
}

/// Integrates the GLE with the default [`GleOptions`].
#[allow(clippy::too_many_arguments)]
pub fn integrate_gle(
    particle: &ParticleParams,
    potential: &Potential,
    bath: &BathSpec,
    noise: &NoisePath,
    field: &FieldProtocol,
    grid: TimeGrid,
    x0: f64,
    v0: f64,
) -> Result<Trajectory> {
    integrate_gle_with(particle, potential, bath, noise, field, grid, x0, v0, GleOptions::default())
}

const MAX_CORRECTIONS: usize = 60;

#[allow(clippy::too_many_arguments)]
pub fn integrate_gle_with(
    particle: &ParticleParams,
    potential: &Potential,
    bath: &BathSpec,
    noise: &NoisePath,
    field: &FieldProtocol,
    grid: TimeGrid,
    x0: f64,
    v0: f64,
    options: GleOptions,
) -> Result<Trajectory> {
    if noise.grid != grid || noise.values.len() != grid.len() {
        return Err(Error::Configuration(
            "noise path is not sampled on the integration grid".into(),
        ));
    }
    bath.check_time_step(grid.dt())?;
    if noise.regime == Some(Regime::QuantumWigner) && !potential.is_quadratic() {
        return Err(Error::Unsupported(
            "Wigner-sampled noise only represents quantum statistics for quadratic potentials; \
             use a free or harmonic potential"
                .into(),
        ));
    }
    if !(x0.is_finite() && v0.is_finite()) {
        return Err(Error::Configuration("initial conditions must be finite".into()));
    }
    let n = grid.len();
    let kernel: Vec<f64> = grid.times().map(|t| bath.memory_kernel(t)).collect();
    let mut gle = Gle {
        particle,
        potential,
        noise: &noise.values,
        kernel,
        drive: grid.times().map(|t| particle.effective_charge * field.value(t)).collect(),
        h: grid.dt(),
        x: Vec::with_capacity(n),
        v: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
    };
    gle.x.push(x0);
    gle.v.push(v0);
    gle.a.push(gle.acceleration(0, x0, 0.0));
    match options.scheme {
        GleScheme::Trapezoidal => gle.run_trapezoidal(n),
        GleScheme::Adams4 => gle.run_adams(n, &ADAMS4),
        GleScheme::Adams6 => gle.run_adams(n, &ADAMS6),
    }
    let Gle { x, v, .. } = gle;
    if x.iter().chain(&v).any(|s| !s.is_finite()) {
        return Err(Error::Configuration("GLE integration produced non-finite values".into()));
    }
    Ok(Trajectory { grid, x, v, bath: None })
}

struct Gle<'a> {
    particle: &'a ParticleParams,
    potential: &'a Potential,
    noise: &'a [f64],
    kernel: Vec<f64>,
    drive: Vec<f64>,
    h: f64,
    x: Vec<f64>,
    v: Vec<f64>,
    a: Vec<f64>,
}

/// Coefficients of one Adams predictor-corrector family of order `p`.
struct Tableau {
    order: usize,
    /// Adams-Bashforth weights on `f_n, f_{n-1}, ..`.
    predictor: &'static [f64],
    /// Adams-Moulton weights on `f_{n+1}, f_n, ..`.
    corrector: &'static [f64],
    /// Left end correction added to the trapezoid weights of the friction
    /// convolution; mirrored at the right end.
    gregory: &'static [f64],
    /// Start block: row `k - 1` integrates over `[0, k h]` from `f_0..f_{p-1}`.
    start: &'static [&'static [f64]],
}

const ADAMS4: Tableau = Tableau {
    order: 4,
    predictor: &[55.0 / 24.0, -59.0 / 24.0, 37.0 / 24.0, -9.0 / 24.0],
    corrector: &[9.0 / 24.0, 19.0 / 24.0, -5.0 / 24.0, 1.0 / 24.0],
    gregory: &[-1.0 / 8.0, 1.0 / 6.0, -1.0 / 24.0],
    start: &[
        &[9.0 / 24.0, 19.0 / 24.0, -5.0 / 24.0, 1.0 / 24.0],
        &[1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0, 0.0],
        &[3.0 / 8.0, 9.0 / 8.0, 9.0 / 8.0, 3.0 / 8.0],
    ],
};

const ADAMS6: Tableau = Tableau {
    order: 6,
    predictor: &[
        4277.0 / 1440.0,
        -7923.0 / 1440.0,
        9982.0 / 1440.0,
        -7298.0 / 1440.0,
        2877.0 / 1440.0,
        -475.0 / 1440.0,
    ],
    corrector: &[
        475.0 / 1440.0,
        1427.0 / 1440.0,
        -798.0 / 1440.0,
        482.0 / 1440.0,
        -173.0 / 1440.0,
        27.0 / 1440.0,
    ],
    gregory: &[-49.0 / 288.0, 77.0 / 240.0, -7.0 / 30.0, 73.0 / 720.0, -3.0 / 160.0],
    start: &[
        &[475.0 / 1440.0, 1427.0 / 1440.0, -798.0 / 1440.0, 482.0 / 1440.0, -173.0 / 1440.0, 27.0 / 1440.0],
        &[28.0 / 90.0, 129.0 / 90.0, 14.0 / 90.0, 14.0 / 90.0, -6.0 / 90.0, 1.0 / 90.0],
        &[51.0 / 160.0, 219.0 / 160.0, 114.0 / 160.0, 114.0 / 160.0, -21.0 / 160.0, 3.0 / 160.0],
        &[14.0 / 45.0, 64.0 / 45.0, 24.0 / 45.0, 64.0 / 45.0, 14.0 / 45.0, 0.0],
        &[95.0 / 288.0, 375.0 / 288.0, 250.0 / 288.0, 250.0 / 288.0, 375.0 / 288.0, 95.0 / 288.0],
    ],
};

impl Gle<'_> {
    /// Acceleration at step `i` given the friction integral there.
    fn acceleration(&self, i: usize, x: f64, friction: f64) -> f64 {
        let m = self.particle.mass;
        (self.potential.force(m, x) + self.drive[i] + self.noise[i] - friction) / m
    }

    /// `K(|j| h)`: the even extension is only used by the start block.
    fn k(&self, j: isize) -> f64 {
        self.kernel[j.unsigned_abs()]
    }

    /// Trapezoid weight of node `j` out of `0..=n`.
    fn trapezoid_weight(j: usize, n: usize) -> f64 {
        if j == 0 || j == n {
            0.5
        } else {
            1.0
        }
    }

    /// Gregory weight of node `j` out of `0..=n`, `n >= gregory.len() - 1`.
    fn gregory_weight(gregory: &[f64], j: usize, n: usize) -> f64 {
        let mut w = Self::trapezoid_weight(j, n);
        if let Some(c) = gregory.get(j) {
            w += c;
        }
        if let Some(c) = gregory.get(n - j) {
            w += c;
        }
        w
    }

    /// Friction integral at step `n` without the `j = n` node, and the
    /// weight multiplying `v_n`.
    fn friction_history(&self, n: usize, gregory: &[f64]) -> (f64, f64) {
        let weight = |j| Self::gregory_weight(gregory, j, n);
        let sum: f64 = (0..n).map(|j| weight(j) * self.kernel[n - j] * self.v[j]).sum();
        (self.h * sum, self.h * weight(n) * self.kernel[0])
    }

    fn run_trapezoidal(&mut self, n: usize) {
        let h = self.h;
        for i in self.x.len()..n {
            let (history, w_last) = self.friction_history(i, &[]);
            let (xp, vp, ap) = (self.x[i - 1], self.v[i - 1], self.a[i - 1]);
            let mut x = xp + h * vp;
            let mut v = vp + h * ap;
            let mut last_change = f64::INFINITY;
            for _ in 0..MAX_CORRECTIONS {
                let a = self.acceleration(i, x, history + w_last * v);
                let xn = xp + 0.5 * h * (vp + v);
                let vn = vp + 0.5 * h * (ap + a);
                let change = converged_change(x, xn, v, vn, h);
                x = xn;
                v = vn;
                if settled(change, last_change) {
                    break;
                }
                last_change = change;
            }
            let a = self.acceleration(i, x, history + w_last * v);
            self.x.push(x);
            self.v.push(v);
            self.a.push(a);
        }
    }

    fn run_adams(&mut self, n: usize, tab: &Tableau) {
        let p = tab.order;
        if n <= p {
            // Too short for the start block; a handful of trapezoidal steps.
            self.run_trapezoidal(n);
            return;
        }
        self.start_block(tab);
        let h = self.h;
        let dot = |w: &[f64], f: &[f64], newest: usize| -> f64 { w.iter().enumerate().map(|(k, c)| c * f[newest - k]).sum() };
        for i in p..n {
            let (history, w_last) = self.friction_history(i, tab.gregory);
            let (x1, v1) = (self.x[i - 1], self.v[i - 1]);
            let mut x = x1 + h * dot(tab.predictor, &self.v, i - 1);
            let mut v = v1 + h * dot(tab.predictor, &self.a, i - 1);
            // Corrector history terms, everything except the newest node.
            let xc = x1 + h * dot(&tab.corrector[1..], &self.v, i - 1);
            let vc = v1 + h * dot(&tab.corrector[1..], &self.a, i - 1);
            let c0 = tab.corrector[0];
            let mut last_change = f64::INFINITY;
            for _ in 0..MAX_CORRECTIONS {
                let a = self.acceleration(i, x, history + w_last * v);
                let xn = xc + h * c0 * v;
                let vn = vc + h * c0 * a;
                let change = converged_change(x, xn, v, vn, h);
                x = xn;
                v = vn;
                if settled(change, last_change) {
                    break;
                }
                last_change = change;
            }
            let a = self.acceleration(i, x, history + w_last * v);
            self.x.push(x);
            self.v.push(v);
            self.a.push(a);
        }
    }

    /// Steps `1..p` solved together as one implicit block of order `p`.
    fn start_block(&mut self, tab: &Tableau) {
        let p = tab.order;
        let h = self.h;
        let (x0, v0, a0) = (self.x[0], self.v[0], self.a[0]);
        let mut x: Vec<f64> = (0..p).map(|k| x0 + k as f64 * h * v0).collect();
        let mut v: Vec<f64> = (0..p).map(|k| v0 + k as f64 * h * a0).collect();
        let mut a = vec![a0; p];
        let mut last_change = f64::INFINITY;
        for _ in 0..MAX_CORRECTIONS {
            let friction = self.start_friction(tab, &v);
            for k in 1..p {
                a[k] = self.acceleration(k, x[k], friction[k]);
            }
            let (nx, nv) = (block_update(tab, x0, &v, h), block_update(tab, v0, &a, h));
            let change = (1..p)
                .map(|k| converged_change(x[k], nx[k], v[k], nv[k], h))
                .fold(0.0, f64::max);
            x = nx;
            v = nv;
            if settled(change, last_change) {
                break;
            }
            last_change = change;
        }
        let friction = self.start_friction(tab, &v);
        for k in 1..p {
            self.x.push(x[k]);
            self.v.push(v[k]);
            let acc = self.acceleration(k, x[k], friction[k]);
            self.a.push(acc);
        }
    }

    /// Friction integrals at steps `0..p` from velocities at steps `0..p`.
    fn start_friction(&self, tab: &Tableau, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; tab.order];
        for (k, row) in tab.start.iter().enumerate() {
            let step = k as isize + 1;
            out[k + 1] = self.h * row.iter().enumerate().map(|(j, w)| w * self.k(step - j as isize) * v[j]).sum::<f64>();
        }
        out
    }
}

fn block_update(tab: &Tableau, y0: f64, f: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![y0; tab.order];
    for (k, row) in tab.start.iter().enumerate() {
        out[k + 1] = y0 + h * row.iter().zip(f).map(|(w, fj)| w * fj).sum::<f64>();
    }
    out
}

/// Relative size of a corrector update, with `x` and `v h` on one scale.
fn converged_change(x: f64, xn: f64, v: f64, vn: f64, h: f64) -> f64 {
    let change = (xn - x).abs().max((vn - v).abs() * h);
    if change == 0.0 {
        return 0.0;
    }
    change / xn.abs().max(vn.abs() * h).max(f64::MIN_POSITIVE)
}

/// Whether a fixed-point iteration with successive relative changes
/// `last` and `change` should stop.
fn settled(change: f64, last: f64) -> bool {
    change <= 4.0 * f64::EPSILON || (change < 1e-11 && change >= last)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MicroscopicOptions {
    /// Add the counterterm force `-sum m nu^4/omega^2 x` on the particle.
    pub counterterm: bool,
    /// Runge-Kutta steps per grid step.
    pub substeps: usize,
    /// Keep per-mode bath coordinates in the trajectory.
    pub record_bath: bool,
}

impl Default for MicroscopicOptions {
    fn default() -> Self {
        Self {
            counterterm: true,
            substeps: 1,
            record_bath: false,
        }
    }
}

/// Integrates the particle and every bath mode with classical RK4:
///
/// ```text
/// m x''       = F(x) + sum m_a nu_a^2 x_a + q E(t) [- sum m_a nu_a^4/omega_a^2 x]
/// x_a''       = -omega_a^2 x_a + nu_a^2 x + (q_a / m_a) E(t)
/// ```
#[allow(clippy::too_many_arguments)]
pub fn integrate_microscopic(
    particle: &ParticleParams,
    potential: &Potential,
    bath: &BathSpec,
    init: &BathInitialState,
    field: &FieldProtocol,
    grid: TimeGrid,
    x0: f64,
    v0: f64,
    options: MicroscopicOptions,
) -> Result<Trajectory> {
    if init.positions.len() != bath.len() || init.momenta.len() != bath.len() {
        return Err(Error::Shape(format!(
            "initial state has {} modes for a bath of {}",
            init.positions.len(),
            bath.len()
        )));
    }
    bath.check_time_step(grid.dt())?;
    if options.substeps == 0 {
        return Err(Error::Configuration("substeps must be at least 1".into()));
    }
    if init.regime == Regime::QuantumWigner && !potential.is_quadratic() {
        return Err(Error::Unsupported(
            "Wigner-sampled bath states only represent quantum statistics for quadratic potentials".into(),
        ));
    }
    let modes = bath.modes();
    let nb = modes.len();
    let m = particle.mass;
    let counter: f64 = if options.counterterm {
        modes.iter().map(|md| md.memory_weight()).sum()
    } else {
        0.0
    };
    let bath_charge: Vec<f64> = modes.iter().map(|md| md.charge / md.mass).collect();

    // state = [x, v, x_1..x_N, v_1..v_N]
    let deriv = |t: f64, s: &[f64], out: &mut [f64]| {
        let x = s[0];
        let e = field.value(t);
        let mut force = potential.force(m, x) + particle.charge * e - counter * x;
        for (k, md) in modes.iter().enumerate() {
            let xa = s[2 + k];
            force += md.mass * md.nu * md.nu * xa;
            out[2 + k] = s[2 + nb + k];
            out[2 + nb + k] = -md.omega * md.omega * xa + md.nu * md.nu * x + bath_charge[k] * e;
        }
        out[0] = s[1];
        out[1] = force / m;
    };

    let dim = 2 + 2 * nb;
    let mut s = vec![0.0; dim];
    s[0] = x0;
    s[1] = v0;
    for (k, md) in modes.iter().enumerate() {
        s[2 + k] = init.positions[k];
        s[2 + nb + k] = init.momenta[k] / md.mass;
    }
    let n = grid.len();
    let mut xs = Vec::with_capacity(n);
    let mut vs = Vec::with_capacity(n);
    let mut record = options.record_bath.then(|| BathTrajectory {
        positions: Vec::with_capacity(n),
        velocities: Vec::with_capacity(n),
    });
    let mut push = |s: &[f64], xs: &mut Vec<f64>, vs: &mut Vec<f64>| {
        xs.push(s[0]);
        vs.push(s[1]);
        if let Some(r) = record.as_mut() {
            r.positions.push(s[2..2 + nb].to_vec());
            r.velocities.push(s[2 + nb..].to_vec());
        }
    };
    push(&s, &mut xs, &mut vs);

    let h = grid.dt() / options.substeps as f64;
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    for i in 1..n {
        let t_start = grid.time(i - 1);
        for sub in 0..options.substeps {
            let t = t_start + sub as f64 * h;
            deriv(t, &s, &mut k1);
            axpy(&mut tmp, &s, 0.5 * h, &k1);
            deriv(t + 0.5 * h, &tmp, &mut k2);
            axpy(&mut tmp, &s, 0.5 * h, &k2);
            deriv(t + 0.5 * h, &tmp, &mut k3);
            axpy(&mut tmp, &s, h, &k3);
            deriv(t + h, &tmp, &mut k4);
            for j in 0..dim {
                s[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        push(&s, &mut xs, &mut vs);
    }
    if xs.iter().chain(&vs).any(|v| !v.is_finite()) {
        return Err(Error::Configuration("microscopic integration produced non-finite values".into()));
    }
    Ok(Trajectory {
        grid,
        x: xs,
        v: vs,
        bath: record,
    })
}

fn axpy(out: &mut [f64], y: &[f64], a: f64, x: &[f64]) {
    for ((o, y), x) in out.iter_mut().zip(y).zip(x) {
        *o = y + a * x;
    }
}

/// Energy of the closed particle+bath system along a microscopic trajectory
/// recorded with `record_bath`. Only conserved without a field.
pub fn microscopic_energy(
    particle: &ParticleParams,
    potential: &Potential,
    bath: &BathSpec,
    trajectory: &Trajectory,
    counterterm: bool,
) -> Result<Vec<f64>> {
    let record = trajectory
        .bath
        .as_ref()
        .ok_or_else(|| Error::Configuration("trajectory has no recorded bath coordinates".into()))?;
    let m = particle.mass;
    Ok((0..trajectory.x.len())
        .map(|i| {
            let x = trajectory.x[i];
            let v = trajectory.v[i];
            let mut e = 0.5 * m * v * v + potential.energy(m, x);
            for (k, md) in bath.modes().iter().enumerate() {
                let xa = record.positions[i][k];
                let va = record.velocities[i][k];
                let shifted = xa - md.nu * md.nu / (md.omega * md.omega) * x;
                e += 0.5 * md.mass * va * va + 0.5 * md.mass * md.omega * md.omega * shifted * shifted;
                if !counterterm {
                    e -= 0.5 * md.memory_weight() * x * x;
                }
            }
            e
        })
        .collect())
}

/// Energy of the particle alone, `m v^2 / 2 + V(x)`.
pub fn particle_energy(particle: &ParticleParams, potential: &Potential, trajectory: &Trajectory) -> Vec<f64> {
    trajectory
        .x
        .iter()
        .zip(&trajectory.v)
        .map(|(&x, &v)| 0.5 * particle.mass * v * v + potential.energy(particle.mass, x))
        .collect()
}
