//! Thermal bath sampling, noise paths and fluctuation-dissipation formulas.
//!
//! The bath starts in the equilibrium of the bare bath Hamiltonian, so every
//! initial coordinate is an independent zero-mean Gaussian. Quantum statistics
//! enter only through the Wigner variances, which for a quadratic bath give
//! sampled paths whose products reproduce the symmetrized operator
//! correlations. For commuting samples the anticommutator
//! `<A B + B A>` is therefore twice the plain product average; see
//! [`CorrelationEstimate::anticommutator`].

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::bath::BathSpec;
use crate::consts::HBAR;
use crate::gle::FieldProtocol;
use crate::par::{self, Execution};
use crate::specfun::{thermal_factor, ThermalContext};
use crate::{Error, Result, TimeGrid};

/// Relative gap `|omega - Omega| / Omega` below which a mode is treated as
/// exactly resonant with the drive.
pub const RESONANCE_GAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Classical,
    QuantumWigner,
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(Regime::Classical),
            "quantum-wigner" => Ok(Regime::QuantumWigner),
            other => Err(Error::Configuration(format!(
                "unknown regime `{other}` (expected `classical` or `quantum-wigner`)"
            ))),
        }
    }
}

/// Seed of one realization: the ensemble's master seed and the stream index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedRecord {
    pub master: u64,
    pub stream: u64,
}

impl SeedRecord {
    pub fn new(master: u64, stream: u64) -> Self {
        Self { master, stream }
    }
}

/// Sampled bath coordinates at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BathInitialState {
    pub positions: Vec<f64>,
    pub momenta: Vec<f64>,
    pub regime: Regime,
    pub seed: Option<SeedRecord>,
}

impl BathInitialState {
    /// All modes at rest at the origin.
    pub fn at_rest(bath: &BathSpec, regime: Regime) -> Self {
        Self {
            positions: vec![0.0; bath.len()],
            momenta: vec![0.0; bath.len()],
            regime,
            seed: None,
        }
    }

    fn check(&self, bath: &BathSpec) -> Result<()> {
        if self.positions.len() != bath.len() || self.momenta.len() != bath.len() {
            return Err(Error::Shape(format!(
                "initial state has {} positions / {} momenta for a bath of {} modes",
                self.positions.len(),
                self.momenta.len(),
                bath.len()
            )));
        }
        Ok(())
    }
}

/// Per-mode variances `(Var x, Var p)` of the equilibrium distribution.
pub fn thermal_variances(bath: &BathSpec, ctx: &ThermalContext, regime: Regime) -> Result<Vec<(f64, f64)>> {
    bath.modes()
        .iter()
        .map(|m| match regime {
            Regime::Classical => {
                let kt = ctx.kt();
                Ok((kt / (m.mass * m.omega * m.omega), m.mass * kt))
            }
            Regime::QuantumWigner => {
                let f = thermal_factor(m.omega, ctx)?;
                Ok((HBAR / (2.0 * m.mass * m.omega) * f, m.mass * HBAR * m.omega / 2.0 * f))
            }
        })
        .collect()
}

/// Draws a bath state from realization stream `seed.stream` of `seed.master`.
///
/// A classical bath at zero temperature is at rest (deterministic).
pub fn sample_thermal_state(
    bath: &BathSpec,
    ctx: &ThermalContext,
    regime: Regime,
    seed: SeedRecord,
) -> Result<BathInitialState> {
    let variances = thermal_variances(bath, ctx, regime)?;
    let mut rng = par::realization_rng(seed.master, seed.stream);
    Ok(sample_with(&variances, regime, Some(seed), &mut rng))
}

fn sample_with<R: Rng>(variances: &[(f64, f64)], regime: Regime, seed: Option<SeedRecord>, rng: &mut R) -> BathInitialState {
    let mut positions = Vec::with_capacity(variances.len());
    let mut momenta = Vec::with_capacity(variances.len());
    for &(vx, vp) in variances {
        let zx: f64 = rng.sample(StandardNormal);
        let zp: f64 = rng.sample(StandardNormal);
        positions.push(vx.sqrt() * zx);
        momenta.push(vp.sqrt() * zp);
    }
    BathInitialState {
        positions,
        momenta,
        regime,
        seed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// Equilibrium bath force `xi`.
    Xi,
    /// Effective noise of the driven bath, `eta = xi - D`.
    Eta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub grid: TimeGrid,
    /// Force values in newtons.
    pub values: Vec<f64>,
    pub kind: NoiseKind,
    /// Regime of the bath sample the path was built from, if any.
    pub regime: Option<Regime>,
}

impl NoisePath {
    /// A path that is identically zero (no bath force).
    pub fn zeros(grid: TimeGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            kind: NoiseKind::Xi,
            regime: None,
        }
    }
}

/// `xi(t) = sum m nu^2 [x(0) cos(omega t) + p(0)/(m omega) sin(omega t)]`.
pub fn xi_path(bath: &BathSpec, init: &BathInitialState, grid: TimeGrid) -> Result<NoisePath> {
    init.check(bath)?;
    let mut values = vec![0.0; grid.len()];
    let times: Vec<f64> = grid.times().collect();
    accumulate_xi(bath, init, &times, &mut values);
    Ok(NoisePath {
        grid,
        values,
        kind: NoiseKind::Xi,
        regime: Some(init.regime),
    })
}

/// `xi` at arbitrary times, written into `out`.
pub fn xi_at(bath: &BathSpec, init: &BathInitialState, times: &[f64], out: &mut [f64]) -> Result<()> {
    init.check(bath)?;
    if times.len() != out.len() {
        return Err(Error::Shape(format!("{} times for {} outputs", times.len(), out.len())));
    }
    out.iter_mut().for_each(|v| *v = 0.0);
    accumulate_xi(bath, init, times, out);
    Ok(())
}

fn accumulate_xi(bath: &BathSpec, init: &BathInitialState, times: &[f64], out: &mut [f64]) {
    for ((m, &x0), &p0) in bath.modes().iter().zip(&init.positions).zip(&init.momenta) {
        let cos_amp = m.mass * m.nu * m.nu * x0;
        let sin_amp = m.nu * m.nu * p0 / m.omega;
        for (v, &t) in out.iter_mut().zip(times) {
            let (s, c) = (m.omega * t).sin_cos();
            *v += cos_amp * c + sin_amp * s;
        }
    }
}

/// `int_0^t cos(omega (t - s)) cos(Omega s) ds`.
///
/// Closed form `(omega sin(omega t) - Omega sin(Omega t)) / (omega^2 - Omega^2)`,
/// evaluated as `[sin(omega t) + Omega t cos(((omega + Omega)/2) t) sinc(((omega - Omega)/2) t)] / (omega + Omega)`,
/// which has no cancellation near resonance. Modes within [`RESONANCE_GAP`]
/// of the drive use the limit `(sin(Omega t) + Omega t cos(Omega t)) / (2 Omega)`.
pub fn mode_drive_response(omega: f64, drive: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if (omega - drive).abs() < RESONANCE_GAP * drive {
        let (s, c) = (drive * t).sin_cos();
        return (s + drive * t * c) / (2.0 * drive);
    }
    let half_gap = 0.5 * (omega - drive) * t;
    let sinc = if half_gap.abs() < 1e-8 {
        1.0 - half_gap * half_gap / 6.0
    } else {
        half_gap.sin() / half_gap
    };
    ((omega * t).sin() + drive * t * (0.5 * (omega + drive) * t).cos() * sinc) / (omega + drive)
}

/// Drive shift `D(t) = int_0^t M(t - s) dE/ds ds`
/// `= E0 Omega sum q nu^2/omega^2 (omega sin(omega t) - Omega sin(Omega t)) / (omega^2 - Omega^2)`.
pub fn drive_shift(bath: &BathSpec, field: &FieldProtocol, t: f64) -> f64 {
    if t <= 0.0 || field.amplitude == 0.0 {
        return 0.0;
    }
    let sum: f64 = bath
        .modes()
        .iter()
        .map(|m| m.delay_weight() * mode_drive_response(m.omega, field.frequency, t))
        .sum();
    field.amplitude * field.frequency * sum
}

/// `eta(t) = xi(t) - D(t)` on the grid of `xi`.
pub fn eta_path(xi: &NoisePath, bath: &BathSpec, field: &FieldProtocol, grid: TimeGrid) -> Result<NoisePath> {
    if xi.grid != grid || xi.values.len() != grid.len() {
        return Err(Error::Shape("xi path is not sampled on the requested grid".into()));
    }
    if xi.kind != NoiseKind::Xi {
        return Err(Error::Shape("eta must be built from a xi path".into()));
    }
    let values = xi
        .values
        .iter()
        .enumerate()
        .map(|(i, &x)| x - drive_shift(bath, field, grid.time(i)))
        .collect();
    Ok(NoisePath {
        grid,
        values,
        kind: NoiseKind::Eta,
        regime: xi.regime,
    })
}

/// Equilibrium anticommutator correlation
/// `C(t, t') = sum hbar m nu^4 / omega coth(hbar omega / 2 k_B T) cos(omega (t - t'))`.
pub fn analytic_sym_correlation(bath: &BathSpec, ctx: &ThermalContext, t: f64, t_prime: f64) -> Result<f64> {
    let lag = t - t_prime;
    bath.modes().iter().try_fold(0.0, |acc, m| {
        let f = thermal_factor(m.omega, ctx)?;
        Ok(acc + HBAR * m.mass * m.nu.powi(4) / m.omega * f * (m.omega * lag).cos())
    })
}

/// High-temperature limit of [`analytic_sym_correlation`]: `2 k_B T K(t - t')`.
pub fn classical_sym_correlation(bath: &BathSpec, ctx: &ThermalContext, t: f64, t_prime: f64) -> f64 {
    2.0 * ctx.kt() * bath.memory_kernel_even(t - t_prime)
}

/// Driven-bath relation `C(t, t') + D(t) D(t')`.
pub fn analytic_eta_correlation(
    bath: &BathSpec,
    ctx: &ThermalContext,
    field: &FieldProtocol,
    t: f64,
    t_prime: f64,
) -> Result<f64> {
    Ok(analytic_sym_correlation(bath, ctx, t, t_prime)? + drive_shift(bath, field, t) * drive_shift(bath, field, t_prime))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AveragingMode {
    Ensemble,
    TimeAverage,
}

impl AveragingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AveragingMode::Ensemble => "ensemble",
            AveragingMode::TimeAverage => "time-average",
        }
    }
}

/// Estimated `<A(t) A(t + tau)>` over a lag grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEstimate {
    pub lags: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub count: usize,
    pub mode: AveragingMode,
}

impl CorrelationEstimate {
    /// The anticommutator `<A B + B A>` implied by the product average of
    /// commuting samples: mean and error both doubled.
    pub fn anticommutator(&self) -> CorrelationEstimate {
        CorrelationEstimate {
            mean: self.mean.iter().map(|v| 2.0 * v).collect(),
            stderr: self.stderr.iter().map(|v| 2.0 * v).collect(),
            ..self.clone()
        }
    }

    /// CSV with header `lag_s,mean,stderr,count`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["lag_s", "mean", "stderr", "count"])?;
        for ((lag, mean), err) in self.lags.iter().zip(&self.mean).zip(&self.stderr) {
            w.write_record([format!("{lag:e}"), format!("{mean:e}"), format!("{err:e}"), self.count.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_common_grid(paths: &[NoisePath]) -> Result<TimeGrid> {
    let grid = paths[0].grid;
    if paths.iter().any(|p| p.grid != grid || p.values.len() != grid.len()) {
        return Err(Error::Shape("ensemble paths are not on a common grid".into()));
    }
    Ok(grid)
}

/// Ensemble average of `A(t_anchor) A(t_anchor + lag)` over realizations.
pub fn estimate_ensemble_correlation(
    paths: &[NoisePath],
    anchor: usize,
    lags: &[usize],
    exec: Execution,
) -> Result<CorrelationEstimate> {
    if paths.len() < 2 {
        return Err(Error::Estimation(format!(
            "ensemble averaging needs at least 2 paths, got {}",
            paths.len()
        )));
    }
    let grid = check_common_grid(paths)?;
    if let Some(&max_lag) = lags.iter().max() {
        if anchor + max_lag >= grid.len() {
            return Err(Error::Estimation(format!(
                "anchor {anchor} + lag {max_lag} exceeds path length {} by {}",
                grid.len(),
                anchor + max_lag + 1 - grid.len()
            )));
        }
    }
    let moments = par::accumulate(exec, paths.len(), lags.len(), |i, out| {
        let v = &paths[i].values;
        for (o, &lag) in out.iter_mut().zip(lags) {
            *o = v[anchor] * v[anchor + lag];
        }
    });
    Ok(CorrelationEstimate {
        lags: lags.iter().map(|&l| grid.time(l)).collect(),
        mean: moments.mean(),
        stderr: moments.stderr(),
        count: moments.count,
        mode: AveragingMode::Ensemble,
    })
}

/// Number of blocks used for the time-average error estimate.
pub const TIME_AVERAGE_BLOCKS: usize = 10;

/// Time average `(1/T) int_0^T A(t) A(t + tau) dt` over a window of
/// `window_steps` grid steps, by the trapezoidal rule.
///
/// The standard error comes from splitting the window into
/// [`TIME_AVERAGE_BLOCKS`] consecutive blocks.
pub fn estimate_time_average_correlation(
    path: &NoisePath,
    lags: &[usize],
    window_steps: usize,
) -> Result<CorrelationEstimate> {
    let max_lag = lags.iter().copied().max().unwrap_or(0);
    let needed = window_steps + max_lag + 1;
    if window_steps < TIME_AVERAGE_BLOCKS {
        return Err(Error::Estimation(format!(
            "time-average window of {window_steps} steps is shorter than {TIME_AVERAGE_BLOCKS} blocks"
        )));
    }
    if path.values.len() < needed {
        return Err(Error::Estimation(format!(
            "time average needs {needed} samples (window {window_steps} + max lag {max_lag} + 1), path has {}; short by {}",
            path.values.len(),
            needed - path.values.len()
        )));
    }
    let v = &path.values;
    let block_len = window_steps / TIME_AVERAGE_BLOCKS;
    let mut mean = Vec::with_capacity(lags.len());
    let mut stderr = Vec::with_capacity(lags.len());
    for &lag in lags {
        let product = |i: usize| v[i] * v[i + lag];
        let trapezoid = |lo: usize, hi: usize| -> f64 {
            let inner: f64 = (lo + 1..hi).map(product).sum();
            (0.5 * (product(lo) + product(hi)) + inner) / (hi - lo) as f64
        };
        mean.push(trapezoid(0, window_steps));
        let blocks: Vec<f64> = (0..TIME_AVERAGE_BLOCKS)
            .map(|b| trapezoid(b * block_len, (b + 1) * block_len))
            .collect();
        let bm = blocks.iter().sum::<f64>() / blocks.len() as f64;
        let var = blocks.iter().map(|x| (x - bm).powi(2)).sum::<f64>() / (blocks.len() - 1) as f64;
        stderr.push((var / blocks.len() as f64).sqrt());
    }
    Ok(CorrelationEstimate {
        lags: lags.iter().map(|&l| path.grid.time(l)).collect(),
        mean,
        stderr,
        count: window_steps + 1,
        mode: AveragingMode::TimeAverage,
    })
}

/// Ensemble estimate of the full two-time matrix `<A(t_i) A(t_j)>`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub times: Vec<f64>,
    /// Row-major `n x n`.
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub count: usize,
}

impl CorrelationMatrix {
    pub fn dim(&self) -> usize {
        self.times.len()
    }

    pub fn get(&self, i: usize, j: usize) -> (f64, f64) {
        let k = i * self.dim() + j;
        (self.mean[k], self.stderr[k])
    }
}

/// Ensemble mean of the path values with standard errors, per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanEstimate {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub count: usize,
}

/// Generates ensembles of noise paths with counter-based seeding: realization
/// `i` always uses stream `i` of `master_seed`.
#[derive(Debug, Clone)]
pub struct Ensemble<'a> {
    pub bath: &'a BathSpec,
    pub ctx: ThermalContext,
    pub regime: Regime,
    pub master_seed: u64,
    pub realizations: usize,
    pub exec: Execution,
}

impl Ensemble<'_> {
    pub fn initial_state(&self, i: usize) -> Result<BathInitialState> {
        sample_thermal_state(self.bath, &self.ctx, self.regime, SeedRecord::new(self.master_seed, i as u64))
    }

    pub fn xi_paths(&self, grid: TimeGrid) -> Result<Vec<NoisePath>> {
        let variances = thermal_variances(self.bath, &self.ctx, self.regime)?;
        let paths = par::map_indexed(self.exec, self.realizations, |i| {
            let seed = SeedRecord::new(self.master_seed, i as u64);
            let mut rng = par::realization_rng(seed.master, seed.stream);
            let init = sample_with(&variances, self.regime, Some(seed), &mut rng);
            xi_path(self.bath, &init, grid)
        });
        paths.into_iter().collect()
    }

    pub fn eta_paths(&self, grid: TimeGrid, field: &FieldProtocol) -> Result<Vec<NoisePath>> {
        let shift: Vec<f64> = grid.times().map(|t| drive_shift(self.bath, field, t)).collect();
        let mut paths = self.xi_paths(grid)?;
        for p in &mut paths {
            for (v, d) in p.values.iter_mut().zip(&shift) {
                *v -= d;
            }
            p.kind = NoiseKind::Eta;
        }
        Ok(paths)
    }

    /// Streams realizations without storing paths and returns the two-time
    /// product matrix of `xi - shift` at `times` (`shift` = 0 gives `xi`).
    pub fn correlation_matrix(&self, times: &[f64], shift: &[f64]) -> Result<CorrelationMatrix> {
        if shift.len() != times.len() {
            return Err(Error::Shape(format!("{} shifts for {} times", shift.len(), times.len())));
        }
        let variances = thermal_variances(self.bath, &self.ctx, self.regime)?;
        let n = times.len();
        let moments = par::accumulate(self.exec, self.realizations, n * n, |i, out| {
            let values = self.sample_at(&variances, i, times, shift);
            for a in 0..n {
                for b in 0..n {
                    out[a * n + b] = values[a] * values[b];
                }
            }
        });
        Ok(CorrelationMatrix {
            times: times.to_vec(),
            mean: moments.mean(),
            stderr: moments.stderr(),
            count: moments.count,
        })
    }

    /// Streams realizations and returns `<A(times[k]) A(times[0])>` with
    /// `A = xi - shift`, lags measured from `times[0]`.
    pub fn lag_correlation(&self, times: &[f64], shift: &[f64]) -> Result<CorrelationEstimate> {
        if times.is_empty() || shift.len() != times.len() {
            return Err(Error::Shape(format!("{} shifts for {} times", shift.len(), times.len())));
        }
        let variances = thermal_variances(self.bath, &self.ctx, self.regime)?;
        let moments = par::accumulate(self.exec, self.realizations, times.len(), |i, out| {
            let values = self.sample_at(&variances, i, times, shift);
            for (o, v) in out.iter_mut().zip(&values) {
                *o = v * values[0];
            }
        });
        Ok(CorrelationEstimate {
            lags: times.iter().map(|t| t - times[0]).collect(),
            mean: moments.mean(),
            stderr: moments.stderr(),
            count: moments.count,
            mode: AveragingMode::Ensemble,
        })
    }

    /// Streams realizations and returns the ensemble mean of `xi - shift` at `times`.
    pub fn mean_at(&self, times: &[f64], shift: &[f64]) -> Result<MeanEstimate> {
        if shift.len() != times.len() {
            return Err(Error::Shape(format!("{} shifts for {} times", shift.len(), times.len())));
        }
        let variances = thermal_variances(self.bath, &self.ctx, self.regime)?;
        let moments = par::accumulate(self.exec, self.realizations, times.len(), |i, out| {
            out.copy_from_slice(&self.sample_at(&variances, i, times, shift));
        });
        Ok(MeanEstimate {
            times: times.to_vec(),
            mean: moments.mean(),
            stderr: moments.stderr(),
            count: moments.count,
        })
    }

    fn sample_at(&self, variances: &[(f64, f64)], i: usize, times: &[f64], shift: &[f64]) -> Vec<f64> {
        let seed = SeedRecord::new(self.master_seed, i as u64);
        let mut rng = par::realization_rng(seed.master, seed.stream);
        let init = sample_with(variances, self.regime, Some(seed), &mut rng);
        let mut values = vec![0.0; times.len()];
        accumulate_xi(self.bath, &init, times, &mut values);
        for (v, d) in values.iter_mut().zip(shift) {
            *v -= d;
        }
        values
    }
}

/// Ensemble mean of a set of paths, per grid point.
pub fn estimate_mean(paths: &[NoisePath], exec: Execution) -> Result<MeanEstimate> {
    if paths.len() < 2 {
        return Err(Error::Estimation(format!("mean estimate needs at least 2 paths, got {}", paths.len())));
    }
    let grid = check_common_grid(paths)?;
    let moments = par::accumulate(exec, paths.len(), grid.len(), |i, out| out.copy_from_slice(&paths[i].values));
    Ok(MeanEstimate {
        times: grid.times().collect(),
        mean: moments.mean(),
        stderr: moments.stderr(),
        count: moments.count,
    })
}
