//! Experiment runners. Each writes its CSV files through [`Outputs`] and
//! returns metrics for the manifest.

use std::collections::BTreeMap;

use drivenbath::bath::BathSpec;
use drivenbath::circuit::{
    classical_nyquist_level, copper_estimate, flat_resistance, noise_spectrum, Ohms, SpectrumBath, SpectrumMethod,
    BASELINE_RMS, BASELINE_S_DB,
};
use drivenbath::gle::{integrate_gle_with, integrate_microscopic, GleOptions, MicroscopicOptions, Trajectory};
use drivenbath::noise::{
    analytic_sym_correlation, classical_sym_correlation, drive_shift, eta_path, sample_thermal_state, xi_path,
    Ensemble, Regime, SeedRecord,
};
use drivenbath::specfun::ThermalContext;
use drivenbath::{Execution, TimeGrid};

use crate::config::{Experiment, ExperimentConfig};
use crate::output::Outputs;
use crate::CliError;

#[derive(Debug, Default)]
pub struct Report {
    pub metrics: BTreeMap<String, f64>,
    /// `None` for experiments without an acceptance threshold.
    pub passed: Option<bool>,
    pub lines: Vec<String>,
}

impl Report {
    fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value);
    }
}

fn numerical(experiment: Experiment) -> impl Fn(drivenbath::Error) -> CliError {
    move |source| CliError::Numerical {
        experiment: experiment.name(),
        source,
    }
}

pub fn run(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Report, CliError> {
    match cfg.experiment {
        Experiment::Kernels => kernels(cfg, out),
        Experiment::FdrCheck => fdr_check(cfg, out),
        Experiment::DrivenFdrCheck => driven_fdr_check(cfg, out),
        Experiment::GleRun => gle_run(cfg, out),
        Experiment::OracleCompare => oracle_compare(cfg, out),
        Experiment::Nyquist => nyquist(cfg, out),
        Experiment::CopperEstimate => copper(cfg, out),
    }
}

fn write_bath(out: &mut Outputs, bath: &BathSpec, err: impl Fn(drivenbath::Error) -> CliError) -> Result<(), CliError> {
    out.write("bath.csv", |w| bath.write_csv(w).map_err(&err))
}

fn kernels(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Report, CliError> {
    let err = numerical(cfg.experiment);
    let bath = cfg.load_bath()?;
    let dt = cfg.time_step(&bath);
    let table = bath.kernel_table(cfg.run_duration(&bath), dt).map_err(&err)?;
    write_bath(out, &bath, &err)?;
    out.write("kernels.csv", |w| table.write_csv(w).map_err(&err))?;
    let mut report = Report::default();
    report.metric("modes", bath.len() as f64);
    report.metric("memory_kernel_at_zero", bath.memory_kernel(0.0));
    report.metric("delay_kernel_at_zero", bath.delay_kernel(0.0));
    report.lines.push(format!("{} kernel samples at dt = {dt:e} s", table.memory.len()));
    Ok(report)
}

fn ensemble<'a>(cfg: &ExperimentConfig, bath: &'a BathSpec, ctx: ThermalContext) -> Ensemble<'a> {
    Ensemble {
        bath,
        ctx,
        regime: cfg.regime,
        master_seed: cfg.seed.unwrap_or_default(),
        realizations: cfg.realizations,
        exec: Execution::Parallel,
    }
}

/// The relation the estimate is compared against: the high-temperature form
/// for classical sampling, the full symmetric correlation for Wigner sampling.
fn reference_correlation(cfg: &ExperimentConfig, bath: &BathSpec, ctx: &ThermalContext, t: f64, tp: f64) -> Result<f64, CliError> {
    match cfg.regime {
        Regime::Classical => Ok(classical_sym_correlation(bath, ctx, t, tp)),
        Regime::QuantumWigner => analytic_sym_correlation(bath, ctx, t, tp).map_err(numerical(cfg.experiment)),
    }
}

fn z_score(estimate: f64, stderr: f64, expected: f64) -> f64 {
    if stderr > 0.0 {
        (estimate - expected) / stderr
    } else if estimate == expected {
        0.0
    } else {
        f64::INFINITY
    }
}

fn fdr_check(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Report, CliError> {
    let err = numerical(cfg.experiment);
    let bath = cfg.load_bath()?;
    let ctx = cfg.thermal_context(&bath)?;
    let times = cfg.sample_times(&bath);
    let estimate = ensemble(cfg, &bath, ctx)
        .lag_correlation(&times, &vec![0.0; times.len()])
        .map_err(&err)?
        .anticommutator();
    let mut rows = Vec::with_capacity(times.len());
    let mut max_z: f64 = 0.0;
    for (k, &lag) in estimate.lags.iter().enumerate() {
        let analytic = reference_correlation(cfg, &bath, &ctx, lag, 0.0)?;
        let z = z_score(estimate.mean[k], estimate.stderr[k], analytic);
        max_z = max_z.max(z.abs());
        rows.push(vec![lag, estimate.mean[k], estimate.stderr[k], analytic, z]);
    }
    out.write_table("fdr.csv", &["lag_s", "estimate", "stderr", "analytic", "z"], &rows)?;

    let mut report = Report::default();
    let passed = max_z <= cfg.sigma;
    report.metric("max_abs_z", max_z);
    report.metric("sigma", cfg.sigma);
    report.metric("realizations", estimate.count as f64);
    report.metric("temperature_K", ctx.kelvin_value());
    if let Some(x) = ctx.reduced_frequency(bath.max_frequency()) {
        report.metric("reduced_frequency", x);
    }
    if let Some(ratio) = zero_point_ratio(&bath, &ctx)? {
        report.metric("zero_point_ratio", ratio);
    }
    report.passed = Some(passed);
    report.lines.push(format!(
        "fdr-check: max |z| = {max_z:.3} over {} lags ({} realizations), threshold {}",
        rows.len(),
        estimate.count,
        cfg.sigma
    ));
    Ok(report)
}

/// `C(0) / (2 k_B T K(0))`, the zero-point excess of the symmetric correlation.
fn zero_point_ratio(bath: &BathSpec, ctx: &ThermalContext) -> Result<Option<f64>, CliError> {
    if ctx.kelvin_value() == 0.0 {
        return Ok(None);
    }
    let quantum = analytic_sym_correlation(bath, ctx, 0.0, 0.0).map_err(numerical(Experiment::FdrCheck))?;
    Ok(Some(quantum / classical_sym_correlation(bath, ctx, 0.0, 0.0)))
}

fn driven_fdr_check(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Report, CliError> {
    let err = numerical(cfg.experiment);
    let bath = cfg.load_bath()?;
    if cfg.field.amplitude == 0.0 {
        return Err(CliError::Config("driven-fdr-check needs field.amplitude_V_m > 0".into()));
    }
    if !(cfg.field.frequency > bath.min_frequency() && cfg.field.frequency < bath.max_frequency()) {
        return Err(CliError::Config(format!(
            "field.frequency_rad_s = {:e} must lie inside the bath band ({:e}, {:e})",
            cfg.field.frequency,
            bath.min_frequency(),
            bath.max_frequency()
        )));
    }
    let ctx = cfg.thermal_context(&bath)?;
    let times = cfg.sample_times(&bath);
    let shift: Vec<f64> = times.iter().map(|&t| drive_shift(&bath, &cfg.field, t)).collect();
    let ens = ensemble(cfg, &bath, ctx);
    let matrix = ens.correlation_matrix(&times, &shift).map_err(&err)?;
    let mean = ens.mean_at(&times, &shift).map_err(&err)?;

    let n = times.len();
    let mut rows = Vec::with_capacity(n * n);
    let (mut max_z, mut max_z_double): (f64, f64) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let (m, se) = matrix.get(i, j);
            let (estimate, stderr) = (2.0 * m, 2.0 * se);
            let c = reference_correlation(cfg, &bath, &ctx, times[i], times[j])?;
            let relation = c + shift[i] * shift[j];
            let double = c + 2.0 * shift[i] * shift[j];
            let z = z_score(estimate, stderr, relation);
            let zd = z_score(estimate, stderr, double);
            max_z = max_z.max(z.abs());
            max_z_double = max_z_double.max(zd.abs());
            rows.push(vec![times[i], times[j], estimate, stderr, relation, z, double, zd]);
        }
    }
    out.write_table(
        "driven_fdr.csv",
        &["t_s", "t_prime_s", "estimate", "stderr", "c_plus_dd", "z", "c_plus_2dd", "z_2dd"],
        &rows,
    )?;

    let mut mean_rows = Vec::with_capacity(n);
    let mut max_z_mean: f64 = 0.0;
    for k in 0..n {
        let z = z_score(mean.mean[k], mean.stderr[k], -shift[k]);
        max_z_mean = max_z_mean.max(z.abs());
        mean_rows.push(vec![times[k], mean.mean[k], mean.stderr[k], -shift[k], z]);
    }
    out.write_table("eta_mean.csv", &["t_s", "mean", "stderr", "minus_shift", "z"], &mean_rows)?;

    let c0 = reference_correlation(cfg, &bath, &ctx, 0.0, 0.0)?;
    let max_shift = shift.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    let mut report = Report::default();
    report.metric("max_abs_z", max_z);
    report.metric("max_abs_z_c_plus_2dd", max_z_double);
    report.metric("max_abs_z_mean", max_z_mean);
    report.metric("shift_sq_over_c0", max_shift * max_shift / c0);
    report.metric("sigma", cfg.sigma);
    report.metric("realizations", matrix.count as f64);
    report.passed = Some(max_z <= cfg.sigma && max_z_mean <= cfg.sigma);
    report.lines.push(format!(
        "driven-fdr-check: <eta eta'> vs C + D D': max |z| = {max_z:.3}; vs C + 2 D D': max |z| = {max_z_double:.3}; <eta> vs -D: max |z| = {max_z_mean:.3}; threshold {}",
        cfg.sigma
    ));
    Ok(report)
}

struct Run {
    bath: BathSpec,
    grid: TimeGrid,
    state: drivenbath::noise::BathInitialState,
}

fn prepare_run(cfg: &ExperimentConfig) -> Result<Run, CliError> {
    let err = numerical(cfg.experiment);
    let bath = cfg.load_bath()?;
    let ctx = cfg.thermal_context(&bath)?;
    let dt = cfg.time_step(&bath);
    let steps = (cfg.run_duration(&bath) / dt).ceil() as usize + 1;
    let grid = TimeGrid::new(dt, steps).map_err(&err)?;
    let state = sample_thermal_state(&bath, &ctx, cfg.regime, SeedRecord::new(cfg.seed.unwrap_or_default(), 0)).map_err(&err)?;
    Ok(Run { bath, grid, state })
}

fn gle_trajectory(cfg: &ExperimentConfig, run: &Run) -> Result<(Trajectory, Vec<f64>, Vec<f64>), CliError> {
    let err = numerical(cfg.experiment);
    let xi = xi_path(&run.bath, &run.state, run.grid).map_err(&err)?;
    let eta = eta_path(&xi, &run.bath, &cfg.field, run.grid).map_err(&err)?;
    let trajectory = integrate_gle_with(
        &cfg.particle.renormalized(&run.bath),
        &cfg.potential(),
        &run.bath,
        &eta,
        &cfg.field,
        run.grid,
        cfg.x0,
        cfg.v0,
        GleOptions { scheme: cfg.scheme },
    )
    .map_err(&err)?;
    Ok((trajectory, xi.values, eta.values))
}

fn gle_run(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Report, CliError> {
    let err = numerical(cfg.experiment);
    let run = prepare_run(cfg)?;
    let (trajectory, xi, eta) = gle_trajectory(cfg, &run)?;
    write_bath(out, &run.bath, &err)?;
    out.write("trajectory.csv", |w| trajectory.write_csv(w).map_err(&err))?;
    let rows: Vec<Vec<f64>> = (0..run.grid.len()).map(|i| vec![run.grid.time(i), xi[i], eta[i]]).collect();
    out.write_table("noise.csv", &["t_s", "xi_N", "eta_N"], &rows)?;
    let mut report = Report::default();
    report.metric("steps", run.grid.len() as f64);
    report.metric("dt_s", run.grid.dt());
    report.metric("max_abs_x_m", trajectory.max_abs_x());
    report.lines.push(format!("gle-run: {} steps, max |x| = {:e} m", run.grid.len(), trajectory.max_abs_x()));
    Ok(report)
}

fn oracle_compare(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Report, CliError> {
    let err = numerical(cfg.experiment);
    let run = prepare_run(cfg)?;
    let (gle, _, _) = gle_trajectory(cfg, &run)?;
    let options = MicroscopicOptions {
        substeps: cfg.substeps,
        ..Default::default()
    };
    let oracle = integrate_microscopic(
        &cfg.particle,
        &cfg.potential(),
        &run.bath,
        &run.state,
        &cfg.field,
        run.grid,
        cfg.x0,
        cfg.v0,
        options,
    )
    .map_err(&err)?;
    let deviation = gle.max_relative_deviation(&oracle).map_err(&err)?;
    write_bath(out, &run.bath, &err)?;
    out.write("gle_trajectory.csv", |w| gle.write_csv(w).map_err(&err))?;
    out.write("oracle_trajectory.csv", |w| oracle.write_csv(w).map_err(&err))?;
    out.write_table("comparison.csv", &["max_relative_deviation", "tolerance"], &[vec![deviation, cfg.gle_tolerance]])?;

    let mut report = Report::default();
    report.metric("max_relative_deviation", deviation);
    report.metric("tolerance", cfg.gle_tolerance);
    report.metric("steps", run.grid.len() as f64);
    report.passed = Some(deviation <= cfg.gle_tolerance);
    report.lines.push(format!(
        "oracle-compare: max relative deviation {deviation:e} over {} steps, tolerance {:e}",
        run.grid.len(),
        cfg.gle_tolerance
    ));
    Ok(report)
}

fn nyquist(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Report, CliError> {
    let err = numerical(cfg.experiment);
    let bath = cfg.load_bath()?;
    let ctx = cfg.thermal_context(&bath)?;
    let mut report = Report::default();
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    let r = flat_resistance(&bath, &cfg.circuit);
    for &kelvin in &cfg.temperatures {
        let ctx_t = ThermalContext::kelvin(kelvin).map_err(&err)?;
        let s = noise_spectrum(
            SpectrumBath::Discrete(&bath),
            &ctx_t,
            &cfg.circuit,
            &drivenbath::gle::FieldProtocol::off(),
            cfg.copper.bandwidth,
            &[0.0],
            SpectrumMethod::Quadrature,
        )
        .map_err(&err)?;
        let four_rkt = 4.0 * r * ctx_t.kt();
        let ratio = s.equilibrium[0].value() / four_rkt;
        worst = worst.max((ratio - 1.0).abs());
        let level = classical_nyquist_level(Ohms(cfg.resistance), &ctx_t).map_err(&err)?;
        rows.push(vec![kelvin, s.equilibrium[0].value(), four_rkt, ratio, level.value()]);
    }
    out.write_table(
        "nyquist.csv",
        &["temperature_K", "equilibrium_V2", "four_r_kt", "ratio", "classical_level_V2_Hz"],
        &rows,
    )?;

    let times = cfg.sample_times(&bath);
    let spectrum = noise_spectrum(
        SpectrumBath::Discrete(&bath),
        &ctx,
        &cfg.circuit,
        &cfg.field,
        cfg.copper.bandwidth,
        &times,
        SpectrumMethod::Quadrature,
    )
    .map_err(&err)?;
    out.write("spectrum.csv", |w| spectrum.write_csv(w).map_err(&err))?;

    if ctx.kelvin_value() > 0.0 {
        let level = classical_nyquist_level(Ohms(cfg.resistance), &ctx).map_err(&err)?;
        report.metric("classical_level_V2_Hz", level.value());
    }
    report.metric("flat_resistance", r);
    report.metric("max_ratio_deviation", worst);
    report.metric("tolerance", cfg.circuit_tolerance);
    report.passed = Some(worst <= cfg.circuit_tolerance);
    report.lines.push(format!(
        "nyquist: equilibrium / 4 R k_B T deviates by at most {worst:e} over {} temperatures, tolerance {:e}",
        cfg.temperatures.len(),
        cfg.circuit_tolerance
    ));
    Ok(report)
}

fn copper(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Report, CliError> {
    let err = numerical(cfg.experiment);
    let r = copper_estimate(&cfg.copper).map_err(&err)?;
    let quantities: [(&str, f64); 16] = [
        ("debye_frequency_rad_s", r.debye_frequency),
        ("amplitude_V_m", r.amplitude),
        ("closed_form_V2", r.closed_form.value()),
        ("closed_form_rms_V", r.rms.value()),
        ("quadrature_V2", r.quadrature.value()),
        ("closed_over_quadrature", r.closed_over_quadrature),
        ("rederived_V2", r.rederived.value()),
        ("rederived_over_quadrature", r.rederived_over_quadrature),
        ("window_s", r.window),
        ("averaged_V2", r.averaged.value()),
        ("averaged_rms_V", r.averaged_rms.value()),
        ("averaged_volts_reading_V", r.averaged_volts_reading().value()),
        ("closed_vs_baseline", r.closed_vs_baseline()),
        ("averaged_vs_baseline", r.averaged_vs_baseline()),
        ("averaged_rms_vs_baseline", r.averaged_rms_vs_baseline()),
        ("rms_vs_baseline", r.rms.value() / BASELINE_RMS),
    ];
    out.write("copper.csv", |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["quantity", "value"]).map_err(|e| CliError::Io(e.to_string()))?;
        for (name, value) in quantities {
            csv.write_record([name.to_string(), format!("{value:e}")]).map_err(|e| CliError::Io(e.to_string()))?;
        }
        csv.flush().map_err(|e| CliError::Io(e.to_string()))
    })?;

    let mut report = Report::default();
    for (name, value) in quantities {
        report.metric(name, value);
    }
    let within = |ratio: f64| ratio > 0.0 && ratio.log10().abs() <= 3.0;
    let factor_ok = (0.1..=10.0).contains(&r.closed_over_quadrature);
    report.passed = Some(within(r.averaged_vs_baseline()) && within(r.averaged_rms_vs_baseline()) && factor_ok);
    report.lines.extend([
        format!("closed form S_DB(0)        = {:e} V^2  (x{:.3e} vs {BASELINE_S_DB:e} V^2)", r.closed_form.value(), r.closed_vs_baseline()),
        format!("closed form rms            = {:e} V    (x{:.3e} vs {BASELINE_RMS:e} V)", r.rms.value(), r.rms.value() / BASELINE_RMS),
        format!("window average, T = {:.6e} s: {:e} V^2  (x{:.3e} vs {BASELINE_S_DB:e} V^2)", r.window, r.averaged.value(), r.averaged_vs_baseline()),
        format!("window average rms         = {:e} V    (x{:.3e} vs {BASELINE_RMS:e} V)", r.averaged_rms.value(), r.averaged_rms_vs_baseline()),
        format!("drive group read in volts: {:e} V", r.averaged_volts_reading().value()),
        format!("closed form / quadrature   = {:.6}", r.closed_over_quadrature),
        format!("(pi^2/16) Omega^2 form     = {:e} V^2, / quadrature = {:.6}", r.rederived.value(), r.rederived_over_quadrature),
    ]);
    Ok(report)
}
