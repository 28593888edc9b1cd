use drivenbath::bath::{BathSpec, DebyeSpec, OscillatorMode};
use drivenbath::circuit::{MaterialPreset, COPPER_ION_MASS};
use drivenbath::Error;
use proptest::prelude::*;

fn debye() -> DebyeSpec {
    DebyeSpec::new(1e13, 5e12, 1.6e-19, 1e-25).unwrap()
}

// Independent reference: Simpson on the continuum integrand
// A_D m nu^4 int_0^wd cos(w t) dw, integrand sampled finely.
fn continuum_memory_simpson(spec: &DebyeSpec, t: f64) -> f64 {
    let n = 20_000;
    let h = spec.debye_frequency / n as f64;
    let mut acc = 1.0 + (spec.debye_frequency * t).cos();
    for i in 1..n {
        acc += (i as f64 * h * t).cos() * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    spec.mean_mass * spec.nu.powi(4) * spec.prefactor * acc * h / 3.0
}

fn max_memory_error(spec: &DebyeSpec, n: usize) -> f64 {
    let bath = spec.discretize(n).unwrap();
    let k0 = spec.memory_kernel_at_zero();
    (0..=200)
        .map(|i| i as f64 * 0.1 / spec.debye_frequency)
        .map(|t| (bath.memory_kernel(t) - continuum_memory_simpson(spec, t)).abs() / k0)
        .fold(0.0, f64::max)
}

#[test]
fn discretized_kernel_matches_the_continuum() {
    let spec = debye();
    assert!(max_memory_error(&spec, 512) <= 1e-3);
    for t in [0.0, 1e-14, 7e-13, 2e-12] {
        let simpson = continuum_memory_simpson(&spec, t);
        assert!((spec.continuum_memory_kernel(t) - simpson).abs() <= 1e-10 * spec.memory_kernel_at_zero());
    }
}

#[test]
fn discretization_converges_at_second_order() {
    let spec = debye();
    let coarse = max_memory_error(&spec, 64);
    let fine = max_memory_error(&spec, 128);
    assert!(coarse / fine >= 1.9, "ratio {}", coarse / fine);
}

#[test]
fn kernels_at_zero_are_exact_for_every_n() {
    let spec = debye();
    for n in [1, 3, 64, 1000] {
        let bath = spec.discretize(n).unwrap();
        assert!((bath.memory_kernel(0.0) / spec.memory_kernel_at_zero() - 1.0).abs() < 1e-12);
        assert!((bath.delay_kernel(0.0) / spec.delay_kernel_at_zero() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn kernels_vanish_before_zero() {
    let bath = debye().discretize(16).unwrap();
    assert_eq!(bath.memory_kernel(-1e-15), 0.0);
    assert_eq!(bath.delay_kernel(-1e-15), 0.0);
}

#[test]
fn single_mode_kernels() {
    let mode = OscillatorMode::new(2.0, 3.0, 1.5, 0.5).unwrap();
    let bath = BathSpec::single(mode);
    let t = 0.7;
    assert!((bath.memory_kernel(t) - 2.0 * 1.5f64.powi(4) / 9.0 * (2.1f64).cos()).abs() < 1e-14);
    assert!((bath.delay_kernel(t) - 0.5 * 2.25 / 9.0 * (2.1f64).cos()).abs() < 1e-14);
}

#[test]
fn copper_kernel_first_lobe_decreases() {
    let spec = MaterialPreset::copper().debye_spec(COPPER_ION_MASS).unwrap();
    let first_zero = std::f64::consts::PI / spec.debye_frequency;
    let values: Vec<f64> = (0..50).map(|i| spec.continuum_memory_kernel(i as f64 * first_zero / 50.0)).collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]));
    assert!(values[49] > 0.0);
}

#[test]
fn transform_refused_without_continuum() {
    let bath = BathSpec::single(OscillatorMode::new(1.0, 1.0, 1.0, 0.0).unwrap());
    assert!(matches!(bath.memory_kernel_transform(0.5), Err(Error::Unsupported(_))));
    let from_debye = debye().discretize(8).unwrap();
    let k = from_debye.memory_kernel_transform(1e12).unwrap();
    assert!((k - 1e-25 * 5e12f64.powi(4) * 9e-39 * std::f64::consts::FRAC_PI_2).abs() <= 1e-12 * k);
    assert_eq!(from_debye.memory_kernel_transform(2e13).unwrap(), 0.0);
}

#[test]
fn construction_errors() {
    assert!(OscillatorMode::new(0.0, 1.0, 1.0, 0.0).is_err());
    assert!(OscillatorMode::new(1.0, -1.0, 1.0, 0.0).is_err());
    assert!(DebyeSpec::new(0.0, 1.0, 0.0, 1.0).is_err());
    assert!(debye().discretize(0).is_err());
    let a = OscillatorMode::new(1.0, 2.0, 1.0, 0.0).unwrap();
    let b = OscillatorMode::new(1.0, 2.0, 1.0, 0.0).unwrap();
    assert!(BathSpec::new(vec![a, b]).is_err());
    assert!(BathSpec::new(vec![]).is_err());
}

#[test]
fn time_step_guard() {
    let bath = debye().discretize(16).unwrap();
    assert!(bath.check_time_step(0.9 * bath.max_time_step()).is_ok());
    assert!(matches!(bath.check_time_step(1.1 * bath.max_time_step()), Err(Error::Configuration(_))));
    let table = bath.kernel_table(1e-12, 1e-15).unwrap();
    assert_eq!(table.memory.len(), table.grid.len());
    assert_eq!(table.memory[0], bath.memory_kernel(0.0));
    let mut out = Vec::new();
    table.write_csv(&mut out).unwrap();
    assert!(String::from_utf8(out).unwrap().starts_with("t_s,memory_kernel_kg_s2,delay_kernel_C\n"));
}

#[test]
fn csv_round_trip_is_exact() {
    let bath = debye().discretize(24).unwrap();
    let mut out = Vec::new();
    bath.write_csv(&mut out).unwrap();
    let back = BathSpec::read_csv(out.as_slice()).unwrap();
    assert_eq!(back.modes(), bath.modes());
    assert!(BathSpec::read_csv("mass_kg,omega_rad_s\n1,2\n".as_bytes()).is_err());
    assert!(BathSpec::read_csv("mass_kg,omega_rad_s,nu_rad_s,charge_C\n1,2,x,0\n".as_bytes()).is_err());
}

proptest! {
    #[test]
    fn memory_kernel_is_bounded_by_its_value_at_zero(
        n in 1usize..64,
        wd in 1e11f64..1e14,
        t in 0.0f64..1e-10,
    ) {
        let bath = DebyeSpec::new(wd, 1e12, 1e-19, 1e-26).unwrap().discretize(n).unwrap();
        prop_assert!(bath.memory_kernel(t).abs() <= bath.memory_kernel(0.0) * (1.0 + 1e-12));
        prop_assert!(bath.memory_kernel(0.0) > 0.0);
    }

    #[test]
    fn time_step_bound_tracks_the_top_mode(n in 1usize..40, wd in 1e10f64..1e14) {
        let bath = DebyeSpec::new(wd, 1e12, 1e-19, 1e-26).unwrap().discretize(n).unwrap();
        let expected = std::f64::consts::PI / (10.0 * bath.max_frequency());
        prop_assert!((bath.max_time_step() - expected).abs() <= 1e-12 * expected);
    }
}
