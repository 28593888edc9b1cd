//! Line-oriented `key = value` configuration with `[section]` headers.
//!
//! Every accepted key is listed in [`SCHEMA`]. Values from the file are
//! overlaid by command-line flags, then defaults fill the rest. The resolved
//! table is what the manifest echoes.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use drivenbath::bath::{BathSpec, DebyeSpec};
use drivenbath::circuit::{CircuitParams, CopperInputs, MaterialPreset, VoltsSquared};
use drivenbath::gle::{FieldProtocol, GleScheme, ParticleParams, Potential};
use drivenbath::noise::Regime;
use drivenbath::specfun::ThermalContext;

use crate::CliError;

/// `(section, key, default)`. An empty default means "unset unless given".
pub const SCHEMA: &[(&str, &str, &str)] = &[
    ("bath", "debye_frequency_rad_s", "1e13"),
    ("bath", "nu_rad_s", "5e12"),
    ("bath", "mean_charge_C", "1.602176634e-19"),
    ("bath", "mean_mass_kg", "1e-25"),
    ("bath", "prefactor_s3", ""),
    ("bath", "modes", "64"),
    ("bath", "modes_csv", ""),
    ("thermal", "temperature_K", "300"),
    ("thermal", "reduced_frequency", ""),
    ("thermal", "regime", "classical"),
    ("field", "amplitude_V_m", "0"),
    ("field", "frequency_rad_s", "2e12"),
    ("particle", "mass_kg", "1e-24"),
    ("particle", "charge_C", "1.602176634e-19"),
    ("particle", "x0_m", "0"),
    ("particle", "v0_m_s", "0"),
    ("potential", "kind", "free"),
    ("potential", "omega0_rad_s", "1e13"),
    ("grid", "dt_s", "auto"),
    ("grid", "duration_s", "auto"),
    ("grid", "points", "32"),
    ("grid", "span_oscillations", "10"),
    ("gle", "scheme", "adams6"),
    ("gle", "substeps", "8"),
    ("gle", "tolerance", "1e-6"),
    ("ensemble", "realizations", "100000"),
    ("ensemble", "seed", ""),
    ("ensemble", "sigma", "4"),
    ("output", "dir", "out"),
    ("circuit", "carrier_charge_C", "1.602176634e-19"),
    ("circuit", "carrier_density_m3", "8.49e28"),
    ("circuit", "cross_section_m2", "1e-6"),
    ("circuit", "carrier_mass_kg", "9.1093837015e-31"),
    ("circuit", "material_prefactor_s3", "6.72e-41"),
    ("circuit", "material_nu_rad_s", "4e13"),
    ("circuit", "material_charge_C", "1.602176634e-19"),
    ("circuit", "bandwidth_Hz", "1e12"),
    ("circuit", "drive_frequency_rad_s", "1e12"),
    ("circuit", "drive_group_V2", "1"),
    ("circuit", "window_rate_Hz", "1"),
    ("circuit", "resistance_ohm", "1"),
    ("circuit", "temperatures_K", "100,300,1000"),
    ("circuit", "tolerance", "1e-3"),
];

/// Section -> key -> value.
pub type Table = BTreeMap<String, BTreeMap<String, String>>;

fn known(section: &str, key: &str) -> bool {
    SCHEMA.iter().any(|(s, k, _)| *s == section && *k == key)
}

/// Parses configuration text into a table. Unknown keys are collected and
/// reported together.
pub fn parse_text(text: &str) -> Result<Table, CliError> {
    let mut table = Table::new();
    let mut section: Option<String> = None;
    let mut unknown = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let lineno = n + 1;
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| CliError::Config(format!("line {lineno}: unterminated section header `{line}`")))?
                .trim();
            if !SCHEMA.iter().any(|(s, _, _)| *s == name) {
                return Err(CliError::Config(format!("line {lineno}: unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {lineno}: expected `key = value`, found `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section
            .as_deref()
            .ok_or_else(|| CliError::Config(format!("line {lineno}: `{key}` appears before any [section]")))?;
        if !known(sec, key) {
            unknown.push(format!("{sec}.{key}"));
            continue;
        }
        let entry = table.entry(sec.to_string()).or_default();
        if entry.insert(key.to_string(), value.to_string()).is_some() {
            return Err(CliError::Config(format!("line {lineno}: duplicate key {sec}.{key}")));
        }
    }
    if !unknown.is_empty() {
        return Err(CliError::Config(format!("unknown configuration keys: {}", unknown.join(", "))));
    }
    Ok(table)
}

fn strip_comment(line: &str) -> &str {
    let trimmed = line.trim_start();
    if trimmed.starts_with('#') || trimmed.starts_with(';') {
        return "";
    }
    match line.find(" #") {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Applies a `section.key=value` override.
pub fn set(table: &mut Table, assignment: &str) -> Result<(), CliError> {
    let (path, value) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--set expects section.key=value, got `{assignment}`")))?;
    let (section, key) = path
        .trim()
        .split_once('.')
        .ok_or_else(|| CliError::Usage(format!("--set expects section.key=value, got `{assignment}`")))?;
    if !known(section, key) {
        return Err(CliError::Config(format!("unknown configuration keys: {section}.{key}")));
    }
    table.entry(section.to_string()).or_default().insert(key.to_string(), value.trim().to_string());
    Ok(())
}

/// Fills defaults for every key not present.
pub fn resolve(mut table: Table) -> Table {
    for (section, key, default) in SCHEMA {
        let entry = table.entry(section.to_string()).or_default();
        if !entry.contains_key(*key) && !default.is_empty() {
            entry.insert(key.to_string(), default.to_string());
        }
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Kernels,
    FdrCheck,
    DrivenFdrCheck,
    GleRun,
    OracleCompare,
    Nyquist,
    CopperEstimate,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Kernels => "kernels",
            Experiment::FdrCheck => "fdr-check",
            Experiment::DrivenFdrCheck => "driven-fdr-check",
            Experiment::GleRun => "gle-run",
            Experiment::OracleCompare => "oracle-compare",
            Experiment::Nyquist => "nyquist",
            Experiment::CopperEstimate => "copper-estimate",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(
            self,
            Experiment::FdrCheck | Experiment::DrivenFdrCheck | Experiment::GleRun | Experiment::OracleCompare
        )
    }
}

#[derive(Debug, Clone)]
pub enum BathSource {
    Debye { spec: DebyeSpec, modes: usize },
    Csv(PathBuf),
}

#[derive(Debug, Clone)]
pub enum ThermalSetting {
    Kelvin(f64),
    /// `hbar omega_max / 2 k_B T`, resolved once the bath is known.
    Reduced(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    Free,
    Harmonic,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub bath: BathSource,
    pub thermal: ThermalSetting,
    pub regime: Regime,
    pub field: FieldProtocol,
    pub particle: ParticleParams,
    pub x0: f64,
    pub v0: f64,
    pub potential: PotentialKind,
    pub omega0: f64,
    pub dt: Option<f64>,
    pub duration: Option<f64>,
    pub points: usize,
    pub span_oscillations: f64,
    pub scheme: GleScheme,
    pub substeps: usize,
    pub gle_tolerance: f64,
    pub realizations: usize,
    pub seed: Option<u64>,
    pub sigma: f64,
    pub out_dir: PathBuf,
    pub circuit: CircuitParams,
    pub copper: CopperInputs,
    pub resistance: f64,
    pub temperatures: Vec<f64>,
    pub circuit_tolerance: f64,
    /// Resolved key/value table, for the manifest.
    pub echo: Table,
}

struct Reader<'a> {
    table: &'a Table,
}

impl Reader<'_> {
    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.table.get(section).and_then(|s| s.get(key)).map(String::as_str).filter(|v| !v.is_empty())
    }

    fn string(&self, section: &str, key: &str) -> Result<&str, CliError> {
        self.raw(section, key)
            .ok_or_else(|| CliError::Config(format!("{section}.{key} is required")))
    }

    fn f64(&self, section: &str, key: &str) -> Result<f64, CliError> {
        let raw = self.string(section, key)?;
        let v: f64 = raw
            .parse()
            .map_err(|_| CliError::Config(format!("{section}.{key}: `{raw}` is not a number")))?;
        if !v.is_finite() {
            return Err(CliError::Config(format!("{section}.{key} must be finite, got {raw}")));
        }
        Ok(v)
    }

    fn positive(&self, section: &str, key: &str) -> Result<f64, CliError> {
        let v = self.f64(section, key)?;
        if v <= 0.0 {
            return Err(CliError::Config(format!("{section}.{key} must be > 0, got {v}")));
        }
        Ok(v)
    }

    fn non_negative(&self, section: &str, key: &str) -> Result<f64, CliError> {
        let v = self.f64(section, key)?;
        if v < 0.0 {
            return Err(CliError::Config(format!("{section}.{key} must be >= 0, got {v}")));
        }
        Ok(v)
    }

    fn optional_positive(&self, section: &str, key: &str) -> Result<Option<f64>, CliError> {
        match self.raw(section, key) {
            None | Some("auto") => Ok(None),
            Some(_) => self.positive(section, key).map(Some),
        }
    }

    fn count(&self, section: &str, key: &str, min: usize) -> Result<usize, CliError> {
        let raw = self.string(section, key)?;
        let v: usize = raw
            .parse()
            .map_err(|_| CliError::Config(format!("{section}.{key}: `{raw}` is not a non-negative integer")))?;
        if v < min {
            return Err(CliError::Config(format!("{section}.{key} must be >= {min}, got {v}")));
        }
        Ok(v)
    }
}

fn model_error(key: &str, e: drivenbath::Error) -> CliError {
    CliError::Config(format!("{key}: {e}"))
}

impl ExperimentConfig {
    /// Validates a resolved table. `explicit` is the table before defaults,
    /// used to detect conflicting settings. Relative paths are taken relative
    /// to `base`.
    pub fn from_table(experiment: Experiment, table: Table, explicit: &Table, base: &Path) -> Result<Self, CliError> {
        let r = Reader { table: &table };

        let bath = match r.raw("bath", "modes_csv") {
            Some(path) => BathSource::Csv(base.join(path)),
            None => {
                let wd = r.positive("bath", "debye_frequency_rad_s")?;
                let nu = r.non_negative("bath", "nu_rad_s")?;
                let q = r.f64("bath", "mean_charge_C")?;
                let m = r.positive("bath", "mean_mass_kg")?;
                let spec = match r.raw("bath", "prefactor_s3") {
                    Some(_) => DebyeSpec::with_prefactor(wd, r.positive("bath", "prefactor_s3")?, nu, q, m),
                    None => DebyeSpec::new(wd, nu, q, m),
                }
                .map_err(|e| model_error("bath", e))?;
                BathSource::Debye {
                    spec,
                    modes: r.count("bath", "modes", 1)?,
                }
            }
        };

        let explicit_temperature = explicit.get("thermal").is_some_and(|s| s.contains_key("temperature_K"));
        let thermal = match r.raw("thermal", "reduced_frequency") {
            Some(_) if explicit_temperature => {
                return Err(CliError::Config(
                    "thermal.temperature_K and thermal.reduced_frequency are mutually exclusive".into(),
                ))
            }
            Some(_) => ThermalSetting::Reduced(r.positive("thermal", "reduced_frequency")?),
            None => ThermalSetting::Kelvin(r.non_negative("thermal", "temperature_K")?),
        };
        let regime: Regime = r
            .string("thermal", "regime")?
            .parse()
            .map_err(|e: drivenbath::Error| model_error("thermal.regime", e))?;

        let amplitude = r.non_negative("field", "amplitude_V_m")?;
        let field = if amplitude == 0.0 {
            FieldProtocol::off()
        } else {
            FieldProtocol::new(amplitude, r.positive("field", "frequency_rad_s")?).map_err(|e| model_error("field", e))?
        };

        let particle = ParticleParams::new(r.positive("particle", "mass_kg")?, r.f64("particle", "charge_C")?)
            .map_err(|e| model_error("particle", e))?;
        let potential = match r.string("potential", "kind")? {
            "free" => PotentialKind::Free,
            "harmonic" => PotentialKind::Harmonic,
            other => {
                return Err(CliError::Config(format!(
                    "potential.kind must be `free` or `harmonic`, got `{other}`"
                )))
            }
        };
        let scheme = match r.string("gle", "scheme")? {
            "trapezoidal" => GleScheme::Trapezoidal,
            "adams4" => GleScheme::Adams4,
            "adams6" => GleScheme::Adams6,
            other => {
                return Err(CliError::Config(format!(
                    "gle.scheme must be `trapezoidal`, `adams4` or `adams6`, got `{other}`"
                )))
            }
        };

        let seed = match r.raw("ensemble", "seed") {
            Some(raw) => Some(
                raw.parse::<u64>()
                    .map_err(|_| CliError::Config(format!("ensemble.seed: `{raw}` is not a u64")))?,
            ),
            None if experiment.is_stochastic() => {
                return Err(CliError::Config(format!(
                    "{} is stochastic and needs a seed (--seed or ensemble.seed)",
                    experiment.name()
                )))
            }
            None => None,
        };

        let circuit = CircuitParams::new(
            r.f64("circuit", "carrier_charge_C")?,
            r.positive("circuit", "carrier_density_m3")?,
            r.positive("circuit", "cross_section_m2")?,
            r.positive("circuit", "carrier_mass_kg")?,
        )
        .map_err(|e| model_error("circuit", e))?;
        let material = MaterialPreset::new(
            "configured",
            r.positive("circuit", "material_prefactor_s3")?,
            r.non_negative("circuit", "material_nu_rad_s")?,
            r.f64("circuit", "material_charge_C")?,
        )
        .map_err(|e| model_error("circuit", e))?;
        let copper = CopperInputs {
            material,
            circuit,
            bandwidth: r.positive("circuit", "bandwidth_Hz")?,
            drive: r.positive("circuit", "drive_frequency_rad_s")?,
            drive_group: VoltsSquared(r.non_negative("circuit", "drive_group_V2")?),
            window_rate: r.positive("circuit", "window_rate_Hz")?,
        };
        let temperatures = r
            .string("circuit", "temperatures_K")?
            .split(',')
            .map(|t| {
                let v: f64 = t
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Config(format!("circuit.temperatures_K: `{}` is not a number", t.trim())))?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(CliError::Config(format!("circuit.temperatures_K entries must be > 0, got {v}")));
                }
                Ok(v)
            })
            .collect::<Result<Vec<_>, _>>()?;

        let out_dir = PathBuf::from(r.string("output", "dir")?);
        let config = ExperimentConfig {
            experiment,
            bath,
            thermal,
            regime,
            field,
            particle,
            x0: r.f64("particle", "x0_m")?,
            v0: r.f64("particle", "v0_m_s")?,
            potential,
            omega0: r.positive("potential", "omega0_rad_s")?,
            dt: r.optional_positive("grid", "dt_s")?,
            duration: r.optional_positive("grid", "duration_s")?,
            points: r.count("grid", "points", 2)?,
            span_oscillations: r.positive("grid", "span_oscillations")?,
            scheme,
            substeps: r.count("gle", "substeps", 1)?,
            gle_tolerance: r.positive("gle", "tolerance")?,
            realizations: r.count("ensemble", "realizations", 2)?,
            seed,
            sigma: r.positive("ensemble", "sigma")?,
            out_dir,
            circuit,
            copper,
            resistance: r.non_negative("circuit", "resistance_ohm")?,
            temperatures,
            circuit_tolerance: r.positive("circuit", "tolerance")?,
            echo: BTreeMap::new(),
        };
        Ok(ExperimentConfig { echo: table, ..config })
    }

    pub fn load_bath(&self) -> Result<BathSpec, CliError> {
        match &self.bath {
            BathSource::Debye { spec, modes } => spec.discretize(*modes).map_err(|e| model_error("bath", e)),
            BathSource::Csv(path) => {
                BathSpec::load(path).map_err(|e| CliError::Config(format!("bath.modes_csv {}: {e}", path.display())))
            }
        }
    }

    pub fn thermal_context(&self, bath: &BathSpec) -> Result<ThermalContext, CliError> {
        match self.thermal {
            ThermalSetting::Kelvin(t) => ThermalContext::from_kelvin(t),
            ThermalSetting::Reduced(x) => ThermalContext::at_reduced_frequency(bath.max_frequency(), x),
        }
        .map_err(|e| model_error("thermal.temperature_K", e))
    }

    pub fn potential(&self) -> Potential {
        match self.potential {
            PotentialKind::Free => Potential::Free,
            PotentialKind::Harmonic => Potential::Harmonic { omega0: self.omega0 },
        }
    }

    /// Configured step, or `2 pi / (100 omega_max)`.
    pub fn time_step(&self, bath: &BathSpec) -> f64 {
        self.dt.unwrap_or(2.0 * PI / (100.0 * bath.max_frequency()))
    }

    /// Configured duration, or `50 / omega_min`.
    pub fn run_duration(&self, bath: &BathSpec) -> f64 {
        self.duration.unwrap_or(50.0 / bath.min_frequency())
    }

    /// `points` sample times spanning `span_oscillations` periods of the
    /// fastest mode.
    pub fn sample_times(&self, bath: &BathSpec) -> Vec<f64> {
        let span = self.span_oscillations * 2.0 * PI / bath.max_frequency();
        (0..self.points).map(|k| span * k as f64 / (self.points - 1) as f64).collect()
    }
}
