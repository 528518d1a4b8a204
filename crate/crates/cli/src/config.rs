//! Experiment configuration: a JSON document whose fields can be
//! overridden from the command line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mcbeam::amr::Scenario;
use mcbeam::channel::EnsembleModel;
use mcbeam::constellation::Constellation;
use mcbeam::genetic::GaConfig;
use mcbeam::info::GridSpec;
use mcbeam::manifold::RmCgdConfig;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::report::CliError;

/// Upper bound on SNR grid length, to catch a mistyped step.
pub const MAX_SNR_POINTS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstellationSpec {
    Qam { order: usize },
    Psk { order: usize },
    /// Points as `[re, im]` pairs; renormalized to zero mean and unit energy.
    Custom {
        points: Vec<[f64; 2]>,
        #[serde(default)]
        label: Option<String>,
    },
}

impl ConstellationSpec {
    pub fn build(&self) -> mcbeam::Result<Constellation<f64>> {
        match self {
            ConstellationSpec::Qam { order } => Constellation::qam(*order),
            ConstellationSpec::Psk { order } => Constellation::psk(*order),
            ConstellationSpec::Custom { points, label } => {
                let pts = points.iter().map(|p| Complex64::new(p[0], p[1])).collect();
                Constellation::from_points(pts, label.clone().unwrap_or_else(|| "custom".into()))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
pub enum Optimizer {
    #[serde(rename = "rmcgd-f1", alias = "rm_cgd_f1")]
    #[value(name = "rmcgd-f1")]
    RmCgdF1,
    #[serde(rename = "rmcgd-f2", alias = "rm_cgd_f2")]
    #[value(name = "rmcgd-f2")]
    RmCgdF2,
    #[serde(rename = "ga")]
    #[value(name = "ga")]
    Ga,
    #[serde(rename = "random", alias = "random_phases")]
    #[value(name = "random")]
    Random,
}

impl Optimizer {
    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::RmCgdF1 => "rmcgd-f1",
            Optimizer::RmCgdF2 => "rmcgd-f2",
            Optimizer::Ga => "ga",
            Optimizer::Random => "random",
        }
    }
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// `noncoop`, `coop` or `both` on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScenarioChoice(pub &'static [Scenario]);

impl FromStr for ScenarioChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "both" => Ok(ScenarioChoice(&Scenario::BOTH)),
            _ => match s.parse::<Scenario>() {
                Ok(Scenario::NonCooperative) => Ok(ScenarioChoice(&[Scenario::NonCooperative])),
                Ok(Scenario::Cooperative) => Ok(ScenarioChoice(&[Scenario::Cooperative])),
                Err(_) => Err(format!("expected noncoop, coop or both, got `{s}`")),
            },
        }
    }
}

/// Inclusive `start:stop:step` range in dB, or a single value.
pub fn parse_snr_range(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number"));
    let (start, stop, step) = match parts.as_slice() {
        [v] => return Ok(vec![num(v)?]),
        [a, b, c] => (num(a)?, num(b)?, num(c)?),
        _ => return Err(format!("expected start:stop:step, got `{s}`")),
    };
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
        return Err("range bounds must be finite".into());
    }
    if !(step > 0.0) || stop < start {
        return Err("need step > 0 and stop >= start".into());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > MAX_SNR_POINTS {
        return Err(format!("range has {count} points, limit is {MAX_SNR_POINTS}"));
    }
    // integer multiples keep grid points free of accumulated rounding
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub constellation: ConstellationSpec,
    pub users: usize,
    pub antennas: usize,
    pub channel: EnsembleModel,
    pub ensemble_seed: u64,
    /// Average SNR points in dB; each command has its own default.
    pub snr_db: Option<Vec<f64>>,
    pub scenarios: Vec<Scenario>,
    pub optimizers: Vec<Optimizer>,
    pub quadrature_order: usize,
    pub hermite_order: usize,
    pub series_tol: f64,
    pub table_grid: GridSpec,
    /// Where the MI/MMSE table is cached between runs.
    pub table_cache: Option<PathBuf>,
    pub multistarts: usize,
    pub rm_cgd: RmCgdConfig,
    pub ga: GaConfig,
    /// Monte Carlo samples per point; absent means no Monte Carlo column.
    pub mc_samples: Option<usize>,
    pub out: PathBuf,
    pub format: Format,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            constellation: ConstellationSpec::Qam { order: 4 },
            users: 4,
            antennas: 5,
            channel: EnsembleModel::Exponential { rho: 0.7 },
            ensemble_seed: 0,
            snr_db: None,
            scenarios: Scenario::BOTH.to_vec(),
            optimizers: vec![Optimizer::Random, Optimizer::RmCgdF1, Optimizer::RmCgdF2],
            quadrature_order: 50,
            hermite_order: 40,
            series_tol: 1e-10,
            table_grid: GridSpec::default(),
            table_cache: None,
            multistarts: 20,
            rm_cgd: RmCgdConfig::default(),
            ga: GaConfig::default(),
            mc_samples: None,
            out: PathBuf::from("out"),
            format: Format::Csv,
        }
    }
}

impl ExperimentConfig {
    /// Parses a config document, reporting the field path and position of
    /// the first problem.
    pub fn from_json(text: &str, origin: &Path) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            CliError::config(inner.to_string())
                .with_field((path != ".").then_some(path))
                .with_position(origin, inner.line(), inner.column())
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text, path)
    }

    pub fn snr_grid(&self) -> &[f64] {
        self.snr_db.as_deref().unwrap_or(&[])
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let field = |f: &str, msg: String| Err(CliError::config(msg).with_field(Some(f.to_string())));
        if let Err(e) = self.constellation.build() {
            return field("constellation", e.to_string());
        }
        if self.users == 0 {
            return field("users", "must be at least 1".into());
        }
        if self.antennas == 0 {
            return field("antennas", "must be at least 1".into());
        }
        if let Err(e) = mcbeam::channel::ChannelEnsemble::<f64>::generate(1, self.antennas, 0.0, self.channel, 0) {
            return field("channel", e.to_string());
        }
        match &self.snr_db {
            Some(v) if v.is_empty() => return field("snr_db", "SNR list is empty".into()),
            Some(v) if v.iter().any(|x| !x.is_finite()) => return field("snr_db", "SNR values must be finite".into()),
            Some(v) if v.len() > MAX_SNR_POINTS => return field("snr_db", format!("more than {MAX_SNR_POINTS} points")),
            _ => {}
        }
        if self.scenarios.is_empty() {
            return field("scenarios", "need at least one scenario".into());
        }
        if self.optimizers.is_empty() {
            return field("optimizers", "need at least one optimizer".into());
        }
        if !(1..=mcbeam::quadrature::MAX_ORDER).contains(&self.quadrature_order) {
            return field("quadrature_order", format!("must lie in 1..={}", mcbeam::quadrature::MAX_ORDER));
        }
        if !(1..=mcbeam::quadrature::MAX_ORDER).contains(&self.hermite_order) {
            return field("hermite_order", format!("must lie in 1..={}", mcbeam::quadrature::MAX_ORDER));
        }
        if !(self.series_tol > 0.0 && self.series_tol < 1.0) {
            return field("series_tol", "must lie in (0, 1)".into());
        }
        if let Err(e) = self.table_grid.validate() {
            return field("table_grid", e.to_string());
        }
        if self.multistarts == 0 {
            return field("multistarts", "must be at least 1".into());
        }
        if let Err(e) = self.rm_cgd.validate() {
            return field("rm_cgd", e.to_string());
        }
        if let Err(e) = self.ga.validate() {
            return field("ga", e.to_string());
        }
        if let Some(n) = self.mc_samples {
            if n < mcbeam::montecarlo::MIN_SAMPLES {
                return field("mc_samples", format!("need at least {}", mcbeam::montecarlo::MIN_SAMPLES));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_snr_range("0:10:5").unwrap(), vec![0.0, 5.0, 10.0]);
        assert_eq!(parse_snr_range("-3").unwrap(), vec![-3.0]);
        assert_eq!(parse_snr_range("0:1:0.1").unwrap().len(), 11);
        assert!(parse_snr_range("0:10").is_err());
        assert!(parse_snr_range("10:0:1").is_err());
        assert!(parse_snr_range("0:10:0").is_err());
        assert!(parse_snr_range("0:1e9:1e-3").is_err());
    }

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let back = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap(), Path::new("x")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn parse_errors_carry_field_and_line() {
        let e = ExperimentConfig::from_json("{\n  \"users\": \"four\"\n}", Path::new("cfg.json")).unwrap_err();
        assert_eq!(e.field.as_deref(), Some("users"));
        assert_eq!(e.line, Some(2));
        let e = ExperimentConfig::from_json("{\"bogus\": 1}", Path::new("cfg.json")).unwrap_err();
        assert!(e.message.contains("bogus"));
        let c = ExperimentConfig { snr_db: Some(vec![]), ..Default::default() };
        assert_eq!(c.validate().unwrap_err().field.as_deref(), Some("snr_db"));
    }

    #[test]
    fn optimizer_aliases() {
        let v: Vec<Optimizer> = serde_json::from_str(r#"["rm_cgd_f1", "rmcgd-f2", "random_phases", "ga"]"#).unwrap();
        assert_eq!(v, vec![Optimizer::RmCgdF1, Optimizer::RmCgdF2, Optimizer::Random, Optimizer::Ga]);
    }
}
