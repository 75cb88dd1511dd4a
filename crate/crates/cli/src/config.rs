//! JSON run configuration and its validation into a [`Plan`].

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use nhmetro_core::dynamics::{angle_probe, basis_projector, check_projector};
use nhmetro_core::models::CustomModel;
use nhmetro_core::{ComplexMatrix, ComplexVector, HamiltonianModel, PtParam, C64};
use serde::Deserialize;

/// Configuration problem tied to the JSON path of the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

/// A real number written either as a JSON number or as a string such as
/// `"pi/8"`, `"10*pi/8"`, `"-pi"`, `"0.25"`. Angles may carry a `deg` suffix.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Number(f64),
    Text(String),
}

impl Num {
    fn value(&self, path: &str) -> Result<f64, ConfigError> {
        let v = match self {
            Num::Number(x) => *x,
            Num::Text(s) => parse_number(s).map_err(|m| ConfigError::at(path, m))?,
        };
        if !v.is_finite() {
            return Err(ConfigError::at(path, "value is not finite"));
        }
        Ok(v)
    }

    /// Radians, or degrees when the text ends in `deg`.
    fn angle(&self, path: &str) -> Result<f64, ConfigError> {
        match self {
            Num::Text(s) if s.trim_end().ends_with("deg") => {
                let body = s.trim_end().trim_end_matches("deg");
                let deg = parse_number(body).map_err(|m| ConfigError::at(path, m))?;
                if !deg.is_finite() {
                    return Err(ConfigError::at(path, "value is not finite"));
                }
                Ok(deg.to_radians())
            }
            _ => self.value(path),
        }
    }
}

/// `[coef][*]pi[/den]` or `number[/den]`.
pub fn parse_number(text: &str) -> Result<f64, String> {
    let bad = || format!("cannot read {text:?} as a number (expected e.g. 0.5, \"pi/8\", \"3*pi/4\")");
    let s = text.trim();
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => {
            let d: f64 = b.trim().parse().map_err(|_| bad())?;
            if d == 0.0 {
                return Err(format!("division by zero in {text:?}"));
            }
            (a.trim(), d)
        }
        None => (s, 1.0),
    };
    let value = match num.strip_suffix("pi") {
        Some(coef) => {
            let coef = coef.trim().trim_end_matches('*').trim();
            let c = match coef {
                "" | "+" => 1.0,
                "-" => -1.0,
                _ => coef.parse::<f64>().map_err(|_| bad())?,
            };
            c * PI
        }
        None => num.parse::<f64>().map_err(|_| bad())?,
    };
    Ok(value / den)
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PtEstimate {
    S,
    Alpha,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Pt {
        s: Num,
        alpha: Num,
        estimate: PtEstimate,
    },
    Kappa {
        kappa: Num,
    },
    EpDemo {
        alpha: Num,
    },
    /// Hermitian `(ω/2)σ_z`, estimating ω.
    Ramsey {
        omega: Num,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleSweep {
    pub start: Num,
    pub stop: Num,
    pub steps: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProbeConfig {
    /// `cos 2φ|0⟩ + sin 2φ|1⟩`.
    Angle(Num),
    /// `[[re, im], [re, im]]`, normalized after parsing.
    Amplitudes([[f64; 2]; 2]),
    Sweep(AngleSweep),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasurementConfig {
    Basis(usize),
    /// Row-major 2×2, entries `[re, im]`.
    Matrix([[[f64; 2]; 2]; 2]),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub start: Num,
    pub stop: Num,
    pub steps: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationConfig {
    pub n: u64,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub bracket: Option<[Num; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv_path: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub description: Option<String>,
    pub model: ModelConfig,
    #[serde(default)]
    pub probe: Option<ProbeConfig>,
    #[serde(default)]
    pub measurement: Option<MeasurementConfig>,
    pub time_grid: TimeGrid,
    #[serde(default)]
    pub estimation: Option<EstimationConfig>,
    #[serde(default)]
    pub output: Option<OutputConfig>,
}

/// One probe of a sweep; `phi_deg` is set for angle-type probes.
#[derive(Debug, Clone)]
pub struct Probe {
    pub phi_deg: Option<f64>,
    pub psi: ComplexVector,
}

#[derive(Debug, Clone)]
pub struct Estimation {
    pub n: u64,
    pub trials: usize,
    pub seed: u64,
    pub bracket: Option<(f64, f64)>,
}

/// Validated run: the grid is `times × probes`, in that nesting order.
#[derive(Debug, Clone)]
pub struct Plan {
    pub model: HamiltonianModel,
    pub theta: f64,
    pub probes: Vec<Probe>,
    pub projector: ComplexMatrix,
    pub times: Vec<f64>,
    pub estimation: Option<Estimation>,
    pub csv_path: Option<PathBuf>,
}

impl Plan {
    pub fn angle_column(&self) -> bool {
        self.probes.iter().any(|p| p.phi_deg.is_some())
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, &Probe)> + '_ {
        self.times
            .iter()
            .flat_map(move |&t| self.probes.iter().map(move |p| (t, p)))
    }
}

pub fn parse_config(json: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(json);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::at(path, e.into_inner().to_string())
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::at("", format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

fn linspace(start: f64, stop: f64, steps: u64) -> Vec<f64> {
    if steps == 1 {
        return vec![start];
    }
    let last = (steps - 1) as f64;
    (0..steps).map(|k| start + (stop - start) * k as f64 / last).collect()
}

fn build_model(m: &ModelConfig) -> Result<HamiltonianModel, ConfigError> {
    let core =
        |path: &str, r: nhmetro_core::Result<HamiltonianModel>| r.map_err(|e| ConfigError::at(path, e.to_string()));
    match m {
        ModelConfig::Pt { s, alpha, estimate } => {
            let estimate = match estimate {
                PtEstimate::S => PtParam::S,
                PtEstimate::Alpha => PtParam::Alpha,
            };
            core(
                "model",
                HamiltonianModel::pt(s.value("model.s")?, alpha.value("model.alpha")?, estimate),
            )
        }
        ModelConfig::Kappa { kappa } => core("model.kappa", HamiltonianModel::kappa(kappa.value("model.kappa")?)),
        ModelConfig::EpDemo { alpha } => core("model.alpha", HamiltonianModel::ep_demo(alpha.value("model.alpha")?)),
        ModelConfig::Ramsey { omega } => Ok(HamiltonianModel::Custom(CustomModel::ramsey(
            omega.value("model.omega")?,
        ))),
    }
}

fn build_probes(p: Option<&ProbeConfig>) -> Result<Vec<Probe>, ConfigError> {
    let angle = |phi: f64| Probe {
        phi_deg: Some(phi.to_degrees()),
        psi: angle_probe(phi),
    };
    match p {
        None => Ok(vec![Probe {
            phi_deg: None,
            psi: ComplexVector::basis(2, 0),
        }]),
        Some(ProbeConfig::Angle(a)) => Ok(vec![angle(a.angle("probe.angle")?)]),
        Some(ProbeConfig::Amplitudes(amps)) => {
            let raw = ComplexVector::new(amps.iter().map(|[re, im]| C64::new(*re, *im)).collect());
            let psi = raw
                .normalized()
                .map_err(|e| ConfigError::at("probe.amplitudes", e.to_string()))?;
            Ok(vec![Probe { phi_deg: None, psi }])
        }
        Some(ProbeConfig::Sweep(s)) => {
            if s.steps < 1 {
                return Err(ConfigError::at("probe.sweep.steps", "must be >= 1"));
            }
            let (a, b) = (s.start.angle("probe.sweep.start")?, s.stop.angle("probe.sweep.stop")?);
            if b < a {
                return Err(ConfigError::at("probe.sweep.stop", "must be >= start"));
            }
            Ok(linspace(a, b, s.steps).into_iter().map(angle).collect())
        }
    }
}

fn build_projector(m: Option<&MeasurementConfig>) -> Result<ComplexMatrix, ConfigError> {
    let a = match m {
        None => basis_projector(2, 0),
        Some(MeasurementConfig::Basis(k)) => {
            if *k > 1 {
                return Err(ConfigError::at(
                    "measurement.basis",
                    format!("index {k} out of range for a qubit"),
                ));
            }
            basis_projector(2, *k)
        }
        Some(MeasurementConfig::Matrix(rows)) => {
            ComplexMatrix::from_rows(&rows.map(|row| row.map(|[re, im]| C64::new(re, im))))
        }
    };
    check_projector(&a).map_err(|e| ConfigError::at("measurement", e.to_string()))?;
    Ok(a)
}

fn build_estimation(e: &EstimationConfig) -> Result<Estimation, ConfigError> {
    if e.n < 1 {
        return Err(ConfigError::at("estimation.n", "must be >= 1"));
    }
    if e.trials < 2 {
        return Err(ConfigError::at("estimation.trials", "must be >= 2"));
    }
    let bracket = match &e.bracket {
        None => None,
        Some([lo, hi]) => {
            let (lo, hi) = (lo.value("estimation.bracket[0]")?, hi.value("estimation.bracket[1]")?);
            if lo >= hi {
                return Err(ConfigError::at(
                    "estimation.bracket",
                    "lower end must be below upper end",
                ));
            }
            Some((lo, hi))
        }
    };
    Ok(Estimation {
        n: e.n,
        trials: e.trials,
        seed: e.seed,
        bracket,
    })
}

pub fn build_plan(cfg: &ExperimentConfig) -> Result<Plan, ConfigError> {
    let model = build_model(&cfg.model)?;
    let g = &cfg.time_grid;
    if g.steps < 1 {
        return Err(ConfigError::at("time_grid.steps", "must be >= 1"));
    }
    let (start, stop) = (g.start.value("time_grid.start")?, g.stop.value("time_grid.stop")?);
    if start < 0.0 {
        return Err(ConfigError::at("time_grid.start", "must be >= 0"));
    }
    if stop < start {
        return Err(ConfigError::at("time_grid.stop", "must be >= start"));
    }
    Ok(Plan {
        theta: model.theta(),
        model,
        probes: build_probes(cfg.probe.as_ref())?,
        projector: build_projector(cfg.measurement.as_ref())?,
        times: linspace(start, stop, g.steps),
        estimation: cfg.estimation.as_ref().map(build_estimation).transpose()?,
        csv_path: cfg.output.as_ref().map(|o| o.csv_path.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pi_expressions() {
        let cases = [
            ("pi/8", PI / 8.0),
            ("10*pi/8", 10.0 * PI / 8.0),
            ("10pi/8", 10.0 * PI / 8.0),
            ("-pi", -PI),
            ("2 * pi", 2.0 * PI),
            ("0.25", 0.25),
            ("3/4", 0.75),
            ("1e-3", 1e-3),
        ];
        for (text, want) in cases {
            assert!((parse_number(text).unwrap() - want).abs() < 1e-15, "{text}");
        }
        for text in ["pie", "pi/0", "", "x/2", "pi/"] {
            assert!(parse_number(text).is_err(), "{text}");
        }
    }

    #[test]
    fn degree_suffix_only_for_angles() {
        let n = Num::Text("18deg".into());
        assert!((n.angle("p").unwrap() - 18f64.to_radians()).abs() < 1e-15);
        assert!(n.value("p").is_err());
    }

    const MINIMAL: &str = r#"{
        "model": {"family": "pt", "s": 1, "alpha": "pi/4", "estimate": "s"},
        "time_grid": {"start": "pi/8", "stop": "10*pi/8", "steps": 10}
    }"#;

    #[test]
    fn minimal_config_defaults() {
        let plan = build_plan(&parse_config(MINIMAL).unwrap()).unwrap();
        assert_eq!(plan.times.len(), 10);
        assert!((plan.times[9] - 10.0 * PI / 8.0).abs() < 1e-15);
        assert_eq!(plan.theta, 1.0);
        assert!(!plan.angle_column());
        assert!(plan.estimation.is_none());
    }

    #[test]
    fn unknown_field_reports_path() {
        let json = MINIMAL.replace("\"steps\": 10", "\"steps\": 10, \"stride\": 2");
        let err = parse_config(&json).unwrap_err();
        assert_eq!(err.path, "time_grid.stride");
        assert!(err.message.contains("stride"), "{err}");
    }

    #[test]
    fn range_errors_report_path() {
        let json = MINIMAL.replace("\"steps\": 10", "\"steps\": 0");
        let err = build_plan(&parse_config(&json).unwrap()).unwrap_err();
        assert_eq!(err.path, "time_grid.steps");
        let json = MINIMAL.replace("\"alpha\": \"pi/4\"", "\"alpha\": \"pi/2\"");
        let err = build_plan(&parse_config(&json).unwrap()).unwrap_err();
        assert_eq!(err.path, "model");
    }

    #[test]
    fn amplitude_probe_is_normalized() {
        let json = MINIMAL.replace(
            "\"time_grid\"",
            "\"probe\": {\"amplitudes\": [[3, 0], [0, 4]]}, \"time_grid\"",
        );
        let plan = build_plan(&parse_config(&json).unwrap()).unwrap();
        assert!((plan.probes[0].psi.norm_sqr() - 1.0).abs() < 1e-15);
        assert!((plan.probes[0].psi[1].im - 0.8).abs() < 1e-15);
    }

    #[test]
    fn non_projector_measurement_rejected() {
        let json = MINIMAL.replace(
            "\"time_grid\"",
            "\"measurement\": {\"matrix\": [[[1, 0], [1, 0]], [[1, 0], [0, 0]]]}, \"time_grid\"",
        );
        let err = build_plan(&parse_config(&json).unwrap()).unwrap_err();
        assert_eq!(err.path, "measurement");
    }
}
