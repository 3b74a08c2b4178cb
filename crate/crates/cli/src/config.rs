//! Flat JSON experiment configuration with precedence flags > file > defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GreenProfile,
    ConformalCheck,
    BarrierCheck,
    HopfCertify,
    ExhaustionSim,
    CapacityScan,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::GreenProfile => "green-profile",
            Self::ConformalCheck => "conformal-check",
            Self::BarrierCheck => "barrier-check",
            Self::HopfCertify => "hopf-certify",
            Self::ExhaustionSim => "exhaustion-sim",
            Self::CapacityScan => "capacity-scan",
        }
    }

    /// Cusp used when neither file nor flags name one.
    fn default_cusp(self) -> (f64, f64) {
        match self {
            Self::GreenProfile | Self::HopfCertify => (0.5, 0.7),
            _ => (1.0, 0.5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExhaustionPreset {
    Simulation,
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityMethodName {
    BoxVariational,
    ShellVariational,
    BoxHitting,
}

/// Every knob of every experiment; each run reads the ones it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub c: f64,
    pub alpha: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    /// Outer radius of `Γ ∩ Δ_R`; 0 picks the experiment default.
    pub radius: f64,

    pub t_min: f64,
    pub t_max: f64,
    pub t_points: usize,

    pub s_min: f64,
    pub s_max: f64,
    pub s_points: usize,
    pub pairs: usize,
    pub boundary_samples: usize,

    pub b: f64,
    pub u0: f64,
    pub region_radius: f64,
    pub grid_h: f64,
    pub condition_grid: usize,
    pub e2_samples: usize,

    pub samples: usize,
    pub tip_cutoff: f64,

    pub preset: ExhaustionPreset,
    pub table_terms: usize,
    pub patch: bool,

    pub n: usize,
    pub k_min: u32,
    pub k_max: u32,
    pub method: CapacityMethodName,
    pub trials: usize,
}

/// A field-level validation failure.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ValidationError {}

fn bad(field: &str, message: impl Into<String>) -> ValidationError {
    ValidationError {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Values given on the command line; `None` leaves the lower layers alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub c: Option<f64>,
    pub alpha: Option<f64>,
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let (c, alpha) = experiment.default_cusp();
        Self {
            experiment,
            c,
            alpha,
            seed: 42,
            output_dir: PathBuf::from("out").join(experiment.name()),
            threads: 0,
            radius: 0.0,
            t_min: 0.004,
            t_max: 0.25,
            t_points: 12,
            s_min: 1e-6,
            s_max: 1e-4,
            s_points: 40,
            pairs: 100_000,
            boundary_samples: 10_000,
            b: 1.0,
            u0: 0.05,
            region_radius: 0.04,
            grid_h: 2e-4,
            condition_grid: 2000,
            e2_samples: 1000,
            samples: 2000,
            tip_cutoff: 0.01,
            preset: ExhaustionPreset::Simulation,
            table_terms: 64,
            patch: true,
            n: 2,
            k_min: 2,
            k_max: 6,
            method: CapacityMethodName::BoxVariational,
            trials: 100_000,
        }
    }

    /// Layers a flat JSON object over the defaults. Keys the file omits
    /// keep their default; unknown keys and mistyped values are rejected.
    pub fn from_json_over_defaults(experiment: Experiment, text: &str) -> Result<Self, ValidationError> {
        let file: Value = serde_json::from_str(text).map_err(|e| bad("config", format!("not valid JSON: {e}")))?;
        let Value::Object(file) = file else {
            return Err(bad("config", "must be a flat JSON object"));
        };
        let Value::Object(mut merged) = serde_json::to_value(Self::defaults(experiment)).expect("config serializes")
        else {
            unreachable!("config serializes to an object")
        };
        for (key, value) in file {
            if !merged.contains_key(&key) {
                return Err(bad(&key, "unknown field"));
            }
            if value.is_object() || value.is_array() {
                return Err(bad(&key, "nested values are not allowed in the flat config"));
            }
            merged.insert(key, value);
        }
        let cfg = Self::from_map(experiment, merged)?;
        if cfg.experiment != experiment {
            return Err(bad(
                "experiment",
                format!(
                    "file is for `{}` but `{}` was requested",
                    cfg.experiment.name(),
                    experiment.name()
                ),
            ));
        }
        Ok(cfg)
    }

    fn from_map(experiment: Experiment, map: Map<String, Value>) -> Result<Self, ValidationError> {
        // Type-check one key at a time against the defaults so the error
        // names the offending field.
        let base = serde_json::to_value(Self::defaults(experiment)).expect("config serializes");
        for (key, value) in &map {
            let mut probe = base.clone();
            probe[key.as_str()] = value.clone();
            if let Err(e) = serde_json::from_value::<Self>(probe) {
                return Err(bad(key, e.to_string()));
            }
        }
        serde_json::from_value(Value::Object(map)).map_err(|e| bad("config", e.to_string()))
    }

    /// Resolves defaults, then the optional file, then the flags.
    pub fn resolve(experiment: Experiment, file: Option<&Path>, flags: &Overrides) -> Result<Self, ValidationError> {
        let mut cfg = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| bad("config", format!("cannot read {}: {e}", path.display())))?;
                Self::from_json_over_defaults(experiment, &text)?
            }
            None => Self::defaults(experiment),
        };
        if let Some(v) = flags.seed {
            cfg.seed = v;
        }
        if let Some(v) = &flags.out {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = flags.c {
            cfg.c = v;
        }
        if let Some(v) = flags.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = flags.threads {
            cfg.threads = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ValidationError> {
        serde_json::from_str(text).map_err(|e| bad("config", e.to_string()))
    }

    /// Radius of `Γ ∩ Δ_R` actually used.
    pub fn effective_radius(&self) -> f64 {
        if self.radius > 0.0 {
            return self.radius;
        }
        match self.experiment {
            Experiment::ConformalCheck => match cusp_core::CuspParams::new(self.c, self.alpha) {
                Ok(p) => cusp_core::conformal::injectivity_radius(p),
                Err(_) => f64::NAN,
            },
            _ => 1.0,
        }
    }

    /// Checks every knob before any computation starts.
    pub fn validate(&self) -> Result<(), ValidationError> {
        positive("c", self.c)?;
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(bad(
                "alpha",
                format!("must lie in the open interval (0,1), got {}", self.alpha),
            ));
        }
        if !(self.radius.is_finite() && self.radius >= 0.0) {
            return Err(bad(
                "radius",
                format!("must be 0 (default) or positive, got {}", self.radius),
            ));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(bad("output_dir", "must not be empty"));
        }
        let radius = self.effective_radius();
        match self.experiment {
            Experiment::GreenProfile => {
                positive("t_min", self.t_min)?;
                if !(self.t_max > self.t_min) {
                    return Err(bad("t_max", format!("must exceed t_min = {}", self.t_min)));
                }
                if !(self.t_max < radius / 2.0) {
                    return Err(bad(
                        "t_max",
                        format!("must stay below the pole at R/2 = {}", radius / 2.0),
                    ));
                }
                at_least("t_points", self.t_points, 3)?;
            }
            Experiment::ConformalCheck => {
                positive("s_min", self.s_min)?;
                if !(self.s_max > self.s_min && self.s_max < 1.0) {
                    return Err(bad(
                        "s_max",
                        format!("must lie in (s_min, 1) with s_min = {}", self.s_min),
                    ));
                }
                at_least("s_points", self.s_points, 4)?;
                at_least("pairs", self.pairs, 1)?;
                at_least("boundary_samples", self.boundary_samples, 1)?;
            }
            Experiment::BarrierCheck => {
                positive("b", self.b)?;
                if !(self.u0 > 0.0 && self.u0 < 1.0) {
                    return Err(bad("u0", format!("must lie in (0,1), got {}", self.u0)));
                }
                if !(self.region_radius > 0.0 && self.region_radius < self.u0) {
                    return Err(bad(
                        "region_radius",
                        format!("must lie in (0, u0) with u0 = {}", self.u0),
                    ));
                }
                if !(self.grid_h > 0.0 && self.grid_h < self.region_radius / 10.0) {
                    return Err(bad("grid_h", "must be positive and below region_radius / 10"));
                }
                at_least("condition_grid", self.condition_grid, 10)?;
                at_least("e2_samples", self.e2_samples, 1)?;
            }
            Experiment::HopfCertify => {
                at_least("samples", self.samples, 10)?;
                if !(self.tip_cutoff >= 1e-5 && self.tip_cutoff < radius / 2.0) {
                    return Err(bad("tip_cutoff", format!("must lie in [1e-5, R/2) with R = {radius}")));
                }
            }
            Experiment::ExhaustionSim => {
                at_least("table_terms", self.table_terms, 2)?;
            }
            Experiment::CapacityScan => {
                if !(1..=8).contains(&self.n) {
                    return Err(bad("n", format!("must lie in 1..=8, got {}", self.n)));
                }
                if self.k_min < 1 {
                    return Err(bad("k_min", "must be at least 1"));
                }
                if self.k_max < self.k_min {
                    return Err(bad("k_max", format!("must be at least k_min = {}", self.k_min)));
                }
                // Each extra shell roughly doubles the variational grid work.
                if self.k_max > 12 {
                    return Err(bad("k_max", format!("must be at most 12, got {}", self.k_max)));
                }
                if self.method == CapacityMethodName::BoxHitting {
                    at_least("trials", self.trials, 100)?;
                }
            }
        }
        Ok(())
    }
}

fn positive(field: &str, v: f64) -> Result<(), ValidationError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(bad(field, format!("must be positive and finite, got {v}")))
    }
}

fn at_least(field: &str, v: usize, min: usize) -> Result<(), ValidationError> {
    if v >= min {
        Ok(())
    } else {
        Err(bad(field, format!("must be at least {min}, got {v}")))
    }
}
