//! Run configuration shared by the pipeline, evaluation and CLI.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::height::PitchMode;
use crate::mrf::{MrfWeights, U0Aggregation};

pub const DEFAULT_MAX_RAY_DISTANCE: f64 = 30.0;
pub const DEFAULT_TP_RADIUS: f64 = 6.0;

/// Source of the camera height `h_c` used in elevation estimates.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum CameraHeight {
    /// Per-frame `camera_height` values from the input.
    #[default]
    Frames,
    /// One value for every frame, meters.
    Fixed(f64),
    /// Estimated from instances of a class assumed to lie at elevation 0.
    CalibrateFromClass(String),
}

const CALIBRATE_PREFIX: &str = "calibrate-from-class:";

impl FromStr for CameraHeight {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "frames" {
            return Ok(Self::Frames);
        }
        if let Some(label) = s.strip_prefix(CALIBRATE_PREFIX) {
            return Ok(Self::CalibrateFromClass(label.to_string()));
        }
        s.parse::<f64>().map(Self::Fixed).map_err(|_| {
            format!("camera height `{s}` is not a number, `frames` or `{CALIBRATE_PREFIX}<class>`")
        })
    }
}

impl fmt::Display for CameraHeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Frames => f.write_str("frames"),
            Self::Fixed(v) => write!(f, "{v}"),
            Self::CalibrateFromClass(label) => write!(f, "{CALIBRATE_PREFIX}{label}"),
        }
    }
}

impl Serialize for CameraHeight {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Fixed(v) => s.serialize_f64(*v),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for CameraHeight {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(Self::Fixed(v)),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub u0_aggregation: U0Aggregation,
    /// Largest camera-to-node distance kept in the graph, meters.
    pub max_ray_distance: f64,
    /// Largest single-linkage merge distance, meters.
    pub linkage_cutoff: f64,
    /// True-positive matching radius, meters.
    pub tp_radius: f64,
    pub pitch_mode: PitchMode,
    pub camera_height: CameraHeight,
    /// Split clusters by same-frame-pair counts.
    pub split_clusters: bool,
    /// Seed echoed into reports.
    pub seed: Option<u64>,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            beta: 0.05,
            lambda: 0.05,
            u0_aggregation: U0Aggregation::Sum,
            max_ray_distance: DEFAULT_MAX_RAY_DISTANCE,
            linkage_cutoff: 2.0,
            tp_radius: DEFAULT_TP_RADIUS,
            pitch_mode: PitchMode::Corrected,
            camera_height: CameraHeight::Frames,
            split_clusters: true,
            seed: None,
            execution: Execution::Parallel,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(vec![e.message().to_string()]))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn weights(&self) -> MrfWeights {
        MrfWeights {
            alpha: self.alpha,
            beta: self.beta,
            lambda: self.lambda,
            u0_aggregation: self.u0_aggregation,
        }
    }

    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = self.weights().validate().err().unwrap_or_default();
        for (name, v) in [
            ("max_ray_distance", self.max_ray_distance),
            ("linkage_cutoff", self.linkage_cutoff),
            ("tp_radius", self.tp_radius),
        ] {
            if !(v.is_finite() && v > 0.0) {
                problems.push(format!("{name}: {v} must be positive"));
            }
        }
        match &self.camera_height {
            CameraHeight::Fixed(v) if !v.is_finite() => {
                problems.push(format!("camera_height: {v} must be finite"));
            }
            CameraHeight::CalibrateFromClass(label) if label.is_empty() => {
                problems.push("camera_height: calibration class label is empty".into());
            }
            _ => {}
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Hyperparameter grid searched by `grid_search`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub linkage_cutoff: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        let steps: Vec<f64> = (0..=10).map(|k| f64::from(k) * 0.05).collect();
        Self {
            alpha: steps.clone(),
            beta: steps.clone(),
            lambda: steps,
            linkage_cutoff: vec![1.0, 2.0, 3.0, 4.0],
        }
    }
}

impl Grid {
    pub fn single(config: &RunConfig) -> Self {
        Self {
            alpha: vec![config.alpha],
            beta: vec![config.beta],
            lambda: vec![config.lambda],
            linkage_cutoff: vec![config.linkage_cutoff],
        }
    }

    /// Every combination in lexicographic (α, β, λ, cutoff) order.
    pub fn combinations(&self) -> Vec<[f64; 4]> {
        let mut out = Vec::new();
        for &a in &self.alpha {
            for &b in &self.beta {
                for &l in &self.lambda {
                    for &c in &self.linkage_cutoff {
                        out.push([a, b, l, c]);
                    }
                }
            }
        }
        out
    }
}
