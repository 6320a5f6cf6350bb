//! Declarative experiment description, presets and validation.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use maxinv_core::completion::QrConfig;
use maxinv_core::forward::{Geometry, IncidentWave, MediumConfig};
use maxinv_core::inversion::InversionConfig;
use maxinv_core::support::{Sampling, Support};
use maxinv_core::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub support: Support,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Waves {
    /// Directions `(cos 2πj/M, sin 2πj/M)`.
    Count(usize),
    Directions(Vec<[f64; 2]>),
}

impl Waves {
    pub fn build(&self) -> Result<Vec<IncidentWave>, Error> {
        match self {
            Waves::Count(0) => Err(Error::InvalidParameter("waves.count must be at least 1".into())),
            Waves::Count(m) => Ok(IncidentWave::equally_spaced(*m)),
            Waves::Directions(d) if d.is_empty() => Err(Error::InvalidParameter("waves.directions is empty".into())),
            Waves::Directions(d) => d.iter().map(|&v| IncidentWave::new(v)).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meshes {
    pub h_data: f64,
    pub h_v: f64,
    pub h_inverse: f64,
}

impl Meshes {
    pub fn desk() -> Meshes {
        Meshes {
            h_data: 0.03,
            h_v: 0.04,
            h_inverse: 0.08,
        }
    }

    pub fn paper_scale() -> Meshes {
        Meshes {
            h_data: 0.0138,
            h_v: 0.02,
            h_inverse: 0.0409,
        }
    }
}

impl Default for Meshes {
    fn default() -> Self {
        Meshes::desk()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ball,
    Ellipse,
    Multi,
    Fourier,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionSettings {
    pub stages: Vec<Stage>,
    /// Skip the ball warm start of a Fourier stage.
    #[serde(default)]
    pub fourier_cold_start: bool,
    #[serde(flatten)]
    pub params: InversionConfig,
}

impl Default for InversionSettings {
    fn default() -> Self {
        InversionSettings {
            stages: vec![Stage::Ball],
            fourier_cold_start: false,
            params: InversionConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Noise {
    pub eta: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub geometry: Geometry,
    #[serde(default)]
    pub medium: MediumConfig,
    /// `None` when the traces come from elsewhere.
    pub truth: Option<Truth>,
    pub waves: Waves,
    #[serde(default)]
    pub meshes: Meshes,
    #[serde(default)]
    pub qr: QrConfig,
    #[serde(default)]
    pub inversion: InversionSettings,
    #[serde(default)]
    pub noise: Noise,
    /// Use the exact interior traces of the dataset instead of completing
    /// the partial data.
    #[serde(default)]
    pub skip_completion: bool,
    /// Amplitudes of a sweep; each replaces `truth.amplitude`.
    #[serde(default)]
    pub sweep: Vec<f64>,
    #[serde(default)]
    pub sampling: Sampling,
    /// Accept `h_data == h_inverse`.
    #[serde(default)]
    pub allow_inverse_crime: bool,
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::InvalidParameter(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig, Error> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn checksum(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.geometry
            .validate()
            .map_err(|e| invalid("geometry", e))?;
        self.medium.validate().map_err(|e| invalid("medium", e))?;
        self.waves.build().map_err(|e| invalid("waves", e))?;
        let m = &self.meshes;
        for (name, h) in [("meshes.h_data", m.h_data), ("meshes.h_v", m.h_v), ("meshes.h_inverse", m.h_inverse)] {
            if !(h > 0.0 && h < self.geometry.radius) {
                return Err(invalid(name, format!("{h} must lie in (0, {})", self.geometry.radius)));
            }
        }
        if m.h_data >= m.h_inverse && !self.allow_inverse_crime {
            return Err(invalid(
                "meshes",
                format!(
                    "h_data ({}) must be finer than h_inverse ({}); set allow_inverse_crime to override",
                    m.h_data, m.h_inverse
                ),
            ));
        }
        self.qr.validate().map_err(|e| invalid("qr", e))?;
        self.inversion.params.validate().map_err(|e| invalid("inversion", e))?;
        if self.inversion.stages.is_empty() {
            return Err(invalid("inversion.stages", "at least one stage is required"));
        }
        if let Some(t) = &self.truth {
            t.support.validate().map_err(|e| invalid("truth.support", e))?;
            if !t.support.is_admissible(self.geometry.r_known) {
                return Err(invalid(
                    "truth.support",
                    format!("must lie inside the disk of radius r_known = {}", self.geometry.r_known),
                ));
            }
            for a in std::iter::once(t.amplitude).chain(self.sweep.iter().copied()) {
                if !(a.abs() < 1.0) {
                    return Err(invalid("truth.amplitude", format!("{a} must satisfy |a| < 1")));
                }
            }
        } else if !self.sweep.is_empty() {
            return Err(invalid("sweep", "an amplitude sweep requires a ground truth"));
        }
        if !(self.noise.eta >= 0.0) {
            return Err(invalid("noise.eta", format!("{} must be non-negative", self.noise.eta)));
        }
        Ok(())
    }

    pub fn preset(name: &str) -> Result<ExperimentConfig, Error> {
        let ball = Truth {
            support: Support::ball([-0.4, 0.0], 0.2),
            amplitude: 0.1,
        };
        let base = ExperimentConfig {
            name: name.to_string(),
            geometry: Geometry::default(),
            medium: MediumConfig::default(),
            truth: Some(ball),
            waves: Waves::Count(8),
            meshes: Meshes::desk(),
            qr: QrConfig::default(),
            inversion: InversionSettings::default(),
            noise: Noise::default(),
            skip_completion: false,
            sweep: Vec::new(),
            sampling: Sampling::default(),
            allow_inverse_crime: false,
        };
        let cfg = match name {
            "table1" => base,
            "table5" => ExperimentConfig {
                skip_completion: true,
                ..base
            },
            "table2" => ExperimentConfig {
                sweep: vec![
                    0.05, 0.1, 0.15, 0.2, 0.25, 0.3, -0.05, -0.1, -0.15, -0.2, -0.25, -0.3,
                ],
                ..base
            },
            "ellipse" => ExperimentConfig {
                truth: Some(Truth {
                    support: Support::Ellipse {
                        center: [-0.4, 0.0],
                        rx: 0.15,
                        ry: 0.25,
                    },
                    amplitude: 0.1,
                }),
                inversion: InversionSettings {
                    stages: vec![Stage::Ball, Stage::Ellipse],
                    ..InversionSettings::default()
                },
                ..base
            },
            "two_ball" => {
                let mut inversion = InversionSettings {
                    stages: vec![Stage::Multi],
                    ..InversionSettings::default()
                };
                inversion.params.peak_threshold = 0.2;
                ExperimentConfig {
                    geometry: Geometry {
                        r_known: 0.82,
                        r_int: 0.9,
                        ..Geometry::default()
                    },
                    truth: Some(Truth {
                        support: Support::Union {
                            parts: vec![Support::ball([-0.55, -0.45], 0.1), Support::ball([0.4, 0.6], 0.07)],
                        },
                        amplitude: 0.1,
                    }),
                    inversion,
                    ..base
                }
            }
            "star" => ExperimentConfig {
                truth: Some(Truth {
                    support: Support::FourierStar {
                        center: [-0.4, 0.0],
                        r0: 0.2,
                        coeffs: vec![(0.0, 0.0), (0.04, 0.0), (0.04, 0.0)],
                    },
                    amplitude: 0.1,
                }),
                skip_completion: true,
                inversion: InversionSettings {
                    stages: vec![Stage::Ball, Stage::Fourier],
                    ..InversionSettings::default()
                },
                ..base
            },
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown preset '{other}' (expected one of {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(cfg)
    }
}

pub const PRESETS: [&str; 6] = ["table1", "table2", "table5", "ellipse", "two_ball", "star"];
