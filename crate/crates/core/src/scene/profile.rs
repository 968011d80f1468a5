use serde::{Deserialize, Serialize};

use super::SceneSpec;
use crate::bands::Bands;
use crate::error::{Error, Result};

/// Named rendering profiles.
pub const PROFILE_NAMES: [&str; 6] = ["razr-full", "razr-1st", "razr-simple", "ism-15", "anechoic", "diotic"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoupledMode {
    /// Aperture-mediated early path plus cross-coupled late reverberation.
    Full,
    /// Source room simulated to the closed aperture, then re-radiated.
    TwoStage,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputMode {
    Binaural,
    Array,
    Diotic,
    Mono,
}

impl std::str::FromStr for OutputMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binaural" => Ok(OutputMode::Binaural),
            "array" => Ok(OutputMode::Array),
            "diotic" => Ok(OutputMode::Diotic),
            "mono" => Ok(OutputMode::Mono),
            _ => Err(Error::Unknown {
                kind: "output mode",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JitterConfig {
    pub enabled: bool,
    /// Standard deviation per axis and per reflection order, in meters.
    pub sigma_per_order: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmearingConfig {
    pub enabled: bool,
    /// Diffuse burst duration per reflection order, in milliseconds.
    pub burst_ms_per_order: f64,
    /// Scattered energy fraction per band; the room's scattering
    /// coefficients are used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scattering: Option<Bands>,
}

/// The switchboard selecting which simulation features are active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderingProfile {
    pub name: String,
    pub ism_order: u32,
    pub jitter: JitterConfig,
    pub smearing: SmearingConfig,
    pub fdn_enabled: bool,
    pub coupled_mode: CoupledMode,
    pub panels_enabled: bool,
    pub dual_slope_enabled: bool,
    pub anechoic: bool,
    #[serde(default)]
    pub air_absorption: bool,
    pub output_mode: OutputMode,
}

/// Profile given by name or spelled out in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileRef {
    Name(String),
    Inline(RenderingProfile),
}

impl RenderingProfile {
    /// All features on: third-order jittered and smeared image sources, late
    /// reverberation, full coupling, reflector panels and dual-slope decay.
    pub fn razr_full() -> Self {
        RenderingProfile {
            name: "razr-full".into(),
            ism_order: 3,
            jitter: JitterConfig {
                enabled: true,
                sigma_per_order: 0.1,
            },
            smearing: SmearingConfig {
                enabled: true,
                burst_ms_per_order: 2.0,
                scattering: None,
            },
            fdn_enabled: true,
            coupled_mode: CoupledMode::Full,
            panels_enabled: true,
            dual_slope_enabled: true,
            anechoic: false,
            air_absorption: false,
            output_mode: OutputMode::Binaural,
        }
    }

    pub fn razr_1st() -> Self {
        RenderingProfile {
            name: "razr-1st".into(),
            ism_order: 1,
            ..Self::razr_full()
        }
    }

    /// Full profile with the scene's distinguishing feature removed: coupled
    /// rooms become a two-stage simulation, reflector panels are dropped and
    /// the dual-slope decay is disabled.
    pub fn razr_simple() -> Self {
        RenderingProfile {
            name: "razr-simple".into(),
            coupled_mode: CoupledMode::TwoStage,
            panels_enabled: false,
            dual_slope_enabled: false,
            ..Self::razr_full()
        }
    }

    /// Plain 15th-order image sources without any diffuse processing.
    pub fn ism_15() -> Self {
        RenderingProfile {
            name: "ism-15".into(),
            ism_order: 15,
            jitter: JitterConfig {
                enabled: false,
                sigma_per_order: 0.1,
            },
            smearing: SmearingConfig {
                enabled: false,
                burst_ms_per_order: 2.0,
                scattering: None,
            },
            fdn_enabled: false,
            coupled_mode: CoupledMode::TwoStage,
            panels_enabled: false,
            dual_slope_enabled: false,
            anechoic: false,
            air_absorption: false,
            output_mode: OutputMode::Binaural,
        }
    }

    /// Direct sound only (inverse-square law, occlusion stand-in where blocked).
    pub fn anechoic() -> Self {
        RenderingProfile {
            name: "anechoic".into(),
            ism_order: 0,
            fdn_enabled: false,
            coupled_mode: CoupledMode::Off,
            panels_enabled: false,
            dual_slope_enabled: false,
            anechoic: true,
            ..Self::ism_15()
        }
    }

    /// Full simulation collapsed to identical ear signals.
    pub fn diotic() -> Self {
        RenderingProfile {
            name: "diotic".into(),
            output_mode: OutputMode::Diotic,
            ..Self::razr_full()
        }
    }

    pub fn named(name: &str) -> Result<Self> {
        match name {
            "razr-full" | "razr" => Ok(Self::razr_full()),
            "razr-1st" | "razr-1st-order" => Ok(Self::razr_1st()),
            "razr-simple" => Ok(Self::razr_simple()),
            "ism-15" | "ism" => Ok(Self::ism_15()),
            "anechoic" => Ok(Self::anechoic()),
            "diotic" => Ok(Self::diotic()),
            _ => Err(Error::Unknown {
                kind: "profile",
                name: name.to_string(),
            }),
        }
    }

    /// Resolve the profile a scene asks for; defaults to `razr-full`.
    pub fn for_scene(scene: &SceneSpec) -> Result<Self> {
        match &scene.profile {
            None => Ok(Self::razr_full()),
            Some(ProfileRef::Name(n)) => Self::named(n),
            Some(ProfileRef::Inline(p)) => {
                p.validate()?;
                Ok(p.clone())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.anechoic && (self.fdn_enabled || self.ism_order != 0) {
            return Err(Error::validation(
                "profile",
                "anechoic profiles require ism_order = 0 and fdn_enabled = false",
            ));
        }
        if !(self.jitter.sigma_per_order >= 0.0 && self.jitter.sigma_per_order.is_finite()) {
            return Err(Error::validation("profile.jitter.sigma_per_order", "must be non-negative"));
        }
        if !(self.smearing.burst_ms_per_order > 0.0) {
            return Err(Error::validation("profile.smearing.burst_ms_per_order", "must be positive"));
        }
        if let Some(s) = &self.smearing.scattering {
            if s.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::validation("profile.smearing.scattering", "outside [0, 1]"));
            }
        }
        Ok(())
    }
}
