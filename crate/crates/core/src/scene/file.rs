//! JSON scene files.
//!
//! ```json
//! {
//!   "name": "pub",
//!   "sample_rate": 44100,            // optional, default 44100
//!   "speed_of_sound": 343.0,         // optional, default 343
//!   "seed": 0,                       // optional, default 0
//!   "profile": "razr-full",          // optional: name or full profile object
//!   "rooms": [{
//!     "id": "main", "origin": [0,0,0], "dims": [17.76, 10.2, 2.9],
//!     "decay_target": {"t30_bands": 0.7},        // or per-band array
//!     "absorption": 0.2,           // scalar, 8 bands, or 6 surfaces x 8 bands;
//!                                  // fitted from decay_target when omitted
//!     "scattering": 0.3,           // scalar or 8 bands, default 0
//!     "volume_override": 442.0     // optional
//!   }],
//!   "apertures": [], "panels": [], "sources": [...], "receivers": [...]
//! }
//! ```

use serde::{Deserialize, Serialize};

use super::{
    fit_absorption, ApertureSpec, DecayTarget, PanelSpec, ProfileRef, ReceiverSpec, RoomSpec, SceneSpec,
    SourceSpec, DEFAULT_SAMPLE_RATE, DEFAULT_SPEED_OF_SOUND,
};
use crate::bands::{self, Bands};
use crate::error::{Error, Result};
use crate::geom::Vec3;

#[derive(Deserialize)]
#[serde(untagged)]
enum AbsorptionDoc {
    Uniform(f64),
    PerBand(Bands),
    PerSurface([Bands; 6]),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum BandsDoc {
    Uniform(f64),
    PerBand(Bands),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub(super) struct RoomDoc {
    id: String,
    #[serde(default)]
    origin: Vec3,
    dims: Vec3,
    absorption: Option<AbsorptionDoc>,
    scattering: Option<BandsDoc>,
    volume_override: Option<f64>,
    decay_target: Option<DecayTarget>,
}

impl TryFrom<RoomDoc> for RoomSpec {
    type Error = String;

    fn try_from(doc: RoomDoc) -> std::result::Result<Self, String> {
        let scattering = match doc.scattering {
            None => bands::uniform(0.0),
            Some(BandsDoc::Uniform(s)) => bands::uniform(s),
            Some(BandsDoc::PerBand(b)) => b,
        };
        let mut room = RoomSpec {
            id: doc.id,
            origin: doc.origin,
            dims: doc.dims,
            absorption: [bands::uniform(0.0); 6],
            scattering,
            volume_override: doc.volume_override,
            decay_target: doc.decay_target,
        };
        room.absorption = match (doc.absorption, &room.decay_target) {
            (Some(AbsorptionDoc::Uniform(a)), _) => [bands::uniform(a); 6],
            (Some(AbsorptionDoc::PerBand(b)), _) => [b; 6],
            (Some(AbsorptionDoc::PerSurface(m)), _) => m,
            (None, Some(target)) => {
                if !(room.dims.x > 0.0 && room.dims.y > 0.0 && room.dims.z > 0.0) {
                    return Err("dims must be positive".into());
                }
                [fit_absorption(&room, target).map_err(|e| e.to_string())?; 6]
            }
            (None, None) => return Err("room needs `absorption` or `decay_target`".into()),
        };
        Ok(room)
    }
}

fn default_rate() -> u32 {
    DEFAULT_SAMPLE_RATE
}

fn default_c() -> f64 {
    DEFAULT_SPEED_OF_SOUND
}

/// On-disk form of a [`SceneSpec`]; defaults are filled during parsing.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDocument {
    #[serde(default)]
    name: Option<String>,
    rooms: Vec<RoomSpec>,
    #[serde(default)]
    apertures: Vec<ApertureSpec>,
    #[serde(default)]
    panels: Vec<PanelSpec>,
    sources: Vec<SourceSpec>,
    receivers: Vec<ReceiverSpec>,
    #[serde(default = "default_rate")]
    sample_rate: u32,
    #[serde(default = "default_c")]
    speed_of_sound: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    profile: Option<ProfileRef>,
}

/// Parse and validate a scene document.
pub fn parse_scene(document: &str) -> Result<SceneSpec> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let doc: SceneDocument = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Parse {
            field: if path.is_empty() { ".".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })?;
    let scene = SceneSpec {
        name: doc.name,
        rooms: doc.rooms,
        apertures: doc.apertures,
        panels: doc.panels,
        sources: doc.sources,
        receivers: doc.receivers,
        sample_rate: doc.sample_rate,
        speed_of_sound: doc.speed_of_sound,
        seed: doc.seed,
        profile: doc.profile,
    };
    scene.validate()?;
    if let Some(ProfileRef::Inline(p)) = &scene.profile {
        p.validate()?;
    }
    Ok(scene)
}

/// Canonical pretty-printed JSON; parsing it yields an identical scene.
pub fn serialize_scene(scene: &SceneSpec) -> String {
    #[derive(Serialize)]
    struct Canonical<'a>(&'a SceneSpec);
    serde_json::to_string_pretty(&Canonical(scene)).expect("scene serialization cannot fail")
}
