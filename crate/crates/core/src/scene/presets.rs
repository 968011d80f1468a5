//! The three built-in scenes.
//!
//! Masker positions sit 1 m to the listener's right (azimuth +90°).

use super::{
    ApertureSpec, DecayTarget, OcclusionFilter, PanelSpec, ReceiverKind, ReceiverSpec, RoomSpec, SceneSpec,
    SourceSpec, DEFAULT_SAMPLE_RATE, DEFAULT_SPEED_OF_SOUND,
};
use crate::bands;
use crate::error::{Error, Result};
use crate::geom::Vec3;

pub const PRESET_NAMES: [&str; 3] = ["living-room", "pub", "underground"];

const SCATTERING: f64 = 0.3;

pub fn preset(name: &str) -> Result<SceneSpec> {
    let scene = match name {
        "living-room" => living_room(),
        "pub" => pub_scene(),
        "underground" => underground(),
        _ => {
            return Err(Error::Unknown {
                kind: "preset",
                name: name.to_string(),
            })
        }
    }?;
    scene.validate()?;
    Ok(scene)
}

fn scene(name: &str, rooms: Vec<RoomSpec>, sources: Vec<SourceSpec>, receiver: ReceiverSpec) -> SceneSpec {
    SceneSpec {
        name: Some(name.into()),
        rooms,
        apertures: Vec::new(),
        panels: Vec::new(),
        sources,
        receivers: vec![receiver],
        sample_rate: DEFAULT_SAMPLE_RATE,
        speed_of_sound: DEFAULT_SPEED_OF_SOUND,
        seed: 0,
        profile: None,
    }
}

fn listener(room: &str, position: Vec3, facing: Vec3) -> ReceiverSpec {
    ReceiverSpec {
        id: "listener".into(),
        room: room.into(),
        position,
        orientation: facing,
        kind: ReceiverKind::Binaural { hrtf: None },
    }
}

fn talker(id: &str, room: &str, position: Vec3, facing: Vec3) -> SourceSpec {
    SourceSpec {
        orientation: facing.normalized().expect("non-zero facing"),
        ..SourceSpec::omni(id, room, position)
    }
}

fn rectangle(id: &str, corners: [[f64; 3]; 4], alpha: f64) -> PanelSpec {
    PanelSpec {
        id: id.into(),
        corners: corners.map(Vec3::from),
        absorption: bands::uniform(alpha),
    }
}

/// Living room with an adjoining kitchen behind a door; the talker stands in
/// the kitchen, out of sight, 5.7 m from the listener along the route
/// through the door.
fn living_room() -> Result<SceneSpec> {
    let living = RoomSpec::fitted(
        "living",
        Vec3::ZERO,
        Vec3::new(4.97, 3.78, 2.71),
        DecayTarget::broadband(0.54),
        SCATTERING,
    )?;
    let kitchen = RoomSpec::fitted(
        "kitchen",
        Vec3::new(0.0, 3.78, 0.0),
        Vec3::new(4.97, 2.00, 2.71),
        DecayTarget::broadband(0.66),
        SCATTERING,
    )?;
    let path = 5.7;
    let door = Vec3::new(4.0, 3.78, 1.0);
    let receiver = Vec3::new(1.2, 1.0, 1.2);
    // place the talker so that receiver -> door -> talker is exactly `path` long
    let (dy, dz) = (1.42, 0.5);
    let leg = path - receiver.distance(door);
    let source = Vec3::new(door.x - (leg * leg - dy * dy - dz * dz).sqrt(), door.y + dy, door.z + dz);
    let mut s = scene(
        "living-room",
        vec![living, kitchen],
        vec![
            talker("target", "kitchen", source, door - source),
            talker("masker", "living", Vec3::new(2.2, 1.0, 1.2), -Vec3::X),
        ],
        listener("living", receiver, Vec3::Y),
    );
    s.apertures.push(ApertureSpec {
        connects: ["living".into(), "kitchen".into()],
        center: door,
        width: 0.8,
        height: 2.0,
        path_length_direct: Some(path),
        occlusion: OcclusionFilter::default(),
        coupling_gain: None,
    });
    Ok(s)
}

/// Pub with the talker across a table; the table top and a chalkboard
/// behind the pair act as nearby reflectors.
fn pub_scene() -> Result<SceneSpec> {
    let mut room = RoomSpec::fitted(
        "pub",
        Vec3::ZERO,
        Vec3::new(17.76, 10.2, 2.9),
        DecayTarget::broadband(0.7),
        SCATTERING,
    )?;
    room.volume_override = Some(442.0);
    let receiver = Vec3::new(8.0, 5.0, 1.2);
    let mut s = scene(
        "pub",
        vec![room],
        vec![
            talker("target", "pub", Vec3::new(8.97, 5.0, 1.2), -Vec3::X),
            talker("masker", "pub", Vec3::new(8.0, 4.0, 1.2), Vec3::Y),
        ],
        listener("pub", receiver, Vec3::X),
    );
    s.panels.push(rectangle(
        "table",
        [[7.9, 4.6, 0.75], [9.1, 4.6, 0.75], [9.1, 5.4, 0.75], [7.9, 5.4, 0.75]],
        0.1,
    ));
    s.panels.push(rectangle(
        "chalkboard",
        [[7.5, 6.0, 0.9], [9.5, 6.0, 0.9], [9.5, 6.0, 2.1], [7.5, 6.0, 2.1]],
        0.05,
    ));
    Ok(s)
}

/// Underground platform hall; coupled tunnels produce a slow second decay.
fn underground() -> Result<SceneSpec> {
    let mut room = RoomSpec::fitted(
        "station",
        Vec3::ZERO,
        Vec3::new(120.0, 15.7, 4.16),
        DecayTarget::broadband(1.6).with_second_slope(3.2, -40.0),
        SCATTERING,
    )?;
    room.volume_override = Some(11000.0);
    Ok(scene(
        "underground",
        vec![room],
        vec![
            talker("target", "station", Vec3::new(66.37, 5.0, 1.7), -Vec3::X),
            talker("masker", "station", Vec3::new(60.0, 4.0, 1.7), Vec3::Y),
        ],
        listener("station", Vec3::new(60.0, 5.0, 1.7), Vec3::X),
    ))
}
