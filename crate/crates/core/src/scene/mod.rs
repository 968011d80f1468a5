//! Scene description: rooms, apertures, panels, sources and receivers.
//!
//! All coordinates are world coordinates in meters. Rooms are axis-aligned
//! boxes `[origin, origin + dims]`. Surfaces are indexed
//! `[x-, x+, y-, y+, z-, z+]`.

mod file;
mod presets;
mod profile;

use serde::{Deserialize, Serialize};

use crate::bands::{self, Bands, N_BANDS};
use crate::error::{Error, Result};
use crate::geom::Vec3;

pub use file::{parse_scene, serialize_scene, SceneDocument};
pub use presets::{preset, PRESET_NAMES};
pub use profile::{
    CoupledMode, JitterConfig, OutputMode, ProfileRef, RenderingProfile, SmearingConfig, PROFILE_NAMES,
};

pub const DEFAULT_SAMPLE_RATE: u32 = 44_100;
pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

/// Sabine/Eyring constant 24·ln(10)/c at 343 m/s, as used in practice.
pub const EYRING_CONSTANT: f64 = 0.161;

/// Second decay slope caused by a coupled volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecondSlope {
    pub t30_2: f64,
    #[serde(default = "default_onset_level")]
    pub onset_level_db: f64,
}

fn default_onset_level() -> f64 {
    -40.0
}

/// Per-band reverberation time targets, optionally with a late second slope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayTarget {
    pub t30_bands: Bands,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_slope: Option<SecondSlope>,
}

impl DecayTarget {
    pub fn broadband(t30: f64) -> Self {
        DecayTarget {
            t30_bands: bands::uniform(t30),
            second_slope: None,
        }
    }

    pub fn with_second_slope(mut self, t30_2: f64, onset_level_db: f64) -> Self {
        self.second_slope = Some(SecondSlope { t30_2, onset_level_db });
        self
    }

    fn validate(&self, field: &str) -> Result<()> {
        if self.t30_bands.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::validation(format!("{field}.t30_bands"), "T30 must be positive"));
        }
        if let Some(s) = self.second_slope {
            if !(s.t30_2 > 0.0 && s.t30_2.is_finite()) {
                return Err(Error::validation(format!("{field}.second_slope.t30_2"), "must be positive"));
            }
            if !(s.onset_level_db < 0.0) {
                return Err(Error::validation(
                    format!("{field}.second_slope.onset_level_db"),
                    "must be negative",
                ));
            }
        }
        Ok(())
    }
}

impl<'de> Deserialize<'de> for DecayTarget {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum T30 {
            Broadband(f64),
            PerBand(Bands),
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Doc {
            t30_bands: T30,
            second_slope: Option<SecondSlope>,
        }
        let doc = Doc::deserialize(d)?;
        Ok(DecayTarget {
            t30_bands: match doc.t30_bands {
                T30::Broadband(t) => bands::uniform(t),
                T30::PerBand(b) => b,
            },
            second_slope: doc.second_slope,
        })
    }
}

/// An axis-aligned shoebox room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "file::RoomDoc")]
pub struct RoomSpec {
    pub id: String,
    pub origin: Vec3,
    pub dims: Vec3,
    /// Absorption per surface `[x-, x+, y-, y+, z-, z+]` per octave band.
    pub absorption: [Bands; 6],
    pub scattering: Bands,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volume_override: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay_target: Option<DecayTarget>,
}

impl RoomSpec {
    /// Room with uniform absorption fitted to `target` (Eyring).
    pub fn fitted(id: &str, origin: Vec3, dims: Vec3, target: DecayTarget, scattering: f64) -> Result<Self> {
        let mut room = RoomSpec {
            id: id.to_string(),
            origin,
            dims,
            absorption: [bands::uniform(0.0); 6],
            scattering: bands::uniform(scattering),
            volume_override: None,
            decay_target: None,
        };
        let alpha = fit_absorption(&room, &target)?;
        room.absorption = [alpha; 6];
        room.decay_target = Some(target);
        Ok(room)
    }

    pub fn max_corner(&self) -> Vec3 {
        self.origin + self.dims
    }

    /// Inclusive containment test with a 1 µm tolerance.
    pub fn contains(&self, p: Vec3) -> bool {
        let lo = self.origin;
        let hi = self.max_corner();
        (0..3).all(|i| p[i] >= lo[i] - 1e-6 && p[i] <= hi[i] + 1e-6)
    }

    /// Box volume, ignoring any override.
    pub fn box_volume(&self) -> f64 {
        self.dims.x * self.dims.y * self.dims.z
    }

    /// Area of each surface in `[x-, x+, y-, y+, z-, z+]` order.
    pub fn surface_areas(&self) -> [f64; 6] {
        let Vec3 { x, y, z } = self.dims;
        [y * z, y * z, x * z, x * z, x * y, x * y]
    }

    /// Area-weighted mean absorption per band.
    pub fn mean_absorption(&self) -> Bands {
        let areas = self.surface_areas();
        let total: f64 = areas.iter().sum();
        std::array::from_fn(|b| (0..6).map(|s| areas[s] * self.absorption[s][b]).sum::<f64>() / total)
    }

    /// Reverberation time per band: the explicit target if present, else the
    /// Eyring prediction from the absorption coefficients.
    pub fn t60_bands(&self) -> Bands {
        match &self.decay_target {
            Some(t) => t.t30_bands,
            None => eyring_t60(self),
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::validation(format!("{field}.id"), "must not be empty"));
        }
        if !self.origin.is_finite() {
            return Err(Error::validation(format!("{field}.origin"), "must be finite"));
        }
        if !(self.dims.is_finite() && self.dims.x > 0.0 && self.dims.y > 0.0 && self.dims.z > 0.0) {
            return Err(Error::validation(format!("{field}.dims"), "dimensions must be positive"));
        }
        for (s, row) in self.absorption.iter().enumerate() {
            for (b, &a) in row.iter().enumerate() {
                if !(0.0..1.0).contains(&a) {
                    return Err(Error::validation(
                        format!("{field}.absorption[{s}][{b}]"),
                        format!("absorption {a} outside [0, 1)"),
                    ));
                }
            }
        }
        for (b, &s) in self.scattering.iter().enumerate() {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::validation(
                    format!("{field}.scattering[{b}]"),
                    format!("scattering {s} outside [0, 1]"),
                ));
            }
        }
        if let Some(v) = self.volume_override {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{field}.volume_override"), "must be positive"));
            }
        }
        if let Some(t) = &self.decay_target {
            t.validate(&format!("{field}.decay_target"))?;
        }
        Ok(())
    }
}

/// Total surface area `2(LxLy + LxLz + LyLz)`.
pub fn surface_area(room: &RoomSpec) -> f64 {
    let Vec3 { x, y, z } = room.dims;
    2.0 * (x * y + x * z + y * z)
}

/// Acoustic volume: the override when set, else the box product.
pub fn volume(room: &RoomSpec) -> f64 {
    room.volume_override.unwrap_or_else(|| room.box_volume())
}

/// Uniform per-band absorption whose Eyring reverberation time equals the
/// target: `α = 1 − exp(−0.161·V / (S·T60))`.
///
/// `V` is the box volume, since the coefficients are applied to the box
/// walls of the image-source model.
pub fn fit_absorption(room: &RoomSpec, target: &DecayTarget) -> Result<Bands> {
    let v = room.box_volume();
    let s = surface_area(room);
    if !(v > 0.0 && s > 0.0) {
        return Err(Error::Infeasible(format!("room `{}` has no volume", room.id)));
    }
    let mut alpha = [0.0; N_BANDS];
    for (a, &t) in alpha.iter_mut().zip(&target.t30_bands) {
        if !(t > 0.0) {
            return Err(Error::Infeasible(format!("non-positive T60 target {t}")));
        }
        *a = 1.0 - (-EYRING_CONSTANT * v / (s * t)).exp();
        if !(*a < 1.0) {
            return Err(Error::Infeasible(format!(
                "T60 {t} s is too short for room `{}` (alpha >= 1)",
                room.id
            )));
        }
    }
    Ok(alpha)
}

/// Eyring reverberation time per band from the room's mean absorption.
pub fn eyring_t60(room: &RoomSpec) -> Bands {
    let v = room.box_volume();
    let s = surface_area(room);
    bands::map(&room.mean_absorption(), |a| EYRING_CONSTANT * v / (-s * (1.0 - a).ln()))
}

/// Sabine absorption for a target, `0.161·V / (S·T)`.
pub fn sabine_absorption(room: &RoomSpec, t60: f64) -> f64 {
    EYRING_CONSTANT * room.box_volume() / (surface_area(room) * t60)
}

/// Occlusion stand-in for a blocked direct path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcclusionFilter {
    pub attenuation_db: f64,
    /// First-order lowpass corner; `None` disables the lowpass.
    pub lowpass_hz: Option<f64>,
}

impl Default for OcclusionFilter {
    fn default() -> Self {
        OcclusionFilter {
            attenuation_db: -6.0,
            lowpass_hz: Some(2000.0),
        }
    }
}

impl OcclusionFilter {
    /// Per-band amplitude gain.
    pub fn band_gains(&self) -> Bands {
        let g = crate::dsp::from_db20(self.attenuation_db);
        std::array::from_fn(|b| {
            let lp = match self.lowpass_hz {
                Some(fc) => 1.0 / (1.0 + (bands::BAND_CENTERS[b] / fc).powi(2)).sqrt(),
                None => 1.0,
            };
            g * lp
        })
    }
}

/// Opening between two rooms (a door).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApertureSpec {
    pub connects: [String; 2],
    pub center: Vec3,
    pub width: f64,
    pub height: f64,
    /// Length of the occluded direct route through the aperture, if known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_length_direct: Option<f64>,
    #[serde(default)]
    pub occlusion: OcclusionFilter,
    /// Overrides the area-ratio coupling gain of the full coupling mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_gain: Option<f64>,
}

impl ApertureSpec {
    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

/// Shared wall of two adjacent rooms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharedWall {
    /// Axis normal to the wall (0 = x, 1 = y, 2 = z).
    pub axis: usize,
    /// Coordinate of the wall plane along `axis`.
    pub plane: f64,
    /// Overlap rectangle bounds on the two in-plane axes.
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl SharedWall {
    pub fn in_plane_axes(&self) -> [usize; 2] {
        match self.axis {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        }
    }

    pub fn area(&self) -> f64 {
        (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])
    }
}

/// Wall shared by two rooms, if they touch face to face (1 mm tolerance).
pub fn shared_wall(a: &RoomSpec, b: &RoomSpec) -> Option<SharedWall> {
    let tol = 1e-3;
    for axis in 0..3 {
        let plane = if (a.max_corner()[axis] - b.origin[axis]).abs() < tol {
            a.max_corner()[axis]
        } else if (b.max_corner()[axis] - a.origin[axis]).abs() < tol {
            a.origin[axis]
        } else {
            continue;
        };
        let axes = match axis {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        };
        let lo = axes.map(|i| a.origin[i].max(b.origin[i]));
        let hi = axes.map(|i| a.max_corner()[i].min(b.max_corner()[i]));
        if hi[0] - lo[0] > tol && hi[1] - lo[1] > tol {
            return Some(SharedWall { axis, plane, lo, hi });
        }
    }
    None
}

/// Rectangular reflector such as a table top or a chalkboard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelSpec {
    pub id: String,
    /// Corners in order around the rectangle.
    pub corners: [Vec3; 4],
    pub absorption: Bands,
}

impl PanelSpec {
    fn validate(&self, field: &str) -> Result<()> {
        let [a, b, c, d] = self.corners;
        if self.corners.iter().any(|p| !p.is_finite()) {
            return Err(Error::validation(format!("{field}.corners"), "must be finite"));
        }
        let e1 = b - a;
        let e2 = d - a;
        let normal = e1.cross(e2);
        if e1.norm() < 1e-6 || e2.norm() < 1e-6 || normal.norm() < 1e-9 {
            return Err(Error::validation(format!("{field}.corners"), "degenerate rectangle"));
        }
        let n = normal.normalized().expect("non-zero normal");
        if (c - a).dot(n).abs() > 1e-3 {
            return Err(Error::validation(format!("{field}.corners"), "corners not coplanar within 1 mm"));
        }
        if e1.dot(e2).abs() > 1e-6 * e1.norm() * e2.norm() || (a + e1 + e2).distance(c) > 1e-3 {
            return Err(Error::validation(format!("{field}.corners"), "corners do not form a rectangle"));
        }
        for (b, &al) in self.absorption.iter().enumerate() {
            if !(0.0..1.0).contains(&al) {
                return Err(Error::validation(format!("{field}.absorption[{b}]"), "outside [0, 1)"));
            }
        }
        Ok(())
    }
}

/// Source directivity sampled on a regular azimuth/elevation grid, per band.
///
/// Azimuth is measured in the source frame (0 = on axis, positive towards
/// the source's right); `gains[e][a]` holds the band gains at
/// `elevations_deg[e]`, `azimuths_deg[a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectivityGrid {
    pub azimuths_deg: Vec<f64>,
    pub elevations_deg: Vec<f64>,
    pub gains: Vec<Vec<Bands>>,
}

impl DirectivityGrid {
    pub fn omni(step_deg: f64) -> Self {
        let azimuths_deg: Vec<f64> = (0..).map(|i| i as f64 * step_deg).take_while(|&a| a < 360.0).collect();
        let elevations_deg: Vec<f64> = (0..)
            .map(|i| -90.0 + i as f64 * step_deg)
            .take_while(|&e| e <= 90.0 + 1e-9)
            .collect();
        let gains = vec![vec![bands::uniform(1.0); azimuths_deg.len()]; elevations_deg.len()];
        DirectivityGrid {
            azimuths_deg,
            elevations_deg,
            gains,
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        let az = &self.azimuths_deg;
        let el = &self.elevations_deg;
        if az.is_empty() || el.is_empty() {
            return Err(Error::validation(field, "empty grid"));
        }
        if az.windows(2).any(|w| w[1] <= w[0]) || el.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation(field, "grid axes must be strictly increasing"));
        }
        if az[0] < 0.0 || *az.last().unwrap() >= 360.0 {
            return Err(Error::validation(field, "azimuths must lie in [0, 360)"));
        }
        if (el[0] + 90.0).abs() > 1e-9 || (el.last().unwrap() - 90.0).abs() > 1e-9 {
            return Err(Error::validation(field, "elevations must span -90 to 90 degrees"));
        }
        if self.gains.len() != el.len() || self.gains.iter().any(|row| row.len() != az.len()) {
            return Err(Error::validation(field, "gain table shape does not match the grid"));
        }
        if self.gains.iter().flatten().flatten().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::validation(field, "gains must be finite and non-negative"));
        }
        Ok(())
    }

    /// Bilinear interpolation (azimuth wraps around).
    pub fn gain(&self, az_deg: f64, el_deg: f64) -> Bands {
        let az = az_deg.rem_euclid(360.0);
        let el = el_deg.clamp(-90.0, 90.0);
        let azs = &self.azimuths_deg;
        let els = &self.elevations_deg;
        let (a0, a1, ta) = {
            let n = azs.len();
            let i = azs.iter().rposition(|&a| a <= az).unwrap_or(n - 1);
            let j = (i + 1) % n;
            let lo = azs[i];
            let mut hi = azs[j];
            let mut x = az;
            if hi <= lo {
                hi += 360.0;
                if x < lo {
                    x += 360.0;
                }
            }
            let t = if hi > lo { (x - lo) / (hi - lo) } else { 0.0 };
            (i, j, t.clamp(0.0, 1.0))
        };
        let (e0, e1, te) = {
            let i = els.iter().rposition(|&e| e <= el).unwrap_or(0);
            let j = (i + 1).min(els.len() - 1);
            let t = if j > i { (el - els[i]) / (els[j] - els[i]) } else { 0.0 };
            (i, j, t.clamp(0.0, 1.0))
        };
        std::array::from_fn(|b| {
            let g = |e: usize, a: usize| self.gains[e][a][b];
            let top = g(e0, a0) * (1.0 - ta) + g(e0, a1) * ta;
            let bottom = g(e1, a0) * (1.0 - ta) + g(e1, a1) * ta;
            top * (1.0 - te) + bottom * te
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub id: String,
    pub room: String,
    pub position: Vec3,
    #[serde(default = "default_orientation")]
    pub orientation: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directivity: Option<DirectivityGrid>,
    #[serde(default)]
    pub level_db: f64,
}

fn default_orientation() -> Vec3 {
    Vec3::X
}

impl SourceSpec {
    pub fn omni(id: &str, room: &str, position: Vec3) -> Self {
        SourceSpec {
            id: id.into(),
            room: room.into(),
            position,
            orientation: Vec3::X,
            directivity: None,
            level_db: 0.0,
        }
    }

    /// Per-band directivity gain towards `direction` (world frame).
    pub fn directivity_gain(&self, direction: Vec3) -> Bands {
        match &self.directivity {
            None => bands::uniform(1.0),
            Some(grid) => {
                let local = crate::geom::Frame::from_forward(self.orientation).to_local(direction);
                let (az, el) = local.az_el_deg();
                grid.gain(az, el)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ReceiverKind {
    /// Head with an HRTF set; `None` selects the default set.
    Binaural {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hrtf: Option<String>,
    },
    Omni,
    /// Loudspeaker array; `None` selects the built-in 86-speaker layout.
    Array {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        layout: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSpec {
    pub id: String,
    pub room: String,
    pub position: Vec3,
    #[serde(default = "default_orientation")]
    pub orientation: Vec3,
    pub kind: ReceiverKind,
}

/// The complete input document.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub rooms: Vec<RoomSpec>,
    pub apertures: Vec<ApertureSpec>,
    pub panels: Vec<PanelSpec>,
    pub sources: Vec<SourceSpec>,
    pub receivers: Vec<ReceiverSpec>,
    pub sample_rate: u32,
    pub speed_of_sound: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileRef>,
}

impl SceneSpec {
    pub fn room(&self, id: &str) -> Result<&RoomSpec> {
        self.rooms.iter().find(|r| r.id == id).ok_or_else(|| Error::Unknown {
            kind: "room",
            name: id.to_string(),
        })
    }

    pub fn source(&self, id: Option<&str>) -> Result<&SourceSpec> {
        match id {
            None => self.sources.first().ok_or_else(|| Error::InvalidInput("scene has no source".into())),
            Some(id) => self.sources.iter().find(|s| s.id == id).ok_or_else(|| Error::Unknown {
                kind: "source",
                name: id.to_string(),
            }),
        }
    }

    pub fn receiver(&self, id: Option<&str>) -> Result<&ReceiverSpec> {
        match id {
            None => self
                .receivers
                .first()
                .ok_or_else(|| Error::InvalidInput("scene has no receiver".into())),
            Some(id) => self.receivers.iter().find(|r| r.id == id).ok_or_else(|| Error::Unknown {
                kind: "receiver",
                name: id.to_string(),
            }),
        }
    }

    /// Aperture joining rooms `a` and `b`, in either order.
    pub fn aperture_between(&self, a: &str, b: &str) -> Option<&ApertureSpec> {
        self.apertures
            .iter()
            .find(|ap| (ap.connects[0] == a && ap.connects[1] == b) || (ap.connects[0] == b && ap.connects[1] == a))
    }

    pub fn fs(&self) -> f64 {
        self.sample_rate as f64
    }

    /// Check every invariant of the scene and its parts.
    pub fn validate(&self) -> Result<()> {
        if self.rooms.is_empty() {
            return Err(Error::validation("rooms", "at least one room required"));
        }
        if self.sources.is_empty() {
            return Err(Error::validation("sources", "at least one source required"));
        }
        if self.receivers.is_empty() {
            return Err(Error::validation("receivers", "at least one receiver required"));
        }
        if self.sample_rate < 8000 {
            return Err(Error::validation("sample_rate", "must be at least 8000 Hz"));
        }
        if !(self.speed_of_sound > 0.0 && self.speed_of_sound.is_finite()) {
            return Err(Error::validation("speed_of_sound", "must be positive"));
        }
        for (i, room) in self.rooms.iter().enumerate() {
            room.validate(&format!("rooms[{i}]"))?;
            if self.rooms[..i].iter().any(|r| r.id == room.id) {
                return Err(Error::validation(format!("rooms[{i}].id"), "duplicate room id"));
            }
        }
        for (i, ap) in self.apertures.iter().enumerate() {
            let field = format!("apertures[{i}]");
            let a = self.room(&ap.connects[0]).map_err(|_| Error::validation(&field, "unknown room"))?;
            let b = self.room(&ap.connects[1]).map_err(|_| Error::validation(&field, "unknown room"))?;
            if !(ap.width > 0.0 && ap.height > 0.0) {
                return Err(Error::validation(&field, "width and height must be positive"));
            }
            let wall = shared_wall(a, b).ok_or_else(|| Error::validation(&field, "rooms are not adjacent"))?;
            if (ap.center[wall.axis] - wall.plane).abs() > 1e-3 {
                return Err(Error::validation(format!("{field}.center"), "not on the shared wall plane"));
            }
            // width runs along the first in-plane axis, height along the second (z for walls)
            let [u, v] = wall.in_plane_axes();
            let (half_u, half_v) = (ap.width / 2.0, ap.height / 2.0);
            let tol = 1e-3;
            if ap.center[u] - half_u < wall.lo[0] - tol
                || ap.center[u] + half_u > wall.hi[0] + tol
                || ap.center[v] - half_v < wall.lo[1] - tol
                || ap.center[v] + half_v > wall.hi[1] + tol
            {
                return Err(Error::validation(&field, "aperture extends beyond the shared wall"));
            }
            if let Some(p) = ap.path_length_direct {
                if !(p > 0.0) {
                    return Err(Error::validation(format!("{field}.path_length_direct"), "must be positive"));
                }
            }
        }
        for (i, p) in self.panels.iter().enumerate() {
            p.validate(&format!("panels[{i}]"))?;
        }
        for (i, s) in self.sources.iter().enumerate() {
            let field = format!("sources[{i}]");
            let room = self.room(&s.room).map_err(|_| Error::validation(format!("{field}.room"), "unknown room"))?;
            if !s.position.is_finite() || !room.contains(s.position) {
                return Err(Error::validation(format!("{field}.position"), "outside its room"));
            }
            if (s.orientation.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::validation(format!("{field}.orientation"), "must be a unit vector"));
            }
            if let Some(d) = &s.directivity {
                d.validate(&format!("{field}.directivity"))?;
            }
        }
        for (i, r) in self.receivers.iter().enumerate() {
            let field = format!("receivers[{i}]");
            let room = self.room(&r.room).map_err(|_| Error::validation(format!("{field}.room"), "unknown room"))?;
            if !r.position.is_finite() || !room.contains(r.position) {
                return Err(Error::validation(format!("{field}.position"), "outside its room"));
            }
            if (r.orientation.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::validation(format!("{field}.orientation"), "must be a unit vector"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube() -> RoomSpec {
        RoomSpec {
            id: "c".into(),
            origin: Vec3::ZERO,
            dims: Vec3::new(1.0, 1.0, 1.0),
            absorption: [bands::uniform(0.2); 6],
            scattering: bands::uniform(0.0),
            volume_override: None,
            decay_target: None,
        }
    }

    #[test]
    fn unit_cube_area_and_volume() {
        let c = cube();
        assert_eq!(surface_area(&c), 6.0);
        assert_eq!(volume(&c), 1.0);
        assert!((4.0 * volume(&c) / surface_area(&c) - 0.6667).abs() < 1e-4);
    }

    #[test]
    fn eyring_fit_living_room() {
        let room = RoomSpec::fitted(
            "living",
            Vec3::ZERO,
            Vec3::new(4.97, 3.78, 2.71),
            DecayTarget::broadband(0.54),
            0.3,
        )
        .unwrap();
        assert!((surface_area(&room) - 85.00).abs() < 0.01);
        let a = room.absorption[0][0];
        // hand evaluation: 1 - exp(-0.161*50.91/(85.00*0.54))
        assert!((a - 0.1636).abs() < 1e-3, "{a}");
        let sabine = sabine_absorption(&room, 0.54);
        assert!((sabine - 0.1786).abs() < 1e-3, "{sabine}");
        for t in eyring_t60(&room) {
            assert!((t - 0.54).abs() < 1e-9);
        }
    }

    #[test]
    fn absorption_vanishes_for_long_targets() {
        let c = cube();
        let a = fit_absorption(&c, &DecayTarget::broadband(1e12)).unwrap();
        assert!(a[0] < 1e-9);
        assert!(fit_absorption(&c, &DecayTarget::broadband(1e-6)).is_err());
    }

    #[test]
    fn occlusion_band_gains() {
        let g = OcclusionFilter::default().band_gains();
        assert!((g[0] - crate::dsp::from_db20(-6.0) / (1.0 + (125.0f64 / 2000.0).powi(2)).sqrt()).abs() < 1e-12);
        let flat = OcclusionFilter {
            attenuation_db: 0.0,
            lowpass_hz: None,
        };
        assert_eq!(flat.band_gains(), bands::uniform(1.0));
    }

    #[test]
    fn directivity_interpolation() {
        let mut grid = DirectivityGrid::omni(90.0);
        // half gain at azimuth 180 on the horizon
        let e = grid.elevations_deg.iter().position(|&e| e == 0.0).unwrap();
        let a = grid.azimuths_deg.iter().position(|&a| a == 180.0).unwrap();
        grid.gains[e][a] = bands::uniform(0.5);
        grid.validate("d").unwrap();
        assert!((grid.gain(135.0, 0.0)[0] - 0.75).abs() < 1e-12);
        assert!((grid.gain(0.0, 0.0)[0] - 1.0).abs() < 1e-12);
        assert!((grid.gain(-135.0, 0.0)[0] - 0.75).abs() < 1e-12);
    }
}
