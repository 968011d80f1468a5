//! Shoebox image sources, jitter, temporal smearing and finite reflectors.

use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::bands::{Bands, N_BANDS};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::rng;
use crate::scene::{JitterConfig, PanelSpec, RenderingProfile, RoomSpec, SceneSpec, SmearingConfig, SourceSpec};

/// Air attenuation in dB per meter for each octave band (20 °C, 50 % RH).
pub const AIR_ABSORPTION_DB_PER_M: Bands = [0.00044, 0.00131, 0.00273, 0.00466, 0.00986, 0.0328, 0.117, 0.40];

#[derive(Debug, Clone, PartialEq)]
pub struct ImageSource {
    pub position: Vec3,
    pub order: u32,
    /// Reflection count per surface `[x-, x+, y-, y+, z-, z+]`.
    pub wall_hits: [u32; 6],
    /// Signed lattice index per axis; odd entries are mirrored on that axis.
    pub lattice: [i32; 3],
    pub band_gain: Bands,
    pub jittered: bool,
}

impl ImageSource {
    /// Whether the image is mirrored an odd number of times along `axis`.
    pub fn mirrored(&self, axis: usize) -> bool {
        self.lattice[axis] % 2 != 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TapKind {
    Image,
    Panel,
    /// Stand-in for sound diffracted around an obstruction.
    Occluded,
}

/// Exponentially decaying noise attached to a tap.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffuseBurst {
    pub duration: f64,
    pub seed: u64,
    /// Per-band amplitude carried by the burst (the burst itself has unit energy).
    pub amplitude: Bands,
}

impl DiffuseBurst {
    /// Unit-energy burst decaying by 60 dB over its duration.
    pub fn samples(&self, fs: f64) -> Vec<f64> {
        let n = ((self.duration * fs).round() as usize).max(1);
        let tau = n as f64 / 1000f64.ln();
        let mut r = rng::derive(self.seed, "burst", 0);
        let mut x: Vec<f64> = (0..n)
            .map(|i| {
                let g: f64 = StandardNormal.sample(&mut r);
                g * (-(i as f64) / tau).exp()
            })
            .collect();
        let e = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if e > 0.0 {
            x.iter_mut().for_each(|v| *v /= e);
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionTap {
    /// Seconds after emission.
    pub delay: f64,
    pub amplitude: Bands,
    /// Unit vector from the receiver towards the apparent source (world frame).
    pub doa: Vec3,
    pub order: u32,
    pub kind: TapKind,
    pub diffuse_burst: Option<DiffuseBurst>,
}

impl ReflectionTap {
    /// Per-band energy including the diffuse burst.
    pub fn band_energy(&self) -> Bands {
        let burst = self.diffuse_burst.as_ref().map_or([0.0; N_BANDS], |b| b.amplitude);
        std::array::from_fn(|i| self.amplitude[i].powi(2) + burst[i].powi(2))
    }
}

/// Direction-labelled diffuse streams from the late reverberation engine.
#[derive(Debug, Clone, PartialEq)]
pub struct Tail {
    /// Sample index of the first stream sample.
    pub start: usize,
    pub streams: Vec<Vec<f64>>,
    /// World-frame direction of each stream.
    pub directions: Vec<Vec3>,
}

impl Tail {
    pub fn len(&self) -> usize {
        self.streams.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sum of all streams, starting at sample 0.
    pub fn mono(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.start + self.len()];
        for s in &self.streams {
            for (o, v) in y[self.start..].iter_mut().zip(s) {
                *o += v;
            }
        }
        y
    }
}

/// Mono pre-filter convolved into the rendered output, used to inject the
/// response of a neighbouring room.
#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    pub samples: Vec<f64>,
    /// Whether the tail is convolved too, or only the taps.
    pub applies_to_tail: bool,
}

/// Directional impulse response prior to spatialization.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialIR {
    pub sample_rate: u32,
    /// Listener facing direction (world frame).
    pub orientation: Vec3,
    /// Sorted by delay.
    pub taps: Vec<ReflectionTap>,
    pub tail: Option<Tail>,
    pub signature: Option<Signature>,
}

impl SpatialIR {
    pub fn new(sample_rate: u32, orientation: Vec3, mut taps: Vec<ReflectionTap>) -> Self {
        sort_taps(&mut taps);
        SpatialIR {
            sample_rate,
            orientation,
            taps,
            tail: None,
            signature: None,
        }
    }

    pub fn fs(&self) -> f64 {
        self.sample_rate as f64
    }

    pub fn first_delay(&self) -> Option<f64> {
        self.taps.first().map(|t| t.delay)
    }

    /// Sample count covered by taps, bursts and tail (before any signature).
    pub fn span(&self) -> usize {
        let fs = self.fs();
        let taps = self
            .taps
            .iter()
            .map(|t| {
                let burst = t.diffuse_burst.as_ref().map_or(1, |b| ((b.duration * fs).round() as usize).max(1));
                (t.delay * fs).round() as usize + burst
            })
            .max()
            .unwrap_or(0);
        let tail = self.tail.as_ref().map_or(0, |t| t.start + t.len());
        taps.max(tail)
    }
}

pub(crate) fn sort_taps(taps: &mut [ReflectionTap]) {
    taps.sort_by(|a, b| a.delay.total_cmp(&b.delay));
}

/// All image sources of order `<= max_order`, sorted by order, then wall
/// hits, then lattice index.
pub fn enumerate_images(room: &RoomSpec, source: Vec3, max_order: u32) -> Result<Vec<ImageSource>> {
    if !room.contains(source) {
        return Err(Error::OutsideRoom { room: room.id.clone() });
    }
    let rel = source - room.origin;
    let n = max_order as i32;
    let mut images = Vec::new();
    for kx in -n..=n {
        let rx = n - kx.abs();
        for ky in -rx..=rx {
            let rz = rx - ky.abs();
            for kz in -rz..=rz {
                images.push(image(room, rel, [kx, ky, kz]));
            }
        }
    }
    images.sort_by(|a, b| (a.order, a.wall_hits, a.lattice).cmp(&(b.order, b.wall_hits, b.lattice)));
    Ok(images)
}

fn image(room: &RoomSpec, rel: Vec3, lattice: [i32; 3]) -> ImageSource {
    let mut pos = [0.0; 3];
    let mut hits = [0u32; 6];
    for axis in 0..3 {
        let k = lattice[axis];
        // k = 2n - p with parity p
        let p = k.rem_euclid(2);
        let n = (k + p) / 2;
        let l = room.dims[axis];
        let sign = if p == 1 { -1.0 } else { 1.0 };
        pos[axis] = room.origin[axis] + sign * rel[axis] + 2.0 * n as f64 * l;
        hits[2 * axis] = (n - p).unsigned_abs();
        hits[2 * axis + 1] = n.unsigned_abs();
    }
    let band_gain = std::array::from_fn(|b| {
        (0..6).fold(1.0, |g, s| g * (1.0 - room.absorption[s][b]).sqrt().powi(hits[s] as i32))
    });
    ImageSource {
        position: Vec3::from(pos),
        order: hits.iter().sum(),
        wall_hits: hits,
        lattice,
        band_gain,
        jittered: false,
    }
}

fn lattice_key(lattice: [i32; 3]) -> u64 {
    lattice
        .iter()
        .fold(0u64, |acc, &k| (acc << 21) | ((k + (1 << 20)) as u64 & 0x1F_FFFF))
}

/// Gaussian displacement of images of order two and above. Each image draws
/// from its own stream, keyed by its lattice index.
pub fn apply_jitter(images: &[ImageSource], jitter: &JitterConfig, seed: u64) -> Vec<ImageSource> {
    if !jitter.enabled || jitter.sigma_per_order == 0.0 {
        return images.to_vec();
    }
    images
        .iter()
        .map(|im| {
            if im.order < 2 {
                return im.clone();
            }
            let sigma = jitter.sigma_per_order * im.order as f64;
            let normal = Normal::new(0.0, sigma).expect("finite sigma");
            let mut r = rng::derive(seed, "jitter", lattice_key(im.lattice));
            let d = Vec3::new(normal.sample(&mut r), normal.sample(&mut r), normal.sample(&mut r));
            ImageSource {
                position: im.position + d,
                jittered: true,
                ..im.clone()
            }
        })
        .collect()
}

/// One tap per image: delay `r/c`, amplitude `band_gain/r` times the
/// source's level and directivity at the emission angle.
pub fn taps_from_images(images: &[ImageSource], receiver: Vec3, c: f64, source: &SourceSpec) -> Result<Vec<ReflectionTap>> {
    let level = crate::dsp::from_db20(source.level_db);
    let mut taps = Vec::with_capacity(images.len());
    for im in images {
        let v = im.position - receiver;
        let r = v.norm();
        if r < 1e-9 {
            return Err(Error::DegenerateGeometry(format!(
                "image of order {} coincides with the receiver",
                im.order
            )));
        }
        // emission direction in the real room: undo the mirroring
        let towards_receiver = -v / r;
        let emit = Vec3::new(
            if im.mirrored(0) { -towards_receiver.x } else { towards_receiver.x },
            if im.mirrored(1) { -towards_receiver.y } else { towards_receiver.y },
            if im.mirrored(2) { -towards_receiver.z } else { towards_receiver.z },
        );
        let dir = source.directivity_gain(emit);
        taps.push(ReflectionTap {
            delay: r / c,
            amplitude: std::array::from_fn(|b| im.band_gain[b] * dir[b] * level / r),
            doa: v / r,
            order: im.order,
            kind: TapKind::Image,
            diffuse_burst: None,
        });
    }
    sort_taps(&mut taps);
    Ok(taps)
}

/// Frequency-dependent air attenuation over each tap's path length.
pub fn apply_air_absorption(taps: &mut [ReflectionTap], c: f64) {
    for t in taps {
        let r = t.delay * c;
        for b in 0..N_BANDS {
            t.amplitude[b] *= crate::dsp::from_db20(-AIR_ABSORPTION_DB_PER_M[b] * r);
        }
    }
}

/// Split every reflected tap into a specular part `sqrt(1 - s)` and a diffuse
/// burst `sqrt(s)` lasting `burst_ms_per_order * order`. Band energy is kept.
pub fn smear_taps(taps: &[ReflectionTap], smearing: &SmearingConfig, scattering: &Bands, seed: u64) -> Vec<ReflectionTap> {
    if !smearing.enabled {
        return taps.to_vec();
    }
    let s = smearing.scattering.unwrap_or(*scattering);
    if s.iter().all(|&v| v == 0.0) {
        return taps.to_vec();
    }
    taps.iter()
        .enumerate()
        .map(|(i, t)| {
            if t.order == 0 || t.diffuse_burst.is_some() {
                return t.clone();
            }
            ReflectionTap {
                amplitude: std::array::from_fn(|b| t.amplitude[b] * (1.0 - s[b]).sqrt()),
                diffuse_burst: Some(DiffuseBurst {
                    duration: smearing.burst_ms_per_order * 1e-3 * t.order as f64,
                    seed: rng::derive_seed(seed, "smear", i as u64),
                    amplitude: std::array::from_fn(|b| t.amplitude[b] * s[b].sqrt()),
                }),
                ..t.clone()
            }
        })
        .collect()
}

/// Specular reflection off a finite rectangle, if the reflection point lies
/// inside it.
pub fn reflect_finite_panel(panel: &PanelSpec, source: &SourceSpec, receiver: Vec3, c: f64) -> Option<ReflectionTap> {
    let [a, b, _, d] = panel.corners;
    let e1 = b - a;
    let e2 = d - a;
    let n = e1.cross(e2).normalized()?;
    let ds = (source.position - a).dot(n);
    let dr = (receiver - a).dot(n);
    if ds * dr <= 0.0 {
        return None;
    }
    let mirror = source.position - n * (2.0 * ds);
    // intersection of mirror -> receiver with the panel plane
    let t = ds / (ds + dr);
    let hit = mirror + (receiver - mirror) * t;
    let u = (hit - a).dot(e1) / e1.dot(e1);
    let v = (hit - a).dot(e2) / e2.dot(e2);
    if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
        return None;
    }
    let path = mirror - receiver;
    let r = path.norm();
    let emit = (hit - source.position).normalized()?;
    let dir = source.directivity_gain(emit);
    let level = crate::dsp::from_db20(source.level_db);
    Some(ReflectionTap {
        delay: r / c,
        amplitude: std::array::from_fn(|i| (1.0 - panel.absorption[i]).sqrt() * dir[i] * level / r),
        doa: path / r,
        order: 1,
        kind: TapKind::Panel,
        diffuse_burst: None,
    })
}

/// Early part for a source and receiver in the same room: images, jitter,
/// taps, panels, then smearing. `stream` separates random streams of
/// several simulations within one scene.
pub fn room_early_ir(
    scene: &SceneSpec,
    room: &RoomSpec,
    source: &SourceSpec,
    receiver: Vec3,
    orientation: Vec3,
    profile: &RenderingProfile,
    stream: u64,
) -> Result<SpatialIR> {
    if !room.contains(receiver) {
        return Err(Error::OutsideRoom { room: room.id.clone() });
    }
    let c = scene.speed_of_sound;
    let seed = rng::derive_seed(scene.seed, "room", stream);
    let order = if profile.anechoic { 0 } else { profile.ism_order };
    let images = enumerate_images(room, source.position, order)?;
    let images = apply_jitter(&images, &profile.jitter, seed);
    let mut taps = taps_from_images(&images, receiver, c, source)?;
    if profile.panels_enabled && !profile.anechoic {
        for panel in &scene.panels {
            if room.contains(panel.corners[0]) && room.contains(panel.corners[2]) {
                taps.extend(reflect_finite_panel(panel, source, receiver, c));
            }
        }
        sort_taps(&mut taps);
    }
    if profile.air_absorption {
        apply_air_absorption(&mut taps, c);
    }
    let taps = smear_taps(&taps, &profile.smearing, &room.scattering, seed);
    Ok(SpatialIR::new(scene.sample_rate, orientation, taps))
}

/// Early part of the scene's first source/receiver pair.
pub fn early_spatial_ir(scene: &SceneSpec, profile: &RenderingProfile) -> Result<SpatialIR> {
    let source = scene.source(None)?;
    let receiver = scene.receiver(None)?;
    if source.room == receiver.room {
        let room = scene.room(&receiver.room)?;
        room_early_ir(scene, room, source, receiver.position, receiver.orientation, profile, 0)
    } else {
        crate::coupled::coupled_early(scene, profile)
    }
}

/// Random draw helper shared with the late reverberation engine.
pub(crate) fn gaussian(r: &mut rng::Rng) -> f64 {
    let v: f64 = r.sample(StandardNormal);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bands;
    use crate::scene::RenderingProfile;

    fn shoebox(dims: Vec3, alpha: f64) -> RoomSpec {
        RoomSpec {
            id: "r".into(),
            origin: Vec3::new(1.0, -2.0, 0.5),
            dims,
            absorption: [bands::uniform(alpha); 6],
            scattering: bands::uniform(0.3),
            volume_override: None,
            decay_target: None,
        }
    }

    #[test]
    fn order_counts() {
        let room = shoebox(Vec3::new(5.0, 4.0, 3.0), 0.2);
        let src = Vec3::new(2.0, 0.0, 1.5);
        assert_eq!(enumerate_images(&room, src, 0).unwrap().len(), 1);
        assert_eq!(enumerate_images(&room, src, 1).unwrap().len(), 7);
        assert_eq!(enumerate_images(&room, src, 3).unwrap().len(), 63);
        let all = enumerate_images(&room, src, 15).unwrap();
        assert_eq!(all.len(), 4991);
        for n in 1..=15u32 {
            let count = all.iter().filter(|i| i.order == n).count() as u32;
            assert_eq!(count, 4 * n * n + 2);
        }
    }

    #[test]
    fn first_order_images_mirror_each_wall() {
        let room = shoebox(Vec3::new(5.0, 4.0, 3.0), 0.36);
        let src = Vec3::new(2.0, 0.0, 1.5);
        let images = enumerate_images(&room, src, 1).unwrap();
        assert_eq!(images[0].position, src);
        let lo = room.origin;
        let hi = room.max_corner();
        let expected = [
            Vec3::new(2.0 * lo.x - src.x, src.y, src.z),
            Vec3::new(2.0 * hi.x - src.x, src.y, src.z),
            Vec3::new(src.x, 2.0 * lo.y - src.y, src.z),
            Vec3::new(src.x, 2.0 * hi.y - src.y, src.z),
            Vec3::new(src.x, src.y, 2.0 * lo.z - src.z),
            Vec3::new(src.x, src.y, 2.0 * hi.z - src.z),
        ];
        for e in expected {
            let found = images.iter().find(|i| i.position.distance(e) < 1e-12).unwrap();
            assert_eq!(found.order, 1);
            assert!((found.band_gain[0] - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn tap_delay_and_amplitude() {
        let room = shoebox(Vec3::new(10.0, 10.0, 10.0), 0.0);
        let src = SourceSpec::omni("s", "r", Vec3::new(2.0, 0.0, 1.5));
        let images = enumerate_images(&room, src.position, 0).unwrap();
        let taps = taps_from_images(&images, src.position + Vec3::new(3.43, 0.0, 0.0), 343.0, &src).unwrap();
        assert!((taps[0].delay * 44100.0 - 441.0).abs() < 1e-9);
        assert!((taps[0].amplitude[0] - 1.0 / 3.43).abs() < 1e-12);
        assert!(taps_from_images(&images, src.position, 343.0, &src).is_err());
    }

    #[test]
    fn smearing_conserves_energy() {
        let room = shoebox(Vec3::new(5.0, 4.0, 3.0), 0.2);
        let src = SourceSpec::omni("s", "r", Vec3::new(2.0, 0.0, 1.5));
        let images = enumerate_images(&room, src.position, 3).unwrap();
        let taps = taps_from_images(&images, Vec3::new(4.0, 1.0, 1.0), 343.0, &src).unwrap();
        let cfg = RenderingProfile::razr_full().smearing;
        let smeared = smear_taps(&taps, &cfg, &bands::uniform(0.4), 7);
        for (a, b) in taps.iter().zip(&smeared) {
            for (ea, eb) in a.band_energy().iter().zip(b.band_energy()) {
                assert!((ea - eb).abs() <= 1e-6 * ea);
            }
        }
        let full = smear_taps(&taps, &cfg, &bands::uniform(1.0), 7);
        assert!(full.iter().filter(|t| t.order > 0).all(|t| t.amplitude.iter().all(|&a| a == 0.0)));
        assert_eq!(smear_taps(&taps, &cfg, &bands::uniform(0.0), 7), taps);
    }

    #[test]
    fn burst_has_unit_energy() {
        let b = DiffuseBurst {
            duration: 0.004,
            seed: 3,
            amplitude: bands::uniform(1.0),
        };
        let x = b.samples(44100.0);
        assert_eq!(x.len(), 176);
        assert!((crate::dsp::energy(&x) - 1.0).abs() < 1e-12);
        assert_eq!(x, b.samples(44100.0));
    }

    #[test]
    fn panel_reflection_at_centre() {
        let panel = PanelSpec {
            id: "p".into(),
            corners: [
                Vec3::new(-1.0, -1.0, 0.0),
                Vec3::new(1.0, -1.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(-1.0, 1.0, 0.0),
            ],
            absorption: bands::uniform(0.19),
        };
        let src = SourceSpec::omni("s", "r", Vec3::new(-0.5, 0.0, 1.0));
        let tap = reflect_finite_panel(&panel, &src, Vec3::new(0.5, 0.0, 1.0), 343.0).unwrap();
        let r = (1.0f64 + 4.0).sqrt();
        assert!((tap.delay - r / 343.0).abs() < 1e-12);
        assert!((tap.amplitude[0] - 0.9 / r).abs() < 1e-12);
        // opposite sides: no reflection
        assert!(reflect_finite_panel(&panel, &src, Vec3::new(0.5, 0.0, -1.0), 343.0).is_none());
    }
}
