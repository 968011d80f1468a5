//! Source and receiver in two rooms joined by an aperture.
//!
//! The two-stage mode simulates the source room up to the closed aperture
//! (an omnidirectional receiver at its centre), then re-radiates that mono
//! response from an omnidirectional source at the same point into the
//! receiver room. The closed aperture keeps the absorption of its host wall.
//!
//! The full mode shares the early part but only the source room's early
//! response is injected; the late field comes from the two rooms' networks
//! cross-coupled through the aperture, started at the level the two-stage
//! cascade would have.

use crate::error::{Error, Result};
use crate::fdn::{self, decay_factor, diffuse_power};
use crate::geom::Vec3;
use crate::ism::{self, ReflectionTap, Signature, SpatialIR, TapKind};
use crate::pipeline::add_room_tail;
use crate::rng;
use crate::scene::{
    shared_wall, ApertureSpec, CoupledMode, DecayTarget, OcclusionFilter, RenderingProfile, RoomSpec, SceneSpec,
    SourceSpec,
};
use crate::spatial::render_mono;

/// How a source in one room reaches a receiver in another.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPlan {
    pub mode: CoupledMode,
    pub aperture: ApertureSpec,
    /// Length of the occluded direct route through the aperture.
    pub path_length_direct: f64,
    pub occlusion: OcclusionFilter,
    pub source_room: String,
    pub receiver_room: String,
}

impl CoupledPlan {
    pub fn for_scene(scene: &SceneSpec, profile: &RenderingProfile) -> Result<Self> {
        let source = scene.source(None)?;
        let receiver = scene.receiver(None)?;
        let aperture = scene
            .aperture_between(&source.room, &receiver.room)
            .ok_or_else(|| {
                Error::Infeasible(format!(
                    "rooms `{}` and `{}` are not joined by an aperture",
                    source.room, receiver.room
                ))
            })?
            .clone();
        let path = aperture.path_length_direct.unwrap_or_else(|| {
            source.position.distance(aperture.center) + aperture.center.distance(receiver.position)
        });
        Ok(CoupledPlan {
            mode: profile.coupled_mode,
            path_length_direct: path,
            occlusion: aperture.occlusion,
            aperture,
            source_room: source.room.clone(),
            receiver_room: receiver.room.clone(),
        })
    }
}

/// Occluded direct sound: one tap at `path / c` through the occlusion filter,
/// arriving from the aperture.
pub fn occluded_direct(plan: &CoupledPlan, scene: &SceneSpec) -> Result<ReflectionTap> {
    let source = scene.source(None)?;
    let receiver = scene.receiver(None)?;
    let r = plan.path_length_direct;
    let level = crate::dsp::from_db20(source.level_db);
    let gains = plan.occlusion.band_gains();
    let doa = (plan.aperture.center - receiver.position)
        .normalized()
        .ok_or_else(|| Error::DegenerateGeometry("receiver at the aperture centre".into()))?;
    Ok(ReflectionTap {
        delay: r / scene.speed_of_sound,
        amplitude: std::array::from_fn(|b| gains[b] * level / r),
        doa,
        order: 0,
        kind: TapKind::Occluded,
        diffuse_burst: None,
    })
}

struct Stages<'a> {
    scene: &'a SceneSpec,
    plan: CoupledPlan,
    source: &'a SourceSpec,
    source_room: &'a RoomSpec,
    receiver_room: &'a RoomSpec,
    door_source: SourceSpec,
}

impl<'a> Stages<'a> {
    fn new(scene: &'a SceneSpec, profile: &RenderingProfile) -> Result<Self> {
        let plan = CoupledPlan::for_scene(scene, profile)?;
        let source = scene.source(None)?;
        let door_source = SourceSpec::omni("aperture", &plan.receiver_room, plan.aperture.center);
        Ok(Stages {
            source_room: scene.room(&plan.source_room)?,
            receiver_room: scene.room(&plan.receiver_room)?,
            scene,
            plan,
            source,
            door_source,
        })
    }

    fn door(&self) -> Vec3 {
        self.plan.aperture.center
    }

    fn d1(&self) -> f64 {
        self.source.position.distance(self.door())
    }

    fn d2(&self) -> Result<f64> {
        Ok(self.door().distance(self.scene.receiver(None)?.position))
    }

    /// Source room up to the closed aperture.
    fn stage_one(&self, profile: &RenderingProfile, total_len: Option<usize>) -> Result<SpatialIR> {
        let early = ism::room_early_ir(self.scene, self.source_room, self.source, self.door(), Vec3::X, profile, 1)?;
        match total_len {
            Some(len) => add_room_tail(
                self.scene,
                self.source_room,
                early,
                profile,
                len,
                self.d1() / self.scene.speed_of_sound,
                self.source.level_db,
                1,
            ),
            None => Ok(early),
        }
    }

    /// Receiver room driven from the aperture centre.
    fn stage_two(&self, profile: &RenderingProfile, total_len: Option<usize>) -> Result<SpatialIR> {
        let receiver = self.scene.receiver(None)?;
        let early = ism::room_early_ir(
            self.scene,
            self.receiver_room,
            &self.door_source,
            receiver.position,
            receiver.orientation,
            profile,
            2,
        )?;
        match total_len {
            Some(len) => add_room_tail(
                self.scene,
                self.receiver_room,
                early,
                profile,
                len,
                self.d2()? / self.scene.speed_of_sound,
                0.0,
                2,
            ),
            None => Ok(early),
        }
    }
}

/// Early part for a source and receiver in different rooms.
pub fn coupled_early(scene: &SceneSpec, profile: &RenderingProfile) -> Result<SpatialIR> {
    let stages = Stages::new(scene, profile)?;
    let receiver = scene.receiver(None)?;
    if profile.anechoic || profile.coupled_mode == CoupledMode::Off {
        let tap = occluded_direct(&stages.plan, scene)?;
        return Ok(SpatialIR::new(scene.sample_rate, receiver.orientation, vec![tap]));
    }
    let h1 = render_mono(&stages.stage_one(profile, None)?);
    let mut ir = stages.stage_two(profile, None)?;
    ir.signature = Some(Signature {
        samples: h1.into_mono(),
        applies_to_tail: false,
    });
    Ok(ir)
}

/// Receiver-room simulation driven from the aperture centre, without the
/// source-room signature.
pub fn receiver_room_only(scene: &SceneSpec, profile: &RenderingProfile, total_len: usize) -> Result<SpatialIR> {
    Stages::new(scene, profile)?.stage_two(profile, Some(total_len))
}

/// Two separate simulations joined at the aperture; the source-room response
/// (tail included) is the signature of the receiver-room simulation.
pub fn couple_two_stage(scene: &SceneSpec, profile: &RenderingProfile, total_len: usize) -> Result<SpatialIR> {
    let stages = Stages::new(scene, profile)?;
    let h1 = render_mono(&stages.stage_one(profile, Some(total_len))?).into_mono();
    let mut ir = stages.stage_two(profile, Some(total_len))?;
    ir.signature = Some(Signature {
        samples: h1,
        applies_to_tail: true,
    });
    Ok(ir)
}

/// Area ratio of the aperture to the shared wall.
pub fn coupling_gain(scene: &SceneSpec, aperture: &ApertureSpec) -> Result<f64> {
    if let Some(k) = aperture.coupling_gain {
        return Ok(k);
    }
    let a = scene.room(&aperture.connects[0])?;
    let b = scene.room(&aperture.connects[1])?;
    let wall = shared_wall(a, b).ok_or_else(|| Error::Infeasible("rooms are not adjacent".into()))?;
    Ok(aperture.area() / wall.area())
}

fn target_of(room: &RoomSpec) -> DecayTarget {
    room.decay_target.clone().unwrap_or(DecayTarget {
        t30_bands: room.t60_bands(),
        second_slope: None,
    })
}

/// Early cascade plus cross-coupled late reverberation. `k` overrides the
/// coupling gain.
pub fn couple_full(scene: &SceneSpec, profile: &RenderingProfile, total_len: usize, k: Option<f64>) -> Result<SpatialIR> {
    let stages = Stages::new(scene, profile)?;
    let h1 = render_mono(&stages.stage_one(profile, None)?).into_mono();
    let mut ir = stages.stage_two(profile, None)?;
    if profile.fdn_enabled && !profile.anechoic {
        let c = scene.speed_of_sound;
        let fs = scene.fs();
        let (d1, d2) = (stages.d1(), stages.d2()?);
        let (t1, t2) = (d1 / c, d2 / c);
        let onset = ((t1 + fdn::tail_onset(&ir, t2)) * fs).round() as usize;
        let living = stages.receiver_room;
        let kitchen = stages.source_room;
        let primary = fdn::design_fdn(
            living,
            &target_of(living),
            scene.sample_rate,
            c,
            rng::derive_seed(scene.seed, "fdn", 2),
        )?
        .with_onset(onset);
        let secondary = fdn::design_fdn(
            kitchen,
            &target_of(kitchen),
            scene.sample_rate,
            c,
            rng::derive_seed(scene.seed, "fdn", 1),
        )?
        .with_onset(onset);
        let k = match k {
            Some(k) => k,
            None => coupling_gain(scene, &stages.plan.aperture)?,
        };
        let level = crate::dsp::from_db20(stages.source.level_db).powi(2);
        let a_l = diffuse_power(crate::scene::volume(living), c, fs);
        let a_k = diffuse_power(crate::scene::volume(kitchen), c, fs);
        let ln10 = 10f64.ln();
        let (tl, tk) = (primary.t60, secondary.t60);
        let power = move |b: usize, n: usize| {
            let t = n as f64 / fs;
            let d_l = |tau: f64| if tau >= 0.0 { a_l * decay_factor(tau, tl[b]) } else { 0.0 };
            let d_k = |tau: f64| if tau >= 0.0 { a_k * decay_factor(tau, tk[b]) } else { 0.0 };
            let (kl, kk) = (6.0 * ln10 / tl[b], 6.0 * ln10 / tk[b]);
            let cross = if (kk - kl).abs() < 1e-9 {
                a_k * a_l * fs * t * (-kl * t).exp()
            } else {
                a_k * a_l * fs * ((-kl * t).exp() - (-kk * t).exp()) / (kk - kl)
            };
            level * (d_l(t - t1) / (d1 * d1) + d_k(t - t2) / (d2 * d2) + cross)
        };
        let tail = fdn::run_coupled(&primary, &secondary, k, total_len, &power)?;
        ir = fdn::splice(ir, tail);
    }
    ir.signature = Some(Signature {
        samples: h1,
        applies_to_tail: false,
    });
    Ok(ir)
}

/// Dispatch on the profile's coupling mode.
pub fn coupled_spatial_ir(scene: &SceneSpec, profile: &RenderingProfile, total_len: usize) -> Result<SpatialIR> {
    if profile.anechoic || profile.coupled_mode == CoupledMode::Off {
        return coupled_early(scene, profile);
    }
    match profile.coupled_mode {
        CoupledMode::TwoStage => couple_two_stage(scene, profile, total_len),
        _ => couple_full(scene, profile, total_len, None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::preset;

    #[test]
    fn door_coupling_gain() {
        let s = preset("living-room").unwrap();
        let k = coupling_gain(&s, &s.apertures[0]).unwrap();
        assert!((k - 1.6 / (4.97 * 2.71)).abs() < 1e-12);
        assert!((k - 0.119).abs() < 1e-3);
    }

    #[test]
    fn occluded_tap_delay_and_gain() {
        let s = preset("living-room").unwrap();
        let profile = RenderingProfile::anechoic();
        let plan = CoupledPlan::for_scene(&s, &profile).unwrap();
        let tap = occluded_direct(&plan, &s).unwrap();
        assert!((tap.delay - 5.7 / 343.0).abs() < 1e-12);
        assert!((tap.delay * 1e3 - 16.6).abs() < 0.05);
        let mut flat = plan.clone();
        flat.occlusion = OcclusionFilter {
            attenuation_db: 0.0,
            lowpass_hz: None,
        };
        let plain = occluded_direct(&flat, &s).unwrap();
        assert!(plain.amplitude.iter().all(|&a| (a - 1.0 / 5.7).abs() < 1e-15));
        let ir = coupled_early(&s, &profile).unwrap();
        assert_eq!(ir.taps.len(), 1);
    }
}
