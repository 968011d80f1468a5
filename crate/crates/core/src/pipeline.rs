//! Scene to rendered impulse response.

use crate::coupled;
use crate::dsp;
use crate::error::{Error, Result};
use crate::fdn;
use crate::ism::{self, SpatialIR};
use crate::rng;
use crate::scene::{DecayTarget, OutputMode, ReceiverKind, RenderingProfile, RoomSpec, SceneSpec};
use crate::spatial::{self, HrtfSet, ImpulseResponse, LoudspeakerLayout};

/// Attach a late tail for `room` to `early`, or return it unchanged when the
/// profile has no tail. `direct_delay` is the onset fallback for an empty
/// early part and `level_db` scales the tail like the source level scales
/// the taps.
#[allow(clippy::too_many_arguments)]
pub(crate) fn add_room_tail(
    scene: &SceneSpec,
    room: &RoomSpec,
    early: SpatialIR,
    profile: &RenderingProfile,
    total_len: usize,
    direct_delay: f64,
    level_db: f64,
    stream: u64,
) -> Result<SpatialIR> {
    if !profile.fdn_enabled || profile.anechoic {
        return Ok(early);
    }
    let target = room.decay_target.clone().unwrap_or(DecayTarget {
        t30_bands: room.t60_bands(),
        second_slope: None,
    });
    let fs = scene.fs();
    let onset = (fdn::tail_onset(&early, direct_delay) * fs).round() as usize;
    if onset >= total_len {
        return Ok(early);
    }
    let seed = rng::derive_seed(scene.seed, "fdn", stream);
    let mut primary = fdn::design_fdn(room, &target, scene.sample_rate, scene.speed_of_sound, seed)?.with_onset(onset);
    primary.input_gain = dsp::from_db20(level_db);
    let tail = if profile.dual_slope_enabled && target.second_slope.is_some() {
        let config = fdn::design_dual_slope(
            room,
            &target,
            scene.sample_rate,
            scene.speed_of_sound,
            seed,
            primary,
            fdn::early_energy(&early.taps),
        )?;
        fdn::run_dual_slope(&config, total_len)?
    } else {
        fdn::run_fdn(&primary, total_len)?
    };
    Ok(fdn::splice(early, tail))
}

/// Default render length: 1.5 times the longest reverberation time in the
/// scene, clamped to [0.5, 8] s.
pub fn default_duration(scene: &SceneSpec) -> f64 {
    let longest = scene
        .rooms
        .iter()
        .flat_map(|r| {
            let mut t: Vec<f64> = match &r.decay_target {
                Some(d) => d.t30_bands.to_vec(),
                None => r.t60_bands().to_vec(),
            };
            if let Some(s) = r.decay_target.as_ref().and_then(|d| d.second_slope) {
                t.push(s.t30_2);
            }
            t
        })
        .filter(|t| t.is_finite())
        .fold(0.0, f64::max);
    (1.5 * longest).clamp(0.5, 8.0)
}

/// Directional impulse response of the scene's first source/receiver pair.
pub fn spatial_ir(scene: &SceneSpec, profile: &RenderingProfile, total_len: usize) -> Result<SpatialIR> {
    profile.validate()?;
    let source = scene.source(None)?;
    let receiver = scene.receiver(None)?;
    if source.room != receiver.room {
        return coupled::coupled_spatial_ir(scene, profile, total_len);
    }
    let room = scene.room(&receiver.room)?;
    let early = ism::room_early_ir(scene, room, source, receiver.position, receiver.orientation, profile, 0)?;
    let direct = source.position.distance(receiver.position) / scene.speed_of_sound;
    add_room_tail(scene, room, early, profile, total_len, direct, source.level_db, 0)
}

#[derive(Debug, Clone, Default)]
pub struct SimulationOptions {
    /// Seconds; [`default_duration`] when absent.
    pub duration: Option<f64>,
    /// Overrides the profile's output mode.
    pub output_mode: Option<OutputMode>,
    /// The receiver's HRTF directory, else the synthetic spherical-head set,
    /// when absent.
    pub hrtf: Option<HrtfSet>,
    /// Layout named by the receiver, else the 86-speaker preset, when absent.
    pub layout: Option<LoudspeakerLayout>,
}

/// Render the scene with the given profile. The result is at least the
/// requested duration long and extends past it when the taps do.
pub fn simulate(scene: &SceneSpec, profile: &RenderingProfile, options: &SimulationOptions) -> Result<ImpulseResponse> {
    let duration = options.duration.unwrap_or_else(|| default_duration(scene));
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::validation("duration", "must be positive"));
    }
    let total_len = (duration * scene.fs()).round() as usize;
    let ir = spatial_ir(scene, profile, total_len)?;
    let mode = options.output_mode.unwrap_or(profile.output_mode);
    let hrtf = || -> Result<HrtfSet> {
        if let Some(h) = &options.hrtf {
            return Ok(h.clone());
        }
        match &scene.receiver(None)?.kind {
            ReceiverKind::Binaural { hrtf: Some(dir) } => HrtfSet::load(std::path::Path::new(dir)),
            _ => Ok(HrtfSet::spherical_head(scene.sample_rate, 10.0)),
        }
    };
    let layout = || -> Result<LoudspeakerLayout> {
        if let Some(l) = &options.layout {
            return Ok(l.clone());
        }
        match &scene.receiver(None)?.kind {
            ReceiverKind::Array { layout: Some(path) } => LoudspeakerLayout::load(std::path::Path::new(path)),
            _ => Ok(spatial::array_preset_86()),
        }
    };
    let mut out = match mode {
        OutputMode::Mono => spatial::render_mono(&ir),
        OutputMode::Binaural => spatial::binauralize(&ir, &hrtf()?)?,
        OutputMode::Array => spatial::render_array(&ir, &layout()?),
        OutputMode::Diotic => {
            let binaural = spatial::binauralize(&ir, &hrtf()?)?;
            match scene.receiver(None)?.kind {
                ReceiverKind::Array { .. } => spatial::diotic_array(&binaural, &layout()?)?,
                _ => spatial::diotic(&binaural)?,
            }
        }
    };
    for c in &mut out.channels {
        if c.len() < total_len {
            c.resize(total_len, 0.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::preset;

    #[test]
    fn default_durations() {
        assert!((default_duration(&preset("living-room").unwrap()) - 0.99).abs() < 1e-9);
        assert!((default_duration(&preset("underground").unwrap()) - 4.8).abs() < 1e-9);
    }

    #[test]
    fn ism_profile_has_no_tail() {
        let scene = preset("pub").unwrap();
        let ir = spatial_ir(&scene, &RenderingProfile::ism_15(), 44100).unwrap();
        assert!(ir.tail.is_none());
        let full = spatial_ir(&scene, &RenderingProfile::razr_full(), 44100).unwrap();
        assert!(full.tail.is_some());
    }
}
