mod common;

use alodsim_core::coupled::{couple_full, couple_two_stage};
use alodsim_core::dsp;
use alodsim_core::fdn;
use alodsim_core::ism::{room_early_ir, SpatialIR};
use alodsim_core::rng::derive_seed;
use alodsim_core::scene::{preset, CoupledMode, DecayTarget, RenderingProfile, RoomSpec, SceneSpec, SourceSpec};
use alodsim_core::spatial::render_mono;
use alodsim_core::{simulate, OutputMode, SimulationOptions, Vec3};

const LEN: usize = 44100;

fn mono_options() -> SimulationOptions {
    SimulationOptions {
        duration: Some(LEN as f64 / 44100.0),
        output_mode: Some(OutputMode::Mono),
        ..Default::default()
    }
}

/// Single-room early part plus late tail, assembled from the public pieces.
fn single_room(
    scene: &SceneSpec,
    room: &RoomSpec,
    source: &SourceSpec,
    at: Vec3,
    orientation: Vec3,
    profile: &RenderingProfile,
    stream: u64,
) -> Vec<f64> {
    let early = room_early_ir(scene, room, source, at, orientation, profile, stream).unwrap();
    let direct = source.position.distance(at) / scene.speed_of_sound;
    let onset = (fdn::tail_onset(&early, direct) * 44100.0).round() as usize;
    let target = room.decay_target.clone().unwrap_or(DecayTarget {
        t30_bands: room.t60_bands(),
        second_slope: None,
    });
    let seed = derive_seed(scene.seed, "fdn", stream);
    let mut config = fdn::design_fdn(room, &target, 44100, scene.speed_of_sound, seed).unwrap().with_onset(onset);
    config.input_gain = dsp::from_db20(source.level_db);
    let ir: SpatialIR = fdn::splice(early, fdn::run_fdn(&config, LEN).unwrap());
    render_mono(&ir).into_mono()
}

#[test]
fn two_stage_is_the_convolution_of_both_rooms() {
    let scene = preset("living-room").unwrap();
    let profile = RenderingProfile::razr_simple();
    assert_eq!(profile.coupled_mode, CoupledMode::TwoStage);
    let source = scene.source(None).unwrap();
    let receiver = scene.receiver(None).unwrap();
    let door = scene.apertures[0].center;

    let h1 = single_room(&scene, scene.room(&source.room).unwrap(), source, door, Vec3::X, &profile, 1);
    let door_source = SourceSpec::omni("aperture", &receiver.room, door);
    let h2 = single_room(
        &scene,
        scene.room(&receiver.room).unwrap(),
        &door_source,
        receiver.position,
        receiver.orientation,
        &profile,
        2,
    );
    let expected = dsp::convolve(&h1, &h2);
    let got = simulate(&scene, &profile, &mono_options()).unwrap().into_mono();
    let err = common::rel_rms(&got, &expected);
    assert!(err < 1e-6, "relative RMS error {err}");
}

#[test]
fn full_mode_without_coupling_shares_the_two_stage_early_part() {
    let scene = preset("living-room").unwrap();
    let profile = RenderingProfile::razr_full();
    let full = couple_full(&scene, &profile, LEN, Some(0.0)).unwrap();
    let two = couple_two_stage(&scene, &profile, LEN).unwrap();
    assert_eq!(full.taps, two.taps);
    let early_signature = full.signature.unwrap().samples;
    let cascade_signature = two.signature.unwrap().samples;
    // the two-stage signature carries the source-room tail on top
    let n = early_signature.len().min(cascade_signature.len());
    let first_tail = cascade_signature
        .iter()
        .zip(&early_signature)
        .position(|(a, b)| a != b)
        .unwrap_or(n);
    let source = scene.source(None).unwrap();
    let direct = source.position.distance(scene.apertures[0].center) / scene.speed_of_sound;
    assert!(first_tail > (direct * 44100.0) as usize, "signatures part at sample {first_tail}");
}

#[test]
fn coupling_mode_is_irrelevant_within_one_room() {
    let mut scene = preset("living-room").unwrap();
    let receiver = scene.receiver(None).unwrap().clone();
    scene.sources[0].room = receiver.room.clone();
    scene.sources[0].position = receiver.position + Vec3::new(1.2, -0.8, 0.1);
    let base = RenderingProfile::razr_full();
    let renders: Vec<_> = [CoupledMode::Full, CoupledMode::TwoStage, CoupledMode::Off]
        .into_iter()
        .map(|mode| {
            let profile = RenderingProfile {
                coupled_mode: mode,
                ..base.clone()
            };
            simulate(&scene, &profile, &mono_options()).unwrap()
        })
        .collect();
    assert_eq!(renders[0], renders[1]);
    assert_eq!(renders[0], renders[2]);

    // and equal to the scene without the neighbouring room or aperture
    let mut alone = scene.clone();
    alone.apertures.clear();
    alone.rooms.retain(|r| r.id == receiver.room);
    alone.sources.retain(|s| s.room == receiver.room);
    assert_eq!(simulate(&alone, &base, &mono_options()).unwrap(), renders[0]);
}
