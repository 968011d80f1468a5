mod common;

use alodsim_core::bands::N_BANDS;
use alodsim_core::scene::{
    eyring_t60, parse_scene, preset, serialize_scene, volume, CoupledMode, DecayTarget, RenderingProfile, RoomSpec,
    PRESET_NAMES,
};
use alodsim_core::Vec3;
use proptest::prelude::*;

fn same_to_3_figures(x: f64, stated: f64) -> bool {
    let mag = 10f64.powf(stated.abs().log10().floor() - 2.0);
    ((x / mag).round() - (stated / mag).round()).abs() < 0.5
}

#[test]
fn preset_volumes_to_three_figures() {
    let living = preset("living-room").unwrap();
    assert!(same_to_3_figures(volume(living.room("living").unwrap()), 50.9));
    assert!(same_to_3_figures(volume(living.room("kitchen").unwrap()), 26.9));
    assert!(same_to_3_figures(volume(&preset("pub").unwrap().rooms[0]), 442.0));
    assert!(same_to_3_figures(volume(&preset("underground").unwrap().rooms[0]), 11000.0));
}

#[test]
fn profile_presets_are_frozen() {
    let full = RenderingProfile::razr_full();
    let first = RenderingProfile::razr_1st();
    assert_eq!((full.ism_order, first.ism_order), (3, 1));
    assert_eq!(
        RenderingProfile {
            name: full.name.clone(),
            ism_order: 3,
            ..first
        },
        full
    );
    let ism = RenderingProfile::ism_15();
    assert_eq!(ism.ism_order, 15);
    assert!(!ism.fdn_enabled && !ism.jitter.enabled && !ism.smearing.enabled);
    assert_eq!(RenderingProfile::razr_simple().coupled_mode, CoupledMode::TwoStage);
}

#[test]
fn presets_round_trip() {
    for name in PRESET_NAMES {
        let scene = preset(name).unwrap();
        let text = serialize_scene(&scene);
        let back = parse_scene(&text).unwrap();
        assert_eq!(back, scene);
        assert_eq!(serialize_scene(&back), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_scenes_round_trip(
        dims in (2.0f64..30.0, 2.0f64..30.0, 2.0f64..8.0),
        alpha in 0.01f64..0.99,
        fs in prop::sample::select(vec![22050u32, 44100, 48000]),
        u in prop::array::uniform6(0.05f64..0.95),
        seed in any::<u64>(),
    ) {
        let d = Vec3::new(dims.0, dims.1, dims.2);
        let src = Vec3::new(u[0] * d.x, u[1] * d.y, u[2] * d.z);
        let rcv = Vec3::new(u[3] * d.x, u[4] * d.y, u[5] * d.z);
        let mut scene = common::shoebox_scene(d, alpha, src, rcv, seed);
        scene.sample_rate = fs;
        let back = parse_scene(&serialize_scene(&scene)).unwrap();
        prop_assert_eq!(back, scene);
    }

    #[test]
    fn fitted_absorption_reproduces_target(
        dims in (2.0f64..30.0, 2.0f64..30.0, 2.0f64..8.0),
        t60 in 0.2f64..4.0,
    ) {
        let d = Vec3::new(dims.0, dims.1, dims.2);
        let room = RoomSpec::fitted("r", Vec3::ZERO, d, DecayTarget::broadband(t60), 0.3);
        // very short targets in large rooms need more than total absorption
        prop_assume!(room.is_ok());
        let predicted = eyring_t60(&room.unwrap());
        for b in 0..N_BANDS {
            prop_assert!((predicted[b] - t60).abs() < 1e-9, "{} vs {}", predicted[b], t60);
        }
    }
}
