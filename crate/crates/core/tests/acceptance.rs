//! Acceptance checks, one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails.

use std::collections::BTreeMap;
use std::time::Instant;

use alodsim_core::analysis::{self, NED_WINDOW};
use alodsim_core::bands::{self, N_BANDS};
use alodsim_core::coupled;
use alodsim_core::dsp;
use alodsim_core::io::{self, SampleFormat};
use alodsim_core::ism::{self, Signature};
use alodsim_core::postproc;
use alodsim_core::rng;
use alodsim_core::scene::{preset, CoupledMode, OutputMode, ReceiverKind, RenderingProfile, RoomSpec};
use alodsim_core::spatial::{self, array_preset_86, vbap_gains, ChannelSemantics, ImpulseResponse};
use alodsim_core::stimuli;
use alodsim_core::{simulate, SimulationOptions, Vec3};
use rand::Rng as _;

// Tolerances
const ISM_POS_TOL: f64 = 1e-9;
const ISM_RUNTIME_S: f64 = 1.0;
const T30_REL_TOL: f64 = 0.15;
const T30_RUNTIME_S: f64 = 30.0;
const MATCH_MEAN_DB: f64 = 0.5;
const NED_FRACTION: f64 = 0.90;
const KNEE_TARGET_DB: f64 = -40.0;
const KNEE_TOL_DB: f64 = 5.0;
const SINGLE_SLOPE_REL: f64 = 0.15;
const IR_EQUAL_TOL: f64 = 1e-10;
const VBAP_NORM_TOL: f64 = 1e-9;
const VBAP_PAIR_TOL: f64 = 1e-6;
const PINK_LEN: usize = 22050;
const PINK_FLAT_DB: f64 = 0.5;
const ESS_PAR_DB: f64 = 60.0;
const ESS_GUARD_S: f64 = 0.010;
const T30_EST_REL: f64 = 0.04;
const NED_NOISE: (f64, f64) = (0.9, 1.1);
const RENDER_RUNTIME_S: f64 = 10.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rendered(scene: &str, profile: RenderingProfile, mode: OutputMode, duration: Option<f64>) -> ImpulseResponse {
    let s = preset(scene).unwrap();
    let options = SimulationOptions {
        duration,
        output_mode: Some(mode),
        ..Default::default()
    };
    simulate(&s, &profile, &options).unwrap()
}

/// Independent oracle: repeatedly mirror across all six walls and keep each
/// distinct position at the depth it first appears.
fn mirror_oracle(room: &RoomSpec, src: Vec3, max_order: u32) -> Vec<(u32, Vec3)> {
    let lo = room.origin;
    let hi = room.origin + room.dims;
    let key = |p: Vec3| ((p.x * 1e6).round() as i64, (p.y * 1e6).round() as i64, (p.z * 1e6).round() as i64);
    let mut seen: BTreeMap<(i64, i64, i64), (u32, Vec3)> = BTreeMap::new();
    seen.insert(key(src), (0, src));
    let mut frontier = vec![src];
    for depth in 1..=max_order {
        let mut next = Vec::new();
        for p in &frontier {
            for axis in 0..3 {
                for plane in [lo[axis], hi[axis]] {
                    let mut q = [p.x, p.y, p.z];
                    q[axis] = 2.0 * plane - q[axis];
                    let q = Vec3::from(q);
                    if let std::collections::btree_map::Entry::Vacant(e) = seen.entry(key(q)) {
                        e.insert((depth, q));
                        next.push(q);
                    }
                }
            }
        }
        frontier = next;
    }
    seen.into_values().collect()
}

fn criterion_1() -> Outcome {
    let mut r = rng::derive(1, "acceptance-rooms", 0);
    let mut worst: f64 = 0.0;
    let mut mismatched = 0;
    let start = Instant::now();
    for _ in 0..50 {
        let dims = Vec3::new(r.random_range(2.0..20.0), r.random_range(2.0..20.0), r.random_range(2.0..6.0));
        let origin = Vec3::new(r.random_range(-5.0..5.0), r.random_range(-5.0..5.0), 0.0);
        let room = RoomSpec::fitted("r", origin, dims, alodsim_core::scene::DecayTarget::broadband(0.5), 0.0).unwrap();
        let src = origin + Vec3::new(dims.x * r.random_range(0.05..0.95), dims.y * r.random_range(0.05..0.95), dims.z * r.random_range(0.05..0.95));
        let images = ism::enumerate_images(&room, src, 4).unwrap();
        let mut oracle = mirror_oracle(&room, src, 4);
        if oracle.len() != images.len() {
            mismatched += 1;
            continue;
        }
        for img in &images {
            let (i, d) = oracle
                .iter()
                .enumerate()
                .map(|(i, (_, p))| (i, p.distance(img.position)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            if oracle[i].0 != img.order {
                mismatched += 1;
            }
            worst = worst.max(d);
            oracle.swap_remove(i);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let room = preset("pub").unwrap().rooms[0].clone();
    let src = room.origin + room.dims / 2.0;
    let counts: Vec<usize> = [1, 3, 15]
        .iter()
        .map(|&o| ism::enumerate_images(&room, src, o).unwrap().len())
        .collect();
    let t15 = Instant::now();
    let _ = ism::enumerate_images(&room, src, 15).unwrap();
    let t15 = t15.elapsed().as_secs_f64();
    let pass = mismatched == 0
        && worst < ISM_POS_TOL
        && counts == [7, 63, 4991]
        && elapsed < ISM_RUNTIME_S
        && t15 < ISM_RUNTIME_S;
    outcome(
        pass,
        format!(
            "max position error {worst:.2e} m, order mismatches {mismatched}, counts {counts:?}, 50 rooms in {elapsed:.3} s, order 15 in {t15:.3} s"
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (scene, target) in [("living-room", 0.54), ("pub", 0.7), ("underground", 1.6)] {
        let start = Instant::now();
        let ir = rendered(scene, RenderingProfile::razr_full(), OutputMode::Binaural, None);
        let elapsed = start.elapsed().as_secs_f64();
        let t = analysis::t30_of(&ir.channels[0], ir.sample_rate).unwrap_or(f64::NAN);
        let ok = ((t - target) / target).abs() <= T30_REL_TOL && elapsed < T30_RUNTIME_S;
        pass &= ok;
        parts.push(format!("{scene} T30 {t:.3} s (target {target}) in {elapsed:.1} s"));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_3() -> Outcome {
    let sim = rendered("pub", RenderingProfile::razr_full(), OutputMode::Binaural, Some(1.0));
    let mut r = rng::derive(3, "coloration", 0);
    let gains_db: [f64; N_BANDS] = std::array::from_fn(|_| r.random_range(-6.0..=6.0));
    let gains = bands::map(&gains_db, dsp::from_db20);
    let fs = sim.sample_rate as f64;
    let reference = ImpulseResponse::new(
        sim.channels
            .iter()
            .map(|c| dsp::zero_phase_filter(c, fs, bands::FILTER_PAD, |f| bands::gain_at(&gains, f)))
            .collect(),
        sim.sample_rate,
        sim.semantics,
    );
    let m = postproc::match_spectrum(&sim, &reference, (100.0, 16000.0)).unwrap();
    outcome(
        m.report.residual_mean_db < MATCH_MEAN_DB,
        format!(
            "mean deviation {:.3} dB (before {:.3} dB, RMS {:.3}, max {:.3}, clamped {})",
            m.report.residual_mean_db,
            m.report.initial_mean_db,
            m.report.residual_rms_db,
            m.report.residual_max_db,
            m.report.clamped
        ),
    )
}

fn criterion_4() -> Outcome {
    let full = rendered("underground", RenderingProfile::razr_full(), OutputMode::Binaural, Some(0.3));
    let ism = rendered("underground", RenderingProfile::ism_15(), OutputMode::Binaural, Some(0.3));
    let nf = analysis::ned(&full.channels[0], full.sample_rate, NED_WINDOW).unwrap();
    let ni = analysis::ned(&ism.channels[0], ism.sample_rate, NED_WINDOW).unwrap();
    let (mut total, mut ok) = (0, 0);
    for (i, &t) in nf.times.iter().enumerate() {
        if (0.020 - 1e-9..=0.080 + 1e-9).contains(&t) {
            total += 1;
            if nf.values[i] >= ni.values[i] {
                ok += 1;
            }
        }
    }
    let frac = ok as f64 / total.max(1) as f64;
    outcome(
        total > 0 && frac >= NED_FRACTION,
        format!("razr-full >= ism-15 at {ok}/{total} windows ({:.1} %)", 100.0 * frac),
    )
}

fn criterion_5() -> Outcome {
    let full = rendered("underground", RenderingProfile::razr_full(), OutputMode::Binaural, None);
    let simple = rendered("underground", RenderingProfile::razr_simple(), OutputMode::Binaural, None);
    let ff = analysis::dual_slope_fit(&analysis::schroeder_edc(&full.channels[0], full.sample_rate).unwrap());
    let fs = analysis::dual_slope_fit(&analysis::schroeder_edc(&simple.channels[0], simple.sample_rate).unwrap());
    match (ff, fs) {
        (Ok(a), Ok(b)) => {
            let rel = ((b.slope1 - b.slope2) / b.slope1).abs();
            outcome(
                (a.knee_level - KNEE_TARGET_DB).abs() <= KNEE_TOL_DB && rel < SINGLE_SLOPE_REL,
                format!(
                    "razr-full knee {:.1} dB ({:.1} / {:.1} dB/s); razr-simple slope mismatch {:.3}",
                    a.knee_level, a.slope1, a.slope2, rel
                ),
            )
        }
        (a, b) => outcome(false, format!("fit failed: {:?} / {:?}", a.err(), b.err())),
    }
}

fn max_abs_diff(a: &ImpulseResponse, b: &ImpulseResponse) -> f64 {
    let mut worst: f64 = 0.0;
    for (x, y) in a.channels.iter().zip(&b.channels) {
        for i in 0..x.len().max(y.len()) {
            let d = x.get(i).copied().unwrap_or(0.0) - y.get(i).copied().unwrap_or(0.0);
            worst = worst.max(d.abs());
        }
    }
    if a.n_channels() != b.n_channels() {
        return f64::INFINITY;
    }
    worst
}

fn criterion_6() -> Outcome {
    let scene = preset("living-room").unwrap();
    let mut profile = RenderingProfile::razr_full();
    profile.coupled_mode = CoupledMode::TwoStage;
    let fs = scene.sample_rate;
    let len = (0.99 * fs as f64).round() as usize;
    let ir = coupled::couple_two_stage(&scene, &profile, len).unwrap();
    let mono = spatial::render_mono(&ir).into_mono();
    let peak = mono.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let first = mono.iter().position(|v| v.abs() >= 0.2 * peak).unwrap_or(0);
    let expected = (5.7 / 343.0 * fs as f64).round() as i64;
    let offset = first as i64 - expected;

    let mut unit = ir.clone();
    unit.signature = Some(Signature {
        samples: vec![1.0],
        applies_to_tail: true,
    });
    let only = coupled::receiver_room_only(&scene, &profile, len).unwrap();
    let hrtf = spatial::HrtfSet::spherical_head(fs, 10.0);
    let d_mono = max_abs_diff(&spatial::render_mono(&unit), &spatial::render_mono(&only));
    let d_bin = max_abs_diff(
        &spatial::binauralize(&unit, &hrtf).unwrap(),
        &spatial::binauralize(&only, &hrtf).unwrap(),
    );
    outcome(
        offset.abs() <= 1 && d_mono <= IR_EQUAL_TOL && d_bin <= IR_EQUAL_TOL,
        format!(
            "first arrival {:.2} ms (offset {offset} samples); unit-signature difference {d_mono:.1e} mono, {d_bin:.1e} binaural",
            first as f64 / fs as f64 * 1e3
        ),
    )
}

fn criterion_7() -> Outcome {
    let layout = array_preset_86();
    let mut r = rng::derive(7, "directions", 0);
    let mut worst: f64 = 0.0;
    let mut negative = 0;
    for _ in 0..10_000 {
        let d = Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        let Some(d) = d.normalized() else { continue };
        let g = vbap_gains(d, &layout);
        let s: f64 = g.gains.iter().map(|(_, v)| v * v).sum();
        worst = worst.max((s - 1.0).abs());
        negative += g.gains.iter().filter(|(_, v)| *v < 0.0).count() + usize::from(g.gains.len() > 3);
    }
    let coincident = layout
        .directions
        .iter()
        .enumerate()
        .all(|(i, d)| {
            let g = vbap_gains(*d, &layout);
            g.gains.len() == 1 && g.gains[0].0 == i && (g.gains[0].1 - 1.0).abs() < VBAP_PAIR_TOL
        });
    let mut pair_err: f64 = 0.0;
    for k in 0..48 {
        let mid = (layout.directions[k] + layout.directions[(k + 1) % 48]).normalized().unwrap();
        let g = vbap_gains(mid, &layout);
        let mut vals: Vec<f64> = g.gains.iter().map(|(_, v)| *v).collect();
        vals.sort_by(|a, b| b.total_cmp(a));
        let e = if vals.len() == 2 {
            vals.iter().map(|v| (v - std::f64::consts::FRAC_1_SQRT_2).abs()).fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        pair_err = pair_err.max(e);
    }
    outcome(
        worst <= VBAP_NORM_TOL && negative == 0 && coincident && pair_err <= VBAP_PAIR_TOL,
        format!(
            "max |Σg²-1| {worst:.1e} over 10^4 directions; coincident single-channel {coincident}; max pair error {pair_err:.1e}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let head = rendered("pub", RenderingProfile::diotic(), OutputMode::Diotic, Some(0.5));
    let identical = head.n_channels() == 2 && head.channels[0] == head.channels[1];
    let mut scene = preset("pub").unwrap();
    scene.receivers[0].kind = ReceiverKind::Array { layout: None };
    let options = SimulationOptions {
        duration: Some(0.5),
        output_mode: Some(OutputMode::Diotic),
        ..Default::default()
    };
    let array = simulate(&scene, &RenderingProfile::diotic(), &options).unwrap();
    let active: Vec<usize> = (0..array.n_channels())
        .filter(|&c| array.channels[c].iter().any(|&v| v != 0.0))
        .collect();
    let frontal = array_preset_86().frontal();
    outcome(
        identical && active == vec![frontal] && frontal == 0,
        format!(
            "headphone channels identical {identical}; array active channels {active:?} (frontal {frontal}, {} total)",
            array.n_channels()
        ),
    )
}

fn octave_energies_db(x: &[f64], fs: f64, centers: &[f64]) -> Vec<f64> {
    let n = dsp::next_pow2(x.len() * 4);
    let spec = dsp::rfft(x, n);
    centers
        .iter()
        .map(|&fc| {
            let (lo, hi) = (fc / 2f64.sqrt(), fc * 2f64.sqrt());
            let e: f64 = (0..=n / 2)
                .filter(|&k| {
                    let f = k as f64 * fs / n as f64;
                    f >= lo && f < hi
                })
                .map(|k| spec[k].norm_sqr())
                .sum();
            dsp::db10(e)
        })
        .collect()
}

fn criterion_9() -> Outcome {
    let p = stimuli::pink_pulse(44100, 0.5).unwrap();
    let e = octave_energies_db(&p.samples, 44100.0, &[63.0, 125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0]);
    let mean = e.iter().sum::<f64>() / e.len() as f64;
    let spread = e.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    let env = stimuli::envelope_db(&p.samples, 44100.0);
    let at = (0.036 * 44100.0_f64).round() as usize;
    let env36 = env[at..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    outcome(
        p.samples.len() == PINK_LEN && spread <= PINK_FLAT_DB && env36 <= -60.0,
        format!(
            "length {}; octave deviation {spread:.3} dB; envelope after 36 ms {env36:.1} dBFS; ramp {} dB/s",
            p.samples.len(),
            p.envelope_ramp_db_per_s
        ),
    )
}

fn criterion_10() -> Outcome {
    let sweep = stimuli::ess_generate(100.0, 22050.0, 3.2, 44100).unwrap();
    let ir = stimuli::ess_deconvolve(&stimuli::as_mono_ir(&sweep), &sweep).unwrap();
    let par = stimuli::peak_to_artifact_db(&ir.channels[0], 44100.0, ESS_GUARD_S);
    outcome(par >= ESS_PAR_DB, format!("peak-to-artifact {par:.1} dB"))
}

fn criterion_11() -> Outcome {
    let fs = 44100u32;
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let t60 = 0.3 + 2.7 * seed as f64 / 19.0;
        let mut r = rng::derive(seed, "decay", 0);
        let len = (1.2 * t60 * fs as f64) as usize;
        let x: Vec<f64> = (0..len)
            .map(|i| {
                let g: f64 = r.sample(rand_distr::StandardNormal);
                g * 10f64.powf(-3.0 * i as f64 / (t60 * fs as f64))
            })
            .collect();
        let t = analysis::t30_of(&x, fs).unwrap();
        worst = worst.max(((t - t60) / t60).abs());
    }
    let mut r = rng::derive(11, "noise", 0);
    let noise: Vec<f64> = (0..fs as usize).map(|_| r.sample(rand_distr::StandardNormal)).collect();
    let p = analysis::ned(&noise, fs, NED_WINDOW).unwrap();
    let (lo, hi) = p.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    outcome(
        worst < T30_EST_REL && lo >= NED_NOISE.0 && hi <= NED_NOISE.1,
        format!("worst T30 error {:.2} %; noise NED in [{lo:.3}, {hi:.3}]", 100.0 * worst),
    )
}

fn criterion_12() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for run in 0..2 {
        let ir = rendered("pub", RenderingProfile::razr_full(), OutputMode::Binaural, Some(1.0));
        let p = dir.path().join(format!("run{run}.wav"));
        io::write_wav(&p, &ir.channels, ir.sample_rate, SampleFormat::Float32).unwrap();
        bytes.push(std::fs::read(&p).unwrap());
    }
    let identical = bytes[0] == bytes[1];
    let start = Instant::now();
    let ir = rendered("living-room", RenderingProfile::razr_full(), OutputMode::Binaural, Some(2.0));
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        identical && elapsed < RENDER_RUNTIME_S && ir.semantics == ChannelSemantics::BinauralLR,
        format!("byte-identical reruns {identical}; living-room 2 s binaural render {elapsed:.2} s"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("image-source correctness", criterion_1),
        ("reverberation-time fidelity", criterion_2),
        ("spectral matching", criterion_3),
        ("echo-density ordering", criterion_4),
        ("dual-slope decay", criterion_5),
        ("two-stage coupling", criterion_6),
        ("vbap", criterion_7),
        ("diotic contract", criterion_8),
        ("pink pulse", criterion_9),
        ("sweep pipeline", criterion_10),
        ("estimator accuracy", criterion_11),
        ("determinism and performance", criterion_12),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || *f == (i + 1).to_string()) {
            continue;
        }
        let o = check();
        println!("{} criterion {:>2} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
