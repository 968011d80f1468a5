#![allow(dead_code)]

use std::collections::BTreeMap;

use alodsim_core::bands;
use alodsim_core::dsp;
use alodsim_core::scene::{preset, ReceiverKind, RoomSpec, SceneSpec, SourceSpec};
use alodsim_core::Vec3;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

/// Single shoebox with uniform absorption, one omni source and one receiver.
pub fn shoebox_scene(dims: Vec3, alpha: f64, src: Vec3, rcv: Vec3, seed: u64) -> SceneSpec {
    let mut scene = preset("pub").unwrap();
    scene.name = Some("shoebox".into());
    scene.rooms = vec![RoomSpec {
        id: "box".into(),
        origin: Vec3::ZERO,
        dims,
        absorption: [bands::uniform(alpha); 6],
        scattering: bands::uniform(0.3),
        volume_override: None,
        decay_target: None,
    }];
    scene.panels.clear();
    scene.apertures.clear();
    scene.sources = vec![SourceSpec::omni("s", "box", src)];
    scene.receivers.truncate(1);
    scene.receivers[0].room = "box".into();
    scene.receivers[0].position = rcv;
    scene.receivers[0].kind = ReceiverKind::Omni;
    scene.seed = seed;
    scene.profile = None;
    scene
}

/// Repeatedly mirror across all six walls, keeping each distinct position at
/// the depth it first appears.
pub fn mirror_oracle(room: &RoomSpec, src: Vec3, max_order: u32) -> Vec<(u32, Vec3)> {
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
                    seen.entry(key(q)).or_insert_with(|| {
                        next.push(q);
                        (depth, q)
                    });
                }
            }
        }
        frontier = next;
    }
    seen.into_values().collect()
}

/// Gaussian noise with an exponential envelope reaching -60 dB at `t60`.
pub fn decaying_noise(t60: f64, fs: u32, seconds: f64, seed: u64) -> Vec<f64> {
    let mut r = rand::rngs::StdRng::seed_from_u64(seed);
    let rate = 3.0 * std::f64::consts::LN_10 / t60;
    (0..(seconds * fs as f64) as usize)
        .map(|i| {
            let g: f64 = r.sample(StandardNormal);
            g * (-rate * i as f64 / fs as f64).exp()
        })
        .collect()
}

pub fn gaussian_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rand::rngs::StdRng::seed_from_u64(seed);
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

/// RMS of `a - b` relative to the RMS of `b`, over the common length; any
/// excess in the longer signal counts as error.
pub fn rel_rms(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    let at = |x: &[f64], i: usize| x.get(i).copied().unwrap_or(0.0);
    let err: f64 = (0..n).map(|i| (at(a, i) - at(b, i)).powi(2)).sum();
    let reference: f64 = b.iter().map(|v| v * v).sum();
    (err / reference).sqrt()
}

/// Relative spectral distance between `h` and the minimum-phase system with
/// the same magnitude, built from the causally folded real cepstrum on an
/// `n`-point grid.
pub fn min_phase_distance(h: &[f64], n: usize) -> f64 {
    let spec = dsp::rfft(h, n);
    let mut full: Vec<Complex64> = (0..n).map(|k| if k <= n / 2 { spec[k] } else { spec[n - k].conj() }).collect();
    let mut cep: Vec<Complex64> = full.iter().map(|c| Complex64::new(c.norm().max(1e-300).ln(), 0.0)).collect();
    dsp::ifft_in_place(&mut cep);
    for (k, c) in cep.iter_mut().enumerate() {
        let w = match k {
            0 => 1.0,
            k if k < n / 2 => 2.0,
            k if k == n / 2 => 1.0,
            _ => 0.0,
        };
        *c = Complex64::new(c.re * w, 0.0);
    }
    dsp::fft_in_place(&mut cep);
    let num: f64 = full.iter().zip(&cep).map(|(a, l)| (a - l.exp()).norm_sqr()).sum();
    let den: f64 = full.iter_mut().map(|a| a.norm_sqr()).sum();
    (num / den).sqrt()
}
