//! Test stimuli, convolution auralization and sweep deconvolution.

use rand::Rng as _;
use rustfft::num_complex::Complex64;

use crate::dsp;
use crate::error::{Error, Result};
use crate::rng;
use crate::spatial::{ChannelSemantics, ImpulseResponse};

/// Octave-band centres of the pink-pulse variants.
pub const VARIANT_CENTERS: [f64; 10] = [31.5, 63.0, 125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0, 16000.0];
pub const PINK_LOW_HZ: f64 = 50.0;
/// The pulse envelope must be this far down by [`PINK_DECAY_TIME`].
pub const PINK_DECAY_DB: f64 = -60.0;
pub const PINK_DECAY_TIME: f64 = 0.036;

#[derive(Debug, Clone, PartialEq)]
pub enum StimulusKind {
    PinkPulse,
    PinkPulseVariant(BandLevels),
    Ess { f1: f64, f2: f64, duration: f64 },
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stimulus {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub kind: StimulusKind,
    /// Extra decay (dB/s) applied to meet the pulse envelope limit; 0 when
    /// the construction met it on its own.
    pub envelope_ramp_db_per_s: f64,
}

impl Stimulus {
    pub fn external(samples: Vec<f64>, sample_rate: u32) -> Self {
        Stimulus {
            samples,
            sample_rate,
            kind: StimulusKind::External,
            envelope_ramp_db_per_s: 0.0,
        }
    }
}

/// Per-octave offsets of a pink-pulse variant, each -6, 0 or +6 dB.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandLevels([i8; 10]);

impl BandLevels {
    pub const ALLOWED: [i8; 3] = [-6, 0, 6];

    pub fn new(offsets_db: [i8; 10]) -> Result<Self> {
        match offsets_db.iter().position(|o| !Self::ALLOWED.contains(o)) {
            Some(i) => Err(Error::validation(format!("levels[{i}]"), "must be -6, 0 or +6 dB")),
            None => Ok(BandLevels(offsets_db)),
        }
    }

    pub fn flat() -> Self {
        BandLevels([0; 10])
    }

    /// Every band drawn uniformly from the three levels.
    pub fn random(seed: u64) -> Self {
        let mut r = rng::derive(seed, "band-levels", 0);
        BandLevels(std::array::from_fn(|_| Self::ALLOWED[r.random_range(0..3)]))
    }

    pub fn offsets_db(&self) -> [i8; 10] {
        self.0
    }

    /// Offset in dB at `f`. Neighbouring bands meet at the geometric midpoints
    /// of their centres with a raised-cosine crossfade in log frequency, which
    /// keeps the reconstructed pulse short.
    fn gain_db(&self, f: f64) -> f64 {
        let octaves = (f.max(1.0) / VARIANT_CENTERS[0]).log2();
        let x = octaves.clamp(0.0, (VARIANT_CENTERS.len() - 1) as f64);
        let i = (x.floor() as usize).min(VARIANT_CENTERS.len() - 2);
        let t = x - i as f64;
        let (a, b) = (self.0[i] as f64, self.0[i + 1] as f64);
        let lo = 0.5 - VARIANT_CROSSFADE_OCT / 2.0;
        let u = ((t - lo) / VARIANT_CROSSFADE_OCT).clamp(0.0, 1.0);
        a + (b - a) * 0.5 * (1.0 - (std::f64::consts::PI * u).cos())
    }
}

/// Width in octaves of the crossfade between neighbouring variant bands.
const VARIANT_CROSSFADE_OCT: f64 = 0.1;

/// Corner of the second-order high-pass shape used below [`PINK_LOW_HZ`].
const PINK_ROLLOFF_CORNER_HZ: f64 = 35.0;

/// Pink magnitude from 50 Hz to Nyquist. Below 50 Hz it follows a
/// second-order high-pass magnitude, scaled to meet the pink part at 50 Hz;
/// a steeper rolloff rings too long for the envelope limit.
fn pink_magnitude(f: f64) -> f64 {
    let highpass = |f: f64| {
        let r = (f / PINK_ROLLOFF_CORNER_HZ).powi(2);
        r / (1.0 + r * r).sqrt()
    };
    if f >= PINK_LOW_HZ {
        1.0 / f.sqrt()
    } else {
        highpass(f) / highpass(PINK_LOW_HZ) / PINK_LOW_HZ.sqrt()
    }
}

pub fn pink_pulse(sample_rate: u32, duration: f64) -> Result<Stimulus> {
    pink_pulse_variant(&BandLevels::flat(), sample_rate, duration)
}

pub fn pink_pulse_variant(levels: &BandLevels, sample_rate: u32, duration: f64) -> Result<Stimulus> {
    if sample_rate < 8000 {
        return Err(Error::InvalidInput("pink pulse needs fs >= 8 kHz".into()));
    }
    let fs = sample_rate as f64;
    let len = (duration * fs).round() as usize;
    if len == 0 {
        return Err(Error::InvalidInput("pulse duration is zero".into()));
    }
    let n = dsp::next_pow2(4 * len);
    let peak_mag = 1.0 / PINK_LOW_HZ.sqrt();
    let magnitude: Vec<f64> = (0..n)
        .map(|k| {
            let f = dsp::bin_freq(k, n, fs);
            let m = pink_magnitude(f) * dsp::from_db20(levels.gain_db(f));
            m.max(peak_mag * 1e-6)
        })
        .collect();
    let mut x = dsp::minimum_phase(&magnitude);
    x.truncate(len);
    normalize_peak(&mut x);
    let ramp = enforce_envelope(&mut x, fs);
    let kind = if *levels == BandLevels::flat() {
        StimulusKind::PinkPulse
    } else {
        StimulusKind::PinkPulseVariant(*levels)
    };
    Ok(Stimulus {
        samples: x,
        sample_rate,
        kind,
        envelope_ramp_db_per_s: ramp,
    })
}

fn normalize_peak(x: &mut [f64]) {
    let peak = x.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v /= peak);
    }
}

/// Smallest exponential ramp (in 50 dB/s steps) that brings the envelope
/// after [`PINK_DECAY_TIME`] below [`PINK_DECAY_DB`].
fn enforce_envelope(x: &mut Vec<f64>, fs: f64) -> f64 {
    let start = (PINK_DECAY_TIME * fs).round() as usize;
    let meets = |y: &[f64]| envelope_db(y, fs).iter().skip(start).all(|&v| v <= PINK_DECAY_DB);
    if meets(x) {
        return 0.0;
    }
    let base = x.clone();
    let mut rate = 0.0;
    while rate < 20_000.0 {
        rate += 50.0;
        *x = base
            .iter()
            .enumerate()
            .map(|(i, v)| v * dsp::from_db20(-rate * i as f64 / fs))
            .collect();
        normalize_peak(x);
        if meets(x) {
            break;
        }
    }
    rate
}

/// Envelope in dB: analytic-signal magnitude smoothed over 1 ms.
pub fn envelope_db(x: &[f64], fs: f64) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let n = dsp::next_pow2(2 * x.len());
    let mut spec = dsp::rfft(x, n);
    for (k, c) in spec.iter_mut().enumerate() {
        if k > 0 && k < n / 2 {
            *c *= 2.0;
        } else if k > n / 2 {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    dsp::ifft_in_place(&mut spec);
    let mag: Vec<f64> = spec[..x.len()].iter().map(|c| c.norm()).collect();
    let half = ((0.0005 * fs).round() as usize).max(1);
    let mut prefix = vec![0.0; mag.len() + 1];
    for (i, m) in mag.iter().enumerate() {
        prefix[i + 1] = prefix[i] + m;
    }
    (0..mag.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(mag.len());
            dsp::db20(((prefix[hi] - prefix[lo]) / (hi - lo) as f64).max(1e-300))
        })
        .collect()
}

/// Each channel of `ir` convolved with the stimulus.
pub fn convolve(stimulus: &Stimulus, ir: &ImpulseResponse) -> Result<ImpulseResponse> {
    if stimulus.sample_rate != ir.sample_rate {
        return Err(Error::RateMismatch(stimulus.sample_rate, ir.sample_rate));
    }
    let channels = ir.channels.iter().map(|h| dsp::convolve(&stimulus.samples, h)).collect();
    Ok(ImpulseResponse::new(channels, ir.sample_rate, ir.semantics))
}

/// Sweep fades, in octaves of sweep progress. They keep band-edge ringing
/// out of the deconvolved response.
const SWEEP_FADE_IN_OCT: f64 = 1.0;
const SWEEP_FADE_OUT_OCT: f64 = 1.0 / 16.0;

/// Exponential sine sweep from `f1` to `f2` over `duration` seconds, with
/// half-Hann fades over its first octave and last 1/16 octave.
pub fn ess_generate(f1: f64, f2: f64, duration: f64, sample_rate: u32) -> Result<Stimulus> {
    let fs = sample_rate as f64;
    if !(f1 > 0.0 && f1 < f2 && f2 <= fs / 2.0) {
        return Err(Error::InvalidInput(format!(
            "sweep band [{f1}, {f2}] Hz must satisfy 0 < f1 < f2 <= {}",
            fs / 2.0
        )));
    }
    if !(duration > 0.0) {
        return Err(Error::InvalidInput("sweep duration must be positive".into()));
    }
    let len = (duration * fs).round() as usize;
    let l = duration / (f2 / f1).ln();
    let fade_in = ((SWEEP_FADE_IN_OCT * 2f64.ln() * l * fs).round() as usize).min(len / 2);
    let fade_out = ((SWEEP_FADE_OUT_OCT * 2f64.ln() * l * fs).round() as usize).min(len / 2);
    let half_hann = |i: usize, n: usize| 0.5 - 0.5 * (std::f64::consts::PI * i as f64 / n as f64).cos();
    let samples = (0..len)
        .map(|i| {
            let t = i as f64 / fs;
            let mut v = (2.0 * std::f64::consts::PI * f1 * l * ((t / l).exp() - 1.0)).sin();
            if i < fade_in {
                v *= half_hann(i, fade_in);
            }
            if len - 1 - i < fade_out {
                v *= half_hann(len - 1 - i, fade_out);
            }
            v
        })
        .collect();
    Ok(Stimulus {
        samples,
        sample_rate,
        kind: StimulusKind::Ess { f1, f2, duration },
        envelope_ramp_db_per_s: 0.0,
    })
}

/// Time-reversed sweep with a 6 dB/octave amplitude compensation, scaled so
/// that the sweep deconvolves to a unit peak.
fn inverse_sweep(sweep: &Stimulus) -> Result<Vec<f64>> {
    let StimulusKind::Ess { f1, f2, duration } = sweep.kind else {
        return Err(Error::InvalidInput("deconvolution needs an exponential sweep".into()));
    };
    let fs = sweep.sample_rate as f64;
    let l = duration / (f2 / f1).ln();
    let n = sweep.samples.len();
    let mut inv: Vec<f64> = (0..n)
        .map(|i| sweep.samples[n - 1 - i] * (-(i as f64 / fs) / l).exp())
        .collect();
    let peak = dsp::convolve(&sweep.samples, &inv)[n - 1];
    inv.iter_mut().for_each(|v| *v /= peak);
    Ok(inv)
}

/// Impulse response of a recorded sweep, starting at zero lag.
pub fn ess_deconvolve(recording: &ImpulseResponse, sweep: &Stimulus) -> Result<ImpulseResponse> {
    if recording.sample_rate != sweep.sample_rate {
        return Err(Error::RateMismatch(recording.sample_rate, sweep.sample_rate));
    }
    let inv = inverse_sweep(sweep)?;
    let lag = inv.len() - 1;
    let channels = recording
        .channels
        .iter()
        .map(|c| {
            let mut y = dsp::convolve(c, &inv);
            y.drain(..lag.min(y.len()));
            y
        })
        .collect();
    Ok(ImpulseResponse::new(channels, recording.sample_rate, recording.semantics))
}

/// Peak level over the largest magnitude more than `guard` seconds away from
/// the peak, in dB.
pub fn peak_to_artifact_db(x: &[f64], fs: f64, guard: f64) -> f64 {
    let (p, peak) = x
        .iter()
        .enumerate()
        .fold((0, 0.0), |(bi, bv): (usize, f64), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
    let g = (guard * fs).round() as usize;
    let side = x
        .iter()
        .enumerate()
        .filter(|(i, _)| i.abs_diff(p) > g)
        .fold(0.0, |m: f64, (_, v)| m.max(v.abs()));
    dsp::db20(peak) - dsp::db20(side.max(1e-300))
}

/// Stimulus as a one-channel response, for feeding recordings to
/// [`ess_deconvolve`].
pub fn as_mono_ir(stimulus: &Stimulus) -> ImpulseResponse {
    ImpulseResponse::new(vec![stimulus.samples.clone()], stimulus.sample_rate, ChannelSemantics::Mono)
}
