//! Third-octave smoothing and single-filter spectral matching.
//!
//! The spectrum of a multichannel response is the channel-averaged power
//! spectrum of the whole response.

use crate::dsp;
use crate::error::{Error, Result};
use crate::spatial::ImpulseResponse;

/// Correction limit in dB.
pub const MATCH_CLAMP_DB: f64 = 12.0;
pub const MATCH_FILTER_TAPS: usize = 2048;
/// Width, in octaves, of the fade from the band-edge correction to unity.
const EDGE_TAPER_OCT: f64 = 0.5;

/// Replace each bin of a half spectrum (DC to Nyquist, linearly spaced)
/// by the energy mean over ±1/6 octave around it.
pub fn third_octave_smooth(magnitude: &[f64]) -> Vec<f64> {
    let n = magnitude.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for m in magnitude {
        prefix.push(prefix.last().copied().unwrap_or(0.0) + m * m);
    }
    let (lo_r, hi_r) = (2f64.powf(-1.0 / 6.0), 2f64.powf(1.0 / 6.0));
    (0..n)
        .map(|k| {
            let lo = ((k as f64 * lo_r).ceil() as usize).min(k);
            let hi = ((k as f64 * hi_r).floor() as usize).clamp(k, n - 1);
            ((prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64).sqrt()
        })
        .collect()
}

/// Smoothed magnitude (bins 0..=n/2) of `x` on an `n`-point grid.
pub fn smoothed_magnitude(x: &[f64], n: usize) -> Vec<f64> {
    let spec = dsp::rfft(x, n);
    third_octave_smooth(&spec[..=n / 2].iter().map(|c| c.norm()).collect::<Vec<_>>())
}

fn averaged_smoothed(ir: &ImpulseResponse, n: usize) -> Vec<f64> {
    let mut power = vec![0.0; n / 2 + 1];
    for ch in &ir.channels {
        let spec = dsp::rfft(ch, n);
        for (p, c) in power.iter_mut().zip(&spec) {
            *p += c.norm_sqr();
        }
    }
    let k = ir.channels.len().max(1) as f64;
    third_octave_smooth(&power.iter().map(|p| (p / k).sqrt()).collect::<Vec<_>>())
}

/// 1/12-octave frequencies from `range.0` up to `range.1`.
pub fn log_grid(range: (f64, f64), fs: f64) -> Result<Vec<f64>> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi > lo && hi <= fs / 2.0 + 1e-9) {
        return Err(Error::InvalidInput(format!(
            "frequency range [{lo}, {hi}] Hz is not inside (0, {}]",
            fs / 2.0
        )));
    }
    let steps = (12.0 * (hi / lo).log2()).floor() as usize;
    Ok((0..=steps).map(|i| lo * 2f64.powf(i as f64 / 12.0)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMatchReport {
    /// Mean absolute deviation after matching, dB.
    pub residual_mean_db: f64,
    pub residual_rms_db: f64,
    pub residual_max_db: f64,
    /// Mean absolute deviation before matching, dB.
    pub initial_mean_db: f64,
    pub band_range: (f64, f64),
    /// Whether the correction hit the clamp anywhere in range.
    pub clamped: bool,
    pub filter_taps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMatch {
    pub corrected: ImpulseResponse,
    pub filter: Vec<f64>,
    pub report: SpectralMatchReport,
}

fn check_rates(a: &ImpulseResponse, b: &ImpulseResponse) -> Result<()> {
    if a.sample_rate != b.sample_rate {
        return Err(Error::RateMismatch(a.sample_rate, b.sample_rate));
    }
    Ok(())
}

/// `(mean absolute, RMS, max absolute)` deviation of `b` from `a` in dB,
/// on the 1/12-octave grid over `range`.
pub fn deviation(a: &ImpulseResponse, b: &ImpulseResponse, range: (f64, f64)) -> Result<(f64, f64, f64)> {
    check_rates(a, b)?;
    let fs = a.sample_rate as f64;
    let n = dsp::next_pow2(a.len().max(b.len()).max(2));
    let sa = averaged_smoothed(a, n);
    let sb = averaged_smoothed(b, n);
    let diffs: Vec<f64> = log_grid(range, fs)?
        .into_iter()
        .map(|f| {
            let k = ((f * n as f64 / fs).round() as usize).min(n / 2);
            dsp::db20(sb[k].max(1e-300)) - dsp::db20(sa[k].max(1e-300))
        })
        .collect();
    let m = diffs.len() as f64;
    Ok((
        diffs.iter().map(|d| d.abs()).sum::<f64>() / m,
        (diffs.iter().map(|d| d * d).sum::<f64>() / m).sqrt(),
        diffs.iter().fold(0.0, |acc: f64, d| acc.max(d.abs())),
    ))
}

/// Correction gain in dB at `f`: the clamped in-range ratio, faded to 0 dB
/// with a raised cosine over half an octave beyond either band edge.
fn correction_db(f: f64, range: (f64, f64), ratio_db: &dyn Fn(f64) -> f64) -> f64 {
    let (lo, hi) = range;
    let (edge, dist) = if f < lo {
        (lo, (lo / f.max(1e-9)).log2())
    } else if f > hi {
        (hi, (f / hi).log2())
    } else {
        return ratio_db(f);
    };
    if dist >= EDGE_TAPER_OCT {
        return 0.0;
    }
    ratio_db(edge) * 0.5 * (1.0 + (std::f64::consts::PI * dist / EDGE_TAPER_OCT).cos())
}

/// Single minimum-phase correction filter bringing the average spectrum of
/// `sim` onto that of `reference`, applied to every channel of `sim`.
pub fn match_spectrum(sim: &ImpulseResponse, reference: &ImpulseResponse, range: (f64, f64)) -> Result<SpectralMatch> {
    check_rates(sim, reference)?;
    let fs = sim.sample_rate as f64;
    let grid = log_grid(range, fs)?;
    let n = dsp::next_pow2(sim.len().max(reference.len()).max(MATCH_FILTER_TAPS));
    let ss = averaged_smoothed(sim, n);
    let sr = averaged_smoothed(reference, n);
    let bin = |f: f64| ((f * n as f64 / fs).round() as usize).min(n / 2);
    let peak = ss.iter().fold(0.0, |m: f64, v| m.max(*v));
    if grid.iter().all(|&f| !(ss[bin(f)] > peak * 1e-12)) {
        return Err(Error::Infeasible("simulated response is spectrally empty in the match range".into()));
    }
    let raw_db = |f: f64| {
        let k = bin(f);
        dsp::db20(sr[k].max(1e-300)) - dsp::db20(ss[k].max(1e-300))
    };
    let clamped = grid.iter().any(|&f| raw_db(f).abs() > MATCH_CLAMP_DB);
    let ratio_db = |f: f64| raw_db(f).clamp(-MATCH_CLAMP_DB, MATCH_CLAMP_DB);
    let magnitude: Vec<f64> = (0..MATCH_FILTER_TAPS)
        .map(|k| dsp::from_db20(correction_db(dsp::bin_freq(k, MATCH_FILTER_TAPS, fs), range, &ratio_db)))
        .collect();
    let filter = dsp::minimum_phase(&magnitude);
    let corrected = ImpulseResponse::new(
        sim.channels.iter().map(|c| dsp::convolve(c, &filter)).collect(),
        sim.sample_rate,
        sim.semantics,
    );
    let (mean, rms, max) = deviation(reference, &corrected, range)?;
    let initial = deviation(reference, sim, range)?.0;
    Ok(SpectralMatch {
        report: SpectralMatchReport {
            residual_mean_db: mean,
            residual_rms_db: rms,
            residual_max_db: max,
            initial_mean_db: initial,
            band_range: range,
            clamped,
            filter_taps: filter.clone(),
        },
        corrected,
        filter,
    })
}
